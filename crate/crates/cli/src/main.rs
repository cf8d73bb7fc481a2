use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use orbitrelay::aggregation::Engine;
use orbitrelay::harness::{
    cmd_energy, cmd_replay, cmd_topology, cmd_train, cmd_tree, resolve_output_dir, LoadedConfig,
    Overrides, TreeMethod, OUTPUT_ROOT_ENV,
};
use orbitrelay::Error;

#[derive(Parser, Debug)]
#[command(
    name = "orbitrelay",
    version,
    about = "Decentralized satellite learning simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the configured one.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Root for relative output directories.
    #[arg(long = "output-root", env = OUTPUT_ROOT_ENV, hide = true)]
    output_root: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// relaysum, gossip or allreduce.
    #[arg(long)]
    engine: Option<Engine>,
    /// optimized, chain, brute-force or explicit-file.
    #[arg(long = "tree-method")]
    tree_method: Option<TreeMethod>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the stable inter-plane connectivity graph.
    Topology(Common),
    /// Select the inter-plane aggregation tree.
    Tree(Common),
    /// Run decentralized training.
    Train {
        #[command(flatten)]
        common: Common,
        /// Rerun from a previous run's manifest.json instead of the config.
        #[arg(long)]
        replay: Option<PathBuf>,
    },
    /// Per-layer ANN vs SNN energy of a spiking checkpoint.
    Energy {
        #[command(flatten)]
        common: Common,
        /// Checkpoint manifest (JSON) written by `train`.
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

fn load(common: &Common) -> Result<(LoadedConfig, PathBuf), Error> {
    let mut loaded = LoadedConfig::load(&common.config)?;
    Overrides {
        seed: common.seed,
        engine: common.engine,
        tree_method: common.tree_method,
    }
    .apply(&mut loaded.config);
    let out = resolve_output_dir(
        common.out.as_deref(),
        common.output_root.as_deref(),
        &loaded,
    );
    Ok((loaded, out))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.6e}"))
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Topology(common) => {
            let (loaded, out) = load(&common)?;
            let report = cmd_topology(&loaded, &out)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "vertices {} edges {} connected yes -> {}",
                report.graph.vertices,
                report.graph.edges.len(),
                out.display()
            );
        }
        Command::Tree(common) => {
            let (loaded, out) = load(&common)?;
            let report = cmd_tree(&loaded, &out)?;
            let t = &report.tree;
            println!(
                "method {:?} hop-diameter {} weighted-diameter {:.6} tau-max {} tau-tilde {} -> {}",
                report.method,
                t.hop_diameter(),
                t.weighted_diameter(),
                t.tau_max(),
                t.tau_tilde(),
                out.display()
            );
        }
        Command::Train { common, replay } => {
            let report = match replay {
                Some(manifest) => {
                    let out = common
                        .out
                        .clone()
                        .unwrap_or_else(|| default_replay_dir(&manifest));
                    cmd_replay(&manifest, &out)?
                }
                None => {
                    let (loaded, out) = load(&common)?;
                    cmd_train(&loaded, &out)?
                }
            };
            let last = report.records.last().expect("initial record");
            println!(
                "iterations {} rounds {} train-loss {:.6e} test-accuracy {} suboptimality {}",
                last.iteration,
                last.rounds,
                last.train_loss,
                opt(last.test_accuracy),
                opt(last.suboptimality)
            );
        }
        Command::Energy { common, checkpoint } => {
            let (loaded, out) = load(&common)?;
            let report = cmd_energy(&loaded, &checkpoint, &out)?;
            for l in &report.layers {
                println!(
                    "layer {} macs {} rate {:.4} ann {:.4e} J snn {:.4e} J",
                    l.layer, l.macs, l.input_rate, l.ann_j, l.snn_j
                );
            }
            println!(
                "total ann {:.4e} J snn {:.4e} J ratio {:.2}",
                report.ann_total_j,
                report.snn_total_j,
                report.ratio()
            );
        }
    }
    Ok(())
}

fn default_replay_dir(manifest: &Path) -> PathBuf {
    manifest.parent().unwrap_or(Path::new(".")).join("replay")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
