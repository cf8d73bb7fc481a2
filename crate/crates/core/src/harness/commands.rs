use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{DataConfig, LoadedConfig, RunConfig, TreeMethod};
use crate::aggregation::Engine;
use crate::connectivity::{build_interplane_graph, InterPlaneGraph};
use crate::error::{Error, Result};
use crate::learning::{
    dirichlet_partition, gaussian_mixture, stream_seed, texture_patterns, train, Dataset,
    LinearSoftmax, MetricsRecord, MixtureSpec, Model, ModelKind, Partition, PatternSpec,
    QuadraticModel, SpikingModel, TrainInputs,
};
use crate::snn::{
    energy_table, Architecture, Checkpoint, CheckpointManifest, LayerConfig, LayerEnergy, Shape,
    CHECKPOINT_FORMAT,
};
use crate::treeopt::{a1cp_mdst, brute_force_mdst, chain_tree, RoutingTree, TreeDocument};

/// Environment variable naming the directory under which run outputs are placed.
pub const OUTPUT_ROOT_ENV: &str = "ORBITRELAY_OUT";

const DATA_STREAM: u64 = 10;
const PARTITION_STREAM: u64 = 11;
const TRAIN_STREAM: u64 = 12;

/// Command-line overrides applied on top of a configuration file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub engine: Option<Engine>,
    pub tree_method: Option<TreeMethod>,
}

impl Overrides {
    pub fn apply(&self, config: &mut RunConfig) {
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(engine) = self.engine {
            config.train.engine = engine;
        }
        if let Some(method) = self.tree_method {
            config.tree.method = method;
        }
    }
}

/// `--out` wins; otherwise the configured `output_dir` (or the config file stem)
/// under the output root, which defaults to the working directory.
pub fn resolve_output_dir(
    cli_out: Option<&Path>,
    env_root: Option<&Path>,
    loaded: &LoadedConfig,
) -> PathBuf {
    if let Some(out) = cli_out {
        return out.to_path_buf();
    }
    let root = env_root.map_or_else(|| PathBuf::from("."), Path::to_path_buf);
    match &loaded.config.output_dir {
        Some(dir) => root.join(dir),
        None => {
            let stem = loaded
                .source
                .as_deref()
                .and_then(Path::file_stem)
                .map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
            root.join("runs").join(stem)
        }
    }
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub fn build_graph(config: &RunConfig) -> Result<InterPlaneGraph> {
    let timestamps = config
        .constellation
        .sampling_grid(&config.geometry, config.topology.sample_step_s)?;
    build_interplane_graph(
        &config.constellation,
        &config.geometry,
        &timestamps,
        &config.link,
        config.topology.stability,
    )
}

#[derive(Debug, Clone)]
pub struct TopologyReport {
    pub graph: InterPlaneGraph,
    pub warnings: Vec<String>,
}

/// Builds the stable inter-plane graph and writes `graph.json` and `graph.dot`.
pub fn cmd_topology(loaded: &LoadedConfig, out: &Path) -> Result<TopologyReport> {
    loaded.validate()?;
    let graph = build_graph(&loaded.config)?;
    let mut warnings = Vec::new();
    if graph.vertices == 1 {
        warnings.push("single orbit plane: the inter-plane graph is trivial".to_string());
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    create_dir(out)?;
    write(&out.join("graph.json"), graph.to_json() + "\n")?;
    write(&out.join("graph.dot"), graph.to_dot())?;
    Ok(TopologyReport { graph, warnings })
}

/// The tree the configuration asks for, plus the raw file bytes for `explicit-file`.
pub fn resolve_tree(
    loaded: &LoadedConfig,
    graph: &InterPlaneGraph,
) -> Result<(RoutingTree, Option<Vec<u8>>)> {
    match loaded.config.tree.method {
        TreeMethod::Optimized => Ok((a1cp_mdst(graph)?, None)),
        TreeMethod::Chain => Ok((chain_tree(graph)?, None)),
        TreeMethod::BruteForce => Ok((brute_force_mdst(graph)?, None)),
        TreeMethod::ExplicitFile => {
            let path = loaded
                .tree_file()
                .ok_or_else(|| Error::Config("tree.method explicit-file needs tree.file".into()))?;
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            let text = std::str::from_utf8(&bytes)
                .map_err(|_| Error::Config(format!("tree file {} is not UTF-8", path.display())))?;
            let tree = RoutingTree::from_json(text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            if tree.vertices() != graph.vertices {
                return Err(Error::Config(format!(
                    "tree file has {} vertices, constellation has {} planes",
                    tree.vertices(),
                    graph.vertices
                )));
            }
            for (a, b) in tree.edge_pairs() {
                if graph.edge_index(a, b).is_none() {
                    log::warn!("tree edge ({a}, {b}) is not a stable inter-plane link");
                }
            }
            Ok((tree, Some(bytes)))
        }
    }
}

#[derive(Debug, Clone)]
pub struct TreeReport {
    pub tree: RoutingTree,
    pub method: TreeMethod,
}

fn write_tree(out: &Path, tree: &RoutingTree, raw: Option<&[u8]>) -> Result<()> {
    create_dir(out)?;
    match raw {
        Some(bytes) => write(&out.join("tree.json"), bytes)?,
        None => write(&out.join("tree.json"), tree.to_json() + "\n")?,
    }
    write(&out.join("tree.dot"), tree.to_dot())
}

/// Builds the graph inline, picks the tree and writes `tree.json` and `tree.dot`.
/// An explicit tree file is copied byte for byte.
pub fn cmd_tree(loaded: &LoadedConfig, out: &Path) -> Result<TreeReport> {
    loaded.validate()?;
    let graph = build_graph(&loaded.config)?;
    let (tree, raw) = resolve_tree(loaded, &graph)?;
    write_tree(out, &tree, raw.as_deref())?;
    Ok(TreeReport {
        tree,
        method: loaded.config.tree.method,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSeeds {
    pub data: u64,
    pub partition: u64,
    pub train: u64,
}

impl StageSeeds {
    pub fn derive(seed: u64) -> Self {
        Self {
            data: stream_seed(seed, &[DATA_STREAM]),
            partition: stream_seed(seed, &[PARTITION_STREAM]),
            train: stream_seed(seed, &[TRAIN_STREAM]),
        }
    }
}

pub struct Task {
    pub model: Box<dyn Model>,
    pub train: Dataset,
    pub test: Option<Dataset>,
    pub partition: Partition,
}

/// Generates the data, splits it over planes and satellites, and builds the model.
pub fn build_task(config: &RunConfig, seeds: &StageSeeds) -> Result<Task> {
    let planes = config.constellation.planes;
    let sats = config.constellation.satellites_per_plane();
    let (train_set, test_set) = match config.data {
        DataConfig::Quadratic {
            dim,
            spread,
            curvature_spread,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seeds.data);
            let plane_targets: Vec<Vec<f64>> = (0..planes)
                .map(|_| {
                    (0..dim)
                        .map(|_| spread * (2.0 * rng.random::<f64>() - 1.0))
                        .collect()
                })
                .collect();
            let curvature: Vec<f64> = (0..planes)
                .flat_map(|_| {
                    let c = 1.0 + curvature_spread * (2.0 * rng.random::<f64>() - 1.0);
                    std::iter::repeat_n(c, sats)
                })
                .collect();
            let model = if curvature_spread > 0.0 {
                QuadraticModel::with_curvature(dim, curvature)?
            } else {
                QuadraticModel::new(dim)
            };
            let targets: Vec<Vec<f64>> = plane_targets
                .iter()
                .flat_map(|t| std::iter::repeat_n(t.clone(), sats))
                .collect();
            let data = Dataset::quadratic(&targets)?;
            return Ok(Task {
                model: Box::new(model),
                train: data,
                test: None,
                partition: Partition::one_per_satellite(planes, sats),
            });
        }
        DataConfig::GaussianMixture {
            dim,
            classes,
            noise,
            train_samples,
            test_samples,
        } => gaussian_mixture(
            &MixtureSpec {
                dim,
                classes,
                noise,
            },
            train_samples,
            test_samples,
            seeds.data,
        )?,
        DataConfig::Patterns {
            side,
            classes,
            noise,
            train_samples,
            test_samples,
        } => texture_patterns(
            &PatternSpec {
                side,
                classes,
                noise,
            },
            train_samples,
            test_samples,
            seeds.data,
        )?,
    };
    let partition = dirichlet_partition(
        &train_set.labels,
        train_set.classes,
        planes,
        sats,
        config.train.heterogeneity,
        seeds.partition,
    )?;
    let model: Box<dyn Model> = match config.train.model {
        ModelKind::Quadratic => unreachable!("validated against the data kind"),
        ModelKind::LinearSoftmax => Box::new(LinearSoftmax {
            inputs: train_set.dim(),
            classes: train_set.classes,
        }),
        kind @ (ModelKind::SpikingMlp | ModelKind::SpikingCnn) => {
            let mut layers = config.snn.hidden_layers(kind);
            layers.push(LayerConfig::Dense {
                outputs: train_set.classes,
            });
            let input = match kind {
                ModelKind::SpikingMlp => Shape::flat(train_set.dim()),
                _ => train_set.input,
            };
            Box::new(SpikingModel {
                kind,
                arch: Architecture::new(input, &layers)?,
                lif: config.snn.lif(),
                alpha: config.snn.alpha,
                mask_probability: config.snn.mask_probability,
            })
        }
    };
    Ok(Task {
        model,
        train: train_set,
        test: Some(test_set),
        partition,
    })
}

/// Everything needed to rerun a training command bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub config: RunConfig,
    pub seeds: StageSeeds,
    pub tree: TreeDocument,
    pub satellites_per_plane: usize,
    pub iterations_completed: usize,
    pub rounds_used: usize,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub records: Vec<MetricsRecord>,
    pub manifest: RunManifest,
    pub tree: RoutingTree,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn csv_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:?}"))
}

fn summary_csv(records: &[MetricsRecord]) -> String {
    let mut out = String::from(
        "iteration,rounds,messages,bytes,train_loss,test_accuracy,suboptimality,consensus_distance,consensus_distance_pi,gradient_norm_sq\n",
    );
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{:?},{},{},{:?},{},{:?}\n",
            r.iteration,
            r.rounds,
            r.messages,
            r.bytes,
            r.train_loss,
            csv_opt(r.test_accuracy),
            csv_opt(r.suboptimality),
            r.consensus_distance,
            csv_opt(r.consensus_distance_pi),
            r.gradient_norm_sq,
        ));
    }
    out
}

fn checkpoint_planes(
    dir: &Path,
    task: &Task,
    config: &RunConfig,
    iteration: usize,
    planes: &[Vec<f64>],
    eval_seed: u64,
) -> Result<()> {
    create_dir(dir)?;
    let spiking =
        task.model.kind() == ModelKind::SpikingMlp || task.model.kind() == ModelKind::SpikingCnn;
    let architecture = if spiking {
        let mut layers = config.snn.hidden_layers(task.model.kind());
        layers.push(LayerConfig::Dense {
            outputs: task.train.classes,
        });
        let input = match task.model.kind() {
            ModelKind::SpikingMlp => Shape::flat(task.train.dim()),
            _ => task.train.input,
        };
        Some(Architecture::new(input, &layers)?)
    } else {
        None
    };
    for (i, x) in planes.iter().enumerate() {
        let spike_rates = match (&architecture, &task.test) {
            (Some(_), Some(test)) => {
                let idx: Vec<usize> = (0..test.len().min(config.train.eval_samples)).collect();
                task.model
                    .evaluate(x, test, &idx, eval_seed)?
                    .spikes
                    .map(|s| s.rates())
            }
            _ => None,
        };
        let stem = format!("plane{i}_iter{iteration}");
        let ck = Checkpoint {
            manifest: CheckpointManifest {
                format: CHECKPOINT_FORMAT.into(),
                model: task.model.kind().to_string(),
                parameter_count: x.len(),
                weights_file: format!("{stem}.bin"),
                iteration,
                plane: i,
                architecture: architecture.clone(),
                lif: architecture.as_ref().map(|_| config.snn.lif()),
                spike_rates,
            },
            params: x.clone(),
        };
        ck.save(dir, &stem)?;
    }
    Ok(())
}

fn run_training(
    config: &RunConfig,
    tree: RoutingTree,
    tree_raw: Option<&[u8]>,
    config_sha256: String,
    out: &Path,
) -> Result<TrainReport> {
    let started = Instant::now();
    create_dir(out)?;
    write_tree(out, &tree, tree_raw)?;
    let seeds = StageSeeds::derive(config.seed);
    let task = build_task(config, &seeds)?;
    let mut train_config = config.train.clone();
    train_config.seed = seeds.train;
    let inputs = TrainInputs {
        config: &train_config,
        tree: &tree,
        model: task.model.as_ref(),
        train: &task.train,
        test: task.test.as_ref(),
        partition: &task.partition,
    };
    let metrics_path = out.join("metrics.jsonl");
    let file = File::create(&metrics_path).map_err(|e| Error::io(&metrics_path, e))?;
    let mut metrics = BufWriter::new(file);
    let checkpoint_dir = out.join("checkpoints");
    let eval_seed = stream_seed(seeds.train, &[u64::MAX]);
    let outcome = train(&inputs, |record, planes| {
        let line = serde_json::to_string(record)?;
        writeln!(metrics, "{line}")
            .and_then(|_| metrics.flush())
            .map_err(|e| Error::io(&metrics_path, e))?;
        if config.checkpoint_every > 0
            && record.iteration > 0
            && record.iteration % config.checkpoint_every == 0
        {
            checkpoint_planes(
                &checkpoint_dir,
                &task,
                config,
                record.iteration,
                planes,
                eval_seed,
            )?;
        }
        Ok(())
    })?;
    drop(metrics);
    let last = outcome
        .records
        .last()
        .expect("initial record always present");
    checkpoint_planes(
        &checkpoint_dir,
        &task,
        config,
        last.iteration,
        &outcome.plane_models,
        eval_seed,
    )?;
    write(&out.join("summary.csv"), summary_csv(&outcome.records))?;
    let manifest = RunManifest {
        tool: "orbitrelay".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_sha256,
        config: config.clone(),
        seeds,
        tree: tree.to_document(),
        satellites_per_plane: config.constellation.satellites_per_plane(),
        iterations_completed: last.iteration,
        rounds_used: last.rounds,
        elapsed_s: started.elapsed().as_secs_f64(),
    };
    write(
        &out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    Ok(TrainReport {
        records: outcome.records,
        manifest,
        tree,
    })
}

/// Resolves the tree, trains, and writes `metrics.jsonl`, `summary.csv`,
/// `manifest.json`, the tree files and plane checkpoints.
pub fn cmd_train(loaded: &LoadedConfig, out: &Path) -> Result<TrainReport> {
    loaded.validate()?;
    let graph = build_graph(&loaded.config)?;
    let (tree, raw) = resolve_tree(loaded, &graph)?;
    run_training(
        &loaded.config,
        tree,
        raw.as_deref(),
        sha256_hex(&loaded.raw),
        out,
    )
}

/// Reruns the training recorded in a manifest, with its resolved tree.
pub fn cmd_replay(manifest_path: &Path, out: &Path) -> Result<TrainReport> {
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: RunManifest = serde_json::from_str(&text)?;
    let tree = manifest.tree.clone().into_tree()?;
    run_training(&manifest.config, tree, None, manifest.config_sha256, out)
}

#[derive(Debug, Clone)]
pub struct EnergyReport {
    pub layers: Vec<LayerEnergy>,
    pub ann_total_j: f64,
    pub snn_total_j: f64,
}

impl EnergyReport {
    pub fn ratio(&self) -> f64 {
        self.ann_total_j / self.snn_total_j
    }
}

/// Per-layer ANN and SNN energy of a spiking checkpoint, written to `energy.csv`.
pub fn cmd_energy(loaded: &LoadedConfig, checkpoint: &Path, out: &Path) -> Result<EnergyReport> {
    loaded.validate()?;
    let ck = Checkpoint::load(checkpoint)?;
    let (Some(arch), Some(lif)) = (&ck.manifest.architecture, &ck.manifest.lif) else {
        return Err(Error::Invalid(format!(
            "checkpoint {} is not a spiking network",
            checkpoint.display()
        )));
    };
    let Some(rates) = &ck.manifest.spike_rates else {
        return Err(Error::Invalid(format!(
            "checkpoint {} carries no spike records",
            checkpoint.display()
        )));
    };
    let layers = energy_table(&arch.macs(), rates, lif.timesteps, &loaded.config.energy)?;
    let ann_total_j: f64 = layers.iter().map(|l| l.ann_j).sum();
    let snn_total_j: f64 = layers.iter().map(|l| l.snn_j).sum();
    let mut csv = String::from("layer,macs,input_rate,ann_j,snn_j,ann_over_snn\n");
    for l in &layers {
        csv.push_str(&format!(
            "{},{},{},{:e},{:e},{}\n",
            l.layer,
            l.macs,
            l.input_rate,
            l.ann_j,
            l.snn_j,
            l.ratio()
        ));
    }
    let total_macs: u64 = layers.iter().map(|l| l.macs).sum();
    csv.push_str(&format!(
        "total,{total_macs},,{ann_total_j:e},{snn_total_j:e},{}\n",
        ann_total_j / snn_total_j
    ));
    create_dir(out)?;
    write(&out.join("energy.csv"), csv)?;
    Ok(EnergyReport {
        layers,
        ann_total_j,
        snn_total_j,
    })
}
