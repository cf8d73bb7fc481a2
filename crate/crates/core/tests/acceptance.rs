//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use orbitrelay::aggregation::{
    build_mixing_matrices, delayed_average_oracle, Engine, PreHistory, RelayInit, RelaySum,
};
use orbitrelay::connectivity::{
    free_space_path_loss, link_snr_db, InterPlaneGraph, LinkBudgetParams,
};
use orbitrelay::geometry::{
    chord_distance, doppler_from_speed, geocentric_angle_deg, max_slant_range, ConstellationSpec,
    GeometryConstants, WalkerPattern,
};
use orbitrelay::harness::{cmd_energy, cmd_replay, cmd_train, cmd_tree, LoadedConfig, TreeMethod};
use orbitrelay::learning::MetricsRecord;
use orbitrelay::snn::{
    estimate_energy, hybrid_forward, hybrid_grad, rate_encode, softmax_cross_entropy, surrogate,
    Activation, Architecture, Detached, EnergyModel, LayerConfig, LifParams, Masks, ModelKind,
    Shape, SpikingNet,
};
use orbitrelay::treeopt::{
    a1cp_mdst, brute_force_mdst, for_each_spanning_tree, RoutingTree, TreeEdge,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

fn report(id: u32, name: &str, ok: bool, detail: &str, elapsed: Duration) {
    let line = format!(
        "{} {id:>2} {name}: {detail} ({:.2} s)\n",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    // Written to the real stdout so the line shows without --nocapture.
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
    assert!(ok, "{name}: {detail}");
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Uniform random labelled tree on `n` vertices from a Prüfer sequence.
fn random_tree(n: usize, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    if n < 2 {
        return Vec::new();
    }
    let seq: Vec<usize> = (0..n - 2).map(|_| rng.random_range(0..n)).collect();
    let mut degree = vec![1usize; n];
    for &s in &seq {
        degree[s] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for &s in &seq {
        let leaf = (0..n).find(|&v| degree[v] == 1).unwrap();
        edges.push((leaf.min(s), leaf.max(s)));
        degree[leaf] -= 1;
        degree[s] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    edges.push((rest[0], rest[1]));
    edges
}

/// Random connected graph: a random spanning tree plus each other pair with probability `p`.
fn random_connected(n: usize, p: f64, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    let mut edges = random_tree(n, rng);
    for a in 0..n {
        for b in a + 1..n {
            if !edges.contains(&(a, b)) && rng.random::<f64>() < p {
                edges.push((a, b));
            }
        }
    }
    edges
}

#[test]
fn relaysum_matches_delayed_average() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut checks = 0usize;
    for instance in 0..500 {
        let n = rng.random_range(1..=8);
        let tree = RoutingTree::unweighted(n, &random_tree(n, &mut rng)).unwrap();
        let tau = tree.hop_delays();
        let dim = if instance % 2 == 0 {
            1
        } else {
            rng.random_range(2..=5)
        };
        let rounds = rng.random_range(1..=25);
        let x0: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let init = if instance % 4 < 2 {
            RelayInit::Zero
        } else {
            RelayInit::Primed
        };
        let pre = match init {
            RelayInit::Zero => PreHistory::Omit,
            RelayInit::Primed => PreHistory::InitialModel(&x0),
        };
        let mut engine = RelaySum::new(tree.clone(), &x0, init);
        let mut history: Vec<Vec<Vec<f64>>> = Vec::new();
        for _ in 0..rounds {
            let updates: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect())
                .collect();
            engine.round(&updates).unwrap();
            history.push(updates);
            let expected = delayed_average_oracle(&history, &tau, pre).unwrap();
            for (got, want) in engine.models().iter().zip(&expected) {
                for (g, w) in got.iter().zip(want) {
                    worst = worst.max((g - w).abs());
                }
            }
            checks += 1;
        }
    }
    let elapsed = start.elapsed();
    let ok = worst <= 1e-10 && elapsed < Duration::from_secs(10);
    report(
        1,
        "relaysum exactness",
        ok,
        &format!("500 trees, {checks} rounds checked, max |err| {worst:.2e}"),
        elapsed,
    );
}

#[test]
fn mixing_matrix_structure() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut residual, mut spread) = (0.0f64, 0.0f64);
    let mut q_range = (f64::INFINITY, f64::NEG_INFINITY);
    let mut stochastic = true;
    for _ in 0..100 {
        let n = rng.random_range(1..=8);
        let tree = RoutingTree::unweighted(n, &random_tree(n, &mut rng)).unwrap();
        let m = build_mixing_matrices(&tree).unwrap();
        stochastic &= m.rows_exactly_stochastic();
        for r in 0..m.size() {
            let sum: f64 = m.model.row(r).iter().sum();
            stochastic &= sum == 1.0 || m.model.row(r).iter().filter(|&&x| x != 0.0).count() == n;
        }
        residual = residual.max(m.stationarity_residual());
        spread = spread.max(m.pi0_spread());
        q_range = (q_range.0.min(m.q), q_range.1.max(m.q));
    }
    let elapsed = start.elapsed();
    let ok = stochastic
        && residual <= 1e-10
        && spread <= 1e-12
        && q_range.0 > 0.0
        && q_range.1 <= 0.5
        && elapsed < Duration::from_secs(5);
    report(
        2,
        "mixing-matrix structure",
        ok,
        &format!(
            "100 trees, rows stochastic {stochastic}, max residual {residual:.2e}, max pi0 spread {spread:.2e}, q in [{:.4}, {:.4}]",
            q_range.0, q_range.1
        ),
        elapsed,
    );
}

#[test]
fn mdst_matches_exhaustive_search() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mismatches = 0;
    for _ in 0..200 {
        let n = rng.random_range(2..=7);
        let p = rng.random_range(0.0..0.8);
        // Integer weights keep every path sum exact.
        let weighted: Vec<(usize, usize, f64)> = random_connected(n, p, &mut rng)
            .into_iter()
            .map(|(a, b)| (a, b, rng.random_range(1..=16) as f64))
            .collect();
        let g = InterPlaneGraph::from_weights(n, &weighted).unwrap();
        let fast = a1cp_mdst(&g).unwrap().weighted_diameter();
        let slow = brute_force_mdst(&g).unwrap().weighted_diameter();
        if fast != slow {
            mismatches += 1;
        }
    }
    let elapsed = start.elapsed();
    let ok = mismatches == 0 && elapsed < Duration::from_secs(30);
    report(
        3,
        "mdst oracle equivalence",
        ok,
        &format!("200 graphs, {mismatches} diameter mismatches"),
        elapsed,
    );
}

#[test]
fn hop_order_dominates_weighted_order() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut pairs, mut violations, mut hop_misses) = (0usize, 0usize, 0usize);
    for _ in 0..200 {
        let n = rng.random_range(2..=8);
        let p = rng.random_range(0.0..0.7);
        let quality: Vec<(usize, usize, f64)> = random_connected(n, p, &mut rng)
            .into_iter()
            .map(|(a, b)| (a, b, 10f64.powf(rng.random_range(-3.0..3.0))))
            .collect();
        let g = InterPlaneGraph::from_quality(n, &quality).unwrap();
        let mut all: Vec<Vec<usize>> = Vec::new();
        for_each_spanning_tree(&g, |ids| all.push(ids.to_vec()));
        all.shuffle(&mut rng);
        all.truncate(150);
        let trees: Vec<(usize, f64)> = all
            .iter()
            .map(|ids| {
                let t = RoutingTree::new(
                    n,
                    ids.iter().map(|&i| {
                        let e = &g.edges[i];
                        TreeEdge {
                            a: e.a,
                            b: e.b,
                            weight: e.weight,
                        }
                    }),
                )
                .unwrap();
                (t.hop_diameter(), t.weighted_diameter())
            })
            .collect();
        for a in &trees {
            for b in &trees {
                if a.0 < b.0 {
                    pairs += 1;
                    if a.1 >= b.1 || a.1.is_nan() {
                        violations += 1;
                    }
                }
            }
        }
        let min_hops = trees.iter().map(|t| t.0).min().unwrap();
        let best = a1cp_mdst(&g).unwrap().hop_diameter();
        if best > min_hops {
            hop_misses += 1;
        }
    }
    let elapsed = start.elapsed();
    let ok = violations == 0 && hop_misses == 0;
    report(
        4,
        "hop-diameter dominance",
        ok,
        &format!(
            "200 graphs, {pairs} ordered tree pairs, {violations} violations, optimized tree above sampled min hop-diameter {hop_misses} times"
        ),
        elapsed,
    );
}

fn run_train(
    config: &Path,
    out: &Path,
    edit: impl FnOnce(&mut LoadedConfig),
) -> Vec<MetricsRecord> {
    let mut loaded = LoadedConfig::load(config).unwrap();
    edit(&mut loaded);
    cmd_train(&loaded, out).unwrap().records
}

#[test]
fn walker_42_topology_and_tree_speedup() {
    let start = Instant::now();
    let dir = TempDir::new().unwrap();
    let config = configs().join("walker42.toml");
    let mut hops = Vec::new();
    let mut losses = Vec::new();
    for method in [TreeMethod::Optimized, TreeMethod::Chain] {
        let mut loaded = LoadedConfig::load(&config).unwrap();
        loaded.config.tree.method = method;
        let out = dir.path().join(format!("{method:?}"));
        hops.push(cmd_tree(&loaded, &out).unwrap().tree.hop_diameter());
        let records = run_train(&config, &out, |c| c.config.tree.method = method);
        losses.push(
            records
                .iter()
                .map(|r| (r.rounds, r.train_loss))
                .collect::<Vec<_>>(),
        );
    }
    let chain_final = losses[1].last().unwrap().1;
    let opt_final = losses[0].last().unwrap().1;
    let reach = losses[0]
        .iter()
        .find(|(_, l)| *l <= chain_final)
        .map(|(r, _)| *r);
    let elapsed = start.elapsed();
    let ok = hops == [3, 6]
        && opt_final < chain_final
        && reach.is_some_and(|r| r < 60)
        && elapsed < Duration::from_secs(300);
    report(
        5,
        "walker 42/7/1 tree reproduction",
        ok,
        &format!(
            "hop-diameter optimized {} chain {}; loss at round 60 optimized {opt_final:.4} chain {chain_final:.4}; optimized reaches chain's final loss at round {}",
            hops[0],
            hops[1],
            reach.map_or("never".into(), |r| r.to_string())
        ),
        elapsed,
    );
}

#[test]
fn engine_ordering_under_equal_rounds() {
    let start = Instant::now();
    let dir = TempDir::new().unwrap();
    let config = configs().join("walker50_chain.toml");
    let mut acc = Vec::new();
    let mut used = Vec::new();
    for engine in [Engine::RelaySum, Engine::Gossip, Engine::AllReduce] {
        let out = dir.path().join(engine.to_string());
        let records = run_train(&config, &out, |c| c.config.train.engine = engine);
        let last = records.last().unwrap();
        acc.push(last.test_accuracy.unwrap());
        used.push(last.rounds);
    }
    let elapsed = start.elapsed();
    let ok = acc[0] > acc[1]
        && acc[0] > acc[2]
        && used.iter().all(|&r| r <= 60)
        && elapsed < Duration::from_secs(600);
    report(
        6,
        "engine ordering",
        ok,
        &format!(
            "5-plane chain, 60-round budget: test accuracy relaysum {:.4} gossip {:.4} allreduce {:.4} (rounds {:?}); gap to gossip {:.1} points",
            acc[0],
            acc[1],
            acc[2],
            used,
            100.0 * (acc[0] - acc[1])
        ),
        elapsed,
    );
}

fn random_mlp(rng: &mut ChaCha8Rng) -> SpikingNet {
    let inputs = rng.random_range(2..=6);
    let hidden = rng.random_range(1..=2);
    let mut layers: Vec<LayerConfig> = (0..hidden)
        .map(|_| LayerConfig::Dense {
            outputs: rng.random_range(2..=7),
        })
        .collect();
    layers.push(LayerConfig::Dense {
        outputs: rng.random_range(2..=4),
    });
    let arch = Architecture::new(Shape::flat(inputs), &layers).unwrap();
    let lif = LifParams {
        beta: rng.random_range(0.5..1.0),
        threshold: rng.random_range(0.5..1.5),
        timesteps: rng.random_range(1..=4),
    };
    let alpha = rng.random_range(0.2..3.0);
    let mut net = SpikingNet::new(arch, lif, alpha, rng).unwrap();
    // Larger weights so some neurons actually spike.
    let gain = rng.random_range(1.0..3.0);
    net.params.iter_mut().for_each(|p| *p *= gain);
    net
}

#[test]
fn bptt_matches_finite_differences() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let instances = 24;
    for _ in 0..instances {
        let net = random_mlp(&mut rng);
        let t = net.lif.timesteps;
        let x: Vec<f64> = (0..net.arch.input.len()).map(|_| rng.random()).collect();
        let input = rate_encode(&x, t, &mut rng);
        let p = rng.random_range(0.0..1.0);
        let masks = Masks::sample(&net.arch, t, p, &mut rng);
        let label = rng.random_range(0..net.arch.classes());
        let base = net.forward(&input, Activation::Hybrid(&masks)).unwrap();
        let frozen = Detached::from_pass(&net, &base);
        let (_, dz) = softmax_cross_entropy(&base.logits, label).unwrap();
        let mut grad = vec![0.0; net.params.len()];
        net.backward(&base, &dz, &mut grad).unwrap();
        let mut probe = net.clone();
        let mut loss = |params: &[f64]| {
            probe.params.copy_from_slice(params);
            let pass = probe.forward(&input, Activation::Frozen(&frozen)).unwrap();
            softmax_cross_entropy(&pass.logits, label).unwrap().0
        };
        let h = 1e-4;
        let mut params = net.params.clone();
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..params.len() {
            let orig = params[i];
            params[i] = orig + h;
            let up = loss(&params);
            params[i] = orig - h;
            let down = loss(&params);
            params[i] = orig;
            let fd = (up - down) / (2.0 * h);
            num += (fd - grad[i]).powi(2);
            den += fd.abs().max(grad[i].abs()).powi(2);
        }
        worst = worst.max((num / den.max(f64::MIN_POSITIVE)).sqrt());
    }
    let elapsed = start.elapsed();
    let ok = worst < 1e-4 && elapsed < Duration::from_secs(60);
    report(
        7,
        "snn gradient correctness",
        ok,
        &format!("{instances} random spiking MLPs, worst relative error {worst:.2e}"),
        elapsed,
    );
}

#[test]
fn hybrid_activation_contract() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);

    // Whole-network forward: all-ones masks reproduce binary inference bit for bit.
    let mut forward_equal = true;
    for _ in 0..50 {
        let net = random_mlp(&mut rng);
        let t = net.lif.timesteps;
        let x: Vec<f64> = (0..net.arch.input.len()).map(|_| rng.random()).collect();
        let input = rate_encode(&x, t, &mut rng);
        let ones = Masks::constant(&net.arch, t, true);
        let hybrid = net.forward(&input, Activation::Hybrid(&ones)).unwrap();
        let binary = net.forward(&input, Activation::Binary).unwrap();
        let same = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits());
        forward_equal &= same(&hybrid.logits, &binary.logits);
        for (a, b) in hybrid.activations.iter().zip(&binary.activations) {
            forward_equal &= same(a, b);
        }
    }

    // Elementwise: the gradient is the sigmoid derivative whatever the mask.
    let mut worst_grad = 0.0f64;
    let mut worst_fd = 0.0f64;
    for _ in 0..2000 {
        let theta = rng.random_range(0.2..2.0);
        let alpha = rng.random_range(0.05..5.0);
        let u: Vec<f64> = (0..4).map(|_| rng.random_range(-6.0..8.0)).collect();
        let g = hybrid_grad(&u, theta, alpha);
        for (&ui, &gi) in u.iter().zip(&g) {
            let s = 1.0 / (1.0 + (-alpha * (ui - theta)).exp());
            let analytic = alpha * s * (1.0 - s);
            worst_grad = worst_grad.max((gi - analytic).abs() / analytic.max(1e-300));
            let h = 1e-6;
            let fd =
                (surrogate(ui + h, theta, alpha) - surrogate(ui - h, theta, alpha)) / (2.0 * h);
            worst_fd = worst_fd.max((fd - gi).abs() / (alpha / 4.0));
        }
        let mask: Vec<bool> = (0..4).map(|_| rng.random()).collect();
        let out = hybrid_forward(&u, &mask, theta, alpha).unwrap();
        for ((&ui, &m), &o) in u.iter().zip(&mask).zip(&out) {
            let want = if m {
                if ui > theta {
                    1.0
                } else {
                    0.0
                }
            } else {
                surrogate(ui, theta, alpha)
            };
            forward_equal &= o == want;
        }
    }

    // Network level: with one timestep and one hidden layer, the hidden layer's
    // gradients do not see the mask at all.
    let mut network_independent = true;
    for _ in 0..50 {
        let inputs = rng.random_range(2..=5);
        let arch = Architecture::new(
            Shape::flat(inputs),
            &[
                LayerConfig::Dense {
                    outputs: rng.random_range(2..=6),
                },
                LayerConfig::Dense { outputs: 3 },
            ],
        )
        .unwrap();
        let lif = LifParams {
            beta: 0.9,
            threshold: 1.0,
            timesteps: 1,
        };
        let net = SpikingNet::new(arch, lif, 0.7, &mut rng).unwrap();
        let x: Vec<f64> = (0..inputs).map(|_| rng.random()).collect();
        let input = rate_encode(&x, 1, &mut rng);
        let dlogits: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let first = net.arch.layers[0].weight_count() + net.arch.layers[0].bias_count();
        let alpha_index = net.params.len() - 1;
        let mut grads = Vec::new();
        for p in [0.0, 0.5, 1.0] {
            let masks = Masks::sample(&net.arch, 1, p, &mut rng);
            let pass = net.forward(&input, Activation::Hybrid(&masks)).unwrap();
            let mut g = vec![0.0; net.params.len()];
            net.backward(&pass, &dlogits, &mut g).unwrap();
            let mut kept = g[..first].to_vec();
            kept.push(g[alpha_index]);
            grads.push(kept);
        }
        network_independent &= grads.windows(2).all(|w| w[0] == w[1]);
    }

    let elapsed = start.elapsed();
    let ok = forward_equal && worst_grad < 1e-12 && worst_fd < 1e-6 && network_independent;
    report(
        8,
        "hybrid activation contract",
        ok,
        &format!(
            "m=1 bit-exact {forward_equal}; gradient vs analytic {worst_grad:.1e}, vs finite differences {worst_fd:.1e}; mask-independent hidden gradients {network_independent}"
        ),
        elapsed,
    );
}

#[test]
fn energy_estimates() {
    let start = Instant::now();
    let model = EnergyModel::default();
    let ann = estimate_energy(&[1000], &[0.2], 3, ModelKind::Ann, &model).unwrap();
    let snn = estimate_energy(&[1000], &[0.2], 3, ModelKind::Snn, &model).unwrap();
    let zero = estimate_energy(&[1000, 500], &[0.0, 0.0], 3, ModelKind::Snn, &model).unwrap();
    let ratio = ann / snn;
    let arithmetic = ann == 1000.0 * 4.6e-12 && snn == 1000.0 * 0.2 * 3.0 * 0.9e-12 && zero == 0.0;
    let formula = (ratio - 4.6 / (0.2 * 3.0 * 0.9)).abs() < 1e-12;

    // Measured rates from a trained network.
    let dir = TempDir::new().unwrap();
    let config = configs().join("walker50_chain.toml");
    let loaded = LoadedConfig::load(&config).unwrap();
    let out = dir.path().join("run");
    let records = cmd_train(&loaded, &out).unwrap().records;
    let last = records.last().unwrap();
    let checkpoint = out.join(format!("checkpoints/plane0_iter{}.json", last.iteration));
    let report_e = cmd_energy(&loaded, &checkpoint, &dir.path().join("energy")).unwrap();
    let measured = report_e.ratio();
    let elapsed = start.elapsed();
    let ok = arithmetic && formula && report_e.snn_total_j < report_e.ann_total_j;
    let rates: Vec<String> = report_e
        .layers
        .iter()
        .map(|l| format!("{:.3}", l.input_rate))
        .collect();
    report(
        9,
        "energy estimator",
        ok,
        &format!(
            "1000 MACs: ANN {ann:e} J, SNN(0.2, T=3) {snn:e} J, ratio {ratio:.3}; trained MLP (accuracy {:.3}, input rates [{}]): ANN {:.3e} J vs SNN {:.3e} J, reduction {measured:.2}x",
            last.test_accuracy.unwrap(),
            rates.join(", "),
            report_e.ann_total_j,
            report_e.snn_total_j
        ),
        elapsed,
    );
}

fn rel(got: f64, want: f64) -> f64 {
    if want == 0.0 {
        got.abs()
    } else {
        ((got - want) / want).abs()
    }
}

#[test]
fn geometry_closed_forms() {
    let start = Instant::now();
    let k = GeometryConstants::default();
    let r = k.earth_radius_km;
    let link = LinkBudgetParams::default();
    let c = k.light_speed_km_s;
    let spec = ConstellationSpec {
        total_satellites: 42,
        planes: 7,
        phasing: 1,
        inclination_deg: 53.0,
        altitude_km: 550.0,
        pattern: WalkerPattern::Delta,
    };
    let cases: Vec<(&str, f64, f64)> = vec![
        (
            "angle equator quarter turn",
            geocentric_angle_deg(0.0, 0.0, 0.0, 90.0),
            std::f64::consts::FRAC_PI_2,
        ),
        (
            "angle pole to pole",
            geocentric_angle_deg(90.0, 0.0, -90.0, 0.0),
            std::f64::consts::PI,
        ),
        (
            "angle along meridian",
            geocentric_angle_deg(0.0, 10.0, 45.0, 10.0),
            std::f64::consts::FRAC_PI_4,
        ),
        (
            "angle over the pole",
            geocentric_angle_deg(30.0, 0.0, 30.0, 180.0),
            2.0 * std::f64::consts::FRAC_PI_3,
        ),
        (
            "angle 60N quarter turn",
            geocentric_angle_deg(60.0, 0.0, 60.0, 90.0),
            0.722_734_247_813_415_6,
        ),
        (
            "angle mixed hemispheres",
            geocentric_angle_deg(10.0, 20.0, -35.0, 140.0),
            2.097_809_627_482_82,
        ),
        (
            "chord 550 km at 60 deg",
            chord_distance(550.0, 550.0, 60f64.to_radians(), r),
            6921.0,
        ),
        (
            "chord 550 km at 90 deg",
            chord_distance(550.0, 550.0, 90f64.to_radians(), r),
            9_787.772_065_184_19,
        ),
        (
            "chord 550 km at 180 deg",
            chord_distance(550.0, 550.0, std::f64::consts::PI, r),
            13_842.0,
        ),
        (
            "chord 550/1200 km at 30 deg",
            chord_distance(550.0, 1200.0, 30f64.to_radians(), r),
            3_802.990_997_588_138,
        ),
        (
            "radial separation 550/1200 km",
            chord_distance(550.0, 1200.0, 0.0, r),
            650.0,
        ),
        (
            "max slant range 550 km",
            max_slant_range(550.0, 550.0, r),
            5_407.624_247_301_212,
        ),
        (
            "max slant range 550/1200 km",
            max_slant_range(550.0, 1200.0, r),
            6_794.093_287_580_538,
        ),
        (
            "doppler at the 60 kHz boundary",
            doppler_from_speed(7.494_811_45, 2.4e9, c),
            60_000.0,
        ),
        (
            "doppler at 7.5 km/s",
            doppler_from_speed(7.5, 2.4e9, c),
            60_041.537_135_667_37,
        ),
        (
            "path loss at 1 km",
            free_space_path_loss(1.0, 2.4e9, c).unwrap(),
            10_120_472_884.315_343,
        ),
        (
            "path loss at 1000 km",
            free_space_path_loss(1000.0, 2.4e9, c).unwrap(),
            1.012_047_288_431_534_4e16,
        ),
        (
            "snr at 1 km (dB)",
            link_snr_db(1.0, &link, &k).unwrap(),
            38.871_679_354_913_55,
        ),
        (
            "snr at 2500 km (dB)",
            link_snr_db(2500.0, &link, &k).unwrap(),
            -29.087_120_818_527_2,
        ),
        (
            "orbital period at 550 km",
            spec.orbital_period_s(&k),
            5_730.127_089_334_607,
        ),
        (
            "circular speed at 550 km",
            spec.circular_speed_km_s(&k),
            7.588_998_434_594_857,
        ),
    ];
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    for (name, got, want) in &cases {
        let e = rel(*got, *want);
        worst = worst.max(e);
        if e > 1e-9 {
            failures.push(format!("{name}: {got} vs {want}"));
        }
    }
    let elapsed = start.elapsed();
    report(
        10,
        "geometry closed forms",
        failures.is_empty(),
        &format!(
            "{} cases, worst relative error {worst:.1e}{}",
            cases.len(),
            if failures.is_empty() {
                String::new()
            } else {
                format!("; {}", failures.join("; "))
            }
        ),
        elapsed,
    );
}

#[test]
fn training_replays_bit_for_bit() {
    let start = Instant::now();
    let dir = TempDir::new().unwrap();
    let mut identical = true;
    let mut lines = 0;
    for name in ["walker50_chain.toml", "quadratic5.toml"] {
        let config = configs().join(name);
        let a = dir.path().join(format!("{name}-a"));
        let b = dir.path().join(format!("{name}-b"));
        let c = dir.path().join(format!("{name}-replay"));
        let shorten = |l: &mut LoadedConfig| {
            l.config.train.iterations = 12;
            l.config.train.round_budget = None;
        };
        run_train(&config, &a, shorten);
        run_train(&config, &b, shorten);
        cmd_replay(&a.join("manifest.json"), &c).unwrap();
        let first = std::fs::read(a.join("metrics.jsonl")).unwrap();
        lines += first.iter().filter(|&&ch| ch == b'\n').count();
        identical &= first == std::fs::read(b.join("metrics.jsonl")).unwrap();
        identical &= first == std::fs::read(c.join("metrics.jsonl")).unwrap();
        identical &= std::fs::read(a.join("summary.csv")).unwrap()
            == std::fs::read(c.join("summary.csv")).unwrap();
    }
    let elapsed = start.elapsed();
    report(
        11,
        "determinism",
        identical,
        &format!("spiking and quadratic runs, repeated and replayed from manifest: {lines} metric lines, byte-identical {identical}"),
        elapsed,
    );
}
