use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::{Dataset, Partition};
use super::local::{local_sgd, ring_allreduce_mean, stream_seed};
use super::model::Model;
use super::TrainConfig;
use crate::aggregation::{
    allreduce_tree, build_mixing_matrices, gossip_round, metropolis_hastings, Engine, GossipMatrix,
    RelaySum,
};
use crate::error::{Error, Result};
use crate::snn::SpikeRecord;
use crate::treeopt::RoutingTree;

const INIT_STREAM: u64 = 0;
const SATELLITE_STREAM: u64 = 1;
const EVAL_STREAM: u64 = 2;

/// Largest stacked-history size for which the run also reports the π-weighted
/// consensus distance.
const MAX_ANALYZED_STATES: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub iteration: usize,
    /// Cumulative inter-plane communication rounds.
    pub rounds: usize,
    /// Cumulative inter-plane messages and their payload size.
    pub messages: usize,
    pub bytes: usize,
    /// Cumulative ring segment transfers inside planes.
    pub intra_plane_transfers: usize,
    /// Mean over planes of each plane model's training loss.
    pub train_loss: f64,
    /// Mean over planes of each plane model's test accuracy.
    pub test_accuracy: Option<f64>,
    /// `f(x̄) − f*`; absent when `f*` is unknown.
    pub suboptimality: Option<f64>,
    pub optimum_known: bool,
    pub consensus_distance: f64,
    pub consensus_distance_pi: Option<f64>,
    /// `‖∇f(x̄)‖²`.
    pub gradient_norm_sq: f64,
    /// Input spiking rate per layer, pooled over planes on the test samples.
    pub spike_rates: Option<Vec<f64>>,
}

pub struct TrainInputs<'a> {
    pub config: &'a TrainConfig,
    pub tree: &'a RoutingTree,
    pub model: &'a dyn Model,
    pub train: &'a Dataset,
    pub test: Option<&'a Dataset>,
    pub partition: &'a Partition,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub records: Vec<MetricsRecord>,
    pub plane_models: Vec<Vec<f64>>,
}

enum InterPlane {
    Relay(RelaySum),
    Gossip(GossipMatrix),
    AllReduce,
}

/// `(1/N)·Σ_r ‖Ȳ − Y_r‖²` over every row of the stacked history
/// (`history[τ][i]` is node `i`'s model `τ` iterations ago). `Ȳ` is the plain
/// mean, or the `weights`-weighted mean when given (indexed `N·τ + i`).
pub fn consensus_distance(history: &[Vec<Vec<f64>>], weights: Option<&[f64]>) -> Result<f64> {
    let rows: Vec<&Vec<f64>> = history.iter().flatten().collect();
    let nodes = history.first().map_or(0, Vec::len);
    if rows.is_empty() || nodes == 0 {
        return Err(Error::Invalid("empty history".into()));
    }
    let dim = rows[0].len();
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::Shape("history rows differ in length".into()));
    }
    if let Some(w) = weights {
        if w.len() != rows.len() {
            return Err(Error::Shape(format!(
                "{} weights for {} rows",
                w.len(),
                rows.len()
            )));
        }
    }
    let mut mean = vec![0.0; dim];
    for (r, row) in rows.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[r]);
        for (m, v) in mean.iter_mut().zip(row.iter()) {
            *m += w * v;
        }
    }
    if weights.is_none() {
        mean.iter_mut().for_each(|m| *m /= rows.len() as f64);
    }
    let total: f64 = rows
        .iter()
        .map(|row| {
            row.iter()
                .zip(&mean)
                .map(|(v, m)| (m - v) * (m - v))
                .sum::<f64>()
        })
        .sum();
    Ok(total / nodes as f64)
}

fn mean_model(models: &[Vec<f64>]) -> Vec<f64> {
    let mut mean = vec![0.0; models[0].len()];
    for m in models {
        for (a, b) in mean.iter_mut().zip(m) {
            *a += b;
        }
    }
    let n = models.len() as f64;
    mean.iter_mut().for_each(|a| *a /= n);
    mean
}

struct MetricContext<'a> {
    inputs: &'a TrainInputs<'a>,
    train_idx: Vec<usize>,
    test_idx: Vec<usize>,
    all_idx: Vec<usize>,
    optimum: Option<f64>,
    pi: Option<Vec<f64>>,
    eval_seed: u64,
}

impl MetricContext<'_> {
    fn record(
        &self,
        iteration: usize,
        counters: &Counters,
        history: &VecDeque<Vec<Vec<f64>>>,
    ) -> Result<MetricsRecord> {
        let model = self.inputs.model;
        let planes = &history[0];
        let mut train_loss = 0.0;
        let mut accuracy: Option<f64> = None;
        let mut spikes: Option<SpikeRecord> = None;
        for x in planes {
            train_loss += model
                .evaluate(x, self.inputs.train, &self.train_idx, self.eval_seed)?
                .loss;
            if let Some(test) = self.inputs.test {
                let e = model.evaluate(x, test, &self.test_idx, self.eval_seed)?;
                if let Some(a) = e.accuracy {
                    *accuracy.get_or_insert(0.0) += a;
                }
                if let Some(s) = e.spikes {
                    match spikes.as_mut() {
                        Some(total) => total.merge(&s)?,
                        None => spikes = Some(s),
                    }
                }
            }
        }
        let n = planes.len() as f64;
        let x_bar = mean_model(planes);
        let suboptimality = match self.optimum {
            Some(f_star) => Some(
                model
                    .evaluate(&x_bar, self.inputs.train, &self.all_idx, self.eval_seed)?
                    .loss
                    - f_star,
            ),
            None => None,
        };
        let (_, grad) =
            model.loss_grad(&x_bar, self.inputs.train, &self.train_idx, self.eval_seed)?;
        let stacked: Vec<Vec<Vec<f64>>> = history.iter().cloned().collect();
        let record = MetricsRecord {
            iteration,
            rounds: counters.rounds,
            messages: counters.messages,
            bytes: counters.messages * planes[0].len() * std::mem::size_of::<f64>(),
            intra_plane_transfers: counters.intra,
            train_loss: train_loss / n,
            test_accuracy: accuracy.map(|a| a / n),
            suboptimality,
            optimum_known: self.optimum.is_some(),
            consensus_distance: consensus_distance(&stacked, None)?,
            consensus_distance_pi: match &self.pi {
                Some(pi) => Some(consensus_distance(&stacked, Some(pi))?),
                None => None,
            },
            gradient_norm_sq: grad.iter().map(|g| g * g).sum(),
            spike_rates: spikes.map(|s| s.rates()),
        };
        if !record.train_loss.is_finite() {
            return Err(Error::Numeric(format!(
                "training loss diverged at iteration {iteration}"
            )));
        }
        Ok(record)
    }
}

#[derive(Default)]
struct Counters {
    rounds: usize,
    messages: usize,
    intra: usize,
}

/// Runs the decentralized loop: each iteration broadcasts plane models to their
/// satellites, alternates local SGD with ring all-reduce `intra_rounds` times,
/// then performs one inter-plane aggregation step. `on_record` sees every
/// metrics record (iteration 0 is the initial state) with the plane models.
pub fn train(
    inputs: &TrainInputs<'_>,
    mut on_record: impl FnMut(&MetricsRecord, &[Vec<f64>]) -> Result<()>,
) -> Result<TrainOutcome> {
    let cfg = inputs.config;
    cfg.validate()?;
    let tree = inputs.tree;
    let n = tree.vertices();
    let k = inputs.partition.satellites_per_plane();
    if inputs.partition.planes() != n {
        return Err(Error::Shape(format!(
            "partition has {} planes, tree has {n}",
            inputs.partition.planes()
        )));
    }
    if k == 0 || inputs.partition.shards.iter().any(|p| p.len() != k) {
        return Err(Error::Shape(
            "every plane needs the same positive number of satellites".into(),
        ));
    }
    let model = inputs.model;
    let seed = cfg.seed;
    let x0 = model.init(stream_seed(seed, &[INIT_STREAM]));
    let dim = x0.len();
    let mut planes = vec![x0.clone(); n];

    let depth = match cfg.engine {
        Engine::RelaySum => tree.tau_max() + 1,
        _ => 1,
    };
    let pi = if cfg.engine == Engine::RelaySum && n * depth <= MAX_ANALYZED_STATES {
        Some(build_mixing_matrices(tree)?.pi)
    } else {
        None
    };
    let mut engine = match cfg.engine {
        Engine::RelaySum => InterPlane::Relay(RelaySum::new(tree.clone(), &x0, cfg.relay_init)),
        Engine::Gossip => InterPlane::Gossip(metropolis_hastings(tree)),
        Engine::AllReduce => InterPlane::AllReduce,
    };
    let round_cost = match cfg.engine {
        Engine::AllReduce if n > 1 => 2 * tree.hop_diameter(),
        Engine::AllReduce => 0,
        _ => 1,
    };

    let cap = |d: &Dataset| (0..d.len().min(cfg.eval_samples)).collect::<Vec<_>>();
    let ctx = MetricContext {
        inputs,
        train_idx: cap(inputs.train),
        test_idx: inputs.test.map(cap).unwrap_or_default(),
        all_idx: (0..inputs.train.len()).collect(),
        optimum: model.optimum(inputs.train).map(|(_, f)| f),
        pi,
        eval_seed: stream_seed(seed, &[EVAL_STREAM]),
    };

    let mut history: VecDeque<Vec<Vec<f64>>> = (0..depth).map(|_| planes.clone()).collect();
    let mut counters = Counters::default();
    let mut records = Vec::with_capacity(cfg.iterations + 1);
    let first = ctx.record(0, &counters, &history)?;
    on_record(&first, &planes)?;
    records.push(first);

    let opts = cfg.local();
    for t in 0..cfg.iterations {
        if let Some(budget) = cfg.round_budget {
            if counters.rounds + round_cost > budget {
                break;
            }
        }
        let mut satellites: Vec<(usize, usize, Vec<f64>)> = (0..n)
            .flat_map(|i| (0..k).map(move |s| (i, s)))
            .map(|(i, s)| (i, s, planes[i].clone()))
            .collect();
        for r in 0..cfg.intra_rounds {
            satellites.par_iter_mut().try_for_each(|(i, s, x)| {
                let stream = stream_seed(
                    seed,
                    &[SATELLITE_STREAM, *i as u64, *s as u64, t as u64, r as u64],
                );
                local_sgd(
                    model,
                    x,
                    inputs.train,
                    &inputs.partition.shards[*i][*s],
                    &opts,
                    stream,
                )
                .map(|_| ())
            })?;
            for i in 0..n {
                let group: Vec<Vec<f64>> = satellites[i * k..(i + 1) * k]
                    .iter()
                    .map(|(_, _, x)| x.clone())
                    .collect();
                let (mean, cost) = ring_allreduce_mean(&group)?;
                counters.intra += cost.transfers_per_satellite * k;
                for (_, _, x) in &mut satellites[i * k..(i + 1) * k] {
                    x.copy_from_slice(&mean);
                }
            }
        }
        let half: Vec<Vec<f64>> = (0..n).map(|i| satellites[i * k].2.clone()).collect();
        match &mut engine {
            InterPlane::Relay(relay) => {
                relay.round(&half)?;
                planes = relay.models();
                counters.messages += relay.messages_per_round();
            }
            InterPlane::Gossip(w) => {
                planes = half;
                gossip_round(&mut planes, w)?;
                counters.messages += 2 * tree.edges().len();
            }
            InterPlane::AllReduce => {
                planes = half;
                counters.messages += allreduce_tree(&mut planes, tree)?.messages;
            }
        }
        counters.rounds += round_cost;
        history.pop_back();
        history.push_front(planes.clone());
        let record = ctx.record(t + 1, &counters, &history)?;
        on_record(&record, &planes)?;
        records.push(record);
    }
    debug_assert!(planes.iter().all(|p| p.len() == dim));
    Ok(TrainOutcome {
        records,
        plane_models: planes,
    })
}

/// Plain SGD on one shard with the stream layout `train` uses for satellite
/// `(0, 0)`; returns the model after every iteration.
pub fn centralized_sgd(
    model: &dyn Model,
    data: &Dataset,
    shard: &[usize],
    config: &TrainConfig,
) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    let mut x = model.init(stream_seed(config.seed, &[INIT_STREAM]));
    let opts = config.local();
    let mut out = Vec::with_capacity(config.iterations);
    for t in 0..config.iterations {
        for r in 0..config.intra_rounds {
            let stream = stream_seed(config.seed, &[SATELLITE_STREAM, 0, 0, t as u64, r as u64]);
            local_sgd(model, &mut x, data, shard, &opts, stream)?;
        }
        out.push(x.clone());
    }
    Ok(out)
}
