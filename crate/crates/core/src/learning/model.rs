use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::Dataset;
use crate::error::{Error, Result};
use crate::snn::{softmax_cross_entropy, Architecture, LifParams, SpikeRecord, SpikingNet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Quadratic,
    LinearSoftmax,
    SpikingMlp,
    SpikingCnn,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Quadratic => "quadratic",
            ModelKind::LinearSoftmax => "linear-softmax",
            ModelKind::SpikingMlp => "spiking-mlp",
            ModelKind::SpikingCnn => "spiking-cnn",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: Option<f64>,
    pub spikes: Option<SpikeRecord>,
}

/// A differentiable objective over flat parameter vectors.
pub trait Model: Send + Sync {
    fn kind(&self) -> ModelKind;

    fn parameter_count(&self) -> usize;

    fn init(&self, seed: u64) -> Vec<f64>;

    /// Mean loss and gradient over `batch`.
    fn loss_grad(
        &self,
        params: &[f64],
        data: &Dataset,
        batch: &[usize],
        seed: u64,
    ) -> Result<(f64, Vec<f64>)>;

    fn evaluate(
        &self,
        params: &[f64],
        data: &Dataset,
        indices: &[usize],
        seed: u64,
    ) -> Result<Evaluation>;

    /// Global minimizer and minimum over `data`, when known in closed form.
    fn optimum(&self, _data: &Dataset) -> Option<(Vec<f64>, f64)> {
        None
    }
}

/// `f(x) = mean_s ½·c_s‖x − a_s‖²`, with every curvature `c_s = 1` unless given.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticModel {
    pub dim: usize,
    /// Per-sample curvature; empty means all ones.
    pub curvature: Vec<f64>,
}

impl QuadraticModel {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            curvature: Vec::new(),
        }
    }

    pub fn with_curvature(dim: usize, curvature: Vec<f64>) -> Result<Self> {
        if curvature.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::Invalid(
                "curvatures must be positive and finite".into(),
            ));
        }
        Ok(Self { dim, curvature })
    }

    fn c(&self, i: usize) -> f64 {
        self.curvature.get(i).copied().unwrap_or(1.0)
    }

    fn check_data(&self, data: &Dataset) -> Result<()> {
        if !self.curvature.is_empty() && self.curvature.len() != data.len() {
            return Err(Error::Shape(format!(
                "{} curvatures for {} samples",
                self.curvature.len(),
                data.len()
            )));
        }
        Ok(())
    }

    fn loss_at(&self, params: &[f64], data: &Dataset, indices: &[usize]) -> f64 {
        let total: f64 = indices
            .iter()
            .map(|&i| {
                let (a, _) = data.sample(i);
                0.5 * self.c(i)
                    * params
                        .iter()
                        .zip(a)
                        .map(|(x, a)| (x - a) * (x - a))
                        .sum::<f64>()
            })
            .sum();
        total / indices.len().max(1) as f64
    }
}

impl Model for QuadraticModel {
    fn kind(&self) -> ModelKind {
        ModelKind::Quadratic
    }

    fn parameter_count(&self) -> usize {
        self.dim
    }

    fn init(&self, _seed: u64) -> Vec<f64> {
        vec![0.0; self.dim]
    }

    fn loss_grad(
        &self,
        params: &[f64],
        data: &Dataset,
        batch: &[usize],
        _seed: u64,
    ) -> Result<(f64, Vec<f64>)> {
        check_len(self.dim, params)?;
        self.check_data(data)?;
        let mut grad = vec![0.0; self.dim];
        for &i in batch {
            let (a, _) = data.sample(i);
            let c = self.c(i);
            for ((g, x), a) in grad.iter_mut().zip(params).zip(a) {
                *g += c * (x - a);
            }
        }
        let scale = 1.0 / batch.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        Ok((self.loss_at(params, data, batch), grad))
    }

    fn evaluate(
        &self,
        params: &[f64],
        data: &Dataset,
        indices: &[usize],
        _seed: u64,
    ) -> Result<Evaluation> {
        check_len(self.dim, params)?;
        self.check_data(data)?;
        Ok(Evaluation {
            loss: self.loss_at(params, data, indices),
            accuracy: None,
            spikes: None,
        })
    }

    /// The curvature-weighted mean target.
    fn optimum(&self, data: &Dataset) -> Option<(Vec<f64>, f64)> {
        self.check_data(data).ok()?;
        let all: Vec<usize> = (0..data.len()).collect();
        let mut mean = vec![0.0; self.dim];
        let mut total = 0.0;
        for &i in &all {
            let c = self.c(i);
            total += c;
            for (m, a) in mean.iter_mut().zip(data.sample(i).0) {
                *m += c * a;
            }
        }
        mean.iter_mut().for_each(|m| *m /= total);
        let f_star = self.loss_at(&mean, data, &all);
        Some((mean, f_star))
    }
}

fn check_len(dim: usize, params: &[f64]) -> Result<()> {
    if params.len() != dim {
        return Err(Error::Shape(format!(
            "{} parameters, model has {dim}",
            params.len()
        )));
    }
    Ok(())
}

/// Multinomial logistic regression: `softmax(W·x + b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinearSoftmax {
    pub inputs: usize,
    pub classes: usize,
}

impl LinearSoftmax {
    fn logits(&self, params: &[f64], x: &[f64]) -> Vec<f64> {
        let (w, b) = params.split_at(self.inputs * self.classes);
        (0..self.classes)
            .map(|c| {
                b[c] + w[c * self.inputs..(c + 1) * self.inputs]
                    .iter()
                    .zip(x)
                    .map(|(w, x)| w * x)
                    .sum::<f64>()
            })
            .collect()
    }
}

impl Model for LinearSoftmax {
    fn kind(&self) -> ModelKind {
        ModelKind::LinearSoftmax
    }

    fn parameter_count(&self) -> usize {
        (self.inputs + 1) * self.classes
    }

    fn init(&self, _seed: u64) -> Vec<f64> {
        vec![0.0; self.parameter_count()]
    }

    fn loss_grad(
        &self,
        params: &[f64],
        data: &Dataset,
        batch: &[usize],
        _seed: u64,
    ) -> Result<(f64, Vec<f64>)> {
        check_len(self.parameter_count(), params)?;
        let mut grad = vec![0.0; params.len()];
        let mut loss = 0.0;
        for &i in batch {
            let (x, y) = data.sample(i);
            let (l, dz) = softmax_cross_entropy(&self.logits(params, x), y)?;
            loss += l;
            let (gw, gb) = grad.split_at_mut(self.inputs * self.classes);
            for (c, &d) in dz.iter().enumerate() {
                gb[c] += d;
                for (g, xv) in gw[c * self.inputs..(c + 1) * self.inputs].iter_mut().zip(x) {
                    *g += d * xv;
                }
            }
        }
        let scale = 1.0 / batch.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        Ok((loss * scale, grad))
    }

    fn evaluate(
        &self,
        params: &[f64],
        data: &Dataset,
        indices: &[usize],
        _seed: u64,
    ) -> Result<Evaluation> {
        check_len(self.parameter_count(), params)?;
        let mut loss = 0.0;
        let mut correct = 0usize;
        for &i in indices {
            let (x, y) = data.sample(i);
            let z = self.logits(params, x);
            loss += softmax_cross_entropy(&z, y)?.0;
            correct += usize::from(argmax(&z) == y);
        }
        let n = indices.len().max(1) as f64;
        Ok(Evaluation {
            loss: loss / n,
            accuracy: Some(correct as f64 / n),
            spikes: None,
        })
    }
}

/// First index of the largest value.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// A spiking network trained with the hybrid activation and evaluated with binary spikes.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikingModel {
    pub kind: ModelKind,
    pub arch: Architecture,
    pub lif: LifParams,
    pub alpha: f64,
    pub mask_probability: f64,
}

impl SpikingModel {
    fn net(&self, params: &[f64]) -> Result<SpikingNet> {
        SpikingNet::from_params(self.arch.clone(), self.lif, params.to_vec())
    }
}

impl Model for SpikingModel {
    fn kind(&self) -> ModelKind {
        self.kind
    }

    fn parameter_count(&self) -> usize {
        self.arch.parameter_count()
    }

    fn init(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SpikingNet::new(self.arch.clone(), self.lif, self.alpha, &mut rng)
            .map(|n| n.params)
            .expect("architecture and LIF parameters were validated")
    }

    fn loss_grad(
        &self,
        params: &[f64],
        data: &Dataset,
        batch: &[usize],
        seed: u64,
    ) -> Result<(f64, Vec<f64>)> {
        let net = self.net(params)?;
        let samples: Vec<(&[f64], usize)> = batch.iter().map(|&i| data.sample(i)).collect();
        net.batch_gradient(&samples, self.mask_probability, seed)
    }

    fn evaluate(
        &self,
        params: &[f64],
        data: &Dataset,
        indices: &[usize],
        seed: u64,
    ) -> Result<Evaluation> {
        let net = self.net(params)?;
        let parts: Vec<(f64, bool, SpikeRecord)> = indices
            .par_iter()
            .enumerate()
            .map(|(k, &i)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(k as u64);
                let (x, y) = data.sample(i);
                let (logits, spikes) = net.predict(x, &mut rng)?;
                let loss = softmax_cross_entropy(&logits, y)?.0;
                Ok((loss, argmax(&logits) == y, spikes))
            })
            .collect::<Result<_>>()?;
        let mut spikes = SpikeRecord::new(&self.arch, self.lif.timesteps);
        let mut loss = 0.0;
        let mut correct = 0usize;
        for (l, ok, s) in &parts {
            loss += l;
            correct += usize::from(*ok);
            spikes.merge(s)?;
        }
        let n = indices.len().max(1) as f64;
        Ok(Evaluation {
            loss: loss / n,
            accuracy: Some(correct as f64 / n),
            spikes: Some(spikes),
        })
    }
}
