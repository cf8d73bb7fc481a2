use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::encoding::{rate_encode, SpikeTrain};
use super::layer::Architecture;
use super::{heaviside, hybrid_value, surrogate, surrogate_grad, surrogate_grad_alpha, LifParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    TrainingHybrid,
    InferenceBinary,
}

/// Per hidden layer, `timesteps × width` Bernoulli draws.
#[derive(Debug, Clone, PartialEq)]
pub struct Masks {
    layers: Vec<Vec<bool>>,
}

impl Masks {
    pub fn sample(arch: &Architecture, timesteps: usize, p: f64, rng: &mut impl Rng) -> Self {
        let layers = arch.layers[..arch.hidden_layers()]
            .iter()
            .map(|l| {
                (0..timesteps * l.output.len())
                    .map(|_| rng.random::<f64>() < p)
                    .collect()
            })
            .collect();
        Self { layers }
    }

    pub fn constant(arch: &Architecture, timesteps: usize, value: bool) -> Self {
        let layers = arch.layers[..arch.hidden_layers()]
            .iter()
            .map(|l| vec![value; timesteps * l.output.len()])
            .collect();
        Self { layers }
    }

    pub fn layer(&self, hidden: usize) -> &[bool] {
        &self.layers[hidden]
    }
}

/// Values held constant when differentiating a recorded pass: the injected
/// noise `m·(Θ − H)` and the activation fed to the reset term.
#[derive(Debug, Clone, PartialEq)]
pub struct Detached {
    noise: Vec<Vec<f64>>,
    reset: Vec<Vec<f64>>,
}

impl Detached {
    pub fn from_pass(net: &SpikingNet, pass: &Pass) -> Self {
        let theta = net.lif.threshold;
        let mut noise = Vec::new();
        let mut reset = Vec::new();
        for h in 0..net.arch.hidden_layers() {
            let alpha = net.alpha(h);
            let out = &pass.activations[h + 1];
            noise.push(
                out.iter()
                    .zip(&pass.potentials[h])
                    .map(|(&s, &u)| s - surrogate(u, theta, alpha))
                    .collect(),
            );
            reset.push(out.clone());
        }
        Self { noise, reset }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Activation<'a> {
    Binary,
    Hybrid(&'a Masks),
    Frozen(&'a Detached),
}

/// Firing counts: index 0 is the encoded input, index `l + 1` hidden layer `l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeRecord {
    pub counts: Vec<u64>,
    pub neurons: Vec<usize>,
    pub timesteps: usize,
    pub samples: u64,
}

impl SpikeRecord {
    pub fn new(arch: &Architecture, timesteps: usize) -> Self {
        let mut neurons = vec![arch.input.len()];
        neurons.extend(
            arch.layers[..arch.hidden_layers()]
                .iter()
                .map(|l| l.output.len()),
        );
        Self {
            counts: vec![0; neurons.len()],
            neurons,
            timesteps,
            samples: 0,
        }
    }

    pub fn merge(&mut self, other: &SpikeRecord) -> Result<()> {
        if self.neurons != other.neurons || self.timesteps != other.timesteps {
            return Err(Error::Shape("spike records of different networks".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.samples += other.samples;
        Ok(())
    }

    /// Fraction of neurons firing per timestep, one entry per layer input.
    pub fn rates(&self) -> Vec<f64> {
        self.counts
            .iter()
            .zip(&self.neurons)
            .map(|(&c, &n)| {
                let slots = n as f64 * self.timesteps as f64 * self.samples as f64;
                if slots == 0.0 {
                    0.0
                } else {
                    c as f64 / slots
                }
            })
            .collect()
    }
}

/// Everything the backward pass needs from one forward evaluation.
#[derive(Debug, Clone)]
pub struct Pass {
    pub logits: Vec<f64>,
    /// Input to each layer (`[0]` the encoded input), `timesteps × width`.
    pub activations: Vec<Vec<f64>>,
    /// Membrane potentials of every layer including the readout.
    pub potentials: Vec<Vec<f64>>,
    pub spikes: SpikeRecord,
    differentiable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpikingNet {
    pub arch: Architecture,
    pub lif: LifParams,
    pub params: Vec<f64>,
    pub mode: Mode,
}

impl SpikingNet {
    /// Uniform `±1/√fan_in` weights, zero biases, every surrogate slope at `alpha`.
    pub fn new(arch: Architecture, lif: LifParams, alpha: f64, rng: &mut impl Rng) -> Result<Self> {
        lif.validate()?;
        if !(alpha > 0.0) {
            return Err(Error::Config(format!(
                "surrogate alpha {alpha} must be positive"
            )));
        }
        let mut params = vec![0.0; arch.parameter_count()];
        for (layer, &(w, _)) in arch.layers.iter().zip(&arch.offsets()) {
            let fan_in = layer.weight_count() / layer.output.channels;
            let bound = 1.0 / (fan_in as f64).sqrt();
            for p in &mut params[w..w + layer.weight_count()] {
                *p = rng.random_range(-bound..bound);
            }
        }
        for h in 0..arch.hidden_layers() {
            params[arch.log_alpha_offset(h)] = alpha.ln();
        }
        Ok(Self {
            arch,
            lif,
            params,
            mode: Mode::TrainingHybrid,
        })
    }

    pub fn from_params(arch: Architecture, lif: LifParams, params: Vec<f64>) -> Result<Self> {
        lif.validate()?;
        if params.len() != arch.parameter_count() {
            return Err(Error::Shape(format!(
                "{} parameters for an architecture of {}",
                params.len(),
                arch.parameter_count()
            )));
        }
        Ok(Self {
            arch,
            lif,
            params,
            mode: Mode::TrainingHybrid,
        })
    }

    /// Surrogate slope of hidden layer `hidden`, stored as its logarithm.
    pub fn alpha(&self, hidden: usize) -> f64 {
        self.params[self.arch.log_alpha_offset(hidden)].exp()
    }

    pub fn forward(&self, input: &SpikeTrain, activation: Activation<'_>) -> Result<Pass> {
        let t_steps = self.lif.timesteps;
        if input.width != self.arch.input.len() || input.timesteps != t_steps {
            return Err(Error::Shape(format!(
                "input {} x {}, network expects {} x {}",
                input.timesteps,
                input.width,
                t_steps,
                self.arch.input.len()
            )));
        }
        if self.mode == Mode::InferenceBinary && !matches!(activation, Activation::Binary) {
            return Err(Error::Invalid(
                "inference mode only runs binary activations".into(),
            ));
        }
        let (beta, theta) = (self.lif.beta, self.lif.threshold);
        let offsets = self.arch.offsets();
        let hidden = self.arch.hidden_layers();
        let mut spikes = SpikeRecord::new(&self.arch, t_steps);
        spikes.samples = 1;
        spikes.counts[0] = input.spike_count();

        let mut activations = vec![input.data.clone()];
        let mut potentials = Vec::with_capacity(self.arch.layers.len());
        let mut logits = Vec::new();
        for (l, layer) in self.arch.layers.iter().enumerate() {
            let (wo, bo) = offsets[l];
            let weights = &self.params[wo..bo];
            let bias = &self.params[bo..bo + layer.bias_count()];
            let (n_in, n_out) = (layer.input.len(), layer.output.len());
            let x = &activations[l];
            let mut pot = vec![0.0; t_steps * n_out];
            let mut current = vec![0.0; n_out];
            if l < hidden {
                let alpha = self.alpha(l);
                let mut out = vec![0.0; t_steps * n_out];
                let mut fired = 0u64;
                for t in 0..t_steps {
                    layer.forward(weights, bias, &x[t * n_in..(t + 1) * n_in], &mut current);
                    for n in 0..n_out {
                        let idx = t * n_out + n;
                        let (u_prev, s_prev) = if t == 0 {
                            (0.0, 0.0)
                        } else {
                            let prev = idx - n_out;
                            let s = match activation {
                                Activation::Frozen(d) => d.reset[l][prev],
                                _ => out[prev],
                            };
                            (pot[prev], s)
                        };
                        let u = beta * u_prev + current[n] - s_prev * theta;
                        pot[idx] = u;
                        let spike = heaviside(u, theta);
                        fired += spike as u64;
                        out[idx] = match activation {
                            Activation::Binary => spike,
                            Activation::Hybrid(m) => {
                                hybrid_value(u, m.layers[l][idx], theta, alpha)
                            }
                            Activation::Frozen(d) => surrogate(u, theta, alpha) + d.noise[l][idx],
                        };
                    }
                }
                spikes.counts[l + 1] = fired;
                activations.push(out);
            } else {
                let mut sum = vec![0.0; n_out];
                for t in 0..t_steps {
                    layer.forward(weights, bias, &x[t * n_in..(t + 1) * n_in], &mut current);
                    for n in 0..n_out {
                        let idx = t * n_out + n;
                        let u_prev = if t == 0 { 0.0 } else { pot[idx - n_out] };
                        pot[idx] = beta * u_prev + current[n];
                        sum[n] += pot[idx];
                    }
                }
                logits = sum.into_iter().map(|s| s / t_steps as f64).collect();
            }
            potentials.push(pot);
        }
        Ok(Pass {
            logits,
            activations,
            potentials,
            spikes,
            differentiable: !matches!(activation, Activation::Binary),
        })
    }

    /// Backpropagation through time. Adds `∂loss/∂params` into `grad`, given `∂loss/∂logits`.
    /// The reset term is treated as a constant.
    pub fn backward(&self, pass: &Pass, dlogits: &[f64], grad: &mut [f64]) -> Result<()> {
        if self.mode == Mode::InferenceBinary {
            return Err(Error::Invalid("backward requires training mode".into()));
        }
        if !pass.differentiable {
            return Err(Error::Invalid(
                "binary passes carry no surrogate gradient".into(),
            ));
        }
        if dlogits.len() != self.arch.classes() || grad.len() != self.params.len() {
            return Err(Error::Shape(
                "gradient buffers do not match the network".into(),
            ));
        }
        let t_steps = self.lif.timesteps;
        let (beta, theta) = (self.lif.beta, self.lif.threshold);
        let offsets = self.arch.offsets();
        let hidden = self.arch.hidden_layers();

        // Gradient with respect to the current layer's output activations.
        let mut d_out: Vec<f64> = Vec::new();
        for l in (0..self.arch.layers.len()).rev() {
            let layer = &self.arch.layers[l];
            let (n_in, n_out) = (layer.input.len(), layer.output.len());
            let (wo, bo) = offsets[l];
            let weights = &self.params[wo..bo];
            let x = &pass.activations[l];
            let pot = &pass.potentials[l];
            let mut d_in = if l > 0 {
                vec![0.0; t_steps * n_in]
            } else {
                Vec::new()
            };
            let mut gu = vec![0.0; n_out];
            let mut gy = vec![0.0; n_out];
            let mut d_alpha = 0.0;
            let alpha = if l < hidden { self.alpha(l) } else { 0.0 };
            let (gw_head, gb_tail) = grad.split_at_mut(bo);
            let gw = &mut gw_head[wo..];
            let gb = &mut gb_tail[..layer.bias_count()];
            for t in (0..t_steps).rev() {
                for n in 0..n_out {
                    let carry = beta * gu[n];
                    gu[n] = if l < hidden {
                        let idx = t * n_out + n;
                        let ds = d_out[idx];
                        let u = pot[idx];
                        d_alpha += ds * surrogate_grad_alpha(u, theta, alpha);
                        ds * surrogate_grad(u, theta, alpha) + carry
                    } else {
                        dlogits[n] / t_steps as f64 + carry
                    };
                    gy[n] = gu[n];
                }
                let gx = if l > 0 {
                    Some(&mut d_in[t * n_in..(t + 1) * n_in])
                } else {
                    None
                };
                layer.backward(weights, &x[t * n_in..(t + 1) * n_in], &gy, gw, gb, gx);
            }
            if l < hidden {
                grad[self.arch.log_alpha_offset(l)] += alpha * d_alpha;
            }
            d_out = d_in;
        }
        Ok(())
    }

    /// Loss, gradient and firing counts for one labelled example under freshly drawn
    /// input spikes and masks.
    pub fn sample_gradient(
        &self,
        x: &[f64],
        label: usize,
        mask_probability: f64,
        rng: &mut impl Rng,
    ) -> Result<(f64, Vec<f64>, SpikeRecord)> {
        let input = rate_encode(x, self.lif.timesteps, rng);
        let masks = Masks::sample(&self.arch, self.lif.timesteps, mask_probability, rng);
        let pass = self.forward(&input, Activation::Hybrid(&masks))?;
        let (loss, dlogits) = softmax_cross_entropy(&pass.logits, label)?;
        let mut grad = vec![0.0; self.params.len()];
        self.backward(&pass, &dlogits, &mut grad)?;
        Ok((loss, grad, pass.spikes))
    }

    /// Mean loss and gradient over a minibatch. Example `i` draws from its own
    /// stream of `seed`, so the result does not depend on thread scheduling.
    pub fn batch_gradient(
        &self,
        batch: &[(&[f64], usize)],
        mask_probability: f64,
        seed: u64,
    ) -> Result<(f64, Vec<f64>)> {
        let parts: Vec<(f64, Vec<f64>)> = batch
            .par_iter()
            .enumerate()
            .map(|(i, &(x, y))| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                self.sample_gradient(x, y, mask_probability, &mut rng)
                    .map(|(l, g, _)| (l, g))
            })
            .collect::<Result<_>>()?;
        let scale = 1.0 / batch.len().max(1) as f64;
        let mut loss = 0.0;
        let mut grad = vec![0.0; self.params.len()];
        for (l, g) in parts {
            loss += l;
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        grad.iter_mut().for_each(|g| *g *= scale);
        Ok((loss * scale, grad))
    }

    /// Binary-activation logits and firing counts.
    pub fn predict(&self, x: &[f64], rng: &mut impl Rng) -> Result<(Vec<f64>, SpikeRecord)> {
        let input = rate_encode(x, self.lif.timesteps, rng);
        let pass = self.forward(&input, Activation::Binary)?;
        Ok((pass.logits, pass.spikes))
    }
}

/// Cross-entropy of softmax(logits) against `label`, and its gradient.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= logits.len() {
        return Err(Error::Invalid(format!(
            "label {label} out of range for {} classes",
            logits.len()
        )));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let loss = total.ln() - (logits[label] - max);
    if !loss.is_finite() {
        return Err(Error::Numeric(format!(
            "non-finite loss from logits {logits:?}"
        )));
    }
    let mut grad: Vec<f64> = exps.iter().map(|e| e / total).collect();
    grad[label] -= 1.0;
    Ok((loss, grad))
}
