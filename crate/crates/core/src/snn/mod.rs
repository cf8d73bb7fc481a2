//! Leaky integrate-and-fire networks trained with the hybrid activation.
//!
//! Membrane update per neuron and timestep:
//!
//! ```text
//! U[t] = β·U[t−1] + W·X[t] − S[t−1]·θ
//! S[t] = 1 if U[t] > θ else 0
//! ```
//!
//! During training the emitted activation is `H(U) + m·detach(Θ(U) − H(U))`
//! with `H(u) = sigmoid(α(u − θ))` and `m ~ Bernoulli(p)`.

mod checkpoint;
mod encoding;
mod energy;
mod layer;
mod net;

use serde::{Deserialize, Serialize};

pub use checkpoint::{
    decode_params, encode_params, Checkpoint, CheckpointManifest, CHECKPOINT_FORMAT,
};
pub use encoding::{rate_encode, SpikeTrain};
pub use energy::{energy_table, estimate_energy, EnergyModel, LayerEnergy, ModelKind};
pub use layer::{Architecture, Layer, LayerConfig, LayerKind, Shape};
pub use net::{
    softmax_cross_entropy, Activation, Detached, Masks, Mode, Pass, SpikeRecord, SpikingNet,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LifParams {
    pub beta: f64,
    pub threshold: f64,
    pub timesteps: usize,
}

impl Default for LifParams {
    fn default() -> Self {
        Self {
            beta: 0.9,
            threshold: 1.0,
            timesteps: 3,
        }
    }
}

impl LifParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Config(format!(
                "decay beta {} outside [0, 1]",
                self.beta
            )));
        }
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(Error::Config(format!(
                "threshold {} must be positive",
                self.threshold
            )));
        }
        if self.timesteps == 0 {
            return Err(Error::Config("timesteps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HybridActivationConfig {
    /// Initial surrogate slope; each hidden layer then learns its own.
    pub alpha: f64,
    pub mask_probability: f64,
    pub seed: u64,
}

impl Default for HybridActivationConfig {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            mask_probability: 0.2,
            seed: 0,
        }
    }
}

impl HybridActivationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!(
                "surrogate alpha {} must be positive",
                self.alpha
            )));
        }
        if !(self.mask_probability > 0.0 && self.mask_probability <= 1.0) {
            return Err(Error::Config(format!(
                "mask probability {} outside (0, 1]",
                self.mask_probability
            )));
        }
        Ok(())
    }
}

pub fn heaviside(u: f64, threshold: f64) -> f64 {
    if u > threshold {
        1.0
    } else {
        0.0
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `H(u) = sigmoid(α(u − θ))`.
pub fn surrogate(u: f64, threshold: f64, alpha: f64) -> f64 {
    sigmoid(alpha * (u - threshold))
}

/// `∂H/∂u = α·σ·(1 − σ)`.
pub fn surrogate_grad(u: f64, threshold: f64, alpha: f64) -> f64 {
    let s = surrogate(u, threshold, alpha);
    alpha * s * (1.0 - s)
}

/// `∂H/∂α = (u − θ)·σ·(1 − σ)`.
pub fn surrogate_grad_alpha(u: f64, threshold: f64, alpha: f64) -> f64 {
    let s = surrogate(u, threshold, alpha);
    (u - threshold) * s * (1.0 - s)
}

/// One LIF step for a layer: returns `(U, S)`.
pub fn lif_step(
    u_prev: &[f64],
    weighted_input: &[f64],
    s_prev: &[f64],
    params: &LifParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if u_prev.len() != weighted_input.len() || u_prev.len() != s_prev.len() {
        return Err(Error::Shape(format!(
            "lif_step lengths {} / {} / {}",
            u_prev.len(),
            weighted_input.len(),
            s_prev.len()
        )));
    }
    let u: Vec<f64> = u_prev
        .iter()
        .zip(weighted_input)
        .zip(s_prev)
        .map(|((&up, &i), &sp)| params.beta * up + i - sp * params.threshold)
        .collect();
    let s = u.iter().map(|&x| heaviside(x, params.threshold)).collect();
    Ok((u, s))
}

/// Forward value of the hybrid activation: `Θ(U)` where the mask is set, `H(U)` elsewhere.
pub fn hybrid_forward(u: &[f64], mask: &[bool], threshold: f64, alpha: f64) -> Result<Vec<f64>> {
    if u.len() != mask.len() {
        return Err(Error::Shape(format!(
            "mask length {} for {} neurons",
            mask.len(),
            u.len()
        )));
    }
    Ok(u.iter()
        .zip(mask)
        .map(|(&x, &m)| hybrid_value(x, m, threshold, alpha))
        .collect())
}

/// Derivative of the hybrid activation with respect to `U`; the mask never enters.
pub fn hybrid_grad(u: &[f64], threshold: f64, alpha: f64) -> Vec<f64> {
    u.iter()
        .map(|&x| surrogate_grad(x, threshold, alpha))
        .collect()
}

#[inline]
pub(crate) fn hybrid_value(u: f64, mask: bool, threshold: f64, alpha: f64) -> f64 {
    if mask {
        heaviside(u, threshold)
    } else {
        surrogate(u, threshold, alpha)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lif_recurrence_examples() {
        let p = LifParams {
            beta: 0.9,
            threshold: 1.0,
            timesteps: 3,
        };
        let (u, s) = lif_step(&[0.0], &[0.5], &[0.0], &p).unwrap();
        assert_eq!((u[0], s[0]), (0.5, 0.0));
        let (u, s) = lif_step(&u, &[0.6], &s, &p).unwrap();
        assert!((u[0] - 1.05).abs() < 1e-15);
        assert_eq!(s[0], 1.0);
        let (u, s) = lif_step(&u, &[0.0], &s, &p).unwrap();
        assert!((u[0] - (0.9 * 1.05 - 1.0)).abs() < 1e-15);
        assert!((u[0] + 0.055).abs() < 1e-12);
        assert_eq!(s[0], 0.0);
    }

    #[test]
    fn strict_threshold() {
        let p = LifParams::default();
        let (_, s) = lif_step(&[0.0], &[1.0], &[0.0], &p).unwrap();
        assert_eq!(s[0], 0.0);
    }

    #[test]
    fn lif_rejects_shape_mismatch() {
        assert!(lif_step(&[0.0, 1.0], &[0.0], &[0.0, 0.0], &LifParams::default()).is_err());
    }

    #[test]
    fn hybrid_extremes() {
        let u = [-1.0, 0.5, 1.0, 1.5, 3.0];
        let smooth = hybrid_forward(&u, &[false; 5], 1.0, 0.2).unwrap();
        for (x, s) in u.iter().zip(&smooth) {
            assert_eq!(*s, surrogate(*x, 1.0, 0.2));
        }
        let binary = hybrid_forward(&u, &[true; 5], 1.0, 0.2).unwrap();
        assert_eq!(binary, vec![0.0, 0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn surrogate_derivatives_match_differences() {
        let h = 1e-6;
        for &(u, a) in &[(0.3, 0.2), (1.0, 5.0), (2.5, 1.3), (-4.0, 0.7)] {
            let du = (surrogate(u + h, 1.0, a) - surrogate(u - h, 1.0, a)) / (2.0 * h);
            assert!((du - surrogate_grad(u, 1.0, a)).abs() < 1e-9);
            let da = (surrogate(u, 1.0, a + h) - surrogate(u, 1.0, a - h)) / (2.0 * h);
            assert!((da - surrogate_grad_alpha(u, 1.0, a)).abs() < 1e-9);
        }
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert_eq!(sigmoid(0.0), 0.5);
    }

    #[test]
    fn config_validation() {
        assert!(LifParams {
            beta: 1.1,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(LifParams {
            threshold: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(LifParams {
            timesteps: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(HybridActivationConfig {
            mask_probability: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(HybridActivationConfig {
            alpha: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(HybridActivationConfig::default().validate().is_ok());
    }
}
