use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-operation energies in joules (45 nm CMOS figures).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyModel {
    pub mac_energy_j: f64,
    pub ac_energy_j: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        Self {
            mac_energy_j: 4.6e-12,
            ac_energy_j: 0.9e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ann,
    Snn,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerEnergy {
    pub layer: usize,
    pub macs: u64,
    pub input_rate: f64,
    pub ann_j: f64,
    pub snn_j: f64,
}

impl LayerEnergy {
    /// ANN over SNN energy; infinite when the layer sees no spikes.
    pub fn ratio(&self) -> f64 {
        self.ann_j / self.snn_j
    }
}

fn check(macs: &[u64], input_rates: &[f64], model: &EnergyModel) -> Result<()> {
    if !(model.mac_energy_j > 0.0 && model.ac_energy_j > 0.0) {
        return Err(Error::Config("operation energies must be positive".into()));
    }
    if input_rates.len() != macs.len() {
        return Err(Error::Invalid(format!(
            "{} spiking rates for {} layers",
            input_rates.len(),
            macs.len()
        )));
    }
    if let Some(r) = input_rates.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(Error::Invalid(format!("spiking rate {r} outside [0, 1]")));
    }
    Ok(())
}

/// Joules per inference. ANN: every MAC at full cost. SNN: each layer performs
/// accumulates gated by its input spikes over all timesteps.
pub fn estimate_energy(
    macs: &[u64],
    input_rates: &[f64],
    timesteps: usize,
    kind: ModelKind,
    model: &EnergyModel,
) -> Result<f64> {
    Ok(energy_table(macs, input_rates, timesteps, model)?
        .iter()
        .map(|l| match kind {
            ModelKind::Ann => l.ann_j,
            ModelKind::Snn => l.snn_j,
        })
        .sum())
}

pub fn energy_table(
    macs: &[u64],
    input_rates: &[f64],
    timesteps: usize,
    model: &EnergyModel,
) -> Result<Vec<LayerEnergy>> {
    check(macs, input_rates, model)?;
    Ok(macs
        .iter()
        .zip(input_rates)
        .enumerate()
        .map(|(layer, (&m, &rate))| LayerEnergy {
            layer,
            macs: m,
            input_rate: rate,
            ann_j: m as f64 * model.mac_energy_j,
            snn_j: m as f64 * rate * timesteps as f64 * model.ac_energy_j,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_layer() {
        let m = EnergyModel::default();
        let t = energy_table(&[1000], &[0.2], 3, &m).unwrap();
        assert_eq!(t[0].ann_j, 4.6e-9);
        assert_eq!(t[0].snn_j, 0.54e-9);
        assert!((t[0].ratio() - 4.6 / (0.2 * 3.0 * 0.9)).abs() < 1e-12);
        assert_eq!(
            estimate_energy(&[1000], &[0.0], 3, ModelKind::Snn, &m).unwrap(),
            0.0
        );
    }

    #[test]
    fn missing_or_bad_rates() {
        let m = EnergyModel::default();
        assert!(estimate_energy(&[10, 20], &[0.1], 3, ModelKind::Snn, &m).is_err());
        assert!(estimate_energy(&[10], &[1.5], 3, ModelKind::Snn, &m).is_err());
    }
}
