use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::layer::{Architecture, MAX_PARAMETERS};
use super::net::SpikingNet;
use super::LifParams;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "orbitrelay-checkpoint-v1";

/// JSON sidecar describing a flat little-endian `f64` weight file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointManifest {
    pub format: String,
    pub model: String,
    pub parameter_count: usize,
    pub weights_file: String,
    pub iteration: usize,
    pub plane: usize,
    #[serde(default)]
    pub architecture: Option<Architecture>,
    #[serde(default)]
    pub lif: Option<LifParams>,
    /// Input spiking rate of every layer, measured on held-out data.
    #[serde(default)]
    pub spike_rates: Option<Vec<f64>>,
}

impl CheckpointManifest {
    pub fn from_json(text: &str) -> Result<Self> {
        let m: CheckpointManifest = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Invalid(format!(
                "unknown checkpoint format {:?}",
                self.format
            )));
        }
        if self.parameter_count > MAX_PARAMETERS {
            return Err(Error::Invalid(format!(
                "parameter count {} exceeds {MAX_PARAMETERS}",
                self.parameter_count
            )));
        }
        let name = &self.weights_file;
        if name.is_empty() || name.contains(['/', '\\']) || name == "." || name == ".." {
            return Err(Error::Invalid(format!(
                "weights file {name:?} must be a plain file name"
            )));
        }
        if let Some(lif) = &self.lif {
            lif.validate()?;
        }
        if let Some(arch) = &self.architecture {
            arch.validate()?;
            if arch.parameter_count() != self.parameter_count {
                return Err(Error::Invalid(format!(
                    "architecture has {} parameters, manifest says {}",
                    arch.parameter_count(),
                    self.parameter_count
                )));
            }
            if let Some(rates) = &self.spike_rates {
                if rates.len() != arch.layers.len() {
                    return Err(Error::Invalid(format!(
                        "{} spiking rates for {} layers",
                        rates.len(),
                        arch.layers.len()
                    )));
                }
            }
        }
        if let Some(rates) = &self.spike_rates {
            if let Some(r) = rates.iter().find(|r| !(0.0..=1.0).contains(*r)) {
                return Err(Error::Invalid(format!("spiking rate {r} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

pub fn encode_params(params: &[f64]) -> Vec<u8> {
    params.iter().flat_map(|p| p.to_le_bytes()).collect()
}

pub fn decode_params(bytes: &[u8]) -> Result<Vec<f64>> {
    if !bytes.len().is_multiple_of(8) {
        return Err(Error::Invalid(format!(
            "weight file length {} is not a multiple of 8",
            bytes.len()
        )));
    }
    let params: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    if let Some(i) = params.iter().position(|p| !p.is_finite()) {
        return Err(Error::Numeric(format!("weight {i} is not finite")));
    }
    Ok(params)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub manifest: CheckpointManifest,
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn from_parts(manifest: CheckpointManifest, bytes: &[u8]) -> Result<Self> {
        manifest.validate()?;
        let params = decode_params(bytes)?;
        if params.len() != manifest.parameter_count {
            return Err(Error::Shape(format!(
                "weight file holds {} values, manifest says {}",
                params.len(),
                manifest.parameter_count
            )));
        }
        Ok(Self { manifest, params })
    }

    /// Reads a manifest and the weight file next to it.
    pub fn load(manifest_path: &Path) -> Result<Self> {
        let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
        let manifest = CheckpointManifest::from_json(&text)?;
        let dir = manifest_path.parent().unwrap_or(Path::new("."));
        let weights_path = dir.join(&manifest.weights_file);
        let bytes = fs::read(&weights_path).map_err(|e| Error::io(&weights_path, e))?;
        Self::from_parts(manifest, &bytes)
    }

    /// Writes `<weights_file>` and `<stem>.json` into `dir`; returns the manifest path.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<std::path::PathBuf> {
        self.manifest.validate()?;
        let weights_path = dir.join(&self.manifest.weights_file);
        fs::write(&weights_path, encode_params(&self.params))
            .map_err(|e| Error::io(&weights_path, e))?;
        let manifest_path = dir.join(format!("{stem}.json"));
        let text = serde_json::to_string_pretty(&self.manifest)? + "\n";
        fs::write(&manifest_path, text).map_err(|e| Error::io(&manifest_path, e))?;
        Ok(manifest_path)
    }

    pub fn to_net(&self) -> Result<SpikingNet> {
        let (Some(arch), Some(lif)) = (&self.manifest.architecture, &self.manifest.lif) else {
            return Err(Error::Invalid(format!(
                "checkpoint of a {} model has no spiking architecture",
                self.manifest.model
            )));
        };
        SpikingNet::from_params(arch.clone(), *lif, self.params.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::super::layer::{LayerConfig, Shape};
    use super::*;

    fn manifest() -> CheckpointManifest {
        let arch = Architecture::new(
            Shape::flat(3),
            &[
                LayerConfig::Dense { outputs: 2 },
                LayerConfig::Dense { outputs: 2 },
            ],
        )
        .unwrap();
        CheckpointManifest {
            format: CHECKPOINT_FORMAT.into(),
            model: "spiking-mlp".into(),
            parameter_count: arch.parameter_count(),
            weights_file: "plane0.bin".into(),
            iteration: 4,
            plane: 0,
            architecture: Some(arch),
            lif: Some(LifParams::default()),
            spike_rates: Some(vec![0.5, 0.25]),
        }
    }

    #[test]
    fn round_trip_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let m = manifest();
        let params: Vec<f64> = (0..m.parameter_count)
            .map(|i| i as f64 * 0.125 - 1.0)
            .collect();
        let ck = Checkpoint::from_parts(m, &encode_params(&params)).unwrap();
        let path = ck.save(dir.path(), "plane0").unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_net().unwrap().params, params);
    }

    #[test]
    fn rejects_corrupt_inputs() {
        assert!(decode_params(&[0u8; 7]).is_err());
        assert!(decode_params(&f64::NAN.to_le_bytes()).is_err());
        let m = manifest();
        assert!(Checkpoint::from_parts(m.clone(), &encode_params(&[1.0])).is_err());
        let mut bad = m.clone();
        bad.weights_file = "../escape.bin".into();
        assert!(bad.validate().is_err());
        let mut bad = m.clone();
        bad.spike_rates = Some(vec![0.5]);
        assert!(bad.validate().is_err());
        let mut bad = m;
        bad.parameter_count += 1;
        assert!(bad.validate().is_err());
        assert!(CheckpointManifest::from_json("{\"format\": 1}").is_err());
    }
}
