use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::connectivity::{LinkBudgetParams, Stability};
use crate::error::{Error, Result};
use crate::geometry::{ConstellationSpec, GeometryConstants};
use crate::learning::{ModelKind, TrainConfig};
use crate::snn::{EnergyModel, HybridActivationConfig, LayerConfig, LifParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TreeMethod {
    Optimized,
    Chain,
    BruteForce,
    ExplicitFile,
}

impl std::str::FromStr for TreeMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "optimized" => Ok(TreeMethod::Optimized),
            "chain" => Ok(TreeMethod::Chain),
            "brute-force" => Ok(TreeMethod::BruteForce),
            "explicit-file" => Ok(TreeMethod::ExplicitFile),
            other => Err(Error::Config(format!("unknown tree method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TreeConfig {
    pub method: TreeMethod,
    /// Tree JSON for `explicit-file`, relative to the configuration file.
    pub file: Option<PathBuf>,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            method: TreeMethod::Optimized,
            file: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopologyConfig {
    pub sample_step_s: f64,
    pub stability: Stability,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            sample_step_s: 30.0,
            stability: Stability::Every,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataConfig {
    GaussianMixture {
        dim: usize,
        classes: usize,
        noise: f64,
        train_samples: usize,
        test_samples: usize,
    },
    Patterns {
        side: usize,
        classes: usize,
        noise: f64,
        train_samples: usize,
        test_samples: usize,
    },
    /// Every plane gets a target drawn uniformly from `[−spread, spread]^dim` and a
    /// curvature drawn uniformly from `[1 − curvature_spread, 1 + curvature_spread]`.
    Quadratic {
        dim: usize,
        spread: f64,
        #[serde(default)]
        curvature_spread: f64,
    },
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig::GaussianMixture {
            dim: 32,
            classes: 10,
            noise: 0.15,
            train_samples: 4000,
            test_samples: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SnnConfig {
    pub beta: f64,
    pub threshold: f64,
    pub timesteps: usize,
    pub alpha: f64,
    pub mask_probability: f64,
    /// Hidden layers; the readout is appended. Empty picks the model's default.
    pub layers: Vec<LayerConfig>,
}

impl Default for SnnConfig {
    fn default() -> Self {
        let hybrid = HybridActivationConfig::default();
        let lif = LifParams::default();
        Self {
            beta: lif.beta,
            threshold: lif.threshold,
            timesteps: lif.timesteps,
            alpha: hybrid.alpha,
            mask_probability: hybrid.mask_probability,
            layers: Vec::new(),
        }
    }
}

impl SnnConfig {
    pub fn lif(&self) -> LifParams {
        LifParams {
            beta: self.beta,
            threshold: self.threshold,
            timesteps: self.timesteps,
        }
    }

    pub fn hidden_layers(&self, kind: ModelKind) -> Vec<LayerConfig> {
        if !self.layers.is_empty() {
            return self.layers.clone();
        }
        match kind {
            ModelKind::SpikingCnn => vec![
                LayerConfig::Conv {
                    out_channels: 8,
                    kernel: 3,
                    stride: 2,
                    padding: 1,
                },
                LayerConfig::Conv {
                    out_channels: 16,
                    kernel: 3,
                    stride: 2,
                    padding: 1,
                },
            ],
            _ => vec![LayerConfig::Dense { outputs: 64 }],
        }
    }
}

/// A complete run description, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Also checkpoint plane models every this many iterations (0: final only).
    #[serde(default)]
    pub checkpoint_every: usize,
    pub constellation: ConstellationSpec,
    #[serde(default)]
    pub geometry: GeometryConstants,
    #[serde(default)]
    pub link: LinkBudgetParams,
    #[serde(default)]
    pub topology: TopologyConfig,
    #[serde(default)]
    pub tree: TreeConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub snn: SnnConfig,
    #[serde(default)]
    pub energy: EnergyModel,
}

/// A parsed configuration with the raw bytes it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub source: Option<PathBuf>,
    pub raw: Vec<u8>,
}

impl LoadedConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text)?;
        Ok(Self {
            config,
            source: None,
            raw: text.as_bytes().to_vec(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut loaded = Self::from_toml(&text)?;
        loaded.source = Some(path.to_path_buf());
        Ok(loaded)
    }

    pub fn base_dir(&self) -> PathBuf {
        self.source
            .as_deref()
            .and_then(Path::parent)
            .map_or_else(|| PathBuf::from("."), Path::to_path_buf)
    }

    pub fn tree_file(&self) -> Option<PathBuf> {
        self.config
            .tree
            .file
            .as_ref()
            .map(|f| self.base_dir().join(f))
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.config;
        c.constellation.validate()?;
        c.geometry.validate()?;
        c.link.validate()?;
        c.train.validate()?;
        c.snn.lif().validate()?;
        HybridActivationConfig {
            alpha: c.snn.alpha,
            mask_probability: c.snn.mask_probability,
            seed: 0,
        }
        .validate()?;
        if !(c.topology.sample_step_s.is_finite() && c.topology.sample_step_s > 0.0) {
            return Err(Error::Config(
                "topology.sample_step_s must be positive".into(),
            ));
        }
        if !(c.energy.mac_energy_j > 0.0 && c.energy.ac_energy_j > 0.0) {
            return Err(Error::Config("energy constants must be positive".into()));
        }
        let quadratic_data = matches!(c.data, DataConfig::Quadratic { .. });
        if quadratic_data != (c.train.model == ModelKind::Quadratic) {
            return Err(Error::Config(format!(
                "model {} does not fit the configured data",
                c.train.model
            )));
        }
        match c.data {
            DataConfig::GaussianMixture {
                train_samples,
                test_samples,
                ..
            }
            | DataConfig::Patterns {
                train_samples,
                test_samples,
                ..
            } if train_samples == 0 || test_samples == 0 => {
                return Err(Error::Config("data sample counts must be positive".into()));
            }
            DataConfig::Quadratic {
                dim,
                spread,
                curvature_spread,
            } if dim == 0
                || !(spread.is_finite() && spread >= 0.0)
                || !(0.0..1.0).contains(&curvature_spread) =>
            {
                return Err(Error::Config(
                    "quadratic data needs dim ≥ 1, spread ≥ 0 and curvature_spread in [0, 1)"
                        .into(),
                ));
            }
            _ => {}
        }
        if c.tree.method == TreeMethod::ExplicitFile {
            let Some(path) = self.tree_file() else {
                return Err(Error::Config(
                    "tree.method explicit-file needs tree.file".into(),
                ));
            };
            if !path.is_file() {
                return Err(Error::Config(format!(
                    "tree file {} does not exist",
                    path.display()
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[constellation]
total_satellites = 42
planes = 7
phasing = 1
inclination_deg = 53.0
altitude_km = 550.0
pattern = "delta"
"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let l = LoadedConfig::from_toml(MINIMAL).unwrap();
        l.validate().unwrap();
        assert_eq!(l.config.tree.method, TreeMethod::Optimized);
        assert_eq!(l.config.snn.timesteps, 3);
        assert_eq!(l.config.link.max_doppler_hz, 60e3);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = format!("{MINIMAL}\n[train]\nlearning_rat = 0.1\n");
        let err = LoadedConfig::from_toml(&text).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let text = format!("{MINIMAL}\nsed = 3\n");
        assert!(LoadedConfig::from_toml(&text).is_err());
    }

    #[test]
    fn layers_and_data_parse() {
        let text = format!(
            r#"{MINIMAL}
[train]
model = "spiking-cnn"
[data]
kind = "patterns"
side = 16
classes = 4
noise = 0.1
train_samples = 100
test_samples = 20
[snn]
beta = 0.8
timesteps = 4
[[snn.layers]]
kind = "conv"
out_channels = 4
kernel = 3
stride = 2
"#
        );
        let l = LoadedConfig::from_toml(&text).unwrap();
        l.validate().unwrap();
        assert_eq!(l.config.snn.beta, 0.8);
        assert_eq!(
            l.config.snn.layers,
            vec![LayerConfig::Conv {
                out_channels: 4,
                kernel: 3,
                stride: 2,
                padding: 0
            }]
        );
    }

    #[test]
    fn semantic_errors() {
        let text = format!("{MINIMAL}\n[train]\nmodel = \"quadratic\"\n");
        assert!(LoadedConfig::from_toml(&text).unwrap().validate().is_err());
        let text = format!("{MINIMAL}\n[tree]\nmethod = \"explicit-file\"\n");
        assert!(LoadedConfig::from_toml(&text).unwrap().validate().is_err());
        let text = MINIMAL.replace("phasing = 1", "phasing = 9");
        assert_eq!(
            LoadedConfig::from_toml(&text)
                .unwrap()
                .validate()
                .unwrap_err()
                .exit_code(),
            2
        );
    }
}
