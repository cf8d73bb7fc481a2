//! Decentralized training: data partitioning, local SGD, intra-plane ring
//! all-reduce, inter-plane aggregation and convergence metrics.

mod data;
mod local;
mod model;
mod train;

use serde::{Deserialize, Serialize};

pub use data::{
    dirichlet_partition, gaussian_mixture, texture_patterns, Dataset, MixtureSpec, Partition,
    PatternSpec,
};
pub use local::{local_sgd, ring_allreduce_mean, stream_seed, LocalSgd, RingCost};
pub use model::{
    argmax, Evaluation, LinearSoftmax, Model, ModelKind, QuadraticModel, SpikingModel,
};
pub use train::{
    centralized_sgd, consensus_distance, train, MetricsRecord, TrainInputs, TrainOutcome,
};

use crate::aggregation::{Engine, RelayInit};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub local_epochs: usize,
    pub intra_rounds: usize,
    pub iterations: usize,
    /// Stop before an iteration would push cumulative inter-plane rounds past this.
    pub round_budget: Option<usize>,
    pub engine: Engine,
    pub model: ModelKind,
    pub heterogeneity: f64,
    pub batch_size: usize,
    /// Set by the caller; run configurations derive it from their own seed.
    #[serde(skip)]
    pub seed: u64,
    pub relay_init: RelayInit,
    /// Samples used for per-iteration loss, accuracy and gradient-norm metrics.
    pub eval_samples: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            local_epochs: 1,
            intra_rounds: 1,
            iterations: 60,
            round_budget: None,
            engine: Engine::RelaySum,
            model: ModelKind::SpikingMlp,
            heterogeneity: 0.02,
            batch_size: 16,
            seed: 0,
            relay_init: RelayInit::Zero,
            eval_samples: 512,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if self.local_epochs == 0 || self.intra_rounds == 0 || self.iterations == 0 {
            return Err(Error::Config(
                "local_epochs, intra_rounds and iterations must be at least 1".into(),
            ));
        }
        if !(self.heterogeneity > 0.0 && self.heterogeneity.is_finite()) {
            return Err(Error::Config(format!(
                "heterogeneity {} must be positive",
                self.heterogeneity
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.eval_samples == 0 {
            return Err(Error::Config("eval_samples must be at least 1".into()));
        }
        Ok(())
    }

    pub fn local(&self) -> LocalSgd {
        LocalSgd {
            epochs: self.local_epochs,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
        }
    }
}
