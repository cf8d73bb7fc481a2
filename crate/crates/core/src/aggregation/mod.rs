//! Inter-plane aggregation engines and the mixing-matrix analyzer.
//!
//! Models are flat `f64` vectors regardless of the network they parameterize.

mod allreduce;
mod gossip;
mod mixing;
mod oracle;
mod relaysum;

use serde::{Deserialize, Serialize};

pub use allreduce::{allreduce_tree, AllReduceOutcome};
pub use gossip::{gossip_round, metropolis_hastings, GossipMatrix};
pub use mixing::{build_mixing_matrices, MixingMatrices};
pub use oracle::{delayed_average_oracle, PreHistory};
pub use relaysum::{relaysum_round, Relay, RelayInit, RelayNodeState, RelaySum};

use crate::error::{Error, Result};

/// Which inter-plane scheme a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    RelaySum,
    Gossip,
    AllReduce,
}

impl std::fmt::Display for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Engine::RelaySum => "relaysum",
            Engine::Gossip => "gossip",
            Engine::AllReduce => "allreduce",
        })
    }
}

impl std::str::FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relaysum" => Ok(Engine::RelaySum),
            "gossip" => Ok(Engine::Gossip),
            "allreduce" => Ok(Engine::AllReduce),
            other => Err(Error::Config(format!("unknown engine {other:?}"))),
        }
    }
}

pub(crate) fn check_dims(models: &[Vec<f64>]) -> Result<usize> {
    let dim = models.first().map_or(0, Vec::len);
    if let Some((i, m)) = models.iter().enumerate().find(|(_, m)| m.len() != dim) {
        return Err(Error::Shape(format!(
            "model {i} has {} parameters, expected {dim}",
            m.len()
        )));
    }
    Ok(dim)
}
