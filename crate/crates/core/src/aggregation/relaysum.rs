use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::treeopt::RoutingTree;

use super::check_dims;

/// What a node last received from one tree neighbour: a relayed sum of
/// model updates and how many updates it contains.
#[derive(Debug, Clone, PartialEq)]
pub struct Relay {
    pub from: usize,
    pub sum: Vec<f64>,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelayNodeState {
    pub model: Vec<f64>,
    /// One entry per tree neighbour, in ascending neighbour order.
    pub inbox: Vec<Relay>,
    /// Number of updates averaged into `model` in the last round.
    pub count: u64,
}

/// Relay buffer initialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelayInit {
    /// Empty buffers and zero counters: early rounds average only the updates
    /// that have already arrived.
    #[default]
    Zero,
    /// Buffers hold the initial model once per node behind each neighbour, as
    /// if every node had been sending the initial model forever. Every round
    /// then averages exactly `N` terms.
    Primed,
}

impl RelayNodeState {
    fn fresh(tree: &RoutingTree, node: usize, initial: &[f64], init: RelayInit) -> Self {
        let inbox = tree
            .neighbors(node)
            .iter()
            .map(|&from| {
                let (sum, count) = match init {
                    RelayInit::Zero => (vec![0.0; initial.len()], 0),
                    RelayInit::Primed => {
                        let behind = (0..tree.vertices())
                            .filter(|&v| tree.hop_distance(from, v) < tree.hop_distance(node, v))
                            .count();
                        (
                            initial.iter().map(|x| x * behind as f64).collect(),
                            behind as u64,
                        )
                    }
                };
                Relay { from, sum, count }
            })
            .collect();
        Self {
            model: initial.to_vec(),
            inbox,
            count: 1,
        }
    }
}

/// One RelaySum round over the tree.
///
/// Node `i` sends neighbour `j` its own update plus everything it last received
/// from its other neighbours, with the matching counter; then it averages its
/// update with the sums just received, dividing by the total count.
pub fn relaysum_round(
    states: &mut [RelayNodeState],
    updates: &[Vec<f64>],
    tree: &RoutingTree,
) -> Result<()> {
    let n = tree.vertices();
    if states.len() != n || updates.len() != n {
        return Err(Error::Shape(format!(
            "tree has {n} nodes but got {} states and {} updates",
            states.len(),
            updates.len()
        )));
    }
    let dim = check_dims(updates)?;
    for (i, s) in states.iter().enumerate() {
        let expected = tree.neighbors(i);
        if s.inbox.len() != expected.len()
            || s.inbox.iter().zip(expected).any(|(r, &j)| r.from != j)
        {
            return Err(Error::Invalid(format!(
                "node {i} relay buffers do not match its tree neighbours {expected:?}"
            )));
        }
        if s.inbox.iter().any(|r| r.sum.len() != dim) {
            return Err(Error::Shape(format!(
                "node {i} relay buffer dimension mismatch"
            )));
        }
    }

    // outgoing[i][k]: message from i to its k-th neighbour.
    let outgoing: Vec<Vec<(Vec<f64>, u64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let state = &states[i];
            tree.neighbors(i)
                .iter()
                .map(|&j| {
                    let mut sum = updates[i].clone();
                    let mut count = 1u64;
                    for relay in state.inbox.iter().filter(|r| r.from != j) {
                        for (acc, x) in sum.iter_mut().zip(&relay.sum) {
                            *acc += x;
                        }
                        count += relay.count;
                    }
                    (sum, count)
                })
                .collect()
        })
        .collect();

    for (i, msgs) in outgoing.into_iter().enumerate() {
        for (&j, (sum, count)) in tree.neighbors(i).iter().zip(msgs) {
            let slot = tree
                .neighbors(j)
                .binary_search(&i)
                .expect("tree adjacency is symmetric");
            states[j].inbox[slot] = Relay {
                from: i,
                sum,
                count,
            };
        }
    }

    states
        .par_iter_mut()
        .zip(updates)
        .for_each(|(state, update)| {
            let mut total = update.clone();
            let mut count = 1u64;
            for relay in &state.inbox {
                for (acc, x) in total.iter_mut().zip(&relay.sum) {
                    *acc += x;
                }
                count += relay.count;
            }
            let denom = count as f64;
            for x in &mut total {
                *x /= denom;
            }
            state.model = total;
            state.count = count;
        });
    Ok(())
}

/// RelaySum engine bound to one routing tree for the whole run.
#[derive(Debug, Clone)]
pub struct RelaySum {
    tree: RoutingTree,
    states: Vec<RelayNodeState>,
}

impl RelaySum {
    pub fn new(tree: RoutingTree, initial_model: &[f64], init: RelayInit) -> Self {
        let states = (0..tree.vertices())
            .map(|i| RelayNodeState::fresh(&tree, i, initial_model, init))
            .collect();
        Self { tree, states }
    }

    pub fn round(&mut self, updates: &[Vec<f64>]) -> Result<()> {
        relaysum_round(&mut self.states, updates, &self.tree)
    }

    pub fn states(&self) -> &[RelayNodeState] {
        &self.states
    }

    pub fn models(&self) -> Vec<Vec<f64>> {
        self.states.iter().map(|s| s.model.clone()).collect()
    }

    pub fn tree(&self) -> &RoutingTree {
        &self.tree
    }

    /// One message per tree edge per direction.
    pub fn messages_per_round(&self) -> usize {
        2 * self.tree.edges().len()
    }
}
