use crate::error::{Error, Result};
use crate::treeopt::RoutingTree;

use super::check_dims;

/// Dense doubly stochastic gossip matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GossipMatrix {
    rows: Vec<Vec<f64>>,
}

const STOCHASTIC_TOL: f64 = 1e-12;

impl GossipMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Shape("gossip matrix must be square".into()));
        }
        if rows.iter().flatten().any(|&x| !(x.is_finite() && x >= 0.0)) {
            return Err(Error::Invalid(
                "gossip weights must be finite and non-negative".into(),
            ));
        }
        for (i, r) in rows.iter().enumerate() {
            let row: f64 = r.iter().sum();
            let col: f64 = rows.iter().map(|r| r[i]).sum();
            if (row - 1.0).abs() > STOCHASTIC_TOL || (col - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::Invalid(format!(
                    "gossip matrix not doubly stochastic at {i}: row {row}, column {col}"
                )));
            }
        }
        Ok(Self { rows })
    }

    pub fn identity(n: usize) -> Self {
        let rows = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self { rows }
    }

    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i][j]
    }
}

/// Metropolis–Hastings weights on the tree: `1/(1 + max(deg_i, deg_j))` per
/// edge, remaining mass on the diagonal.
pub fn metropolis_hastings(tree: &RoutingTree) -> GossipMatrix {
    let n = tree.vertices();
    let mut rows = vec![vec![0.0; n]; n];
    for e in tree.edges() {
        let deg = tree.neighbors(e.a).len().max(tree.neighbors(e.b).len());
        let w = 1.0 / (1.0 + deg as f64);
        rows[e.a][e.b] = w;
        rows[e.b][e.a] = w;
    }
    for (i, row) in rows.iter_mut().enumerate() {
        let off: f64 = row.iter().sum();
        row[i] = 1.0 - off;
    }
    GossipMatrix { rows }
}

/// `X ← G X`.
pub fn gossip_round(states: &mut [Vec<f64>], gossip: &GossipMatrix) -> Result<()> {
    if states.len() != gossip.size() {
        return Err(Error::Shape(format!(
            "{} states for a {}-node gossip matrix",
            states.len(),
            gossip.size()
        )));
    }
    let dim = check_dims(states)?;
    let next: Vec<Vec<f64>> = gossip
        .rows
        .iter()
        .map(|row| {
            let mut acc = vec![0.0; dim];
            for (w, x) in row.iter().zip(states.iter()) {
                if *w == 0.0 {
                    continue;
                }
                for (a, v) in acc.iter_mut().zip(x) {
                    *a += w * v;
                }
            }
            acc
        })
        .collect();
    states.clone_from_slice(&next);
    Ok(())
}
