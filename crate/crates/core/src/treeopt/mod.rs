//! Aggregation tree construction: minimum-diameter spanning trees via the
//! absolute 1-center, an exhaustive oracle, the chain baseline, and hop delays.

mod center;
mod enumerate;

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::connectivity::{InterPlaneGraph, MAX_PLANES};
use crate::error::{Error, Result};

pub use center::{a1cp_mdst, absolute_center, CenterCandidate};
pub use enumerate::{
    brute_force_mdst, chain_tree, for_each_spanning_tree, BRUTE_FORCE_MAX_VERTICES,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// A spanning tree over the planes with its derived delay structure.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingTree {
    vertices: usize,
    edges: Vec<TreeEdge>,
    neighbors: Vec<Vec<usize>>,
    hops: Vec<Vec<usize>>,
    weighted_diameter: f64,
}

impl RoutingTree {
    /// Validates `edges` as a spanning tree of `vertices` nodes. Edges are
    /// normalized to `a < b` and sorted.
    pub fn new(vertices: usize, edges: impl IntoIterator<Item = TreeEdge>) -> Result<Self> {
        if vertices == 0 {
            return Err(Error::Invalid("a tree needs at least one vertex".into()));
        }
        if vertices > MAX_PLANES {
            return Err(Error::Invalid(format!(
                "{vertices} vertices exceeds {MAX_PLANES}"
            )));
        }
        let mut edges: Vec<TreeEdge> = edges
            .into_iter()
            .map(|e| TreeEdge {
                a: e.a.min(e.b),
                b: e.a.max(e.b),
                weight: e.weight,
            })
            .collect();
        edges.sort_by_key(|e| (e.a, e.b));
        if edges.len() != vertices - 1 {
            return Err(Error::Invalid(format!(
                "a spanning tree on {vertices} vertices has {} edges, got {}",
                vertices - 1,
                edges.len()
            )));
        }
        let mut neighbors = vec![Vec::new(); vertices];
        for e in &edges {
            if e.a == e.b || e.b >= vertices {
                return Err(Error::Invalid(format!("bad tree edge ({}, {})", e.a, e.b)));
            }
            if !(e.weight.is_finite() && e.weight > 0.0) {
                return Err(Error::Invalid(format!(
                    "tree edge ({}, {}) has weight {}",
                    e.a, e.b, e.weight
                )));
            }
            neighbors[e.a].push(e.b);
            neighbors[e.b].push(e.a);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        // n-1 edges + connected ⇒ acyclic.
        let hops: Vec<Vec<usize>> = (0..vertices).map(|s| bfs_hops(&neighbors, s)).collect();
        if hops[0].contains(&usize::MAX) {
            return Err(Error::Invalid(
                "tree edges do not connect every vertex".into(),
            ));
        }
        let mut tree = Self {
            vertices,
            edges,
            neighbors,
            hops,
            weighted_diameter: 0.0,
        };
        tree.weighted_diameter = tree.compute_weighted_diameter();
        Ok(tree)
    }

    /// Tree from bare edges with unit weights.
    pub fn unweighted(vertices: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Self::new(
            vertices,
            edges.iter().map(|&(a, b)| TreeEdge { a, b, weight: 1.0 }),
        )
    }

    /// Tree whose edge weights are looked up in `graph`; every edge must exist there.
    pub fn from_graph_edges(graph: &InterPlaneGraph, edges: &[(usize, usize)]) -> Result<Self> {
        let weighted = edges
            .iter()
            .map(|&(a, b)| {
                graph
                    .weight(a, b)
                    .map(|weight| TreeEdge { a, b, weight })
                    .ok_or_else(|| Error::Invalid(format!("edge ({a}, {b}) is not in the graph")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(graph.vertices, weighted)
    }

    pub fn vertices(&self) -> usize {
        self.vertices
    }

    pub fn edges(&self) -> &[TreeEdge] {
        &self.edges
    }

    pub fn edge_pairs(&self) -> Vec<(usize, usize)> {
        self.edges.iter().map(|e| (e.a, e.b)).collect()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn hop_distance(&self, a: usize, b: usize) -> usize {
        self.hops[a][b]
    }

    pub fn hop_diameter(&self) -> usize {
        self.hops.iter().flatten().copied().max().unwrap_or(0)
    }

    pub fn eccentricity(&self, v: usize) -> usize {
        self.hops[v].iter().copied().max().unwrap_or(0)
    }

    pub fn weighted_diameter(&self) -> f64 {
        self.weighted_diameter
    }

    /// `τ_ij`: hops between `i` and `j` minus one, zero on the diagonal and for neighbors.
    pub fn hop_delays(&self) -> Vec<Vec<usize>> {
        hop_delays(self)
    }

    pub fn tau_max(&self) -> usize {
        self.hop_diameter().saturating_sub(1)
    }

    /// `τ̃ = τ_max + 1`.
    pub fn tau_tilde(&self) -> usize {
        self.tau_max() + 1
    }

    fn compute_weighted_diameter(&self) -> f64 {
        let mut adj = vec![Vec::new(); self.vertices];
        for e in &self.edges {
            adj[e.a].push((e.b, e.weight));
            adj[e.b].push((e.a, e.weight));
        }
        let mut best = 0.0f64;
        let mut stack = Vec::new();
        for s in 0..self.vertices {
            stack.clear();
            stack.push((s, usize::MAX, 0.0f64));
            while let Some((v, parent, dist)) = stack.pop() {
                best = best.max(dist);
                for &(w, wt) in &adj[v] {
                    if w != parent {
                        stack.push((w, v, dist + wt));
                    }
                }
            }
        }
        best
    }

    pub fn to_document(&self) -> TreeDocument {
        TreeDocument {
            vertices: self.vertices,
            edges: self.edges.iter().map(|e| [e.a, e.b]).collect(),
            weights: Some(self.edges.iter().map(|e| e.weight).collect()),
            hop_diameter: Some(self.hop_diameter()),
            weighted_diameter: Some(self.weighted_diameter),
            tau_max: Some(self.tau_max()),
            tau_tilde: Some(self.tau_tilde()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("tree serializes")
    }

    /// Parses a tree document. Derived fields in the input are informational
    /// and recomputed; missing weights default to 1.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: TreeDocument = serde_json::from_str(text)?;
        doc.into_tree()
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph routing_tree {\n");
        for v in 0..self.vertices {
            let _ = writeln!(out, "  p{v};");
        }
        for e in &self.edges {
            let _ = writeln!(out, "  p{} -- p{} [weight=\"{:e}\"];", e.a, e.b, e.weight);
        }
        out.push_str("}\n");
        out
    }
}

/// Serialized form of a [`RoutingTree`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeDocument {
    pub vertices: usize,
    pub edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hop_diameter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weighted_diameter: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_tilde: Option<usize>,
}

impl TreeDocument {
    pub fn into_tree(self) -> Result<RoutingTree> {
        if self.vertices == 0 || self.vertices > MAX_PLANES {
            return Err(Error::Invalid(format!(
                "tree vertex count {} outside 1..={MAX_PLANES}",
                self.vertices
            )));
        }
        let weights = match self.weights {
            Some(w) if w.len() != self.edges.len() => {
                return Err(Error::Invalid(format!(
                    "{} weights for {} edges",
                    w.len(),
                    self.edges.len()
                )))
            }
            Some(w) => w,
            None => vec![1.0; self.edges.len()],
        };
        RoutingTree::new(
            self.vertices,
            self.edges
                .iter()
                .zip(weights)
                .map(|(&[a, b], weight)| TreeEdge { a, b, weight }),
        )
    }
}

pub fn hop_delays(tree: &RoutingTree) -> Vec<Vec<usize>> {
    tree.hops
        .iter()
        .map(|row| row.iter().map(|&h| h.saturating_sub(1)).collect())
        .collect()
}

fn bfs_hops(neighbors: &[Vec<usize>], source: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; neighbors.len()];
    dist[source] = 0;
    let mut queue = VecDeque::from([source]);
    while let Some(v) = queue.pop_front() {
        for &w in &neighbors[v] {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    dist
}
