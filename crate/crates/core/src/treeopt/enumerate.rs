use crate::connectivity::InterPlaneGraph;
use crate::error::{Error, Result};

use super::{RoutingTree, TreeEdge};

/// Exhaustive enumeration refuses graphs above this size.
pub const BRUTE_FORCE_MAX_VERTICES: usize = 9;

/// Union-find with undo, so the enumeration can backtrack cheaply.
struct Dsu {
    parent: Vec<usize>,
    size: Vec<usize>,
    history: Vec<Option<(usize, usize)>>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
            history: Vec::new(),
        }
    }

    fn find(&self, mut v: usize) -> usize {
        while self.parent[v] != v {
            v = self.parent[v];
        }
        v
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            self.history.push(None);
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        self.history.push(Some((ra, rb)));
        true
    }

    fn undo(&mut self) {
        if let Some(Some((ra, rb))) = self.history.pop() {
            self.parent[rb] = rb;
            self.size[ra] -= self.size[rb];
        }
    }
}

/// Calls `visit` with the edge indices (ascending) of every spanning tree of `graph`.
pub fn for_each_spanning_tree(graph: &InterPlaneGraph, mut visit: impl FnMut(&[usize])) {
    let n = graph.vertices;
    if n == 0 {
        return;
    }
    let mut chosen = Vec::with_capacity(n.saturating_sub(1));
    let mut dsu = Dsu::new(n);
    recurse(graph, 0, &mut chosen, &mut dsu, &mut visit);
}

fn recurse(
    graph: &InterPlaneGraph,
    next: usize,
    chosen: &mut Vec<usize>,
    dsu: &mut Dsu,
    visit: &mut impl FnMut(&[usize]),
) {
    let need = graph.vertices - 1;
    if chosen.len() == need {
        visit(chosen);
        return;
    }
    if next >= graph.edges.len() || chosen.len() + (graph.edges.len() - next) < need {
        return;
    }
    let e = &graph.edges[next];
    if dsu.union(e.a, e.b) {
        chosen.push(next);
        recurse(graph, next + 1, chosen, dsu, visit);
        chosen.pop();
    }
    dsu.undo();
    recurse(graph, next + 1, chosen, dsu, visit);
}

fn weighted_diameter(graph: &InterPlaneGraph, edge_ids: &[usize], scratch: &mut Scratch) -> f64 {
    let n = graph.vertices;
    for list in scratch.adj.iter_mut() {
        list.clear();
    }
    for &i in edge_ids {
        let e = &graph.edges[i];
        scratch.adj[e.a].push((e.b, e.weight));
        scratch.adj[e.b].push((e.a, e.weight));
    }
    let mut best = 0.0f64;
    for s in 0..n {
        scratch.stack.clear();
        scratch.stack.push((s, usize::MAX, 0.0));
        while let Some((v, p, d)) = scratch.stack.pop() {
            best = best.max(d);
            for &(w, wt) in &scratch.adj[v] {
                if w != p {
                    scratch.stack.push((w, v, d + wt));
                }
            }
        }
    }
    best
}

struct Scratch {
    adj: Vec<Vec<(usize, f64)>>,
    stack: Vec<(usize, usize, f64)>,
}

/// Exhaustive minimum-diameter spanning tree. Ties go to the lexicographically
/// smallest edge list.
pub fn brute_force_mdst(graph: &InterPlaneGraph) -> Result<RoutingTree> {
    if graph.vertices > BRUTE_FORCE_MAX_VERTICES {
        return Err(Error::Invalid(format!(
            "exhaustive search refuses {} vertices (limit {BRUTE_FORCE_MAX_VERTICES})",
            graph.vertices
        )));
    }
    graph.ensure_connected()?;
    let mut scratch = Scratch {
        adj: vec![Vec::new(); graph.vertices],
        stack: Vec::new(),
    };
    let mut best: Option<(f64, Vec<usize>)> = None;
    for_each_spanning_tree(graph, |ids| {
        let d = weighted_diameter(graph, ids, &mut scratch);
        // Edge indices follow the sorted edge order, so comparing index lists
        // compares edge lists lexicographically.
        let better = match &best {
            None => true,
            Some((bd, bids)) => d < *bd || (d == *bd && ids < bids.as_slice()),
        };
        if better {
            best = Some((d, ids.to_vec()));
        }
    });
    let (_, ids) = best.ok_or_else(|| Error::Infeasible("graph has no spanning tree".into()))?;
    RoutingTree::new(
        graph.vertices,
        ids.iter().map(|&i| {
            let e = &graph.edges[i];
            TreeEdge {
                a: e.a,
                b: e.b,
                weight: e.weight,
            }
        }),
    )
}

const CHAIN_SEARCH_BUDGET: usize = 5_000_000;

/// Hamiltonian path found by depth-first backtracking (start vertices and
/// neighbours tried in ascending order).
pub fn chain_tree(graph: &InterPlaneGraph) -> Result<RoutingTree> {
    let n = graph.vertices;
    if n == 0 {
        return Err(Error::Invalid("empty graph".into()));
    }
    let adj = graph.adjacency();
    let mut budget = CHAIN_SEARCH_BUDGET;
    for start in 0..n {
        let mut path = vec![start];
        let mut used = vec![false; n];
        used[start] = true;
        if extend(&adj, &mut path, &mut used, &mut budget) {
            let pairs: Vec<(usize, usize)> = path.windows(2).map(|w| (w[0], w[1])).collect();
            return RoutingTree::from_graph_edges(graph, &pairs);
        }
        if budget == 0 {
            return Err(Error::Infeasible("chain search budget exhausted".into()));
        }
    }
    Err(Error::Infeasible(
        "no Hamiltonian path (chain) exists in the connectivity graph".into(),
    ))
}

fn extend(
    adj: &[Vec<(usize, f64)>],
    path: &mut Vec<usize>,
    used: &mut [bool],
    budget: &mut usize,
) -> bool {
    if path.len() == adj.len() {
        return true;
    }
    if *budget == 0 {
        return false;
    }
    *budget -= 1;
    let last = *path.last().expect("path starts non-empty");
    for &(w, _) in &adj[last] {
        if used[w] {
            continue;
        }
        used[w] = true;
        path.push(w);
        if extend(adj, path, used, budget) {
            return true;
        }
        path.pop();
        used[w] = false;
    }
    false
}
