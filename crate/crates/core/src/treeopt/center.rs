use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::connectivity::InterPlaneGraph;
use crate::error::{Error, Result};

use super::{RoutingTree, TreeEdge};

/// A point on the graph's edge continuum: `offset` along edge `edge` measured from its `a` end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterCandidate {
    pub edge: usize,
    pub offset: f64,
    /// Largest shortest-path distance from the point to any vertex.
    pub radius: f64,
}

fn all_pairs_shortest(graph: &InterPlaneGraph) -> Vec<Vec<f64>> {
    let n = graph.vertices;
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (v, row) in d.iter_mut().enumerate() {
        row[v] = 0.0;
    }
    for e in &graph.edges {
        d[e.a][e.b] = d[e.a][e.b].min(e.weight);
        d[e.b][e.a] = d[e.b][e.a].min(e.weight);
    }
    for k in 0..n {
        for i in 0..n {
            let dik = d[i][k];
            if dik.is_infinite() {
                continue;
            }
            for j in 0..n {
                let via = dik + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

/// Absolute 1-center of a connected graph with at least one edge.
///
/// On each edge `(a, b)` of length `w`, the distance from the point at offset `x`
/// to vertex `v` is `min(d(a,v) + x, d(b,v) + w − x)`. The maximum of these tent
/// functions is piecewise linear and attains its minimum either at an endpoint or
/// where an increasing piece `d(a,p) + x` meets a decreasing piece `d(b,q) + w − x`,
/// so only those finitely many offsets are scanned. Ties go to the smallest
/// `(edge index, offset)`.
pub fn absolute_center(graph: &InterPlaneGraph) -> Result<CenterCandidate> {
    graph.ensure_connected()?;
    if graph.edges.is_empty() {
        return Err(Error::Invalid(
            "absolute center needs at least one edge".into(),
        ));
    }
    let dist = all_pairs_shortest(graph);
    let n = graph.vertices;
    let mut best: Option<CenterCandidate> = None;
    let mut offsets = Vec::with_capacity(n * n + 2);
    for (idx, e) in graph.edges.iter().enumerate() {
        let w = e.weight;
        let (da, db) = (&dist[e.a], &dist[e.b]);
        offsets.clear();
        offsets.push(0.0);
        offsets.push(w);
        for p in 0..n {
            for q in 0..n {
                let x = (db[q] + w - da[p]) / 2.0;
                if (0.0..=w).contains(&x) {
                    offsets.push(x);
                }
            }
        }
        offsets.sort_by(f64::total_cmp);
        offsets.dedup();
        for &x in &offsets {
            let radius = (0..n)
                .map(|v| (da[v] + x).min(db[v] + (w - x)))
                .fold(0.0f64, f64::max);
            let better = match best {
                None => true,
                Some(b) => radius < b.radius,
            };
            if better {
                best = Some(CenterCandidate {
                    edge: idx,
                    offset: x,
                    radius,
                });
            }
        }
    }
    Ok(best.expect("at least one edge scanned"))
}

#[derive(PartialEq)]
struct Entry {
    dist: f64,
    vertex: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    // Min-heap on (dist, vertex).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Minimum-diameter spanning tree: the shortest-path tree grown from the
/// absolute 1-center.
pub fn a1cp_mdst(graph: &InterPlaneGraph) -> Result<RoutingTree> {
    graph.ensure_connected()?;
    if graph.vertices == 1 {
        return RoutingTree::new(1, []);
    }
    let center = absolute_center(graph)?;
    let host = &graph.edges[center.edge];
    let n = graph.vertices;
    let adj = graph.adjacency();

    const VIRTUAL: usize = usize::MAX;
    let mut dist = vec![f64::INFINITY; n];
    let mut parent = vec![VIRTUAL; n];
    let mut done = vec![false; n];
    dist[host.a] = center.offset;
    dist[host.b] = host.weight - center.offset;
    let mut heap = BinaryHeap::new();
    heap.push(Entry {
        dist: dist[host.a],
        vertex: host.a,
    });
    heap.push(Entry {
        dist: dist[host.b],
        vertex: host.b,
    });
    while let Some(Entry { dist: d, vertex: v }) = heap.pop() {
        if done[v] {
            continue;
        }
        done[v] = true;
        for &(w, wt) in &adj[v] {
            let cand = d + wt;
            if !done[w] && cand < dist[w] {
                dist[w] = cand;
                parent[w] = v;
                heap.push(Entry {
                    dist: cand,
                    vertex: w,
                });
            }
        }
    }

    let mut edges = Vec::with_capacity(n - 1);
    for (v, &p) in parent.iter().enumerate() {
        if p != VIRTUAL {
            let weight = graph.weight(v, p).expect("parent edge exists");
            edges.push(TreeEdge { a: v, b: p, weight });
        }
    }
    if parent[host.a] == VIRTUAL && parent[host.b] == VIRTUAL {
        edges.push(TreeEdge {
            a: host.a,
            b: host.b,
            weight: host.weight,
        });
    }
    RoutingTree::new(n, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize, edges: &[(usize, usize)]) -> InterPlaneGraph {
        InterPlaneGraph::from_weights(
            n,
            &edges.iter().map(|&(a, b)| (a, b, 1.0)).collect::<Vec<_>>(),
        )
        .unwrap()
    }

    #[test]
    fn star_center_is_hub() {
        let g = unit(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]);
        let c = absolute_center(&g).unwrap();
        assert_eq!(c.radius, 1.0);
        assert_eq!((c.edge, c.offset), (0, 0.0));
        let t = a1cp_mdst(&g).unwrap();
        assert_eq!(t.edge_pairs(), vec![(0, 1), (0, 2), (0, 3), (0, 4)]);
        assert_eq!(t.hop_diameter(), 2);
    }

    #[test]
    fn path_center_is_interior_midpoint() {
        let g = unit(4, &[(0, 1), (1, 2), (2, 3)]);
        let c = absolute_center(&g).unwrap();
        assert_eq!(c.radius, 1.5);
        assert_eq!((c.edge, c.offset), (1, 0.5));
        let t = a1cp_mdst(&g).unwrap();
        assert_eq!(t.weighted_diameter(), 3.0);
    }

    #[test]
    fn double_star_for_circulant_seven() {
        let mut edges = Vec::new();
        for a in 0..7usize {
            for b in a + 1..7 {
                let gap = (b - a).min(7 - (b - a));
                if gap <= 2 {
                    edges.push((a, b));
                }
            }
        }
        let t = a1cp_mdst(&unit(7, &edges)).unwrap();
        assert_eq!(t.hop_diameter(), 3);
    }

    #[test]
    fn disconnected_rejected() {
        let g = unit(4, &[(0, 1), (2, 3)]);
        assert!(matches!(a1cp_mdst(&g), Err(Error::Disconnected { .. })));
    }

    #[test]
    fn single_vertex() {
        let g = unit(1, &[]);
        let t = a1cp_mdst(&g).unwrap();
        assert_eq!(t.vertices(), 1);
        assert!(t.edges().is_empty());
    }
}
