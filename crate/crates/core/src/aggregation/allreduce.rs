use crate::error::Result;
use crate::treeopt::RoutingTree;

use super::check_dims;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AllReduceOutcome {
    /// Inter-plane communication rounds: an up-sweep to the root then a
    /// down-sweep, each as deep as the tree's hop diameter.
    pub rounds_used: usize,
    pub messages: usize,
}

/// Replaces every model with the exact mean via a rooted two-phase sweep.
///
/// The root is a peripheral vertex (maximum eccentricity, smallest index), so
/// each sweep takes `hop_diameter` rounds.
pub fn allreduce_tree(states: &mut [Vec<f64>], tree: &RoutingTree) -> Result<AllReduceOutcome> {
    let n = tree.vertices();
    if states.len() != n {
        return Err(crate::error::Error::Shape(format!(
            "{} states for a {n}-node tree",
            states.len()
        )));
    }
    let dim = check_dims(states)?;
    if n == 1 {
        return Ok(AllReduceOutcome {
            rounds_used: 0,
            messages: 0,
        });
    }
    let diameter = tree.hop_diameter();
    let root = (0..n)
        .find(|&v| tree.eccentricity(v) == diameter)
        .expect("some vertex attains the diameter");

    // Depth-first order from the root; reversed it is a valid post-order for summing.
    let mut order = Vec::with_capacity(n);
    let mut parent = vec![usize::MAX; n];
    let mut stack = vec![root];
    parent[root] = root;
    while let Some(v) = stack.pop() {
        order.push(v);
        for &w in tree.neighbors(v).iter().rev() {
            if parent[w] == usize::MAX {
                parent[w] = v;
                stack.push(w);
            }
        }
    }
    let mut partial: Vec<Vec<f64>> = states.to_vec();
    for &v in order.iter().rev() {
        if v == root {
            continue;
        }
        let child = std::mem::take(&mut partial[v]);
        let acc = &mut partial[parent[v]];
        for (a, x) in acc.iter_mut().zip(&child) {
            *a += x;
        }
    }
    let mut mean = std::mem::take(&mut partial[root]);
    debug_assert_eq!(mean.len(), dim);
    for x in &mut mean {
        *x /= n as f64;
    }
    for s in states.iter_mut() {
        s.clone_from(&mean);
    }
    Ok(AllReduceOutcome {
        rounds_used: 2 * diameter,
        messages: 2 * (n - 1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize) -> RoutingTree {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        RoutingTree::unweighted(n, &edges).unwrap()
    }

    #[test]
    fn single_node_noop() {
        let mut s = vec![vec![4.0]];
        let out = allreduce_tree(&mut s, &chain(1)).unwrap();
        assert_eq!(out.rounds_used, 0);
        assert_eq!(s, vec![vec![4.0]]);
    }

    #[test]
    fn chain_of_three_mean() {
        let mut s = vec![vec![1.0], vec![2.0], vec![3.0]];
        allreduce_tree(&mut s, &chain(3)).unwrap();
        assert_eq!(s, vec![vec![2.0]; 3]);
    }

    #[test]
    fn seven_chain_round_count() {
        let mut s = vec![vec![0.0]; 7];
        assert_eq!(allreduce_tree(&mut s, &chain(7)).unwrap().rounds_used, 12);
        let star = RoutingTree::unweighted(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        let mut s = vec![vec![0.0]; 4];
        assert_eq!(allreduce_tree(&mut s, &star).unwrap().rounds_used, 4);
    }
}
