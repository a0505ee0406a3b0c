//! Simple undirected graphs and the structural operations used by the
//! matching and recovery code: union and intersection under a node
//! correspondence, and k-core peeling.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Result};
use crate::types::Permutation;

/// An undirected graph on nodes `0..n` without self-loops or multi-edges.
///
/// Neighbour lists are kept sorted, so edge lookups are binary searches and
/// union/intersection are linear merges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimpleGraph {
    adj: Vec<Vec<usize>>,
    edge_count: usize,
}

impl SimpleGraph {
    pub fn empty(n: usize) -> Self {
        Self {
            adj: vec![Vec::new(); n],
            edge_count: 0,
        }
    }

    pub fn complete(n: usize) -> Self {
        let adj = (0..n)
            .map(|i| (0..n).filter(|&j| j != i).collect())
            .collect();
        Self {
            adj,
            edge_count: n * n.saturating_sub(1) / 2,
        }
    }

    /// Builds a graph from an edge list. Duplicate edges are merged; self-loops
    /// and out-of-range endpoints are rejected.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(invalid(format!("edge ({u}, {v}) out of range for n={n}")));
            }
            if u == v {
                return Err(invalid(format!("self-loop at node {u}")));
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        Ok(Self::from_unsorted_adjacency(adj))
    }

    fn from_unsorted_adjacency(mut adj: Vec<Vec<usize>>) -> Self {
        let mut twice = 0;
        for nb in &mut adj {
            nb.sort_unstable();
            nb.dedup();
            twice += nb.len();
        }
        Self {
            adj,
            edge_count: twice / 2,
        }
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].binary_search(&v).is_ok()
    }

    /// Edges `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(u, nb)| nb.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    /// The graph `H` with `H_{ij} = self_{pi(i), pi(j)}`.
    pub fn pulled_back(&self, pi: &Permutation) -> Result<Self> {
        check_len(self.n(), pi.len())?;
        let inv = pi.inverse();
        let mut adj = vec![Vec::new(); self.n()];
        for (u, v) in self.edges() {
            let (a, b) = (inv.apply(u), inv.apply(v));
            adj[a].push(b);
            adj[b].push(a);
        }
        Ok(Self::from_unsorted_adjacency(adj))
    }

    /// Minimum degree of the subgraph induced by `nodes` (which must be sorted).
    /// Returns `None` for an empty node set.
    pub fn induced_min_degree(&self, nodes: &[usize]) -> Option<usize> {
        nodes
            .iter()
            .map(|&u| count_common(&self.adj[u], nodes))
            .min()
    }
}

fn count_common(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut c) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                c += 1;
                i += 1;
                j += 1;
            }
        }
    }
    c
}

fn merge_union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

fn merge_intersection(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

fn combine(
    a: &SimpleGraph,
    b: &SimpleGraph,
    pi: &Permutation,
    op: fn(&[usize], &[usize]) -> Vec<usize>,
) -> Result<SimpleGraph> {
    check_len(a.n(), b.n())?;
    let b = b.pulled_back(pi)?;
    let adj: Vec<Vec<usize>> = a.adj.iter().zip(&b.adj).map(|(x, y)| op(x, y)).collect();
    let twice: usize = adj.iter().map(Vec::len).sum();
    Ok(SimpleGraph {
        adj,
        edge_count: twice / 2,
    })
}

/// `(A ∨_π B)_{ij} = max(A_{ij}, B_{π(i)π(j)})`.
pub fn graph_union(a: &SimpleGraph, b: &SimpleGraph, pi: &Permutation) -> Result<SimpleGraph> {
    combine(a, b, pi, merge_union)
}

/// `(A ∧_π B)_{ij} = min(A_{ij}, B_{π(i)π(j)})`.
pub fn graph_intersection(
    a: &SimpleGraph,
    b: &SimpleGraph,
    pi: &Permutation,
) -> Result<SimpleGraph> {
    combine(a, b, pi, merge_intersection)
}

/// The k-core: the largest node set whose induced subgraph has minimum
/// degree at least `k`. Computed by bucket-queue peeling in `O(n + |E|)`.
/// Returned nodes are sorted; `k = 0` yields every node.
pub fn k_core(g: &SimpleGraph, k: usize) -> Vec<usize> {
    let n = g.n();
    if k == 0 {
        return (0..n).collect();
    }
    let mut deg: Vec<usize> = (0..n).map(|v| g.degree(v)).collect();
    let mut removed = vec![false; n];
    let mut stack: Vec<usize> = (0..n).filter(|&v| deg[v] < k).collect();
    for &v in &stack {
        removed[v] = true;
    }
    while let Some(v) = stack.pop() {
        for &u in g.neighbors(v) {
            if removed[u] {
                continue;
            }
            deg[u] -= 1;
            if deg[u] < k {
                removed[u] = true;
                stack.push(u);
            }
        }
    }
    (0..n).filter(|&v| !removed[v]).collect()
}

/// Core number of every node (largest `k` with the node in the k-core),
/// via Batagelj–Zaversnik bucket peeling.
pub fn core_numbers(g: &SimpleGraph) -> Vec<usize> {
    let n = g.n();
    if n == 0 {
        return Vec::new();
    }
    let mut deg: Vec<usize> = (0..n).map(|v| g.degree(v)).collect();
    let max_deg = deg.iter().copied().max().unwrap_or(0);
    let mut bin = vec![0usize; max_deg + 1];
    for &d in &deg {
        bin[d] += 1;
    }
    let mut start = 0;
    for b in bin.iter_mut() {
        let c = *b;
        *b = start;
        start += c;
    }
    let mut pos = vec![0usize; n];
    let mut vert = vec![0usize; n];
    for v in 0..n {
        pos[v] = bin[deg[v]];
        vert[pos[v]] = v;
        bin[deg[v]] += 1;
    }
    for d in (1..=max_deg).rev() {
        bin[d] = bin[d - 1];
    }
    bin[0] = 0;
    for i in 0..n {
        let v = vert[i];
        for &u in g.neighbors(v) {
            if deg[u] > deg[v] {
                let du = deg[u];
                let pu = pos[u];
                let pw = bin[du];
                let w = vert[pw];
                if u != w {
                    pos[u] = pw;
                    vert[pu] = w;
                    pos[w] = pu;
                    vert[pw] = u;
                }
                bin[du] += 1;
                deg[u] -= 1;
            }
        }
    }
    deg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> SimpleGraph {
        SimpleGraph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    #[test]
    fn rejects_self_loops_and_range() {
        assert!(SimpleGraph::from_edges(3, [(1, 1)]).is_err());
        assert!(SimpleGraph::from_edges(3, [(0, 3)]).is_err());
    }

    #[test]
    fn duplicate_edges_merge() {
        let g = SimpleGraph::from_edges(3, [(0, 1), (1, 0), (0, 1)]).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert!(g.has_edge(1, 0));
    }

    #[test]
    fn union_with_empty_is_identity() {
        let a = triangle();
        let u = graph_union(&a, &SimpleGraph::empty(3), &Permutation::identity(3)).unwrap();
        assert_eq!(u, a);
        let u = graph_union(&a, &a, &Permutation::identity(3)).unwrap();
        assert_eq!(u, a);
    }

    #[test]
    fn union_and_intersection_small_case() {
        // 1-based (1,2) and (3,1) become 0-based (0,1) and (2,0) on 4 nodes
        let a = SimpleGraph::from_edges(4, [(0, 1)]).unwrap();
        let b = SimpleGraph::from_edges(4, [(2, 0)]).unwrap();
        let id = Permutation::identity(4);
        let u = graph_union(&a, &b, &id).unwrap();
        assert_eq!(u.edges().collect::<Vec<_>>(), vec![(0, 1), (0, 2)]);
        let x = graph_intersection(&a, &b, &id).unwrap();
        assert_eq!(x.edge_count(), 0);
    }

    #[test]
    fn intersection_with_complete_and_empty() {
        let a = SimpleGraph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        let id = Permutation::identity(4);
        assert_eq!(graph_intersection(&a, &SimpleGraph::complete(4), &id).unwrap(), a);
        assert_eq!(
            graph_intersection(&a, &SimpleGraph::empty(4), &id)
                .unwrap()
                .edge_count(),
            0
        );
    }

    #[test]
    fn union_respects_permutation() {
        // B has edge (pi(0), pi(1)) so the union under pi contains (0, 1)
        let pi = Permutation::new(vec![2, 0, 1]).unwrap();
        let b = SimpleGraph::from_edges(3, [(2, 0)]).unwrap();
        let u = graph_union(&SimpleGraph::empty(3), &b, &pi).unwrap();
        assert_eq!(u.edges().collect::<Vec<_>>(), vec![(0, 1)]);
    }

    #[test]
    fn size_mismatch_is_an_error() {
        let id = Permutation::identity(3);
        assert!(graph_union(&triangle(), &SimpleGraph::empty(4), &id).is_err());
    }

    #[test]
    fn k_core_examples() {
        assert_eq!(k_core(&triangle(), 2), vec![0, 1, 2]);
        let path = SimpleGraph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        assert!(k_core(&path, 2).is_empty());
        assert_eq!(k_core(&path, 0), vec![0, 1, 2]);
        // K4 minus the edge (2, 3)
        let k4m = SimpleGraph::from_edges(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3)]).unwrap();
        assert_eq!(k_core(&k4m, 2), vec![0, 1, 2, 3]);
        assert!(k_core(&k4m, 3).is_empty());
    }

    #[test]
    fn k4_minus_edge_brute_force_subsets() {
        let k4m = SimpleGraph::from_edges(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3)]).unwrap();
        for k in 1..=3 {
            let mut best: Vec<usize> = Vec::new();
            for mask in 1u32..16 {
                let set: Vec<usize> = (0..4).filter(|&v| mask & (1 << v) != 0).collect();
                if k4m.induced_min_degree(&set).unwrap() >= k && set.len() > best.len() {
                    best = set;
                }
            }
            assert_eq!(k_core(&k4m, k), best, "k = {k}");
        }
    }

    #[test]
    fn core_numbers_agree_with_k_core() {
        let g = SimpleGraph::from_edges(
            6,
            [(0, 1), (0, 2), (1, 2), (2, 3), (3, 4), (0, 3), (1, 3)],
        )
        .unwrap();
        let cores = core_numbers(&g);
        for k in 0..5 {
            let expected: Vec<usize> = (0..6).filter(|&v| cores[v] >= k).collect();
            assert_eq!(k_core(&g, k), expected);
        }
    }
}
