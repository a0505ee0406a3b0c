use crate::error::{invalid, Error, Result};
use crate::graph::{graph_intersection, k_core, SimpleGraph};
use crate::models::CorrelatedInstance;
use crate::types::{PartialMatching, Permutation};

/// Default largest `n` the exhaustive k-core search accepts.
pub const EXACT_KCORE_LIMIT: usize = 8;

/// `⌈max(nps²/(ln nps²)², ln n/(ln ln n)²)⌉`, with the first branch dropped
/// when `nps² ≤ e`.
pub fn select_k(n: usize, p: f64, s: f64) -> Result<usize> {
    if n < 3 {
        return Err(invalid(format!("select_k needs n >= 3, got {n}")));
    }
    let nf = n as f64;
    let lam = nf * p * s * s;
    let dense = if lam > std::f64::consts::E {
        lam / lam.ln().powi(2)
    } else {
        0.0
    };
    let sparse = nf.ln() / nf.ln().ln().powi(2);
    Ok((dense.max(sparse).ceil() as usize).max(1))
}

fn graphs(inst: &CorrelatedInstance) -> Result<(&SimpleGraph, &SimpleGraph)> {
    match (&inst.graph1, &inst.graph2) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(invalid("k-core matching needs an instance with graphs")),
    }
}

/// `π` restricted to the k-core of `G1 ∧_π G2`.
pub fn kcore_match_under(
    g1: &SimpleGraph,
    g2: &SimpleGraph,
    pi: &Permutation,
    k: usize,
) -> Result<PartialMatching> {
    let inter = graph_intersection(g1, g2, pi)?;
    Ok(pi.restrict(&k_core(&inter, k)))
}

/// The k-core matching the exhaustive estimator returns with high
/// probability: the true correspondence restricted to the k-core of the true
/// intersection graph. Needs ground truth.
pub fn kcore_match_oracle(inst: &CorrelatedInstance, k: usize) -> Result<PartialMatching> {
    let (g1, g2) = graphs(inst)?;
    kcore_match_under(g1, g2, &inst.truth_perm, k)
}

/// Largest matching `(M, φ)` whose intersection graph on `M` has minimum
/// degree at least `k`, by exhaustive search. Among largest matchings the
/// lexicographically smallest sorted pair list wins.
pub fn kcore_match_exact(
    g1: &SimpleGraph,
    g2: &SimpleGraph,
    k: usize,
    limit: usize,
) -> Result<PartialMatching> {
    kcore_search(g1, g2, k, limit, u64::MAX)
}

/// As [`kcore_match_exact`] but also aborts after `max_states` search nodes.
pub(crate) fn kcore_search(
    g1: &SimpleGraph,
    g2: &SimpleGraph,
    k: usize,
    limit: usize,
    max_states: u64,
) -> Result<PartialMatching> {
    let n = g1.n();
    if g2.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: g2.n(),
        });
    }
    if n > limit {
        return Err(Error::Capacity {
            what: "n for exhaustive k-core matching",
            actual: n,
            limit,
        });
    }
    let mut search = Search {
        g1,
        g2,
        k,
        n,
        src: Vec::new(),
        dst: Vec::new(),
        deg: Vec::new(),
        used: vec![false; n],
        states: 0,
        max_states,
    };
    for size in (1..=n).rev() {
        // every matched node needs k distinct matched neighbours
        if k >= size {
            continue;
        }
        if search.extend(size, 0)? {
            let pairs = search.src.iter().copied().zip(search.dst.iter().copied()).collect();
            return Ok(PartialMatching::from_pairs_unchecked(n, pairs));
        }
    }
    Ok(PartialMatching::empty(n))
}

struct Search<'a> {
    g1: &'a SimpleGraph,
    g2: &'a SimpleGraph,
    k: usize,
    n: usize,
    src: Vec<usize>,
    dst: Vec<usize>,
    /// intersection degree of each placed node among placed nodes
    deg: Vec<usize>,
    used: Vec<bool>,
    states: u64,
    max_states: u64,
}

impl Search<'_> {
    /// Depth-first in lexicographic order of `(i1, φ(i1), i2, φ(i2), ...)`;
    /// returns true with the first complete matching of `size` pairs.
    fn extend(&mut self, size: usize, next_src: usize) -> Result<bool> {
        self.states += 1;
        if self.states > self.max_states {
            return Err(Error::Capacity {
                what: "k-core search states",
                actual: self.states as usize,
                limit: self.max_states as usize,
            });
        }
        let placed = self.src.len();
        if placed == size {
            return Ok(self.deg.iter().all(|&d| d >= self.k));
        }
        let remaining = size - placed;
        // each placed node can gain at most one neighbour per remaining slot
        if self.deg.iter().any(|&d| d + remaining < self.k) {
            return Ok(false);
        }
        let last_src = self.n - remaining;
        for i in next_src..=last_src {
            if self.g1.degree(i) < self.k {
                continue;
            }
            for j in 0..self.n {
                if self.used[j] || self.g2.degree(j) < self.k {
                    continue;
                }
                let mut gained = 0;
                for (slot, (&a, &b)) in self.src.iter().zip(&self.dst).enumerate() {
                    if self.g1.has_edge(i, a) && self.g2.has_edge(j, b) {
                        self.deg[slot] += 1;
                        gained += 1;
                    }
                }
                self.src.push(i);
                self.dst.push(j);
                self.deg.push(gained);
                self.used[j] = true;
                let found = self.extend(size, i + 1)?;
                if found {
                    return Ok(true);
                }
                self.used[j] = false;
                self.deg.pop();
                self.dst.pop();
                self.src.pop();
                for (slot, (&a, &b)) in self.src.iter().zip(&self.dst).enumerate() {
                    if self.g1.has_edge(i, a) && self.g2.has_edge(j, b) {
                        self.deg[slot] -= 1;
                    }
                }
            }
        }
        Ok(false)
    }
}
