//! Node-correspondence estimators: minimum-distance assignment on
//! attributes, k-core matching on graphs, and the two-step combination.

mod assignment;
mod kcore;

pub use assignment::{cost_matrix, solve_assignment, CostMatrix};
pub use kcore::{
    kcore_match_exact, kcore_match_oracle, kcore_match_under, select_k, EXACT_KCORE_LIMIT,
};
pub(crate) use kcore::kcore_search;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Error, Result};
use crate::graph::SimpleGraph;
use crate::models::CorrelatedInstance;
use crate::types::{sq_dist, AttributeDatabase, PartialMatching, Permutation};

/// Rounds of k-core / reassignment alternation in heuristic mode.
pub const HEURISTIC_ROUNDS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchMode {
    MinDistance,
    KcoreOracle,
    KcoreExact,
    KcoreHeuristic,
    TwoStep,
}

/// How step 1 of the two-step matcher finds its k-core matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KcoreMode {
    /// Truth restricted to the true intersection k-core (simulation only).
    Oracle,
    /// Exhaustive search; tiny `n` only.
    Exact,
    /// Alternates k-core extraction under the current estimate with
    /// attribute reassignment of the rest. No optimality guarantee.
    Heuristic,
}

impl KcoreMode {
    fn match_mode(self) -> MatchMode {
        match self {
            KcoreMode::Oracle => MatchMode::KcoreOracle,
            KcoreMode::Exact => MatchMode::KcoreExact,
            KcoreMode::Heuristic => MatchMode::KcoreHeuristic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub matching: PartialMatching,
    /// `Σ ‖x_i − y_{π(i)}‖²` over matched pairs, when attributes were used.
    pub total_cost: Option<f64>,
    pub mode: MatchMode,
    /// Step-1 method for two-step results.
    pub kcore_mode: Option<KcoreMode>,
    /// Size of the k-core matching found in step 1.
    pub kcore_size: Option<usize>,
}

impl MatchResult {
    pub fn permutation(&self) -> Option<Permutation> {
        self.matching.to_permutation().ok()
    }

    /// Nodes left for attribute matching after step 1.
    pub fn unmatched_after_kcore(&self) -> Option<usize> {
        self.kcore_size.map(|m| self.matching.universe() - m)
    }

    /// True iff the matching is total and agrees with `truth` everywhere.
    pub fn is_exact(&self, truth: &Permutation) -> bool {
        self.matching.len() == truth.len() && self.matching.mismatches(truth) == 0
    }
}

/// `Σ_i ‖x_i − y_{π(i)}‖²` in source order.
pub fn matching_cost(
    x: &AttributeDatabase,
    y: &AttributeDatabase,
    m: &PartialMatching,
) -> Result<f64> {
    check_len(x.d(), y.d())?;
    Ok(m.pairs()
        .iter()
        .map(|&(i, j)| sq_dist(x.row(i), y.row(j)))
        .sum())
}

/// The permutation minimising total squared distance between matched rows.
pub fn min_distance_match(x: &AttributeDatabase, y: &AttributeDatabase) -> Result<MatchResult> {
    check_len(x.n(), y.n())?;
    let z = cost_matrix(x, y)?;
    let (pi, cost) = solve_assignment(&z)?;
    Ok(MatchResult {
        matching: pi.restrict(&(0..pi.len()).collect::<Vec<_>>()),
        total_cost: Some(cost),
        mode: MatchMode::MinDistance,
        kcore_mode: None,
        kcore_size: None,
    })
}

/// Extends `step1` to a full permutation by minimum-distance matching of the
/// unmatched rows of `x` against the unused rows of `y`. Pairs of `step1` are
/// kept as they are.
pub fn complete_matching(
    step1: &PartialMatching,
    x: &AttributeDatabase,
    y: &AttributeDatabase,
) -> Result<Permutation> {
    let n = step1.universe();
    check_len(n, x.n())?;
    check_len(n, y.n())?;
    check_len(x.d(), y.d())?;
    let lookup = step1.as_lookup();
    let free_src: Vec<usize> = (0..n).filter(|&i| lookup[i].is_none()).collect();
    let mut taken = vec![false; n];
    for &(_, j) in step1.pairs() {
        taken[j] = true;
    }
    let free_dst: Vec<usize> = (0..n).filter(|&j| !taken[j]).collect();
    if free_src.len() != free_dst.len() {
        return Err(Error::Internal(format!(
            "step-2 sides differ: {} rows vs {} rows",
            free_src.len(),
            free_dst.len()
        )));
    }
    let mut mapping: Vec<usize> = lookup.iter().map(|o| o.unwrap_or(usize::MAX)).collect();
    if !free_src.is_empty() {
        let z = cost_matrix(&x.select_rows(&free_src), &y.select_rows(&free_dst))?;
        let (sub, _) = solve_assignment(&z)?;
        for (a, &i) in free_src.iter().enumerate() {
            mapping[i] = free_dst[sub.apply(a)];
        }
    }
    Permutation::new(mapping)
}

fn instance_graphs(inst: &CorrelatedInstance) -> Result<(&SimpleGraph, &SimpleGraph)> {
    match (&inst.graph1, &inst.graph2) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(invalid("two-step matching needs an instance with graphs")),
    }
}

/// Step 1 only: a k-core matching by the chosen method.
pub fn kcore_match(inst: &CorrelatedInstance, k: usize, mode: KcoreMode) -> Result<MatchResult> {
    let (g1, g2) = instance_graphs(inst)?;
    let matching = match mode {
        KcoreMode::Oracle => kcore_match_oracle(inst, k)?,
        KcoreMode::Exact => kcore_match_exact(g1, g2, k, EXACT_KCORE_LIMIT)?,
        KcoreMode::Heuristic => heuristic_kcore(g1, g2, &inst.db1, &inst.db2, k)?.0,
    };
    let size = matching.len();
    Ok(MatchResult {
        matching,
        total_cost: None,
        mode: mode.match_mode(),
        kcore_mode: Some(mode),
        kcore_size: Some(size),
    })
}

/// Returns the final k-core matching and the full permutation built on it.
fn heuristic_kcore(
    g1: &SimpleGraph,
    g2: &SimpleGraph,
    x: &AttributeDatabase,
    y: &AttributeDatabase,
    k: usize,
) -> Result<(PartialMatching, Permutation)> {
    let mut pi = if x.d() > 0 {
        min_distance_match(x, y)?.matching.to_permutation()?
    } else {
        Permutation::identity(x.n())
    };
    let mut core = kcore_match_under(g1, g2, &pi, k)?;
    for _ in 0..HEURISTIC_ROUNDS {
        let next_pi = complete_matching(&core, x, y)?;
        let next_core = kcore_match_under(g1, g2, &next_pi, k)?;
        pi = next_pi;
        if next_core == core {
            break;
        }
        core = next_core;
    }
    Ok((core, pi))
}

/// k-core matching on the graphs, then minimum-distance matching of the
/// remaining nodes on attributes.
pub fn two_step_match(inst: &CorrelatedInstance, k: usize, mode: KcoreMode) -> Result<MatchResult> {
    let (g1, g2) = instance_graphs(inst)?;
    let (step1, pi) = match mode {
        KcoreMode::Heuristic => heuristic_kcore(g1, g2, &inst.db1, &inst.db2, k)?,
        _ => {
            let step1 = kcore_match(inst, k, mode)?.matching;
            let pi = complete_matching(&step1, &inst.db1, &inst.db2)?;
            (step1, pi)
        }
    };
    let matching = pi.restrict(&(0..pi.len()).collect::<Vec<_>>());
    let total_cost = matching_cost(&inst.db1, &inst.db2, &matching)?;
    Ok(MatchResult {
        matching,
        total_cost: Some(total_cost),
        mode: MatchMode::TwoStep,
        kcore_mode: Some(mode),
        kcore_size: Some(step1.len()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{sample_ccsbm, sample_cgmm, CcsbmParams, CgmmParams};
    use crate::rng::Seed;

    fn small_ccsbm(n: usize, s: f64, seed: u64) -> CorrelatedInstance {
        let params = CcsbmParams {
            n,
            p: 0.6,
            q: 0.2,
            s,
            r: 4.0,
            d: 3,
            rho: 0.8,
            allow_equal_pq: false,
        };
        sample_ccsbm(&params, Seed::new(seed, 0)).unwrap()
    }

    #[test]
    fn rho_one_recovers_truth() {
        for seed in 0..5 {
            let inst = sample_cgmm(&CgmmParams::with_radius(50, 3, 1.0, 1.0), Seed::new(seed, 0)).unwrap();
            let r = min_distance_match(&inst.db1, &inst.db2).unwrap();
            assert!(r.is_exact(&inst.truth_perm));
            assert_eq!(r.total_cost, Some(0.0));
        }
    }

    #[test]
    fn empty_step1_is_pure_min_distance() {
        let inst = small_ccsbm(30, 0.0, 1);
        let two = two_step_match(&inst, 1, KcoreMode::Oracle).unwrap();
        assert_eq!(two.kcore_size, Some(0));
        let md = min_distance_match(&inst.db1, &inst.db2).unwrap();
        assert_eq!(two.matching, md.matching);
        assert_eq!(two.total_cost, md.total_cost);
    }

    #[test]
    fn full_step1_returned_unchanged() {
        let mut inst = small_ccsbm(20, 1.0, 2);
        inst.graph1 = Some(SimpleGraph::complete(20));
        inst.graph2 = Some(SimpleGraph::complete(20));
        let two = two_step_match(&inst, 1, KcoreMode::Oracle).unwrap();
        assert_eq!(two.unmatched_after_kcore(), Some(0));
        assert!(two.is_exact(&inst.truth_perm));
    }

    #[test]
    fn step2_never_overrides_step1() {
        for seed in 0..10 {
            let inst = small_ccsbm(40, 0.5, seed);
            for mode in [KcoreMode::Oracle, KcoreMode::Heuristic] {
                let step1 = kcore_match(&inst, 2, mode).unwrap().matching;
                let two = two_step_match(&inst, 2, mode).unwrap();
                let lookup = two.matching.as_lookup();
                for &(i, j) in step1.pairs() {
                    assert_eq!(lookup[i], Some(j));
                }
            }
        }
    }

    #[test]
    fn exact_mode_on_tiny_instance() {
        let inst = small_ccsbm(6, 1.0, 4);
        let r = two_step_match(&inst, 1, KcoreMode::Exact).unwrap();
        assert!(r.permutation().is_some());
        let big = small_ccsbm(12, 1.0, 4);
        assert!(two_step_match(&big, 1, KcoreMode::Exact).is_err());
    }

    #[test]
    fn two_step_requires_graphs() {
        let inst = sample_cgmm(&CgmmParams::with_radius(10, 2, 0.5, 1.0), Seed::new(1, 0)).unwrap();
        assert!(two_step_match(&inst, 1, KcoreMode::Oracle).is_err());
    }
}
