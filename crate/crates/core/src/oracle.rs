//! Exhaustive reference solvers for cross-checking the fast paths on tiny
//! inputs. Every entry point refuses work above its budget before starting.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Error, Result};
use crate::graph::SimpleGraph;
use crate::matching::{kcore_search, CostMatrix};
use crate::types::{dot, sq_dist, AttributeDatabase, LabelVector, PartialMatching, Permutation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleBudget {
    pub max_n: usize,
    pub max_states: u64,
}

impl Default for OracleBudget {
    fn default() -> Self {
        Self {
            max_n: 8,
            max_states: 50_000_000,
        }
    }
}

impl OracleBudget {
    fn check_n(&self, n: usize) -> Result<()> {
        if n > self.max_n {
            return Err(Error::Capacity {
                what: "n for exhaustive search",
                actual: n,
                limit: self.max_n,
            });
        }
        Ok(())
    }

    fn check_states(&self, states: u64) -> Result<()> {
        if states > self.max_states {
            return Err(Error::Capacity {
                what: "enumeration states",
                actual: usize::try_from(states).unwrap_or(usize::MAX),
                limit: usize::try_from(self.max_states).unwrap_or(usize::MAX),
            });
        }
        Ok(())
    }
}

fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

/// Minimum of `Σ_i C[i][π(i)]` over all permutations, visited in
/// lexicographic order; the first minimiser wins ties.
fn brute_force_assignment(c: &CostMatrix, budget: &OracleBudget) -> Result<(Permutation, f64)> {
    let n = c.rows();
    check_len(n, c.cols())?;
    budget.check_n(n)?;
    budget.check_states(factorial(n))?;
    fn rec(
        c: &CostMatrix,
        i: usize,
        used: &mut [bool],
        cur: &mut Vec<usize>,
        acc: f64,
        best: &mut (Vec<usize>, f64),
    ) {
        if i == c.rows() {
            if acc < best.1 {
                *best = (cur.clone(), acc);
            }
            return;
        }
        for j in 0..c.cols() {
            if !used[j] {
                used[j] = true;
                cur.push(j);
                rec(c, i + 1, used, cur, acc + c.get(i, j), best);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut best = (Vec::new(), f64::INFINITY);
    rec(c, 0, &mut vec![false; n], &mut Vec::with_capacity(n), 0.0, &mut best);
    if n == 0 {
        return Ok((Permutation::identity(0), 0.0));
    }
    Ok((Permutation::new(best.0)?, best.1))
}

/// Exhaustive minimum-distance matching.
pub fn brute_force_min_distance(
    x: &AttributeDatabase,
    y: &AttributeDatabase,
    budget: &OracleBudget,
) -> Result<(Permutation, f64)> {
    check_len(x.n(), y.n())?;
    budget.check_n(x.n())?;
    let c = crate::matching::cost_matrix(x, y)?;
    brute_force_assignment(&c, budget)
}

/// Per-pair MAP cost `‖x_i − y_j‖² − f_ij / ρ`, where `f_ij` is the
/// label-dependent part of the joint log-likelihood of `(x_i, y_j)`.
pub fn map_pair_cost(
    xi: &[f64],
    yj: &[f64],
    s1: i8,
    s2: i8,
    mu: &[f64],
    rho: f64,
) -> f64 {
    let (s1, s2) = (f64::from(s1), f64::from(s2));
    let xm = dot(xi, mu);
    let ym = dot(yj, mu);
    let f = 2.0 * xm * s1 + 2.0 * ym * s2 - 2.0 * rho * xm * s2 - 2.0 * rho * ym * s1
        + 2.0 * rho * dot(mu, mu) * s1 * s2;
    sq_dist(xi, yj) - f / rho
}

/// Exhaustive MAP matching when both label vectors and `μ` are known.
/// `labels2[j]` is the label of row `j` of `y`. Returns the minimiser and its objective.
pub fn brute_force_map_known_labels(
    x: &AttributeDatabase,
    y: &AttributeDatabase,
    labels1: &LabelVector,
    labels2: &LabelVector,
    mu: &[f64],
    rho: f64,
    budget: &OracleBudget,
) -> Result<(Permutation, f64)> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(invalid(format!("MAP objective needs rho in (0, 1], got {rho}")));
    }
    let n = x.n();
    check_len(n, y.n())?;
    check_len(n, labels1.len())?;
    check_len(n, labels2.len())?;
    check_len(x.d(), y.d())?;
    check_len(x.d(), mu.len())?;
    budget.check_n(n)?;
    let mut data = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            data.push(map_pair_cost(x.row(i), y.row(j), labels1.get(i), labels2.get(j), mu, rho));
        }
    }
    // entries may be negative, so shift into the cost-matrix domain
    let lo = data.iter().copied().fold(0.0f64, f64::min);
    let shifted: Vec<f64> = data.iter().map(|v| v - lo).collect();
    let c = CostMatrix::new(n, n, shifted)?;
    let (pi, _) = brute_force_assignment(&c, budget)?;
    let objective = (0..n).map(|i| data[i * n + pi.apply(i)]).sum();
    Ok((pi, objective))
}

/// Exhaustive k-core matching estimator; same contract as
/// [`crate::matching::kcore_match_exact`].
pub fn brute_force_kcore_estimator(
    g1: &SimpleGraph,
    g2: &SimpleGraph,
    k: usize,
    budget: &OracleBudget,
) -> Result<PartialMatching> {
    let n = g1.n();
    budget.check_n(n)?;
    kcore_search(g1, g2, k, budget.max_n, budget.max_states)
}

/// `∫₀¹ ln(1 + (1 − cos 2πx)/(2α)) dx` by adaptive Simpson to absolute error 1e−10.
pub fn numeric_integral_i(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(invalid(format!("alpha must be positive, got {alpha}")));
    }
    let f = |x: f64| (1.0 + (1.0 - (2.0 * PI * x).cos()) / (2.0 * alpha)).ln();
    Ok(adaptive_simpson(&f, 0.0, 1.0, 1e-10, 60))
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let m = (a + b) / 2.0;
        let (lm, rm) = ((a + m) / 2.0, (m + b) / 2.0);
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    // split first so the symmetric integrand cannot fool the initial estimate
    let pieces = 8;
    (0..pieces)
        .map(|k| {
            let lo = a + (b - a) * k as f64 / pieces as f64;
            let hi = a + (b - a) * (k + 1) as f64 / pieces as f64;
            let (fa, fm, fb) = (f(lo), f((lo + hi) / 2.0), f(hi));
            rec(f, lo, hi, fa, fm, fb, simpson(fa, fm, fb, lo, hi), tol / pieces as f64, depth)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::{kcore_match_exact, solve_assignment};
    use crate::theory::fn_I;

    #[test]
    fn min_distance_trivial_cases() {
        let b = OracleBudget::default();
        let one = AttributeDatabase::from_rows(&[vec![1.0]]).unwrap();
        assert_eq!(brute_force_min_distance(&one, &one, &b).unwrap().0, Permutation::identity(1));
        let x = AttributeDatabase::from_rows(&[vec![0.0], vec![1.0], vec![5.0]]).unwrap();
        let (pi, cost) = brute_force_min_distance(&x, &x, &b).unwrap();
        assert_eq!(pi, Permutation::identity(3));
        assert_eq!(cost, 0.0);
    }

    #[test]
    fn refuses_over_budget() {
        let b = OracleBudget::default();
        let x = AttributeDatabase::zeros(9, 1);
        assert!(matches!(brute_force_min_distance(&x, &x, &b), Err(Error::Capacity { .. })));
        let tight = OracleBudget { max_n: 8, max_states: 100 };
        let x = AttributeDatabase::zeros(6, 1);
        assert!(matches!(brute_force_min_distance(&x, &x, &tight), Err(Error::Capacity { .. })));
        let g = SimpleGraph::empty(9);
        assert!(brute_force_kcore_estimator(&g, &g, 1, &b).is_err());
    }

    #[test]
    fn map_rejects_zero_rho() {
        let x = AttributeDatabase::zeros(2, 1);
        let l = LabelVector::new(vec![1, -1]).unwrap();
        let r = brute_force_map_known_labels(&x, &x, &l, &l, &[1.0], 0.0, &OracleBudget::default());
        assert!(r.is_err());
    }

    #[test]
    fn map_with_constant_labels_matches_min_distance_cost() {
        let x = AttributeDatabase::from_rows(&[vec![0.3, 1.0], vec![-1.0, 2.0], vec![0.5, -0.7], vec![2.0, 0.1]]).unwrap();
        let y = AttributeDatabase::from_rows(&[vec![1.9, 0.0], vec![0.2, 1.1], vec![-0.8, 2.2], vec![0.4, -0.5]]).unwrap();
        let l = LabelVector::new(vec![1; 4]).unwrap();
        let b = OracleBudget::default();
        let (pm, _) = brute_force_map_known_labels(&x, &y, &l, &l, &[0.7, -0.2], 0.6, &b).unwrap();
        let (pd, cd) = brute_force_min_distance(&x, &y, &b).unwrap();
        let z = crate::matching::cost_matrix(&x, &y).unwrap();
        assert!((z.cost_of(&pm).unwrap() - cd).abs() < 1e-12);
        assert_eq!(pm, pd);
    }

    #[test]
    fn brute_force_agrees_with_solver() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for t in 0..100 {
            let n = 1 + t % 7;
            let c = CostMatrix::new(n, n, (0..n * n).map(|_| rng.random::<f64>()).collect()).unwrap();
            let (_, bf) = brute_force_assignment(&c, &OracleBudget::default()).unwrap();
            let (_, fast) = solve_assignment(&c).unwrap();
            assert_eq!(bf, fast);
        }
    }

    #[test]
    fn kcore_oracle_shares_exact_search() {
        let g1 = SimpleGraph::from_edges(5, [(0, 1), (1, 2), (0, 2), (2, 3)]).unwrap();
        let g2 = SimpleGraph::from_edges(5, [(1, 4), (4, 3), (1, 3), (0, 2)]).unwrap();
        for k in 0..3 {
            assert_eq!(
                brute_force_kcore_estimator(&g1, &g2, k, &OracleBudget::default()).unwrap(),
                kcore_match_exact(&g1, &g2, k, 8).unwrap()
            );
        }
    }

    #[test]
    fn quadrature_matches_closed_form() {
        for alpha in [0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0, 100.0] {
            let q = numeric_integral_i(alpha).unwrap();
            assert!((q - fn_I(alpha).unwrap()).abs() <= 1e-8, "alpha {alpha}");
        }
        assert!(numeric_integral_i(1e9).unwrap() < 1e-8);
    }
}
