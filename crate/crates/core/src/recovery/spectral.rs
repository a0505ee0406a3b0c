use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SimpleGraph;
use crate::rng::{Purpose, Seed};
use crate::types::{dot, AttributeDatabase, LabelVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerIterConfig {
    pub max_iters: usize,
    /// Stop once the unit eigenvector estimate moves less than this.
    pub tol: f64,
    /// Start vector seed.
    pub seed: Seed,
}

impl Default for PowerIterConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            tol: 1e-8,
            seed: Seed::new(0, 0),
        }
    }
}

impl PowerIterConfig {
    pub fn with_seed(seed: Seed) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

/// Symmetric operator `v ↦ w_A·(A − δ(J − I))v + w_U·𝓗(UUᵀ)v`, with `δ` the
/// edge density of `A`, applied without forming any `n × n` matrix.
pub(crate) struct CombinedOperator<'a> {
    pub adj: Option<&'a SimpleGraph>,
    pub adj_weight: f64,
    pub db: Option<&'a AttributeDatabase>,
    pub gram_weight: f64,
}

impl CombinedOperator<'_> {
    fn n(&self) -> usize {
        self.adj
            .map(SimpleGraph::n)
            .or(self.db.map(AttributeDatabase::n))
            .unwrap_or(0)
    }

    fn density(g: &SimpleGraph) -> f64 {
        let n = g.n() as f64;
        if g.n() < 2 {
            0.0
        } else {
            2.0 * g.edge_count() as f64 / (n * (n - 1.0))
        }
    }

    /// Upper bound on `-λ_min`.
    fn shift(&self) -> f64 {
        let mut s = 0.0;
        if let Some(g) = self.adj {
            let max_deg = (0..g.n()).map(|v| g.degree(v)).max().unwrap_or(0) as f64;
            s += self.adj_weight.abs() * (max_deg + Self::density(g) * g.n() as f64);
        }
        if let Some(db) = self.db {
            let max_sq = db.rows().map(|r| dot(r, r)).fold(0.0, f64::max);
            s += self.gram_weight.abs() * max_sq;
        }
        s
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        if let Some(g) = self.adj {
            if self.adj_weight != 0.0 {
                let delta = Self::density(g);
                let total: f64 = v.iter().sum();
                for (i, o) in out.iter_mut().enumerate() {
                    let av: f64 = g.neighbors(i).iter().map(|&j| v[j]).sum();
                    *o += self.adj_weight * (av - delta * (total - v[i]));
                }
            }
        }
        if let Some(db) = self.db {
            if self.gram_weight != 0.0 {
                hollow_gram_apply_add(db, v, self.gram_weight, out);
            }
        }
    }
}

/// `out += w · 𝓗(UUᵀ) v`.
pub(crate) fn hollow_gram_apply_add(db: &AttributeDatabase, v: &[f64], w: f64, out: &mut [f64]) {
    let mut t = vec![0.0; db.d()];
    for (row, &vi) in db.rows().zip(v) {
        for (tk, &x) in t.iter_mut().zip(row) {
            *tk += x * vi;
        }
    }
    for ((row, &vi), o) in db.rows().zip(v).zip(out.iter_mut()) {
        *o += w * (dot(row, &t) - dot(row, row) * vi);
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Leading (largest algebraic) eigenvector of the operator; returns the unit
/// vector and the number of iterations used.
pub(crate) fn power_iteration(op: &CombinedOperator, cfg: &PowerIterConfig) -> Result<(Vec<f64>, usize)> {
    let n = op.n();
    let shift = op.shift();
    let mut rng = cfg.seed.rng(Purpose::PowerStart);
    let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut w = vec![0.0; n];
    for it in 1..=cfg.max_iters {
        op.apply(&v, &mut w);
        for (wi, vi) in w.iter_mut().zip(&v) {
            *wi += shift * vi;
        }
        let nw = norm(&w);
        if !(nw > 0.0 && nw.is_finite()) {
            return Err(Error::Degenerate("operator annihilates the iterate".into()));
        }
        w.iter_mut().for_each(|x| *x /= nw);
        let change = v
            .iter()
            .zip(&w)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        std::mem::swap(&mut v, &mut w);
        if change < cfg.tol {
            return Ok((v, it));
        }
    }
    Ok((v, cfg.max_iters))
}

pub(crate) fn sign_labels(v: &[f64]) -> LabelVector {
    LabelVector::new(v.iter().map(|&x| if x < 0.0 { -1 } else { 1 }).collect())
        .expect("signs are ±1")
}

/// True when every row equals the first one.
pub(crate) fn rows_all_equal(db: &AttributeDatabase) -> bool {
    let first = db.row(0);
    db.rows().all(|r| r == first)
}
