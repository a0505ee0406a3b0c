//! Seeded samplers for correlated Gaussian mixture models (CGMM) and
//! correlated contextual stochastic block models (CCSBM).
//!
//! Attribute model, per node `i` with label `σ_i`:
//!
//! ```text
//! x_i  = μ σ_i + z_i
//! y'_i = μ σ_i + ρ z_i + sqrt(1 - ρ²) w_i        z_i, w_i ~ N(0, I_d)
//! ```
//!
//! The second database is `Y'` with its rows moved by a uniform hidden
//! permutation `π*`: row `π*(i)` of `Y` is `y'_i`. For the CCSBM, a parent
//! SBM graph is subsampled twice with rate `s`, and the second copy is
//! relabelled by the same `π*`.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::graph::SimpleGraph;
use crate::rng::{Purpose, Seed};
use crate::types::{apply_permutation, AttributeDatabase, LabelVector, Permutation};

/// Above this many nodes the parent graph is sampled by geometric skipping
/// instead of visiting every pair.
pub const DENSE_PAIR_LIMIT: usize = 20_000;

/// How the community mean `μ` is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanSpec {
    /// A fixed vector of length `d`.
    Vector(Vec<f64>),
    /// `μ` uniform on the sphere `‖μ‖² = R`.
    RadiusSquared(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CgmmParams {
    pub n: usize,
    pub d: usize,
    pub rho: f64,
    pub mean: MeanSpec,
}

impl CgmmParams {
    pub fn with_radius(n: usize, d: usize, rho: f64, radius_sq: f64) -> Self {
        Self {
            n,
            d,
            rho,
            mean: MeanSpec::RadiusSquared(radius_sq),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("n must be at least 1"));
        }
        if self.d == 0 {
            return Err(invalid("CGMM needs d >= 1"));
        }
        check_unit("rho", self.rho)?;
        match &self.mean {
            MeanSpec::Vector(mu) => {
                if mu.len() != self.d {
                    return Err(invalid(format!(
                        "mean vector has length {}, expected d = {}",
                        mu.len(),
                        self.d
                    )));
                }
                if mu.iter().any(|v| !v.is_finite()) {
                    return Err(invalid("mean vector must be finite"));
                }
            }
            MeanSpec::RadiusSquared(r) => check_radius(*r)?,
        }
        Ok(())
    }

    /// `‖μ‖²`, exact for an explicit mean.
    pub fn radius_sq(&self) -> f64 {
        match &self.mean {
            MeanSpec::Vector(mu) => mu.iter().map(|v| v * v).sum(),
            MeanSpec::RadiusSquared(r) => *r,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcsbmParams {
    pub n: usize,
    pub p: f64,
    pub q: f64,
    pub s: f64,
    /// `‖μ‖²`; the mean is always drawn uniformly from this sphere.
    #[serde(rename = "R")]
    pub r: f64,
    /// Attribute dimension. `d = 0` gives a plain correlated SBM pair.
    pub d: usize,
    pub rho: f64,
    /// Permit `p == q` (Erdős–Rényi parent), which the model normally excludes.
    #[serde(default)]
    pub allow_equal_pq: bool,
}

impl CcsbmParams {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("n must be at least 1"));
        }
        check_unit("p", self.p)?;
        check_unit("q", self.q)?;
        check_unit("s", self.s)?;
        check_unit("rho", self.rho)?;
        if self.allow_equal_pq {
            if self.p < self.q {
                return Err(invalid(format!("need p >= q, got p={} q={}", self.p, self.q)));
            }
        } else if self.p <= self.q {
            return Err(invalid(format!(
                "model requires p > q, got p={} q={}",
                self.p, self.q
            )));
        }
        check_radius(self.r)
    }
}

/// Parameters of either model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum ModelParams {
    Cgmm(CgmmParams),
    Ccsbm(CcsbmParams),
}

impl ModelParams {
    pub fn n(&self) -> usize {
        match self {
            ModelParams::Cgmm(p) => p.n,
            ModelParams::Ccsbm(p) => p.n,
        }
    }

    pub fn d(&self) -> usize {
        match self {
            ModelParams::Cgmm(p) => p.d,
            ModelParams::Ccsbm(p) => p.d,
        }
    }

    pub fn rho(&self) -> f64 {
        match self {
            ModelParams::Cgmm(p) => p.rho,
            ModelParams::Ccsbm(p) => p.rho,
        }
    }

    pub fn radius_sq(&self) -> f64 {
        match self {
            ModelParams::Cgmm(p) => p.radius_sq(),
            ModelParams::Ccsbm(p) => p.r,
        }
    }
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(invalid(format!("{name} must lie in [0, 1], got {v}")));
    }
    Ok(())
}

fn check_radius(r: f64) -> Result<()> {
    if !(r.is_finite() && r > 0.0) {
        return Err(invalid(format!("R must be positive, got {r}")));
    }
    Ok(())
}

/// One sampled problem together with its ground truth.
#[derive(Debug, Clone)]
pub struct CorrelatedInstance {
    pub graph1: Option<SimpleGraph>,
    pub graph2: Option<SimpleGraph>,
    pub db1: AttributeDatabase,
    pub db2: AttributeDatabase,
    /// Node `i` of the first side corresponds to node `truth_perm(i)` of the second.
    pub truth_perm: Permutation,
    pub labels1: LabelVector,
    pub mu: Vec<f64>,
    pub params: ModelParams,
    pub seed: Seed,
}

impl CorrelatedInstance {
    pub fn n(&self) -> usize {
        self.db1.n()
    }

    pub fn has_graphs(&self) -> bool {
        self.graph1.is_some() && self.graph2.is_some()
    }

    /// Labels of the second side, `σ ∘ π*⁻¹`.
    pub fn labels2(&self) -> LabelVector {
        self.labels1
            .permuted(&self.truth_perm)
            .expect("labels and permutation share n")
    }
}

/// I.i.d. uniform ±1 labels.
pub fn sample_labels<R: Rng + ?Sized>(n: usize, rng: &mut R) -> LabelVector {
    let v = (0..n)
        .map(|_| if rng.random::<bool>() { 1 } else { -1 })
        .collect();
    LabelVector::new(v).expect("labels are ±1 by construction")
}

/// `μ` uniform on the sphere `‖μ‖² = radius_sq` in `R^d`.
pub fn sample_mu<R: Rng + ?Sized>(d: usize, radius_sq: f64, rng: &mut R) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(invalid("sample_mu needs d >= 1"));
    }
    check_radius(radius_sq)?;
    loop {
        let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            let r = radius_sq.sqrt();
            return Ok(g.into_iter().map(|v| v / norm * r).collect());
        }
    }
}

/// A uniform permutation by Fisher–Yates.
pub fn sample_permutation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Permutation {
    let mut m: Vec<usize> = (0..n).collect();
    m.shuffle(rng);
    Permutation::new(m).expect("shuffle preserves bijection")
}

/// Draws `X` and the unpermuted `Y'`. Each node's noise comes from its own
/// stream, so rows can be regenerated independently.
pub fn sample_attribute_pair(
    labels: &LabelVector,
    mu: &[f64],
    rho: f64,
    seed: &Seed,
) -> (AttributeDatabase, AttributeDatabase) {
    let n = labels.len();
    let d = mu.len();
    let c = (1.0 - rho * rho).max(0.0).sqrt();
    let mut x = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n * d);
    for i in 0..n {
        let sigma = f64::from(labels.get(i));
        let mut rz = seed.node_rng(Purpose::NoiseZ, i);
        let mut rw = seed.node_rng(Purpose::NoiseW, i);
        for &m in mu {
            let z: f64 = rz.sample(StandardNormal);
            let w: f64 = rw.sample(StandardNormal);
            let mean = m * sigma;
            x.push(mean + z);
            // at rho = 1 the bracket is exactly z, so y'_i == x_i bit for bit
            y.push(mean + (rho * z + c * w));
        }
    }
    (
        AttributeDatabase::from_raw(n, d, x),
        AttributeDatabase::from_raw(n, d, y),
    )
}

pub fn sample_cgmm(params: &CgmmParams, seed: Seed) -> Result<CorrelatedInstance> {
    params.validate()?;
    let labels = sample_labels(params.n, &mut seed.rng(Purpose::Labels));
    let mu = match &params.mean {
        MeanSpec::Vector(v) => v.clone(),
        MeanSpec::RadiusSquared(r) => sample_mu(params.d, *r, &mut seed.rng(Purpose::Mean))?,
    };
    let (db1, y_prime) = sample_attribute_pair(&labels, &mu, params.rho, &seed);
    let truth_perm = sample_permutation(params.n, &mut seed.rng(Purpose::Permutation));
    let db2 = apply_permutation(&y_prime, &truth_perm)?;
    Ok(CorrelatedInstance {
        graph1: None,
        graph2: None,
        db1,
        db2,
        truth_perm,
        labels1: labels,
        mu,
        params: ModelParams::Cgmm(params.clone()),
        seed,
    })
}

pub fn sample_ccsbm(params: &CcsbmParams, seed: Seed) -> Result<CorrelatedInstance> {
    params.validate()?;
    let n = params.n;
    let labels = sample_labels(n, &mut seed.rng(Purpose::Labels));
    let parent = sample_sbm(&labels, params.p, params.q, &mut seed.rng(Purpose::ParentGraph));
    let g1 = subsample(&parent, params.s, &mut seed.rng(Purpose::Subsample1));
    let g2_prime = subsample(&parent, params.s, &mut seed.rng(Purpose::Subsample2));
    let truth_perm = sample_permutation(n, &mut seed.rng(Purpose::Permutation));
    let g2 = SimpleGraph::from_edges(
        n,
        g2_prime
            .edges()
            .map(|(u, v)| (truth_perm.apply(u), truth_perm.apply(v))),
    )?;
    let mu = if params.d == 0 {
        Vec::new()
    } else {
        sample_mu(params.d, params.r, &mut seed.rng(Purpose::Mean))?
    };
    let (db1, y_prime) = sample_attribute_pair(&labels, &mu, params.rho, &seed);
    let db2 = apply_permutation(&y_prime, &truth_perm)?;
    Ok(CorrelatedInstance {
        graph1: Some(g1),
        graph2: Some(g2),
        db1,
        db2,
        truth_perm,
        labels1: labels,
        mu,
        params: ModelParams::Ccsbm(params.clone()),
        seed,
    })
}

pub fn sample(params: &ModelParams, seed: Seed) -> Result<CorrelatedInstance> {
    match params {
        ModelParams::Cgmm(p) => sample_cgmm(p, seed),
        ModelParams::Ccsbm(p) => sample_ccsbm(p, seed),
    }
}

/// Two-community SBM on the given labels: intra-community pairs are edges
/// with probability `p`, inter-community pairs with probability `q`.
pub fn sample_sbm<R: Rng + ?Sized>(labels: &LabelVector, p: f64, q: f64, rng: &mut R) -> SimpleGraph {
    if labels.len() <= DENSE_PAIR_LIMIT {
        sample_sbm_dense(labels, p, q, rng)
    } else {
        sample_sbm_skip(labels, p, q, rng)
    }
}

/// Visits every unordered pair once.
pub fn sample_sbm_dense<R: Rng + ?Sized>(
    labels: &LabelVector,
    p: f64,
    q: f64,
    rng: &mut R,
) -> SimpleGraph {
    let n = labels.len();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let prob = if labels.get(u) == labels.get(v) { p } else { q };
            if rng.random::<f64>() < prob {
                edges.push((u, v));
            }
        }
    }
    SimpleGraph::from_edges(n, edges).expect("pairs are in range")
}

/// Geometric skip sampling per community block; `O(n + |E|)` expected time.
pub fn sample_sbm_skip<R: Rng + ?Sized>(
    labels: &LabelVector,
    p: f64,
    q: f64,
    rng: &mut R,
) -> SimpleGraph {
    let n = labels.len();
    let plus: Vec<usize> = (0..n).filter(|&i| labels.get(i) == 1).collect();
    let minus: Vec<usize> = (0..n).filter(|&i| labels.get(i) == -1).collect();
    let mut edges = Vec::new();
    for block in [&plus, &minus] {
        let m = block.len() as u64;
        let total = m * m.saturating_sub(1) / 2;
        let (mut row, mut row_start) = (0u64, 0u64);
        skip_sample(total, p, rng, |k| {
            while k >= row_start + (m - 1 - row) {
                row_start += m - 1 - row;
                row += 1;
            }
            let col = row + 1 + (k - row_start);
            edges.push((block[row as usize], block[col as usize]));
        });
    }
    let cols = minus.len() as u64;
    skip_sample(plus.len() as u64 * cols, q, rng, |k| {
        edges.push((plus[(k / cols) as usize], minus[(k % cols) as usize]));
    });
    SimpleGraph::from_edges(n, edges).expect("pairs are in range")
}

/// Emits, in increasing order, each index in `0..total` independently with
/// probability `prob`.
fn skip_sample<R: Rng + ?Sized>(total: u64, prob: f64, rng: &mut R, mut emit: impl FnMut(u64)) {
    if total == 0 || prob <= 0.0 {
        return;
    }
    if prob >= 1.0 {
        (0..total).for_each(emit);
        return;
    }
    let log_q = (1.0 - prob).ln();
    let mut k: u64 = 0;
    loop {
        // number of failures before the next success ~ Geometric(prob)
        let u: f64 = 1.0 - rng.random::<f64>();
        let skip = (u.ln() / log_q).floor();
        if !skip.is_finite() || skip >= (total - k) as f64 {
            return;
        }
        k += skip as u64;
        emit(k);
        k += 1;
        if k >= total {
            return;
        }
    }
}

/// Keeps each edge independently with probability `s`.
pub fn subsample<R: Rng + ?Sized>(g: &SimpleGraph, s: f64, rng: &mut R) -> SimpleGraph {
    let kept: Vec<(usize, usize)> = g.edges().filter(|_| rng.random::<f64>() < s).collect();
    SimpleGraph::from_edges(g.n(), kept).expect("edges come from a valid graph")
}
