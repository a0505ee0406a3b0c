//! Community recovery on a single database/graph or on a matched and merged
//! pair.

mod spectral;

pub use spectral::PowerIterConfig;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Error, Result};
use crate::graph::{graph_union, SimpleGraph};
use crate::matching::{min_distance_match, select_k, two_step_match, KcoreMode, MatchResult};
use crate::models::{CorrelatedInstance, ModelParams};
use crate::types::{dot, label_overlap_up_to_sign, AttributeDatabase, LabelVector, Permutation};
use spectral::{hollow_gram_apply_add, power_iteration, rows_all_equal, sign_labels, CombinedOperator};

pub const DEFAULT_LLOYD_ITERS: usize = 50;
pub const DEFAULT_SWEEPS: usize = 30;

/// The pair merged along a correspondence `π`.
#[derive(Debug, Clone, PartialEq)]
pub struct MergedInstance {
    /// Rows `(x_i + y_{π(i)}) / 2`.
    pub avg_db: AttributeDatabase,
    /// `G1 ∨_π G2`, when the instance has graphs.
    pub union_graph: Option<SimpleGraph>,
    pub source_perm: Permutation,
}

pub fn merge(inst: &CorrelatedInstance, pi: &Permutation) -> Result<MergedInstance> {
    let n = inst.n();
    check_len(n, pi.len())?;
    check_len(n, inst.db2.n())?;
    let d = inst.db1.d();
    let mut data = Vec::with_capacity(n * d);
    for i in 0..n {
        let y = inst.db2.row(pi.apply(i));
        data.extend(inst.db1.row(i).iter().zip(y).map(|(a, b)| (a + b) / 2.0));
    }
    let union_graph = match (&inst.graph1, &inst.graph2) {
        (Some(a), Some(b)) => Some(graph_union(a, b, pi)?),
        _ => None,
    };
    Ok(MergedInstance {
        avg_db: AttributeDatabase::new(n, d, data)?,
        union_graph,
        source_perm: pi.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecoveryMethod {
    /// Spectral start and Lloyd iterations on attributes.
    Gmm,
    /// Spectral start on graph plus attributes, then score sweeps.
    Csbm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub labels_hat: LabelVector,
    /// Agreement with the truth up to a global sign, when truth is known.
    pub agreement: Option<f64>,
    pub exact: Option<bool>,
    pub method: RecoveryMethod,
    /// Refinement iterations performed.
    pub iterations: usize,
    pub power_iterations: usize,
}

impl RecoveryReport {
    fn build(
        labels_hat: LabelVector,
        truth: Option<&LabelVector>,
        method: RecoveryMethod,
        iterations: usize,
        power_iterations: usize,
    ) -> Result<Self> {
        let agreement = truth
            .map(|t| label_overlap_up_to_sign(&labels_hat, t))
            .transpose()?;
        Ok(Self {
            labels_hat,
            agreement,
            exact: agreement.map(|a| a == 1.0),
            method,
            iterations,
            power_iterations,
        })
    }
}

fn spectral_gmm_init_counted(db: &AttributeDatabase, cfg: &PowerIterConfig) -> Result<(LabelVector, usize)> {
    if db.n() < 2 {
        return Err(invalid("spectral initialisation needs n >= 2"));
    }
    if db.d() == 0 || rows_all_equal(db) {
        return Err(Error::Degenerate("all attribute rows are identical".into()));
    }
    let op = CombinedOperator {
        adj: None,
        adj_weight: 0.0,
        db: Some(db),
        gram_weight: 1.0,
    };
    let (v, iters) = power_iteration(&op, cfg)?;
    Ok((sign_labels(&v), iters))
}

/// Signs of the leading eigenvector of the hollowed Gram matrix of `db`.
pub fn spectral_gmm_init(db: &AttributeDatabase, cfg: &PowerIterConfig) -> Result<LabelVector> {
    Ok(spectral_gmm_init_counted(db, cfg)?.0)
}

/// `μ̂ = (1/n) Σ σ_i x_i`.
pub fn label_weighted_mean(db: &AttributeDatabase, labels: &LabelVector) -> Result<Vec<f64>> {
    check_len(db.n(), labels.len())?;
    let mut m = vec![0.0; db.d()];
    for (row, &s) in db.rows().zip(labels.as_slice()) {
        let s = f64::from(s);
        for (mk, &x) in m.iter_mut().zip(row) {
            *mk += s * x;
        }
    }
    let n = db.n().max(1) as f64;
    m.iter_mut().for_each(|v| *v /= n);
    Ok(m)
}

/// `Σ_i σ_i ⟨x_i, μ̂⟩` with `μ̂` the label-weighted mean.
pub fn lloyd_objective(db: &AttributeDatabase, labels: &LabelVector) -> Result<f64> {
    let m = label_weighted_mean(db, labels)?;
    Ok(db
        .rows()
        .zip(labels.as_slice())
        .map(|(r, &s)| f64::from(s) * dot(r, &m))
        .sum())
}

/// Alternates `μ̂ = (1/n) Σ σ_i x_i` and `σ_i = sign⟨x_i, μ̂⟩` (a zero inner
/// product keeps the old label). Returns the labels and the iterations used.
pub fn lloyd_refine(
    db: &AttributeDatabase,
    labels0: &LabelVector,
    max_iters: usize,
) -> Result<(LabelVector, usize)> {
    check_len(db.n(), labels0.len())?;
    let mut cur = labels0.as_slice().to_vec();
    for it in 1..=max_iters {
        let m = label_weighted_mean(db, &LabelVector::new(cur.clone())?)?;
        let next: Vec<i8> = db
            .rows()
            .zip(&cur)
            .map(|(r, &old)| {
                let p = dot(r, &m);
                if p > 0.0 {
                    1
                } else if p < 0.0 {
                    -1
                } else {
                    old
                }
            })
            .collect();
        if next == cur {
            return Ok((LabelVector::new(cur)?, it));
        }
        cur = next;
    }
    Ok((LabelVector::new(cur)?, max_iters))
}

/// Spectral initialisation followed by Lloyd refinement.
pub fn recover_gmm(
    db: &AttributeDatabase,
    truth: Option<&LabelVector>,
    cfg: &PowerIterConfig,
) -> Result<RecoveryReport> {
    let (init, power) = spectral_gmm_init_counted(db, cfg)?;
    let (labels, iters) = lloyd_refine(db, &init, DEFAULT_LLOYD_ITERS)?;
    RecoveryReport::build(labels, truth, RecoveryMethod::Gmm, iters, power)
}

/// Weights of the graph and attribute terms in the node score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreWeights {
    /// `log(a'/b')`.
    pub log_ratio: f64,
    /// `2 / (n + d/R')` with `R'` the squared norm of the attribute mean.
    pub attr_coef: f64,
}

impl ScoreWeights {
    /// Needs `a' > b' > 0`; `r_prime` is `‖μ'‖²` and must be positive when `d > 0`.
    pub fn new(a_prime: f64, b_prime: f64, r_prime: f64, d: usize, n: usize) -> Result<Self> {
        if !(b_prime > 0.0) || !b_prime.is_finite() {
            return Err(invalid(format!("b' must be positive, got {b_prime}")));
        }
        if !(a_prime > b_prime) || !a_prime.is_finite() {
            return Err(invalid(format!("need a' > b', got a'={a_prime} b'={b_prime}")));
        }
        Ok(Self {
            log_ratio: (a_prime / b_prime).ln(),
            attr_coef: attr_coef(r_prime, d, n)?,
        })
    }

    /// Weights for attributes only.
    pub fn attributes_only(r_prime: f64, d: usize, n: usize) -> Result<Self> {
        Ok(Self {
            log_ratio: 0.0,
            attr_coef: attr_coef(r_prime, d, n)?,
        })
    }
}

fn attr_coef(r_prime: f64, d: usize, n: usize) -> Result<f64> {
    if d == 0 {
        return Ok(0.0);
    }
    if !(r_prime > 0.0 && r_prime.is_finite()) {
        return Err(invalid(format!("R' must be positive, got {r_prime}")));
    }
    Ok(2.0 / (n as f64 + d as f64 / r_prime))
}

/// `W_i = σ_i [log(a'/b') (Aσ)_i + coef (𝓗(UUᵀ)σ)_i]`.
pub fn genie_score(
    adj: Option<&SimpleGraph>,
    db: &AttributeDatabase,
    labels: &LabelVector,
    w: &ScoreWeights,
) -> Result<Vec<f64>> {
    let h = local_field(adj, db, labels, w)?;
    Ok(h.iter()
        .zip(labels.as_slice())
        .map(|(&h, &s)| h * f64::from(s))
        .collect())
}

/// `h = log(a'/b') Aσ + coef 𝓗(UUᵀ)σ`.
fn local_field(
    adj: Option<&SimpleGraph>,
    db: &AttributeDatabase,
    labels: &LabelVector,
    w: &ScoreWeights,
) -> Result<Vec<f64>> {
    let n = db.n();
    check_len(n, labels.len())?;
    let sigma = labels.to_f64();
    let mut h = vec![0.0; n];
    if let Some(g) = adj {
        check_len(n, g.n())?;
        if w.log_ratio != 0.0 {
            for (i, hi) in h.iter_mut().enumerate() {
                let s: f64 = g.neighbors(i).iter().map(|&j| sigma[j]).sum();
                *hi += w.log_ratio * s;
            }
        }
    }
    if w.attr_coef != 0.0 && db.d() > 0 {
        hollow_gram_apply_add(db, &sigma, w.attr_coef, &mut h);
    }
    Ok(h)
}

/// Synchronous sweeps `σ_i ← sign(h_i)`, keeping the label on a zero field.
fn score_sweeps(
    adj: Option<&SimpleGraph>,
    db: &AttributeDatabase,
    init: LabelVector,
    w: &ScoreWeights,
    max_sweeps: usize,
) -> Result<(LabelVector, usize)> {
    let mut cur = init;
    for it in 1..=max_sweeps {
        let h = local_field(adj, db, &cur, w)?;
        let next: Vec<i8> = h
            .iter()
            .zip(cur.as_slice())
            .map(|(&h, &old)| {
                if h > 0.0 {
                    1
                } else if h < 0.0 {
                    -1
                } else {
                    old
                }
            })
            .collect();
        if next == cur.as_slice() {
            return Ok((cur, it));
        }
        cur = LabelVector::new(next)?;
    }
    Ok((cur, max_sweeps))
}

/// Spectral start on `log(a'/b')·(A − δ(J − I)) + coef·𝓗(UUᵀ)` (δ the edge
/// density), then score sweeps.
pub fn recover_csbm(
    adj: Option<&SimpleGraph>,
    db: &AttributeDatabase,
    w: &ScoreWeights,
    truth: Option<&LabelVector>,
    cfg: &PowerIterConfig,
) -> Result<RecoveryReport> {
    let n = db.n();
    if n < 2 {
        return Err(invalid("recovery needs n >= 2"));
    }
    if let Some(g) = adj {
        check_len(n, g.n())?;
    }
    let graph_useful = adj.is_some_and(|g| g.edge_count() > 0) && w.log_ratio != 0.0;
    let attrs_useful = db.d() > 0 && w.attr_coef != 0.0 && !rows_all_equal(db);
    if !graph_useful && !attrs_useful {
        return Err(Error::Degenerate("neither edges nor attributes carry signal".into()));
    }
    let op = CombinedOperator {
        adj: adj.filter(|_| graph_useful),
        adj_weight: w.log_ratio,
        db: Some(db).filter(|_| attrs_useful),
        gram_weight: w.attr_coef,
    };
    let (v, power) = power_iteration(&op, cfg)?;
    let (labels, sweeps) = score_sweeps(adj, db, sign_labels(&v), w, DEFAULT_SWEEPS)?;
    RecoveryReport::build(labels, truth, RecoveryMethod::Csbm, sweeps, power)
}

/// Weights estimated from a provisional labelling: block edge densities
/// and a bias-corrected `‖μ̂‖²`.
pub fn estimate_weights(
    adj: Option<&SimpleGraph>,
    db: &AttributeDatabase,
    labels: &LabelVector,
) -> Result<ScoreWeights> {
    let n = db.n();
    check_len(n, labels.len())?;
    let mut log_ratio = 0.0;
    if let Some(g) = adj {
        check_len(n, g.n())?;
        let plus = labels.count_positive();
        let minus = n - plus;
        let intra_pairs = (plus * plus.saturating_sub(1) / 2 + minus * minus.saturating_sub(1) / 2) as f64;
        let inter_pairs = (plus * minus) as f64;
        let (mut intra, mut inter) = (0.0, 0.0);
        for (u, v) in g.edges() {
            if labels.get(u) == labels.get(v) {
                intra += 1.0;
            } else {
                inter += 1.0;
            }
        }
        if intra_pairs > 0.0 && inter_pairs > 0.0 {
            let floor = 1.0 / (n as f64 * n as f64);
            let p = (intra / intra_pairs).max(floor);
            let q = (inter / inter_pairs).max(floor);
            if p > q {
                log_ratio = (p / q).ln();
            }
        }
    }
    let attr = if db.d() > 0 {
        let m = label_weighted_mean(db, labels)?;
        let r = (dot(&m, &m) - db.d() as f64 / n as f64).max(1e-12);
        attr_coef(r, db.d(), n)?
    } else {
        0.0
    };
    Ok(ScoreWeights {
        log_ratio,
        attr_coef: attr,
    })
}

/// [`recover_csbm`] with weights estimated from a provisional labelling
/// (attribute-only spectral start when possible, else graph-only).
pub fn recover_csbm_plugin(
    adj: Option<&SimpleGraph>,
    db: &AttributeDatabase,
    truth: Option<&LabelVector>,
    cfg: &PowerIterConfig,
) -> Result<RecoveryReport> {
    let provisional = if db.d() > 0 && db.n() >= 2 && !rows_all_equal(db) {
        spectral_gmm_init(db, cfg)?
    } else {
        let w = ScoreWeights {
            log_ratio: 1.0,
            attr_coef: 0.0,
        };
        recover_csbm(adj, db, &w, None, cfg)?.labels_hat
    };
    let w = estimate_weights(adj, db, &provisional)?;
    recover_csbm(adj, db, &w, truth, cfg)
}

/// Correspondence used before merging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairMatch {
    /// The ground-truth permutation.
    Truth,
    MinDistance,
    TwoStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamSource {
    Truth,
    PlugIn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub use_pair: bool,
    pub match_method: PairMatch,
    pub kcore_mode: KcoreMode,
    /// k for two-step matching; chosen by [`select_k`] when absent.
    pub k: Option<usize>,
    pub params: ParamSource,
    /// Power iteration settings; seeded from the instance when absent.
    pub power: Option<PowerIterConfig>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            use_pair: true,
            match_method: PairMatch::TwoStep,
            kcore_mode: KcoreMode::Oracle,
            k: None,
            params: ParamSource::Truth,
            power: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub matching: Option<MatchResult>,
    /// Whether the correspondence used equals the truth.
    pub matched_exactly: Option<bool>,
    pub recovery: RecoveryReport,
}

fn ccsbm_weights(
    inst: &CorrelatedInstance,
    pair: bool,
    n: usize,
) -> Result<ScoreWeights> {
    let ModelParams::Ccsbm(p) = &inst.params else {
        return Err(invalid("graph weights need CCSBM parameters"));
    };
    let keep = if pair { 1.0 - (1.0 - p.s) * (1.0 - p.s) } else { p.s };
    let r = inst.mu.iter().map(|v| v * v).sum::<f64>();
    let r_prime = if pair { 2.0 * r / (1.0 + p.rho) } else { r };
    if p.p == p.q || p.s == 0.0 {
        return ScoreWeights::attributes_only(r_prime, p.d, n);
    }
    ScoreWeights::new(p.p * keep, p.q * keep, r_prime, p.d, n)
}

/// Merges the pair along `pi` and recovers communities on the merged instance.
pub fn recover_with_permutation(
    inst: &CorrelatedInstance,
    pi: &Permutation,
    params: ParamSource,
    cfg: &PowerIterConfig,
) -> Result<RecoveryReport> {
    let merged = merge(inst, pi)?;
    let truth = Some(&inst.labels1);
    if let ModelParams::Ccsbm(_) = inst.params {
        let rho = inst.params.rho();
        let u = merged.avg_db.scaled((2.0 / (1.0 + rho)).sqrt());
        let g = merged.union_graph.as_ref();
        match params {
            ParamSource::Truth => recover_csbm(g, &u, &ccsbm_weights(inst, true, inst.n())?, truth, cfg),
            ParamSource::PlugIn => recover_csbm_plugin(g, &u, truth, cfg),
        }
    } else {
        recover_gmm(&merged.avg_db, truth, cfg)
    }
}

/// Match (optionally), merge, and recover communities.
pub fn recover_pipeline(inst: &CorrelatedInstance, opts: &PipelineOptions) -> Result<PipelineReport> {
    let cfg = opts.power.unwrap_or(PowerIterConfig::with_seed(inst.seed));
    let truth = Some(&inst.labels1);
    let is_ccsbm = matches!(inst.params, ModelParams::Ccsbm(_));
    let n = inst.n();
    if !opts.use_pair {
        let recovery = if is_ccsbm {
            let g = inst.graph1.as_ref();
            match opts.params {
                ParamSource::Truth => recover_csbm(g, &inst.db1, &ccsbm_weights(inst, false, n)?, truth, &cfg)?,
                ParamSource::PlugIn => recover_csbm_plugin(g, &inst.db1, truth, &cfg)?,
            }
        } else {
            recover_gmm(&inst.db1, truth, &cfg)?
        };
        return Ok(PipelineReport {
            matching: None,
            matched_exactly: None,
            recovery,
        });
    }

    let matching = match opts.match_method {
        PairMatch::Truth => None,
        PairMatch::MinDistance => Some(min_distance_match(&inst.db1, &inst.db2)?),
        PairMatch::TwoStep => {
            let ModelParams::Ccsbm(p) = &inst.params else {
                return Err(invalid("two-step matching needs a CCSBM instance"));
            };
            let k = match opts.k {
                Some(k) => k,
                None => select_k(n, p.p, p.s)?,
            };
            Some(two_step_match(inst, k, opts.kcore_mode)?)
        }
    };
    let pi = match &matching {
        None => inst.truth_perm.clone(),
        Some(m) => m.matching.to_permutation()?,
    };
    let matched_exactly = Some(pi == inst.truth_perm);
    let recovery = recover_with_permutation(inst, &pi, opts.params, &cfg)?;
    Ok(PipelineReport {
        matching,
        matched_exactly,
        recovery,
    })
}
