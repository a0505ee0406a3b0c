//! Seeded Monte Carlo sweeps over model parameter grids.
//!
//! A sweep is the Cartesian product of the per-parameter value lists in an
//! [`ExperimentConfig`]; each product point is a cell and each cell runs
//! `trials` independent trials. Trial `t` of cell `c` draws all of its
//! randomness from `Seed { master: master_seed, stream: hash(c, t) }`, so the
//! records do not depend on scheduling.

mod output;

pub use output::{
    emit_csv, emit_phase_svg, emit_summary_json, emit_timings_csv, render_sweep_svg, write_sweep,
    CSV_COLUMNS,
};

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matching::{kcore_match, min_distance_match, select_k, two_step_match, KcoreMode, MatchResult};
use crate::models::{sample, CcsbmParams, CgmmParams, CorrelatedInstance, MeanSpec, ModelParams};
use crate::oracle::{brute_force_min_distance, OracleBudget};
use crate::recovery::{
    recover_pipeline, recover_with_permutation, ParamSource, PairMatch, PipelineOptions,
    PowerIterConfig, RecoveryReport,
};
use crate::rng::{hash_words, Seed};
use crate::theory::{
    classify_matching_ccsbm, classify_matching_cgmm, classify_recovery_ccsbm, classify_recovery_cgmm,
    MatchingLabel, ProxyFlags, RecoveryLabel, RegionLabel, ThresholdOptions,
};
use crate::types::{overlap, Permutation};

/// Normal quantile for a two-sided 95% interval.
pub const WILSON_Z: f64 = 1.959964;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Cgmm,
    Ccsbm,
}

/// Value lists per parameter. `a`/`b` are alternatives to `p`/`q` in units of
/// `ln n / n`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamGrid {
    pub n: Vec<usize>,
    pub d: Vec<usize>,
    pub rho: Vec<f64>,
    #[serde(rename = "R")]
    pub r: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub p: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub q: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub a: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub b: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub s: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMatch {
    MinDistance,
    TwoStep,
    /// Step 1 only; the record reports the partial matching.
    Kcore,
}

impl SweepMatch {
    fn as_pair_match(self) -> Option<PairMatch> {
        match self {
            SweepMatch::MinDistance => Some(PairMatch::MinDistance),
            SweepMatch::TwoStep => Some(PairMatch::TwoStep),
            SweepMatch::Kcore => None,
        }
    }
}

/// What each trial runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Methods {
    #[serde(default)]
    pub matching: Option<SweepMatch>,
    #[serde(default = "default_kcore_mode")]
    pub kcore_mode: KcoreMode,
    /// Fixed k; chosen per cell by `select_k` when absent.
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub recover_single: bool,
    #[serde(default)]
    pub recover_pair: bool,
    /// Correspondence used to merge for pair recovery.
    #[serde(default = "default_pair_match")]
    pub pair_match: PairMatch,
    #[serde(default = "default_params")]
    pub params: ParamSource,
}

fn default_kcore_mode() -> KcoreMode {
    KcoreMode::Oracle
}

fn default_pair_match() -> PairMatch {
    PairMatch::Truth
}

fn default_params() -> ParamSource {
    ParamSource::Truth
}

impl Default for Methods {
    fn default() -> Self {
        Self {
            matching: Some(SweepMatch::MinDistance),
            kcore_mode: default_kcore_mode(),
            k: None,
            recover_single: false,
            recover_pair: false,
            pair_match: default_pair_match(),
            params: default_params(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub grid: ParamGrid,
    pub trials: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub methods: Methods,
    #[serde(default)]
    pub thresholds: ThresholdOptions,
    /// Cross-check minimum-distance costs against brute force when `n ≤ 8`.
    #[serde(default)]
    pub oracle: bool,
    #[serde(default)]
    pub allow_equal_pq: bool,
    /// Output directory used when none is given on the command line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

/// One point of the parameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub id: usize,
    pub params: ModelParams,
}

impl Cell {
    /// Theory labels and proxy flags for this cell.
    pub fn theory(&self, opts: &ThresholdOptions) -> Result<(RegionLabel, ProxyFlags)> {
        match &self.params {
            ModelParams::Cgmm(c) => {
                let r = c.radius_sq();
                let region = classify_recovery_cgmm(c.n, c.d, c.rho, r, opts)?;
                let flags = classify_matching_cgmm(c.n, c.d, c.rho, r, opts)?.flags;
                Ok((region, flags))
            }
            ModelParams::Ccsbm(c) => {
                let region = classify_recovery_ccsbm(c.n, c.p, c.q, c.s, c.r, c.d, c.rho, opts)?;
                let flags = classify_matching_ccsbm(c.n, c.p, c.q, c.s, c.r, c.d, c.rho, opts)?.flags;
                Ok((region, flags))
            }
        }
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        let v = match (&self.params, name) {
            (p, "n") => p.n() as f64,
            (p, "d") => p.d() as f64,
            (p, "rho") => p.rho(),
            (p, "R") => p.radius_sq(),
            (ModelParams::Ccsbm(c), "p") => c.p,
            (ModelParams::Ccsbm(c), "q") => c.q,
            (ModelParams::Ccsbm(c), "s") => c.s,
            (ModelParams::Ccsbm(c), "a") => c.p * c.n as f64 / (c.n as f64).ln(),
            (ModelParams::Ccsbm(c), "b") => c.q * c.n as f64 / (c.n as f64).ln(),
            _ => return None,
        };
        Some(v)
    }
}

fn nonempty<T>(name: &str, v: &[T]) -> Result<()> {
    if v.is_empty() {
        Err(invalid(format!("grid list `{name}` is empty")))
    } else {
        Ok(())
    }
}

fn rate_list(n: usize, direct: &[f64], scaled: &[f64], name: &str, alt: &str) -> Result<Vec<f64>> {
    match (direct.is_empty(), scaled.is_empty()) {
        (false, true) => Ok(direct.to_vec()),
        (true, false) => {
            let unit = (n as f64).ln() / n as f64;
            Ok(scaled.iter().map(|v| v * unit).collect())
        }
        (true, true) => Err(invalid(format!("grid needs `{name}` or `{alt}`"))),
        (false, false) => Err(invalid(format!("grid gives both `{name}` and `{alt}`"))),
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(invalid("trials must be at least 1"));
        }
        let m = &self.methods;
        if m.matching.is_none() && !m.recover_single && !m.recover_pair {
            return Err(invalid("no method selected"));
        }
        if self.model == ModelKind::Cgmm
            && (matches!(m.matching, Some(SweepMatch::TwoStep | SweepMatch::Kcore))
                || (m.recover_pair && m.pair_match == PairMatch::TwoStep))
        {
            return Err(invalid("k-core matching needs the ccsbm model"));
        }
        self.cells().map(|_| ())
    }

    /// Names of the grid parameters with more than one value, in grid order.
    pub fn varying_params(&self) -> Vec<&'static str> {
        let g = &self.grid;
        let lens = [
            ("n", g.n.len()),
            ("d", g.d.len()),
            ("rho", g.rho.len()),
            ("R", g.r.len()),
            ("p", g.p.len()),
            ("a", g.a.len()),
            ("q", g.q.len()),
            ("b", g.b.len()),
            ("s", g.s.len()),
        ];
        lens.iter().filter(|(_, l)| *l > 1).map(|(k, _)| *k).collect()
    }

    /// Grid cells in row-major order over `n, d, rho, R, p, q, s`.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        let g = &self.grid;
        nonempty("n", &g.n)?;
        nonempty("d", &g.d)?;
        nonempty("rho", &g.rho)?;
        nonempty("R", &g.r)?;
        let mut cells = Vec::new();
        let mut push = |params: ModelParams| -> Result<()> {
            match &params {
                ModelParams::Cgmm(c) => c.validate()?,
                ModelParams::Ccsbm(c) => c.validate()?,
            }
            cells.push(Cell {
                id: cells.len(),
                params,
            });
            Ok(())
        };
        match self.model {
            ModelKind::Cgmm => {
                if [&g.p, &g.q, &g.a, &g.b, &g.s].iter().any(|v| !v.is_empty()) {
                    return Err(invalid("graph parameters given for the cgmm model"));
                }
                for &n in &g.n {
                    for &d in &g.d {
                        for &rho in &g.rho {
                            for &r in &g.r {
                                push(ModelParams::Cgmm(CgmmParams {
                                    n,
                                    d,
                                    rho,
                                    mean: MeanSpec::RadiusSquared(r),
                                }))?;
                            }
                        }
                    }
                }
            }
            ModelKind::Ccsbm => {
                nonempty("s", &g.s)?;
                for &n in &g.n {
                    let ps = rate_list(n, &g.p, &g.a, "p", "a")?;
                    let qs = rate_list(n, &g.q, &g.b, "q", "b")?;
                    for &d in &g.d {
                        for &rho in &g.rho {
                            for &r in &g.r {
                                for &p in &ps {
                                    for &q in &qs {
                                        for &s in &g.s {
                                            push(ModelParams::Ccsbm(CcsbmParams {
                                                n,
                                                p,
                                                q,
                                                s,
                                                r,
                                                d,
                                                rho,
                                                allow_equal_pq: self.allow_equal_pq,
                                            }))?;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(cells)
    }

    /// Seed of trial `trial` in cell `cell`.
    pub fn trial_seed(&self, cell: usize, trial: usize) -> Seed {
        Seed::new(self.master_seed, hash_words(&[cell as u64, trial as u64]))
    }
}

/// One row of `trials.csv`. Optional fields are empty when the stage did not run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub cell: usize,
    pub trial: usize,
    pub master_seed: u64,
    pub stream: u64,
    pub n: usize,
    pub d: usize,
    pub rho: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub s: Option<f64>,
    pub failed: bool,
    pub error: Option<String>,
    pub k: Option<usize>,
    pub matched_exactly: Option<bool>,
    pub match_overlap: Option<f64>,
    /// `|F|`, nodes outside the step-1 k-core matching.
    pub kcore_unmatched: Option<usize>,
    pub oracle_agrees: Option<bool>,
    pub single_agreement: Option<f64>,
    pub single_exact: Option<bool>,
    pub pair_agreement: Option<f64>,
    pub pair_exact: Option<bool>,
    pub theory_matching: MatchingLabel,
    pub theory_single: RecoveryLabel,
    pub theory_pair: RecoveryLabel,
    pub p_small: bool,
    pub mean_large: bool,
    pub dim_large: bool,
}

impl TrialRecord {
    fn blank(cfg: &ExperimentConfig, cell: &Cell, trial: usize) -> Result<Self> {
        let seed = cfg.trial_seed(cell.id, trial);
        let (region, flags) = cell.theory(&cfg.thresholds)?;
        let (p, q, s) = match &cell.params {
            ModelParams::Ccsbm(c) => (Some(c.p), Some(c.q), Some(c.s)),
            ModelParams::Cgmm(_) => (None, None, None),
        };
        Ok(Self {
            cell: cell.id,
            trial,
            master_seed: seed.master,
            stream: seed.stream,
            n: cell.params.n(),
            d: cell.params.d(),
            rho: cell.params.rho(),
            r: cell.params.radius_sq(),
            p,
            q,
            s,
            failed: false,
            error: None,
            k: None,
            matched_exactly: None,
            match_overlap: None,
            kcore_unmatched: None,
            oracle_agrees: None,
            single_agreement: None,
            single_exact: None,
            pair_agreement: None,
            pair_exact: None,
            theory_matching: region.matching,
            theory_single: region.recovery_single,
            theory_pair: region.recovery_pair,
            p_small: flags.p_small,
            mean_large: flags.mean_large,
            dim_large: flags.dim_large,
        })
    }

    fn fail(&mut self, msg: String) {
        self.failed = true;
        self.error = Some(msg);
    }

    pub fn region(&self) -> RegionLabel {
        RegionLabel {
            matching: self.theory_matching,
            recovery_single: self.theory_single,
            recovery_pair: self.theory_pair,
        }
    }
}

/// Wall time of one trial, kept apart from the records so they stay
/// byte-reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialTiming {
    pub cell: usize,
    pub trial: usize,
    pub wall_ms: f64,
}

fn cell_k(cfg: &ExperimentConfig, params: &ModelParams) -> Result<usize> {
    match (cfg.methods.k, params) {
        (Some(k), _) => Ok(k),
        (None, ModelParams::Ccsbm(c)) => select_k(c.n, c.p, c.s),
        (None, ModelParams::Cgmm(_)) => Err(invalid("k-core matching needs the ccsbm model")),
    }
}

fn partial_overlap(m: &MatchResult, truth: &Permutation) -> f64 {
    let n = truth.len();
    if n == 0 {
        return 1.0;
    }
    let hits = m.matching.pairs().iter().filter(|&&(i, j)| truth.apply(i) == j).count();
    hits as f64 / n as f64
}

fn record_recovery(rep: &RecoveryReport) -> (Option<f64>, Option<bool>) {
    (rep.agreement, rep.exact)
}

fn run_stages(cfg: &ExperimentConfig, cell: &Cell, rec: &mut TrialRecord) -> Result<()> {
    let seed = Seed::new(rec.master_seed, rec.stream);
    let inst: CorrelatedInstance = sample(&cell.params, seed)?;
    let m = &cfg.methods;
    let needs_k = matches!(m.matching, Some(SweepMatch::TwoStep | SweepMatch::Kcore))
        || (m.recover_pair && m.pair_match == PairMatch::TwoStep);
    let k = if needs_k { Some(cell_k(cfg, &cell.params)?) } else { None };
    rec.k = k;

    let mut found: Option<(SweepMatch, Permutation)> = None;
    if let Some(method) = m.matching {
        let res = match method {
            SweepMatch::MinDistance => min_distance_match(&inst.db1, &inst.db2)?,
            SweepMatch::TwoStep => two_step_match(&inst, k.unwrap_or(1), m.kcore_mode)?,
            SweepMatch::Kcore => kcore_match(&inst, k.unwrap_or(1), m.kcore_mode)?,
        };
        let ov = match res.permutation() {
            Some(pi) => overlap(pi.as_slice(), inst.truth_perm.as_slice())?,
            None => partial_overlap(&res, &inst.truth_perm),
        };
        rec.match_overlap = Some(ov);
        rec.matched_exactly = Some(res.is_exact(&inst.truth_perm));
        rec.kcore_unmatched = res.unmatched_after_kcore();
        if let Some(pi) = res.permutation() {
            found = Some((method, pi));
        }
    }

    if cfg.oracle && inst.n() <= OracleBudget::default().max_n && inst.db1.d() > 0 {
        let (_, best) = brute_force_min_distance(&inst.db1, &inst.db2, &OracleBudget::default())?;
        let got = min_distance_match(&inst.db1, &inst.db2)?
            .total_cost
            .ok_or_else(|| Error::Internal("min-distance result without cost".into()))?;
        rec.oracle_agrees = Some((got - best).abs() <= 1e-12 * best.abs().max(1.0));
    }

    let power = PowerIterConfig::with_seed(seed);
    if m.recover_single {
        let opts = PipelineOptions {
            use_pair: false,
            match_method: PairMatch::Truth,
            kcore_mode: m.kcore_mode,
            k,
            params: m.params,
            power: Some(power),
        };
        let (a, e) = record_recovery(&recover_pipeline(&inst, &opts)?.recovery);
        rec.single_agreement = a;
        rec.single_exact = e;
    }
    if m.recover_pair {
        let reuse = found
            .as_ref()
            .filter(|(method, _)| method.as_pair_match() == Some(m.pair_match))
            .map(|(_, pi)| pi);
        let rep = match reuse {
            Some(pi) => recover_with_permutation(&inst, pi, m.params, &power)?,
            None => {
                let opts = PipelineOptions {
                    use_pair: true,
                    match_method: m.pair_match,
                    kcore_mode: m.kcore_mode,
                    k,
                    params: m.params,
                    power: Some(power),
                };
                recover_pipeline(&inst, &opts)?.recovery
            }
        };
        let (a, e) = record_recovery(&rep);
        rec.pair_agreement = a;
        rec.pair_exact = e;
    }
    Ok(())
}

fn panic_message(payload: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic".to_string()
    }
}

/// Runs one trial. Stage errors and panics are captured in the record.
pub fn run_trial(cfg: &ExperimentConfig, cell: &Cell, trial: usize) -> Result<(TrialRecord, TrialTiming)> {
    let mut rec = TrialRecord::blank(cfg, cell, trial)?;
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(|| run_stages(cfg, cell, &mut rec)));
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    match outcome {
        Ok(Ok(())) => {}
        Ok(Err(e)) => {
            rec = TrialRecord::blank(cfg, cell, trial)?;
            rec.fail(e.to_string());
        }
        Err(payload) => {
            rec = TrialRecord::blank(cfg, cell, trial)?;
            rec.fail(format!("panic: {}", panic_message(payload.as_ref())));
        }
    }
    Ok((
        rec,
        TrialTiming {
            cell: cell.id,
            trial,
            wall_ms,
        },
    ))
}

/// Success count and Wilson interval for one boolean outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub successes: usize,
    pub trials: usize,
    pub rate: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Wilson score interval for `successes` out of `trials`; `(0, 1)` when `trials = 0`.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let ph = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (ph + z2 / (2.0 * n)) / denom;
    let half = z / denom * (ph * (1.0 - ph) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

impl RateSummary {
    fn from_flags<'a>(flags: impl Iterator<Item = &'a Option<bool>>) -> Option<Self> {
        let (mut successes, mut trials) = (0, 0);
        for f in flags.flatten() {
            trials += 1;
            successes += usize::from(*f);
        }
        if trials == 0 {
            return None;
        }
        let (lower, upper) = wilson_interval(successes, trials, WILSON_Z);
        Some(Self {
            successes,
            trials,
            rate: successes as f64 / trials as f64,
            lower,
            upper,
        })
    }

    /// True when the two Wilson intervals overlap.
    pub fn consistent_with(&self, other: &RateSummary) -> bool {
        self.lower <= other.upper && other.lower <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: usize,
    pub params: ModelParams,
    pub trials: usize,
    pub failed: usize,
    pub region: RegionLabel,
    pub flags: ProxyFlags,
    pub matched: Option<RateSummary>,
    pub mean_overlap: Option<f64>,
    pub mean_kcore_unmatched: Option<f64>,
    pub single: Option<RateSummary>,
    pub pair: Option<RateSummary>,
}

impl CellSummary {
    pub fn failed_entirely(&self) -> bool {
        self.trials > 0 && self.failed == self.trials
    }
}

fn mean<I: Iterator<Item = f64>>(it: I) -> Option<f64> {
    let (s, c) = it.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (c > 0).then(|| s / c as f64)
}

/// Per-cell aggregation of records; cells with no records are omitted.
pub fn summarize(cfg: &ExperimentConfig, cells: &[Cell], records: &[TrialRecord]) -> Result<Vec<CellSummary>> {
    let mut out = Vec::with_capacity(cells.len());
    for cell in cells {
        let recs: Vec<&TrialRecord> = records.iter().filter(|r| r.cell == cell.id).collect();
        if recs.is_empty() {
            continue;
        }
        let (region, flags) = cell.theory(&cfg.thresholds)?;
        out.push(CellSummary {
            cell: cell.id,
            params: cell.params.clone(),
            trials: recs.len(),
            failed: recs.iter().filter(|r| r.failed).count(),
            region,
            flags,
            matched: RateSummary::from_flags(recs.iter().map(|r| &r.matched_exactly)),
            mean_overlap: mean(recs.iter().filter_map(|r| r.match_overlap)),
            mean_kcore_unmatched: mean(recs.iter().filter_map(|r| r.kcore_unmatched.map(|v| v as f64))),
            single: RateSummary::from_flags(recs.iter().map(|r| &r.single_exact)),
            pair: RateSummary::from_flags(recs.iter().map(|r| &r.pair_exact)),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: ExperimentConfig,
    pub cells: Vec<Cell>,
    /// Sorted by `(cell, trial)`.
    pub records: Vec<TrialRecord>,
    pub timings: Vec<TrialTiming>,
    pub summary: Vec<CellSummary>,
}

impl SweepResult {
    pub fn any_cell_failed_entirely(&self) -> bool {
        self.summary.iter().any(CellSummary::failed_entirely)
    }
}

/// Runs every trial of every cell on a pool of `jobs` workers (`0` = rayon's
/// default).
pub fn run_sweep(cfg: &ExperimentConfig, jobs: usize) -> Result<SweepResult> {
    cfg.validate()?;
    let cells = cfg.cells()?;
    let tasks: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..cfg.trials).map(move |t| (c, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    let results: Vec<Result<(TrialRecord, TrialTiming)>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(c, t)| run_trial(cfg, &cells[c], t))
            .collect()
    });
    let mut records = Vec::with_capacity(results.len());
    let mut timings = Vec::with_capacity(results.len());
    for r in results {
        let (rec, tm) = r?;
        records.push(rec);
        timings.push(tm);
    }
    records.sort_by_key(|r| (r.cell, r.trial));
    timings.sort_by_key(|t| (t.cell, t.trial));
    let summary = summarize(cfg, &cells, &records)?;
    Ok(SweepResult {
        config: cfg.clone(),
        cells,
        records,
        timings,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cgmm_config() -> ExperimentConfig {
        ExperimentConfig::from_json(
            r#"{
                "model": "cgmm",
                "grid": {"n": [30], "d": [20], "rho": [0.3, 0.99], "R": [4.0]},
                "trials": 4,
                "master_seed": 11,
                "methods": {"matching": "min-distance", "recover_single": true, "recover_pair": true,
                            "pair_match": "min-distance"}
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn wilson_known_values() {
        let (lo, hi) = wilson_interval(0, 10, WILSON_Z);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.27753).abs() < 1e-4);
        let (lo, hi) = wilson_interval(5, 10, WILSON_Z);
        assert!((lo - 0.23659).abs() < 1e-4);
        assert!((hi - 0.76341).abs() < 1e-4);
        assert_eq!(wilson_interval(0, 0, WILSON_Z), (0.0, 1.0));
    }

    #[test]
    fn config_rejects_bad_input() {
        let bad = [
            r#"{"model":"cgmm","grid":{"n":[10],"d":[2],"rho":[0.5],"R":[1]},"trials":0,"master_seed":1}"#,
            r#"{"model":"cgmm","grid":{"n":[],"d":[2],"rho":[0.5],"R":[1]},"trials":1,"master_seed":1}"#,
            r#"{"model":"cgmm","grid":{"n":[10],"d":[2],"rho":[1.5],"R":[1]},"trials":1,"master_seed":1}"#,
            r#"{"model":"cgmm","grid":{"n":[10],"d":[2],"rho":[0.5],"R":[1],"s":[0.5]},"trials":1,"master_seed":1}"#,
            r#"{"model":"ccsbm","grid":{"n":[10],"d":[2],"rho":[0.5],"R":[1],"s":[0.5]},"trials":1,"master_seed":1}"#,
            r#"{"model":"ccsbm","grid":{"n":[10],"d":[2],"rho":[0.5],"R":[1],"s":[0.5],"p":[0.1],"a":[1],"q":[0.01]},"trials":1,"master_seed":1}"#,
            r#"{"model":"cgmm","grid":{"n":[10],"d":[2],"rho":[0.5],"R":[1]},"trials":1,"master_seed":1,"methods":{"matching":"two-step"}}"#,
            r#"{"model":"cgmm","grid":{"n":[10],"d":[2],"rho":[0.5],"R":[1]},"trials":1,"master_seed":1,"bogus":1}"#,
        ];
        for b in bad {
            assert!(ExperimentConfig::from_json(b).is_err(), "{b}");
        }
    }

    #[test]
    fn scaled_rates_convert() {
        let cfg = ExperimentConfig::from_json(
            r#"{"model":"ccsbm","grid":{"n":[100],"d":[0],"rho":[0],"R":[1],"a":[4],"b":[2],"s":[0.5]},
                "trials":1,"master_seed":1,"methods":{"matching":"two-step"}}"#,
        )
        .unwrap();
        let cells = cfg.cells().unwrap();
        let ModelParams::Ccsbm(c) = &cells[0].params else { panic!() };
        assert!((c.p - 4.0 * 100f64.ln() / 100.0).abs() < 1e-15);
        assert!((cells[0].value("a").unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn cell_order_is_row_major() {
        let cfg = ExperimentConfig::from_json(
            r#"{"model":"cgmm","grid":{"n":[10,20],"d":[2],"rho":[0.1,0.2,0.3],"R":[1]},"trials":1,"master_seed":1}"#,
        )
        .unwrap();
        let cells = cfg.cells().unwrap();
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[4].params.n(), 20);
        assert_eq!(cells[4].params.rho(), 0.2);
        assert_eq!(cfg.varying_params(), vec!["n", "rho"]);
    }

    #[test]
    fn trial_is_deterministic() {
        let cfg = cgmm_config();
        let cells = cfg.cells().unwrap();
        let a = run_trial(&cfg, &cells[0], 2).unwrap().0;
        let b = run_trial(&cfg, &cells[0], 2).unwrap().0;
        assert_eq!(a, b);
        assert!(!a.failed);
        assert_ne!(a.stream, run_trial(&cfg, &cells[0], 3).unwrap().0.stream);
    }

    #[test]
    fn identical_copies_always_match() {
        let cfg = ExperimentConfig::from_json(
            r#"{"model":"ccsbm","grid":{"n":[60],"d":[3],"rho":[1.0],"R":[2],"p":[0.2],"q":[0.05],"s":[1.0]},
                "trials":5,"master_seed":3,"methods":{"matching":"two-step"}}"#,
        )
        .unwrap();
        let res = run_sweep(&cfg, 2).unwrap();
        for r in &res.records {
            assert_eq!(r.matched_exactly, Some(true), "{r:?}");
            assert_eq!(r.match_overlap, Some(1.0));
        }
        let cfg = ExperimentConfig::from_json(
            r#"{"model":"cgmm","grid":{"n":[60],"d":[3],"rho":[1.0],"R":[2]},"trials":5,"master_seed":3}"#,
        )
        .unwrap();
        assert!(run_sweep(&cfg, 1).unwrap().records.iter().all(|r| r.matched_exactly == Some(true)));
    }

    #[test]
    fn serial_and_parallel_agree() {
        let cfg = cgmm_config();
        let a = run_sweep(&cfg, 1).unwrap();
        let b = run_sweep(&cfg, 4).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.summary, b.summary);
    }

    #[test]
    fn summary_counts_match_records() {
        let res = run_sweep(&cgmm_config(), 2).unwrap();
        for s in &res.summary {
            let recs: Vec<_> = res.records.iter().filter(|r| r.cell == s.cell).collect();
            let m = recs.iter().filter(|r| r.matched_exactly == Some(true)).count();
            assert_eq!(s.matched.unwrap().successes, m);
            let p = recs.iter().filter(|r| r.pair_exact == Some(true)).count();
            assert_eq!(s.pair.unwrap().successes, p);
            for r in recs {
                assert_eq!(r.matched_exactly == Some(true), r.match_overlap == Some(1.0));
                let (region, _) = res.cells[r.cell].theory(&res.config.thresholds).unwrap();
                assert_eq!(r.region(), region);
            }
        }
    }

    #[test]
    fn stage_errors_are_recorded() {
        // exact k-core search refuses n > 8
        let cfg = ExperimentConfig::from_json(
            r#"{"model":"ccsbm","grid":{"n":[20],"d":[2],"rho":[0.5],"R":[1],"p":[0.3],"q":[0.1],"s":[0.9]},
                "trials":2,"master_seed":1,"methods":{"matching":"kcore","kcore_mode":"exact","k":1}}"#,
        )
        .unwrap();
        let res = run_sweep(&cfg, 1).unwrap();
        assert!(res.records.iter().all(|r| r.failed && r.error.is_some()));
        assert!(res.records.iter().all(|r| r.matched_exactly.is_none()));
        assert!(res.any_cell_failed_entirely());
    }

    #[test]
    fn oracle_check_runs_on_tiny_cells() {
        let cfg = ExperimentConfig::from_json(
            r#"{"model":"cgmm","grid":{"n":[6],"d":[3],"rho":[0.5],"R":[1]},"trials":5,"master_seed":9,"oracle":true}"#,
        )
        .unwrap();
        let res = run_sweep(&cfg, 2).unwrap();
        assert!(res.records.iter().all(|r| r.oracle_agrees == Some(true)));
    }

    #[test]
    fn kcore_partial_overlap() {
        let cfg = ExperimentConfig::from_json(
            r#"{"model":"ccsbm","grid":{"n":[200],"d":[0],"rho":[0],"R":[1],"p":[0.05],"q":[0.02],"s":[0.7]},
                "trials":3,"master_seed":5,"methods":{"matching":"kcore","k":2}}"#,
        )
        .unwrap();
        let res = run_sweep(&cfg, 2).unwrap();
        for r in &res.records {
            let f = r.kcore_unmatched.unwrap();
            let ov = r.match_overlap.unwrap();
            assert!((ov - (200 - f) as f64 / 200.0).abs() < 1e-12);
            assert_eq!(r.matched_exactly, Some(f == 0));
        }
    }
}
