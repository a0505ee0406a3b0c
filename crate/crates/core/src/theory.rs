//! Closed-form rate functions and threshold classifiers for exact matching
//! and exact community recovery.
//!
//! Asymptotic side conditions are replaced by finite-`n` proxies, reported
//! alongside each label: `d = ω(log n)` becomes `d ≥ (ln n)^1.5`, `p = o(1)`
//! style smallness becomes `p ≤ exp(−(ln ln n)³)`, and an additive `ω(1)`
//! slack becomes `ε ln n`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// `S(α, t) = Σ_{j=1}^{t−1} ln(1 + (1 − cos(2πj/t)) / (2α))`.
#[allow(non_snake_case)]
pub fn fn_S(alpha: f64, t: usize) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(invalid(format!("alpha must be positive, got {alpha}")));
    }
    if t < 2 {
        return Err(invalid(format!("t must be at least 2, got {t}")));
    }
    let tf = t as f64;
    Ok((1..t)
        .map(|j| (1.0 + (1.0 - (2.0 * PI * j as f64 / tf).cos()) / (2.0 * alpha)).ln())
        .sum())
}

/// `I(α) = 2 ln((1 + sqrt(1 + 1/α)) / 2)`, the per-step limit of `S(α, t)/t`.
#[allow(non_snake_case)]
pub fn fn_I(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(invalid(format!("alpha must be positive, got {alpha}")));
    }
    Ok(2.0 * ((1.0 + (1.0 + 1.0 / alpha).sqrt()) / 2.0).ln())
}

/// `I(t, a, b, c) = (a/2)(1 − (a/b)^t) + (b/2)(1 − (b/a)^t) − 2c(t + t²)`.
#[allow(non_snake_case)]
pub fn fn_I_t(t: f64, a: f64, b: f64, c: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(invalid(format!("a and b must be positive, got a={a} b={b}")));
    }
    Ok(a / 2.0 * (1.0 - (a / b).powf(t)) + b / 2.0 * (1.0 - (b / a).powf(t)) - 2.0 * c * (t + t * t))
}

/// `I*(a, b, c) = ((√a − √b)² + c) / 2`.
#[allow(non_snake_case)]
pub fn fn_I_star(a: f64, b: f64, c: f64) -> f64 {
    ((a.sqrt() - b.sqrt()).powi(2) + c) / 2.0
}

fn log_n(n: usize) -> Result<f64> {
    if n < 3 {
        return Err(invalid(format!("threshold formulas need n >= 3, got {n}")));
    }
    Ok((n as f64).ln())
}

/// `c` with `R² / (R + d/n) = c ln n`.
pub fn snr_c(r: f64, d: usize, n: usize) -> Result<f64> {
    let l = log_n(n)?;
    if r < 0.0 {
        return Err(invalid(format!("R must be nonnegative, got {r}")));
    }
    let denom = r + d as f64 / n as f64;
    Ok(if denom == 0.0 { 0.0 } else { r * r / denom / l })
}

/// `c'`: the same quantity for the averaged attributes, `R' = 2R/(1+ρ)`.
pub fn snr_cprime(r: f64, d: usize, n: usize, rho: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(invalid(format!("rho must lie in [0, 1], got {rho}")));
    }
    snr_c(2.0 * r / (1.0 + rho), d, n)
}

/// Rate parameters `p = a ln n / n`, `q = b ln n / n` and the attribute SNRs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub c_prime: f64,
}

impl RateParams {
    pub fn from_model(n: usize, p: f64, q: f64, r: f64, d: usize, rho: f64) -> Result<Self> {
        let l = log_n(n)?;
        let scale = n as f64 / l;
        let (c, c_prime) = if d == 0 {
            (0.0, 0.0)
        } else {
            (snr_c(r, d, n)?, snr_cprime(r, d, n, rho)?)
        };
        Ok(Self {
            a: p * scale,
            b: q * scale,
            c,
            c_prime,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchingLabel {
    Achievable,
    Impossible,
    Gap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecoveryLabel {
    Possible,
    Impossible,
    Gap,
}

impl std::fmt::Display for MatchingLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MatchingLabel::Achievable => "achievable",
            MatchingLabel::Impossible => "impossible",
            MatchingLabel::Gap => "gap",
        })
    }
}

impl std::fmt::Display for RecoveryLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RecoveryLabel::Possible => "possible",
            RecoveryLabel::Impossible => "impossible",
            RecoveryLabel::Gap => "gap",
        })
    }
}

/// Finite-`n` stand-ins for the asymptotic side conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProxyFlags {
    /// `p ≤ exp(−(ln ln n)³)`.
    pub p_small: bool,
    /// `‖μ‖² ≥ (2 + ε) ln n`.
    pub mean_large: bool,
    /// `d ≥ (ln n)^1.5`.
    pub dim_large: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchingClass {
    pub label: MatchingLabel,
    pub flags: ProxyFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionLabel {
    pub matching: MatchingLabel,
    pub recovery_single: RecoveryLabel,
    pub recovery_pair: RecoveryLabel,
}

/// Margin `ε` and the unspecified constant `C` of the converse bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdOptions {
    pub eps: f64,
    #[serde(rename = "C")]
    pub boundary_c: f64,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        Self {
            eps: 0.1,
            boundary_c: 0.0,
        }
    }
}

impl ThresholdOptions {
    fn validate(&self) -> Result<()> {
        if !(self.eps >= 0.0 && self.eps < 1.0) {
            return Err(invalid(format!("eps must lie in [0, 1), got {}", self.eps)));
        }
        if !self.boundary_c.is_finite() {
            return Err(invalid("C must be finite"));
        }
        Ok(())
    }
}

/// `(d/4) ln(1/(1−ρ²))`; zero without attributes or correlation, infinite
/// for identical copies.
pub fn attribute_information(d: usize, rho: f64) -> f64 {
    if d == 0 || rho == 0.0 {
        0.0
    } else if rho >= 1.0 {
        f64::INFINITY
    } else {
        d as f64 / 4.0 * (1.0 / (1.0 - rho * rho)).ln()
    }
}

/// `n s² (p + q) / 2`, the mean degree of the true intersection graph.
pub fn edge_information(n: usize, p: f64, q: f64, s: f64) -> f64 {
    n as f64 * s * s * (p + q) / 2.0
}

/// Everything the matching classifiers look at.
struct MatchingInputs {
    n: usize,
    edge: f64,
    d: usize,
    rho: f64,
    r: f64,
    p: f64,
}

fn classify_matching_core(x: &MatchingInputs, opts: &ThresholdOptions) -> Result<MatchingClass> {
    opts.validate()?;
    let l = log_n(x.n)?;
    let eps = opts.eps;
    let attr = attribute_information(x.d, x.rho);
    let informative = x.d > 0 && x.rho > 0.0;
    let flags = ProxyFlags {
        p_small: x.p <= (-l.ln().powi(3)).exp(),
        mean_large: informative && x.r >= (2.0 + eps) * l,
        dim_large: informative && x.d as f64 >= l.powf(1.5),
    };
    let total = x.edge + attr;
    let copies = informative && x.rho >= 1.0;
    let achievable = copies
        || x.edge >= (1.0 + eps) * l
        || (flags.p_small && total >= (1.0 + eps) * l && (flags.mean_large || flags.dim_large));
    let impossible = if !informative {
        x.edge < (1.0 - eps) * l
    } else {
        let d = x.d as f64;
        (total < (1.0 - eps) * l && !flags.dim_large)
            || (total < l - d.ln() + opts.boundary_c && 1.0 / (x.rho * x.rho) - 1.0 <= d / 40.0)
    };
    let label = if achievable {
        MatchingLabel::Achievable
    } else if impossible {
        MatchingLabel::Impossible
    } else {
        MatchingLabel::Gap
    };
    Ok(MatchingClass { label, flags })
}

/// Exact matching of two correlated Gaussian databases.
pub fn classify_matching_cgmm(
    n: usize,
    d: usize,
    rho: f64,
    radius_sq: f64,
    opts: &ThresholdOptions,
) -> Result<MatchingClass> {
    classify_matching_core(
        &MatchingInputs {
            n,
            edge: 0.0,
            d,
            rho,
            r: radius_sq,
            p: 0.0,
        },
        opts,
    )
}

/// Exact matching of two correlated SBM graphs without attributes.
pub fn classify_matching_sbm(n: usize, p: f64, q: f64, s: f64, opts: &ThresholdOptions) -> Result<MatchingClass> {
    classify_matching_core(
        &MatchingInputs {
            n,
            edge: edge_information(n, p, q, s),
            d: 0,
            rho: 0.0,
            r: 0.0,
            p,
        },
        opts,
    )
}

/// Exact matching of two correlated contextual SBM graphs.
#[allow(clippy::too_many_arguments)]
pub fn classify_matching_ccsbm(
    n: usize,
    p: f64,
    q: f64,
    s: f64,
    radius_sq: f64,
    d: usize,
    rho: f64,
    opts: &ThresholdOptions,
) -> Result<MatchingClass> {
    classify_matching_core(
        &MatchingInputs {
            n,
            edge: edge_information(n, p, q, s),
            d,
            rho,
            r: radius_sq,
            p,
        },
        opts,
    )
}

/// `(1 + sqrt(1 + 2d/(n ln n))) ln n`, the single-database recovery threshold on `‖μ‖²`.
pub fn gmm_recovery_threshold(n: usize, d: usize) -> Result<f64> {
    let l = log_n(n)?;
    Ok((1.0 + (1.0 + 2.0 * d as f64 / (n as f64 * l)).sqrt()) * l)
}

fn label_recovery(value: f64, threshold: f64, eps: f64, needs_matching: Option<MatchingLabel>) -> RecoveryLabel {
    if value < (1.0 - eps) * threshold {
        RecoveryLabel::Impossible
    } else if value >= (1.0 + eps) * threshold
        && needs_matching.is_none_or(|m| m == MatchingLabel::Achievable)
    {
        RecoveryLabel::Possible
    } else {
        RecoveryLabel::Gap
    }
}

/// Community recovery labels for correlated Gaussian databases.
pub fn classify_recovery_cgmm(
    n: usize,
    d: usize,
    rho: f64,
    radius_sq: f64,
    opts: &ThresholdOptions,
) -> Result<RegionLabel> {
    let matching = classify_matching_cgmm(n, d, rho, radius_sq, opts)?.label;
    let single = gmm_recovery_threshold(n, d)?;
    let pair = (1.0 + rho) / 2.0 * single;
    Ok(RegionLabel {
        matching,
        recovery_single: label_recovery(radius_sq, single, opts.eps, None),
        recovery_pair: label_recovery(radius_sq, pair, opts.eps, Some(matching)),
    })
}

/// `(s(√a−√b)² + c)/2` for one graph and `((1−(1−s)²)(√a−√b)² + c')/2` for the merged pair.
pub fn csbm_recovery_values(rates: &RateParams, s: f64) -> (f64, f64) {
    let gap = (rates.a.sqrt() - rates.b.sqrt()).powi(2);
    let single = (s * gap + rates.c) / 2.0;
    let pair = ((1.0 - (1.0 - s) * (1.0 - s)) * gap + rates.c_prime) / 2.0;
    (single, pair)
}

/// Community recovery labels for correlated contextual SBMs.
#[allow(clippy::too_many_arguments)]
pub fn classify_recovery_ccsbm(
    n: usize,
    p: f64,
    q: f64,
    s: f64,
    radius_sq: f64,
    d: usize,
    rho: f64,
    opts: &ThresholdOptions,
) -> Result<RegionLabel> {
    let matching = classify_matching_ccsbm(n, p, q, s, radius_sq, d, rho, opts)?.label;
    let rates = RateParams::from_model(n, p, q, radius_sq, d, rho)?;
    let (single, pair) = csbm_recovery_values(&rates, s);
    Ok(RegionLabel {
        matching,
        recovery_single: label_recovery(single, 1.0, opts.eps, None),
        recovery_pair: label_recovery(pair, 1.0, opts.eps, Some(matching)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifierId {
    CgmmMatch,
    CcsbmMatch,
    CgmmRecover,
    CcsbmRecover,
}

impl std::str::FromStr for ClassifierId {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| invalid(format!("unknown classifier `{s}`")))
    }
}

/// A parameter point; unused fields are ignored by a given classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParamPoint {
    pub n: usize,
    pub d: usize,
    pub rho: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub p: f64,
    pub q: f64,
    pub s: f64,
}

impl Default for ParamPoint {
    fn default() -> Self {
        Self {
            n: 1000,
            d: 0,
            rho: 0.0,
            r: 0.0,
            p: 0.0,
            q: 0.0,
            s: 1.0,
        }
    }
}

impl ParamPoint {
    /// Sets a field by name. `n` and `d` are rounded; `a`/`b` set `p`/`q`
    /// through `p = a ln n / n`.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let count = |v: f64| -> Result<usize> {
            if v >= 0.0 && v.is_finite() {
                Ok(v.round() as usize)
            } else {
                Err(invalid(format!("{name} must be a nonnegative count, got {v}")))
            }
        };
        match name {
            "n" => self.n = count(value)?,
            "d" => self.d = count(value)?,
            "rho" => self.rho = value,
            "R" => self.r = value,
            "p" => self.p = value,
            "q" => self.q = value,
            "s" => self.s = value,
            "a" => self.p = value * (self.n as f64).ln() / self.n as f64,
            "b" => self.q = value * (self.n as f64).ln() / self.n as f64,
            _ => return Err(invalid(format!("unknown parameter `{name}`"))),
        }
        Ok(())
    }

    pub fn classify(&self, id: ClassifierId, opts: &ThresholdOptions) -> Result<RegionLabel> {
        match id {
            ClassifierId::CgmmMatch | ClassifierId::CgmmRecover => {
                classify_recovery_cgmm(self.n, self.d, self.rho, self.r, opts)
            }
            ClassifierId::CcsbmMatch | ClassifierId::CcsbmRecover => classify_recovery_ccsbm(
                self.n, self.p, self.q, self.s, self.r, self.d, self.rho, opts,
            ),
        }
    }
}

/// Values along one grid axis: an explicit list or an evenly spaced range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub param: String,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    #[serde(default)]
    pub min: Option<f64>,
    #[serde(default)]
    pub max: Option<f64>,
    #[serde(default)]
    pub steps: Option<usize>,
}

impl AxisSpec {
    pub fn points(&self) -> Result<Vec<f64>> {
        if let Some(v) = &self.values {
            if v.is_empty() {
                return Err(invalid(format!("axis `{}` has no values", self.param)));
            }
            return Ok(v.clone());
        }
        match (self.min, self.max, self.steps) {
            (Some(lo), Some(hi), Some(steps)) if steps >= 1 => Ok(if steps == 1 {
                vec![lo]
            } else {
                (0..steps)
                    .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
                    .collect()
            }),
            _ => Err(invalid(format!(
                "axis `{}` needs `values` or `min`, `max`, `steps`",
                self.param
            ))),
        }
    }
}

/// A rectangular grid of parameter points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(default)]
    pub base: ParamPoint,
    pub x: AxisSpec,
    pub y: AxisSpec,
    #[serde(default)]
    pub options: ThresholdOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub ix: usize,
    pub iy: usize,
    pub x: f64,
    pub y: f64,
    pub region: RegionLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTable {
    pub classifier: ClassifierId,
    pub x_param: String,
    pub y_param: String,
    pub nx: usize,
    pub ny: usize,
    /// Row-major in `y` then `x`.
    pub cells: Vec<PhaseCell>,
}

pub fn phase_grid(spec: &GridSpec, id: ClassifierId) -> Result<PhaseTable> {
    let xs = spec.x.points()?;
    let ys = spec.y.points()?;
    let mut cells = Vec::with_capacity(xs.len() * ys.len());
    for (iy, &y) in ys.iter().enumerate() {
        for (ix, &x) in xs.iter().enumerate() {
            let mut pt = spec.base;
            // n first so that a/b conversions see the final n
            for (name, v) in [(&spec.x.param, x), (&spec.y.param, y)] {
                if name == "n" {
                    pt.set(name, v)?;
                }
            }
            pt.set(&spec.x.param, x)?;
            pt.set(&spec.y.param, y)?;
            cells.push(PhaseCell {
                ix,
                iy,
                x,
                y,
                region: pt.classify(id, &spec.options)?,
            });
        }
    }
    Ok(PhaseTable {
        classifier: id,
        x_param: spec.x.param.clone(),
        y_param: spec.y.param.clone(),
        nx: xs.len(),
        ny: ys.len(),
        cells,
    })
}

pub fn write_phase_csv<W: Write>(table: &PhaseTable, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        table.x_param.as_str(),
        table.y_param.as_str(),
        "matching",
        "recovery_single",
        "recovery_pair",
    ])?;
    for c in &table.cells {
        out.write_record([
            c.x.to_string(),
            c.y.to_string(),
            c.region.matching.to_string(),
            c.region.recovery_single.to_string(),
            c.region.recovery_pair.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Colour of one cell: matching classifiers colour by the matching label,
/// recovery classifiers by where recovery first becomes possible.
pub(crate) fn cell_style(id: ClassifierId, r: &RegionLabel) -> (&'static str, &'static str) {
    match id {
        ClassifierId::CgmmMatch | ClassifierId::CcsbmMatch => match r.matching {
            MatchingLabel::Achievable => ("#4a7fd1", "matching achievable"),
            MatchingLabel::Impossible => ("#9a9a9a", "matching impossible"),
            MatchingLabel::Gap => ("#f2f2f2", "gap"),
        },
        ClassifierId::CgmmRecover | ClassifierId::CcsbmRecover => {
            match (r.recovery_single, r.recovery_pair) {
                (RecoveryLabel::Possible, _) => ("#5cb85c", "single database suffices"),
                (_, RecoveryLabel::Possible) => ("#f4a6c6", "pair needed"),
                (_, RecoveryLabel::Impossible) => ("#9a9a9a", "impossible"),
                _ => ("#f2f2f2", "gap"),
            }
        }
    }
}

/// Hand-rolled SVG region map: one rectangle per cell, `y` increasing upward.
pub fn render_phase_svg(table: &PhaseTable) -> String {
    const CELL: usize = 12;
    const MARGIN: usize = 50;
    const LEGEND: usize = 180;
    let w = MARGIN * 2 + table.nx * CELL + LEGEND;
    let h = MARGIN * 2 + table.ny * CELL;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let mut legend: Vec<(&str, &str)> = Vec::new();
    for c in &table.cells {
        let (fill, name) = cell_style(table.classifier, &c.region);
        if !legend.iter().any(|(f, _)| *f == fill) {
            legend.push((fill, name));
        }
        let x = MARGIN + c.ix * CELL;
        let y = MARGIN + (table.ny - 1 - c.iy) * CELL;
        let _ = writeln!(
            s,
            r#"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{fill}"><title>{}={} {}={}: {}</title></rect>"#,
            table.x_param, c.x, table.y_param, c.y, name
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        MARGIN + table.nx * CELL / 2,
        h - MARGIN / 3,
        table.x_param
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" transform="rotate(-90 {} {})">{}</text>"#,
        MARGIN / 3,
        MARGIN + table.ny * CELL / 2,
        MARGIN / 3,
        MARGIN + table.ny * CELL / 2,
        table.y_param
    );
    let lx = MARGIN * 2 + table.nx * CELL - 20;
    for (k, (fill, name)) in legend.iter().enumerate() {
        let ly = MARGIN + k * 18;
        let _ = writeln!(s, r#"<rect x="{lx}" y="{ly}" width="12" height="12" fill="{fill}" stroke="black"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{name}</text>"#, lx + 18, ly + 10);
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(eps: f64) -> ThresholdOptions {
        ThresholdOptions { eps, boundary_c: 0.0 }
    }

    #[test]
    fn s_two_is_single_term() {
        for alpha in [0.1, 0.5625, 1.0, 7.0] {
            assert!((fn_S(alpha, 2).unwrap() - (1.0 + 1.0 / alpha).ln()).abs() < 1e-14);
        }
        let rho: f64 = 0.8;
        let alpha = (1.0 - rho * rho) / (rho * rho);
        let v = fn_S(alpha, 2).unwrap();
        assert!((v - (1.0f64 / 0.36).ln()).abs() < 1e-12);
        assert!((v - 1.021651).abs() < 1e-6);
    }

    #[test]
    fn s_four_terms() {
        let want = 1.5f64.ln() + 2.0f64.ln() + 1.5f64.ln();
        assert!((fn_S(1.0, 4).unwrap() - want).abs() < 1e-14);
        assert!(fn_S(0.0, 3).is_err());
        assert!(fn_S(1.0, 1).is_err());
    }

    #[test]
    fn i_closed_form() {
        assert!((fn_I(1.0).unwrap() - 2.0 * ((1.0 + 2f64.sqrt()) / 2.0).ln()).abs() < 1e-15);
        assert!(fn_I(1e12).unwrap() < 1e-11);
        assert!(fn_I(-1.0).is_err());
    }

    #[test]
    fn rate_function_identities() {
        assert_eq!(fn_I_t(0.0, 3.0, 1.0, 0.7).unwrap(), 0.0);
        assert!((fn_I_t(-0.5, 4.0, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(fn_I_star(4.0, 1.0, 1.0), 1.0);
        assert_eq!(fn_I_star(2.0, 2.0, 0.0), 0.0);
        assert!(fn_I_t(1.0, 0.0, 1.0, 0.0).is_err());
        // grid maximum sits at t = -1/2
        let (a, b, c) = (3.0, 1.0, 0.5);
        let best = (0..=4000)
            .map(|k| -2.0 + k as f64 * 1e-3)
            .max_by(|&s, &t| fn_I_t(s, a, b, c).unwrap().total_cmp(&fn_I_t(t, a, b, c).unwrap()))
            .unwrap();
        assert!((best + 0.5).abs() <= 1e-3);
    }

    #[test]
    fn snr_examples() {
        let n = 1000;
        let c = snr_c(5.0, 30, n).unwrap();
        assert_eq!(snr_cprime(5.0, 30, n, 1.0).unwrap(), c);
        assert!((snr_c(5.0, 0, n).unwrap() - 5.0 / (n as f64).ln()).abs() < 1e-15);
        // R' = sqrt(2 (d/n) ln n) with d = 1e6 n gives c' close to 2
        let l = (n as f64).ln();
        let d = 1_000_000 * n;
        let r_prime = (2.0 * (d as f64 / n as f64) * l).sqrt();
        let rho = 0.5;
        let r = r_prime * (1.0 + rho) / 2.0;
        let cp = snr_cprime(r, d, n, rho).unwrap();
        assert!((cp - 2.0).abs() < 0.01, "c' = {cp}");
    }

    #[test]
    fn cgmm_matching_examples() {
        let o = opts(0.1);
        assert_eq!(classify_matching_cgmm(1000, 50, 0.0, 10.0, &o).unwrap().label, MatchingLabel::Impossible);
        assert_eq!(classify_matching_cgmm(1000, 1, 1.0, 0.1, &o).unwrap().label, MatchingLabel::Achievable);
        let m = classify_matching_cgmm(10_000, 200, 0.5, 1.0, &opts(0.5)).unwrap();
        assert!(m.flags.dim_large);
        assert_eq!(m.label, MatchingLabel::Achievable);
    }

    #[test]
    fn ccsbm_reductions() {
        let o = opts(0.1);
        for &(p, q, s) in &[(0.01, 0.005, 0.9), (0.02, 0.001, 0.5), (0.004, 0.002, 0.7)] {
            let full = classify_matching_ccsbm(2000, p, q, s, 3.0, 0, 0.4, &o).unwrap();
            assert_eq!(full, classify_matching_sbm(2000, p, q, s, &o).unwrap());
        }
        for &(d, rho, r) in &[(100, 0.5, 3.0), (10, 0.9, 20.0), (2, 0.3, 1.0)] {
            let full = classify_matching_ccsbm(2000, 0.0, 0.0, 0.5, r, d, rho, &o).unwrap();
            assert_eq!(full, classify_matching_cgmm(2000, d, rho, r, &o).unwrap());
        }
    }

    #[test]
    fn ccsbm_boundary_is_inclusive() {
        let n = 5000;
        let l = (n as f64).ln();
        let eps = 0.25;
        // choose p + q so that the edge term alone equals (1+ε) ln n exactly
        let s = 1.0;
        let sum = 2.0 * (1.0 + eps) * l / n as f64;
        let (p, q) = (sum * 0.75, sum * 0.25);
        let edge = edge_information(n, p, q, s);
        assert_eq!(edge, (1.0 + eps) * l);
        let m = classify_matching_ccsbm(n, p, q, s, 1.0, 0, 0.0, &opts(eps)).unwrap();
        assert_eq!(m.label, MatchingLabel::Achievable);
    }

    #[test]
    fn recovery_examples() {
        let n = 1000;
        let o = opts(0.1);
        let single = gmm_recovery_threshold(n, 40).unwrap();
        // pair threshold halves at ρ = 0
        let r = 0.7 * single;
        let lab = classify_recovery_cgmm(n, 40, 0.0, r, &o).unwrap();
        assert_eq!(lab.recovery_single, RecoveryLabel::Impossible);
        assert_ne!(lab.recovery_pair, RecoveryLabel::Impossible);
        for r in [0.5 * single, single, 1.5 * single, 3.0 * single] {
            let lab = classify_recovery_cgmm(n, 40, 1.0, r, &o).unwrap();
            assert_eq!(lab.recovery_single, lab.recovery_pair);
        }
    }

    #[test]
    fn csbm_recovery_boundary() {
        // a = 4, b = 1, s = 1/2: pair value (0.75 + c')/2 hits 1 at c' = 1.25
        let rates = RateParams {
            a: 4.0,
            b: 1.0,
            c: 0.0,
            c_prime: 1.25,
        };
        let (_, pair) = csbm_recovery_values(&rates, 0.5);
        assert_eq!(pair, 1.0);
    }

    #[test]
    fn grid_spec_parses_and_evaluates() {
        let spec: GridSpec = serde_json::from_value(serde_json::json!({
            "base": {"n": 1000, "d": 100, "R": 5.0},
            "x": {"param": "rho", "min": 0.0, "max": 1.0, "steps": 11},
            "y": {"param": "d", "values": [10, 100, 1000]},
            "options": {"eps": 0.1, "C": 0.0}
        }))
        .unwrap();
        let t = phase_grid(&spec, ClassifierId::CgmmMatch).unwrap();
        assert_eq!(t.cells.len(), 33);
        assert_eq!(t.cells[0].region.matching, MatchingLabel::Impossible);
        let mut buf = Vec::new();
        write_phase_csv(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("rho,d,matching,recovery_single,recovery_pair\n"));
        assert_eq!(text.lines().count(), 34);
        let svg = render_phase_svg(&t);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!("ccsbm-recover".parse::<ClassifierId>().unwrap(), ClassifierId::CcsbmRecover);
    }
}
