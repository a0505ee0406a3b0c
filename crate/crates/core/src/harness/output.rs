//! Sweep outputs: `trials.csv`, `timings.csv`, `summary.json`, `phase.svg`.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::models::ModelParams;
use crate::theory::{cell_style, ClassifierId};

use super::{CellSummary, ExperimentConfig, RateSummary, SweepResult, TrialRecord, TrialTiming};

/// Column order of `trials.csv`. Empty fields mean the stage did not run.
pub const CSV_COLUMNS: [&str; 28] = [
    "cell",
    "trial",
    "master_seed",
    "stream",
    "n",
    "d",
    "rho",
    "R",
    "p",
    "q",
    "s",
    "failed",
    "error",
    "k",
    "matched_exactly",
    "match_overlap",
    "kcore_unmatched",
    "oracle_agrees",
    "single_agreement",
    "single_exact",
    "pair_agreement",
    "pair_exact",
    "theory_matching",
    "theory_single",
    "theory_pair",
    "p_small",
    "mean_large",
    "dim_large",
];

fn write_rows<W: Write, T: Serialize>(rows: &[T], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

/// One row per trial, header included. Contains no timing data, so reruns
/// with the same config produce identical bytes.
pub fn emit_csv(records: &[TrialRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        fs::write(path, CSV_COLUMNS.join(",") + "\n")?;
        return Ok(());
    }
    write_rows(records, fs::File::create(path)?)
}

pub fn emit_timings_csv(timings: &[TrialTiming], path: &Path) -> Result<()> {
    write_rows(timings, fs::File::create(path)?)
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    config: &'a ExperimentConfig,
    cells: &'a [CellSummary],
    any_cell_failed_entirely: bool,
}

pub fn emit_summary_json(result: &SweepResult, path: &Path) -> Result<()> {
    let f = SummaryFile {
        config: &result.config,
        cells: &result.summary,
        any_cell_failed_entirely: result.any_cell_failed_entirely(),
    };
    let mut text = serde_json::to_string_pretty(&f)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// The rate the heat map shows: matching if it ran, else pair recovery, else
/// single recovery.
fn headline(s: &CellSummary) -> Option<(&'static str, RateSummary)> {
    s.matched
        .map(|r| ("exact matching", r))
        .or(s.pair.map(|r| ("pair recovery", r)))
        .or(s.single.map(|r| ("single recovery", r)))
}

fn classifier_for(params: &ModelParams, matching: bool) -> ClassifierId {
    match (params, matching) {
        (ModelParams::Cgmm(_), true) => ClassifierId::CgmmMatch,
        (ModelParams::Cgmm(_), false) => ClassifierId::CgmmRecover,
        (ModelParams::Ccsbm(_), true) => ClassifierId::CcsbmMatch,
        (ModelParams::Ccsbm(_), false) => ClassifierId::CcsbmRecover,
    }
}

fn axis_values(result: &SweepResult, name: Option<&str>) -> Vec<f64> {
    let mut v: Vec<f64> = match name {
        Some(n) => result.cells.iter().filter_map(|c| c.value(n)).collect(),
        None => vec![0.0],
    };
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn fmt_value(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e9 {
        format!("{v:.0}")
    } else {
        format!("{v:.4}")
    }
}

/// Theory regions as cell backgrounds with the empirical success rate drawn
/// as a dark square whose opacity is the rate. Axes are the first two grid
/// parameters that vary; further varying parameters are fixed at their
/// first cell's value.
pub fn render_sweep_svg(result: &SweepResult) -> String {
    const CELL: usize = 48;
    const MARGIN: usize = 70;
    const LEGEND: usize = 200;
    let varying = result.config.varying_params();
    let xp = varying.first().copied();
    let yp = varying.get(1).copied();
    let xs = axis_values(result, xp);
    let ys = axis_values(result, yp);
    let pinned: Vec<(&str, f64)> = match result.cells.first() {
        Some(c) => varying
            .iter()
            .skip(2)
            .filter_map(|&n| c.value(n).map(|v| (n, v)))
            .collect(),
        None => Vec::new(),
    };
    let (nx, ny) = (xs.len(), ys.len());
    let w = MARGIN * 2 + nx * CELL + LEGEND;
    let h = MARGIN * 2 + ny * CELL;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let mut legend: Vec<(&str, &str)> = Vec::new();
    let mut metric = "";
    for summ in &result.summary {
        let cell = &result.cells[summ.cell];
        if pinned.iter().any(|&(n, v)| cell.value(n) != Some(v)) {
            continue;
        }
        let x = xp.and_then(|n| cell.value(n)).unwrap_or(0.0);
        let y = yp.and_then(|n| cell.value(n)).unwrap_or(0.0);
        let ix = xs.iter().position(|&v| v == x).unwrap_or(0);
        let iy = ys.iter().position(|&v| v == y).unwrap_or(0);
        let head = headline(summ);
        let id = classifier_for(&summ.params, summ.matched.is_some());
        let (fill, name) = cell_style(id, &summ.region);
        if !legend.iter().any(|(f, _)| *f == fill) {
            legend.push((fill, name));
        }
        let px = MARGIN + ix * CELL;
        let py = MARGIN + (ny - 1 - iy) * CELL;
        let _ = writeln!(
            s,
            r#"<rect x="{px}" y="{py}" width="{CELL}" height="{CELL}" fill="{fill}" stroke="white"/>"#
        );
        match head {
            Some((m, r)) => {
                metric = m;
                let inner = CELL / 2;
                let off = (CELL - inner) / 2;
                let _ = writeln!(
                    s,
                    r#"<rect x="{}" y="{}" width="{inner}" height="{inner}" fill="black" fill-opacity="{:.3}"><title>cell {}: {} {}/{} [{:.3}, {:.3}], {} failed</title></rect>"#,
                    px + off,
                    py + off,
                    r.rate,
                    summ.cell,
                    m,
                    r.successes,
                    r.trials,
                    r.lower,
                    r.upper,
                    summ.failed
                );
            }
            None => {
                let _ = writeln!(
                    s,
                    r#"<text x="{}" y="{}" text-anchor="middle" fill="red">x</text>"#,
                    px + CELL / 2,
                    py + CELL / 2 + 4
                );
            }
        }
    }
    for (ix, v) in xs.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            MARGIN + ix * CELL + CELL / 2,
            MARGIN + ny * CELL + 14,
            fmt_value(*v)
        );
    }
    for (iy, v) in ys.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            MARGIN - 4,
            MARGIN + (ny - 1 - iy) * CELL + CELL / 2 + 4,
            fmt_value(*v)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        MARGIN + nx * CELL / 2,
        h - MARGIN / 3,
        xp.unwrap_or("")
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" transform="rotate(-90 {} {})">{}</text>"#,
        MARGIN / 4,
        MARGIN + ny * CELL / 2,
        MARGIN / 4,
        MARGIN + ny * CELL / 2,
        yp.unwrap_or("")
    );
    let mut title = format!("{metric} rate");
    for (n, v) in &pinned {
        let _ = write!(title, ", {n}={}", fmt_value(*v));
    }
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="{}">{title}</text>"#, MARGIN / 2);
    let lx = MARGIN + nx * CELL + 20;
    for (k, (fill, name)) in legend.iter().enumerate() {
        let ly = MARGIN + k * 18;
        let _ = writeln!(s, r#"<rect x="{lx}" y="{ly}" width="12" height="12" fill="{fill}" stroke="black"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{name}</text>"#, lx + 18, ly + 10);
    }
    let ly = MARGIN + legend.len() * 18 + 6;
    let _ = writeln!(s, r#"<rect x="{lx}" y="{ly}" width="12" height="12" fill="black"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="{}">success rate 1 (opacity)</text>"#, lx + 18, ly + 10);
    s.push_str("</svg>\n");
    s
}

pub fn emit_phase_svg(result: &SweepResult, path: &Path) -> Result<()> {
    fs::write(path, render_sweep_svg(result))?;
    Ok(())
}

/// Writes `trials.csv`, `timings.csv`, `summary.json` and `phase.svg` into `dir`.
pub fn write_sweep(result: &SweepResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    emit_csv(&result.records, &dir.join("trials.csv"))?;
    emit_timings_csv(&result.timings, &dir.join("timings.csv"))?;
    emit_summary_json(result, &dir.join("summary.json"))?;
    emit_phase_svg(result, &dir.join("phase.svg"))
}
