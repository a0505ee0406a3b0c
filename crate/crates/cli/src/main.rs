use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use corrnet::harness::{run_sweep, write_sweep, ExperimentConfig};
use corrnet::io::{read_instance, read_instance_files, write_instance, write_permutation};
use corrnet::matching::{
    kcore_match, min_distance_match, select_k, two_step_match, KcoreMode, MatchResult,
};
use corrnet::oracle::{brute_force_kcore_estimator, brute_force_min_distance, OracleBudget};
use corrnet::recovery::{recover_pipeline, PairMatch, ParamSource, PipelineOptions};
use corrnet::theory::{phase_grid, render_phase_svg, write_phase_csv, ClassifierId, GridSpec};
use corrnet::{
    sample, CcsbmParams, CgmmParams, CorrelatedInstance, ModelParams, PartialMatching, Seed,
};

#[derive(Parser)]
#[command(name = "corrnet", version, about = "Correlated attributed network experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Cgmm,
    Ccsbm,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    MinDistance,
    Kcore,
    TwoStep,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Oracle,
    Exact,
    Heuristic,
}

impl From<Mode> for KcoreMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Oracle => KcoreMode::Oracle,
            Mode::Exact => KcoreMode::Exact,
            Mode::Heuristic => KcoreMode::Heuristic,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PairMethod {
    Truth,
    MinDistance,
    TwoStep,
}

#[derive(Clone, Copy, ValueEnum)]
enum Params {
    Truth,
    PlugIn,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample a correlated instance and write it to a directory.
    Generate {
        #[arg(long, value_enum)]
        model: Model,
        /// JSON file with the model parameters.
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        stream: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the node correspondence of an instance.
    Match {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        method: Method,
        /// Core order, or `auto` for the default choice.
        #[arg(long, default_value = "auto")]
        k: String,
        #[arg(long, value_enum, default_value = "oracle")]
        mode: Mode,
        /// Also run the brute-force reference solver (n <= 8).
        #[arg(long)]
        oracle: bool,
        /// Output file for the estimated permutation (or pairs for `kcore`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// JSON report file; printed to stdout when absent.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Recover communities from one database/graph or from the merged pair.
    Recover {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        use_pair: bool,
        #[arg(long, value_enum, default_value = "two-step")]
        match_method: PairMethod,
        #[arg(long, default_value = "auto")]
        k: String,
        #[arg(long, value_enum, default_value = "oracle")]
        mode: Mode,
        #[arg(long, value_enum, default_value = "truth")]
        params: Params,
        /// JSON report file; printed to stdout when absent.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write the estimated labels, one per line.
        #[arg(long)]
        labels_out: Option<PathBuf>,
    },
    /// Tabulate a theory classifier over a 2-D parameter grid.
    Phase {
        #[arg(long)]
        classifier: String,
        /// JSON grid specification.
        #[arg(long)]
        grid: PathBuf,
        /// CSV output file.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Run a Monte Carlo sweep.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads; 0 uses all cores.
        #[arg(long, env = "CORRNET_JOBS", default_value_t = 0)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read_text(p: &Path) -> Result<String> {
    fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))
}

fn emit_report(report: &Value, path: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(report)? + "\n";
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn parse_k(k: &str, inst: &CorrelatedInstance) -> Result<usize> {
    if k == "auto" {
        let ModelParams::Ccsbm(p) = &inst.params else {
            bail!("k-core matching needs a ccsbm instance");
        };
        return Ok(select_k(p.n, p.p, p.s)?);
    }
    k.parse().with_context(|| format!("--k expects an integer or `auto`, got `{k}`"))
}

fn generate(model: Model, params: &Path, seed: u64, stream: u64, out: &Path) -> Result<()> {
    let text = read_text(params)?;
    let params = match model {
        Model::Cgmm => ModelParams::Cgmm(serde_json::from_str::<CgmmParams>(&text)?),
        Model::Ccsbm => ModelParams::Ccsbm(serde_json::from_str::<CcsbmParams>(&text)?),
    };
    let inst = sample(&params, Seed::new(seed, stream))?;
    write_instance(&inst, out)?;
    eprintln!("wrote n={} instance to {}", inst.n(), out.display());
    Ok(())
}

fn write_pairs(m: &PartialMatching, path: &Path) -> Result<()> {
    let mut s = String::new();
    for (i, j) in m.pairs() {
        s.push_str(&format!("{i} {j}\n"));
    }
    fs::write(path, s)?;
    Ok(())
}

fn match_report(res: &MatchResult, k: Option<usize>, truth: Option<&CorrelatedInstance>) -> Value {
    let mut r = json!({
        "mode": res.mode,
        "kcore_mode": res.kcore_mode,
        "k": k,
        "matched": res.matching.len(),
        "cost": res.total_cost,
        "kcore_size": res.kcore_size,
        "unmatched_after_kcore": res.unmatched_after_kcore(),
    });
    if let Some(inst) = truth {
        let wrong = res.matching.mismatches(&inst.truth_perm);
        r["mismatches"] = json!(wrong);
        r["success"] = json!(res.is_exact(&inst.truth_perm));
    }
    r
}

#[allow(clippy::too_many_arguments)]
fn run_match(
    input: &Path,
    method: Method,
    k: &str,
    mode: Mode,
    oracle: bool,
    out: Option<&Path>,
    report: Option<&Path>,
) -> Result<()> {
    let files = read_instance_files(input)?;
    let (res, k_used, inst) = if method == Method::MinDistance && files.manifest.is_none() {
        (min_distance_match(&files.db1, &files.db2)?, None, None)
    } else {
        let inst = files.into_instance()?;
        let (res, k_used) = match method {
            Method::MinDistance => (min_distance_match(&inst.db1, &inst.db2)?, None),
            Method::Kcore => {
                let k = parse_k(k, &inst)?;
                (kcore_match(&inst, k, mode.into())?, Some(k))
            }
            Method::TwoStep => {
                let k = parse_k(k, &inst)?;
                (two_step_match(&inst, k, mode.into())?, Some(k))
            }
        };
        (res, k_used, Some(inst))
    };
    let mut rep = match_report(&res, k_used, inst.as_ref());
    if oracle {
        let budget = OracleBudget::default();
        let Some(inst) = inst.as_ref() else {
            bail!("--oracle needs an instance with a manifest");
        };
        rep["oracle"] = match (method, k_used) {
            (Method::MinDistance, _) => {
                let (_, best) = brute_force_min_distance(&inst.db1, &inst.db2, &budget)?;
                let cost = res.total_cost.unwrap_or(f64::NAN);
                json!({"brute_force_cost": best, "agrees": (cost - best).abs() <= 1e-12 * best.abs().max(1.0)})
            }
            (_, Some(k)) => {
                let (Some(g1), Some(g2)) = (&inst.graph1, &inst.graph2) else {
                    bail!("instance has no graphs");
                };
                let best = brute_force_kcore_estimator(g1, g2, k, &budget)?;
                json!({"brute_force_kcore_size": best.len(), "agrees": Some(best.len()) == res.kcore_size})
            }
            _ => Value::Null,
        };
    }
    if let Some(p) = out {
        match res.permutation() {
            Some(pi) if method != Method::Kcore => write_permutation(&pi, fs::File::create(p)?)?,
            _ => write_pairs(&res.matching, p)?,
        }
    }
    emit_report(&rep, report)
}

#[allow(clippy::too_many_arguments)]
fn run_recover(
    input: &Path,
    use_pair: bool,
    match_method: PairMethod,
    k: &str,
    mode: Mode,
    params: Params,
    report: Option<&Path>,
    labels_out: Option<&Path>,
) -> Result<()> {
    let inst = read_instance(input)?;
    let k = if use_pair && matches!(match_method, PairMethod::TwoStep) {
        Some(parse_k(k, &inst)?)
    } else {
        None
    };
    let opts = PipelineOptions {
        use_pair,
        match_method: match match_method {
            PairMethod::Truth => PairMatch::Truth,
            PairMethod::MinDistance => PairMatch::MinDistance,
            PairMethod::TwoStep => PairMatch::TwoStep,
        },
        kcore_mode: mode.into(),
        k,
        params: match params {
            Params::Truth => ParamSource::Truth,
            Params::PlugIn => ParamSource::PlugIn,
        },
        power: None,
    };
    let res = recover_pipeline(&inst, &opts)?;
    let cell = corrnet::harness::Cell {
        id: 0,
        params: inst.params.clone(),
    };
    let (region, flags) = cell.theory(&Default::default())?;
    let rep = json!({
        "use_pair": use_pair,
        "method": res.recovery.method,
        "agreement": res.recovery.agreement,
        "success": res.recovery.exact,
        "iterations": res.recovery.iterations,
        "power_iterations": res.recovery.power_iterations,
        "matched_exactly": res.matched_exactly,
        "matching": res.matching.as_ref().map(|m| match_report(m, k, Some(&inst))),
        "theory": {"region": region, "flags": flags},
    });
    if let Some(p) = labels_out {
        let s: String = res
            .recovery
            .labels_hat
            .as_slice()
            .iter()
            .map(|l| format!("{l}\n"))
            .collect();
        fs::write(p, s)?;
    }
    emit_report(&rep, report)
}

fn run_phase(classifier: &str, grid: &Path, out: &Path, svg: Option<&Path>) -> Result<()> {
    let id: ClassifierId = classifier.parse()?;
    let spec: GridSpec = serde_json::from_str(&read_text(grid)?)?;
    let table = phase_grid(&spec, id)?;
    write_phase_csv(&table, fs::File::create(out)?)?;
    if let Some(p) = svg {
        fs::write(p, render_phase_svg(&table))?;
    }
    Ok(())
}

fn run_sweep_cmd(config: &Path, jobs: usize, out: Option<&Path>) -> Result<ExitCode> {
    let cfg = ExperimentConfig::from_json(&read_text(config)?)?;
    let dir = match (out, &cfg.out) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(p)) => p.clone(),
        (None, None) => bail!("no output directory: pass --out or set `out` in the config"),
    };
    let res = run_sweep(&cfg, jobs)?;
    write_sweep(&res, &dir)?;
    for s in &res.summary {
        let rate = |r: Option<corrnet::harness::RateSummary>| {
            r.map(|r| format!("{}/{}", r.successes, r.trials))
                .unwrap_or_else(|| "-".into())
        };
        eprintln!(
            "cell {:>3}: match {} single {} pair {} failed {}",
            s.cell,
            rate(s.matched),
            rate(s.single),
            rate(s.pair),
            s.failed
        );
    }
    if res.any_cell_failed_entirely() {
        eprintln!("at least one cell failed in every trial");
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Cmd::Generate {
            model,
            params,
            seed,
            stream,
            out,
        } => generate(model, &params, seed, stream, &out)?,
        Cmd::Match {
            input,
            method,
            k,
            mode,
            oracle,
            out,
            report,
        } => run_match(&input, method, &k, mode, oracle, out.as_deref(), report.as_deref())?,
        Cmd::Recover {
            input,
            use_pair,
            match_method,
            k,
            mode,
            params,
            report,
            labels_out,
        } => run_recover(
            &input,
            use_pair,
            match_method,
            &k,
            mode,
            params,
            report.as_deref(),
            labels_out.as_deref(),
        )?,
        Cmd::Phase {
            classifier,
            grid,
            out,
            svg,
        } => run_phase(&classifier, &grid, &out, svg.as_deref())?,
        Cmd::Sweep { config, jobs, out } => return run_sweep_cmd(&config, jobs, out.as_deref()),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
