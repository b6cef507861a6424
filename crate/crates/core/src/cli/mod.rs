//! Command-line front end.
//!
//! Subcommands print one JSON document to stdout (or `--output`). Exit
//! statuses: 0 success, 1 numerical failure, 2 assumption violation,
//! 3 configuration or input error, 4 inconsistent Maslov box, 5 unsupported
//! feature.
//!
//! CSV files:
//! - `curves --out`: `lambda, strand_index, x_star`
//! - `box --csv`: `shelf, maslov, crossing_params` (params joined by `;`)
//! - `count --path-csv`: `param, phase_1..phase_n, lagrangian_defect`
//! - `oracle --scan-csv`: `lambda, sign, log_abs_det`

mod io;
pub mod schema;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub use io::write_atomically;
pub use schema::{load_problem, parse_problem, ProblemSpec};

use crate::error::{Error, Result};
use crate::frameflow::IntegratorOptions;
use crate::maslov::{eigenvalue_curves, left_shelf_path, maslov_box, spectral_count, CurveTable, ShelfResult};
use crate::oracle::{self, OracleCount};
use crate::pencil::{check_problem, default_sample_grid, lambda_max, PencilProblem};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "PENCIL_MASLOV_THREADS";

#[derive(Debug, Parser)]
#[command(name = "pencil-maslov", version, about = "Count unstable real eigenvalues of quadratic Sturm-Liouville pencils")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate the standing assumptions of a problem.
    Check(CheckArgs),
    /// Count real eigenvalues above λ by the Maslov index.
    Count(CountArgs),
    /// Tabulate conjugate points x*(λ) over a λ grid.
    Curves(CurvesArgs),
    /// Compute all four shelves of the Maslov box.
    Box(BoxArgs),
    /// Count real eigenvalues with the finite-difference oracle.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
pub struct ProblemArgs {
    /// Built-in name (example1..example4, constant) or path to a JSON problem file.
    #[arg(long)]
    pub problem: String,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IntegratorArgs {
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub abs_tol: Option<f64>,
    #[arg(long)]
    pub max_step: Option<f64>,
    /// Seed point standing in for -∞.
    #[arg(long, allow_hyphen_values = true)]
    pub x_min: Option<f64>,
    /// Point standing in for +∞ on whole-line problems.
    #[arg(long)]
    pub x_max: Option<f64>,
    /// Run even if an assumption check fails.
    #[arg(long)]
    pub force: bool,
}

impl IntegratorArgs {
    fn options(&self) -> Result<IntegratorOptions> {
        let mut o = IntegratorOptions::default();
        if let Some(v) = self.rel_tol {
            o.rel_tol = v;
        }
        if let Some(v) = self.abs_tol {
            o.abs_tol = v;
        }
        if let Some(v) = self.max_step {
            o.max_step = v;
        }
        if let Some(x) = self.x_min {
            if !(x.is_finite() && x < 0.0) {
                return Err(Error::Config(format!("--x-min must be negative, got {x}")));
            }
            o.x_min = Some(x);
        }
        if let Some(x) = self.x_max {
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::Config(format!("--x-max must be positive, got {x}")));
            }
            o.x_max = Some(x);
        }
        o.validate()?;
        Ok(o)
    }
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
}

#[derive(Debug, Args)]
pub struct CountArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub integrator: IntegratorArgs,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    /// Also run the finite-difference oracle and report its count.
    #[arg(long)]
    pub oracle: bool,
    /// Write the eigenphases along the left-shelf path to this CSV.
    #[arg(long)]
    pub path_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CurvesArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub integrator: IntegratorArgs,
    #[arg(long, default_value_t = 0.0)]
    pub lambda_min: f64,
    /// Defaults to the top-shelf height λ∞.
    #[arg(long)]
    pub lambda_max: Option<f64>,
    /// Points of the uniform grid before refinement.
    #[arg(long, default_value_t = 50)]
    pub points: usize,
    /// Bisection rounds between neighbours whose strand counts differ.
    #[arg(long, default_value_t = 4)]
    pub refine: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BoxArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub integrator: IntegratorArgs,
    #[arg(long, default_value_t = 0.0)]
    pub lambda_lo: f64,
    /// Defaults to λ∞.
    #[arg(long)]
    pub lambda_hi: Option<f64>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    /// Top of the scanned range; defaults to max(λ∞, λ).
    #[arg(long)]
    pub lambda_hi: Option<f64>,
    /// Multiply the default number of grid intervals.
    #[arg(long, default_value_t = 1)]
    pub refine: usize,
    /// Points of the determinant scan written by --scan-csv.
    #[arg(long, default_value_t = oracle::DEFAULT_SCAN_STEPS)]
    pub steps: usize,
    /// Repeat with twice the grid intervals and report whether the count moved.
    #[arg(long)]
    pub audit: bool,
    #[arg(long)]
    pub scan_csv: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

/// Parse `args` (program name first), run, and return the exit status.
pub fn run_from<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    return 0;
                }
                _ => 3,
            };
            let _ = write!(err, "{}", e.render());
            return code;
        }
    };
    match run(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn emit<T: Serialize>(value: &T, output: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    match output {
        Some(path) => write_atomically(path, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)?;
            Ok(())
        }),
        None => {
            serde_json::to_writer_pretty(&mut *out, value)?;
            writeln!(out)?;
            Ok(())
        }
    }
}

fn check_lambda_arg(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::Config(format!("--{name} must be finite and non-negative, got {v}")));
    }
    Ok(())
}

/// Refuse to run on a problem with a violated assumption unless forced.
fn gate(p: &PencilProblem, force: bool, err: &mut dyn Write) -> Result<()> {
    let report = check_problem(p)?;
    if report.ok() {
        return Ok(());
    }
    let failed: Vec<String> = report
        .checks
        .iter()
        .filter(|c| c.status == crate::pencil::CheckStatus::Violated)
        .map(|c| format!("{} ({})", c.name, c.detail))
        .collect();
    if force {
        writeln!(err, "warning: continuing despite violated assumptions: {}", failed.join("; "))?;
        return Ok(());
    }
    Err(Error::Assumption(format!("{}; pass --force to run anyway", failed.join("; "))))
}

fn lambda_inf(p: &PencilProblem) -> Result<f64> {
    lambda_max(p, &default_sample_grid(p)?)
}

fn run(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Check(a) => cmd_check(a, out),
        Command::Count(a) => cmd_count(a, out, err),
        Command::Curves(a) => cmd_curves(a, out, err),
        Command::Box(a) => cmd_box(a, out, err),
        Command::Oracle(a) => cmd_oracle(a, out, err),
    }
}

#[derive(Serialize)]
struct CheckOutput {
    problem: String,
    domain: &'static str,
    ok: bool,
    #[serde(flatten)]
    report: crate::pencil::AssumptionReport,
}

fn cmd_check(a: CheckArgs, out: &mut dyn Write) -> Result<i32> {
    let p = load_problem(&a.problem.problem)?;
    let report = check_problem(&p)?;
    let ok = report.ok();
    emit(&CheckOutput { problem: p.name.clone(), domain: p.domain.kind(), ok, report }, a.problem.output.as_deref(), out)?;
    Ok(if ok { 0 } else { 2 })
}

fn cmd_count(a: CountArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    check_lambda_arg("lambda", a.lambda)?;
    let opts = a.integrator.options()?;
    let p = load_problem(&a.problem.problem)?;
    gate(&p, a.integrator.force, err)?;
    let mut report = spectral_count(&p, a.lambda, &opts)?;
    if let Some(path) = &a.path_csv {
        left_shelf_path(&p, a.lambda, &opts)?.write_csv(path)?;
    }
    let mut code = 0;
    if a.oracle {
        let oc = oracle::oracle_count(&p, a.lambda, 1)?;
        if oc.count != report.n {
            writeln!(err, "warning: oracle counts {} eigenvalues, Maslov count is {}", oc.count, report.n)?;
            code = 1;
        }
        report.oracle_count = Some(oc.count);
    }
    emit(&report, a.problem.output.as_deref(), out)?;
    Ok(code)
}

#[derive(Serialize)]
struct CurvesOutput<'a> {
    problem: String,
    lambda_min: f64,
    lambda_max: f64,
    grid_points: usize,
    rows: usize,
    max_strands: usize,
    strands_at_lambda_min: usize,
    gaps: &'a [(f64, String)],
    csv: String,
}

fn cmd_curves(a: CurvesArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    check_lambda_arg("lambda-min", a.lambda_min)?;
    let opts = a.integrator.options()?;
    let p = load_problem(&a.problem.problem)?;
    gate(&p, a.integrator.force, err)?;
    let hi = match a.lambda_max {
        Some(v) => v,
        None => lambda_inf(&p)?,
    };
    check_lambda_arg("lambda-max", hi)?;
    if hi < a.lambda_min || a.points < 2 {
        return Err(Error::Config("need lambda-max ≥ lambda-min and at least 2 points".into()));
    }
    let step = (hi - a.lambda_min) / (a.points - 1) as f64;
    let grid: Vec<f64> = (0..a.points).map(|k| a.lambda_min + step * k as f64).collect();
    let (grid, table) = refine_curves(&p, grid, a.refine, &opts)?;
    table.write_csv(&a.out)?;
    let mut lambdas: Vec<f64> = table.points.iter().map(|q| q.lambda).collect();
    lambdas.dedup();
    let summary = CurvesOutput {
        problem: p.name.clone(),
        lambda_min: a.lambda_min,
        lambda_max: hi,
        grid_points: grid.len(),
        rows: table.points.len(),
        max_strands: lambdas.iter().map(|&l| table.strands_at(l)).max().unwrap_or(0),
        strands_at_lambda_min: table.strands_at(a.lambda_min),
        gaps: &table.gaps,
        csv: a.out.display().to_string(),
    };
    emit(&summary, a.problem.output.as_deref(), out)?;
    Ok(0)
}

/// Insert midpoints between neighbours with different strand counts, `rounds` times.
fn refine_curves(
    p: &PencilProblem,
    grid: Vec<f64>,
    rounds: usize,
    opts: &IntegratorOptions,
) -> Result<(Vec<f64>, CurveTable)> {
    let mut table = eigenvalue_curves(p, &grid, opts)?;
    let mut grid = grid;
    for _ in 0..rounds {
        let mids: Vec<f64> = grid
            .windows(2)
            .filter(|w| table.strands_at(w[0]) != table.strands_at(w[1]))
            .map(|w| 0.5 * (w[0] + w[1]))
            .collect();
        if mids.is_empty() {
            break;
        }
        let extra = eigenvalue_curves(p, &mids, opts)?;
        table.points.extend(extra.points);
        table.gaps.extend(extra.gaps);
        grid.extend(mids);
        grid.sort_by(f64::total_cmp);
    }
    table.points.sort_by(|a, b| a.lambda.total_cmp(&b.lambda).then(a.strand_index.cmp(&b.strand_index)));
    table.gaps.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok((grid, table))
}

fn write_box_csv(path: &Path, shelves: &[ShelfResult]) -> Result<()> {
    write_atomically(path, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["shelf", "maslov", "crossing_params"])?;
        for s in shelves {
            let params: Vec<String> = s.crossings.iter().map(|c| format!("{:.12e}", c.param)).collect();
            let name = serde_json::to_value(s.shelf)?.as_str().unwrap_or_default().to_string();
            out.write_record([name, s.maslov.to_string(), params.join(";")])?;
        }
        out.flush()?;
        Ok(())
    })
}

fn cmd_box(a: BoxArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    check_lambda_arg("lambda-lo", a.lambda_lo)?;
    let opts = a.integrator.options()?;
    let p = load_problem(&a.problem.problem)?;
    gate(&p, a.integrator.force, err)?;
    let hi = match a.lambda_hi {
        Some(v) => v,
        None => lambda_inf(&p)?,
    };
    check_lambda_arg("lambda-hi", hi)?;
    let report = maslov_box(&p, a.lambda_lo, hi, &opts)?;
    if let Some(path) = &a.csv {
        write_box_csv(path, &report.shelf_results)?;
    }
    emit(&report, a.problem.output.as_deref(), out)?;
    Ok(0)
}

#[derive(Serialize)]
struct OracleOutput {
    problem: String,
    lambda: f64,
    #[serde(rename = "N")]
    n: usize,
    oracle_count: usize,
    method: &'static str,
    consistent: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    refinement_stable: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    refined_count: Option<usize>,
    detail: OracleCount,
}

fn cmd_oracle(a: OracleArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    check_lambda_arg("lambda", a.lambda)?;
    if a.refine == 0 || a.steps < 2 {
        return Err(Error::Config("--refine must be at least 1 and --steps at least 2".into()));
    }
    let p = load_problem(&a.problem.problem)?;
    gate(&p, a.force, err)?;
    let hi = match a.lambda_hi {
        Some(v) => v,
        None => lambda_inf(&p)?.max(a.lambda),
    };
    check_lambda_arg("lambda-hi", hi)?;
    if hi < a.lambda {
        return Err(Error::Config("--lambda-hi must not be below --lambda".into()));
    }
    let (x0, x1) = oracle::oracle_interval(&p)?;
    let base = oracle::default_intervals(&p, x0, x1, hi)?;
    let run = |factor: usize| -> Result<(oracle::DiscretizedPencil, OracleCount)> {
        let dp = oracle::discretize(&p, x0, x1, base * factor)?;
        let c = oracle::count_real_eigs(&dp, a.lambda, hi)?;
        Ok((dp, c))
    };
    let (dp, count) = run(a.refine)?;
    if let Some(path) = &a.scan_csv {
        oracle::write_scan_csv(&dp, a.lambda, hi, a.steps, path)?;
    }
    let refined = if a.audit { Some(run(2 * a.refine)?.1.count) } else { None };
    let consistent = count.consistent();
    if !consistent {
        writeln!(err, "warning: root count {} differs from inertia count {}", count.count, count.inertia_count)?;
    }
    let result = OracleOutput {
        problem: p.name.clone(),
        lambda: a.lambda,
        n: count.count,
        oracle_count: count.count,
        method: count.method,
        consistent,
        refinement_stable: refined.map(|r| r == count.count),
        refined_count: refined,
        detail: count,
    };
    emit(&result, a.problem.output.as_deref(), out)?;
    Ok(if consistent && result.refinement_stable != Some(false) { 0 } else { 1 })
}

/// Configure the global rayon pool from `PENCIL_MASLOV_THREADS`, if set.
pub fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot configure thread pool: {e}")))
}
