//! Command-line driver.
//!
//! Every subcommand reads a [`RunConfig`], writes one or more CSV files to the
//! output directory (or the main table to stdout when none is given) and maps
//! its outcome to an exit code:
//!
//! | subcommand          | 0                   | 2            | 3             | 4            |
//! |---------------------|---------------------|--------------|---------------|--------------|
//! | `solve`             | Converged           | Diverged     | MaxIterations |              |
//! | `check-solvability` | StrictlySolvable    | Unsolvable   |               | BoundaryCase |
//! | `orlicz-check`      | all checks pass     | a check fails|               |              |
//! | `threshold-sweep`   | verdicts agree      | disagreement |               |              |
//! | `stability-sweep`   | `C_fit` bounded     | unbounded or unconverged | |              |
//! | `mesh-dump`         | written             |              |               |              |
//!
//! Configuration and I/O errors exit with 1.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::domain::FieldPair;
use crate::estimates::{self, EstimateError, StabilityCheck};
use crate::forms::{Mode, ProblemSpec};
use crate::orlicz::{self, NFunction, OrliczError};
use crate::resonance::{self, Classification, ResonanceError, SolvabilityVerdict};
use crate::solver::{self, SolveError, SolveReport, Verdict};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_FAIL: i32 = 2;
pub const EXIT_MAX_ITER: i32 = 3;
pub const EXIT_BOUNDARY: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "wentzell",
    version,
    about = "Nonlinear elliptic problems with Wentzell-Robin boundary conditions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Configuration file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output.path`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for random data; overrides `solver.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Suppress progress messages.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Solve the configured problem.
    Solve,
    /// Classify the data mean against the solvability interval.
    CheckSolvability,
    /// Probe Δ₂, ∇₂ and the Young inequality for a nonlinearity.
    OrliczCheck,
    /// Sweep the data mean across the solvability threshold.
    ThresholdSweep,
    /// Paired solves with shrinking data perturbations.
    StabilitySweep,
    /// Write the mesh in text form.
    MeshDump,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Resonance(#[from] ResonanceError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Orlicz(#[from] OrliczError),
    #[error("{0}")]
    Usage(String),
    #[error("cannot write {path}: {msg}")]
    Io { path: PathBuf, msg: String },
}

/// Parse arguments, run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    configure_threads();
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("WENTZELL_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        // A second call (e.g. from tests) keeps the existing pool.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

struct Output {
    dir: Option<PathBuf>,
    quiet: bool,
}

impl Output {
    /// Write `name` into the output directory, or print it when there is no
    /// directory and `primary` is set.
    fn emit(&self, name: &str, content: &str, primary: bool) -> Result<(), CliError> {
        match &self.dir {
            Some(dir) => {
                let io = |e: std::io::Error, p: &Path| CliError::Io {
                    path: p.to_path_buf(),
                    msg: e.to_string(),
                };
                std::fs::create_dir_all(dir).map_err(|e| io(e, dir))?;
                let path = dir.join(name);
                std::fs::write(&path, content).map_err(|e| io(e, &path))
            }
            None => {
                if primary {
                    print!("{content}");
                }
                Ok(())
            }
        }
    }

    fn note(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("--config PATH is required".into()))?;
    let cfg = RunConfig::load(path)?;
    let seed = cli.seed.unwrap_or(cfg.solver.seed);
    let out = Output {
        dir: cli.out.clone().or_else(|| cfg.output.path.clone()),
        quiet: cli.quiet || cfg.output.verbosity == 0,
    };
    match cli.command {
        Command::Solve => cmd_solve(&cfg, seed, &out),
        Command::CheckSolvability => cmd_check_solvability(&cfg, seed, &out),
        Command::OrliczCheck => cmd_orlicz_check(&cfg, &out),
        Command::ThresholdSweep => cmd_threshold_sweep(&cfg, &out),
        Command::StabilitySweep => cmd_stability_sweep(&cfg, seed, &out),
        Command::MeshDump => {
            let dom = cfg.build_domain()?;
            out.emit("mesh.txt", &dom.dump(), true)?;
            Ok(EXIT_OK)
        }
    }
}

fn solve_any(spec: &ProblemSpec, cfg: &RunConfig) -> Result<SolveReport, SolveError> {
    let opts = cfg.solver_options();
    match spec.mode() {
        Mode::Perturbed => solver::solve_perturbed(spec, &opts),
        Mode::Resonant => solver::solve_resonant(spec, &opts),
    }
}

pub fn verdict_exit_code(v: Verdict) -> i32 {
    match v {
        Verdict::Converged => EXIT_OK,
        Verdict::Diverged => EXIT_FAIL,
        Verdict::MaxIterations => EXIT_MAX_ITER,
    }
}

pub fn classification_exit_code(c: Classification) -> i32 {
    match c {
        Classification::StrictlySolvable => EXIT_OK,
        Classification::Unsolvable => EXIT_FAIL,
        Classification::BoundaryCase => EXIT_BOUNDARY,
    }
}

pub fn solution_csv(spec: &ProblemSpec, u: &FieldPair) -> String {
    let mut s = String::from("x,y,value\n");
    for (c, v) in spec.domain().coords().iter().zip(u.values()) {
        let _ = writeln!(s, "{:.16e},{:.16e},{:.16e}", c[0], c[1], v);
    }
    s
}

pub fn report_csv(r: &SolveReport) -> String {
    format!(
        "verdict,iterations,final_residual_inf,final_energy,stalled\n{},{},{:.16e},{:.16e},{}\n",
        r.verdict, r.iterations, r.final_residual_inf, r.final_energy, r.stalled as u8
    )
}

pub fn trace_csv(r: &SolveReport) -> String {
    let mut s = String::from("iteration,energy,residual_inf,step\n");
    for (i, t) in r.trace.iter().enumerate() {
        let _ = writeln!(
            s,
            "{i},{:.16e},{:.16e},{:.16e}",
            t.energy, t.residual_inf, t.step
        );
    }
    s
}

fn cmd_solve(cfg: &RunConfig, seed: u64, out: &Output) -> Result<i32, CliError> {
    let spec = cfg.build_problem(seed)?;
    let report = solve_any(&spec, cfg)?;
    out.note(&format!(
        "{}: {} iterations, residual {:.3e}, energy {:.12e}",
        report.verdict, report.iterations, report.final_residual_inf, report.final_energy
    ));
    out.emit(
        "solution.csv",
        &solution_csv(&spec, &report.last_iterate),
        true,
    )?;
    out.emit("report.csv", &report_csv(&report), false)?;
    out.emit("trace.csv", &trace_csv(&report), false)?;
    Ok(verdict_exit_code(report.verdict))
}

fn verdict_csv(v: &SolvabilityVerdict) -> String {
    format!("{}\n{}\n", SolvabilityVerdict::CSV_HEADER, v.csv_row())
}

fn cmd_check_solvability(cfg: &RunConfig, seed: u64, out: &Output) -> Result<i32, CliError> {
    let spec = cfg.build_problem(seed)?;
    let v = resonance::solvability(&spec)?;
    out.note(&format!(
        "mean {:.6e} against {}: {}",
        v.mean_total, v.interval, v.classification
    ));
    out.emit("solvability.csv", &verdict_csv(&v), true)?;
    Ok(classification_exit_code(v.classification))
}

/// Results of the Orlicz probes for one nonlinearity.
#[derive(Debug, Clone)]
pub struct OrliczSummary {
    pub name: String,
    pub delta2: orlicz::Delta2Report,
    pub declared_c2: Option<f64>,
    pub nabla2_holds: Option<bool>,
    pub nabla2_c: Option<f64>,
    /// Largest `st - Λ(s) - Λ̃(t)` over the probe pairs (must be <= 0).
    pub young_excess: f64,
    /// Largest relative defect of equality at `t = α(s)`.
    pub young_equality_error: f64,
}

impl OrliczSummary {
    pub const CSV_HEADER: &'static str =
        "name,delta2_satisfied,delta2_constant,declared_c2,sandwich_lower,\
sandwich_upper_holds,nabla2_holds,nabla2_c,young_excess,young_equality_error";

    pub fn passed(&self) -> bool {
        let declared_ok = self
            .declared_c2
            .is_none_or(|c| self.delta2.constant <= c * (1.0 + 1e-12));
        self.delta2.satisfied
            && declared_ok
            && self.nabla2_holds.unwrap_or(true)
            && self.young_excess <= 1e-8
            && self.young_equality_error <= 1e-8
    }

    pub fn csv_row(&self) -> String {
        let opt = |x: Option<f64>| x.map_or(String::from("NA"), |v| format!("{v:.16e}"));
        let flag = |b: Option<bool>| b.map_or(String::from("NA"), |v| (v as u8).to_string());
        format!(
            "{},{},{:.16e},{},{:.16e},{},{},{},{:.16e},{:.16e}",
            self.name,
            self.delta2.satisfied as u8,
            self.delta2.constant,
            opt(self.declared_c2),
            self.delta2.sandwich_lower,
            self.delta2.sandwich_upper_holds as u8,
            flag(self.nabla2_holds),
            opt(self.nabla2_c),
            self.young_excess,
            self.young_equality_error
        )
    }
}

pub fn orlicz_summary(nf: &NFunction, grid: &[f64]) -> Result<OrliczSummary, OrliczError> {
    let delta2 = orlicz::check_delta2(nf, grid)?;
    let (nabla2_holds, nabla2_c) = match orlicz::check_nabla2_from_delta2(nf, grid) {
        Ok(r) => (Some(r.holds), Some(r.c_used)),
        Err(OrliczError::MissingDelta2Constant) => (None, None),
        Err(e) => return Err(e),
    };
    let probes = orlicz::log_grid(1e-2, 10.0, 13);
    let mut young_excess = f64::NEG_INFINITY;
    let mut young_equality_error = 0.0_f64;
    for &s in &probes {
        let ls = nf.lambda(s);
        for &t in &probes {
            let rhs = ls + nf.lambda_tilde(t);
            if rhs.is_finite() {
                young_excess = young_excess.max((s * t - rhs) / (1.0 + rhs.abs()));
            }
        }
        let a = nf.alpha(s);
        let rhs = ls + nf.lambda_tilde(a);
        if a.is_finite() && rhs.is_finite() {
            young_equality_error = young_equality_error.max((s * a - rhs).abs() / (1.0 + s * a));
        }
    }
    Ok(OrliczSummary {
        name: nf.name().to_string(),
        delta2,
        declared_c2: nf.delta2_constant(),
        nabla2_holds,
        nabla2_c,
        young_excess,
        young_equality_error,
    })
}

fn cmd_orlicz_check(cfg: &RunConfig, out: &Output) -> Result<i32, CliError> {
    let spec = cfg.orlicz.as_ref().unwrap_or(&cfg.problem.alpha1);
    let nf = cfg.build_nonlinearity(spec)?;
    let summary = orlicz_summary(&nf, &cfg.probe_grid())?;
    out.note(&format!(
        "{}: Δ₂ {} (C = {:.6e}), Young excess {:.3e}",
        summary.name,
        if summary.delta2.satisfied {
            "holds"
        } else {
            "fails"
        },
        summary.delta2.constant,
        summary.young_excess
    ));
    let csv = format!("{}\n{}\n", OrliczSummary::CSV_HEADER, summary.csv_row());
    out.emit("orlicz.csv", &csv, true)?;
    Ok(if summary.passed() { EXIT_OK } else { EXIT_FAIL })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdRow {
    pub multiplier: f64,
    pub classification: Classification,
    pub verdict: Verdict,
    pub iterations: usize,
    pub u_inf: f64,
}

impl ThresholdRow {
    pub const CSV_HEADER: &'static str = "m,verdict,solver_verdict,iterations,u_inf";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.16e},{},{},{},{:.16e}",
            self.multiplier, self.classification, self.verdict, self.iterations, self.u_inf
        )
    }

    /// Strictly solvable means converge, unsolvable means diverge.
    pub fn consistent(&self) -> bool {
        match self.classification {
            Classification::StrictlySolvable => self.verdict == Verdict::Converged,
            Classification::Unsolvable => self.verdict == Verdict::Diverged,
            Classification::BoundaryCase => self.verdict != Verdict::Diverged,
        }
    }
}

/// Data with `∫f dx + ∫g dσ/b = mean`, split by `share` between interior and
/// boundary, each constant.
pub fn threshold_data(base: &ProblemSpec, mean: f64, share: f64) -> ProblemSpec {
    let (l1, l2) = base.domain().measures();
    base.clone()
        .with_constant_data(share * mean / l1, (1.0 - share) * mean / l2)
}

pub fn threshold_sweep(cfg: &RunConfig) -> Result<Vec<ThresholdRow>, CliError> {
    let base = cfg.build_problem(cfg.solver.seed)?;
    if base.mode() != Mode::Resonant {
        return Err(CliError::Usage(
            "threshold-sweep needs a resonant problem".into(),
        ));
    }
    let (l1, l2) = base.domain().measures();
    let interval = resonance::solvability_interval(l1, l2, base.alpha1(), base.alpha2());
    if !interval.is_bounded() {
        return Err(CliError::Usage(format!(
            "solvability interval {interval} is unbounded"
        )));
    }
    let half = 0.5 * interval.width();
    let opts = cfg.solver_options();
    cfg.sweep
        .multipliers
        .par_iter()
        .map(|&m| {
            let spec = threshold_data(&base, m * half, cfg.sweep.interior_share);
            let v = resonance::solvability(&spec)?;
            let r = solver::solve_resonant(&spec, &opts)?;
            Ok(ThresholdRow {
                multiplier: m,
                classification: v.classification,
                verdict: r.verdict,
                iterations: r.iterations,
                u_inf: r.max_abs(),
            })
        })
        .collect()
}

pub fn threshold_csv(rows: &[ThresholdRow]) -> String {
    let mut s = format!("{}\n", ThresholdRow::CSV_HEADER);
    for r in rows {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

fn cmd_threshold_sweep(cfg: &RunConfig, out: &Output) -> Result<i32, CliError> {
    if cfg.sweep.multipliers.is_empty() {
        return Err(CliError::Usage("sweep.multipliers is empty".into()));
    }
    let rows = threshold_sweep(cfg)?;
    for r in &rows {
        out.note(&format!(
            "m = {:+.3}: {} / {} after {} iterations",
            r.multiplier, r.classification, r.verdict, r.iterations
        ));
    }
    out.emit("threshold_sweep.csv", &threshold_csv(&rows), true)?;
    Ok(if rows.iter().all(ThresholdRow::consistent) {
        EXIT_OK
    } else {
        EXIT_FAIL
    })
}

/// Data perturbation `(f + ε, g + ε)`.
pub fn perturb_data(base: &ProblemSpec, eps: f64) -> ProblemSpec {
    let f = base.f().iter().map(|v| v + eps).collect();
    let g = base.g().iter().map(|v| v + eps).collect();
    base.clone().with_data(f, g).expect("sizes unchanged")
}

pub fn stability_sweep(cfg: &RunConfig, seed: u64) -> Result<Vec<(f64, StabilityCheck)>, CliError> {
    let base = cfg.build_problem(seed)?;
    let opts = cfg.solver_options();
    let (p1, q1) = (cfg.sweep.p1, cfg.sweep.q1);
    cfg.sweep
        .epsilons
        .par_iter()
        .map(|&eps| {
            let other = perturb_data(&base, eps);
            Ok((
                eps,
                estimates::linf_stability_check(&base, &other, p1, q1, &opts)?,
            ))
        })
        .collect()
}

/// `max C_fit <= 100 · median C_fit`.
pub fn c_fit_bounded(fits: &[f64]) -> bool {
    if fits.is_empty() || fits.iter().any(|c| !c.is_finite()) {
        return false;
    }
    let mut sorted = fits.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    sorted[n - 1] <= 100.0 * median
}

fn cmd_stability_sweep(cfg: &RunConfig, seed: u64, out: &Output) -> Result<i32, CliError> {
    if cfg.sweep.epsilons.is_empty() {
        return Err(CliError::Usage("sweep.epsilons is empty".into()));
    }
    let rows = stability_sweep(cfg, seed)?;
    let mut csv = format!("{}\n", StabilityCheck::CSV_HEADER);
    for (eps, c) in &rows {
        csv.push_str(&c.csv_row(*eps));
        csv.push('\n');
        out.note(&format!(
            "eps = {eps:.3e}: lhs {:.6e}, C_fit {:.6e}",
            c.lhs, c.c_fit
        ));
    }
    out.emit("stability_sweep.csv", &csv, true)?;
    let converged = rows.iter().all(|(_, c)| {
        c.reports.0.verdict == Verdict::Converged && c.reports.1.verdict == Verdict::Converged
    });
    let fits: Vec<f64> = rows.iter().map(|(_, c)| c.c_fit).collect();
    Ok(if converged && c_fit_bounded(&fits) {
        EXIT_OK
    } else {
        EXIT_FAIL
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c_fit_bound_uses_median() {
        assert!(c_fit_bounded(&[1.0, 2.0, 3.0]));
        assert!(!c_fit_bounded(&[1.0, 1.0, 101.0]));
        assert!(!c_fit_bounded(&[]));
    }

    #[test]
    fn exit_code_tables() {
        assert_eq!(verdict_exit_code(Verdict::Converged), 0);
        assert_eq!(verdict_exit_code(Verdict::Diverged), 2);
        assert_eq!(verdict_exit_code(Verdict::MaxIterations), 3);
        assert_eq!(classification_exit_code(Classification::BoundaryCase), 4);
        assert_eq!(classification_exit_code(Classification::Unsolvable), 2);
    }

    #[test]
    fn orlicz_summaries() {
        let grid = orlicz::default_grid();
        let p = orlicz_summary(&NFunction::power(1.0, 2.0).unwrap(), &grid).unwrap();
        assert!(p.passed(), "{p:?}");
        assert_eq!(p.delta2.constant, 8.0);
        let a = orlicz_summary(&NFunction::arctan(), &grid).unwrap();
        assert!(a.passed(), "{a:?}");
        let e = NFunction::from_registry("exponential", &Default::default()).unwrap();
        assert!(!orlicz_summary(&e, &grid).unwrap().passed());
    }

    #[test]
    fn missing_config_is_a_usage_error() {
        assert_eq!(run(["wentzell", "solve"]), EXIT_CONFIG);
        assert_eq!(run(["wentzell", "bogus"]), EXIT_CONFIG);
    }
}
