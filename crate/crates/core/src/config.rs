//! Run configuration: a TOML document with `[domain]`, `[problem]`,
//! `[solver]`, `[output]`, `[sweep]` and `[orlicz]` sections.
//!
//! ```toml
//! [domain]
//! kind = "rectangle"
//! nx = 16
//! ny = 16
//! b = 1.0
//!
//! [problem]
//! p = 2.0
//! q = 2.0
//! rho = 1
//! mode = "resonant"
//! alpha1 = { name = "arctan" }
//! alpha2 = { name = "zero" }
//! data = { kind = "constant", f = 1.0, g = 0.0 }
//!
//! [solver]
//! tol = 1e-8
//! max_iter = 20000
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::domain::DiscreteDomain;
use crate::forms::{Mode, ProblemSpec};
use crate::orlicz::{log_grid, NFunction};
use crate::solver::{Method, SolverOptions};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}, column {column}: {msg}")]
    Parse {
        line: usize,
        column: usize,
        msg: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {msg}")]
    Io { path: PathBuf, msg: String },
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSection,
    #[serde(default)]
    pub problem: ProblemSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub sweep: SweepSection,
    pub orlicz: Option<NonlinearitySpec>,
    #[serde(default)]
    pub grid: GridSection,
    /// Directory that relative file names are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Interval,
    Rectangle,
}

/// `kind = "interval"` uses `n_cells`, `length`, `b_left`, `b_right`;
/// `kind = "rectangle"` uses `nx`, `ny`, `lx`, `ly` and a constant `b`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub kind: DomainKind,
    pub n_cells: Option<usize>,
    #[serde(default = "one")]
    pub length: f64,
    #[serde(default = "one")]
    pub b_left: f64,
    #[serde(default = "one")]
    pub b_right: f64,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    #[serde(default = "one")]
    pub lx: f64,
    #[serde(default = "one")]
    pub ly: f64,
    #[serde(default = "one")]
    pub b: f64,
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    #[serde(default = "two")]
    pub p: f64,
    #[serde(default = "two")]
    pub q: f64,
    #[serde(default = "default_rho")]
    pub rho: u8,
    #[serde(default)]
    pub mode: ModeName,
    #[serde(default = "zero_nonlinearity")]
    pub alpha1: NonlinearitySpec,
    #[serde(default = "zero_nonlinearity")]
    pub alpha2: NonlinearitySpec,
    #[serde(default)]
    pub data: DataSpec,
}

impl Default for ProblemSection {
    fn default() -> Self {
        ProblemSection {
            p: 2.0,
            q: 2.0,
            rho: 1,
            mode: ModeName::default(),
            alpha1: zero_nonlinearity(),
            alpha2: zero_nonlinearity(),
            data: DataSpec::default(),
        }
    }
}

fn default_rho() -> u8 {
    1
}

fn zero_nonlinearity() -> NonlinearitySpec {
    NonlinearitySpec {
        name: "zero".into(),
        file: None,
        params: BTreeMap::new(),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    #[default]
    Resonant,
    Perturbed,
}

impl From<ModeName> for Mode {
    fn from(m: ModeName) -> Self {
        match m {
            ModeName::Resonant => Mode::Resonant,
            ModeName::Perturbed => Mode::Perturbed,
        }
    }
}

/// A registry name with numeric parameters, or `name = "custom-table"` with a CSV
/// file of `t,alpha` rows.
#[derive(Debug, Clone, Deserialize)]
pub struct NonlinearitySpec {
    pub name: String,
    pub file: Option<PathBuf>,
    #[serde(flatten)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataKind {
    /// `f` and `g` constant.
    #[default]
    Constant,
    /// `f_file` and `g_file` with one value per line: nodal values of `f`,
    /// boundary values of `g` in boundary order.
    File,
    /// Independent uniform values in `[-amplitude, amplitude]`.
    Random,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    #[serde(default)]
    pub kind: DataKind,
    #[serde(default)]
    pub f: f64,
    #[serde(default)]
    pub g: f64,
    pub f_file: Option<PathBuf>,
    pub g_file: Option<PathBuf>,
    pub amplitude: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_ceiling")]
    pub divergence_ceiling: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub method: MethodName,
    #[serde(default = "default_memory")]
    pub memory: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            tol: default_tol(),
            max_iter: default_max_iter(),
            divergence_ceiling: default_ceiling(),
            seed: 0,
            method: MethodName::default(),
            memory: default_memory(),
        }
    }
}

fn default_tol() -> f64 {
    1e-8
}
fn default_max_iter() -> usize {
    20_000
}
fn default_ceiling() -> f64 {
    1e6
}
fn default_memory() -> usize {
    10
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    #[default]
    Lbfgs,
    Gradient,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Output directory.
    pub path: Option<PathBuf>,
    #[serde(default = "default_verbosity")]
    pub verbosity: u8,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            path: None,
            verbosity: default_verbosity(),
        }
    }
}

fn default_verbosity() -> u8 {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Means as multiples of the half-width of the solvability interval.
    #[serde(default)]
    pub multipliers: Vec<f64>,
    /// Fraction of the mean carried by the interior data.
    #[serde(default = "default_share")]
    pub interior_share: f64,
    #[serde(default)]
    pub epsilons: Vec<f64>,
    #[serde(default = "two")]
    pub p1: f64,
    #[serde(default = "two")]
    pub q1: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            multipliers: Vec::new(),
            interior_share: default_share(),
            epsilons: Vec::new(),
            p1: 2.0,
            q1: 2.0,
        }
    }
}

fn default_share() -> f64 {
    0.5
}

/// Probe grid for the Orlicz checks.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_grid_lo")]
    pub lo: f64,
    #[serde(default = "default_grid_hi")]
    pub hi: f64,
    #[serde(default = "default_grid_n")]
    pub n: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            lo: default_grid_lo(),
            hi: default_grid_hi(),
            n: default_grid_n(),
        }
    }
}

fn default_grid_lo() -> f64 {
    1e-6
}
fn default_grid_hi() -> f64 {
    1e6
}
fn default_grid_n() -> usize {
    121
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
            ConfigError::Parse {
                line,
                column,
                msg: e.message().to_string(),
            }
        })?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let pr = &self.problem;
        if !(pr.p > 1.0 && pr.p.is_finite() && pr.q > 1.0 && pr.q.is_finite()) {
            return invalid(format!(
                "p and q must lie in (1, inf), got p = {}, q = {}",
                pr.p, pr.q
            ));
        }
        if pr.rho > 1 {
            return invalid(format!("rho must be 0 or 1, got {}", pr.rho));
        }
        let s = &self.solver;
        if !(s.tol > 0.0) || !(s.divergence_ceiling > 0.0) || s.memory == 0 {
            return invalid("solver tol, divergence_ceiling and memory must be positive");
        }
        if !(0.0..=1.0).contains(&self.sweep.interior_share) {
            return invalid("sweep.interior_share must lie in [0, 1]");
        }
        if !(self.grid.lo > 0.0 && self.grid.hi > self.grid.lo && self.grid.n >= 2) {
            return invalid("grid needs 0 < lo < hi and n >= 2");
        }
        for nl in [Some(&pr.alpha1), Some(&pr.alpha2), self.orlicz.as_ref()]
            .into_iter()
            .flatten()
        {
            self.build_nonlinearity(nl)?;
        }
        self.build_domain()?;
        Ok(())
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn read(&self, p: &Path) -> Result<String, ConfigError> {
        let path = self.resolve(p);
        std::fs::read_to_string(&path).map_err(|e| ConfigError::Io {
            path,
            msg: e.to_string(),
        })
    }

    pub fn build_domain(&self) -> Result<Arc<DiscreteDomain>, ConfigError> {
        let d = &self.domain;
        let dom = match d.kind {
            DomainKind::Interval => {
                let Some(n) = d.n_cells else {
                    return invalid("an interval domain needs n_cells");
                };
                DiscreteDomain::interval(n, d.length, d.b_left, d.b_right)
            }
            DomainKind::Rectangle => {
                let (Some(nx), Some(ny)) = (d.nx, d.ny) else {
                    return invalid("a rectangle domain needs nx and ny");
                };
                let b = d.b;
                DiscreteDomain::rectangle(nx, ny, d.lx, d.ly, move |_| b)
            }
        };
        dom.map(Arc::new)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn build_nonlinearity(&self, spec: &NonlinearitySpec) -> Result<NFunction, ConfigError> {
        let nf = if spec.name == "custom-table" {
            let Some(file) = &spec.file else {
                return invalid("a custom-table nonlinearity needs 'file'");
            };
            NFunction::from_table_csv(&self.read(file)?)
        } else {
            NFunction::from_registry(&spec.name, &spec.params)
        };
        nf.map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// The problem with its data; `seed` drives random data.
    pub fn build_problem(&self, seed: u64) -> Result<ProblemSpec, ConfigError> {
        let dom = self.build_domain()?;
        let pr = &self.problem;
        let spec = ProblemSpec::new(
            dom.clone(),
            pr.p,
            pr.q,
            pr.rho == 1,
            pr.mode.into(),
            self.build_nonlinearity(&pr.alpha1)?,
            self.build_nonlinearity(&pr.alpha2)?,
        )
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let (n, nb) = (dom.n_nodes(), dom.n_boundary());
        let data = &pr.data;
        let (f, g) = match data.kind {
            DataKind::Constant => (vec![data.f; n], vec![data.g; nb]),
            DataKind::File => {
                let (Some(ff), Some(gf)) = (&data.f_file, &data.g_file) else {
                    return invalid("file data needs f_file and g_file");
                };
                (
                    parse_column(&self.read(ff)?, ff)?,
                    parse_column(&self.read(gf)?, gf)?,
                )
            }
            DataKind::Random => {
                let amplitude = data.amplitude.unwrap_or(1.0);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let f = (0..n)
                    .map(|_| rng.gen_range(-1.0..=1.0) * amplitude)
                    .collect();
                let g = (0..nb)
                    .map(|_| rng.gen_range(-1.0..=1.0) * amplitude)
                    .collect();
                (f, g)
            }
        };
        spec.with_data(f, g)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn solver_options(&self) -> SolverOptions {
        let s = &self.solver;
        SolverOptions {
            tol: s.tol,
            max_iter: s.max_iter,
            divergence_ceiling: s.divergence_ceiling,
            method: match s.method {
                MethodName::Lbfgs => Method::Lbfgs { memory: s.memory },
                MethodName::Gradient => Method::PreconditionedGradient,
            },
            initial: None,
        }
    }

    pub fn probe_grid(&self) -> Vec<f64> {
        log_grid(self.grid.lo, self.grid.hi, self.grid.n)
    }
}

fn parse_column(text: &str, path: &Path) -> Result<Vec<f64>, ConfigError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| {
            l.trim().parse::<f64>().map_err(|e| ConfigError::Parse {
                line: i + 1,
                column: 1,
                msg: format!("{}: {e}", path.display()),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[domain]
kind = "rectangle"
nx = 4
ny = 3

[problem]
p = 3.0
mode = "perturbed"
alpha1 = { name = "power", c = 2.0, r = 1.5 }
data = { kind = "random", amplitude = 0.5 }

[solver]
tol = 1e-9
"#;

    #[test]
    fn parses_sample() {
        let cfg = RunConfig::parse(SAMPLE, Path::new(".")).unwrap();
        assert_eq!(cfg.problem.mode, ModeName::Perturbed);
        assert_eq!(cfg.problem.alpha1.params["r"], 1.5);
        let spec = cfg.build_problem(7).unwrap();
        assert_eq!(spec.domain().n_nodes(), 20);
        assert!(spec.f().iter().all(|v| v.abs() <= 0.5));
        assert_eq!(spec.f(), cfg.build_problem(7).unwrap().f());
        assert_ne!(spec.f(), cfg.build_problem(8).unwrap().f());
        assert_eq!(cfg.solver_options().tol, 1e-9);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad = "[domain]\nkind = \"rectangle\"\nnx = 4\nny = \"three\"\n";
        match RunConfig::parse(bad, Path::new(".")) {
            Err(ConfigError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        let unknown = "[domain]\nkind = \"interval\"\nn_cells = 4\n[solver]\ntoll = 1\n";
        assert!(matches!(
            RunConfig::parse(unknown, Path::new(".")),
            Err(ConfigError::Parse { line: 5, .. })
        ));
    }

    #[test]
    fn range_checks() {
        let bad = "[domain]\nkind = \"interval\"\nn_cells = 4\n[problem]\np = 1.0\n";
        assert!(matches!(
            RunConfig::parse(bad, Path::new(".")),
            Err(ConfigError::Invalid(_))
        ));
        let name =
            "[domain]\nkind = \"interval\"\nn_cells = 4\n[problem]\nalpha1 = { name = \"nope\" }\n";
        assert!(matches!(
            RunConfig::parse(name, Path::new(".")),
            Err(ConfigError::Invalid(_))
        ));
    }
}
