//! Minimization of the discrete energy.
//!
//! Both modes minimize [`forms::energy`] over the full nodal space with a
//! monotone Armijo backtracking line search. The default search direction is
//! limited-memory BFGS whose initial inverse Hessian is a two-level
//! preconditioner: the inverse lumped diagonal of the energy Hessian plus an
//! exact correction along the constant mode. Plain preconditioned gradient
//! descent is available as [`Method::PreconditionedGradient`].

use std::collections::VecDeque;

use thiserror::Error;

use crate::domain::FieldPair;
use crate::forms::{self, FormError, Mode, ProblemSpec};
use crate::numeric::weighted_lp_norm;
use crate::resonance::{self, Classification, ResonanceError};

const ARMIJO_C: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 60;
const PRECOND_FLOOR: f64 = 1e-8;
/// Window over which a stagnating residual signals divergence.
const STAGNATION_WINDOW: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("expected {expected:?} mode, got {got:?}")]
    BadMode { expected: Mode, got: Mode },
    #[error("energy is not finite at the initial guess (non-finite data?)")]
    NonFiniteEnergy,
    #[error("problems differ in more than their data: {0}")]
    SpecMismatch(String),
    #[error("bad solver option: {0}")]
    BadOption(String),
    #[error(transparent)]
    Form(#[from] FormError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    PreconditionedGradient,
    Lbfgs { memory: usize },
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Bound on the weight-scaled residual `max_i |g_i| / m_i`.
    pub tol: f64,
    pub max_iter: usize,
    /// `‖U‖_∞` above which a stagnating residual is reported as divergence.
    pub divergence_ceiling: f64,
    pub method: Method,
    /// Starting field; defaults to the mode's canonical guess.
    pub initial: Option<FieldPair>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            max_iter: 20_000,
            divergence_ceiling: 1e6,
            method: Method::Lbfgs { memory: 10 },
            initial: None,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_initial(mut self, u0: FieldPair) -> Self {
        self.initial = Some(u0);
        self
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    fn validate(&self) -> Result<(), SolveError> {
        if !(self.tol > 0.0) {
            return Err(SolveError::BadOption(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if !(self.divergence_ceiling > 0.0) {
            return Err(SolveError::BadOption(
                "divergence ceiling must be positive".into(),
            ));
        }
        if let Method::Lbfgs { memory: 0 } = self.method {
            return Err(SolveError::BadOption(
                "L-BFGS memory must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Converged,
    Diverged,
    MaxIterations,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Converged => "Converged",
            Verdict::Diverged => "Diverged",
            Verdict::MaxIterations => "MaxIterations",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub energy: f64,
    pub residual_inf: f64,
    /// Accepted step length; zero for the initial record.
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    /// Present iff the verdict is [`Verdict::Converged`].
    pub solution: Option<FieldPair>,
    pub last_iterate: FieldPair,
    pub verdict: Verdict,
    pub iterations: usize,
    pub final_residual_inf: f64,
    /// Initial energy plus the sum of exact per-step increments.
    pub final_energy: f64,
    pub trace: Vec<IterationRecord>,
    /// The line search could not make progress.
    pub stalled: bool,
}

impl SolveReport {
    pub fn max_abs(&self) -> f64 {
        self.last_iterate.max_abs()
    }
}

/// `max_i |g_i| / m_i`, the nodal gradient scaled by the lumped weights.
pub fn scaled_residual(grad: &FieldPair, measure: &[f64]) -> f64 {
    grad.values()
        .iter()
        .zip(measure)
        .fold(0.0_f64, |m, (g, w)| m.max((g / w).abs()))
}

pub fn solve_perturbed(
    spec: &ProblemSpec,
    opts: &SolverOptions,
) -> Result<SolveReport, SolveError> {
    if spec.mode() != Mode::Perturbed {
        return Err(SolveError::BadMode {
            expected: Mode::Perturbed,
            got: spec.mode(),
        });
    }
    let u0 = opts
        .initial
        .clone()
        .unwrap_or_else(|| FieldPair::zeros(spec.domain()));
    minimize(spec, u0, opts)
}

/// Resonant solve started from the constant field given by
/// [`resonance::split_mean`]. Divergence is never reported for means in the
/// boundary band of the solvability interval.
pub fn solve_resonant(spec: &ProblemSpec, opts: &SolverOptions) -> Result<SolveReport, SolveError> {
    if spec.mode() != Mode::Resonant {
        return Err(SolveError::BadMode {
            expected: Mode::Resonant,
            got: spec.mode(),
        });
    }
    let verdict = resonance::solvability(spec).map_err(|e| match e {
        ResonanceError::BadMode => SolveError::BadMode {
            expected: Mode::Resonant,
            got: spec.mode(),
        },
        other => SolveError::BadOption(other.to_string()),
    })?;
    let u0 = match &opts.initial {
        Some(u) => u.clone(),
        None => {
            let c = match resonance::split_mean(spec) {
                Ok(s) if !spec.alpha1().is_zero() => s.d1,
                Ok(s) => s.d2,
                Err(_) => 0.0,
            };
            FieldPair::constant(spec.domain(), if c.is_finite() { c } else { 0.0 })
        }
    };
    let mut report = minimize(spec, u0, opts)?;
    if verdict.classification == Classification::BoundaryCase && report.verdict == Verdict::Diverged
    {
        report.verdict = Verdict::MaxIterations;
    }
    Ok(report)
}

/// Distances between the solutions of two perturbed problems that differ
/// only in their data.
#[derive(Debug, Clone)]
pub struct Dependence {
    pub du_inf: f64,
    /// `‖f₁ - f₂‖_{L^{p₁}(dx)}` and `‖g₁ - g₂‖_{L^{q₁}(dσ)}`.
    pub df_norms: (f64, f64),
    pub reports: (SolveReport, SolveReport),
}

pub fn continuous_dependence(
    spec1: &ProblemSpec,
    spec2: &ProblemSpec,
    p1: f64,
    q1: f64,
    opts: &SolverOptions,
) -> Result<Dependence, SolveError> {
    check_same_problem(spec1, spec2)?;
    if spec1.mode() != Mode::Perturbed {
        return Err(SolveError::BadMode {
            expected: Mode::Perturbed,
            got: spec1.mode(),
        });
    }
    if spec1.p() < 2.0 || spec1.q() < 2.0 {
        return Err(SolveError::SpecMismatch(format!(
            "continuous dependence needs p, q >= 2, got p = {}, q = {}",
            spec1.p(),
            spec1.q()
        )));
    }
    let (r1, r2) = rayon::join(
        || solve_perturbed(spec1, opts),
        || solve_perturbed(spec2, opts),
    );
    let (r1, r2) = (r1?, r2?);
    let du_inf = r1.last_iterate.sub(&r2.last_iterate).max_abs();
    let dom = spec1.domain();
    let df: Vec<f64> = spec1
        .f()
        .iter()
        .zip(spec2.f())
        .map(|(a, b)| a - b)
        .collect();
    let dg: Vec<f64> = spec1
        .g()
        .iter()
        .zip(spec2.g())
        .map(|(a, b)| a - b)
        .collect();
    let df_norms = (
        weighted_lp_norm(&df, dom.dx_weights(), p1),
        weighted_lp_norm(&dg, dom.dsigma_weights(), q1),
    );
    Ok(Dependence {
        du_inf,
        df_norms,
        reports: (r1, r2),
    })
}

pub(crate) fn check_same_problem(a: &ProblemSpec, b: &ProblemSpec) -> Result<(), SolveError> {
    let mismatch = |what: &str| Err(SolveError::SpecMismatch(what.to_string()));
    if a.p() != b.p() || a.q() != b.q() || a.rho() != b.rho() {
        return mismatch("exponents or rho");
    }
    if a.mode() != b.mode() {
        return mismatch("mode");
    }
    if a.alpha1().name() != b.alpha1().name() || a.alpha2().name() != b.alpha2().name() {
        return mismatch("nonlinearities");
    }
    let (da, db) = (a.domain(), b.domain());
    if !std::sync::Arc::ptr_eq(a.domain_arc(), b.domain_arc())
        && (da.coords() != db.coords()
            || da.dx_weights() != db.dx_weights()
            || da.b_values() != db.b_values())
    {
        return mismatch("domain");
    }
    if a.beta1() != b.beta1() || a.beta2() != b.beta2() {
        return mismatch("coefficients");
    }
    Ok(())
}

/// Lumped diagonal of the energy Hessian at `u`, and its curvature along the
/// constant mode (zero-order terms only, gradients of constants vanish).
fn preconditioner(u: &FieldPair, spec: &ProblemSpec) -> (Vec<f64>, f64) {
    let dom = spec.domain();
    let vals = u.values();
    let (p, q) = (spec.p(), spec.q());
    let mut diag = vec![0.0; vals.len()];

    let gop = dom.grad_op();
    let dim = gop.dim();
    for (e, st) in gop.stencils().iter().enumerate() {
        let a = gop.element_gradient(e, vals);
        let k = st.measure * (p - 1.0) * curvature_factor(a[0] * a[0] + a[1] * a[1], p);
        for (m, &n) in st.nodes.iter().enumerate() {
            let c2: f64 = (0..dim).map(|d| st.coeffs[m * dim + d].powi(2)).sum();
            diag[n] += k * c2;
        }
    }
    let bnodes = dom.boundary_nodes();
    let trace = u.trace(dom);
    if spec.rho() {
        let top = dom.tangential_grad_op();
        for (e, st) in top.stencils().iter().enumerate() {
            let t = top.element_gradient(e, &trace)[0];
            let k = st.measure * (q - 1.0) * curvature_factor(t * t, q);
            for (m, &pos) in st.nodes.iter().enumerate() {
                diag[bnodes[pos]] += k * st.coeffs[m] * st.coeffs[m];
            }
        }
    }
    let perturbed = spec.mode() == Mode::Perturbed;
    let mut kappa_terms = Vec::with_capacity(vals.len() + bnodes.len());
    let dx = dom.dx_weights();
    for i in 0..vals.len() {
        let mut h = spec.beta1()[i] * spec.alpha1().alpha_derivative(vals[i]);
        if perturbed {
            h += (p - 1.0) * curvature_factor(vals[i] * vals[i], p);
        }
        let h = dx[i] * finite_or_zero(h);
        diag[i] += h;
        kappa_terms.push(h);
    }
    let bw = spec.boundary_weights();
    let ds = dom.dsigma_weights();
    for (j, &n) in bnodes.iter().enumerate() {
        let mut h = bw[j] * spec.beta2()[j] * spec.alpha2().alpha_derivative(trace[j]);
        if perturbed && spec.rho() {
            h += ds[j] * (q - 1.0) * curvature_factor(trace[j] * trace[j], q);
        }
        let h = finite_or_zero(h);
        diag[n] += h;
        kappa_terms.push(h);
    }
    for d in diag.iter_mut() {
        *d = d.max(PRECOND_FLOOR);
    }
    (diag, crate::numeric::pairwise_sum(&kappa_terms))
}

fn finite_or_zero(x: f64) -> f64 {
    if x.is_finite() {
        x
    } else {
        0.0
    }
}

/// `|a|^{e-2}` from `|a|²`, with the singular `e < 2` case regularized.
fn curvature_factor(s2: f64, e: f64) -> f64 {
    if e == 2.0 {
        1.0
    } else if e < 2.0 {
        (forms::GRAD_REG_EPS * forms::GRAD_REG_EPS + s2).powf(0.5 * (e - 2.0))
    } else {
        s2.powf(0.5 * (e - 2.0))
    }
}

struct Precond {
    inv_diag: Vec<f64>,
    /// Inverse curvature along the constant mode; zero disables the
    /// correction.
    inv_kappa: f64,
}

impl Precond {
    fn build(u: &FieldPair, spec: &ProblemSpec) -> Self {
        let (diag, kappa) = preconditioner(u, spec);
        Precond {
            inv_diag: diag.iter().map(|d| 1.0 / d).collect(),
            inv_kappa: if kappa > 0.0 && kappa.is_finite() {
                1.0 / kappa
            } else {
                0.0
            },
        }
    }

    fn apply(&self, g: &[f64]) -> Vec<f64> {
        let shift = self.inv_kappa * g.iter().sum::<f64>();
        g.iter()
            .zip(&self.inv_diag)
            .map(|(x, w)| x * w + shift)
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

struct History {
    memory: usize,
    pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>,
}

impl History {
    fn new(memory: usize) -> Self {
        History {
            memory,
            pairs: VecDeque::with_capacity(memory),
        }
    }

    fn push(&mut self, s: Vec<f64>, y: Vec<f64>) {
        let sy = dot(&s, &y);
        let (ns, ny) = (norm2(&s), norm2(&y));
        if !(sy > 1e-14 * ns * ny) {
            return;
        }
        if self.pairs.len() == self.memory {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / sy));
    }

    /// Two-loop recursion with `H₀ = γP`.
    fn direction(&self, g: &[f64], pre: &Precond) -> Vec<f64> {
        let mut q = g.to_vec();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        let mut r = pre.apply(&q);
        if let Some((s, y, _)) = self.pairs.back() {
            let py = pre.apply(y);
            let gamma = dot(s, y) / dot(y, &py);
            if gamma.is_finite() && gamma > 0.0 {
                r.iter_mut().for_each(|v| *v *= gamma);
            }
        }
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &r);
            for (ri, si) in r.iter_mut().zip(s) {
                *ri += (a - b) * si;
            }
        }
        r.iter().map(|v| -v).collect()
    }

    fn clear(&mut self) {
        self.pairs.clear();
    }
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn minimize(
    spec: &ProblemSpec,
    u0: FieldPair,
    opts: &SolverOptions,
) -> Result<SolveReport, SolveError> {
    opts.validate()?;
    if !spec.data_is_finite() {
        return Err(SolveError::NonFiniteEnergy);
    }
    let measure = spec.node_measure();
    let mut u = u0;
    let mut energy = forms::energy(&u, spec)?;
    if !energy.is_finite() {
        return Err(SolveError::NonFiniteEnergy);
    }
    let mut grad = forms::energy_gradient(&u, spec)?;
    let mut res = scaled_residual(&grad, &measure);
    let mut trace = vec![IterationRecord {
        energy,
        residual_inf: res,
        step: 0.0,
    }];
    let memory = match opts.method {
        Method::Lbfgs { memory } => memory,
        Method::PreconditionedGradient => 0,
    };
    let mut hist = History::new(memory.max(1));
    let mut stalled = false;
    let mut k = 0;

    let verdict = loop {
        if !res.is_finite() || !u.values().iter().all(|v| v.is_finite()) {
            break Verdict::Diverged;
        }
        if res <= opts.tol {
            break Verdict::Converged;
        }
        if u.max_abs() > opts.divergence_ceiling
            && k >= STAGNATION_WINDOW
            && res > 0.99 * trace[k - STAGNATION_WINDOW].residual_inf
        {
            break Verdict::Diverged;
        }
        if k >= opts.max_iter {
            break Verdict::MaxIterations;
        }
        let pre = Precond::build(&u, spec);
        let g = grad.values();
        let mut dir = if memory > 0 {
            hist.direction(g, &pre)
        } else {
            negated(pre.apply(g))
        };
        let mut slope = dot(g, &dir);
        if !(slope < 0.0) || !slope.is_finite() {
            hist.clear();
            dir = negated(pre.apply(g));
            slope = dot(g, &dir);
        }
        let step = match line_search(&u, &dir, slope, spec)? {
            Some(s) => Some(s),
            None if !hist.pairs.is_empty() => {
                hist.clear();
                dir = negated(pre.apply(g));
                slope = dot(g, &dir);
                line_search(&u, &dir, slope, spec)?
            }
            None => None,
        };
        let Some((t, de)) = step else {
            stalled = true;
            break Verdict::MaxIterations;
        };
        let d = FieldPair::new(dir);
        let u_new = u.axpy(t, &d);
        let grad_new = forms::energy_gradient(&u_new, spec)?;
        if memory > 0 {
            let s: Vec<f64> = d.values().iter().map(|v| t * v).collect();
            let y: Vec<f64> = grad_new
                .values()
                .iter()
                .zip(grad.values())
                .map(|(a, b)| a - b)
                .collect();
            hist.push(s, y);
        }
        u = u_new;
        grad = grad_new;
        energy += de;
        res = scaled_residual(&grad, &measure);
        k += 1;
        trace.push(IterationRecord {
            energy,
            residual_inf: res,
            step: t,
        });
    };

    Ok(SolveReport {
        solution: (verdict == Verdict::Converged).then(|| u.clone()),
        last_iterate: u,
        verdict,
        iterations: k,
        final_residual_inf: res,
        final_energy: energy,
        trace,
        stalled,
    })
}

fn negated(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|x| -x).collect()
}

/// Armijo backtracking from the largest step with `‖t d‖_∞ ≤ max(1, ‖U‖_∞)`.
/// Returns the step and the exact energy change.
fn line_search(
    u: &FieldPair,
    dir: &[f64],
    slope: f64,
    spec: &ProblemSpec,
) -> Result<Option<(f64, f64)>, SolveError> {
    let dmax = norm_inf(dir);
    if !(dmax > 0.0) || !dmax.is_finite() {
        return Ok(None);
    }
    let cap = u.max_abs().max(1.0);
    let mut t = (cap / dmax).min(1.0);
    let d = FieldPair::new(dir.to_vec());
    for _ in 0..MAX_BACKTRACKS {
        let de = forms::energy_increment(u, &d, t, spec)?;
        if de.is_finite() && de <= ARMIJO_C * t * slope {
            return Ok(Some((t, de)));
        }
        t *= BACKTRACK;
    }
    Ok(None)
}
