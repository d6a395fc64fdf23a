//! Truncations, level-set profiles, the Stampacchia iteration and empirical
//! checks of the `L^∞` stability bound for the perturbed problem.

use thiserror::Error;

use crate::domain::{DiscreteDomain, DomainError, FieldPair};
use crate::forms::{self, FormError, Mode, ProblemSpec};
use crate::orlicz::NFunction;
use crate::solver::{self, SolveError, SolveReport, SolverOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Form(#[from] FormError),
}

impl From<DomainError> for EstimateError {
    fn from(e: DomainError) -> Self {
        EstimateError::DimensionMismatch(e.to_string())
    }
}

/// `(|t| - k)⁺ sgn t`.
pub fn truncate_scalar(t: f64, k: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        (t.abs() - k).max(0.0).copysign(t)
    }
}

/// `w_k = (|u - v| - k)⁺ sgn(u - v)` at every node.
pub fn truncate(u: &FieldPair, v: &FieldPair, k: f64) -> Result<FieldPair, EstimateError> {
    if u.len() != v.len() {
        return Err(EstimateError::DimensionMismatch(format!(
            "{} vs {} nodes",
            u.len(),
            v.len()
        )));
    }
    if !(k >= 0.0) {
        return Err(EstimateError::BadParameter(format!(
            "truncation level must be >= 0, got {k}"
        )));
    }
    Ok(FieldPair::new(
        u.values()
            .iter()
            .zip(v.values())
            .map(|(a, b)| truncate_scalar(a - b, k))
            .collect(),
    ))
}

/// Level sets `A_k = {|u - v| >= k}` measured by
/// `ψ(k) = (Σ_{A_k} dx)^{1/p_s} + (Σ_{A_k ∩ ∂Ω} dσ)^{1/q_s}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationProfile {
    pub levels: Vec<f64>,
    pub psi: Vec<f64>,
    pub w_inf: f64,
}

impl TruncationProfile {
    pub const CSV_HEADER: &'static str = "k,psi";

    pub fn is_nonincreasing(&self) -> bool {
        self.psi.windows(2).all(|w| w[1] <= w[0])
    }

    pub fn csv_rows(&self) -> Vec<String> {
        self.levels
            .iter()
            .zip(&self.psi)
            .map(|(k, p)| format!("{k:.16e},{p:.16e}"))
            .collect()
    }
}

fn level_measure(w: &[f64], dom: &DiscreteDomain, k: f64, p_s: f64, q_s: f64) -> f64 {
    let inside = |x: f64| x.abs() >= k;
    let vol: f64 = w
        .iter()
        .zip(dom.dx_weights())
        .filter(|(x, _)| inside(**x))
        .map(|(_, d)| d)
        .sum();
    let surf: f64 = dom
        .boundary_nodes()
        .iter()
        .zip(dom.dsigma_weights())
        .filter(|(n, _)| inside(w[**n]))
        .map(|(_, d)| d)
        .sum();
    vol.powf(1.0 / p_s) + surf.powf(1.0 / q_s)
}

/// `ψ` on `n_levels` uniform levels from 0 to `‖u - v‖_∞` (to 1 when
/// `u = v`).
pub fn level_profile(
    u: &FieldPair,
    v: &FieldPair,
    dom: &DiscreteDomain,
    p_s: f64,
    q_s: f64,
    n_levels: usize,
) -> Result<TruncationProfile, EstimateError> {
    dom.check_nodal(u.values())?;
    dom.check_nodal(v.values())?;
    if n_levels < 2 {
        return Err(EstimateError::BadParameter(
            "need at least two levels".into(),
        ));
    }
    if !(p_s > 0.0 && q_s > 0.0) {
        return Err(EstimateError::BadParameter(
            "mixed-norm exponents must be positive".into(),
        ));
    }
    let w = u.sub(v);
    let w_inf = w.max_abs();
    let top = if w_inf > 0.0 { w_inf } else { 1.0 };
    let levels: Vec<f64> = (0..n_levels)
        .map(|i| top * i as f64 / (n_levels - 1) as f64)
        .collect();
    // Above zero an empty level set has ψ = 0, even for u = v.
    let psi = levels
        .iter()
        .map(|&k| {
            if k > w_inf {
                0.0
            } else {
                level_measure(w.values(), dom, k, p_s, q_s)
            }
        })
        .collect();
    Ok(TruncationProfile { levels, psi, w_inf })
}

/// `k₀ + d` with `d = c^{1/α} ψ(k₀)^{(δ-1)/α} 2^{δ(δ-1)}`.
pub fn stampacchia_vanishing_level(psi_k0: f64, c: f64, alpha: f64, delta: f64, k0: f64) -> f64 {
    k0 + c.powf(1.0 / alpha) * psi_k0.powf((delta - 1.0) / alpha) * 2f64.powf(delta * (delta - 1.0))
}

/// The textbook variant `d^α = c ψ(k₀)^{δ-1} 2^{αδ/(δ-1)}`.
pub fn classical_vanishing_level(psi_k0: f64, c: f64, alpha: f64, delta: f64, k0: f64) -> f64 {
    k0 + c.powf(1.0 / alpha) * psi_k0.powf((delta - 1.0) / alpha) * 2f64.powf(delta / (delta - 1.0))
}

/// The recursion `ψ(k_{n+1}) = c (k_{n+1} - k_n)^{-α} ψ(k_n)^δ` on the
/// levels `k_n = k₀ + d(1 - 2^{-n})`.
#[derive(Debug, Clone, PartialEq)]
pub struct Recursion {
    pub levels: Vec<f64>,
    pub psi: Vec<f64>,
    /// First level with `ψ` below the threshold.
    pub vanish_level: Option<f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn iterate_recursion(
    psi_k0: f64,
    c: f64,
    alpha: f64,
    delta: f64,
    k0: f64,
    d: f64,
    steps: usize,
    threshold: f64,
) -> Recursion {
    let mut levels = vec![k0];
    let mut psi = vec![psi_k0];
    let mut vanish_level = (psi_k0 < threshold).then_some(k0);
    let mut k = k0;
    let mut ps = psi_k0;
    for n in 1..=steps {
        let next = k0 + d * (1.0 - 0.5f64.powi(n as i32));
        ps = c * (next - k).powf(-alpha) * ps.powf(delta);
        k = next;
        levels.push(k);
        psi.push(ps);
        if vanish_level.is_none() && ps < threshold {
            vanish_level = Some(k);
        }
        if !ps.is_finite() {
            break;
        }
    }
    Recursion {
        levels,
        psi,
        vanish_level,
    }
}

/// Smallest spacing `d`, found by doubling then bisection, for which the
/// recursion drives `ψ` below `threshold` within `steps` levels. Returns
/// the vanishing level `k₀ + d`.
pub fn empirical_vanishing_level(
    psi_k0: f64,
    c: f64,
    alpha: f64,
    delta: f64,
    k0: f64,
    steps: usize,
    threshold: f64,
) -> Option<f64> {
    if psi_k0 < threshold {
        return Some(k0);
    }
    let works = |d: f64| {
        iterate_recursion(psi_k0, c, alpha, delta, k0, d, steps, threshold)
            .vanish_level
            .is_some()
    };
    let mut hi = 1.0;
    let mut lo = 0.0;
    let mut tries = 0;
    while !works(hi) {
        lo = hi;
        hi *= 2.0;
        tries += 1;
        if tries > 200 {
            return None;
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if works(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(k0 + hi)
}

/// The two candidate recursion exponents: `min{p_s/p₃, q_s/q₃}` and the
/// variant `min{p_s/p₃, q_s/p₃}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaExponents {
    pub matched: f64,
    pub mixed: f64,
}

pub fn delta_exponents(
    p_s: f64,
    q_s: f64,
    p3: f64,
    q3: f64,
) -> Result<DeltaExponents, EstimateError> {
    if [p_s, q_s, p3, q3]
        .iter()
        .any(|x| !(*x > 0.0 && x.is_finite()))
    {
        return Err(EstimateError::BadParameter(
            "exponents must be positive and finite".into(),
        ));
    }
    Ok(DeltaExponents {
        matched: (p_s / p3).min(q_s / q3),
        mixed: (p_s / p3).min(q_s / p3),
    })
}

/// Sobolev exponent `Np/(N-p)` and trace exponent `(N-1)p/(N-p)`, defined
/// for `p < N`.
pub fn sobolev_exponents(n: usize, p: f64) -> Option<(f64, f64)> {
    let nf = n as f64;
    (p < nf).then(|| (nf * p / (nf - p), (nf - 1.0) * p / (nf - p)))
}

/// Admissibility of `(p, q, p₁, q₁)` for the `L^∞` bound in dimension `n`:
/// perturbed mode, `p, q >= 2`, `p₁ > N/p` and `q₁ > (N-1)/(p-1)`, or
/// `q₁ > (N-1)/p` when `p = q`.
pub fn check_stability_hypotheses(
    spec: &ProblemSpec,
    p1: f64,
    q1: f64,
) -> Result<(), EstimateError> {
    let bad = |m: String| Err(EstimateError::HypothesisViolation(m));
    if spec.mode() != Mode::Perturbed {
        return bad("the stability bound concerns the perturbed problem".into());
    }
    let (p, q) = (spec.p(), spec.q());
    if p < 2.0 || q < 2.0 {
        return bad(format!("need p, q >= 2, got p = {p}, q = {q}"));
    }
    let n = spec.domain().dim() as f64;
    if !(p1 > n / p) {
        return bad(format!("need p1 > N/p = {}, got {p1}", n / p));
    }
    let ok_q1 = q1 > (n - 1.0) / (p - 1.0) || (p == q && q1 > (n - 1.0) / p);
    if !ok_q1 {
        return bad(format!("q1 = {q1} is below the admissible range"));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct StabilityCheck {
    /// `‖U₁ - U₂‖_∞^{p-1}`.
    pub lhs: f64,
    /// `(‖f₁ - f₂‖_{p₁}, ‖g₁ - g₂‖_{q₁})`.
    pub rhs_norms: (f64, f64),
    /// `lhs` over the sum of the data norms; zero when both vanish.
    pub c_fit: f64,
    pub reports: (SolveReport, SolveReport),
}

impl StabilityCheck {
    pub const CSV_HEADER: &'static str = "epsilon,lhs,df_norm,dg_norm,C_fit";

    pub fn csv_row(&self, epsilon: f64) -> String {
        format!(
            "{epsilon:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            self.lhs, self.rhs_norms.0, self.rhs_norms.1, self.c_fit
        )
    }
}

/// Solve both problems (concurrently) and compare the solution difference
/// with the data difference.
pub fn linf_stability_check(
    spec1: &ProblemSpec,
    spec2: &ProblemSpec,
    p1: f64,
    q1: f64,
    opts: &SolverOptions,
) -> Result<StabilityCheck, EstimateError> {
    check_stability_hypotheses(spec1, p1, q1)?;
    let dep = solver::continuous_dependence(spec1, spec2, p1, q1, opts)?;
    let lhs = dep.du_inf.powf(spec1.p() - 1.0);
    let total = dep.df_norms.0 + dep.df_norms.1;
    let c_fit = if total > 0.0 { lhs / total } else { 0.0 };
    Ok(StabilityCheck {
        lhs,
        rhs_norms: dep.df_norms,
        c_fit,
        reports: dep.reports,
    })
}

/// Both sides of `𝒜(U, W_k) - 𝒜(V, W_k) >= κ 𝒜(W_k, W_k)`.
pub fn truncation_gap(
    u: &FieldPair,
    v: &FieldPair,
    k: f64,
    spec: &ProblemSpec,
) -> Result<(f64, f64), EstimateError> {
    let w = truncate(u, v, k)?;
    let lhs = forms::form_a(u, &w, spec)? - forms::form_a(v, &w, spec)?;
    let rhs = forms::form_a(&w, &w, spec)?;
    Ok((lhs, rhs))
}

/// Monotonicity constant `c` of `α` in `(α(a) - α(b))(a - b) >= c α(a - b)(a - b)`:
/// `2^{1-r}` for `c|s|^{r-1}s` with `r >= 1`, one for linear and zero.
pub fn alpha_monotonicity_constant(nf: &NFunction) -> Option<f64> {
    if nf.is_zero() {
        return Some(1.0);
    }
    let r = nf.power_exponent()?;
    forms::ine_bw_constant(r + 1.0)
}

/// Product lower bound `c_p c_q c_{α₁} c_{α₂}` for the truncation
/// inequality, when every factor is available.
pub fn truncation_kappa(spec: &ProblemSpec) -> Option<f64> {
    let cp = forms::ine_bw_constant(spec.p())?;
    let cq = if spec.rho() {
        forms::ine_bw_constant(spec.q())?
    } else {
        1.0
    };
    Some(
        cp * cq
            * alpha_monotonicity_constant(spec.alpha1())?
            * alpha_monotonicity_constant(spec.alpha2())?,
    )
}
