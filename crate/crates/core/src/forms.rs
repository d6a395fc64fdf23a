//! Discrete energy functional, its nodal gradient and the associated weak form.
//!
//! With lumped quadrature the energy of a nodal field `u` reads
//!
//! ```text
//! E(u) = 1/p Σ_T |T| |∇u_T|^p + ρ/q Σ_S |S| |∂_τ u_S|^q
//!      + Σ_i dx_i Λ₁(u_i) + Σ_j (dσ_j/b_j) Λ₂(u_j)
//!      - Σ_i dx_i f_i u_i - Σ_j (dσ_j/b_j) g_j u_j
//! ```
//!
//! and in [`Mode::Perturbed`] additionally `1/p Σ dx_i |u_i|^p + ρ/q Σ dσ_j |u_j|^q`
//! (that mode requires `b ≡ 1`). The gradient of `E` tested against a nodal
//! field `V` equals `form_a(U, V) - pairing(V)`.

use std::sync::Arc;

use thiserror::Error;

use crate::domain::{DiscreteDomain, DomainError, FieldPair};
use crate::numeric::{abs_pow, abs_pow_diff, pairwise_sum, pow_half_diff};
use crate::orlicz::NFunction;

/// Regularization of `|∇u|^{p-2}` in the gradient when `p < 2` (or `q < 2`).
pub const GRAD_REG_EPS: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("perturbed mode requires b ≡ 1 on the boundary")]
    PerturbedNeedsUnitWeight,
}

impl From<DomainError> for FormError {
    fn from(e: DomainError) -> Self {
        match e {
            DomainError::DimensionMismatch(m) => FormError::DimensionMismatch(m),
            other => FormError::BadParameter(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// No zero-order power terms; the null space of the principal part is
    /// the constants.
    Resonant,
    /// Adds `|u|^{p-2}u` in the interior and `ρ|u|^{q-2}u` on the boundary.
    Perturbed,
}

/// Exponents, nonlinearities, data and mesh of one boundary value problem.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    p: f64,
    q: f64,
    rho: bool,
    mode: Mode,
    alpha1: NFunction,
    alpha2: NFunction,
    f: Vec<f64>,
    g: Vec<f64>,
    /// Separable x-dependence `α₁(x,u) = β₁(x) α₁(u)`, nodal.
    beta1: Vec<f64>,
    /// Separable x-dependence `α₂(x,u) = β₂(x) α₂(u)`, per boundary node.
    beta2: Vec<f64>,
    domain: Arc<DiscreteDomain>,
    /// `dσ/b` per boundary node.
    bw: Vec<f64>,
}

impl ProblemSpec {
    /// A problem with zero data; attach data with [`ProblemSpec::with_data`].
    pub fn new(
        domain: Arc<DiscreteDomain>,
        p: f64,
        q: f64,
        rho: bool,
        mode: Mode,
        alpha1: NFunction,
        alpha2: NFunction,
    ) -> Result<Self, FormError> {
        if !(p > 1.0 && p.is_finite()) || !(q > 1.0 && q.is_finite()) {
            return Err(FormError::BadParameter(format!(
                "need p, q in (1, inf), got p = {p}, q = {q}"
            )));
        }
        if mode == Mode::Perturbed && !domain.has_unit_weight() {
            return Err(FormError::PerturbedNeedsUnitWeight);
        }
        let n = domain.n_nodes();
        let nb = domain.n_boundary();
        let bw = domain.dsigma_over_b();
        Ok(ProblemSpec {
            p,
            q,
            rho,
            mode,
            alpha1,
            alpha2,
            f: vec![0.0; n],
            g: vec![0.0; nb],
            beta1: vec![1.0; n],
            beta2: vec![1.0; nb],
            domain,
            bw,
        })
    }

    /// Replace the data `F = (f, g)`; `f` is nodal, `g` lives on boundary nodes.
    pub fn with_data(mut self, f: Vec<f64>, g: Vec<f64>) -> Result<Self, FormError> {
        self.domain.check_nodal(&f)?;
        self.domain.check_boundary(&g)?;
        self.f = f;
        self.g = g;
        Ok(self)
    }

    /// Constant data `f ≡ f0`, `g ≡ g0`.
    pub fn with_constant_data(self, f0: f64, g0: f64) -> Self {
        let (n, nb) = (self.domain.n_nodes(), self.domain.n_boundary());
        self.with_data(vec![f0; n], vec![g0; nb])
            .expect("sizes match the domain")
    }

    /// Positive bounded coefficients for the separable form `β(x) α(u)`.
    pub fn with_coefficients(
        mut self,
        beta1: Vec<f64>,
        beta2: Vec<f64>,
    ) -> Result<Self, FormError> {
        self.domain.check_nodal(&beta1)?;
        self.domain.check_boundary(&beta2)?;
        if beta1
            .iter()
            .chain(&beta2)
            .any(|b| !(*b > 0.0 && b.is_finite()))
        {
            return Err(FormError::BadParameter(
                "coefficients β must be positive and finite".into(),
            ));
        }
        self.beta1 = beta1;
        self.beta2 = beta2;
        Ok(self)
    }

    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn q(&self) -> f64 {
        self.q
    }
    pub fn rho(&self) -> bool {
        self.rho
    }
    pub fn mode(&self) -> Mode {
        self.mode
    }
    pub fn alpha1(&self) -> &NFunction {
        &self.alpha1
    }
    pub fn alpha2(&self) -> &NFunction {
        &self.alpha2
    }
    pub fn f(&self) -> &[f64] {
        &self.f
    }
    pub fn g(&self) -> &[f64] {
        &self.g
    }
    pub fn beta1(&self) -> &[f64] {
        &self.beta1
    }
    pub fn beta2(&self) -> &[f64] {
        &self.beta2
    }
    pub fn domain(&self) -> &DiscreteDomain {
        &self.domain
    }
    pub fn domain_arc(&self) -> &Arc<DiscreteDomain> {
        &self.domain
    }

    /// Boundary quadrature weights used for data and `α₂`: `dσ/b`.
    pub fn boundary_weights(&self) -> &[f64] {
        &self.bw
    }

    /// Lumped weight of the combined measure at each node: `dx_i` plus
    /// `dσ_j/b_j` at boundary nodes.
    pub fn node_measure(&self) -> Vec<f64> {
        let mut m = self.domain.dx_weights().to_vec();
        for (j, &n) in self.domain.boundary_nodes().iter().enumerate() {
            m[n] += self.bw[j];
        }
        m
    }

    /// `∫ f dx + ∫ g dσ/b`.
    pub fn mean_total(&self) -> f64 {
        self.domain
            .integrate_pair(&self.f, &self.g)
            .expect("data sizes are checked on construction")
    }

    pub fn data_is_finite(&self) -> bool {
        self.f.iter().chain(&self.g).all(|v| v.is_finite())
    }

    fn check(&self, u: &FieldPair) -> Result<(), FormError> {
        self.domain.check_nodal(u.values())?;
        Ok(())
    }

    fn perturbed(&self) -> bool {
        self.mode == Mode::Perturbed
    }
}

fn sq_norm(a: [f64; 2]) -> f64 {
    a[0] * a[0] + a[1] * a[1]
}

/// `|a|^e` from the squared magnitude.
fn norm_pow(s2: f64, e: f64) -> f64 {
    if e == 2.0 {
        s2
    } else {
        let half = 0.5 * e;
        if half.fract() == 0.0 && half <= 32.0 {
            s2.powi(half as i32)
        } else {
            s2.powf(half)
        }
    }
}

/// `|a|^{e-2}`, regularized as `(ε² + |a|²)^{(e-2)/2}` for `e < 2`.
fn flux_factor(s2: f64, e: f64, regularize: bool) -> f64 {
    if e == 2.0 {
        1.0
    } else if e < 2.0 {
        if regularize {
            (GRAD_REG_EPS * GRAD_REG_EPS + s2).powf(0.5 * (e - 2.0))
        } else if s2 == 0.0 {
            0.0
        } else {
            s2.powf(0.5 * (e - 2.0))
        }
    } else {
        norm_pow(s2, e - 2.0)
    }
}

/// `|t|^{e-2} t`.
fn scalar_flux(t: f64, e: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        abs_pow(t, e - 1.0).copysign(t)
    }
}

pub fn energy(u: &FieldPair, spec: &ProblemSpec) -> Result<f64, FormError> {
    spec.check(u)?;
    let dom = spec.domain();
    let vals = u.values();
    let (p, q) = (spec.p, spec.q);
    let mut terms = Vec::with_capacity(dom.grad_op().len() + 2 * vals.len());

    let gop = dom.grad_op();
    for (e, st) in gop.stencils().iter().enumerate() {
        let a = gop.element_gradient(e, vals);
        terms.push(st.measure * norm_pow(sq_norm(a), p) / p);
    }
    let trace = u.trace(dom);
    if spec.rho {
        let top = dom.tangential_grad_op();
        for (e, st) in top.stencils().iter().enumerate() {
            let t = top.element_gradient(e, &trace)[0];
            terms.push(st.measure * abs_pow(t, q) / q);
        }
    }
    let dx = dom.dx_weights();
    for i in 0..vals.len() {
        let mut t = spec.beta1[i] * spec.alpha1.lambda(vals[i]) - spec.f[i] * vals[i];
        if spec.perturbed() {
            t += abs_pow(vals[i], p) / p;
        }
        terms.push(dx[i] * t);
    }
    let ds = dom.dsigma_weights();
    for (j, &v) in trace.iter().enumerate() {
        terms.push(spec.bw[j] * (spec.beta2[j] * spec.alpha2.lambda(v) - spec.g[j] * v));
        if spec.perturbed() && spec.rho {
            terms.push(ds[j] * abs_pow(v, q) / q);
        }
    }
    Ok(pairwise_sum(&terms))
}

/// `E(U + t D) - E(U)`, assembled term by term from cancellation-free
/// increments so that it stays accurate when the change is tiny relative to
/// the energy itself.
pub fn energy_increment(
    u: &FieldPair,
    dir: &FieldPair,
    t: f64,
    spec: &ProblemSpec,
) -> Result<f64, FormError> {
    spec.check(u)?;
    spec.check(dir)?;
    let dom = spec.domain();
    let (uv, dv) = (u.values(), dir.values());
    let (p, q) = (spec.p, spec.q);
    let mut terms = Vec::with_capacity(dom.grad_op().len() + 2 * uv.len());

    let gop = dom.grad_op();
    for (e, st) in gop.stencils().iter().enumerate() {
        let a = gop.element_gradient(e, uv);
        let d = gop.element_gradient(e, dv);
        let ds2 = t * (d[0] * (2.0 * a[0] + t * d[0]) + d[1] * (2.0 * a[1] + t * d[1]));
        terms.push(st.measure * pow_half_diff(sq_norm(a), ds2, p) / p);
    }
    let (tu, td) = (u.trace(dom), dir.trace(dom));
    if spec.rho {
        let top = dom.tangential_grad_op();
        for (e, st) in top.stencils().iter().enumerate() {
            let a = top.element_gradient(e, &tu)[0];
            let d = top.element_gradient(e, &td)[0];
            terms.push(st.measure * abs_pow_diff(a, a + t * d, q) / q);
        }
    }
    let dx = dom.dx_weights();
    for i in 0..uv.len() {
        let new = uv[i] + t * dv[i];
        let mut inc =
            spec.beta1[i] * spec.alpha1.lambda_increment(uv[i], new) - spec.f[i] * t * dv[i];
        if spec.perturbed() {
            inc += abs_pow_diff(uv[i], new, p) / p;
        }
        terms.push(dx[i] * inc);
    }
    let ds = dom.dsigma_weights();
    for j in 0..tu.len() {
        let new = tu[j] + t * td[j];
        terms.push(
            spec.bw[j]
                * (spec.beta2[j] * spec.alpha2.lambda_increment(tu[j], new)
                    - spec.g[j] * t * td[j]),
        );
        if spec.perturbed() && spec.rho {
            terms.push(ds[j] * abs_pow_diff(tu[j], new, q) / q);
        }
    }
    Ok(pairwise_sum(&terms))
}

/// Nodal gradient of [`energy`], i.e. the weak residual `𝒜(U, φ_i) - ⟨F, φ_i⟩`
/// for each nodal basis function. For `p < 2` (or `q < 2`) the flux factor
/// is regularized with [`GRAD_REG_EPS`].
pub fn energy_gradient(u: &FieldPair, spec: &ProblemSpec) -> Result<FieldPair, FormError> {
    spec.check(u)?;
    let mut out = weak_operator(u, spec, true);
    let dom = spec.domain();
    let dx = dom.dx_weights();
    for i in 0..out.len() {
        out[i] -= dx[i] * spec.f[i];
    }
    for (j, &n) in dom.boundary_nodes().iter().enumerate() {
        out[n] -= spec.bw[j] * spec.g[j];
    }
    Ok(FieldPair::new(out))
}

/// Nodal vector of `𝒜(U, φ_i)`.
fn weak_operator(u: &FieldPair, spec: &ProblemSpec, regularize: bool) -> Vec<f64> {
    let dom = spec.domain();
    let vals = u.values();
    let (p, q) = (spec.p, spec.q);
    let mut out = vec![0.0; vals.len()];

    let gop = dom.grad_op();
    let dim = gop.dim();
    for (e, st) in gop.stencils().iter().enumerate() {
        let a = gop.element_gradient(e, vals);
        let k = st.measure * flux_factor(sq_norm(a), p, regularize);
        for (m, &n) in st.nodes.iter().enumerate() {
            let acc: f64 = a
                .iter()
                .zip(&st.coeffs[m * dim..(m + 1) * dim])
                .map(|(x, c)| x * c)
                .sum();
            out[n] += k * acc;
        }
    }
    let bnodes = dom.boundary_nodes();
    let trace = u.trace(dom);
    if spec.rho {
        let top = dom.tangential_grad_op();
        for (e, st) in top.stencils().iter().enumerate() {
            let t = top.element_gradient(e, &trace)[0];
            let k = st.measure * flux_factor(t * t, q, regularize) * t;
            for (m, &pos) in st.nodes.iter().enumerate() {
                out[bnodes[pos]] += k * st.coeffs[m];
            }
        }
    }
    let dx = dom.dx_weights();
    for i in 0..vals.len() {
        let mut r = spec.beta1[i] * spec.alpha1.alpha(vals[i]);
        if spec.perturbed() {
            r += scalar_flux(vals[i], p);
        }
        out[i] += dx[i] * r;
    }
    let ds = dom.dsigma_weights();
    for (j, &n) in bnodes.iter().enumerate() {
        out[n] += spec.bw[j] * spec.beta2[j] * spec.alpha2.alpha(trace[j]);
        if spec.perturbed() && spec.rho {
            out[n] += ds[j] * scalar_flux(trace[j], q);
        }
    }
    out
}

/// The weak form `𝒜(U, V)`: nonlinear in `U`, linear in `V`.
pub fn form_a(u: &FieldPair, v: &FieldPair, spec: &ProblemSpec) -> Result<f64, FormError> {
    spec.check(u)?;
    spec.check(v)?;
    let dom = spec.domain();
    let (uv, vv) = (u.values(), v.values());
    let (p, q) = (spec.p, spec.q);
    let mut terms = Vec::with_capacity(dom.grad_op().len() + 2 * uv.len());

    let gop = dom.grad_op();
    for (e, st) in gop.stencils().iter().enumerate() {
        let a = gop.element_gradient(e, uv);
        let b = gop.element_gradient(e, vv);
        terms.push(st.measure * flux_factor(sq_norm(a), p, false) * (a[0] * b[0] + a[1] * b[1]));
    }
    let (tu, tv) = (u.trace(dom), v.trace(dom));
    if spec.rho {
        let top = dom.tangential_grad_op();
        for (e, st) in top.stencils().iter().enumerate() {
            let a = top.element_gradient(e, &tu)[0];
            let b = top.element_gradient(e, &tv)[0];
            terms.push(st.measure * flux_factor(a * a, q, false) * a * b);
        }
    }
    let dx = dom.dx_weights();
    for i in 0..uv.len() {
        let mut r = spec.beta1[i] * spec.alpha1.alpha(uv[i]);
        if spec.perturbed() {
            r += scalar_flux(uv[i], p);
        }
        terms.push(dx[i] * r * vv[i]);
    }
    let ds = dom.dsigma_weights();
    for j in 0..tu.len() {
        terms.push(spec.bw[j] * spec.beta2[j] * spec.alpha2.alpha(tu[j]) * tv[j]);
        if spec.perturbed() && spec.rho {
            terms.push(ds[j] * scalar_flux(tu[j], q) * tv[j]);
        }
    }
    Ok(pairwise_sum(&terms))
}

/// `⟨F, V⟩ = ∫ f v dx + ∫ g v dσ/b`.
pub fn pairing(v: &FieldPair, spec: &ProblemSpec) -> Result<f64, FormError> {
    spec.check(v)?;
    let tv = v.trace(spec.domain());
    Ok(spec.domain().integrate_pair(
        &v.values()
            .iter()
            .zip(&spec.f)
            .map(|(a, b)| a * b)
            .collect::<Vec<_>>(),
        &tv.iter()
            .zip(&spec.g)
            .map(|(a, b)| a * b)
            .collect::<Vec<_>>(),
    )?)
}

/// `𝒜(U, U - V) - 𝒜(V, U - V)`; the data terms cancel.
pub fn monotonicity_gap(
    u: &FieldPair,
    v: &FieldPair,
    spec: &ProblemSpec,
) -> Result<f64, FormError> {
    let w = u.sub(v);
    Ok(form_a(u, &w, spec)? - form_a(v, &w, spec)?)
}

/// `(|a|^{p-2}a - |b|^{p-2}b)·(a - b)` for vectors of equal length.
pub fn monotone_product(a: &[f64], b: &[f64], p: f64) -> f64 {
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let fa = if na == 0.0 { 0.0 } else { na.powf(p - 2.0) };
    let fb = if nb == 0.0 { 0.0 } else { nb.powf(p - 2.0) };
    a.iter()
        .zip(b)
        .map(|(x, y)| (fa * x - fb * y) * (x - y))
        .sum()
}

/// Constant `c_p = 2^{2-p}` in `(|a|^{p-2}a - |b|^{p-2}b)·(a - b) >= c_p |a - b|^p`,
/// valid for `p >= 2` in any dimension; sharp at `b = -a`.
pub fn ine_bw_constant(p: f64) -> Option<f64> {
    (p >= 2.0).then(|| 2f64.powf(2.0 - p))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(n: usize) -> Arc<DiscreteDomain> {
        Arc::new(DiscreteDomain::rectangle(n, n, 1.0, 1.0, |_| 1.0).unwrap())
    }

    #[test]
    fn zero_field_zero_energy_zero_gradient() {
        let dom = square(3);
        let spec = ProblemSpec::new(
            dom.clone(),
            3.0,
            2.5,
            true,
            Mode::Perturbed,
            NFunction::arctan(),
            NFunction::power(1.0, 3.0).unwrap(),
        )
        .unwrap();
        let z = FieldPair::zeros(&dom);
        assert_eq!(energy(&z, &spec).unwrap(), 0.0);
        assert!(energy_gradient(&z, &spec)
            .unwrap()
            .values()
            .iter()
            .all(|g| *g == 0.0));
    }

    #[test]
    fn constant_field_energy_and_residual() {
        let dom = Arc::new(DiscreteDomain::interval(2, 1.0, 1.0, 2.0).unwrap());
        let a1 = NFunction::arctan();
        let a2 = NFunction::power(1.0, 3.0).unwrap();
        let spec = ProblemSpec::new(
            dom.clone(),
            2.0,
            2.0,
            true,
            Mode::Resonant,
            a1.clone(),
            a2.clone(),
        )
        .unwrap();
        let c = 0.7;
        let u = FieldPair::constant(&dom, c);
        let (l1, l2) = dom.measures();
        let e = energy(&u, &spec).unwrap();
        assert!((e - (l1 * a1.lambda(c) + l2 * a2.lambda(c))).abs() < 1e-14);
        // Hand assembly on two cells of width 1/2: dx = (1/4, 1/2, 1/4),
        // boundary weights dσ/b = (1, 1/2).
        let g = energy_gradient(&u, &spec).unwrap();
        let expected = [
            0.25 * a1.alpha(c) + 1.0 * a2.alpha(c),
            0.5 * a1.alpha(c),
            0.25 * a1.alpha(c) + 0.5 * a2.alpha(c),
        ];
        for (x, y) in g.values().iter().zip(expected) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn linear_profile_energy() {
        let dom = Arc::new(DiscreteDomain::interval(8, 1.0, 1.0, 1.0).unwrap());
        let spec = ProblemSpec::new(
            dom.clone(),
            2.0,
            2.0,
            false,
            Mode::Resonant,
            NFunction::zero(),
            NFunction::zero(),
        )
        .unwrap();
        let u = FieldPair::from_fn(&dom, |c| c[0]);
        assert!((energy(&u, &spec).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn form_against_one_kills_gradient_terms() {
        let dom = square(4);
        let spec = ProblemSpec::new(
            dom.clone(),
            3.0,
            2.5,
            true,
            Mode::Resonant,
            NFunction::arctan(),
            NFunction::power(2.0, 1.5).unwrap(),
        )
        .unwrap();
        let u = FieldPair::from_fn(&dom, |c| (3.0 * c[0]).sin() + c[1] * c[1]);
        let one = FieldPair::constant(&dom, 1.0);
        let lhs = form_a(&u, &one, &spec).unwrap();
        let f: Vec<f64> = u.values().iter().map(|v| spec.alpha1().alpha(*v)).collect();
        let g: Vec<f64> = u
            .trace(&dom)
            .iter()
            .map(|v| spec.alpha2().alpha(*v))
            .collect();
        let rhs = dom.integrate_pair(&f, &g).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn perturbed_constant_against_one() {
        let dom = square(4);
        let (p, q) = (3.0, 2.5);
        let a1 = NFunction::power(1.0, 3.0).unwrap();
        let a2 = NFunction::arctan();
        let spec = ProblemSpec::new(
            dom.clone(),
            p,
            q,
            true,
            Mode::Perturbed,
            a1.clone(),
            a2.clone(),
        )
        .unwrap();
        let c: f64 = -0.8;
        let u = FieldPair::constant(&dom, c);
        let one = FieldPair::constant(&dom, 1.0);
        let v = form_a(&u, &one, &spec).unwrap();
        let expected = 1.0 * (c.abs().powf(p - 2.0) * c + a1.alpha(c))
            + 4.0 * (c.abs().powf(q - 2.0) * c + a2.alpha(c));
        assert!((v - expected).abs() < 1e-12);
    }

    #[test]
    fn perturbed_mode_requires_unit_weight() {
        let dom = Arc::new(DiscreteDomain::rectangle(2, 2, 1.0, 1.0, |_| 2.0).unwrap());
        let r = ProblemSpec::new(
            dom,
            2.0,
            2.0,
            true,
            Mode::Perturbed,
            NFunction::zero(),
            NFunction::zero(),
        );
        assert!(matches!(r, Err(FormError::PerturbedNeedsUnitWeight)));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let dom = square(2);
        let spec = ProblemSpec::new(
            dom.clone(),
            2.0,
            2.0,
            true,
            Mode::Resonant,
            NFunction::zero(),
            NFunction::zero(),
        )
        .unwrap();
        let bad = FieldPair::new(vec![0.0; 3]);
        assert!(matches!(
            energy(&bad, &spec),
            Err(FormError::DimensionMismatch(_))
        ));
        assert!(spec.clone().with_data(vec![0.0; 2], vec![]).is_err());
    }

    #[test]
    fn gap_at_p2_is_quadratic_form() {
        let dom = square(3);
        let spec = ProblemSpec::new(
            dom.clone(),
            2.0,
            2.0,
            true,
            Mode::Perturbed,
            NFunction::zero(),
            NFunction::zero(),
        )
        .unwrap();
        let u = FieldPair::from_fn(&dom, |c| c[0] - 2.0 * c[1] * c[1]);
        let v = FieldPair::from_fn(&dom, |c| (c[0] * c[1]).cos());
        let gap = monotonicity_gap(&u, &v, &spec).unwrap();
        // At p = q = 2 the form is linear, so the gap is 2 E_0(u - v) with
        // E_0 the data-free energy.
        let w = u.sub(&v);
        let direct = 2.0 * energy(&w, &spec).unwrap();
        assert!((gap - direct).abs() < 1e-12 * direct.abs().max(1.0));
        assert_eq!(monotonicity_gap(&u, &u, &spec).unwrap(), 0.0);
    }

    #[test]
    fn bw_constant_table() {
        assert_eq!(ine_bw_constant(2.0), Some(1.0));
        assert_eq!(ine_bw_constant(3.0), Some(0.5));
        assert_eq!(ine_bw_constant(4.0), Some(0.25));
        assert_eq!(ine_bw_constant(1.5), None);
    }
}
