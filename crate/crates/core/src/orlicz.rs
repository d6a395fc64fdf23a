//! N-functions generated by monotone nonlinearities, their complementary
//! functions, and the Orlicz modular / Luxemburg norm machinery built on them.
//!
//! An [`NFunction`] bundles a density `alpha` (odd, nondecreasing,
//! `alpha(0) = 0`) with its potential `Lambda(t) = int_0^|t| alpha` and the
//! complementary potential `Lambda~(t) = int_0^|t| alpha~`, where `alpha~` is
//! the generalized inverse `alpha~(s) = inf{tau > 0 : alpha(tau) > s}`.
//! Library nonlinearities ship closed forms; user closures fall back to
//! adaptive quadrature and bisection.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::interval::Interval;
use crate::numeric::{abs_pow, abs_pow_diff, adaptive_simpson, gauss_legendre5, pairwise_sum};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Absolute tolerance of the adaptive quadrature behind `Lambda`.
pub const LAMBDA_QUAD_TOL: f64 = 1e-10;

/// Relative variation allowed for the running supremum of `Lambda(2t)/Lambda(t)`
/// over the top two decades of a grid before the doubling constant is
/// declared unbounded.
pub const DELTA2_PLATEAU_TOL: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrliczError {
    #[error("alpha is not nondecreasing: alpha({t_lo}) = {a_lo} > alpha({t_hi}) = {a_hi}")]
    NotMonotone {
        t_lo: f64,
        a_lo: f64,
        t_hi: f64,
        a_hi: f64,
    },
    #[error("alpha is not odd at t = {t}: alpha(t) = {pos}, alpha(-t) = {neg}")]
    NotOdd { t: f64, pos: f64, neg: f64 },
    #[error("alpha(0) = {value}, expected 0")]
    NonzeroAtOrigin { value: f64 },
    #[error("evaluation grid is empty")]
    EmptyGrid,
    #[error("evaluation grid must contain finite, strictly positive points")]
    BadGrid,
    #[error("no Delta2 constant is attached to this N-function")]
    MissingDelta2Constant,
    #[error("modular is infinite for every tested scale")]
    NoFiniteBracket,
    #[error("sample weights differ")]
    WeightMismatch,
    #[error("invalid samples: {0}")]
    InvalidSamples(String),
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("unknown nonlinearity '{0}'")]
    UnknownName(String),
}

/// Piecewise-linear density given by a table on `t >= 0`, extended oddly to
/// negative arguments and linearly (with the last slope) past the last row.
#[derive(Debug)]
struct Table {
    t: Vec<f64>,
    a: Vec<f64>,
    /// `Lambda` at each breakpoint.
    cum: Vec<f64>,
}

impl Table {
    fn new(mut t: Vec<f64>, mut a: Vec<f64>) -> Result<Self, OrliczError> {
        if t.len() != a.len() || t.is_empty() {
            return Err(OrliczError::BadParameter(
                "table needs matching, non-empty columns".into(),
            ));
        }
        if t[0] < 0.0 {
            return Err(OrliczError::BadParameter(
                "table arguments must be >= 0".into(),
            ));
        }
        if t[0] == 0.0 {
            if a[0] != 0.0 {
                return Err(OrliczError::NonzeroAtOrigin { value: a[0] });
            }
        } else {
            t.insert(0, 0.0);
            a.insert(0, 0.0);
        }
        if t.len() < 2 {
            return Err(OrliczError::BadParameter(
                "table needs at least one row with t > 0".into(),
            ));
        }
        for i in 1..t.len() {
            if !(t[i] > t[i - 1]) || !t[i].is_finite() || !a[i].is_finite() {
                return Err(OrliczError::BadParameter(
                    "table arguments must be finite and strictly increasing".into(),
                ));
            }
            if a[i] < a[i - 1] {
                return Err(OrliczError::NotMonotone {
                    t_lo: t[i - 1],
                    a_lo: a[i - 1],
                    t_hi: t[i],
                    a_hi: a[i],
                });
            }
        }
        let mut cum = vec![0.0; t.len()];
        for i in 1..t.len() {
            cum[i] = cum[i - 1] + 0.5 * (t[i] - t[i - 1]) * (a[i] + a[i - 1]);
        }
        Ok(Table { t, a, cum })
    }

    fn last_slope(&self) -> f64 {
        let n = self.t.len();
        (self.a[n - 1] - self.a[n - 2]) / (self.t[n - 1] - self.t[n - 2])
    }

    /// Segment index `i` with `t[i] <= x`, clamped to the last segment.
    fn segment(&self, x: f64) -> usize {
        let idx = self.t.partition_point(|&ti| ti <= x);
        idx.saturating_sub(1).min(self.t.len() - 2)
    }

    fn alpha_pos(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let slope = (self.a[i + 1] - self.a[i]) / (self.t[i + 1] - self.t[i]);
        self.a[i] + slope * (x - self.t[i])
    }

    fn slope_at(&self, x: f64) -> f64 {
        let i = self.segment(x);
        (self.a[i + 1] - self.a[i]) / (self.t[i + 1] - self.t[i])
    }

    fn lambda_pos(&self, x: f64) -> f64 {
        let i = self.segment(x);
        self.cum[i] + 0.5 * (x - self.t[i]) * (self.a[i] + self.alpha_pos(x))
    }

    /// `Lambda(y) - Lambda(x)` for `0 <= x, y`, summed segment by segment.
    fn increment_pos(&self, x: f64, y: f64) -> f64 {
        if x > y {
            return -self.increment_pos(y, x);
        }
        let (i, j) = (self.segment(x), self.segment(y));
        if i == j {
            return 0.5 * (y - x) * (self.alpha_pos(x) + self.alpha_pos(y));
        }
        let mut acc = 0.5 * (self.t[i + 1] - x) * (self.alpha_pos(x) + self.a[i + 1]);
        acc += self.cum[j] - self.cum[i + 1];
        acc + 0.5 * (y - self.t[j]) * (self.a[j] + self.alpha_pos(y))
    }

    /// `inf{tau > 0 : alpha(tau) > s}` for `s >= 0`.
    fn inverse_pos(&self, s: f64) -> f64 {
        let n = self.t.len();
        for i in 0..n - 1 {
            if self.a[i + 1] > s {
                let slope = (self.a[i + 1] - self.a[i]) / (self.t[i + 1] - self.t[i]);
                return self.t[i] + (s - self.a[i]).max(0.0) / slope;
            }
        }
        let slope = self.last_slope();
        if slope > 0.0 {
            self.t[n - 1] + (s - self.a[n - 1]) / slope
        } else {
            f64::INFINITY
        }
    }
}

struct CustomAlpha {
    alpha: ScalarFn,
}

impl CustomAlpha {
    /// Generalized inverse on `s >= 0` by doubling then bisection.
    fn inverse_pos(&self, s: f64) -> f64 {
        let alpha = &self.alpha;
        let mut hi = 1.0_f64;
        let mut doublings = 0;
        while alpha(hi) <= s {
            hi *= 2.0;
            doublings += 1;
            if doublings > 1100 || !hi.is_finite() {
                return f64::INFINITY;
            }
        }
        let mut lo = 0.0_f64;
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if alpha(mid) > s {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

#[derive(Clone)]
enum Kind {
    Power { c: f64, r: f64 },
    Arctan,
    Linear { c: f64 },
    Zero,
    Table(Arc<Table>),
    Custom(Arc<CustomAlpha>),
}

/// A density `alpha` together with its potential, complementary potential and
/// range.
#[derive(Clone)]
pub struct NFunction {
    name: String,
    kind: Kind,
    range: Interval,
    delta2_constant: Option<f64>,
}

impl fmt::Debug for NFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NFunction")
            .field("name", &self.name)
            .field("range", &self.range)
            .field("delta2_constant", &self.delta2_constant)
            .finish()
    }
}

impl NFunction {
    /// `alpha(s) = c |s|^(r-1) s`.
    pub fn power(c: f64, r: f64) -> Result<Self, OrliczError> {
        if !(c > 0.0 && c.is_finite()) || !(r > 0.0 && r.is_finite()) {
            return Err(OrliczError::BadParameter(format!(
                "power nonlinearity needs c > 0 and r > 0, got c = {c}, r = {r}"
            )));
        }
        Ok(NFunction {
            name: "power".into(),
            kind: Kind::Power { c, r },
            range: Interval::real_line(),
            delta2_constant: Some(2f64.powf(r + 1.0)),
        })
    }

    pub fn arctan() -> Self {
        NFunction {
            name: "arctan".into(),
            kind: Kind::Arctan,
            range: Interval::symmetric(FRAC_PI_2, true),
            delta2_constant: None,
        }
    }

    /// `alpha(s) = c s`.
    pub fn linear(c: f64) -> Result<Self, OrliczError> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(OrliczError::BadParameter(format!(
                "linear nonlinearity needs c > 0, got {c}"
            )));
        }
        Ok(NFunction {
            name: "linear".into(),
            kind: Kind::Linear { c },
            range: Interval::real_line(),
            delta2_constant: Some(4.0),
        })
    }

    pub fn zero() -> Self {
        NFunction {
            name: "zero".into(),
            kind: Kind::Zero,
            range: Interval::point(0.0),
            delta2_constant: Some(1.0),
        }
    }

    /// Monotone table of `(t, alpha(t))` rows with `t >= 0`.
    pub fn from_table(t: Vec<f64>, a: Vec<f64>) -> Result<Self, OrliczError> {
        let table = Table::new(t, a)?;
        let bound = if table.last_slope() > 0.0 {
            f64::INFINITY
        } else {
            *table.a.last().unwrap()
        };
        let range = if bound.is_infinite() {
            Interval::real_line()
        } else {
            Interval::symmetric(bound, false)
        };
        Ok(NFunction {
            name: "custom-table".into(),
            kind: Kind::Table(Arc::new(table)),
            range,
            delta2_constant: None,
        })
    }

    /// Parse a `t,alpha` CSV table. Blank lines, `#` comments and a
    /// non-numeric header row are skipped.
    pub fn from_table_csv(text: &str) -> Result<Self, OrliczError> {
        let mut t = Vec::new();
        let mut a = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (Some(c0), Some(c1)) = (cols.next(), cols.next()) else {
                return Err(OrliczError::BadParameter(format!(
                    "table line {}: expected two columns",
                    lineno + 1
                )));
            };
            match (c0.parse::<f64>(), c1.parse::<f64>()) {
                (Ok(x), Ok(y)) => {
                    t.push(x);
                    a.push(y);
                }
                _ if t.is_empty() => continue,
                _ => {
                    return Err(OrliczError::BadParameter(format!(
                        "table line {}: cannot parse numbers",
                        lineno + 1
                    )))
                }
            }
        }
        Self::from_table(t, a)
    }

    /// Look up a library nonlinearity by registry name.
    ///
    /// Recognized names: `power` (params `c`, `r`), `arctan`, `linear`
    /// (param `c`, default 1), `zero`, `exponential` (`sgn(s)(e^{k|s|} - 1)`,
    /// param `k`, default 1). Tables go through
    /// [`NFunction::from_table_csv`].
    pub fn from_registry(name: &str, params: &BTreeMap<String, f64>) -> Result<Self, OrliczError> {
        let get = |key: &str, default: Option<f64>| {
            params.get(key).copied().or(default).ok_or_else(|| {
                OrliczError::BadParameter(format!("'{name}' needs parameter '{key}'"))
            })
        };
        match name {
            "power" => Self::power(get("c", Some(1.0))?, get("r", None)?),
            "arctan" => Ok(Self::arctan()),
            "linear" => Self::linear(get("c", Some(1.0))?),
            "zero" => Ok(Self::zero()),
            "exponential" => {
                let k = get("k", Some(1.0))?;
                if !(k > 0.0 && k.is_finite()) {
                    return Err(OrliczError::BadParameter(format!(
                        "exponential needs k > 0, got {k}"
                    )));
                }
                let mut nf =
                    nfunction_from_alpha(move |s: f64| s.signum() * (k * s.abs()).exp_m1(), 0.05)?;
                nf.name = "exponential".into();
                Ok(nf)
            }
            other => Err(OrliczError::UnknownName(other.to_string())),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn range(&self) -> Interval {
        self.range
    }

    pub fn delta2_constant(&self) -> Option<f64> {
        self.delta2_constant
    }

    pub fn with_delta2_constant(mut self, c2: f64) -> Self {
        self.delta2_constant = Some(c2);
        self
    }

    pub fn with_range(mut self, range: Interval) -> Self {
        self.range = range;
        self
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, Kind::Zero)
    }

    /// Exponent `r` of `c|s|^{r-1}s`; one for linear functions.
    pub fn power_exponent(&self) -> Option<f64> {
        match self.kind {
            Kind::Power { r, .. } => Some(r),
            Kind::Linear { .. } => Some(1.0),
            _ => None,
        }
    }

    pub fn alpha(&self, t: f64) -> f64 {
        match &self.kind {
            Kind::Power { c, r } => (c * abs_pow(t, *r)).copysign(t),
            Kind::Arctan => t.atan(),
            Kind::Linear { c } => c * t,
            Kind::Zero => 0.0,
            Kind::Table(tab) => tab.alpha_pos(t.abs()).copysign(t),
            Kind::Custom(cu) => (cu.alpha)(t),
        }
    }

    /// Derivative of `alpha`; one-sided slope at table breakpoints, central
    /// differences for user closures.
    pub fn alpha_derivative(&self, t: f64) -> f64 {
        match &self.kind {
            Kind::Power { c, r } => {
                if t == 0.0 {
                    if *r < 1.0 {
                        f64::INFINITY
                    } else if *r == 1.0 {
                        *c
                    } else {
                        0.0
                    }
                } else {
                    c * r * abs_pow(t, r - 1.0)
                }
            }
            Kind::Arctan => 1.0 / (1.0 + t * t),
            Kind::Linear { c } => *c,
            Kind::Zero => 0.0,
            Kind::Table(tab) => tab.slope_at(t.abs()),
            Kind::Custom(cu) => {
                let h = 1e-6 * (1.0 + t.abs());
                ((cu.alpha)(t + h) - (cu.alpha)(t - h)) / (2.0 * h)
            }
        }
    }

    /// `Lambda(t) = int_0^|t| alpha(s) ds`.
    pub fn lambda(&self, t: f64) -> f64 {
        let x = t.abs();
        if x == 0.0 {
            return 0.0;
        }
        match &self.kind {
            Kind::Power { c, r } => c * abs_pow(x, r + 1.0) / (r + 1.0),
            Kind::Arctan => x * x.atan() - 0.5 * (x * x).ln_1p(),
            Kind::Linear { c } => 0.5 * c * x * x,
            Kind::Zero => 0.0,
            Kind::Table(tab) => tab.lambda_pos(x),
            Kind::Custom(cu) => {
                let f = |s: f64| (cu.alpha)(s);
                adaptive_simpson(&f, 0.0, x, LAMBDA_QUAD_TOL)
            }
        }
    }

    /// `Lambda(b) - Lambda(a)`, evaluated without cancellation when `a` and
    /// `b` are close.
    pub fn lambda_increment(&self, a: f64, b: f64) -> f64 {
        if a == b {
            return 0.0;
        }
        let same_side = a * b > 0.0;
        let close = (b - a).abs() <= 0.25 * a.abs().max(b.abs());
        match &self.kind {
            Kind::Power { c, r } => c / (r + 1.0) * abs_pow_diff(a, b, r + 1.0),
            Kind::Linear { c } => 0.5 * c * (b - a) * (b + a),
            Kind::Zero => 0.0,
            Kind::Table(tab) if same_side => tab.increment_pos(a.abs(), b.abs()),
            Kind::Arctan if same_side && close => gauss_legendre5(|x| x.atan(), a, b),
            Kind::Custom(cu) if same_side && close => {
                let f = |x: f64| (cu.alpha)(x);
                adaptive_simpson(&f, a, b, LAMBDA_QUAD_TOL * 1e-3)
            }
            _ => self.lambda(b) - self.lambda(a),
        }
    }

    /// Generalized inverse `inf{tau > 0 : alpha(tau) > s}`, extended oddly.
    /// Returns `+-inf` past the range and `0` at `s = 0`.
    pub fn alpha_inverse(&self, s: f64) -> f64 {
        if s == 0.0 {
            return 0.0;
        }
        let x = s.abs();
        let inv = match &self.kind {
            Kind::Power { c, r } => (x / c).powf(1.0 / r),
            Kind::Arctan => {
                if x < FRAC_PI_2 {
                    x.tan()
                } else {
                    f64::INFINITY
                }
            }
            Kind::Linear { c } => x / c,
            Kind::Zero => f64::INFINITY,
            Kind::Table(tab) => tab.inverse_pos(x),
            Kind::Custom(cu) => cu.inverse_pos(x),
        };
        s.signum() * inv
    }

    /// Complementary potential `Lambda~(t) = int_0^|t| alpha~(s) ds`;
    /// `+inf` outside the range of `alpha`.
    pub fn lambda_tilde(&self, t: f64) -> f64 {
        let x = t.abs();
        if x == 0.0 {
            return 0.0;
        }
        match &self.kind {
            Kind::Power { c, r } => {
                let e = 1.0 + 1.0 / r;
                c.powf(-1.0 / r) * abs_pow(x, e) / e
            }
            Kind::Arctan => {
                if x < FRAC_PI_2 {
                    -x.cos().ln()
                } else {
                    f64::INFINITY
                }
            }
            Kind::Linear { c } => 0.5 * x * x / c,
            Kind::Zero => f64::INFINITY,
            Kind::Table(tab) => {
                let tau = tab.inverse_pos(x);
                if tau.is_infinite() {
                    f64::INFINITY
                } else {
                    x * tau - tab.lambda_pos(tau)
                }
            }
            Kind::Custom(cu) => {
                if self.range.hi.is_finite() && x >= self.range.hi {
                    return f64::INFINITY;
                }
                let f = |s: f64| cu.inverse_pos(s);
                adaptive_simpson(&f, 0.0, x, LAMBDA_QUAD_TOL)
            }
        }
    }
}

/// Build an N-function from an arbitrary density.
///
/// `alpha` is validated on a grid of spacing `sample_step` over `[0, 10]`
/// plus a logarithmic grid reaching `1e8`. `Lambda` comes from adaptive
/// Simpson quadrature and `Lambda~` from quadrature of the bisection-based
/// generalized inverse. The range is estimated from `alpha(1e4)` and
/// `alpha(1e8)` unless later overridden with [`NFunction::with_range`].
pub fn nfunction_from_alpha(
    alpha: impl Fn(f64) -> f64 + Send + Sync + 'static,
    sample_step: f64,
) -> Result<NFunction, OrliczError> {
    if !(sample_step > 0.0 && sample_step.is_finite()) {
        return Err(OrliczError::BadParameter(format!(
            "sample step must be positive, got {sample_step}"
        )));
    }
    let alpha: ScalarFn = Arc::new(alpha);
    let a0 = alpha(0.0);
    if a0 != 0.0 {
        return Err(OrliczError::NonzeroAtOrigin { value: a0 });
    }
    let n_lin = ((10.0 / sample_step).ceil() as usize).clamp(1, 20_000);
    let mut grid: Vec<f64> = (1..=n_lin).map(|k| k as f64 * sample_step).collect();
    grid.extend((-24..=32).map(|k| 10f64.powf(k as f64 / 4.0)));
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();

    let mut prev = (0.0_f64, 0.0_f64);
    for &t in &grid {
        let pos = alpha(t);
        let neg = alpha(-t);
        if (pos + neg).abs() > 1e-12 * (pos.abs() + neg.abs()) {
            return Err(OrliczError::NotOdd { t, pos, neg });
        }
        if pos < prev.1 - 1e-12 * prev.1.abs() {
            return Err(OrliczError::NotMonotone {
                t_lo: prev.0,
                a_lo: prev.1,
                t_hi: t,
                a_hi: pos,
            });
        }
        prev = (t, pos);
    }

    let range = estimate_range(&*alpha);
    Ok(NFunction {
        name: "custom".into(),
        kind: Kind::Custom(Arc::new(CustomAlpha { alpha })),
        range,
        delta2_constant: None,
    })
}

/// Range of an odd nondecreasing density, read off `alpha(1e4)` and
/// `alpha(1e8)`. A density that moves by less than `1e-3` relative between
/// the two probes is treated as bounded, with the supremum extrapolated
/// assuming `alpha(T) ~ L - K/T`; the endpoint is open when `alpha` is still
/// increasing there.
pub fn estimate_range(alpha: &dyn Fn(f64) -> f64) -> Interval {
    const T1: f64 = 1e4;
    const T2: f64 = 1e8;
    let a1 = alpha(T1);
    let a2 = alpha(T2);
    if !a2.is_finite() || a2 - a1 > 1e-3 * a2.abs() {
        return Interval::real_line();
    }
    let sup = a2 + (a2 - a1) * T1 / (T2 - T1);
    Interval::symmetric(sup, a2 > a1)
}

/// Outcome of a doubling-condition probe.
#[derive(Debug, Clone, PartialEq)]
pub struct Delta2Report {
    pub satisfied: bool,
    /// Supremum over the grid of `Lambda(2t)/Lambda(t)` (0/0 counted as 1).
    pub constant: f64,
    /// Largest `c` with `c t alpha(t) <= Lambda(t)` on the grid.
    pub sandwich_lower: f64,
    /// Whether `Lambda(t) <= t alpha(t)` held at every grid point.
    pub sandwich_upper_holds: bool,
    pub ratios: Vec<f64>,
}

fn validate_grid(grid: &[f64]) -> Result<Vec<f64>, OrliczError> {
    if grid.is_empty() {
        return Err(OrliczError::EmptyGrid);
    }
    if grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(OrliczError::BadGrid);
    }
    let mut g = grid.to_vec();
    g.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(g)
}

/// Logarithmic grid with `n` points between `lo` and `hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Default probe grid: 121 points, logarithmic from `1e-6` to `1e6`.
pub fn default_grid() -> Vec<f64> {
    log_grid(1e-6, 1e6, 121)
}

pub fn check_delta2(nf: &NFunction, t_grid: &[f64]) -> Result<Delta2Report, OrliczError> {
    let grid = validate_grid(t_grid)?;
    let mut ratios = Vec::with_capacity(grid.len());
    let mut sandwich_lower = f64::INFINITY;
    let mut upper_holds = true;
    for &t in &grid {
        let l1 = nf.lambda(t);
        let l2 = nf.lambda(2.0 * t);
        let ratio = if l1 == 0.0 && l2 == 0.0 {
            1.0
        } else if l1 == 0.0 || !l2.is_finite() || !l1.is_finite() {
            f64::INFINITY
        } else {
            l2 / l1
        };
        ratios.push(ratio);
        let ta = t * nf.alpha(t);
        if ta > 0.0 && l1.is_finite() {
            sandwich_lower = sandwich_lower.min(l1 / ta);
            if l1 > ta * (1.0 + 1e-12) {
                upper_holds = false;
            }
        }
    }
    let constant = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let top = *grid.last().unwrap();
    let lower_sup = grid
        .iter()
        .zip(&ratios)
        .filter(|(t, _)| **t <= top / 100.0)
        .map(|(_, r)| *r)
        .fold(f64::NEG_INFINITY, f64::max);
    let plateau = if lower_sup.is_finite() {
        constant <= lower_sup * (1.0 + DELTA2_PLATEAU_TOL)
    } else {
        lower_sup == f64::NEG_INFINITY
    };
    if !sandwich_lower.is_finite() {
        sandwich_lower = 1.0;
    }
    Ok(Delta2Report {
        satisfied: constant.is_finite() && plateau,
        constant,
        sandwich_lower,
        sandwich_upper_holds: upper_holds,
        ratios,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Nabla2Report {
    pub holds: bool,
    /// `c = 2^(C2 - 1)`.
    pub c_used: f64,
}

/// Check `2c Psi(t) <= Psi(ct)` with `c = 2^(C2 - 1)` for the complementary
/// potential `Psi = Lambda~`, using the attached doubling constant `C2`.
pub fn check_nabla2_from_delta2(
    nf: &NFunction,
    t_grid: &[f64],
) -> Result<Nabla2Report, OrliczError> {
    let c2 = nf
        .delta2_constant()
        .ok_or(OrliczError::MissingDelta2Constant)?;
    let grid = validate_grid(t_grid)?;
    let c = 2f64.powf(c2 - 1.0);
    let holds = grid.iter().all(|&t| {
        let lhs = 2.0 * c * nf.lambda_tilde(t);
        let rhs = nf.lambda_tilde(c * t);
        rhs.is_infinite() || lhs <= rhs * (1.0 + 1e-12)
    });
    Ok(Nabla2Report { holds, c_used: c })
}

/// Function samples paired with the quadrature weights of a measure.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSamples {
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedSamples {
    pub fn new(values: Vec<f64>, weights: Vec<f64>) -> Result<Self, OrliczError> {
        if values.len() != weights.len() {
            return Err(OrliczError::InvalidSamples(format!(
                "{} values but {} weights",
                values.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(OrliczError::InvalidSamples(
                "weights must be positive".into(),
            ));
        }
        Ok(WeightedSamples { values, weights })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn scaled(&self, factor: f64) -> Self {
        WeightedSamples {
            values: self.values.iter().map(|v| v * factor).collect(),
            weights: self.weights.clone(),
        }
    }
}

/// `sum_i w_i Lambda(v_i)`.
pub fn modular(samples: &WeightedSamples, nf: &NFunction) -> f64 {
    let terms: Vec<f64> = samples
        .values
        .iter()
        .zip(&samples.weights)
        .map(|(v, w)| w * nf.lambda(*v))
        .collect();
    pairwise_sum(&terms)
}

fn scaled_modular(samples: &WeightedSamples, nf: &NFunction, k: f64) -> f64 {
    let terms: Vec<f64> = samples
        .values
        .iter()
        .zip(&samples.weights)
        .map(|(v, w)| w * nf.lambda(v / k))
        .collect();
    pairwise_sum(&terms)
}

/// Luxemburg norm `inf{k > 0 : modular(u/k) <= 1}`.
///
/// Brackets geometrically, then bisects in `log k` until the bracket is
/// relatively narrower than `rel_tol / 4`. The upper end of the bracket is
/// returned, so `modular(u / norm) <= 1` always holds.
pub fn luxemburg_norm(
    samples: &WeightedSamples,
    nf: &NFunction,
    rel_tol: f64,
) -> Result<f64, OrliczError> {
    if !(rel_tol > 0.0) {
        return Err(OrliczError::BadParameter(format!(
            "rel_tol must be positive, got {rel_tol}"
        )));
    }
    let scale = samples.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Ok(0.0);
    }
    let ok = |k: f64| scaled_modular(samples, nf, k) <= 1.0;
    let (mut lo, mut hi);
    if ok(scale) {
        hi = scale;
        lo = scale * 0.5;
        let mut n = 0;
        while ok(lo) {
            hi = lo;
            lo *= 0.5;
            n += 1;
            if n > 2000 || lo == 0.0 {
                return Ok(0.0);
            }
        }
    } else {
        lo = scale;
        hi = scale * 2.0;
        let mut n = 0;
        while !ok(hi) {
            lo = hi;
            hi *= 2.0;
            n += 1;
            if n > 2000 || !hi.is_finite() {
                return Err(OrliczError::NoFiniteBracket);
            }
        }
    }
    while hi - lo > 0.25 * rel_tol * hi {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Both sides of the Orlicz-Hölder inequality `|sum w u v| <= 2 |u|_Lambda |v|_Lambda~`.
pub fn holder_orlicz(
    u: &WeightedSamples,
    v: &WeightedSamples,
    nf: &NFunction,
) -> Result<(f64, f64), OrliczError> {
    if u.weights != v.weights {
        return Err(OrliczError::WeightMismatch);
    }
    let terms: Vec<f64> = u
        .values
        .iter()
        .zip(&v.values)
        .zip(&u.weights)
        .map(|((a, b), w)| w * a * b)
        .collect();
    let lhs = pairwise_sum(&terms).abs();
    let dual = DualView(nf);
    let nu = luxemburg_norm(u, nf, 1e-10)?;
    let nv = dual.norm(v)?;
    Ok((lhs, 2.0 * nu * nv))
}

/// Luxemburg norm with respect to the complementary potential.
struct DualView<'a>(&'a NFunction);

impl DualView<'_> {
    fn norm(&self, samples: &WeightedSamples) -> Result<f64, OrliczError> {
        let scale = samples.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return Ok(0.0);
        }
        let m = |k: f64| {
            let terms: Vec<f64> = samples
                .values
                .iter()
                .zip(&samples.weights)
                .map(|(v, w)| w * self.0.lambda_tilde(v / k))
                .collect();
            pairwise_sum(&terms)
        };
        let mut hi = scale;
        let mut n = 0;
        while !(m(hi) <= 1.0) {
            hi *= 2.0;
            n += 1;
            if n > 2000 || !hi.is_finite() {
                return Err(OrliczError::NoFiniteBracket);
            }
        }
        let mut lo = hi * 0.5;
        n = 0;
        while m(lo) <= 1.0 {
            hi = lo;
            lo *= 0.5;
            n += 1;
            if n > 2000 || lo == 0.0 {
                return Ok(0.0);
            }
        }
        while hi - lo > 2.5e-11 * hi {
            let mid = (lo * hi).sqrt();
            if mid <= lo || mid >= hi {
                break;
            }
            if m(mid) <= 1.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }
}

/// Luxemburg norm for the complementary potential `Lambda~`.
pub fn complementary_luxemburg_norm(
    samples: &WeightedSamples,
    nf: &NFunction,
) -> Result<f64, OrliczError> {
    DualView(nf).norm(samples)
}
