//! Small numerical kernels shared by the energy, quadrature and norm code.

/// Deterministic pairwise (cascade) summation.
///
/// The split points depend only on the slice length, so the result is
/// bit-stable for a given input regardless of how the caller produced it.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        values.iter().sum()
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

/// `|x|^e`, using repeated multiplication when `e` is a small integer so that
/// scaling `x` by a power of two scales the result exactly.
pub fn abs_pow(x: f64, e: f64) -> f64 {
    let a = x.abs();
    if e.fract() == 0.0 && e.abs() <= 64.0 {
        a.powi(e as i32)
    } else {
        a.powf(e)
    }
}

/// `|b|^e - |a|^e` without catastrophic cancellation when `b` is close to `a`.
pub fn abs_pow_diff(a: f64, b: f64, e: f64) -> f64 {
    let (x, y) = (a.abs(), b.abs());
    if x > 0.0 && (a > 0.0) == (b > 0.0) && y != 0.0 {
        let rel = (y - x) / x;
        if rel.abs() <= 0.5 {
            return abs_pow(x, e) * (e * rel.ln_1p()).exp_m1();
        }
    }
    abs_pow(y, e) - abs_pow(x, e)
}

/// `(s + ds)^(e/2) - s^(e/2)` for squared magnitudes `s >= 0`, `s + ds >= 0`.
pub fn pow_half_diff(s: f64, ds: f64, e: f64) -> f64 {
    let half = 0.5 * e;
    if s > 0.0 {
        let rel = ds / s;
        if rel.abs() <= 0.5 {
            return s.powf(half) * (half * rel.ln_1p()).exp_m1();
        }
    }
    (s + ds).max(0.0).powf(half) - s.powf(half)
}

const GL5_NODES: [f64; 5] = [
    0.0,
    -0.538_469_310_105_683_1,
    0.538_469_310_105_683_1,
    -0.906_179_845_938_664,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

/// Five-point Gauss-Legendre rule on `[a, b]`.
pub fn gauss_legendre5(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for (x, w) in GL5_NODES.iter().zip(GL5_WEIGHTS.iter()) {
        acc += w * f(mid + half * x);
    }
    acc * half
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
///
/// The local acceptance test uses `max(abs_tol, rel_tol * |whole|)` so that
/// large integrals are not driven below their representable precision.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    if !whole.is_finite() {
        return whole;
    }
    simpson_step(f, a, b, fa, fm, fb, whole, abs_tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let refined = left + right;
    if !refined.is_finite() {
        return refined;
    }
    let err = refined - whole;
    let tol_eff = tol.max(1e-14 * refined.abs());
    if depth == 0 || err.abs() <= 15.0 * tol_eff {
        return refined + err / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Lumped discrete `L^r` norm `(sum w |v|^r)^(1/r)`; `r = inf` gives the max norm.
pub fn weighted_lp_norm(values: &[f64], weights: &[f64], r: f64) -> f64 {
    if r.is_infinite() {
        return values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    }
    let terms: Vec<f64> = values
        .iter()
        .zip(weights)
        .map(|(v, w)| w * abs_pow(*v, r))
        .collect();
    pairwise_sum(&terms).powf(1.0 / r)
}

pub fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}
