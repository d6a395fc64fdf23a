//! Solvability test for the resonant problem: the mean of the data has to
//! lie in `𝕀 = λ₁ R(α₁) + λ₂ R(α₂)`.

use std::fmt;

use thiserror::Error;

use crate::forms::{Mode, ProblemSpec};
use crate::interval::{Interval, Placement};
use crate::orlicz::NFunction;

/// Relative width of the band around the endpoints of `𝕀` that is reported
/// as [`Classification::BoundaryCase`].
pub const BOUNDARY_BAND: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResonanceError {
    #[error("solvability is defined for the resonant mode only")]
    BadMode,
    #[error("mean {mean} is not strictly inside {interval}")]
    NotStrictlySolvable { mean: f64, interval: Interval },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    StrictlySolvable,
    BoundaryCase,
    Unsolvable,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::StrictlySolvable => "StrictlySolvable",
            Classification::BoundaryCase => "BoundaryCase",
            Classification::Unsolvable => "Unsolvable",
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolvabilityVerdict {
    pub mean_total: f64,
    pub interval: Interval,
    pub classification: Classification,
}

impl SolvabilityVerdict {
    pub const CSV_HEADER: &'static str = "mean_total,lo,hi,lo_open,hi_open,classification";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.16e},{:.16e},{:.16e},{},{},{}",
            self.mean_total,
            self.interval.lo,
            self.interval.hi,
            self.interval.lo_open as u8,
            self.interval.hi_open as u8,
            self.classification
        )
    }
}

/// `R(α)`: the declared range when present, otherwise the estimate made when
/// the N-function was built from samples.
pub fn range_interval(nf: &NFunction) -> Interval {
    nf.range()
}

/// `λ₁ R(α₁) + λ₂ R(α₂)`.
pub fn solvability_interval(
    lambda1: f64,
    lambda2: f64,
    a1: &NFunction,
    a2: &NFunction,
) -> Interval {
    range_interval(a1)
        .scale(lambda1)
        .minkowski_sum(&range_interval(a2).scale(lambda2))
}

pub fn classify(mean: f64, interval: &Interval, band: f64) -> Classification {
    match interval.place(mean, band) {
        Placement::Interior => Classification::StrictlySolvable,
        Placement::Boundary => Classification::BoundaryCase,
        Placement::Exterior => Classification::Unsolvable,
    }
}

pub fn solvability(spec: &ProblemSpec) -> Result<SolvabilityVerdict, ResonanceError> {
    if spec.mode() != Mode::Resonant {
        return Err(ResonanceError::BadMode);
    }
    let (l1, l2) = spec.domain().measures();
    let interval = solvability_interval(l1, l2, spec.alpha1(), spec.alpha2());
    let mean_total = spec.mean_total();
    Ok(SolvabilityVerdict {
        mean_total,
        interval,
        classification: classify(mean_total, &interval, BOUNDARY_BAND),
    })
}

/// Constants `c_j ∈ R(α_j)` with `λ₁c₁ + λ₂c₂` equal to the mean, and
/// preimages `d_j = α_j⁻¹(c_j)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSplit {
    pub c1: f64,
    pub c2: f64,
    pub d1: f64,
    pub d2: f64,
}

/// Split the mean of the data between the two ranges.
///
/// The proportional choice `c₁ = c₂ = mean/(λ₁+λ₂)` is used when it is
/// interior to both ranges. Otherwise `c₁` is taken from the feasible set
/// `R(α₁) ∩ (mean - λ₂R(α₂))/λ₁`: its only point if degenerate, the
/// proportional value clamped to the middle half if bounded, and a point a
/// quarter unit (relative to the endpoint) inside the finite end otherwise.
pub fn split_mean(spec: &ProblemSpec) -> Result<MeanSplit, ResonanceError> {
    let verdict = solvability(spec)?;
    if verdict.classification != Classification::StrictlySolvable {
        return Err(ResonanceError::NotStrictlySolvable {
            mean: verdict.mean_total,
            interval: verdict.interval,
        });
    }
    let (l1, l2) = spec.domain().measures();
    let (c1, c2) = split_values(
        verdict.mean_total,
        l1,
        l2,
        &spec.alpha1().range(),
        &spec.alpha2().range(),
    );
    Ok(MeanSplit {
        c1,
        c2,
        d1: spec.alpha1().alpha_inverse(c1),
        d2: spec.alpha2().alpha_inverse(c2),
    })
}

fn split_values(m: f64, l1: f64, l2: f64, r1: &Interval, r2: &Interval) -> (f64, f64) {
    let cs = m / (l1 + l2);
    if r1.contains_interior(cs) && r2.contains_interior(cs) {
        return (cs, cs);
    }
    if !r2.has_interior() {
        let c2 = r2.lo;
        return ((m - l2 * c2) / l1, c2);
    }
    if !r1.has_interior() {
        let c1 = r1.lo;
        return (c1, (m - l1 * c1) / l2);
    }
    let shifted = Interval::open((m - l2 * r2.hi) / l1, (m - l2 * r2.lo) / l1);
    let feasible = Interval::open(r1.lo, r1.hi)
        .intersect(&shifted)
        .expect("a strictly solvable mean has a nonempty feasible set");
    let c1 = if !feasible.has_interior() {
        feasible.lo
    } else if feasible.is_bounded() {
        let w = 0.25 * feasible.width();
        cs.max(feasible.lo + w).min(feasible.hi - w)
    } else if feasible.lo.is_finite() {
        feasible.lo + 0.25 * feasible.lo.abs().max(1.0)
    } else {
        feasible.hi - 0.25 * feasible.hi.abs().max(1.0)
    };
    (c1, (m - l1 * c1) / l2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DiscreteDomain;
    use std::f64::consts::FRAC_PI_2;
    use std::sync::Arc;

    fn spec_with(b: f64, a1: NFunction, a2: NFunction) -> ProblemSpec {
        let dom = Arc::new(DiscreteDomain::rectangle(4, 4, 1.0, 1.0, move |_| b).unwrap());
        ProblemSpec::new(dom, 2.0, 2.0, true, Mode::Resonant, a1, a2).unwrap()
    }

    #[test]
    fn ranges_of_registry_functions() {
        assert_eq!(
            range_interval(&NFunction::arctan()),
            Interval::open(-FRAC_PI_2, FRAC_PI_2)
        );
        assert_eq!(
            range_interval(&NFunction::power(1.0, 2.0).unwrap()),
            Interval::real_line()
        );
        assert_eq!(range_interval(&NFunction::zero()), Interval::point(0.0));
    }

    #[test]
    fn arctan_threshold_classification() {
        let spec = spec_with(1.0, NFunction::arctan(), NFunction::zero());
        let inside = solvability(&spec.clone().with_constant_data(1.0, 0.0)).unwrap();
        assert_eq!(inside.classification, Classification::StrictlySolvable);
        assert_eq!(inside.interval, Interval::open(-FRAC_PI_2, FRAC_PI_2));
        let outside = solvability(&spec.clone().with_constant_data(2.0, 0.0)).unwrap();
        assert_eq!(outside.classification, Classification::Unsolvable);
        let edge = solvability(&spec.with_constant_data(FRAC_PI_2, 0.0)).unwrap();
        assert_eq!(edge.classification, Classification::BoundaryCase);
    }

    #[test]
    fn cubic_is_always_solvable() {
        let spec = spec_with(1.0, NFunction::power(1.0, 3.0).unwrap(), NFunction::zero());
        let v = solvability(&spec.with_constant_data(1e6, -3e5)).unwrap();
        assert_eq!(v.classification, Classification::StrictlySolvable);
    }

    #[test]
    fn split_zero_mean() {
        let spec = spec_with(1.0, NFunction::arctan(), NFunction::zero());
        let s = split_mean(&spec).unwrap();
        assert_eq!((s.c1, s.c2, s.d1, s.d2), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn split_forced_onto_interior_range() {
        // b = 4 on the unit square gives λ₁ = λ₂ = 1.
        let spec =
            spec_with(4.0, NFunction::arctan(), NFunction::zero()).with_constant_data(1.0, 0.0);
        let (l1, l2) = spec.domain().measures();
        assert!((l1 - 1.0).abs() < 1e-15 && (l2 - 1.0).abs() < 1e-15);
        let s = split_mean(&spec).unwrap();
        assert_eq!(s.c2, 0.0);
        assert!((s.c1 - 1.0).abs() < 1e-14);
        assert!((s.d1 - 1f64.tan()).abs() < 1e-10);
        assert!((s.d1.atan() - s.c1).abs() < 1e-10);
    }

    #[test]
    fn split_proportional() {
        let (c1, c2) = split_values(
            3.0,
            1.0,
            2.0,
            &Interval::real_line(),
            &Interval::real_line(),
        );
        assert_eq!((c1, c2), (1.0, 1.0));
        let cube = NFunction::power(1.0, 3.0).unwrap();
        assert!((cube.alpha_inverse(1.0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn split_bounded_feasible_set_is_interior_and_exact() {
        let r = Interval::open(-FRAC_PI_2, FRAC_PI_2);
        let (l1, l2) = (1.0, 4.0);
        for &m in &[7.0, -7.0, 7.8, 0.3] {
            let (c1, c2) = split_values(m, l1, l2, &r, &r);
            assert!(
                r.contains_interior(c1) && r.contains_interior(c2),
                "m = {m}: {c1}, {c2}"
            );
            assert!((l1 * c1 + l2 * c2 - m).abs() <= 1e-12 * (1.0 + m.abs()));
        }
    }

    #[test]
    fn split_rejects_unsolvable() {
        let spec =
            spec_with(1.0, NFunction::arctan(), NFunction::zero()).with_constant_data(2.0, 0.0);
        assert!(matches!(
            split_mean(&spec),
            Err(ResonanceError::NotStrictlySolvable { .. })
        ));
    }

    #[test]
    fn csv_row_format() {
        let v = SolvabilityVerdict {
            mean_total: 1.0,
            interval: Interval::open(-2.0, 2.0),
            classification: Classification::StrictlySolvable,
        };
        assert_eq!(
            v.csv_row(),
            "1.0000000000000000e0,-2.0000000000000000e0,2.0000000000000000e0,1,1,StrictlySolvable"
        );
    }
}
