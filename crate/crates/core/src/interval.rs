use std::fmt;

/// An interval of the extended real line with explicit openness flags.
///
/// Infinite endpoints are always treated as open.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_open: bool,
    pub hi_open: bool,
}

/// Where a point sits relative to an interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    Interior,
    /// In the closure but not the interior, or within the boundary band.
    Boundary,
    Exterior,
}

impl Interval {
    pub fn new(lo: f64, hi: f64, lo_open: bool, hi_open: bool) -> Self {
        Interval {
            lo,
            hi,
            lo_open: lo_open || lo.is_infinite(),
            hi_open: hi_open || hi.is_infinite(),
        }
    }

    pub fn real_line() -> Self {
        Interval::new(f64::NEG_INFINITY, f64::INFINITY, true, true)
    }

    pub fn point(x: f64) -> Self {
        Interval::new(x, x, false, false)
    }

    pub fn open(lo: f64, hi: f64) -> Self {
        Interval::new(lo, hi, true, true)
    }

    /// Symmetric interval `(-h, h)` or `[-h, h]`.
    pub fn symmetric(h: f64, open: bool) -> Self {
        Interval::new(-h, h, open, open)
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn has_interior(&self) -> bool {
        self.hi > self.lo
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Scale by a strictly positive factor.
    pub fn scale(&self, factor: f64) -> Self {
        assert!(factor > 0.0, "interval scale factor must be positive");
        Interval::new(
            self.lo * factor,
            self.hi * factor,
            self.lo_open,
            self.hi_open,
        )
    }

    /// Minkowski sum: an endpoint is open if either summand's endpoint is open.
    pub fn minkowski_sum(&self, other: &Interval) -> Self {
        Interval::new(
            self.lo + other.lo,
            self.hi + other.hi,
            self.lo_open || other.lo_open,
            self.hi_open || other.hi_open,
        )
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_open {
            x > self.lo
        } else {
            x >= self.lo
        };
        let below = if self.hi_open {
            x < self.hi
        } else {
            x <= self.hi
        };
        above && below
    }

    pub fn contains_interior(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }

    /// Classify `x`, treating points within `band * max(1, |endpoint|)` of a
    /// finite endpoint as boundary points.
    pub fn place(&self, x: f64, band: f64) -> Placement {
        let near = |e: f64| e.is_finite() && (x - e).abs() <= band * e.abs().max(1.0);
        if near(self.lo) || near(self.hi) {
            return Placement::Boundary;
        }
        if self.contains_interior(x) {
            Placement::Interior
        } else if self.contains(x) {
            Placement::Boundary
        } else {
            Placement::Exterior
        }
    }

    /// Nearest point of the closure to `x`.
    pub fn clamp(&self, x: f64) -> f64 {
        x.max(self.lo).min(self.hi)
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let (lo, lo_open) = if self.lo > other.lo {
            (self.lo, self.lo_open)
        } else if other.lo > self.lo {
            (other.lo, other.lo_open)
        } else {
            (self.lo, self.lo_open || other.lo_open)
        };
        let (hi, hi_open) = if self.hi < other.hi {
            (self.hi, self.hi_open)
        } else if other.hi < self.hi {
            (other.hi, other.hi_open)
        } else {
            (self.hi, self.hi_open || other.hi_open)
        };
        if lo > hi || (lo == hi && (lo_open || hi_open)) {
            None
        } else {
            Some(Interval::new(lo, hi, lo_open, hi_open))
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}, {}{}",
            if self.lo_open { '(' } else { '[' },
            self.lo,
            self.hi,
            if self.hi_open { ')' } else { ']' }
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minkowski_sum_propagates_openness_and_infinity() {
        let a = Interval::open(-1.0, 1.0);
        let z = Interval::point(0.0);
        let s = a.scale(2.0).minkowski_sum(&z);
        assert_eq!(s, Interval::open(-2.0, 2.0));
        let r = Interval::real_line().minkowski_sum(&z);
        assert!(r.lo.is_infinite() && r.lo_open && r.hi_open);
    }

    #[test]
    fn placement_respects_band_and_flags() {
        let a = Interval::open(-1.0, 1.0);
        assert_eq!(a.place(0.5, 1e-9), Placement::Interior);
        assert_eq!(a.place(1.0, 1e-9), Placement::Boundary);
        assert_eq!(a.place(1.0 + 1e-12, 1e-9), Placement::Boundary);
        assert_eq!(a.place(1.1, 1e-9), Placement::Exterior);
        let z = Interval::point(0.0);
        assert_eq!(z.place(0.0, 0.0), Placement::Boundary);
        assert_eq!(
            Interval::real_line().place(1e300, 1e-9),
            Placement::Interior
        );
    }

    #[test]
    fn intersection_of_touching_open_intervals_is_empty() {
        let a = Interval::open(0.0, 1.0);
        let b = Interval::open(1.0, 2.0);
        assert!(a.intersect(&b).is_none());
        let c = Interval::new(1.0, 2.0, false, true);
        assert!(Interval::new(0.0, 1.0, true, false).intersect(&c).is_some());
    }
}
