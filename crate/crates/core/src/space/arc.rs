use std::fmt;

use num::{Signed, Zero};
use serde::{Deserialize, Serialize};

use super::set::{Interval, IntervalSet};
use crate::error::{Error, Result};
use crate::rational::{frac, int, Rational};
use crate::serde_rational;

/// Open arc `{x : dist(x, center) < radius}` on the circle.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawArc", into = "RawArc")]
pub struct Arc {
    center: Rational,
    radius: Rational,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArc {
    #[serde(with = "serde_rational")]
    center: Rational,
    #[serde(with = "serde_rational")]
    radius: Rational,
}

impl TryFrom<RawArc> for Arc {
    type Error = Error;
    fn try_from(raw: RawArc) -> Result<Self> {
        Arc::new(raw.center, raw.radius)
    }
}

impl From<Arc> for RawArc {
    fn from(a: Arc) -> Self {
        RawArc { center: a.center, radius: a.radius }
    }
}

fn wrap_unit(x: Rational) -> Rational {
    let fl = x.floor();
    x - fl
}

impl Arc {
    /// Builds an arc; the centre is reduced into `[0, 1)`.
    pub fn new(center: Rational, radius: Rational) -> Result<Arc> {
        if !radius.is_positive() {
            return Err(Error::NonPositiveRadius(radius));
        }
        Ok(Arc { center: wrap_unit(center), radius })
    }

    /// The open interval `(lo, hi)` with `0 <= lo < hi <= 1`, as an arc.
    pub fn from_endpoints(lo: Rational, hi: Rational) -> Result<Arc> {
        let two = int(2);
        let radius = (&hi - &lo) / &two;
        Arc::new((lo + hi) / two, radius)
    }

    pub fn center(&self) -> &Rational {
        &self.center
    }

    pub fn radius(&self) -> &Rational {
        &self.radius
    }

    pub fn is_full(&self) -> bool {
        self.radius >= frac(1, 2)
    }

    /// `aB`: same centre, radius scaled by `factor`.
    pub fn dilate(&self, factor: &Rational) -> Arc {
        assert!(factor.is_positive(), "dilation factor must be positive");
        Arc { center: self.center.clone(), radius: &self.radius * factor }
    }

    /// Diameter in the circle metric; the whole circle has diameter `1/2`.
    pub fn diameter(&self) -> Rational {
        if self.is_full() {
            frac(1, 2)
        } else {
            &self.radius * int(2)
        }
    }

    /// Linear pieces after cutting the circle at 0, and whether the point 0
    /// itself lies in the arc.
    pub(crate) fn pieces(&self) -> (Vec<Interval>, bool) {
        if self.is_full() {
            return (vec![Interval::unit()], true);
        }
        let lo = &self.center - &self.radius;
        let hi = &self.center + &self.radius;
        let one = int(1);
        if lo.is_negative() {
            (vec![Interval::new(Rational::zero(), hi), Interval::new(lo + one, int(1))], true)
        } else if hi > one {
            (vec![Interval::new(Rational::zero(), hi - one), Interval::new(lo, int(1))], true)
        } else {
            (vec![Interval::new(lo, hi)], false)
        }
    }

    pub fn to_set(&self) -> IntervalSet {
        IntervalSet::from_arc(self)
    }

    /// Open-arc intersection test.
    pub fn intersects(&self, other: &Arc) -> bool {
        if self.is_full() || other.is_full() {
            return true;
        }
        // circle distance between centres < r1 + r2
        let d = circle_distance(&self.center, &other.center);
        d < &self.radius + &other.radius
    }

    /// `self ⊆ other` as open arcs.
    pub fn is_subset_of(&self, other: &Arc) -> bool {
        if other.is_full() {
            return true;
        }
        if self.is_full() {
            return false;
        }
        let d = circle_distance(&self.center, &other.center);
        d + &self.radius <= other.radius
    }

    /// Whether the point `x` lies in the open arc.
    pub fn contains(&self, x: &Rational) -> bool {
        self.is_full() || circle_distance(&self.center, x) < self.radius
    }
}

/// Distance on `R/Z`, in `[0, 1/2]`.
pub fn circle_distance(x: &Rational, y: &Rational) -> Rational {
    let d = wrap_unit(x - y);
    let other = int(1) - &d;
    if d < other {
        d
    } else {
        other
    }
}

impl fmt::Display for Arc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "B({}, {})", self.center, self.radius)
    }
}
