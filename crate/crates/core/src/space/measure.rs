use num::bigint::BigInt;
use num::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::arc::Arc;
use super::set::{Interval, IntervalSet};
use crate::error::{Error, Result};
use crate::rational::{self, dyadic, floor_scaled, frac, int, Rational};
use crate::serde_rational;

/// Probability measure with a piecewise-constant density on the `2^level`
/// dyadic cells `[j 2^-level, (j+1) 2^-level)`, together with its declared
/// doubling constants.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure", into = "RawMeasure")]
pub struct DoublingMeasure {
    level: u32,
    density: Vec<Rational>,
    lambda: Rational,
    r0: Rational,
    /// `cumulative[j]` is the mass of `[0, j 2^-level)`.
    cumulative: Vec<Rational>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeasure {
    level: u32,
    #[serde(with = "serde_rational::vec")]
    density: Vec<Rational>,
    #[serde(with = "serde_rational")]
    lambda: Rational,
    #[serde(with = "serde_rational")]
    r0: Rational,
}

impl TryFrom<RawMeasure> for DoublingMeasure {
    type Error = Error;
    fn try_from(raw: RawMeasure) -> Result<Self> {
        DoublingMeasure::new(raw.level, raw.density, raw.lambda, raw.r0)
    }
}

impl From<DoublingMeasure> for RawMeasure {
    fn from(m: DoublingMeasure) -> Self {
        RawMeasure { level: m.level, density: m.density, lambda: m.lambda, r0: m.r0 }
    }
}

/// Checks that `density` is a probability density on `2^level` cells.
pub fn validate_density(level: u32, density: &[Rational]) -> Result<()> {
    let expected = 1usize << level;
    if density.len() != expected {
        return Err(Error::DensityLength { level, expected, got: density.len() });
    }
    if let Some(neg) = density.iter().find(|d| d.is_negative()) {
        return Err(Error::NegativeDensity(neg.clone()));
    }
    let total = rational::sum(density.iter().cloned()) * dyadic(level);
    if !total.is_one() {
        return Err(Error::NotProbability(total));
    }
    Ok(())
}

impl DoublingMeasure {
    pub fn new(level: u32, density: Vec<Rational>, lambda: Rational, r0: Rational) -> Result<Self> {
        validate_density(level, &density)?;
        if lambda < int(1) {
            return Err(Error::BadLambda(lambda));
        }
        if !r0.is_positive() {
            return Err(Error::BadRadiusBound(r0));
        }
        let cell = dyadic(level);
        let mut cumulative = Vec::with_capacity(density.len() + 1);
        let mut acc = Rational::zero();
        cumulative.push(acc.clone());
        for d in &density {
            acc += d * &cell;
            cumulative.push(acc.clone());
        }
        Ok(DoublingMeasure { level, density, lambda, r0, cumulative })
    }

    /// Lebesgue measure, doubling with `lambda = 2` at every scale.
    pub fn lebesgue() -> Self {
        Self::lebesgue_with(int(2), frac(1, 2))
    }

    pub fn lebesgue_with(lambda: Rational, r0: Rational) -> Self {
        Self::new(0, vec![int(1)], lambda, r0).expect("lebesgue density is valid")
    }

    pub fn with_constants(&self, lambda: Rational, r0: Rational) -> Result<Self> {
        Self::new(self.level, self.density.clone(), lambda, r0)
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn density(&self) -> &[Rational] {
        &self.density
    }

    pub fn lambda(&self) -> &Rational {
        &self.lambda
    }

    pub fn r0(&self) -> &Rational {
        &self.r0
    }

    pub fn is_lebesgue(&self) -> bool {
        self.level == 0
    }

    /// `μ([0, x))` for `x` in `[0, 1]`.
    pub fn cdf(&self, x: &Rational) -> Rational {
        if self.level == 0 {
            return x.clone();
        }
        let cells = 1usize << self.level;
        let j = floor_scaled(x, self.level).to_usize().expect("x in [0, 1]");
        if j >= cells {
            return self.cumulative[cells].clone();
        }
        let left = Rational::new(BigInt::from(j), BigInt::one() << self.level);
        &self.cumulative[j] + &self.density[j] * (x - left)
    }

    pub fn interval(&self, iv: &Interval) -> Rational {
        self.cdf(&iv.hi) - self.cdf(&iv.lo)
    }

    /// Exact `μ(S)`.
    pub fn measure(&self, set: &IntervalSet) -> Rational {
        let ends: Vec<(BigInt, Rational)> = set
            .parts()
            .iter()
            .flat_map(|p| [(BigInt::one(), self.cdf(&p.hi)), (-BigInt::one(), self.cdf(&p.lo))])
            .collect();
        rational::weighted_sum(ends.iter().map(|(w, x)| (w.clone(), x)))
    }

    pub fn measure_arc(&self, arc: &Arc) -> Rational {
        self.measure(&arc.to_set())
    }

    pub fn support(&self) -> Support {
        let cells = 1usize << self.level;
        let mut parts: Vec<Interval> = Vec::new();
        let mut j = 0;
        while j < cells {
            if self.density[j].is_positive() {
                let start = j;
                while j < cells && self.density[j].is_positive() {
                    j += 1;
                }
                let lo = Rational::new(BigInt::from(start), BigInt::one() << self.level);
                let hi = Rational::new(BigInt::from(j), BigInt::one() << self.level);
                parts.push(Interval::new(lo, hi));
            } else {
                j += 1;
            }
        }
        let through_zero = self.density[0].is_positive() && self.density[cells - 1].is_positive();
        Support { interior: IntervalSet::from_parts(parts, through_zero) }
    }

    /// Largest `μ(2B)/μ(B)` over grid balls `B(x, r)` with `x` a depth-`depth`
    /// dyadic point of the support and `r` a depth-`depth` dyadic radius
    /// below `r0`. A lower bound for the true doubling constant.
    pub fn doubling_certificate(&self, depth: u32) -> Result<DoublingCertificate> {
        if depth < self.level {
            return Err(Error::GridTooCoarse { depth, level: self.level });
        }
        let grid = BallGrid::new(depth, self.r0.clone());
        let two = int(2);
        let mut best: Option<(Rational, Arc)> = None;
        let mut tested = 0usize;
        for ball in grid.balls(self) {
            let m = self.measure_arc(&ball);
            if m.is_zero() {
                continue;
            }
            tested += 1;
            let ratio = self.measure_arc(&ball.dilate(&two)) / m;
            if best.as_ref().is_none_or(|(b, _)| &ratio > b) {
                best = Some((ratio, ball));
            }
        }
        let (lambda_hat, witness) = best.ok_or(Error::DegenerateMeasure)?;
        Ok(DoublingCertificate {
            exceeds_declared: lambda_hat > self.lambda,
            lambda_hat,
            witness,
            declared: self.lambda.clone(),
            depth,
            balls_tested: tested,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DoublingCertificate {
    #[serde(with = "serde_rational")]
    pub lambda_hat: Rational,
    pub witness: Arc,
    #[serde(with = "serde_rational")]
    pub declared: Rational,
    pub exceeds_declared: bool,
    pub depth: u32,
    pub balls_tested: usize,
}

/// Closed support of a measure, stored as its interior.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Support {
    interior: IntervalSet,
}

impl Support {
    pub fn interior(&self) -> &IntervalSet {
        &self.interior
    }

    pub fn contains(&self, x: &Rational) -> bool {
        self.interior.closure_contains(x)
    }

    /// Whether the open set meets the (closed) support.
    pub fn meets(&self, set: &IntervalSet) -> bool {
        let sup = self.interior.parts();
        set.parts().iter().any(|p| {
            let idx = sup.partition_point(|s| s.hi <= p.lo);
            idx < sup.len() && sup[idx].lo < p.hi
        })
    }
}

/// Dyadic test balls: centres `j 2^-depth` in the support, radii
/// `m 2^-depth` below `max_radius` and at most `1/2`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BallGrid {
    pub depth: u32,
    #[serde(with = "serde_rational")]
    pub max_radius: Rational,
}

impl BallGrid {
    pub fn new(depth: u32, max_radius: Rational) -> Self {
        BallGrid { depth, max_radius }
    }

    pub fn radii(&self) -> Vec<Rational> {
        let step = dyadic(self.depth);
        let half = frac(1, 2);
        let mut out = Vec::new();
        let mut r = step.clone();
        while r < self.max_radius && r <= half {
            out.push(r.clone());
            r += &step;
        }
        out
    }

    pub fn centres(&self, mu: &DoublingMeasure) -> Vec<Rational> {
        let support = mu.support();
        (0..1u64 << self.depth)
            .map(|j| Rational::new(BigInt::from(j), BigInt::one() << self.depth))
            .filter(|x| support.contains(x))
            .collect()
    }

    pub fn balls(&self, mu: &DoublingMeasure) -> Vec<Arc> {
        let radii = self.radii();
        self.centres(mu)
            .into_iter()
            .flat_map(|c| radii.iter().map(move |r| Arc::new(c.clone(), r.clone()).expect("positive radius")))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn measure(level: u32, density: &[i64]) -> DoublingMeasure {
        DoublingMeasure::new(level, density.iter().map(|&d| int(d)).collect(), int(4), frac(1, 2)).unwrap()
    }

    fn iv(lo: Rational, hi: Rational) -> IntervalSet {
        IntervalSet::canonicalize(&[Arc::from_endpoints(lo, hi).unwrap()])
    }

    #[test]
    fn measure_examples() {
        let leb = DoublingMeasure::lebesgue();
        assert_eq!(leb.measure(&IntervalSet::empty()), int(0));
        assert_eq!(leb.measure(&iv(int(0), frac(1, 2))), frac(1, 2));
        let left = measure(1, &[2, 0]);
        assert_eq!(left.measure(&iv(int(0), frac(1, 2))), int(1));
        assert_eq!(left.measure(&iv(frac(1, 4), frac(3, 4))), frac(1, 2));
        assert_eq!(left.measure(&IntervalSet::full()), int(1));
    }

    #[test]
    fn rejects_bad_densities() {
        assert!(matches!(DoublingMeasure::new(1, vec![int(1)], int(2), int(1)), Err(Error::DensityLength { .. })));
        assert!(matches!(
            DoublingMeasure::new(1, vec![int(3), int(-1)], int(2), int(1)),
            Err(Error::NegativeDensity(_))
        ));
        assert!(matches!(DoublingMeasure::new(1, vec![int(1), int(2)], int(2), int(1)), Err(Error::NotProbability(_))));
        assert!(DoublingMeasure::new(0, vec![int(1)], frac(1, 2), int(1)).is_err());
        assert!(DoublingMeasure::new(0, vec![int(1)], int(2), int(0)).is_err());
    }

    #[test]
    fn support_examples() {
        let leb = DoublingMeasure::lebesgue().support();
        assert!(leb.interior().is_full());
        let left = measure(1, &[2, 0]).support();
        assert!(left.contains(&int(0)) && left.contains(&frac(1, 2)));
        assert!(!left.contains(&frac(3, 4)));
        let cell = measure(2, &[0, 4, 0, 0]).support();
        assert_eq!(cell.interior(), &iv(frac(1, 4), frac(1, 2)));
        assert!(cell.contains(&frac(1, 4)) && cell.contains(&frac(1, 2)));
        assert!(!cell.contains(&frac(5, 8)) && !cell.contains(&int(0)));
        assert!(cell.meets(&iv(frac(1, 8), frac(3, 8))));
        assert!(!cell.meets(&iv(frac(1, 2), frac(3, 4))));
    }

    #[test]
    fn lebesgue_doubling_is_two() {
        for depth in 2..6 {
            let cert = DoublingMeasure::lebesgue().doubling_certificate(depth).unwrap();
            assert_eq!(cert.lambda_hat, int(2));
            assert!(!cert.exceeds_declared);
        }
    }

    #[test]
    fn certificate_needs_fine_grid() {
        let m = measure(2, &[0, 4, 0, 0]);
        assert!(matches!(m.doubling_certificate(1), Err(Error::GridTooCoarse { .. })));
    }
}
