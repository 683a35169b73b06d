//! Indexed ball sequences `{B_i}` (1-based) and finite-range checks of the
//! hypotheses placed on them.

use std::sync::RwLock;

use num::bigint::BigInt;
use num::integer::gcd;
use num::{One, Signed};
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{rational_power, Rational};
use crate::serde_rational;
use crate::space::{Arc, DoublingMeasure};

/// How the balls of a family are produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    /// A fixed list; with `cycle` the list repeats forever.
    Explicit {
        arcs: Vec<Arc>,
        #[serde(default)]
        cycle: bool,
    },
    /// `B_i = (0, 1/i)`.
    Harmonic,
    /// Level by level, the `2^l` dyadic arcs of length `2^-l`, left to right.
    DyadicTiling,
    /// Centres `p/q` in lowest terms ordered by `q` then `p`, radius
    /// `c / q^tau`.
    ShrinkingTarget {
        #[serde(with = "serde_rational")]
        c: Rational,
        #[serde(with = "serde_rational")]
        tau: Rational,
    },
    /// Centres `u / 2^32` with `u` the successive `next_u32` outputs of
    /// ChaCha20 seeded through `seed_from_u64(seed)`; radius `c / i^tau`.
    Random {
        seed: u64,
        #[serde(with = "serde_rational")]
        c: Rational,
        #[serde(with = "serde_rational")]
        tau: Rational,
    },
}

impl FamilySpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            FamilySpec::ShrinkingTarget { c, tau } | FamilySpec::Random { c, tau, .. } => {
                if !c.is_positive() {
                    return Err(Error::BadRadiusRule { name: "c", value: c.clone() });
                }
                if !tau.is_positive() {
                    return Err(Error::BadRadiusRule { name: "tau", value: tau.clone() });
                }
                Ok(())
            }
            FamilySpec::Explicit { arcs, .. } if arcs.is_empty() => Err(Error::EmptyPrefix),
            _ => Ok(()),
        }
    }
}

/// `c / n^tau`, exact or an error when irrational.
fn radius_rule(c: &Rational, tau: &Rational, n: u64) -> Result<Rational> {
    let denom = rational_power(n, tau).ok_or_else(|| Error::IrrationalRadius { index: n, tau: tau.clone() })?;
    Ok(c / denom)
}

fn dyadic_arc(level: u32, j: u64) -> Arc {
    let width = Rational::new(BigInt::one(), BigInt::one() << level);
    let center = (Rational::from_integer(BigInt::from(j)) + Rational::new(1.into(), 2.into())) * &width;
    Arc::new(center, width / BigInt::from(2)).expect("positive width")
}

/// First `n` balls of the family.
pub fn generate(spec: &FamilySpec, n: usize) -> Result<Vec<Arc>> {
    if n == 0 {
        return Err(Error::EmptyPrefix);
    }
    spec.validate()?;
    let mut out = Vec::with_capacity(n);
    match spec {
        FamilySpec::Explicit { arcs, cycle } => {
            if !cycle && n > arcs.len() {
                return Err(Error::ExplicitTooShort { len: arcs.len(), requested: n });
            }
            out.extend(arcs.iter().cycle().take(n).cloned());
        }
        FamilySpec::Harmonic => {
            for i in 1..=n as u64 {
                let r = Rational::new(BigInt::one(), BigInt::from(2 * i));
                out.push(Arc::new(r.clone(), r)?);
            }
        }
        FamilySpec::DyadicTiling => {
            let mut level = 1u32;
            'outer: loop {
                for j in 0..(1u64 << level) {
                    if out.len() == n {
                        break 'outer;
                    }
                    out.push(dyadic_arc(level, j));
                }
                level += 1;
            }
        }
        FamilySpec::ShrinkingTarget { c, tau } => {
            let mut q = 1u64;
            'outer: while out.len() < n {
                let r = radius_rule(c, tau, q)?;
                for p in 0..q {
                    if gcd(p, q) != 1 {
                        continue;
                    }
                    if out.len() == n {
                        break 'outer;
                    }
                    out.push(Arc::new(Rational::new(p.into(), q.into()), r.clone())?);
                }
                q += 1;
            }
        }
        FamilySpec::Random { seed, c, tau } => {
            let mut rng = ChaCha20Rng::seed_from_u64(*seed);
            for i in 1..=n as u64 {
                let u = rng.next_u32();
                let center = Rational::new(BigInt::from(u), BigInt::one() << 32);
                out.push(Arc::new(center, radius_rule(c, tau, i)?)?);
            }
        }
    }
    Ok(out)
}

/// A ball sequence with a memoized prefix.
#[derive(Debug)]
pub struct BallFamily {
    spec: FamilySpec,
    cache: RwLock<Vec<Arc>>,
}

impl Clone for BallFamily {
    fn clone(&self) -> Self {
        BallFamily { spec: self.spec.clone(), cache: RwLock::new(self.cache.read().unwrap().clone()) }
    }
}

impl BallFamily {
    pub fn new(spec: FamilySpec) -> Result<Self> {
        spec.validate()?;
        Ok(BallFamily { spec, cache: RwLock::new(Vec::new()) })
    }

    pub fn harmonic() -> Self {
        Self::new(FamilySpec::Harmonic).unwrap()
    }

    pub fn dyadic_tiling() -> Self {
        Self::new(FamilySpec::DyadicTiling).unwrap()
    }

    pub fn explicit(arcs: Vec<Arc>) -> Result<Self> {
        Self::new(FamilySpec::Explicit { arcs, cycle: false })
    }

    pub fn spec(&self) -> &FamilySpec {
        &self.spec
    }

    /// `B_1, ..., B_n`. Filling the cache regenerates from scratch, so the
    /// result never depends on which caller filled it first.
    pub fn prefix(&self, n: usize) -> Result<Vec<Arc>> {
        if n == 0 {
            return Err(Error::EmptyPrefix);
        }
        {
            let cache = self.cache.read().unwrap();
            if cache.len() >= n {
                return Ok(cache[..n].to_vec());
            }
        }
        let fresh = generate(&self.spec, n)?;
        let mut cache = self.cache.write().unwrap();
        if cache.len() < n {
            *cache = fresh.clone();
        }
        Ok(fresh)
    }

    /// `B_i`, 1-based.
    pub fn ball(&self, i: usize) -> Result<Arc> {
        Ok(self.prefix(i)?.pop().expect("non-empty prefix"))
    }
}

/// Finite-range evidence for `μ(aB_i) ≤ b μ(B_i)`, `i0 ≤ i ≤ n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vb8Report {
    #[serde(with = "serde_rational")]
    pub a: Rational,
    #[serde(with = "serde_rational")]
    pub b: Rational,
    pub i0: usize,
    pub n: usize,
    pub violations: Vec<usize>,
    pub passed: bool,
    pub note: String,
}

pub fn vb8_check(
    family: &BallFamily,
    mu: &DoublingMeasure,
    a: &Rational,
    b: &Rational,
    i0: usize,
    n: usize,
) -> Result<Vb8Report> {
    if i0 == 0 || i0 > n {
        return Err(Error::EmptyRange { start: i0, end: n });
    }
    let balls = family.prefix(n)?;
    let violations: Vec<usize> = (i0..=n)
        .filter(|&i| {
            let ball = &balls[i - 1];
            mu.measure_arc(&ball.dilate(a)) > b * mu.measure_arc(ball)
        })
        .collect();
    Ok(Vb8Report {
        a: a.clone(),
        b: b.clone(),
        i0,
        n,
        passed: violations.is_empty(),
        violations,
        note: format!("checked indices {i0}..={n} only; the hypothesis is asymptotic"),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TailDiameter {
    pub t: usize,
    #[serde(with = "serde_rational")]
    pub max_diameter: Rational,
}

/// Tail maxima of diameters, `max_{t ≤ i ≤ n} diam(B_i)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiamReport {
    pub n: usize,
    pub tails: Vec<TailDiameter>,
    /// The last tested tail is strictly below the first one.
    pub decays: bool,
    pub note: String,
}

impl DiamReport {
    pub fn tail(&self, t: usize) -> Option<&Rational> {
        self.tails.iter().find(|d| d.t == t).map(|d| &d.max_diameter)
    }
}

/// Default tail grid: powers of two below `n`, then `n/2` and `n`.
pub fn default_tail_grid(n: usize) -> Vec<usize> {
    let mut grid: Vec<usize> =
        std::iter::successors(Some(1usize), |t| t.checked_mul(2)).take_while(|&t| t <= n).collect();
    grid.push((n / 2).max(1));
    grid.push(n);
    grid.sort_unstable();
    grid.dedup();
    grid
}

pub fn diam_check(family: &BallFamily, n: usize, grid: Option<&[usize]>) -> Result<DiamReport> {
    let balls = family.prefix(n)?;
    let grid: Vec<usize> = match grid {
        Some(g) => g.to_vec(),
        None => default_tail_grid(n),
    };
    if let Some(&bad) = grid.iter().find(|&&t| t == 0 || t > n) {
        return Err(Error::EmptyRange { start: bad, end: n });
    }
    // suffix maxima
    let mut suffix = vec![Rational::default(); n + 1];
    for i in (0..n).rev() {
        let d = balls[i].diameter();
        suffix[i] = if i + 1 < n && suffix[i + 1] > d { suffix[i + 1].clone() } else { d };
    }
    let tails: Vec<TailDiameter> =
        grid.iter().map(|&t| TailDiameter { t, max_diameter: suffix[t - 1].clone() }).collect();
    let decays = match (tails.first(), tails.last()) {
        (Some(first), Some(last)) => last.max_diameter < first.max_diameter,
        _ => false,
    };
    Ok(DiamReport { n, tails, decays, note: format!("finite evidence on indices 1..={n}; diam -> 0 is not proved") })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{frac, int};
    use crate::space::IntervalSet;
    use num::Zero;

    fn endpoints(arc: &Arc) -> IntervalSet {
        arc.to_set()
    }

    fn iv(lo: Rational, hi: Rational) -> IntervalSet {
        Arc::from_endpoints(lo, hi).unwrap().to_set()
    }

    #[test]
    fn harmonic_prefix() {
        let balls = generate(&FamilySpec::Harmonic, 3).unwrap();
        assert!(endpoints(&balls[0]).length() == int(1));
        assert_eq!(endpoints(&balls[1]), iv(int(0), frac(1, 2)));
        assert_eq!(endpoints(&balls[2]), iv(int(0), frac(1, 3)));
    }

    #[test]
    fn dyadic_prefix() {
        let balls = generate(&FamilySpec::DyadicTiling, 6).unwrap();
        let expected = [
            (int(0), frac(1, 2)),
            (frac(1, 2), int(1)),
            (int(0), frac(1, 4)),
            (frac(1, 4), frac(1, 2)),
            (frac(1, 2), frac(3, 4)),
            (frac(3, 4), int(1)),
        ];
        for (ball, (lo, hi)) in balls.iter().zip(expected) {
            assert_eq!(endpoints(ball), iv(lo, hi));
        }
    }

    #[test]
    fn shrinking_target_prefix() {
        let spec = FamilySpec::ShrinkingTarget { c: int(1), tau: int(2) };
        let balls = generate(&spec, 3).unwrap();
        assert_eq!(balls[0].center(), &int(0));
        assert_eq!(balls[0].radius(), &int(1));
        assert_eq!(balls[1].center(), &frac(1, 2));
        assert_eq!(balls[1].radius(), &frac(1, 4));
        assert_eq!(balls[2].center(), &frac(1, 3));
        assert_eq!(balls[2].radius(), &frac(1, 9));
    }

    #[test]
    fn irrational_radius_rejected() {
        let spec = FamilySpec::ShrinkingTarget { c: int(1), tau: frac(1, 2) };
        assert!(generate(&spec, 1).is_ok()); // 1^(1/2) = 1
        assert!(matches!(generate(&spec, 2), Err(Error::IrrationalRadius { index: 2, .. })));
    }

    #[test]
    fn generation_errors() {
        assert_eq!(generate(&FamilySpec::Harmonic, 0), Err(Error::EmptyPrefix));
        let bad = FamilySpec::Random { seed: 1, c: int(0), tau: int(1) };
        assert!(matches!(generate(&bad, 3), Err(Error::BadRadiusRule { name: "c", .. })));
        let short = FamilySpec::Explicit { arcs: vec![Arc::new(int(0), frac(1, 8)).unwrap()], cycle: false };
        assert!(matches!(generate(&short, 2), Err(Error::ExplicitTooShort { .. })));
        let cyc = FamilySpec::Explicit { arcs: vec![Arc::new(int(0), frac(1, 8)).unwrap()], cycle: true };
        assert_eq!(generate(&cyc, 5).unwrap().len(), 5);
    }

    #[test]
    fn random_is_seeded() {
        let spec = FamilySpec::Random { seed: 42, c: frac(1, 2), tau: int(1) };
        let a = generate(&spec, 50).unwrap();
        let b = generate(&spec, 50).unwrap();
        assert_eq!(a, b);
        let other = generate(&FamilySpec::Random { seed: 43, c: frac(1, 2), tau: int(1) }, 50).unwrap();
        assert_ne!(a, other);
        assert_eq!(a[9].radius(), &frac(1, 20));
    }

    #[test]
    fn cache_returns_prefixes() {
        let fam = BallFamily::dyadic_tiling();
        let long = fam.prefix(20).unwrap();
        assert_eq!(fam.prefix(6).unwrap(), long[..6].to_vec());
        assert_eq!(fam.ball(3).unwrap(), long[2]);
    }

    #[test]
    fn vb8_examples() {
        let leb = DoublingMeasure::lebesgue();
        let harmonic = BallFamily::harmonic();
        let rep = vb8_check(&harmonic, &leb, &int(2), &int(2), 2, 100).unwrap();
        assert!(rep.passed);
        let rep = vb8_check(&harmonic, &leb, &int(2), &int(1), 1, 20).unwrap();
        // 2 r_i <= 1/2 from i = 2 on
        assert_eq!(rep.violations, (2..=20).collect::<Vec<_>>());
        let rep = vb8_check(&BallFamily::dyadic_tiling(), &leb, &int(2), &int(2), 1, 62).unwrap();
        assert!(rep.passed);
    }

    #[test]
    fn diam_examples() {
        let rep = diam_check(&BallFamily::harmonic(), 100, Some(&[1, 50, 100])).unwrap();
        assert_eq!(rep.tail(50), Some(&frac(1, 50)));
        assert!(rep.decays);
        let rep = diam_check(&BallFamily::dyadic_tiling(), 6, Some(&[1, 3])).unwrap();
        assert_eq!(rep.tail(3), Some(&frac(1, 4)));
        let constant = BallFamily::new(FamilySpec::Explicit {
            arcs: vec![Arc::new(frac(1, 3), frac(1, 10)).unwrap()],
            cycle: true,
        })
        .unwrap();
        let rep = diam_check(&constant, 64, None).unwrap();
        assert!(!rep.decays);
        assert!(rep.tails.iter().all(|t| !t.max_diameter.is_zero()));
    }

    #[test]
    fn totient_counts() {
        let spec = FamilySpec::ShrinkingTarget { c: int(1), tau: int(2) };
        // denominators 1..=12 contribute sum of totients = 46 centres
        let balls = generate(&spec, 46).unwrap();
        for q in 1u64..=12 {
            let count = balls.iter().filter(|b| b.center().denom() == &BigInt::from(q)).count();
            let phi = (1..=q).filter(|&k| gcd(k, q) == 1).count();
            assert_eq!(count, phi, "q = {q}");
        }
    }
}
