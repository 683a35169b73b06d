//! Measure sums, overlap sums and the quantities built from them.
//!
//! `S_Q = Σ_{s,t ≤ Q} μ(E_s ∩ E_t)` is evaluated as `∫ N² dμ`, where `N(x)`
//! counts the events containing `x`. `N` is a step function whose pieces are
//! found by sorting all interval endpoints, so one evaluation costs
//! `O(Q log Q)` rational operations instead of `O(Q²)` intersections.
//!
//! Every family-level operation accepts an optional ambient set `A`; the
//! events are then `E_i ∩ A` under the unnormalized measure `μ`.

use num::bigint::BigInt;
use num::{Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::BallFamily;
use crate::rational::{self, Rational};
use crate::serde_rational;
use crate::space::{Arc, DoublingMeasure, Interval, IntervalSet};

/// Step function `N(x)` over a partition of `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageProfile {
    breakpoints: Vec<Rational>,
    counts: Vec<u64>,
}

impl CoverageProfile {
    fn build<'a>(parts: impl Iterator<Item = &'a Interval>) -> Self {
        let mut events: Vec<(&Rational, i64)> = Vec::new();
        for p in parts {
            events.push((&p.lo, 1));
            events.push((&p.hi, -1));
        }
        events.sort_by(|a, b| a.0.cmp(b.0));

        let mut breakpoints = vec![Rational::zero()];
        let mut counts = Vec::new();
        let mut running: i64 = 0;
        for (pos, delta) in events {
            if pos > breakpoints.last().unwrap() {
                counts.push(running as u64);
                breakpoints.push(pos.clone());
            }
            running += delta;
        }
        debug_assert_eq!(running, 0);
        let one = Rational::from_integer(1.into());
        if breakpoints.last().unwrap() < &one {
            counts.push(0);
            breakpoints.push(one);
        }
        CoverageProfile { breakpoints, counts }
    }

    pub fn from_sets(sets: &[IntervalSet]) -> Self {
        Self::build(sets.iter().flat_map(|s| s.parts().iter()))
    }

    pub fn from_arcs(arcs: &[Arc]) -> Self {
        let sets: Vec<IntervalSet> = arcs.iter().map(Arc::to_set).collect();
        Self::from_sets(&sets)
    }

    /// Breakpoints `0 = x_0 < x_1 < ... < x_m = 1`.
    pub fn breakpoints(&self) -> &[Rational] {
        &self.breakpoints
    }

    /// `counts[k]` is `N` on the open piece `(x_k, x_{k+1})`.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// `∫ f(N) dμ` by summation by parts: `Σ_k F(b_k) (f(c_{k-1}) - f(c_k))`
    /// over breakpoints, with `F` the cdf and `f(0) = 0`.
    fn integrate(&self, mu: &DoublingMeasure, f: impl Fn(u64) -> BigInt) -> Rational {
        let cdf: Vec<Rational> = self.breakpoints.iter().map(|x| mu.cdf(x)).collect();
        let values: Vec<BigInt> = self.counts.iter().map(|&c| f(c)).collect();
        let zero = BigInt::zero();
        let weights = (0..cdf.len()).map(|k| {
            let before = if k == 0 { &zero } else { &values[k - 1] };
            let after = values.get(k).unwrap_or(&zero);
            before - after
        });
        rational::weighted_sum(weights.zip(cdf.iter()))
    }

    /// `∫ N^power dμ`.
    pub fn moment(&self, mu: &DoublingMeasure, power: u32) -> Rational {
        self.integrate(mu, |c| num::pow(BigInt::from(c), power as usize))
    }

    /// Returns `(∫ N dμ, ∫ N² dμ, μ(N > 0))`.
    pub fn moments(&self, mu: &DoublingMeasure) -> (Rational, Rational, Rational) {
        (
            self.integrate(mu, BigInt::from),
            self.integrate(mu, |c| BigInt::from(c) * BigInt::from(c)),
            self.integrate(mu, |c| BigInt::from(u64::from(c > 0))),
        )
    }
}

/// Events `E_i ∩ A` for `i = 1..=q`.
pub fn events(family: &BallFamily, q: usize, ambient: Option<&IntervalSet>) -> Result<Vec<IntervalSet>> {
    let arcs = family.prefix(q)?;
    Ok(arcs
        .iter()
        .map(|a| match ambient {
            Some(amb) => a.to_set().intersection(amb),
            None => a.to_set(),
        })
        .collect())
}

pub fn coverage_profile(family: &BallFamily, q: usize) -> Result<CoverageProfile> {
    Ok(CoverageProfile::from_sets(&events(family, q, None)?))
}

/// `Σ μ(E_i)` over the given events.
pub fn measure_sum(sets: &[IntervalSet], mu: &DoublingMeasure) -> Rational {
    rational::sum(sets.iter().map(|s| mu.measure(s)))
}

/// `Σ_{s,t} μ(E_s ∩ E_t)` over the given events, via `∫ N² dμ`.
pub fn overlap_sum_of(sets: &[IntervalSet], mu: &DoublingMeasure) -> Rational {
    CoverageProfile::from_sets(sets).moment(mu, 2)
}

pub fn overlap_sum(
    family: &BallFamily,
    mu: &DoublingMeasure,
    q: usize,
    ambient: Option<&IntervalSet>,
) -> Result<Rational> {
    Ok(overlap_sum_of(&events(family, q, ambient)?, mu))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatioRow {
    pub q: usize,
    #[serde(with = "serde_rational")]
    pub sum_mu: Rational,
    #[serde(with = "serde_rational")]
    pub overlap: Rational,
    /// `C_Q = S_Q / (Σ μ)²`; undefined while the sum vanishes.
    #[serde(with = "serde_rational::opt")]
    pub ratio: Option<Rational>,
    /// Kochen–Stone value `(Σ μ)² / S_Q = 1 / C_Q`.
    #[serde(with = "serde_rational::opt")]
    pub ks: Option<Rational>,
    /// `μ(E_1 ∪ ... ∪ E_Q)`, an upper bound for `ks`.
    #[serde(with = "serde_rational")]
    pub union_measure: Rational,
}

impl RatioRow {
    pub fn from_events(q: usize, sets: &[IntervalSet], mu: &DoublingMeasure) -> RatioRow {
        let (sum_mu, overlap, union_measure) = CoverageProfile::from_sets(sets).moments(mu);
        let (ratio, ks) = if sum_mu.is_positive() {
            let sq = &sum_mu * &sum_mu;
            (Some(&overlap / &sq), Some(sq / &overlap))
        } else {
            (None, None)
        };
        RatioRow { q, sum_mu, overlap, ratio, ks, union_measure }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowMax {
    pub q: usize,
    #[serde(with = "serde_rational")]
    pub ks: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub rows: Vec<RatioRow>,
    pub q_min: usize,
    /// Largest `KS_Q` over grid points `Q ≥ q_min`: the empirical lower
    /// bound estimate for the limsup measure.
    pub window_max: Option<WindowMax>,
    pub caveat: String,
}

fn check_grid(grid: &[usize]) -> Result<()> {
    if grid.is_empty() || grid[0] == 0 {
        return Err(Error::EmptyPrefix);
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::UnsortedGrid);
    }
    Ok(())
}

pub fn ratio_curve(
    family: &BallFamily,
    mu: &DoublingMeasure,
    grid: &[usize],
    q_min: usize,
    ambient: Option<&IntervalSet>,
) -> Result<OverlapReport> {
    check_grid(grid)?;
    let all = events(family, *grid.last().unwrap(), ambient)?;
    let rows: Vec<RatioRow> = grid.par_iter().map(|&q| RatioRow::from_events(q, &all[..q], mu)).collect();
    if rows.iter().all(|r| r.ks.is_none()) {
        return Err(Error::ZeroMass);
    }
    let mut window_max: Option<WindowMax> = None;
    for row in rows.iter().filter(|r| r.q >= q_min) {
        if let Some(ks) = &row.ks {
            if window_max.as_ref().is_none_or(|w| ks > &w.ks) {
                window_max = Some(WindowMax { q: row.q, ks: ks.clone() });
            }
        }
    }
    Ok(OverlapReport {
        rows,
        q_min,
        window_max,
        caveat: "finite grid only: the divergence lemma needs the overlap bound for infinitely many Q".to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PairwiseConstant {
    Finite {
        #[serde(with = "serde_rational")]
        value: Rational,
    },
    /// Some pair meets in positive measure while one of them is null.
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairwiseReport {
    pub q: usize,
    pub constant: PairwiseConstant,
    /// 1-based pair attaining the constant (or proving unboundedness).
    pub witness: Option<(usize, usize)>,
}

/// Smallest `C` with `μ(E_s ∩ E_t) ≤ C μ(E_s) μ(E_t)` for all `s < t ≤ q`.
pub fn pairwise_constant_of(sets: &[IntervalSet], mu: &DoublingMeasure) -> Result<PairwiseReport> {
    let q = sets.len();
    if q < 2 {
        return Err(Error::TooFewEvents);
    }
    let masses: Vec<Rational> = sets.iter().map(|s| mu.measure(s)).collect();
    // per row: (unbounded witness, best finite ratio with witness)
    type RowBest = (Option<(usize, usize)>, Option<(Rational, (usize, usize))>);
    let rows: Vec<RowBest> = (0..q)
        .into_par_iter()
        .map(|s| {
            let mut unbounded = None;
            let mut best: Option<(Rational, (usize, usize))> = None;
            for t in s + 1..q {
                if !sets[s].intersects(&sets[t]) {
                    continue;
                }
                let inter = mu.measure(&sets[s].intersection(&sets[t]));
                if inter.is_zero() {
                    continue;
                }
                let prod = &masses[s] * &masses[t];
                if prod.is_zero() {
                    unbounded.get_or_insert((s + 1, t + 1));
                    continue;
                }
                let ratio = inter / prod;
                if best.as_ref().is_none_or(|(b, _)| &ratio > b) {
                    best = Some((ratio, (s + 1, t + 1)));
                }
            }
            (unbounded, best)
        })
        .collect();
    if let Some(w) = rows.iter().find_map(|r| r.0) {
        return Ok(PairwiseReport { q, constant: PairwiseConstant::Unbounded, witness: Some(w) });
    }
    let mut best: Option<(Rational, (usize, usize))> = None;
    for (_, row) in rows {
        if let Some((r, w)) = row {
            if best.as_ref().is_none_or(|(b, _)| &r > b) {
                best = Some((r, w));
            }
        }
    }
    Ok(match best {
        Some((value, w)) => PairwiseReport { q, constant: PairwiseConstant::Finite { value }, witness: Some(w) },
        None => PairwiseReport { q, constant: PairwiseConstant::Finite { value: Rational::zero() }, witness: None },
    })
}

pub fn pairwise_constant(
    family: &BallFamily,
    mu: &DoublingMeasure,
    q: usize,
    ambient: Option<&IntervalSet>,
) -> Result<PairwiseReport> {
    if q < 2 {
        return Err(Error::TooFewEvents);
    }
    pairwise_constant_of(&events(family, q, ambient)?, mu)
}

/// `μ(E_t ∪ ... ∪ E_n)`.
pub fn tail_union(
    family: &BallFamily,
    mu: &DoublingMeasure,
    t: usize,
    n: usize,
    ambient: Option<&IntervalSet>,
) -> Result<Rational> {
    if t == 0 || t > n {
        return Err(Error::EmptyRange { start: t, end: n });
    }
    let arcs = family.prefix(n)?;
    let mut union = IntervalSet::canonicalize(&arcs[t - 1..]);
    if let Some(amb) = ambient {
        union = union.intersection(amb);
    }
    Ok(mu.measure(&union))
}

/// Partial sums `Σ_{i ≤ q} μ(E_i)` at each grid point.
pub fn partial_sums(
    family: &BallFamily,
    mu: &DoublingMeasure,
    grid: &[usize],
    ambient: Option<&IntervalSet>,
) -> Result<Vec<(usize, Rational)>> {
    check_grid(grid)?;
    let all = events(family, *grid.last().unwrap(), ambient)?;
    let masses: Vec<Rational> = all.par_iter().map(|s| mu.measure(s)).collect();
    let mut out = Vec::with_capacity(grid.len());
    let mut acc = Rational::zero();
    let mut done = 0;
    for &q in grid {
        acc += rational::sum(masses[done..q].iter().cloned());
        done = q;
        out.push((q, acc.clone()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{BallFamily, FamilySpec};
    use crate::rational::{frac, int};

    fn leb() -> DoublingMeasure {
        DoublingMeasure::lebesgue()
    }

    #[test]
    fn profile_examples() {
        let one = CoverageProfile::from_arcs(&[Arc::new(frac(1, 4), frac(1, 4)).unwrap()]);
        assert_eq!(one.breakpoints(), &[int(0), frac(1, 2), int(1)]);
        assert_eq!(one.counts(), &[1, 0]);
        let h = coverage_profile(&BallFamily::harmonic(), 2).unwrap();
        assert_eq!(h.breakpoints(), &[int(0), frac(1, 2), int(1)]);
        assert_eq!(h.counts(), &[2, 1]);
        let d = coverage_profile(&BallFamily::dyadic_tiling(), 2).unwrap();
        assert_eq!(d.counts(), &[1, 1]);
    }

    #[test]
    fn overlap_examples() {
        assert_eq!(overlap_sum(&BallFamily::harmonic(), &leb(), 3, None).unwrap(), frac(25, 6));
        assert_eq!(overlap_sum(&BallFamily::dyadic_tiling(), &leb(), 2, None).unwrap(), int(1));
        let single = BallFamily::explicit(vec![Arc::new(frac(1, 3), frac(1, 10)).unwrap()]).unwrap();
        assert_eq!(overlap_sum(&single, &leb(), 1, None).unwrap(), frac(1, 5));
    }

    #[test]
    fn ratio_examples() {
        let rep = ratio_curve(&BallFamily::harmonic(), &leb(), &[1, 2, 3], 1, None).unwrap();
        assert_eq!(rep.rows[2].ks, Some(frac(121, 150)));
        assert_eq!(rep.rows[0].ks, Some(int(1)));
        // level-3 dyadic arcs are indices 7..=14; use them alone
        let arcs = BallFamily::dyadic_tiling().prefix(14).unwrap()[6..].to_vec();
        let level3 = BallFamily::explicit(arcs).unwrap();
        let rep = ratio_curve(&level3, &leb(), &[1, 3, 8], 1, None).unwrap();
        for row in &rep.rows {
            assert_eq!(row.ks, Some(frac(row.q as i64, 8)));
        }
        assert_eq!(rep.window_max.unwrap().q, 8);
    }

    #[test]
    fn ratio_rejects_null_prefix() {
        let mu = DoublingMeasure::new(1, vec![int(2), int(0)], int(2), frac(1, 2)).unwrap();
        let fam = BallFamily::explicit(vec![Arc::new(frac(3, 4), frac(1, 8)).unwrap()]).unwrap();
        assert_eq!(ratio_curve(&fam, &mu, &[1], 1, None), Err(Error::ZeroMass));
        assert_eq!(ratio_curve(&fam, &mu, &[], 1, None), Err(Error::EmptyPrefix));
        assert_eq!(ratio_curve(&BallFamily::harmonic(), &leb(), &[2, 2], 1, None), Err(Error::UnsortedGrid));
    }

    #[test]
    fn pairwise_examples() {
        let d = pairwise_constant(&BallFamily::dyadic_tiling(), &leb(), 2, None).unwrap();
        assert_eq!(d.constant, PairwiseConstant::Finite { value: int(0) });
        let h2 = pairwise_constant(&BallFamily::harmonic(), &leb(), 2, None).unwrap();
        assert_eq!(h2.constant, PairwiseConstant::Finite { value: int(1) });
        let h3 = pairwise_constant(&BallFamily::harmonic(), &leb(), 3, None).unwrap();
        assert_eq!(h3.constant, PairwiseConstant::Finite { value: int(2) });
        assert_eq!(h3.witness, Some((2, 3)));
        assert_eq!(pairwise_constant(&BallFamily::harmonic(), &leb(), 1, None), Err(Error::TooFewEvents));
    }

    #[test]
    fn null_events_do_not_raise_the_constant() {
        // μ(E_s ∩ E_t) ≤ min(μ(E_s), μ(E_t)), so a null event never meets
        // another in positive measure and the unbounded case cannot occur
        // for a genuine measure.
        let mu = DoublingMeasure::new(2, vec![int(0), int(4), int(0), int(0)], int(2), frac(1, 2)).unwrap();
        let sets = vec![
            Arc::new(frac(1, 8), frac(1, 8)).unwrap().to_set(), // (0, 1/4), null
            Arc::new(frac(1, 4), frac(1, 8)).unwrap().to_set(),
            Arc::new(frac(3, 8), frac(1, 8)).unwrap().to_set(),
        ];
        let rep = pairwise_constant_of(&sets, &mu).unwrap();
        // events 2 and 3 meet on (1/4, 3/8): 1/2 vs (1/2)(1)
        assert_eq!(rep.constant, PairwiseConstant::Finite { value: int(1) });
        assert_eq!(rep.witness, Some((2, 3)));
    }

    #[test]
    fn tail_union_examples() {
        let h = BallFamily::harmonic();
        for n in [4, 10, 57] {
            assert_eq!(tail_union(&h, &leb(), 4, n, None).unwrap(), frac(1, 4));
        }
        assert_eq!(tail_union(&BallFamily::dyadic_tiling(), &leb(), 3, 6, None).unwrap(), int(1));
        let fam = BallFamily::new(FamilySpec::Random { seed: 3, c: frac(1, 2), tau: int(1) }).unwrap();
        let last = fam.ball(9).unwrap();
        assert_eq!(tail_union(&fam, &leb(), 9, 9, None).unwrap(), leb().measure_arc(&last));
        assert!(tail_union(&h, &leb(), 5, 4, None).is_err());
    }

    #[test]
    fn ambient_restriction() {
        let amb = Arc::new(frac(1, 8), frac(1, 8)).unwrap().to_set(); // (0, 1/4)
        let h = BallFamily::harmonic();
        // E_i ∩ A = (0, min(1/4, 1/i))
        let sums = partial_sums(&h, &leb(), &[4], Some(&amb)).unwrap();
        assert_eq!(sums[0].1, frac(1, 1));
        assert_eq!(tail_union(&h, &leb(), 2, 9, Some(&amb)).unwrap(), frac(1, 4));
    }

    #[test]
    fn partial_sum_harmonic() {
        let sums = partial_sums(&BallFamily::harmonic(), &leb(), &[1, 2, 3], None).unwrap();
        assert_eq!(sums, vec![(1, int(1)), (2, frac(3, 2)), (3, frac(11, 6))]);
    }
}
