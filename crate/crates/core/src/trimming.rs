//! Disjoint cores, blocks and trimmed subsequences.
//!
//! Given a test ball `B`, [`extract_core`] selects from `{B_i : G ≤ i ≤ N}`
//! a disjoint core `K_{G,B}` of mass at least `κ μ(B)`, and [`build_blocks`]
//! chains cores `G_1 = 1, G_{n+1} = 1 + max K_{G_n}` into the subsequence
//! `{L_s}` whose overlap sums are then checked against `1/(μ(B) κ²)`.
//! [`extract_global`] is the same pipeline with no test ball and
//! `κ = κ_full · mu_est`.
//!
//! Everything is relative to the horizon `N`.

use num::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::covering::vitali_5r;
use crate::error::{Error, Result};
use crate::family::BallFamily;
use crate::overlap::overlap_sum_of;
use crate::rational::{self, ceil_log2_at_least_one, int, Rational};
use crate::serde_rational;
use crate::space::{Arc, DoublingMeasure, IntervalSet, Support};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrimParams {
    #[serde(with = "serde_rational")]
    pub a: Rational,
    #[serde(with = "serde_rational")]
    pub b: Rational,
    #[serde(with = "serde_rational")]
    pub lambda: Rational,
    /// Smallest `k ≥ 1` with `2^k ≥ 6/(a-1)`.
    pub k: u32,
    /// `1 / (2 λ^{k+1} b)`.
    #[serde(with = "serde_rational")]
    pub kappa_full: Rational,
    #[serde(with = "serde_rational::opt")]
    pub mu_est: Option<Rational>,
}

impl TrimParams {
    pub fn new(a: Rational, b: Rational, lambda: Rational, mu_est: Option<Rational>) -> Result<Self> {
        if a <= int(1) {
            return Err(Error::BadDilation(a));
        }
        if b < int(1) {
            return Err(Error::BadGrowth(b));
        }
        if lambda < int(1) {
            return Err(Error::BadLambda(lambda));
        }
        if let Some(m) = &mu_est {
            if !m.is_positive() || m > &int(1) {
                return Err(Error::BadMuEstimate(m.clone()));
            }
        }
        let k = ceil_log2_at_least_one(&(int(6) / (&a - int(1))));
        let kappa_full = (int(2) * num::pow(lambda.clone(), k as usize + 1) * &b).recip();
        Ok(TrimParams { a, b, lambda, k, kappa_full, mu_est })
    }

    /// `κ_full · mu_est`, the constant of the positive-measure pipeline.
    pub fn kappa_positive(&self) -> Result<Rational> {
        self.mu_est.as_ref().map(|m| &self.kappa_full * m).ok_or(Error::MissingMuEstimate)
    }

    /// `λ^k b`, the bound on `μ(5B_i)/μ(B_i)`.
    pub fn dilation_factor(&self) -> Rational {
        num::pow(self.lambda.clone(), self.k as usize) * &self.b
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Scope {
    Ball { ball: Arc },
    Global,
}

/// One attempt at `K_{G,B}`. Indices are 1-based family indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreRecord {
    pub g: usize,
    pub candidates: usize,
    pub selected: Vec<usize>,
    pub j0: usize,
    pub core: Vec<usize>,
    #[serde(with = "serde_rational")]
    pub core_measure: Rational,
    /// Mass of the selected balls with index `≥ j0`.
    #[serde(with = "serde_rational")]
    pub tail_measure: Rational,
    /// `κ μ(B)`.
    #[serde(with = "serde_rational")]
    pub threshold: Rational,
    pub passed: bool,
    #[serde(with = "serde_rational::opt")]
    pub shortfall: Option<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Stop {
    /// `G_{n+1}` passed the horizon.
    Horizon,
    BlockLimit,
    /// No usable ball left in `[G, N]` after at least one block.
    Exhausted {
        g: usize,
    },
    /// Core extraction at `g` fell short of `κ μ(B)`.
    Failed {
        g: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub m: usize,
    pub q: usize,
    #[serde(with = "serde_rational")]
    pub sum_mu: Rational,
    /// `Σ_{s,t ≤ Q_M} μ(L_s ∩ L_t)` from the overlap engine.
    #[serde(with = "serde_rational")]
    pub overlap: Rational,
    /// `Σ_{i,j ≤ M} μ(E_{G_i} ∩ E_{G_j})`.
    #[serde(with = "serde_rational")]
    pub block_sum: Rational,
    /// `bound · (Σ μ)²`.
    #[serde(with = "serde_rational")]
    pub rhs: Rational,
    pub holds: bool,
    pub identity: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCheck {
    pub pairs: usize,
    /// 1-based block numbers.
    pub violations: Vec<(usize, usize)>,
}

/// `μ(5B_i) ≤ λ^k b μ(B_i)` on every usable candidate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DilationReport {
    #[serde(with = "serde_rational")]
    pub factor: Rational,
    pub checked: usize,
    /// Usable balls skipped because `μ(aB_i) > b μ(B_i)`.
    pub skipped: usize,
    pub violations: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrimResult {
    pub scope: Scope,
    /// `μ(B)`, or 1 in global mode.
    #[serde(with = "serde_rational")]
    pub mass: Rational,
    #[serde(with = "serde_rational")]
    pub kappa: Rational,
    /// `1 / (μ(B) κ²)`.
    #[serde(with = "serde_rational")]
    pub bound: Rational,
    pub horizon: usize,
    /// Smallest index of a usable ball; balls before it are not contained
    /// in `B` or miss `½B ∩ supp μ`.
    pub first_usable: Option<usize>,
    pub blocks: Vec<CoreRecord>,
    pub failure: Option<CoreRecord>,
    pub stop: Stop,
    pub l_indices: Vec<usize>,
    pub checkpoints: Vec<Checkpoint>,
    pub block_pairs: PairCheck,
    pub dilation: DilationReport,
    pub passed: bool,
}

impl TrimResult {
    pub fn g_values(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.g).collect()
    }

    pub fn sum_mu(&self) -> Rational {
        self.checkpoints.last().map(|c| c.sum_mu.clone()).unwrap_or_default()
    }
}

struct Prepared<'a> {
    mu: &'a DoublingMeasure,
    arcs: Vec<Arc>,
    usable: Vec<bool>,
    masses: Vec<Rational>,
    threshold: Rational,
}

impl<'a> Prepared<'a> {
    fn new(family: &BallFamily, mu: &'a DoublingMeasure, scope: &Scope, n: usize, threshold: Rational) -> Result<Self> {
        let arcs = family.prefix(n)?;
        let support = mu.support();
        let usable: Vec<bool> = match scope {
            Scope::Ball { ball } => {
                let half = ball.dilate(&rational::frac(1, 2)).to_set();
                arcs.iter().map(|a| a.is_subset_of(ball) && support.meets(&a.to_set().intersection(&half))).collect()
            }
            Scope::Global => arcs.iter().map(|a| support.meets(&a.to_set())).collect(),
        };
        let masses =
            arcs.iter().zip(&usable).map(|(a, &u)| if u { mu.measure_arc(a) } else { Rational::zero() }).collect();
        Ok(Prepared { mu, arcs, usable, masses, threshold })
    }

    fn n(&self) -> usize {
        self.arcs.len()
    }

    fn first_usable(&self) -> Option<usize> {
        self.usable.iter().position(|&u| u).map(|p| p + 1)
    }

    fn has_usable_from(&self, g: usize) -> bool {
        self.usable[g - 1..].iter().any(|&u| u)
    }

    fn extract(&self, g: usize) -> CoreRecord {
        let positions: Vec<usize> = (g - 1..self.n()).filter(|&p| self.usable[p]).collect();
        let cand: Vec<Arc> = positions.iter().map(|&p| self.arcs[p].clone()).collect();
        let mut selected: Vec<usize> = vitali_5r(&cand).selected.into_iter().map(|c| positions[c]).collect();
        selected.sort_unstable();

        // minimal j0: drop the longest prefix whose complement still
        // carries at least the threshold
        let mut tail = Rational::zero();
        let mut cut = selected.len();
        for (p, &pos) in selected.iter().enumerate().rev() {
            let next = &tail + &self.masses[pos];
            if next >= self.threshold {
                break;
            }
            tail = next;
            cut = p;
        }
        let j0 = if cut == 0 { g } else { selected[cut - 1] + 2 };
        let core_pos = &selected[..cut];
        let core_measure = rational::sum(core_pos.iter().map(|&p| self.masses[p].clone()));
        let passed = !core_pos.is_empty() && core_measure >= self.threshold;
        let shortfall = (!passed).then(|| &self.threshold - &core_measure);
        CoreRecord {
            g,
            candidates: positions.len(),
            core: core_pos.iter().map(|p| p + 1).collect(),
            selected: selected.iter().map(|p| p + 1).collect(),
            j0,
            core_measure,
            tail_measure: tail,
            threshold: self.threshold.clone(),
            passed,
            shortfall,
        }
    }

    fn core_set(&self, core: &[usize]) -> IntervalSet {
        let arcs: Vec<Arc> = core.iter().map(|&i| self.arcs[i - 1].clone()).collect();
        IntervalSet::canonicalize(&arcs)
    }

    fn dilation(&self, params: &TrimParams) -> DilationReport {
        let factor = params.dilation_factor();
        let five = int(5);
        let mut checked = 0;
        let mut skipped = 0;
        let mut violations = Vec::new();
        for (p, arc) in self.arcs.iter().enumerate() {
            if !self.usable[p] {
                continue;
            }
            let m = &self.masses[p];
            if self.mu.measure_arc(&arc.dilate(&params.a)) > &params.b * m {
                skipped += 1;
                continue;
            }
            checked += 1;
            if self.mu.measure_arc(&arc.dilate(&five)) > &factor * m {
                violations.push(p + 1);
            }
        }
        DilationReport { factor, checked, skipped, violations }
    }
}

fn ball_mass(mu: &DoublingMeasure, support: &Support, ball: &Arc) -> Result<Rational> {
    if !support.contains(ball.center()) {
        return Err(Error::CentreOutsideSupport(ball.center().clone()));
    }
    let m = mu.measure_arc(ball);
    if m.is_zero() {
        return Err(Error::NullBall);
    }
    Ok(m)
}

fn check_range(g: usize, n: usize) -> Result<()> {
    if g == 0 || n < g {
        return Err(Error::EmptyRange { start: g, end: n });
    }
    Ok(())
}

/// Core `K_{G,B}` from the balls `B_G, ..., B_N`.
pub fn extract_core(
    family: &BallFamily,
    mu: &DoublingMeasure,
    params: &TrimParams,
    ball: &Arc,
    g: usize,
    n: usize,
) -> Result<CoreRecord> {
    check_range(g, n)?;
    let mass = ball_mass(mu, &mu.support(), ball)?;
    let scope = Scope::Ball { ball: ball.clone() };
    let prep = Prepared::new(family, mu, &scope, n, &params.kappa_full * &mass)?;
    Ok(prep.extract(g))
}

/// Chains cores from `G_1 = 1` until the horizon, a failure, or
/// `max_blocks`.
pub fn build_blocks(
    family: &BallFamily,
    mu: &DoublingMeasure,
    params: &TrimParams,
    ball: &Arc,
    n: usize,
    max_blocks: Option<usize>,
) -> Result<TrimResult> {
    check_range(1, n)?;
    let mass = ball_mass(mu, &mu.support(), ball)?;
    run(family, mu, params, Scope::Ball { ball: ball.clone() }, mass, params.kappa_full.clone(), 1, n, max_blocks)
}

/// Positive-measure mode: no test ball, `κ = κ_full · mu_est`.
pub fn extract_global(
    family: &BallFamily,
    mu: &DoublingMeasure,
    params: &TrimParams,
    g: usize,
    n: usize,
    max_blocks: Option<usize>,
) -> Result<TrimResult> {
    let kappa = params.kappa_positive()?;
    check_range(g, n)?;
    run(family, mu, params, Scope::Global, Rational::one(), kappa, g, n, max_blocks)
}

#[allow(clippy::too_many_arguments)]
fn run(
    family: &BallFamily,
    mu: &DoublingMeasure,
    params: &TrimParams,
    scope: Scope,
    mass: Rational,
    kappa: Rational,
    g1: usize,
    n: usize,
    max_blocks: Option<usize>,
) -> Result<TrimResult> {
    let prep = Prepared::new(family, mu, &scope, n, &kappa * &mass)?;
    let bound = (&mass * &kappa * &kappa).recip();

    let mut blocks: Vec<CoreRecord> = Vec::new();
    let mut failure = None;
    let mut g = g1;
    let stop = loop {
        if g > n {
            break Stop::Horizon;
        }
        if max_blocks.is_some_and(|m| blocks.len() >= m) {
            break Stop::BlockLimit;
        }
        if !blocks.is_empty() && !prep.has_usable_from(g) {
            break Stop::Exhausted { g };
        }
        let rec = prep.extract(g);
        if !rec.passed {
            failure = Some(rec);
            break Stop::Failed { g };
        }
        g = rec.core.last().expect("passed core is non-empty") + 1;
        blocks.push(rec);
    };

    let block_sets: Vec<IntervalSet> = blocks.iter().map(|b| prep.core_set(&b.core)).collect();
    let block_mass: Vec<Rational> = block_sets.iter().map(|s| mu.measure(s)).collect();

    let mut block_pairs = PairCheck { pairs: 0, violations: Vec::new() };
    // row i holds μ(E_i ∩ E_j) for j ≤ i
    let mut cross: Vec<Vec<Rational>> = Vec::with_capacity(blocks.len());
    for i in 0..block_sets.len() {
        let mut row = Vec::with_capacity(i + 1);
        for j in 0..=i {
            let inter =
                if i == j { block_mass[i].clone() } else { mu.measure(&block_sets[i].intersection(&block_sets[j])) };
            block_pairs.pairs += 1;
            if inter > &bound * &block_mass[i] * &block_mass[j] {
                block_pairs.violations.push((j + 1, i + 1));
            }
            row.push(inter);
        }
        cross.push(row);
    }

    let l_indices: Vec<usize> = blocks.iter().flat_map(|b| b.core.iter().copied()).collect();
    let l_sets: Vec<IntervalSet> = l_indices.iter().map(|&i| prep.arcs[i - 1].to_set()).collect();
    let mut checkpoints = Vec::with_capacity(blocks.len());
    let mut q = 0;
    let mut sum_mu = Rational::zero();
    let mut block_sum = Rational::zero();
    for (m, b) in blocks.iter().enumerate() {
        q += b.core.len();
        sum_mu += &block_mass[m];
        let row = &cross[m];
        block_sum += int(2) * rational::sum(row[..m].iter().cloned()) + &row[m];
        let overlap = overlap_sum_of(&l_sets[..q], mu);
        let rhs = &bound * &sum_mu * &sum_mu;
        checkpoints.push(Checkpoint {
            m: m + 1,
            q,
            sum_mu: sum_mu.clone(),
            holds: overlap <= rhs,
            identity: overlap == block_sum,
            overlap,
            block_sum: block_sum.clone(),
            rhs,
        });
    }

    let dilation = prep.dilation(params);
    let passed = !matches!(stop, Stop::Failed { .. })
        && !blocks.is_empty()
        && block_pairs.violations.is_empty()
        && checkpoints.iter().all(|c| c.holds && c.identity)
        && dilation.violations.is_empty();
    Ok(TrimResult {
        scope,
        mass,
        kappa,
        bound,
        horizon: n,
        first_usable: prep.first_usable(),
        blocks,
        failure,
        stop,
        l_indices,
        checkpoints,
        block_pairs,
        dilation,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::frac;

    fn p222() -> TrimParams {
        TrimParams::new(int(2), int(2), int(2), None).unwrap()
    }

    fn full_ball() -> Arc {
        Arc::new(int(0), frac(1, 2)).unwrap()
    }

    #[test]
    fn constants() {
        let p = p222();
        assert_eq!((p.k, p.kappa_full.clone()), (3, frac(1, 64)));
        let p = TrimParams::new(int(7), int(1), int(1), None).unwrap();
        assert_eq!((p.k, p.kappa_full), (1, frac(1, 2)));
        let p = TrimParams::new(int(2), int(2), int(2), Some(frac(1, 2))).unwrap();
        assert_eq!(p.kappa_positive().unwrap(), frac(1, 128));
        assert_eq!(p222().kappa_positive(), Err(Error::MissingMuEstimate));
    }

    #[test]
    fn parameter_errors() {
        assert_eq!(TrimParams::new(int(1), int(2), int(2), None), Err(Error::BadDilation(int(1))));
        assert!(TrimParams::new(int(2), frac(1, 2), int(2), None).is_err());
        assert!(TrimParams::new(int(2), int(2), frac(1, 2), None).is_err());
        assert!(TrimParams::new(int(2), int(2), int(2), Some(int(0))).is_err());
        assert!(TrimParams::new(int(2), int(2), int(2), Some(frac(3, 2))).is_err());
    }

    #[test]
    fn dyadic_core_on_full_ball() {
        let mu = DoublingMeasure::lebesgue();
        let fam = BallFamily::dyadic_tiling();
        let rec = extract_core(&fam, &mu, &p222(), &full_ball(), 1, 14).unwrap();
        assert_eq!(rec.core, vec![1, 2]);
        assert_eq!(rec.j0, 3);
        assert!(rec.passed);
        let rec = extract_core(&fam, &mu, &p222(), &full_ball(), 3, 126).unwrap();
        assert!(rec.passed && rec.core_measure >= frac(1, 64));
    }

    #[test]
    fn single_candidate() {
        let mu = DoublingMeasure::lebesgue();
        let fam = BallFamily::explicit(vec![Arc::new(frac(1, 2), frac(1, 8)).unwrap()]).unwrap();
        let ball = Arc::new(frac(1, 2), frac(1, 4)).unwrap();
        let rec = extract_core(&fam, &mu, &p222(), &ball, 1, 1).unwrap();
        assert_eq!((rec.core.clone(), rec.j0), (vec![1], 2));
    }

    #[test]
    fn harmonic_misses_far_ball() {
        let mu = DoublingMeasure::lebesgue();
        let fam = BallFamily::harmonic();
        let ball = Arc::new(frac(3, 4), frac(1, 8)).unwrap();
        let rec = extract_core(&fam, &mu, &p222(), &ball, 10, 200).unwrap();
        assert!(!rec.passed);
        assert_eq!(rec.candidates, 0);
        assert_eq!(rec.shortfall, Some(frac(1, 64) * frac(1, 4)));
        let res = build_blocks(&fam, &mu, &p222(), &ball, 200, None).unwrap();
        assert_eq!(res.stop, Stop::Failed { g: 1 });
        assert!(!res.passed);
    }

    #[test]
    fn range_and_ball_errors() {
        let mu = DoublingMeasure::lebesgue();
        let fam = BallFamily::harmonic();
        assert!(matches!(extract_core(&fam, &mu, &p222(), &full_ball(), 5, 4), Err(Error::EmptyRange { .. })));
        let mut density = vec![int(2), int(0)];
        density[1] = int(0);
        let half = DoublingMeasure::new(1, density, int(4), frac(1, 4)).unwrap();
        let outside = Arc::new(frac(3, 4), frac(1, 16)).unwrap();
        assert!(matches!(build_blocks(&fam, &half, &p222(), &outside, 10, None), Err(Error::CentreOutsideSupport(_))));
    }

    #[test]
    fn dyadic_three_blocks() {
        let mu = DoublingMeasure::lebesgue();
        let fam = BallFamily::dyadic_tiling();
        let res = build_blocks(&fam, &mu, &p222(), &full_ball(), 126, Some(3)).unwrap();
        assert!(res.passed, "{res:?}");
        assert_eq!(res.blocks.len(), 3);
        assert_eq!(res.bound, int(4096));
        assert_eq!(res.stop, Stop::BlockLimit);
        assert!(res.checkpoints.windows(2).all(|w| w[0].q < w[1].q));
    }

    #[test]
    fn dyadic_quarter_balls_through_level_six() {
        let mu = DoublingMeasure::lebesgue();
        let fam = BallFamily::dyadic_tiling();
        let ball = Arc::new(int(0), frac(1, 4)).unwrap();
        let res = build_blocks(&fam, &mu, &p222(), &ball, 126, None).unwrap();
        assert!(res.passed);
        assert_eq!(res.g_values(), vec![1, 7, 15, 31, 63]);
        assert_eq!(res.stop, Stop::Horizon);
        assert_eq!(res.sum_mu(), frac(3, 2));
        let ball = Arc::new(frac(1, 4), frac(1, 4)).unwrap();
        let res = build_blocks(&fam, &mu, &p222(), &ball, 126, None).unwrap();
        assert!(res.passed);
        assert_eq!(res.stop, Stop::Exhausted { g: 87 });
    }

    #[test]
    fn global_modes() {
        let mu = DoublingMeasure::lebesgue();
        let p = TrimParams::new(int(2), int(2), int(2), Some(int(1))).unwrap();
        let res = extract_global(&BallFamily::dyadic_tiling(), &mu, &p, 1, 62, None).unwrap();
        assert!(res.passed);
        assert_eq!(res.bound, int(4096));
        assert_eq!(res.blocks.len(), 5);
        let res = extract_global(&BallFamily::harmonic(), &mu, &p, 1, 100, None).unwrap();
        assert_eq!(res.stop, Stop::Failed { g: 65 });
        assert_eq!(res.blocks.len(), 64);
        assert!(extract_global(&BallFamily::harmonic(), &mu, &p222(), 1, 100, None).is_err());
    }
}
