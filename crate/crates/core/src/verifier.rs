//! Certificates for full and positive limsup measure, local density checks
//! and two-sided bounds.
//!
//! A certificate only speaks about the finite horizon and the finite ball
//! grid it was computed on; its `caveats` say so.

use num::{Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{diam_check, vb8_check, BallFamily, DiamReport, FamilySpec, Vb8Report};
use crate::overlap::{overlap_sum_of, ratio_curve, tail_union, WindowMax};
use crate::rational::{self, int, Rational};
use crate::serde_rational;
use crate::space::{Arc, BallGrid, DoublingMeasure, IntervalSet};
use crate::trimming::{build_blocks, extract_global, Scope, Stop, TrimParams, TrimResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Full,
    Positive,
}

/// Horizon and thresholds shared by both certifiers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertifyConfig {
    pub n: usize,
    /// Divergence evidence: `Σ μ(L_s) / μ(B)` must exceed this.
    pub threshold: Rational,
    pub max_blocks: Option<usize>,
    pub vb8_i0: usize,
    /// Q grid and window start for the Kochen–Stone value reported in
    /// positive mode. Empty grid: not reported.
    pub q_grid: Vec<usize>,
    pub q_min: usize,
}

impl CertifyConfig {
    pub fn new(n: usize) -> Self {
        CertifyConfig { n, threshold: int(10), max_blocks: None, vb8_i0: 1, q_grid: Vec::new(), q_min: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BallRun {
    pub trim: TrimResult,
    /// The arcs `L_1, L_2, ...` in order.
    pub l_arcs: Vec<Arc>,
    #[serde(with = "serde_rational")]
    pub normalized_sum: Rational,
    pub evidence: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub mode: Mode,
    pub measure: DoublingMeasure,
    pub family: FamilySpec,
    pub params: TrimParams,
    pub grid: Option<BallGrid>,
    pub horizon: usize,
    #[serde(with = "serde_rational")]
    pub threshold: Rational,
    #[serde(with = "serde_rational")]
    pub kappa: Rational,
    /// `C = κ^-2`.
    #[serde(with = "serde_rational")]
    pub constant: Rational,
    /// `κ²`, the lower bound for the limsup measure implied in positive
    /// mode, valid only if `mu_est` is.
    #[serde(with = "serde_rational::opt")]
    pub implied_lower_bound: Option<Rational>,
    pub window: Option<WindowMax>,
    pub vb8: Vb8Report,
    pub diam: DiamReport,
    pub runs: Vec<BallRun>,
    pub witness: Option<Scope>,
    pub passed: bool,
    pub caveats: Vec<String>,
}

fn ball_run(trim: TrimResult, arcs: &[Arc], threshold: &Rational) -> BallRun {
    let l_arcs: Vec<Arc> = trim.l_indices.iter().map(|&i| arcs[i - 1].clone()).collect();
    let normalized_sum = trim.sum_mu() / &trim.mass;
    let evidence = &normalized_sum > threshold;
    let passed = trim.passed && evidence;
    BallRun { trim, l_arcs, normalized_sum, evidence, passed }
}

/// Failing run with the fewest completed blocks, earliest in grid order.
fn pick_witness(runs: &[BallRun]) -> Option<Scope> {
    runs.iter().filter(|r| !r.passed).min_by_key(|r| r.trim.blocks.len()).map(|r| r.trim.scope.clone())
}

fn caveats(mode: Mode, cfg: &CertifyConfig) -> Vec<String> {
    let mut out = vec![
        format!("finite horizon N = {}: divergence is evidenced by a partial sum, not proved", cfg.n),
        "checkpoint inequalities are verified only at the checkpoints built within the horizon".to_string(),
    ];
    match mode {
        Mode::Full => out.push("test balls are a finite dyadic grid, not every ball".to_string()),
        Mode::Positive => out.push("the implied lower bound is conditional on mu_est".to_string()),
    }
    out
}

/// Full-measure certificate over every grid ball centred in the support.
pub fn certify_full(
    family: &BallFamily,
    mu: &DoublingMeasure,
    params: &TrimParams,
    grid: &BallGrid,
    cfg: &CertifyConfig,
) -> Result<Certificate> {
    let balls: Vec<Arc> = grid.balls(mu).into_iter().filter(|b| mu.measure_arc(b).is_positive()).collect();
    if balls.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let vb8 = vb8_check(family, mu, &params.a, &params.b, cfg.vb8_i0, cfg.n)?;
    let diam = diam_check(family, cfg.n, None)?;
    let arcs = family.prefix(cfg.n)?;
    let runs = balls
        .par_iter()
        .map(|ball| {
            let trim = build_blocks(family, mu, params, ball, cfg.n, cfg.max_blocks)?;
            Ok(ball_run(trim, &arcs, &cfg.threshold))
        })
        .collect::<Result<Vec<BallRun>>>()?;
    let kappa = params.kappa_full.clone();
    Ok(assemble(Mode::Full, family, mu, params, Some(grid.clone()), cfg, kappa, None, vb8, diam, runs))
}

/// Positive-measure certificate from the global pipeline.
pub fn certify_positive(
    family: &BallFamily,
    mu: &DoublingMeasure,
    params: &TrimParams,
    cfg: &CertifyConfig,
) -> Result<Certificate> {
    let kappa = params.kappa_positive()?;
    let vb8 = vb8_check(family, mu, &params.a, &params.b, cfg.vb8_i0, cfg.n)?;
    let diam = diam_check(family, cfg.n, None)?;
    let arcs = family.prefix(cfg.n)?;
    let trim = extract_global(family, mu, params, 1, cfg.n, cfg.max_blocks)?;
    let runs = vec![ball_run(trim, &arcs, &cfg.threshold)];
    let window =
        if cfg.q_grid.is_empty() { None } else { ratio_curve(family, mu, &cfg.q_grid, cfg.q_min, None)?.window_max };
    Ok(assemble(Mode::Positive, family, mu, params, None, cfg, kappa, window, vb8, diam, runs))
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    mode: Mode,
    family: &BallFamily,
    mu: &DoublingMeasure,
    params: &TrimParams,
    grid: Option<BallGrid>,
    cfg: &CertifyConfig,
    kappa: Rational,
    window: Option<WindowMax>,
    vb8: Vb8Report,
    diam: DiamReport,
    runs: Vec<BallRun>,
) -> Certificate {
    let witness = pick_witness(&runs);
    let passed = vb8.passed && diam.decays && runs.iter().all(|r| r.passed);
    let sq = &kappa * &kappa;
    Certificate {
        mode,
        measure: mu.clone(),
        family: family.spec().clone(),
        params: params.clone(),
        grid,
        horizon: cfg.n,
        threshold: cfg.threshold.clone(),
        constant: sq.recip(),
        implied_lower_bound: (mode == Mode::Positive).then_some(sq),
        kappa,
        window,
        vb8,
        diam,
        runs,
        witness,
        passed,
        caveats: caveats(mode, cfg),
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Reverify(msg()))
    }
}

impl Certificate {
    /// Recomputes every verdict from the data stored in the certificate
    /// (measure, family spec, constants, the arcs `L_s` and the block
    /// structure) and checks that it matches.
    pub fn reverify(&self) -> Result<()> {
        let p = &self.params;
        let fresh = TrimParams::new(p.a.clone(), p.b.clone(), p.lambda.clone(), p.mu_est.clone())?;
        ensure(&fresh == p, || "trimming constants do not match a, b, lambda".into())?;
        let kappa = match self.mode {
            Mode::Full => fresh.kappa_full.clone(),
            Mode::Positive => fresh.kappa_positive()?,
        };
        ensure(kappa == self.kappa, || format!("kappa {} should be {kappa}", self.kappa))?;
        let sq = &kappa * &kappa;
        ensure(self.constant == sq.recip(), || "constant is not kappa^-2".into())?;
        let implied = (self.mode == Mode::Positive).then(|| sq.clone());
        ensure(self.implied_lower_bound == implied, || "implied lower bound is not kappa^2".into())?;

        let family = BallFamily::new(self.family.clone())?;
        let mu = &self.measure;
        let arcs = family.prefix(self.horizon)?;
        let vb8 = vb8_check(&family, mu, &p.a, &p.b, self.vb8.i0, self.horizon)?;
        ensure(vb8 == self.vb8, || "vb8 evidence differs".into())?;
        let diam = diam_check(&family, self.horizon, None)?;
        ensure(diam == self.diam, || "diameter evidence differs".into())?;

        match (self.mode, &self.grid) {
            (Mode::Full, Some(grid)) => {
                let balls: Vec<Scope> = grid
                    .balls(mu)
                    .into_iter()
                    .filter(|b| mu.measure_arc(b).is_positive())
                    .map(|ball| Scope::Ball { ball })
                    .collect();
                let stored: Vec<Scope> = self.runs.iter().map(|r| r.trim.scope.clone()).collect();
                ensure(balls == stored, || "runs do not match the ball grid".into())?;
            }
            (Mode::Positive, None) => {
                ensure(self.runs.len() == 1 && self.runs[0].trim.scope == Scope::Global, || {
                    "positive mode needs exactly one global run".into()
                })?;
            }
            _ => return Err(Error::Reverify("grid presence does not match mode".into())),
        }

        for (n, run) in self.runs.iter().enumerate() {
            self.reverify_run(run, &arcs, &kappa).map_err(|e| match e {
                Error::Reverify(m) => Error::Reverify(format!("run {}: {m}", n + 1)),
                other => other,
            })?;
        }
        let witness = pick_witness(&self.runs);
        ensure(witness == self.witness, || "witness differs".into())?;
        let passed = vb8.passed && diam.decays && self.runs.iter().all(|r| r.passed);
        ensure(passed == self.passed, || "overall verdict differs".into())
    }

    fn reverify_run(&self, run: &BallRun, arcs: &[Arc], kappa: &Rational) -> Result<()> {
        let mu = &self.measure;
        let trim = &run.trim;
        let mass = match &trim.scope {
            Scope::Ball { ball } => mu.measure_arc(ball),
            Scope::Global => int(1),
        };
        ensure(mass == trim.mass, || "ball mass differs".into())?;
        ensure(&trim.kappa == kappa, || "kappa differs".into())?;
        let bound = (&mass * kappa * kappa).recip();
        ensure(bound == trim.bound, || "bound is not 1/(mu(B) kappa^2)".into())?;

        let l_indices: Vec<usize> = trim.blocks.iter().flat_map(|b| b.core.iter().copied()).collect();
        ensure(l_indices == trim.l_indices, || "L indices do not concatenate the cores".into())?;
        ensure(l_indices.iter().all(|&i| i >= 1 && i <= arcs.len()), || "L index outside horizon".into())?;
        let expected: Vec<Arc> = l_indices.iter().map(|&i| arcs[i - 1].clone()).collect();
        ensure(expected == run.l_arcs, || "L arcs differ from the family".into())?;
        if let Scope::Ball { ball } = &trim.scope {
            ensure(run.l_arcs.iter().all(|a| a.is_subset_of(ball)), || "an L arc leaves the test ball".into())?;
        }

        let threshold = kappa * &mass;
        let mut next_g = trim.blocks.first().map(|b| b.g);
        let mut block_sets = Vec::new();
        let mut offset = 0;
        for b in &trim.blocks {
            ensure(Some(b.g) == next_g, || format!("block start {} breaks the chain", b.g))?;
            let core = &run.l_arcs[offset..offset + b.core.len()];
            offset += b.core.len();
            ensure(b.core.windows(2).all(|w| w[0] < w[1]) && b.core[0] >= b.g, || {
                format!("core at {} is not increasing from G", b.g)
            })?;
            for (i, x) in core.iter().enumerate() {
                ensure(core[i + 1..].iter().all(|y| !x.intersects(y)), || format!("core at {} not disjoint", b.g))?;
            }
            let set = IntervalSet::canonicalize(core);
            let m = mu.measure(&set);
            ensure(m == b.core_measure && m >= threshold, || format!("core measure at {} fails", b.g))?;
            block_sets.push((set, m));
            next_g = b.core.last().map(|i| i + 1);
        }

        let mut violations = Vec::new();
        let mut pairs = 0;
        for i in 0..block_sets.len() {
            for j in 0..=i {
                pairs += 1;
                let inter = mu.measure(&block_sets[i].0.intersection(&block_sets[j].0));
                if inter > &bound * &block_sets[i].1 * &block_sets[j].1 {
                    violations.push((j + 1, i + 1));
                }
            }
        }
        ensure(pairs == trim.block_pairs.pairs && violations == trim.block_pairs.violations, || {
            "block pair check differs".into()
        })?;

        let l_sets: Vec<IntervalSet> = run.l_arcs.iter().map(Arc::to_set).collect();
        ensure(trim.checkpoints.len() == trim.blocks.len(), || "one checkpoint per block expected".into())?;
        let mut q = 0;
        for (c, b) in trim.checkpoints.iter().zip(&trim.blocks) {
            q += b.core.len();
            let sum_mu = rational::sum(l_sets[..q].iter().map(|s| mu.measure(s)));
            let overlap = overlap_sum_of(&l_sets[..q], mu);
            let rhs = &bound * &sum_mu * &sum_mu;
            let ok = c.q == q
                && c.sum_mu == sum_mu
                && c.overlap == overlap
                && c.rhs == rhs
                && c.holds == (overlap <= rhs)
                && c.identity == (overlap == c.block_sum);
            ensure(ok, || format!("checkpoint Q = {q} differs"))?;
        }

        let total = trim.checkpoints.last().map(|c| c.sum_mu.clone()).unwrap_or_else(Rational::zero);
        let normalized = total / &mass;
        ensure(normalized == run.normalized_sum, || "normalized sum differs".into())?;
        ensure(run.evidence == (normalized > self.threshold), || "evidence flag differs".into())?;
        let trim_ok = !matches!(trim.stop, Stop::Failed { .. })
            && !trim.blocks.is_empty()
            && violations.is_empty()
            && trim.checkpoints.iter().all(|c| c.holds && c.identity)
            && trim.dilation.violations.is_empty();
        ensure(trim_ok == trim.passed, || "trimming verdict differs".into())?;
        ensure(run.passed == (trim_ok && run.evidence), || "run verdict differs".into())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DensityWitness {
    pub ball: Arc,
    /// `μ(E ∩ B) / μ(B)`.
    #[serde(with = "serde_rational")]
    pub ratio: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DensityReport {
    #[serde(with = "serde_rational")]
    pub c: Rational,
    pub depth: u32,
    pub balls_checked: usize,
    /// Ball with the smallest ratio.
    pub worst: Option<DensityWitness>,
    /// First grid ball with ratio below `c`.
    pub failure: Option<DensityWitness>,
    pub passed: bool,
}

/// Checks `μ(E ∩ B) ≥ c μ(B)` on every grid ball of positive measure.
pub fn local_density_check(
    set: &IntervalSet,
    mu: &DoublingMeasure,
    c: &Rational,
    r0: &Rational,
    depth: u32,
) -> Result<DensityReport> {
    if !c.is_positive() || c > &int(1) {
        return Err(Error::BadDensityConstant(c.clone()));
    }
    let balls = BallGrid::new(depth, r0.clone()).balls(mu);
    let ratios: Vec<Option<DensityWitness>> = balls
        .into_par_iter()
        .map(|ball| {
            let m = mu.measure_arc(&ball);
            if m.is_zero() {
                return None;
            }
            let ratio = mu.measure(&set.intersection(&ball.to_set())) / m;
            Some(DensityWitness { ball, ratio })
        })
        .collect();
    let mut checked = 0;
    let mut worst: Option<DensityWitness> = None;
    let mut failure = None;
    for w in ratios.into_iter().flatten() {
        checked += 1;
        if failure.is_none() && &w.ratio < c {
            failure = Some(w.clone());
        }
        if worst.as_ref().is_none_or(|b| w.ratio < b.ratio) {
            worst = Some(w);
        }
    }
    Ok(DensityReport { c: c.clone(), depth, balls_checked: checked, worst, passed: failure.is_none(), failure })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TailRow {
    pub t: usize,
    #[serde(with = "serde_rational")]
    pub measure: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub n: usize,
    /// Largest `KS_Q` over the window.
    pub lower: Option<WindowMax>,
    /// Smallest tail union over the t grid.
    #[serde(with = "serde_rational")]
    pub upper: Rational,
    pub upper_t: usize,
    pub tails: Vec<TailRow>,
    #[serde(with = "serde_rational::opt")]
    pub gap: Option<Rational>,
    /// `μ(E_1 ∪ ... ∪ E_N)`.
    #[serde(with = "serde_rational")]
    pub union_measure: Rational,
    /// `lower ≤ upper`; false means the horizon is too short for the two
    /// estimates to bracket anything.
    pub consistent: bool,
}

/// Lower estimate from Kochen–Stone values on `q_grid ∩ [q_min, ∞)`, upper
/// estimate from tail unions `μ(E_t ∪ ... ∪ E_N)`.
pub fn bounds(
    family: &BallFamily,
    mu: &DoublingMeasure,
    t_grid: &[usize],
    n: usize,
    q_grid: &[usize],
    q_min: usize,
) -> Result<BoundsReport> {
    if t_grid.is_empty() {
        return Err(Error::EmptyPrefix);
    }
    let lower = ratio_curve(family, mu, q_grid, q_min, None)?.window_max;
    let tails: Vec<TailRow> = t_grid
        .par_iter()
        .map(|&t| Ok(TailRow { t, measure: tail_union(family, mu, t, n, None)? }))
        .collect::<Result<_>>()?;
    let best = tails.iter().min_by(|a, b| a.measure.cmp(&b.measure).then(a.t.cmp(&b.t))).expect("non-empty");
    let upper = best.measure.clone();
    let upper_t = best.t;
    let union_measure = tail_union(family, mu, 1, n, None)?;
    let gap = lower.as_ref().map(|l| &upper - &l.ks);
    let consistent = lower.as_ref().is_none_or(|l| l.ks <= upper);
    Ok(BoundsReport { n, lower, upper, upper_t, tails, gap, union_measure, consistent })
}
