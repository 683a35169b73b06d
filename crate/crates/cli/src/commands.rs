use std::path::{Path, PathBuf};

use limsup_core::covering::{verify_cover, verify_structure, vitali_5r};
use limsup_core::family::{diam_check, vb8_check, BallFamily};
use limsup_core::overlap::{pairwise_constant, partial_sums, ratio_curve, tail_union, PairwiseConstant};
use limsup_core::rational::Rational;
use limsup_core::trimming::{build_blocks, extract_global, Scope, Stop, TrimResult};
use limsup_core::verifier::{bounds, certify_full, certify_positive, local_density_check, Certificate};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::report::{cells, Output, Verdict};
use crate::scenario::{Command, Loaded};

/// What one subcommand produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub command: Command,
    pub verdict: Verdict,
    pub summary: String,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    pub fn exit_code(&self) -> u8 {
        match self.verdict {
            Verdict::Fail => 1,
            Verdict::Pass | Verdict::Report => 0,
        }
    }
}

fn verdict(ok: bool) -> Verdict {
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

fn missing(loaded: &Loaded, section: &'static str, cmd: Command) -> CliError {
    CliError::MissingSection { name: loaded.scenario.name.clone(), section, command: cmd.name() }
}

pub fn execute(cmd: Command, loaded: &Loaded, dir: &Path) -> Result<Outcome> {
    let mut out = Output::new(dir)?;
    let (verdict, summary) = match cmd {
        Command::Sums => sums(loaded, &mut out)?,
        Command::Overlap => overlap(loaded, &mut out)?,
        Command::Pairwise => pairwise(loaded, &mut out)?,
        Command::Cover => cover(loaded, &mut out)?,
        Command::Trim => trim(loaded, &mut out)?,
        Command::CertifyFull => certify(loaded, &mut out, true)?,
        Command::CertifyPositive => certify(loaded, &mut out, false)?,
        Command::Bounds => bounds_cmd(loaded, &mut out)?,
        Command::Vb8 => vb8(loaded, &mut out)?,
        Command::DensityCheck => density(loaded, &mut out)?,
    };
    Ok(Outcome { command: cmd, verdict, summary, files: out.into_written() })
}

#[derive(Serialize)]
struct SumRow {
    q: usize,
    #[serde(with = "limsup_core::serde_rational")]
    sum: Rational,
}

#[derive(Serialize)]
struct TailRow {
    t: usize,
    #[serde(with = "limsup_core::serde_rational")]
    tail_union: Rational,
}

#[derive(Serialize)]
struct SumsReport {
    n: usize,
    partial_sums: Vec<SumRow>,
    tails: Vec<TailRow>,
    #[serde(with = "limsup_core::serde_rational")]
    threshold: Rational,
    /// The partial sum at `n` exceeds the threshold. Evidence only.
    exceeds_threshold: bool,
}

fn family(loaded: &Loaded) -> Result<BallFamily> {
    Ok(BallFamily::new(loaded.scenario.family.clone())?)
}

fn t_grid(loaded: &Loaded) -> Vec<usize> {
    let t = &loaded.scenario.horizon.t_grid;
    if t.is_empty() {
        vec![1]
    } else {
        t.clone()
    }
}

fn sums(loaded: &Loaded, out: &mut Output) -> Result<(Verdict, String)> {
    let s = &loaded.scenario;
    let fam = family(loaded)?;
    let n = s.horizon.n;
    let mut grid = s.horizon.q_grid.clone();
    grid.push(n);
    grid.sort_unstable();
    grid.dedup();
    let partial: Vec<SumRow> =
        partial_sums(&fam, &s.measure, &grid, None)?.into_iter().map(|(q, sum)| SumRow { q, sum }).collect();
    let tails: Vec<TailRow> = t_grid(loaded)
        .par_iter()
        .map(|&t| Ok(TailRow { t, tail_union: tail_union(&fam, &s.measure, t, n, None)? }))
        .collect::<Result<_>>()?;
    let last = &partial.last().expect("grid contains n").sum;
    let exceeds = last > &s.horizon.threshold;
    out.csv(
        "partial_sums.csv",
        &["q", "partial_sum", "partial_sum_decimal"],
        partial.iter().map(|r| {
            let [e, d] = cells(&r.sum);
            vec![r.q.to_string(), e, d]
        }),
    )?;
    out.csv(
        "tail_unions.csv",
        &["t", "n", "tail_union", "tail_union_decimal"],
        tails.iter().map(|r| {
            let [e, d] = cells(&r.tail_union);
            vec![r.t.to_string(), n.to_string(), e, d]
        }),
    )?;
    let summary = format!("sum at N = {n} is {}", cells(last)[1]);
    let rep = SumsReport {
        n,
        partial_sums: partial,
        tails,
        threshold: s.horizon.threshold.clone(),
        exceeds_threshold: exceeds,
    };
    out.report("sums.json", "sums", loaded, Verdict::Report, &rep)?;
    Ok((Verdict::Report, summary))
}

fn opt_cells(x: &Option<Rational>) -> [String; 2] {
    x.as_ref().map_or([String::new(), String::new()], cells)
}

fn overlap(loaded: &Loaded, out: &mut Output) -> Result<(Verdict, String)> {
    let s = &loaded.scenario;
    let fam = family(loaded)?;
    let grid = if s.horizon.q_grid.is_empty() { vec![s.horizon.n] } else { s.horizon.q_grid.clone() };
    let q_min = s.horizon.window.as_ref().map_or(1, |w| w.min);
    let rep = ratio_curve(&fam, &s.measure, &grid, q_min, None)?;
    out.csv(
        "overlap.csv",
        &[
            "q",
            "sum_mu",
            "sum_mu_decimal",
            "overlap",
            "overlap_decimal",
            "ratio",
            "ratio_decimal",
            "ks",
            "ks_decimal",
            "union",
            "union_decimal",
        ],
        rep.rows.iter().map(|r| {
            let mut row = vec![r.q.to_string()];
            row.extend(cells(&r.sum_mu));
            row.extend(cells(&r.overlap));
            row.extend(opt_cells(&r.ratio));
            row.extend(opt_cells(&r.ks));
            row.extend(cells(&r.union_measure));
            row
        }),
    )?;
    let summary = match &rep.window_max {
        Some(w) => format!("max KS over Q >= {q_min} is {} at Q = {}", cells(&w.ks)[1], w.q),
        None => format!("no Q >= {q_min} on the grid"),
    };
    out.report("overlap.json", "overlap", loaded, Verdict::Report, &rep)?;
    Ok((Verdict::Report, summary))
}

fn pairwise(loaded: &Loaded, out: &mut Output) -> Result<(Verdict, String)> {
    let s = &loaded.scenario;
    let fam = family(loaded)?;
    let qs: Vec<usize> = match &s.pairwise {
        Some(p) => p.q.clone(),
        None => vec![s.horizon.n.min(256)],
    };
    if qs.iter().any(|&q| q < 2) {
        return Err(limsup_core::Error::TooFewEvents.into());
    }
    let reports = qs.iter().map(|&q| Ok(pairwise_constant(&fam, &s.measure, q, None)?)).collect::<Result<Vec<_>>>()?;
    out.csv(
        "pairwise.csv",
        &["q", "kind", "constant", "constant_decimal", "witness_s", "witness_t"],
        reports.iter().map(|r| {
            let (kind, [e, d]) = match &r.constant {
                PairwiseConstant::Finite { value } => ("finite", cells(value)),
                PairwiseConstant::Unbounded => ("unbounded", [String::new(), String::new()]),
            };
            let (ws, wt) = r.witness.map_or((String::new(), String::new()), |(a, b)| (a.to_string(), b.to_string()));
            vec![r.q.to_string(), kind.to_string(), e, d, ws, wt]
        }),
    )?;
    let summary = match reports.last().map(|r| &r.constant) {
        Some(PairwiseConstant::Finite { value }) => format!("C = {} at Q = {}", value, qs.last().unwrap()),
        _ => "unbounded".to_string(),
    };
    out.report("pairwise.json", "pairwise", loaded, Verdict::Report, &reports)?;
    Ok((Verdict::Report, summary))
}

#[derive(Serialize)]
struct CoverReport {
    q: usize,
    /// 1-based family indices in selection order.
    selection_order: Vec<usize>,
    #[serde(with = "limsup_core::serde_rational")]
    factor: Rational,
    disjoint: bool,
    covered: bool,
    overlapping: Option<(usize, usize)>,
    uncovered: Option<usize>,
    structure_ok: bool,
}

fn cover(loaded: &Loaded, out: &mut Output) -> Result<(Verdict, String)> {
    let s = &loaded.scenario;
    let q = s.cover.as_ref().map_or(s.horizon.n.min(200), |c| c.q);
    let arcs = family(loaded)?.prefix(q)?;
    let sel = vitali_5r(&arcs);
    let v = verify_cover(&arcs, &sel);
    let structure_ok = verify_structure(&arcs, &sel).is_ok();
    let mut rank = vec![None; arcs.len()];
    for (r, &i) in sel.selected.iter().enumerate() {
        rank[i] = Some(r + 1);
    }
    out.csv(
        "cover.csv",
        &["index", "center", "center_decimal", "radius", "radius_decimal", "selected", "selection_rank"],
        arcs.iter().enumerate().map(|(i, a)| {
            let mut row = vec![(i + 1).to_string()];
            row.extend(cells(a.center()));
            row.extend(cells(a.radius()));
            row.push(rank[i].is_some().to_string());
            row.push(rank[i].map_or(String::new(), |r| r.to_string()));
            row
        }),
    )?;
    let ok = v.passed() && structure_ok;
    let rep = CoverReport {
        q,
        selection_order: sel.selected.iter().map(|i| i + 1).collect(),
        factor: sel.factor.clone(),
        disjoint: v.disjoint,
        covered: v.covered,
        overlapping: v.overlapping.map(|(a, b)| (a + 1, b + 1)),
        uncovered: v.uncovered.map(|i| i + 1),
        structure_ok,
    };
    out.report("cover.json", "cover", loaded, verdict(ok), &rep)?;
    Ok((verdict(ok), format!("{} of {q} arcs selected", sel.selected.len())))
}

fn stop_label(stop: &Stop) -> String {
    match stop {
        Stop::Horizon => "horizon".into(),
        Stop::BlockLimit => "block_limit".into(),
        Stop::Exhausted { g } => format!("exhausted@{g}"),
        Stop::Failed { g } => format!("failed@{g}"),
    }
}

fn scope_cells(scope: &Scope) -> Vec<String> {
    match scope {
        Scope::Ball { ball } => {
            let mut v = Vec::new();
            v.extend(cells(ball.center()));
            v.extend(cells(ball.radius()));
            v
        }
        Scope::Global => vec!["global".into(), String::new(), String::new(), String::new()],
    }
}

fn trim_tables(out: &mut Output, prefix: &str, runs: &[&TrimResult]) -> Result<()> {
    let head = ["center", "center_decimal", "radius", "radius_decimal"];
    let mut blocks_header: Vec<&str> = head.to_vec();
    blocks_header.extend([
        "block",
        "g",
        "j0",
        "candidates",
        "core_size",
        "core_measure",
        "core_measure_decimal",
        "threshold",
        "threshold_decimal",
        "passed",
    ]);
    let mut rows = Vec::new();
    for t in runs {
        let recs = t.blocks.iter().chain(t.failure.iter());
        for (m, b) in recs.enumerate() {
            let mut row = scope_cells(&t.scope);
            row.extend([(m + 1).to_string(), b.g.to_string(), b.j0.to_string(), b.candidates.to_string()]);
            row.push(b.core.len().to_string());
            row.extend(cells(&b.core_measure));
            row.extend(cells(&b.threshold));
            row.push(b.passed.to_string());
            rows.push(row);
        }
    }
    out.csv(&format!("{prefix}_blocks.csv"), &blocks_header, rows)?;

    let mut cp_header: Vec<&str> = head.to_vec();
    cp_header.extend([
        "m",
        "q",
        "sum_mu",
        "sum_mu_decimal",
        "overlap",
        "overlap_decimal",
        "rhs",
        "rhs_decimal",
        "holds",
        "block_identity",
    ]);
    let mut rows = Vec::new();
    for t in runs {
        for c in &t.checkpoints {
            let mut row = scope_cells(&t.scope);
            row.extend([c.m.to_string(), c.q.to_string()]);
            row.extend(cells(&c.sum_mu));
            row.extend(cells(&c.overlap));
            row.extend(cells(&c.rhs));
            row.extend([c.holds.to_string(), c.identity.to_string()]);
            rows.push(row);
        }
    }
    out.csv(&format!("{prefix}_checkpoints.csv"), &cp_header, rows)
}

fn trim(loaded: &Loaded, out: &mut Output) -> Result<(Verdict, String)> {
    let s = &loaded.scenario;
    let fam = family(loaded)?;
    let n = s.horizon.n;
    let res = match s.trim.as_ref().and_then(|t| t.ball.as_ref()) {
        Some(ball) => build_blocks(&fam, &s.measure, &s.params, ball, n, s.horizon.max_blocks)?,
        None => {
            if s.params.mu_est.is_none() {
                return Err(missing(loaded, "trim.ball or params.mu_est", Command::Trim));
            }
            extract_global(&fam, &s.measure, &s.params, 1, n, s.horizon.max_blocks)?
        }
    };
    trim_tables(out, "trim", &[&res])?;
    let summary = format!("{} blocks, stop {}", res.blocks.len(), stop_label(&res.stop));
    out.report("trim.json", "trim", loaded, verdict(res.passed), &res)?;
    Ok((verdict(res.passed), summary))
}

fn certify(loaded: &Loaded, out: &mut Output, full: bool) -> Result<(Verdict, String)> {
    let s = &loaded.scenario;
    let fam = family(loaded)?;
    let cfg = s.certify_config();
    let (cert, name) = if full {
        (certify_full(&fam, &s.measure, &s.params, &s.ball_grid(), &cfg)?, "certify-full")
    } else {
        (certify_positive(&fam, &s.measure, &s.params, &cfg)?, "certify-positive")
    };
    let stem = if full { "certificate_full" } else { "certificate_positive" };
    let mut header = vec!["center", "center_decimal", "radius", "radius_decimal"];
    header.extend([
        "mass",
        "mass_decimal",
        "blocks",
        "l_count",
        "normalized_sum",
        "normalized_sum_decimal",
        "evidence",
        "stop",
        "passed",
    ]);
    out.csv(
        &format!("{stem}.csv"),
        &header,
        cert.runs.iter().map(|r| {
            let mut row = scope_cells(&r.trim.scope);
            row.extend(cells(&r.trim.mass));
            row.extend([r.trim.blocks.len().to_string(), r.l_arcs.len().to_string()]);
            row.extend(cells(&r.normalized_sum));
            row.extend([r.evidence.to_string(), stop_label(&r.trim.stop), r.passed.to_string()]);
            row
        }),
    )?;
    let trims: Vec<&TrimResult> = cert.runs.iter().map(|r| &r.trim).collect();
    trim_tables(out, stem, &trims)?;
    let v = verdict(cert.passed);
    let mut summary = format!("C = {}", cert.constant);
    if let Some(lb) = &cert.implied_lower_bound {
        summary.push_str(&format!(", implied lower bound {lb}"));
    }
    if let Some(Scope::Ball { ball }) = &cert.witness {
        summary.push_str(&format!(", witness {ball}"));
    }
    out.report(&format!("{stem}.json"), name, loaded, v, &cert)?;
    Ok((v, summary))
}

fn bounds_cmd(loaded: &Loaded, out: &mut Output) -> Result<(Verdict, String)> {
    let s = &loaded.scenario;
    let fam = family(loaded)?;
    let (grid, q_min) = s.window_grid();
    let grid = if grid.is_empty() { vec![s.horizon.n] } else { grid };
    let rep = bounds(&fam, &s.measure, &t_grid(loaded), s.horizon.n, &grid, q_min)?;
    out.csv(
        "bounds.csv",
        &["t", "n", "tail_union", "tail_union_decimal"],
        rep.tails.iter().map(|r| {
            let [e, d] = cells(&r.measure);
            vec![r.t.to_string(), rep.n.to_string(), e, d]
        }),
    )?;
    let lower = rep.lower.as_ref().map_or("none".to_string(), |l| cells(&l.ks)[1].clone());
    let mut summary = format!("lower {lower}, upper {} (t = {})", cells(&rep.upper)[1], rep.upper_t);
    if !rep.consistent {
        summary.push_str(", lower > upper at this horizon");
    }
    out.report("bounds.json", "bounds", loaded, Verdict::Report, &rep)?;
    Ok((Verdict::Report, summary))
}

#[derive(Serialize)]
struct HypothesisReport {
    vb8: limsup_core::family::Vb8Report,
    diam: limsup_core::family::DiamReport,
    doubling: limsup_core::space::DoublingCertificate,
}

fn vb8(loaded: &Loaded, out: &mut Output) -> Result<(Verdict, String)> {
    let s = &loaded.scenario;
    let fam = family(loaded)?;
    let n = s.horizon.n;
    let i0 = s.vb8.as_ref().map_or(1, |v| v.i0);
    let vb8 = vb8_check(&fam, &s.measure, &s.params.a, &s.params.b, i0, n)?;
    let diam = diam_check(&fam, n, None)?;
    let doubling = s.measure.doubling_certificate(s.grid.depth.max(s.measure.level()))?;
    out.csv(
        "diameters.csv",
        &["t", "max_diameter", "max_diameter_decimal"],
        diam.tails.iter().map(|d| {
            let [e, dd] = cells(&d.max_diameter);
            vec![d.t.to_string(), e, dd]
        }),
    )?;
    let ok = vb8.passed && diam.decays && !doubling.exceeds_declared;
    let summary = format!(
        "{} violations in {i0}..={n}, diameters {}, doubling ratio {}",
        vb8.violations.len(),
        if diam.decays { "decay" } else { "do not decay" },
        doubling.lambda_hat
    );
    out.report("vb8.json", "vb8", loaded, verdict(ok), &HypothesisReport { vb8, diam, doubling })?;
    Ok((verdict(ok), summary))
}

fn density(loaded: &Loaded, out: &mut Output) -> Result<(Verdict, String)> {
    let s = &loaded.scenario;
    let spec = s.density.as_ref().ok_or_else(|| missing(loaded, "density", Command::DensityCheck))?;
    let set = s.density_set().expect("density section present");
    let rep = local_density_check(&set, &s.measure, &spec.c, &s.grid.r0, s.grid.depth)?;
    let summary = match &rep.worst {
        Some(w) => format!("{} balls, worst ratio {} on {}", rep.balls_checked, cells(&w.ratio)[1], w.ball),
        None => "no grid ball of positive measure".to_string(),
    };
    out.report("density.json", "density-check", loaded, verdict(rep.passed), &rep)?;
    Ok((verdict(rep.passed), summary))
}

/// Reads a certificate (bare or inside a report envelope) and re-verifies it.
pub fn reverify_file(path: &Path) -> Result<Certificate> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
    let mut value: serde_json::Value = serde_json::from_str(&text)?;
    if let Some(inner) = value.get_mut("report") {
        value = inner.take();
    }
    let cert: Certificate = serde_json::from_value(value)?;
    cert.reverify()?;
    Ok(cert)
}
