//! Scenario files: JSON with rational fields written as `"p/q"` strings.
//!
//! Validation runs inside deserialization, so a bad value is reported with
//! the line and column serde_json was at when it finished the enclosing
//! object.

use std::path::{Path, PathBuf};

use limsup_core::family::FamilySpec;
use limsup_core::rational::{int, Rational};
use limsup_core::serde_rational;
use limsup_core::space::{Arc, BallGrid, DoublingMeasure, IntervalSet};
use limsup_core::trimming::TrimParams;
use limsup_core::verifier::CertifyConfig;
use num::Signed;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Sums,
    Overlap,
    Pairwise,
    Cover,
    Trim,
    CertifyFull,
    CertifyPositive,
    Bounds,
    Vb8,
    DensityCheck,
}

impl Command {
    pub const ALL: [Command; 10] = [
        Command::Sums,
        Command::Overlap,
        Command::Pairwise,
        Command::Cover,
        Command::Trim,
        Command::CertifyFull,
        Command::CertifyPositive,
        Command::Bounds,
        Command::Vb8,
        Command::DensityCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Sums => "sums",
            Command::Overlap => "overlap",
            Command::Pairwise => "pairwise",
            Command::Cover => "cover",
            Command::Trim => "trim",
            Command::CertifyFull => "certify-full",
            Command::CertifyPositive => "certify-positive",
            Command::Bounds => "bounds",
            Command::Vb8 => "vb8",
            Command::DensityCheck => "density-check",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum RawMeasure {
    Named(String),
    Density {
        level: u32,
        #[serde(with = "serde_rational::vec")]
        density: Vec<Rational>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    #[serde(with = "serde_rational")]
    a: Rational,
    #[serde(with = "serde_rational")]
    b: Rational,
    #[serde(with = "serde_rational")]
    lambda: Rational,
    #[serde(default, with = "serde_rational::opt")]
    mu_est: Option<Rational>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub min: usize,
    pub max: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Horizon {
    pub n: usize,
    #[serde(default)]
    pub t_grid: Vec<usize>,
    #[serde(default)]
    pub q_grid: Vec<usize>,
    pub window: Option<Window>,
    #[serde(default = "default_threshold", with = "serde_rational")]
    pub threshold: Rational,
    #[serde(default)]
    pub max_blocks: Option<usize>,
}

fn default_threshold() -> Rational {
    int(10)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub depth: u32,
    #[serde(with = "serde_rational")]
    pub r0: Rational,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vb8Spec {
    pub i0: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverSpec {
    pub q: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairwiseSpec {
    pub q: Vec<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrimSpec {
    /// Test ball; absent means the global (positive-measure) pipeline.
    pub ball: Option<Arc>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    pub set: Vec<Arc>,
    #[serde(with = "serde_rational")]
    pub c: Rational,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    measure: RawMeasure,
    family: FamilySpec,
    params: RawParams,
    horizon: Horizon,
    grid: GridSpec,
    #[serde(default)]
    vb8: Option<Vb8Spec>,
    #[serde(default)]
    cover: Option<CoverSpec>,
    #[serde(default)]
    pairwise: Option<PairwiseSpec>,
    #[serde(default)]
    trim: Option<TrimSpec>,
    #[serde(default)]
    density: Option<DensitySpec>,
    #[serde(default)]
    commands: Vec<Command>,
    #[serde(default)]
    output: Option<PathBuf>,
}

/// A validated scenario.
#[derive(Debug, Clone, Deserialize)]
#[serde(try_from = "RawScenario")]
pub struct Scenario {
    pub name: String,
    pub measure: DoublingMeasure,
    pub family: FamilySpec,
    pub params: TrimParams,
    pub horizon: Horizon,
    pub grid: GridSpec,
    pub vb8: Option<Vb8Spec>,
    pub cover: Option<CoverSpec>,
    pub pairwise: Option<PairwiseSpec>,
    pub trim: Option<TrimSpec>,
    pub density: Option<DensitySpec>,
    pub commands: Vec<Command>,
    pub output: Option<PathBuf>,
}

fn check_points(what: &str, points: &[usize], n: usize, strict: bool) -> Result<(), String> {
    if let Some(&p) = points.iter().find(|&&p| p == 0 || p > n) {
        return Err(format!("{what} point {p} outside 1..={n}"));
    }
    if strict && points.windows(2).any(|w| w[0] >= w[1]) {
        return Err(format!("{what} must be strictly increasing"));
    }
    Ok(())
}

impl TryFrom<RawScenario> for Scenario {
    type Error = String;

    fn try_from(raw: RawScenario) -> Result<Self, String> {
        if raw.name.is_empty() || raw.name.contains(['/', '\\']) {
            return Err(format!("scenario name {:?} must be non-empty and contain no path separators", raw.name));
        }
        let p = raw.params;
        let params = TrimParams::new(p.a, p.b, p.lambda.clone(), p.mu_est).map_err(|e| e.to_string())?;
        if !raw.grid.r0.is_positive() {
            return Err(format!("grid.r0 must be positive, got {}", raw.grid.r0));
        }
        let measure = match raw.measure {
            RawMeasure::Named(name) if name == "lebesgue" => {
                DoublingMeasure::lebesgue_with(p.lambda, raw.grid.r0.clone())
            }
            RawMeasure::Named(name) => return Err(format!("unknown measure {name:?}, expected \"lebesgue\"")),
            RawMeasure::Density { level, density } => {
                DoublingMeasure::new(level, density, p.lambda, raw.grid.r0.clone()).map_err(|e| e.to_string())?
            }
        };
        raw.family.validate().map_err(|e| e.to_string())?;
        let h = &raw.horizon;
        if h.n == 0 {
            return Err("horizon.n must be at least 1".into());
        }
        if let FamilySpec::Explicit { arcs, cycle: false } = &raw.family {
            if arcs.len() < h.n {
                return Err(format!(
                    "explicit family has {} arcs but horizon.n = {} (set cycle to repeat)",
                    arcs.len(),
                    h.n
                ));
            }
        }
        check_points("horizon.t_grid", &h.t_grid, h.n, false)?;
        check_points("horizon.q_grid", &h.q_grid, h.n, true)?;
        if let Some(w) = &h.window {
            if w.min == 0 || w.min > w.max || w.max > h.n {
                return Err(format!("horizon.window [{}, {}] must satisfy 1 <= min <= max <= n", w.min, w.max));
            }
        }
        if !h.threshold.is_positive() {
            return Err("horizon.threshold must be positive".into());
        }
        if h.max_blocks == Some(0) {
            return Err("horizon.max_blocks must be at least 1".into());
        }
        if let Some(v) = &raw.vb8 {
            if v.i0 == 0 || v.i0 > h.n {
                return Err(format!("vb8.i0 = {} outside 1..={}", v.i0, h.n));
            }
        }
        if let Some(c) = &raw.cover {
            if c.q == 0 || c.q > h.n {
                return Err(format!("cover.q = {} outside 1..={}", c.q, h.n));
            }
        }
        if let Some(pw) = &raw.pairwise {
            check_points("pairwise.q", &pw.q, h.n, true)?;
            if pw.q.first().is_some_and(|&q| q < 2) {
                return Err("pairwise.q points must be at least 2".into());
            }
        }
        if let Some(d) = &raw.density {
            if !d.c.is_positive() || d.c > int(1) {
                return Err(format!("density.c must lie in (0, 1], got {}", d.c));
            }
        }
        Ok(Scenario {
            name: raw.name,
            measure,
            family: raw.family,
            params,
            horizon: raw.horizon,
            grid: raw.grid,
            vb8: raw.vb8,
            cover: raw.cover,
            pairwise: raw.pairwise,
            trim: raw.trim,
            density: raw.density,
            commands: raw.commands,
            output: raw.output,
        })
    }
}

/// A scenario together with the hash of the bytes it was parsed from.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub scenario: Scenario,
    pub sha256: String,
    pub path: PathBuf,
}

pub fn parse(text: &str, path: &Path) -> Result<Loaded, CliError> {
    let scenario: Scenario = serde_json::from_str(text).map_err(|e| CliError::Scenario {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: strip_position(&e.to_string()),
    })?;
    let sha256 = hex::encode(Sha256::digest(text.as_bytes()));
    Ok(Loaded { scenario, sha256, path: path.to_path_buf() })
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
    parse(&text, path)
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

impl Scenario {
    pub fn ball_grid(&self) -> BallGrid {
        BallGrid::new(self.grid.depth, self.grid.r0.clone())
    }

    /// Q points inside the window (all of `q_grid` without one).
    pub fn window_grid(&self) -> (Vec<usize>, usize) {
        match &self.horizon.window {
            Some(w) => (self.horizon.q_grid.iter().copied().filter(|&q| q <= w.max).collect(), w.min),
            None => (self.horizon.q_grid.clone(), 1),
        }
    }

    pub fn certify_config(&self) -> CertifyConfig {
        let (q_grid, q_min) = self.window_grid();
        CertifyConfig {
            n: self.horizon.n,
            threshold: self.horizon.threshold.clone(),
            max_blocks: self.horizon.max_blocks,
            vb8_i0: self.vb8.as_ref().map_or(1, |v| v.i0),
            q_grid,
            q_min,
        }
    }

    pub fn density_set(&self) -> Option<IntervalSet> {
        self.density.as_ref().map(|d| IntervalSet::canonicalize(&d.set))
    }
}
