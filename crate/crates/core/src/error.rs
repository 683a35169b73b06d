use thiserror::Error;

use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("arc radius must be positive, got {0}")]
    NonPositiveRadius(Rational),
    #[error("density must have 2^{level} = {expected} cells, got {got}")]
    DensityLength { level: u32, expected: usize, got: usize },
    #[error("density value {0} is negative")]
    NegativeDensity(Rational),
    #[error("density integrates to {0}, expected 1")]
    NotProbability(Rational),
    #[error("doubling constant must be >= 1, got {0}")]
    BadLambda(Rational),
    #[error("doubling radius bound r0 must be positive, got {0}")]
    BadRadiusBound(Rational),
    #[error("grid depth {depth} is below the measure level {level}")]
    GridTooCoarse { depth: u32, level: u32 },
    #[error("no grid ball has positive measure; doubling ratio undefined")]
    DegenerateMeasure,
    #[error("prefix length must be at least 1")]
    EmptyPrefix,
    #[error("explicit family has {len} arcs, {requested} requested")]
    ExplicitTooShort { len: usize, requested: usize },
    #[error("radius rule parameter {name} must be positive, got {value}")]
    BadRadiusRule { name: &'static str, value: Rational },
    #[error("radius rule gives an irrational radius at index {index} (tau = {tau})")]
    IrrationalRadius { index: u64, tau: Rational },
    #[error("index range is empty: start {start} exceeds end {end}")]
    EmptyRange { start: usize, end: usize },
    #[error("grid must be strictly increasing")]
    UnsortedGrid,
    #[error("all events on the prefix have measure zero; ratio undefined")]
    ZeroMass,
    #[error("pairwise constant needs at least two events")]
    TooFewEvents,
    #[error("dilation factor a must exceed 1, got {0}")]
    BadDilation(Rational),
    #[error("constant b must be >= 1, got {0}")]
    BadGrowth(Rational),
    #[error("limsup measure estimate must lie in (0, 1], got {0}")]
    BadMuEstimate(Rational),
    #[error("limsup measure estimate is required in positive-measure mode")]
    MissingMuEstimate,
    #[error("test ball has measure zero")]
    NullBall,
    #[error("test ball centre {0} is outside the support")]
    CentreOutsideSupport(Rational),
    #[error("density threshold c must lie in (0, 1], got {0}")]
    BadDensityConstant(Rational),
    #[error("ball grid contains no ball centred in the support")]
    EmptyGrid,
    #[error("certificate does not re-verify: {0}")]
    Reverify(String),
}

pub type Result<T> = std::result::Result<T, Error>;
