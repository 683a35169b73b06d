//! Exact machinery for divergence Borel–Cantelli arguments on the circle.
//!
//! Everything is computed in big-rational arithmetic over open arcs of
//! `R/Z` and piecewise-constant doubling measures:
//!
//! * [`space`]: arcs, canonical finite unions, measures and supports.
//! * [`family`]: indexed ball sequences and their admissibility checks.
//! * [`overlap`]: measure sums, overlap sums `S_Q`, Kochen–Stone ratios,
//!   pairwise constants and tail unions.
//! * [`covering`]: the greedy 5r covering selection.
//! * [`trimming`]: disjoint cores, blocks and trimmed subsequences.
//! * [`verifier`]: full and positive measure certificates and bounds.

pub mod covering;
pub mod error;
pub mod family;
pub mod overlap;
pub mod rational;
pub mod serde_rational;
pub mod space;
pub mod trimming;
pub mod verifier;

pub use error::{Error, Result};
pub use rational::Rational;
