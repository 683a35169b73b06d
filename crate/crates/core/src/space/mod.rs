//! Arcs, finite unions of arcs, and piecewise-constant measures on the unit
//! circle `R/Z`, all in exact rational arithmetic.
//!
//! Balls are open arcs. A radius of at least `1/2` is the whole circle.

mod arc;
mod measure;
mod set;

pub use arc::Arc;
pub use measure::{BallGrid, DoublingCertificate, DoublingMeasure, Support};
pub use set::{BoolOp, Interval, IntervalSet};
