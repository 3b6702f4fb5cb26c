//! Detection, explanation, construction and visualization of Simpson's-paradox
//! association reversal in 2x2xK contingency tables.
//!
//! Everything derived from counts is exact rational arithmetic; the
//! strict-vs-weak inequalities that decide whether a reversal exists never
//! touch floating point. The crate covers:
//!
//! - exact count tables and their conditional probabilities ([`tables`])
//! - reversal detection, the interval overlap conditions, dissection ratios
//!   and case classification ([`analysis`])
//! - constructing a binary stratifier that reverses a given marginal
//!   association ([`synthesis`])
//! - mixture predictions over selection mechanisms ([`mixture`])
//! - the two-segment diagram and its SVG rendering ([`figure`])
//! - record ingestion, aggregation and covariate scanning ([`ingest`])

pub mod analysis;
pub mod error;
pub mod figure;
pub mod ingest;
pub mod mixture;
pub mod prob;
pub mod synthesis;
pub mod tables;

pub use error::{Error, Result};
pub use prob::{Probability, Rational, Sign};
pub use tables::{CellCounts, StratifiedTable};
