use thiserror::Error;

/// Errors produced by table construction, analysis, synthesis and ingestion.
#[derive(Debug, Error)]
pub enum Error {
    /// A conditional probability was requested against an empty margin.
    #[error("zero conditioning margin: {0}")]
    ZeroMargin(String),

    /// The table has no observations at all.
    #[error("table has zero total count")]
    EmptyTable,

    /// An analysis that needs at least two strata was given fewer.
    #[error("stratified table needs at least 2 strata, got {0}")]
    EmptyStratifiedTable(usize),

    /// Stratum labels must be unique.
    #[error("duplicate stratum label: {0}")]
    DuplicateStratum(String),

    /// Interval conditions and dissection are defined for a binary stratifier.
    #[error("operation requires a binary stratifier (K = 2), got K = {0}")]
    NotBinaryStratifier(usize),

    /// The two stratum conditionals coincide, so there is no segment to dissect.
    #[error("degenerate segment: the two stratum conditionals are equal ({0})")]
    DegenerateSegment(String),

    /// A value outside [0, 1] was offered as a probability.
    #[error("not a probability: {0}")]
    InvalidProbability(String),

    /// Synthesis requires all marginal conditionals strictly inside (0, 1).
    #[error("extreme dependence: conditional probability {0} is 0 or 1")]
    ExtremeDependence(String),

    /// Integer-mode synthesis exhausted every split of the given counts.
    #[error("no reversing split exists at this resolution: {0}")]
    InfeasibleAtResolution(String),

    /// The marginal association is exactly zero; there is nothing to reverse.
    #[error("marginal delta is zero; pass the zero-delta override to split anyway")]
    DegenerateMarginal,

    /// Mixture priors must sum to exactly 1.
    #[error("priors sum to {sum}, off by {deficit}")]
    PriorNotNormalized { sum: String, deficit: String },

    /// A mapped column is absent from the input header.
    #[error("unknown column: {0}")]
    UnknownColumn(String),

    /// An outcome/exposure column carried a value outside its binary labels.
    #[error("non-binary value {value:?} in column {column:?}")]
    NonBinaryValue { column: String, value: String },

    /// The record input contained no usable rows.
    #[error("input contains no records")]
    EmptyInput,

    /// Malformed input file or value.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
