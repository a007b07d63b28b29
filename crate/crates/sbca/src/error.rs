use thiserror::Error;

/// Crate-wide error type.
///
/// Variants are grouped by what went wrong rather than where: input data
/// problems (`Schema`, `Parameter`, `Range`, `Size`, `Window`), runtime
/// numeric problems (`Numeric`, `Insolvency`, `Graph`, `Construction`) and
/// I/O. The CLI maps these groups onto distinct process exit codes.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input file: missing column, unparseable field, duplicate key.
    #[error("schema error: {0}")]
    Schema(String),

    /// Well-formed input carrying an inadmissible value (names the row).
    #[error("validation error: {0}")]
    Validation(String),

    /// A configuration value is outside its admissible range.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A date or index falls outside the data it must refer to.
    #[error("range error: {0}")]
    Range(String),

    /// Two collections that must agree in length do not.
    #[error("size error: {0}")]
    Size(String),

    /// Not enough history to build the requested feature window.
    #[error("window error: {0}")]
    Window(String),

    /// An input that makes the operation mathematically meaningless.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A performance metric whose defining formula does not apply to this
    /// series (zero dispersion, no downside days, ...). Reports surface
    /// these as absent values, never as zero.
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// A computation produced a non-finite value.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Net portfolio return factor dropped to zero or below at `step`.
    #[error("insolvency at step {step}: net return factor {factor}")]
    Insolvency { step: usize, factor: f64 },

    /// The computation graph is malformed (an op refers forward in the tape).
    #[error("graph error: {0}")]
    Graph(String),

    /// A closed-form parameter construction failed its preconditions.
    #[error("construction error: {0}")]
    Construction(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
