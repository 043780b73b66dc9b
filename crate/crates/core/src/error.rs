use thiserror::Error;

/// Errors raised by the simulation, separation and imaging pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("correlation length {correlation_length} is under-resolved by grid pitch {pitch} (need > 2 pitches)")]
    UnderResolved { correlation_length: f64, pitch: f64 },

    #[error("aliasing guard: quadratic phase step {phase_step:.3} rad per pixel exceeds pi in {stage}")]
    Aliasing { stage: &'static str, phase_step: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("empty sample set")]
    EmptySamples,

    #[error("rank deficiency: requested dimension {requested}, numerical rank {rank}")]
    RankDeficient { requested: usize, rank: usize },

    #[error("vector norm {norm} is not 1 within tolerance")]
    NotUnitNorm { norm: f64 },

    #[error("odd moment order {0}")]
    OddOrder(usize),

    #[error("moment order {0} exceeds the supported maximum of 8")]
    OrderTooHigh(usize),

    #[error("zero data")]
    ZeroData,

    #[error("sign constraint not met: {0}")]
    SignConstraint(String),

    #[error("only {extracted} of {requested} sources extracted ({reason})")]
    IncompleteSeparation { extracted: usize, requested: usize, reason: String },

    #[error("packing constraint infeasible: {count} scatterers with separation {min_separation} in window {window} after {attempts} attempts")]
    Packing { count: usize, window: f64, min_separation: f64, attempts: usize },

    #[error("need at least {needed} sources, got {got}")]
    TooFewSources { needed: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("hypothesis guard: kurtosis gap {gap:.4} below {threshold}")]
    KurtosisGap { gap: f64, threshold: f64 },

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
