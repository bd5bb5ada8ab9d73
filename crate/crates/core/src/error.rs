use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("geometry infeasible at splitting index {index}: middle gap {gap:e} is negative")]
    GeometryInfeasible { index: usize, gap: f64 },
    #[error("generation {requested} out of range 1..={max}")]
    OutOfRange { requested: usize, max: usize },
    #[error("reversed interval [{a}, {b}]")]
    ReversedInterval { a: f64, b: f64 },
    #[error("negative radius {0}")]
    NegativeRadius(f64),
    #[error("quadrature budget exceeded: {0}")]
    QuadratureBudgetExceeded(String),
    #[error("collapsed value disagrees with direct enumeration: {0}")]
    OracleMismatch(String),
    #[error("empty cube list")]
    EmptyCubeList,
    #[error("exponent budget exceeded: {0}")]
    Overflow(String),
    #[error("point outside [0, 1]: {0}")]
    OutOfDomain(String),
    #[error("degenerate interval: {0}")]
    DegenerateInterval(String),
    #[error("operation requires the {expected} profile")]
    WrongProfile { expected: &'static str },
    #[error("scale cutoff {cutoff} below goodness parameter r = {r}")]
    CutoffBelowR { cutoff: usize, r: usize },
    #[error("accretivity violated at the root: |<b>| = {average} < c = {threshold}")]
    AccretivityViolated { average: f64, threshold: f64 },
    #[error("division by near-zero accretive average {average:e} on cube {cube}")]
    DivisionByNearZeroAverage { average: f64, cube: String },
    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
