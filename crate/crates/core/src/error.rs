use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("length error: {0}")]
    Length(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("cannot build regressors: {0}")]
    Regressor(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("alist line {line}: {msg}")]
    Alist { line: usize, msg: String },

    #[error("invalid parity-check matrix: {0}")]
    InvalidMatrix(String),

    #[error("parity-check matrix has GF(2) rank {rank} but {rows} rows; remove dependent rows first")]
    RankDeficient { rank: usize, rows: usize },

    #[error("check {check} has degree {degree}, above d_max = {d_max}")]
    CheckDegree { check: usize, degree: usize, d_max: usize },

    #[error("code generation failed: {0}")]
    CodeGeneration(String),

    #[error("invalid conic problem: {0}")]
    InvalidProblem(String),

    #[error("KKT factorization failed: {0}")]
    Factorization(String),

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("matrix is not Hermitian (max asymmetry {0:e})")]
    NotHermitian(f64),

    #[error("the code-constrained model supports BPSK only")]
    UnsupportedModulation,

    #[error("regressor set is empty")]
    EmptyRegressors,

    #[error("equalizer output has zero power")]
    ZeroPower,

    #[error("all candidate equalizers are zero")]
    AllCandidatesZero,

    #[error("decided and reference bits do not overlap for delay {0}")]
    EmptyOverlap(isize),

    #[error("Cholesky factorization of the candidate covariance failed even with jitter {0:e}")]
    Randomization(f64),

    #[error("CMA diverged in pass {pass}: cost {cost:e} exceeds 10x initial {initial:e}")]
    Divergence { pass: usize, cost: f64, initial: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{context}: {source}")]
    Trial {
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
    /// Wraps an error with the pipeline stage it came from.
    pub fn at(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Stage { stage, source: Box::new(source) }
    }

    /// Process exit code: 2 for bad configuration or input, 3 for solver
    /// and numerical failures, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Io(_) | Error::Csv(_) => 4,
            Error::Factorization(_)
            | Error::Solver(_)
            | Error::Randomization(_)
            | Error::AllCandidatesZero
            | Error::ZeroPower
            | Error::Divergence { .. } => 3,
            _ => 2,
        }
    }

    /// Innermost error, skipping stage labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } | Error::Trial { source, .. } => source.root(),
            other => other,
        }
    }
}
