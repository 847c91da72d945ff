use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid value for {key}: {msg}")]
    Validation { key: String, msg: String },
    #[error("force violates the sign pattern: {0}")]
    SignPattern(String),
    #[error("force calibration infeasible: {0}")]
    Infeasible(String),
    #[error("no Bernoulli root: {0}")]
    NoRoot(String),
    #[error("root iteration did not converge: {0}")]
    Convergence(String),
    #[error("sonic classification mismatch: {0}")]
    ClassificationMismatch(String),
    #[error("force derivatives match no known sonic pattern: {0}")]
    Unclassifiable(String),
    #[error("Newton iteration diverged near the sonic point: {0}")]
    NewtonDivergence(String),
    #[error("no multiplier certificate: {0}")]
    NoCertificate(String),
    #[error("extension failed: {0}")]
    Extension(String),
    #[error("root bracketing failed: {0}")]
    RootBracket(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("insufficient resolution: {0}")]
    Resolution(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("grid too coarse for the stencil: {0}")]
    SingularAssembly(String),
    #[error("singular matrix at sigma={sigma:e} on {grid}: {msg}; try a larger sigma")]
    SingularMatrix { sigma: f64, grid: String, msg: String },
    #[error("sigma continuation did not settle: {0}")]
    NoSigmaConvergence(String),
    #[error("denominator c^2 - u_r^2 degenerates: {0}")]
    DenominatorDegeneracy(String),
    #[error("iterate left the admissible ball: {0}")]
    GateViolation(String),
    #[error("fixed point iteration does not contract: {0}")]
    NoContraction(String),
    #[error("sonic indicator crosses zero more than once: {0}")]
    MultipleCrossings(String),
    #[error("inlet data incompatible: {0}")]
    Compatibility(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the command line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Validation { .. } => 2,
            Error::NoCertificate(_) | Error::Extension(_) => 4,
            Error::Io(_) | Error::Json(_) => 1,
            Error::SignPattern(_) | Error::Infeasible(_) => 2,
            Error::ClassificationMismatch(_) | Error::Unclassifiable(_) => 2,
            _ => 3,
        }
    }
}
