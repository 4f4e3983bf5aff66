use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {0} is not inside the open unit disc")]
    NotInDisc(Complex64),

    #[error("singularity: {0}")]
    Singularity(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("trajectory left the disc at t = {t}: |w| = {modulus}")]
    Containment { t: f64, modulus: f64 },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("field is not tangent to the circle at t = {t}: imaginary velocity {residual:e}")]
    Tangency { t: f64, residual: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invariant violated: {what} (witness {witness}, value {value:e})")]
    InvariantViolation {
        what: String,
        witness: Complex64,
        value: f64,
    },

    #[error("did not converge: {0}")]
    NoConvergence(String),

    #[error("config error at line {line}, column {column}: {message}")]
    Config {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown field identifier `{0}`")]
    UnknownField(String),

    #[error("trace error: {0}")]
    Trace(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures raised while integrating an ODE.
    pub fn is_solver(&self) -> bool {
        matches!(
            self,
            Error::Containment { .. }
                | Error::StepUnderflow { .. }
                | Error::NonFinite(_)
                | Error::NoConvergence(_)
                | Error::Tangency { .. }
        )
    }
}
