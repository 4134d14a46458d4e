use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient history: covers {covered} s but kernel lags reach {required} s")]
    InsufficientHistory { covered: f64, required: f64 },

    #[error("transfer-function pole near xi = {xi}: |l*g_hat + 2*i*pi*xi| = {magnitude:.3e}")]
    Pole { xi: f64, magnitude: f64 },

    #[error("curve pole at xi = {xi}: |g_hat(xi)| = {magnitude:.3e} is below tolerance")]
    CurvePole { xi: f64, magnitude: f64 },

    #[error(
        "causality violation: fraction {residual:.3e} of kernel energy sits on t < 0 \
         (limit {limit:.1e}); the shift l may be infeasible or the padding insufficient"
    )]
    CausalityViolation { residual: f64, limit: f64 },

    #[error("divergence: {0}")]
    Divergence(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("unsupported operator: {0}")]
    UnsupportedOperator(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 config, 3 divergence, 4 numerical integrity.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Divergence(_) => 3,
            Error::CausalityViolation { .. } | Error::Pole { .. } | Error::CurvePole { .. } => 4,
            _ => 2,
        }
    }
}
