use std::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors from configuration, kinetic domain guards, and the solvers.
#[derive(Debug)]
pub enum Error {
    /// A model parameter failed validation; `key` is its config-file name.
    InvalidParam { key: String, reason: String },
    /// Configuration text or solver setup is invalid.
    Config(String),
    /// A rate law was evaluated outside its domain.
    Domain { what: &'static str, detail: String },
    /// The tridiagonal factorization hit a vanishing pivot.
    ZeroPivot { index: usize },
    /// A field left its physical range by more than the abort threshold.
    Instability { step: u64, t: f64, detail: String },
    /// Quadrature did not reach the requested relative tolerance.
    Quadrature { target: f64, achieved: f64 },
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParam { key, reason } => {
                write!(f, "invalid parameter `{key}`: {reason}")
            }
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Domain { what, detail } => write!(f, "domain error in {what}: {detail}"),
            Error::ZeroPivot { index } => {
                write!(f, "tridiagonal solve failed: zero pivot at node {index}")
            }
            Error::Instability { step, t, detail } => write!(
                f,
                "numerical instability at step {step} (t = {t:.6e} s): {detail}; \
                 use a smaller time step"
            ),
            Error::Quadrature { target, achieved } => write!(
                f,
                "quadrature did not converge: achieved {achieved:.3e}, target {target:.3e}"
            ),
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

impl Error {
    /// Process exit code convention: 2 for configuration problems,
    /// 3 for numerical instability, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::InvalidParam { .. } | Error::Config(_) => 2,
            Error::Instability { .. } => 3,
            _ => 1,
        }
    }
}
