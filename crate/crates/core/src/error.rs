use crate::adaptation::FeasibilityReport;
use crate::simulation::Trajectory;

/// Errors raised by the identifier, the plant simulation and the data pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("non-finite value in {component}")]
    NonFinite { component: &'static str },

    #[error("{name}: {detail}")]
    Dimension { name: &'static str, detail: String },

    #[error("invalid argument `{name}`: {detail}")]
    InvalidArgument { name: &'static str, detail: String },

    #[error("current limit exceeded at t = {t:.6} s: |{axis}| = {value:.4} A > {limit:.4} A")]
    CurrentLimit {
        t: f64,
        axis: &'static str,
        value: f64,
        limit: f64,
    },

    #[error("integration diverged at t = {t:.6e} s")]
    Diverged {
        t: f64,
        /// Samples recorded up to the blow-up, when the caller asked for them.
        partial: Option<Box<Trajectory>>,
    },

    #[error("a0 has complex eigenvalues (discriminant {discriminant:.6e}); the feasibility condition needs a real spectrum")]
    ComplexSpectrum { discriminant: f64 },

    #[error("gains are infeasible:\n{0}")]
    Infeasible(Box<FeasibilityReport>),

    #[error("teacher and identifier must share a0")]
    A0Mismatch,

    #[error("{0}")]
    MissingTeacher(&'static str),

    #[error("kernel matrix is not positive definite; increase the jitter (currently {jitter:e})")]
    NotPositiveDefinite { jitter: f64 },

    #[error("{path}: line {line}: {detail}")]
    Parse {
        path: String,
        line: usize,
        detail: String,
    },

    #[error("invalid configuration:\n{}", .0.iter().map(|s| format!("  - {s}")).collect::<Vec<_>>().join("\n"))]
    Config(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            detail: detail.into(),
        }
    }

    pub(crate) fn dim(name: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            name,
            detail: detail.into(),
        }
    }

    /// True for faults raised by the numerics (blow-ups, current trips)
    /// rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. }
                | Error::CurrentLimit { .. }
                | Error::Diverged { .. }
                | Error::NotPositiveDefinite { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(value: f64, component: &'static str) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { component })
    }
}
