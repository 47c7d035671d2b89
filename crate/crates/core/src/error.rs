use thiserror::Error;

/// Errors raised by the numerical, analytic and simulation layers.
///
/// Every variant names the offending parameter or quantity so that callers
/// (the CLI in particular) can report precisely what was rejected.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("{what} did not converge: achieved {achieved:.3e}, target {target:.3e}")]
    NonConvergence {
        what: &'static str,
        achieved: f64,
        target: f64,
    },

    #[error("`{what}` overflows the f64 range; use the log-scaled evaluation")]
    Overflow { what: &'static str },

    #[error("denominator of `{what}` is not positive ({value:e})")]
    DegenerateDenominator { what: &'static str, value: f64 },

    #[error("`n_max` = {n_max} certifies tail mass {bound:.3e}, above requested eps {eps:.3e}")]
    TruncationTooSmall { n_max: usize, bound: f64, eps: f64 },

    #[error("unstable model ({param}): {reason}")]
    UnstableModel { param: &'static str, reason: String },

    #[error("singular linear system while solving for the stationary vector (dimension {dim})")]
    SingularSystem { dim: usize },

    #[error("grid steps differ: {left} vs {right}")]
    GridMismatch { left: f64, right: f64 },

    #[error("|1 - (1-q) phi| = {modulus:e} is too close to zero")]
    DivisionNearZero { modulus: f64 },

    #[error("identity `{what}` violated: relative residual {residual:.3e} > {tol:.1e}")]
    IdentityCheck {
        what: &'static str,
        residual: f64,
        tol: f64,
    },

    #[error("unknown {registry} `{name}` (known: {known})")]
    UnknownStrategy {
        registry: &'static str,
        name: String,
        known: String,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors that signal numerical trouble rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. }
                | Error::Overflow { .. }
                | Error::DegenerateDenominator { .. }
                | Error::SingularSystem { .. }
                | Error::DivisionNearZero { .. }
                | Error::IdentityCheck { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn require_finite(name: &'static str, x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::invalid(name, format!("must be finite, got {x}")))
    }
}

pub(crate) fn require_positive(name: &'static str, x: f64) -> Result<f64> {
    require_finite(name, x)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err(Error::invalid(name, format!("must be > 0, got {x}")))
    }
}

pub(crate) fn require_nonneg(name: &'static str, x: f64) -> Result<f64> {
    require_finite(name, x)?;
    if x >= 0.0 {
        Ok(x)
    } else {
        Err(Error::invalid(name, format!("must be >= 0, got {x}")))
    }
}

pub(crate) fn require_probability_open(name: &'static str, q: f64) -> Result<f64> {
    require_finite(name, q)?;
    if q > 0.0 && q < 1.0 {
        Ok(q)
    } else {
        Err(Error::invalid(name, format!("must lie in (0, 1), got {q}")))
    }
}
