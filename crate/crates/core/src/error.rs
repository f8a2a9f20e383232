use core::fmt;

/// Errors raised by the numerical routines and chain transitions.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument fell outside the domain of a function.
    Domain { what: &'static str, value: f64 },
    /// A parameter failed validation at construction time.
    InvalidParameter { name: &'static str, value: f64 },
    /// Adaptive quadrature ran out of subdivisions.
    Quadrature {
        estimate: f64,
        error: f64,
        subdivisions: usize,
    },
    /// The rejection sampler hit its trial cap; the acceptance probability is
    /// too small to be sampled this way.
    RejectionCap { trials: u64, delta: f64 },
    /// The step-size left the representable range while positions were
    /// tracked. `diverging` is true when it overflowed upwards.
    SigmaOutOfRange { diverging: bool, log_sigma: f64 },
    /// A chain state left (0, ∞) through floating-point underflow or overflow.
    StateOutOfRange { delta: f64 },
    /// A boundary search could not bracket the transition.
    NoTransition { limit: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain { what, value } => write!(f, "{what} out of domain: {value}"),
            Error::InvalidParameter { name, value } => {
                write!(f, "invalid parameter {name} = {value}")
            }
            Error::Quadrature {
                estimate,
                error,
                subdivisions,
            } => write!(
                f,
                "quadrature did not converge after {subdivisions} subdivisions \
                 (estimate {estimate}, achieved error {error:e})"
            ),
            Error::RejectionCap { trials, delta } => write!(
                f,
                "rejection sampler gave up after {trials} trials at delta = {delta}"
            ),
            Error::SigmaOutOfRange {
                diverging,
                log_sigma,
            } => {
                let dir = if *diverging { "overflowed" } else { "underflowed" };
                write!(f, "step-size {dir} (ln sigma = {log_sigma})")
            }
            Error::StateOutOfRange { delta } => {
                write!(f, "normalized distance left (0, inf): {delta}")
            }
            Error::NoTransition { limit } => {
                write!(f, "no transition found up to {limit}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
