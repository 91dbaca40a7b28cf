use thiserror::Error;

/// Errors produced by the quadrature, geometry, interpolation and solver layers.
#[derive(Debug, Clone, Error)]
pub enum HdiError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("derivative order {order} exceeds the supported maximum {max}")]
    OrderTooHigh { order: usize, max: usize },

    #[error("grid of {points} points per dimension is too small for derivative order {order}")]
    GridTooSmall { points: usize, order: usize },

    #[error("parametrization is not regular at {at} (speed {speed:e})")]
    Regularity { at: String, speed: f64 },

    #[error("singular interpolation system: {0}")]
    SingularSystem(String),

    #[error("nearest-point search did not converge; best grid candidate {best:?} at distance {distance:e}")]
    NearestPoint { best: Vec<f64>, distance: f64 },

    #[error("inside/outside test is ambiguous (gauss integral {value:.3}); refine the surface grid")]
    AmbiguousIndicator { value: f64 },

    #[error("unknown {kind} '{name}'; registered: {registry}")]
    UnknownName {
        kind: &'static str,
        name: String,
        registry: String,
    },

    #[error("GMRES stopped after {iterations} iterations at relative residual {residual:e}")]
    GmresNotConverged {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("i/o: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl HdiError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        HdiError::InvalidInput(msg.into())
    }
}

impl From<std::io::Error> for HdiError {
    fn from(e: std::io::Error) -> Self {
        HdiError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, HdiError>;
