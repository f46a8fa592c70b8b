use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mechanism: {0}")]
    InvalidMechanism(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("quadrature did not reach tolerance: estimated error {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("Lévy measure has infinite total mass")]
    InfiniteMass,

    #[error("Lévy measure has no mass above {0}")]
    ZeroTail(f64),

    #[error("law is only available for diffuse Lévy measures")]
    AtomicPi,

    #[error("parameter {0} is within 1e-8 of a non-positive integer")]
    NearIntegerParameter(f64),

    #[error("initial mass r = {r} exceeds delta = {delta}; the big-node forest starts from first-generation nodes only")]
    RootAboveDelta { r: f64, delta: f64 },

    #[error("unknown check `{0}`")]
    UnknownCheck(String),
}

pub type Result<T> = std::result::Result<T, Error>;
