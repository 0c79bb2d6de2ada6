use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("quaternion has zero norm")]
    ZeroNorm,
    #[error("quaternion is not unit norm (|q| = {0})")]
    NotUnit(f64),
    #[error("euler 3-1-3 kinematics singular: sin(theta) = {0:e}")]
    EulerSingularity(f64),
    #[error("degenerate orbit: position and velocity are parallel or zero")]
    DegenerateOrbit,
    #[error("zero orbit radius")]
    ZeroRadius,
    #[error("kepler equation did not converge (M = {mean_anomaly}, e = {eccentricity})")]
    KeplerNoConvergence { mean_anomaly: f64, eccentricity: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(&'static str),
    #[error("covariance is indefinite (min eigenvalue {0:e})")]
    Indefinite(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid value for `{key}`: {msg}")]
    Config { key: String, msg: String },
    #[error("step {step} (t = {t:.3} s): {source}")]
    Step {
        step: usize,
        t: f64,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }

    /// True for errors caused by the scenario/configuration rather than by
    /// the numerics of a run.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::Parse(_) | Error::Config { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
