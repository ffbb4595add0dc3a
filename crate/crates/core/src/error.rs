use thiserror::Error;

/// Errors raised while building or evaluating a conductance-based model.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid kinetics: {0}")]
    InvalidKinetics(String),
    #[error("invalid model specification: {0}")]
    InvalidSpec(String),
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("unknown preset `{0}` (available: hh, hco)")]
    UnknownPreset(String),
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum IntegrationError {
    #[error("non-finite derivative in component {component} at t = {t} ms")]
    NonFinite { component: usize, t: f64 },
    #[error("invalid step size {0}")]
    InvalidStep(f64),
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ObserverError {
    #[error("covariance matrix lost positive definiteness at t = {t} ms (min eigenvalue {min_eig:e})")]
    Conditioning { t: f64, min_eig: f64 },
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparameters(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EstimationError {
    #[error("information matrix is singular at T = {t} ms (min eigenvalue {min_eig:e}); regressor not persistently exciting")]
    NotExciting { t: f64, min_eig: f64 },
    #[error("requested horizon T = {0} ms is outside the data grid")]
    HorizonOutOfRange(f64),
    #[error("trajectory is missing {0}")]
    MissingColumns(&'static str),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum AnalysisError {
    #[error("excitation level delta = {0:e} is not positive")]
    NotExciting(f64),
    #[error("window of {window} ms is longer than the trajectory ({span} ms)")]
    WindowTooLong { window: f64, span: f64 },
    #[error("target rate {lambda} is not below min(lambda_w, gamma) = {limit}")]
    InfeasibleRate { lambda: f64, limit: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Top-level error for scenario runs and the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    Observer(#[from] ObserverError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input files).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Integration(_)
                | Error::Observer(ObserverError::Conditioning { .. })
                | Error::Estimation(EstimationError::NotExciting { .. })
                | Error::Analysis(AnalysisError::NotExciting(_))
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
