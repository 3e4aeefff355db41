use thiserror::Error;

/// A parameter or configuration field failed validation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("`{field}` is invalid: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("`{field}` must be finite")]
    NotFinite { field: &'static str },
}

impl ParamError {
    pub fn field(&self) -> &'static str {
        match self {
            ParamError::Invalid { field, .. } | ParamError::NotFinite { field } => field,
        }
    }

    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        ParamError::Invalid { field, reason: reason.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ParamError),
    #[error("simulation diverged at t = {t:.6e} s: state = {state:?}")]
    Diverged { t: f64, state: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("need at least {required} samples above the floor in the fit window, found {found}")]
    InsufficientSamples { required: usize, found: usize },
    #[error("Lyapunov form is not positive definite (A = {a}, B = {b}, C = {c})")]
    NotPositiveDefinite { a: f64, b: f64, c: f64 },
    #[error("window of {window} s exceeds the series span of {span} s")]
    WindowTooLong { window: f64, span: f64 },
    #[error("{0}")]
    InvalidInput(String),
}

/// A verification suite could not complete.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}
