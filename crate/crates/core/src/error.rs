use thiserror::Error;

/// Errors raised by the model, sampler and interpolation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DlmError {
    /// A parameter lies outside its domain (non-positive variance, range, ...).
    #[error("parameter `{name}` out of domain: {value} ({reason})")]
    ParameterDomain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// A covariance failed to factor even after the jitter retry.
    #[error("numerical breakdown at step {step}: {context}")]
    NumericalBreakdown { step: usize, context: String },

    /// Shapes or inputs that violate a function contract.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A run configuration that cannot be executed.
    #[error("configuration error: {0}")]
    Configuration(String),

    /// Coverage was requested with nothing to evaluate.
    #[error("empty report: {0}")]
    EmptyReport(String),

    /// Error propagated from inside a chain, tagged with the iteration.
    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<DlmError>,
    },
}

impl DlmError {
    pub(crate) fn domain(name: &'static str, value: f64, reason: &'static str) -> Self {
        DlmError::ParameterDomain {
            name,
            value,
            reason,
        }
    }

    pub(crate) fn numerical(step: usize, context: impl Into<String>) -> Self {
        DlmError::NumericalBreakdown {
            step,
            context: context.into(),
        }
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        DlmError::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }

    /// Strips iteration annotations.
    pub fn root(&self) -> &DlmError {
        match self {
            DlmError::AtIteration { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for factorization failures and non-finite intermediate results.
    pub fn is_numerical(&self) -> bool {
        matches!(self.root(), DlmError::NumericalBreakdown { .. })
    }
}

pub type Result<T, E = DlmError> = std::result::Result<T, E>;

/// Checks `value > 0` and finite.
pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(DlmError::domain(name, value, "must be finite and > 0"))
    }
}
