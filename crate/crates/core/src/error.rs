use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("column `{0}` not found in header")]
    MissingColumn(String),

    /// `row` is the 1-based data row (the header is not counted).
    #[error("row {row}: {message}")]
    Validation { row: usize, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("covariate `{0}` has zero Euclidean norm")]
    DegenerateColumn(String),

    #[error("degenerate split: {0}")]
    DegenerateSplit(String),

    #[error("no observed events")]
    NoEvents,

    #[error("covariate `{covariate}` is not normalized (norm {norm})")]
    NotNormalized { covariate: String, norm: f64 },

    #[error("monotone likelihood: |beta|_inf = {max_abs:.3e} after {iterations} iterations")]
    Diverged {
        beta: Vec<f64>,
        iterations: usize,
        max_abs: f64,
    },

    #[error("no convergence after {iterations} iterations (gradient max-norm {gradient_norm:.3e})")]
    NotConverged {
        beta: Vec<f64>,
        iterations: usize,
        gradient_norm: f64,
    },

    #[error("singular information matrix at iteration {iterations}")]
    SingularHessian { iterations: usize },

    #[error("logrank statistic undefined: {0}")]
    UndefinedSplit(String),

    #[error("concordance undefined: no permissible pairs")]
    UndefinedConcordance,

    #[error("{method}: all {replicates} bootstrap replicates failed")]
    MethodFailure { method: String, replicates: usize },

    #[error("refit on {{{}}} failed: {source}", subset.join(", "))]
    RefitFailed {
        subset: Vec<String>,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for failures of the numerical fit itself, as opposed to bad input.
    pub fn is_convergence_failure(&self) -> bool {
        matches!(
            self,
            Error::Diverged { .. } | Error::NotConverged { .. } | Error::SingularHessian { .. }
        )
    }
}
