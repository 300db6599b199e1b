use thiserror::Error;

#[derive(Debug, Error)]
pub enum FoaError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("shape mismatch in {context}: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        context: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("infeasible instance: {0}")]
    Infeasible(String),

    #[error("SVD did not converge on a {rows}x{cols} matrix")]
    SvdFailure { rows: usize, cols: usize },

    #[error(
        "backtracking failed at iteration {iteration}: {doublings} increases of alpha \
         (alpha = {alpha:e}, F(P) - Q = {excess:e}); objective may not be smooth"
    )]
    Backtracking {
        iteration: usize,
        doublings: usize,
        alpha: f64,
        excess: f64,
    },

    #[error("line search failed at iteration {iteration} (step {step:e})")]
    LineSearch { iteration: usize, step: f64 },

    #[error("objective became non-finite at iteration {iteration}")]
    NonFiniteObjective { iteration: usize },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<FoaError>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl FoaError {
    pub fn context(self, context: impl Into<String>) -> Self {
        FoaError::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping any `Context` wrappers.
    pub fn root(&self) -> &FoaError {
        match self {
            FoaError::Context { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, FoaError>;
