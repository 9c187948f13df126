use thiserror::Error;

pub type Result<T, E = LkError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LkError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("variable x{index} out of range for chart dimension {dim}")]
    VariableOutOfRange { index: usize, dim: usize },

    #[error("domain error in `{expr}`: {reason}")]
    Domain { expr: String, reason: String },

    #[error("metric is not positive definite at {point:?}")]
    NotPositiveDefinite { point: Vec<f64> },

    #[error("singular matrix (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("quadrature did not converge: last change {delta:e} with {nodes} nodes{}", context_suffix(.context))]
    NonConvergence {
        delta: f64,
        nodes: usize,
        context: Option<String>,
    },

    #[error("degree {0} is odd")]
    OddDegree(usize),

    #[error("index {index} out of range 0..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("fiber Euler characteristic {value} is not close to an integer")]
    NonIntegerEuler { value: f64 },

    #[error("submersion fails validation (residual {residual:e})")]
    InvalidSubmersion { residual: f64 },

    #[error("embedding Jacobian degenerate at parameters {params:?}")]
    DegenerateJacobian { params: Vec<f64> },

    #[error("tube radius {eps} not below reach {reach}")]
    AboveReach { eps: f64, reach: f64 },
}

fn context_suffix(context: &Option<String>) -> String {
    match context {
        Some(c) => format!(" ({c})"),
        None => String::new(),
    }
}

impl LkError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        LkError::InvalidInput(msg.into())
    }
}
