use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("input out of range: {0}")]
    Input(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("simulation diverged at t = {time} s (non-finite temperature)")]
    Divergence { time: f64 },

    #[error("insufficient history: need {needed} samples before t, have {available}")]
    History { needed: usize, available: usize },

    #[error("fit failed for output channel {channel}: {reason}")]
    Fit { channel: usize, reason: String },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("qp solver stopped after {iterations} iterations with residual {residual:e}")]
    Solver {
        iterations: usize,
        residual: f64,
        last_iterate: Vec<f64>,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at_step(self, step: usize) -> Self {
        Error::AtStep {
            step,
            source: Box::new(self),
        }
    }
}
