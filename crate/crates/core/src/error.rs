use thiserror::Error;

/// Which of the two surfaces of a problem an error refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    A,
    B,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::A => write!(f, "surface_a"),
            Side::B => write!(f, "surface_b"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("invalid `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("parameter {index} = {value} outside clamped interval [{lo}, {hi}]")]
    DomainViolation {
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("metric is not positive definite (pivot {pivot:e} at row {row}){}", side_suffix(.side))]
    SingularMetric {
        side: Option<Side>,
        row: usize,
        pivot: f64,
        /// Stacked parameters of the offending state, when known.
        state: Option<Vec<f64>>,
    },

    #[error("separation {r:e} too small for a non-harmonic potential")]
    DegenerateSeparation { r: f64 },

    #[error("non-finite state after step: q = {q:?}, v = {v:?}")]
    NonFiniteState { q: Vec<f64>, v: Vec<f64> },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no trajectory converged out of {starts} starts")]
    AllStartsFailed {
        starts: usize,
        /// Best non-converged result (smallest distance), if any trajectory ran to the cap.
        best: Option<Box<crate::solver::SolveResult>>,
    },

    #[error("grid of {pairs} pair evaluations exceeds the cap of {cap}")]
    CapExceeded { pairs: u128, cap: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn side_suffix(side: &Option<Side>) -> String {
    match side {
        Some(s) => format!(" on {s}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Attach a surface tag to a singular-metric error.
    pub(crate) fn on_side(self, side: Side) -> Self {
        match self {
            Error::SingularMetric {
                row, pivot, state, ..
            } => Error::SingularMetric {
                side: Some(side),
                row,
                pivot,
                state,
            },
            other => other,
        }
    }

    /// True for errors that identify a bad position in configuration space
    /// (chart singularity or a clamped boundary), as opposed to bad input.
    pub fn is_chart_failure(&self) -> bool {
        matches!(
            self,
            Error::SingularMetric { .. } | Error::DomainViolation { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
