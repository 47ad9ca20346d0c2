use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Pipeline stage that produced a tracking failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Analysis,
    Kinematic,
    Mechanical,
    Integration,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Analysis => "analysis",
            Stage::Kinematic => "kinematic synthesis",
            Stage::Mechanical => "mechanical synthesis",
            Stage::Integration => "integration",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("structure constant index ({i}, {j}, {k}) out of range for dimension {dim}")]
    IndexOutOfRange {
        i: usize,
        j: usize,
        k: usize,
        dim: usize,
    },

    #[error("structure constants are not antisymmetric at c^{}_{{{}{}}} (1-based)", k + 1, i + 1, j + 1)]
    NotAntisymmetric { i: usize, j: usize, k: usize },

    #[error("inertia tensor is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("inertia tensor is not positive definite (pivot {pivot} = {value})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("a mechanical system needs at least one control field")]
    NoControls,

    #[error("operation requires the se(3) algebra")]
    NotSe3,

    #[error("non-finite state at t = {time}")]
    NonFinite { time: f64 },

    #[error("cone membership could not be decided: {0}")]
    Indeterminate(String),

    #[error("velocity leaves the Lie span of the generators at t = {time} (residual {residual:e})")]
    OutsideLieSpan { time: f64, residual: f64 },

    #[error("velocity needs brackets of length > 2 at t = {time} (residual {residual:e}); only first-order brackets are synthesized")]
    UnsupportedBracketDepth { time: f64, residual: f64 },

    #[error("required force cannot be decomposed over the control fields and their symmetric products at t = {time} (residual {residual:e})")]
    DecompositionResidual { time: f64, residual: f64 },

    #[error("analysis is inconclusive: no level up to {l_max} satisfies the tracking hypotheses")]
    Inconclusive { l_max: usize },

    #[error("invalid reference curve: {0}")]
    InvalidCurve(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{stage} failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn at(self, stage: Stage) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    /// The innermost error, with stage wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
