use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cell {cell:?} is outside the grid of shape {shape:?}")]
    OutOfBounds { cell: [usize; 3], shape: [usize; 3] },

    #[error("position ({:.3}, {:.3}, {:.3}) is outside the workspace", .0[0], .0[1], .0[2])]
    OutsideWorkspace([f64; 3]),

    #[error("position ({:.3}, {:.3}, {:.3}) lies inside an obstacle", .0[0], .0[1], .0[2])]
    Collision([f64; 3]),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what}: linear solve failed (condition estimate {condition:.3e})")]
    Numerical { what: String, condition: f64 },

    #[error("no collision-free path from {start:?} to {goal:?}")]
    NoPath { start: [f64; 3], goal: [f64; 3] },

    #[error("no feasible viewpoint found after {tries} initialisation tries per particle")]
    Infeasible { tries: usize },

    #[error("scenario: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
