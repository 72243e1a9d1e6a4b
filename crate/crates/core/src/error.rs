use std::path::PathBuf;

use thiserror::Error;

use crate::linalg::SolveReport;
use crate::simulation::SimState;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("element {element} is degenerate (measure {measure:e})")]
    DegenerateElement { element: usize, measure: f64 },

    #[error("facet {vertices:?} is shared by {count} elements")]
    NonManifoldFacet { vertices: Vec<usize>, count: usize },

    #[error("element {element} references vertex {index}, but the mesh has {num_vertices} vertices")]
    VertexOutOfRange {
        element: usize,
        index: usize,
        num_vertices: usize,
    },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{what}: expected length {expected}, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("negative value {value:e} in element {element} outside the log domain")]
    Domain { element: usize, value: f64 },

    #[error("linear solver did not converge ({0})")]
    NotConverged(SolveReport),

    #[error("right-hand side is incompatible with the constant kernel (sum {sum:e})")]
    IncompatibleRhs { sum: f64 },

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("fixed-point iteration stopped after {iterations} iterations (last update {last_update:e})")]
    FixedPointNotConverged {
        iterations: usize,
        last_update: f64,
        last_iterate: Vec<f64>,
    },

    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: String, message: String },

    #[error("config: {0}")]
    Config(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("step {step} failed: {source}")]
    StepFailed {
        step: usize,
        #[source]
        source: Box<Error>,
        state: Box<SimState>,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            message: message.into(),
        }
    }
}
