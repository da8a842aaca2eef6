use alloc::string::String;

/// Every fallible operation in the crate reports one of these.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("matrix is not symmetric: |a_ij - a_ji| reaches {max_dev:e}")]
    NotSymmetric { max_dev: f64 },

    #[error("matrix is not positive definite: pivot {pivot} is {value:e}")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("points {i} and {j} coincide")]
    DegenerateGeometry { i: usize, j: usize },

    #[error("encoder output batch has zero power")]
    DegenerateEncoder,

    #[error("non-finite value produced by layer {layer}")]
    Overflow { layer: usize },

    #[error("training diverged at step {step}")]
    Diverged { step: u64 },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn shape(op: &'static str, detail: String) -> Error {
    Error::Shape { op, detail }
}
