use thiserror::Error;

/// Errors raised by the state kernel and the analyses built on it.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("capacity exceeded: {requested} qubits requested, limit is {limit}")]
    Capacity { requested: usize, limit: usize },

    #[error("qubit index {index} out of range for a {n_qubits}-qubit register")]
    IndexOutOfRange { index: usize, n_qubits: usize },

    #[error("duplicate qubit index {0}")]
    DuplicateQubit(usize),

    #[error("empty qubit set where at least one qubit is required")]
    EmptyQubitSet,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not Hermitian (max |m - m^dagger| = {0:e})")]
    NotHermitian(f64),

    #[error("trace is {0} instead of 1")]
    InvalidTrace(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPositive(f64),

    #[error("matrix is not unitary (max |U U^dagger - I| = {0:e})")]
    NotUnitary(f64),

    #[error("expectation value has imaginary part {0:e}")]
    ImaginaryExpectation(f64),

    #[error("value {value} outside domain {domain}")]
    Domain { value: f64, domain: &'static str },

    #[error("out of scope: {0}")]
    Scope(String),

    #[error("invalid bipartite cut: {0}")]
    InvalidCut(String),

    #[error("arity mismatch: {expected} entries required, got {got}")]
    Arity { expected: usize, got: usize },

    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),

    #[error("locality violation: {0}")]
    Locality(String),

    #[error("invalid extension: {0}")]
    InvalidExtension(String),

    #[error("random generator exhausted after {0} rejection rounds")]
    RngExhausted(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
