use thiserror::Error;

/// Errors raised by the simulator and analysis routines.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("qubit count must be at least 1")]
    EmptySystem,
    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    QubitOutOfRange { index: usize, n_qubits: usize },
    #[error("two-qubit gate needs distinct qubits, got {0} twice")]
    SameQubit(usize),
    #[error("duplicate qubit index {0}")]
    DuplicateQubit(usize),
    #[error("qubit set must not be empty")]
    EmptySubset,
    #[error("parts overlap on qubit {0}")]
    OverlappingParts(usize),
    #[error("box size {b} invalid for {n_qubits} qubits")]
    InvalidBoxSize { b: usize, n_qubits: usize },
    #[error("elements do not partition the qubit range: {0}")]
    NotAPartition(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("record sink failed after {emitted} records: {msg}")]
    Sink { emitted: usize, msg: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
