use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit count mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("qubit index {index} out of range for {n_qubits} qubit(s)")]
    QubitOutOfRange { index: usize, n_qubits: usize },

    #[error("cannot parse Pauli string {input:?}: {reason}")]
    PauliParse { input: String, reason: String },

    #[error("invalid partition layout: {0}")]
    InvalidLayout(String),

    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    #[error("expected {expected} {kind} value(s), got {got}")]
    SlotMismatch {
        kind: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("observable {0} has a non-hermitian phase")]
    NonHermitian(String),

    #[error("subsystem of {n_qubits} qubits exceeds the simulator limit of {max}")]
    TooManyQubits { n_qubits: usize, max: usize },

    #[error("slot {slot} is not a trainable rotation parameter")]
    NotTrainable { slot: usize },

    #[error("model output has imaginary residue {residue:e}")]
    ComplexOutput { residue: f64 },

    #[error(
        "conjugating term {term} retains {retained} factor(s) and exceeds the cap of {cap} terms"
    )]
    TermExplosion {
        term: String,
        retained: usize,
        cap: usize,
    },

    #[error("non-finite gradient at slot {slot}")]
    NonFiniteGradient { slot: usize },

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
