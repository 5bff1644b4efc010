//! Partitioned quantum models: expectation values of a large register
//! written as sums of products of small-subsystem measurements, simulated
//! classically one subsystem at a time.

pub mod conjugate;
pub mod digits;
pub mod error;
pub mod hamiltonian;
pub mod optimize;
pub mod partition;
pub mod pauli;
pub mod simulator;
pub mod variance_lab;

pub use conjugate::{
    CoefficientTree, FactoredObservable, RestrictedUnitary, TermCoefficient, TrigKind,
};
pub use error::{Error, Result};
pub use partition::{EvaluationCache, MeasurementBudget, PartitionLayout, PartitionedModel};
pub use pauli::{Observable, Pauli, PauliString, Phase};
pub use simulator::{Angle, Gate, StateVector, SubsystemCircuit};
