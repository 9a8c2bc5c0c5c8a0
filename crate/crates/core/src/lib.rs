//! Monitored random Clifford circuits and the multipartite entanglement
//! structure of their steady states.
//!
//! The crate simulates a 1-D brickwork circuit of random two-qubit Cliffords
//! interleaved with probabilistic `Z` measurements, decomposes each steady
//! state into decoupled clusters, and measures how the largest cluster scales:
//! entanglement depth against system size and box counts against box size,
//! both fitted with the Theil–Sen estimator.

pub mod analysis;
pub mod circuit;
pub mod clifford;
pub mod dense;
mod dsu;
pub mod entropy;
pub mod error;
pub mod gf2;
pub mod qubits;
pub mod structure;
pub mod tableau;

pub use analysis::{
    box_count_state, fit_fractal_dim, fit_gamma, occupied_boxes, theil_sen, BoxCountRecord, DepthRecord, FitResult,
};
pub use circuit::{run_ensemble, run_realization, Boundary, CircuitConfig, EnsembleSpec};
pub use clifford::{sample_two_qubit_clifford, TwoQubitClifford};
pub use entropy::{total_correlation, EntropySource};
pub use error::{Error, Result};
pub use gf2::{gf2_rank, BitMatrix};
pub use qubits::QubitSet;
pub use structure::{
    build_structure, build_structure_with, coarse_grain, depth_report, DepthReport, Element, EntanglementStructure,
    StructureOptions,
};
pub use tableau::{MeasurementOutcome, StabilizerTableau};
