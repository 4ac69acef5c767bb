//! Toolkit for preparing arbitrary two-photon polarization-entangled mixed
//! states with linear optics.
//!
//! Given a target two-qubit density matrix, the crate
//!
//! - decomposes it into pure states of equal concurrence ([`entanglement`]),
//! - extracts the Schmidt angle and local unitaries of each branch and
//!   synthesizes waveplate sequences and distillation filters ([`local`]),
//! - picks the beam-splitter transmissions that maximize the preparation
//!   success probability, for the general four-path scheme and for the
//!   two-component scheme with filters ([`designer`]),
//! - verifies the design by exact simulation of the polarization ⊗ location
//!   state through decoherence and coincidence post-selection ([`circuit`]),
//! - and closes the loop with simulated polarization tomography
//!   ([`tomography`]).
//!
//! All states live on the fixed four-dimensional two-photon polarization
//! space with basis order HH, HV, VH, VV. The linear algebra is exact
//! small-dimension code in [`linalg`]; there is no generic-dimension
//! machinery anywhere.

pub mod circuit;
pub mod designer;
pub mod entanglement;
pub mod linalg;
pub mod local;
pub mod tomography;

pub use circuit::{
    evolve, postselect_coincidence, validate_geometry, CircuitSpec, Geometry, JointState,
};
pub use designer::{
    design_from_decomposition, design_general, optimal_general, optimal_two, GeneralDesign,
    TwoStateDesign,
};
pub use entanglement::{
    concurrence, eof_from_concurrence, wootters_decompose, Branch, Decomposition,
};
pub use linalg::{
    fidelity, is_physical, random_density, CMat, DensityMatrix, LocalUnitary, PureState, C64,
};
pub use local::{
    design_filter, schmidt_extract, waveplate_decompose, FilterSpec, SchmidtForm, WaveplateTriple,
};

use thiserror::Error;

/// Errors shared by every module in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max entrywise deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("trace deviates from one by {0:.3e}")]
    NotUnitTrace(f64),
    #[error("matrix is not positive semidefinite (minimum eigenvalue {0:.3e})")]
    NotPositive(f64),
    #[error("matrix is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),
    #[error("matrix is not symmetric (max entrywise deviation {0:.3e})")]
    NotSymmetric(f64),
    #[error("state is not normalized (norm deviates from one by {0:.3e})")]
    NotNormalized(f64),
    #[error("matrix contains a non-finite entry")]
    NonFiniteEntry,
    #[error("rank must lie in 1..=4, got {0}")]
    InvalidRank(usize),
    #[error("{name} = {value} is outside {expected}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("angle ordering requires 0 <= beta <= alpha <= pi/4 (alpha = {alpha}, beta = {beta})")]
    AngleOrder { alpha: f64, beta: f64 },
    #[error("raising a product state (beta = 0) to alpha > 0 has success probability zero")]
    InfeasibleRaise,
    #[error("preconcurrence equalization did not converge after {iterations} rotations (residual {residual:.3e})")]
    EqualizationDiverged { iterations: usize, residual: f64 },
    #[error("no coinciding paths: post-selection probability is zero")]
    NoCoincidence,
    #[error("branch Schmidt angles disagree by {0:.3e}")]
    ThetaMismatch(f64),
    #[error("weights must be sorted in descending order")]
    UnsortedWeights,
    #[error("weights must be non-negative and sum to one (sum deviates by {0:.3e})")]
    BadWeights(f64),
    #[error("leading weight must be positive")]
    ZeroLeadingWeight,
    #[error("weights are infeasible on the constrained grid at resolution {0}")]
    InfeasibleWeights(f64),
    #[error("tomography record set is incomplete: missing setting {0}")]
    IncompleteRecords(usize),
    #[error("tomography records carry no events")]
    EmptyRecords,
    #[error("sweep grid is empty")]
    EmptyGrid,
}

pub type Result<T> = std::result::Result<T, Error>;
