//! Mixed Liouvillian dynamics for open quantum systems with partially
//! restored populations.
//!
//! The reduced system loses probability to a continuum at rate `gamma_c` per
//! unit population and regains it through the quantum jump operators of the
//! Lindblad channels. [`liouville`] builds the generators, [`spectral`]
//! linearizes the resulting quadratic pencil, [`propagate`] sums the modes into
//! the evolution operator, [`microscopic`] provides an explicit-continuum
//! reference and [`models`] holds ready-made systems.

pub mod cli;
pub mod error;
pub mod expm;
pub mod liouville;
pub mod microscopic;
pub mod models;
pub mod propagate;
pub mod spectral;

pub use error::{Error, Result};
pub use liouville::{
    build_dissipator, build_generators, build_hamiltonian_superop, devectorize, eval_l_mixed, vectorize,
    ChannelKind, DensityMatrix, ElementaryJump, Generators, HilbertOperator, JumpChannel, SuperOperator,
    SystemModel,
};
pub use num_complex::Complex64 as C64;
pub use microscopic::{build_microscopic, convergence_study, run_microscopic, ContinuumSpec, MicroscopicModel};
pub use models::{m_level, preset, presets, two_level, two_level_dephasing, MLevelParams, Preset, TwoLevelParams};
pub use propagate::{
    evolution_operator, fidelity, gamma_c_sweep, normalized_state, projector_traces, propagate, propagate_model,
    semigroup_defect, ProjectorTraceReport, Trajectory,
};
pub use spectral::{
    build_extended_matrix, build_pencil, classify_poles, decompose_model, eigendecompose, verify_linearization,
    ExtendedMatrix, PoleEntry, PoleReport, QuadraticPencil, SpectralDecomposition,
};
