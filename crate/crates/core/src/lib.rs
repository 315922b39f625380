//! Classical emulator of the dynamical ansatz-tree approach (ATA) for the
//! periodic one-dimensional heat equation.
//!
//! The implicit finite-difference operator is circulant, so the Fourier
//! transform diagonalizes it. Replacing its spectrum with a piecewise
//! quadratic approximation makes the diagonal a 2-local function of the wave
//! index bits, i.e. a short sum of `Z`-strings. Every object the solver
//! manipulates (operator terms, tree nodes, right-hand sides, sources) is then
//! a diagonal Pauli sum in the Fourier domain.
//!
//! Module map:
//!
//! - [`grid`]: grid parameters and operator spectra.
//! - [`pauli`]: sparse diagonal `Z`-string sums and Walsh–Hadamard transforms.
//! - [`state`]: dense statevectors, Fourier transforms and tree-node overlaps.
//! - [`ata`]: the greedy ansatz-tree solver for one linear system.
//! - [`evolve`]: time stepping with source addition and dropout.
//! - [`cluster`]: stationary node clusters and warm starts.
//! - [`sources`]: Chebyshev random fields and the heater/cooler preset.
//! - [`oracle`]: exact classical reference solvers.
//! - [`resources`]: closed-form ATA vs HHL cost models.

pub mod ata;
pub mod cluster;
pub mod error;
pub mod evolve;
pub mod grid;
pub mod oracle;
pub mod pauli;
pub mod resources;
pub mod sources;
pub mod state;

pub use ata::{AnsatzTree, AtaConfig, DepthReport, Expansion, StopReason};
pub use cluster::ClusterReport;
pub use error::{AtaError, Result};
pub use evolve::{EvolveConfig, EvolveState, SourceCoupling, StepDiagnostics, Trajectory};
pub use grid::{GridSpec, Spectrum};
pub use pauli::{Coefficient, DiagonalPauliSum};
pub use resources::{Method, ResourceEstimate};
pub use sources::ChebyshevField;
pub use state::{Domain, NodeRef, Statevector};

pub use num_complex::Complex64;

/// Library version recorded in experiment metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
