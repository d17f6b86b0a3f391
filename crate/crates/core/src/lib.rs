//! Effective non-Hermitian Hamiltonians for decaying quantum systems.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: dense complex linear algebra (matrix exponential, general
//!   eigendecomposition with paired left/right vectors, LU solves).
//! - [`model`]: the partitioned Hamiltonian `H = H0 + H_I` with a decaying
//!   block **A** and a non-decaying Hermitian block **B**.
//! - [`dynamics`]: exact propagation of states and restricted density matrices.
//! - [`lindblad`]: the full zero-temperature master equation over `R ⊕ G`,
//!   used as a ground truth for the non-Hermitian reduction.
//! - [`perturbation`]: first/second order corrections with distinct left and
//!   right eigenvectors and the effective decay rates of the **B** states.
//! - [`indicators`]: the fidelity indicators `F`, `F̄`, `F̃` that detect
//!   confinement of the dynamics in **B**.
//! - [`sweep`]: `(Δ, φ)` grids of the indicators with deterministic CSV/JSON.

pub mod dynamics;
pub mod error;
pub mod indicators;
pub mod lindblad;
pub mod model;
pub mod numerics;
pub mod perturbation;
pub mod sweep;

mod par;

pub use error::{Error, Result};
pub use numerics::{CMat, CVec, C64};
