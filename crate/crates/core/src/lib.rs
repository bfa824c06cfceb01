//! Numerics workbench for the two-speed totally asymmetric exclusion process
//! started from a packed (step) configuration.
//!
//! The crate has four layers that cross-validate each other:
//!
//! * [`sim`] — continuous-time kinetic Monte Carlo for the particle system
//!   and for the associated zero-range process, with replica statistics.
//! * [`oracle`] — a brute-force master-equation integrator for tiny particle
//!   counts; the independent ground truth.
//! * [`kernels`] + [`fredholm`] — the exact finite-N correlation kernel built
//!   from bi-orthogonal contour integrals, and Fredholm determinants of its
//!   gated restriction, which give joint tail probabilities.
//! * [`hydro`] + [`limits`] — hydrodynamic profiles, scaling frames, and the
//!   limiting determinantal kernels (extended Hermite, extended Airy, and the
//!   transition kernel between them).

pub mod fredholm;
pub mod hydro;
pub mod kernels;
pub mod lattice;
pub mod limits;
pub mod oracle;
pub mod quad;
pub mod sim;
pub mod stats;

pub use hydro::{Region, ScalingFrame};
pub use kernels::KernelContext;

pub use lattice::{ParticleSystem, SpaceLikePoint, SpaceLikeSet, ZrpConfig};
pub use sim::{EmpiricalLaw, SimConfig};
