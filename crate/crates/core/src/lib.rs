//! Mean-field gases with singular two-body interactions.
//!
//! Equilibrium densities, Gibbs-measure samplers and local point-process
//! statistics for Riesz and logarithmic gases in the regime βN = γ.

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod equilibrium;
pub mod error;
pub mod kernels;
pub mod pointprocess;
pub mod quadrature;
pub mod sampler;

pub use equilibrium::{DensityGrid, EquilibriumSolution, GridGeometry, SolverOptions};
pub use error::{GasError, Result};
pub use kernels::{theta, unit_ball_volume, InteractionKernel, KernelFamily, Potential, PotentialFamily};
pub use sampler::{GasParameters, ParticleConfiguration, ParticleSet};
