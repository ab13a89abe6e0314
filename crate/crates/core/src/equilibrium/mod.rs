//! Equilibrium measures of the mean-field free energy.
//!
//! Densities are cellwise constant on a grid. The interaction enters only
//! through exact cell-pair integrals, so the discrete free energy is a genuine
//! functional of the discrete density and the damped fixed-point map is a
//! descent scheme for it.

mod functionals;
mod grid;
mod solver;

pub use functionals::{
    cell_integral, energy, free_energy, potential_of_measure, reference_measure, relative_entropy, tilt_moment,
    weighted_energy, GridOperator,
};
pub use grid::{DensityGrid, GridGeometry};
pub use solver::{
    default_geometry, el_residual, solve_equilibrium, truncation_interval, truncation_radius, EquilibriumSolution,
    SolverOptions,
};
