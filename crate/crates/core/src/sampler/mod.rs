//! Sampling the N-particle Gibbs measure ∝ e^{−𝓗_N}.
//!
//! Metropolis–Hastings with cached per-particle fields for general kernels, exact i.i.d. draws for the free gas,
//! and the tridiagonal matrix model for the Gaussian β-ensemble.

mod config;
mod estimators;
mod iid;
mod mcmc;
mod params;
mod tridiag;

pub use config::{total_energy, ParticleConfiguration};
pub use estimators::{
    batch_means, density_of_states_histogram, empirical_field, empirical_moments, estimate_partition_ratio,
    mean_stderr, wegner_sup_ratio, Histogram, PartitionOptions, PartitionRatio,
};
pub use iid::{sample_iid, sample_iid_seeded};
pub use mcmc::{
    acceptance_probability, integrated_autocorrelation, mh_step, replica_rng, run_chain, run_chain_from, run_replicas,
    ChainDiagnostics, ChainOptions, ChainRun, ChainState, RecordMode, Snapshot, ACCEPTANCE_BAND, TARGET_ACCEPTANCE,
};
pub use params::{GasParameters, ParticleSet};
pub use tridiag::{sample_tridiagonal_gbe, Tridiagonal};
