use std::path::{Path, PathBuf};

use mfgas_core::pointprocess::{BulkSettings, EdgeSettings, GumbelSettings, DEFAULT_FRAME_THRESHOLD};
use mfgas_core::{GasError, InteractionKernel, KernelFamily, Potential, PotentialFamily};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// One experiment: a gas, how to solve and sample it, and which statistics to compute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kernel: KernelConfig,
    pub potential: PotentialConfig,
    pub gas: GasConfig,
    #[serde(default)]
    pub equilibrium: EquilibriumConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub stats: StatsConfig,
    #[serde(default)]
    pub bulk: BulkConfig,
    #[serde(default)]
    pub edge: EdgeConfig,
    #[serde(default)]
    pub gumbel: GumbelSettings,
    #[serde(default)]
    pub density: DensityConfig,
    #[serde(default)]
    pub partition: PartitionConfig,
    #[serde(default)]
    pub run: RunConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Riesz,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub family: KernelKind,
    /// Riesz exponent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default = "one")]
    pub dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialKind {
    Power,
    Gaussian,
    Tabulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub family: PotentialKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasConfig {
    /// Coupling γ = βN.
    pub gamma: f64,
    /// Particle counts, run in order.
    pub n: Vec<usize>,
    /// Fixed β for every N instead of γ/N.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquilibriumConfig {
    pub cells: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    /// Explicit [lo, hi] for one-dimensional solves; derived from the potential tails otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain: Option<[f64; 2]>,
}

impl Default for EquilibriumConfig {
    fn default() -> Self {
        Self { cells: 1000, tol: 1e-10, max_iter: 2000, damping: 0.5, domain: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// i.i.d. when β = 0, tridiagonal for the one-dimensional log gas in x², Metropolis otherwise.
    Auto,
    Mcmc,
    Tridiag,
    Iid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Record {
    All,
    /// Only the particles the requested analyses read.
    Window,
    /// The `top_k` particles with the largest first coordinate.
    Top,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub method: Method,
    pub replicas: usize,
    /// Metropolis burn-in, in sweeps of N single-particle steps.
    pub burn_sweeps: u64,
    /// Configurations recorded per replica.
    pub frames: u64,
    /// Metropolis sweeps between recorded configurations.
    pub thin_sweeps: u64,
    pub record: Record,
    pub top_k: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            method: Method::Auto,
            replicas: 200,
            burn_sweeps: 40,
            frames: 1,
            thin_sweeps: 1,
            record: Record::Window,
            top_k: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Analysis {
    Bulk,
    Edge,
    Gumbel,
    /// Density-of-states histogram against μ_γ, with the Wegner sup-ratio.
    Density,
    /// Z_N/Z_{N−1} against L_γ.
    Partition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub analyses: Vec<Analysis>,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self { analyses: vec![Analysis::Bulk] }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BulkConfig {
    /// The bulk point E; the origin when empty.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub center: Vec<f64>,
    #[serde(flatten)]
    pub settings: BulkSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EdgeConfig {
    /// Unit direction υ; e₁ when empty.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub upsilon: Vec<f64>,
    /// Largest accepted frame-condition margin.
    pub frame_threshold: f64,
    #[serde(flatten)]
    pub settings: EdgeSettings,
}

impl Default for EdgeConfig {
    fn default() -> Self {
        Self { upsilon: Vec::new(), frame_threshold: DEFAULT_FRAME_THRESHOLD, settings: EdgeSettings::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DensityConfig {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
    /// Largest accepted L¹ distance between the histogram and μ_γ.
    pub l1_tolerance: f64,
    /// Bins with fewer points are left out of the sup-ratio.
    pub min_count: u64,
}

impl Default for DensityConfig {
    fn default() -> Self {
        Self { lo: -4.0, hi: 4.0, bins: 40, l1_tolerance: 0.03, min_count: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionConfig {
    pub replicas: usize,
    pub burn_sweeps: u64,
    pub frames: u64,
    pub draws_per_frame: usize,
    /// Accepted gap: `stderr_factor`·stderr + `relative_tolerance`·L_γ.
    pub stderr_factor: f64,
    pub relative_tolerance: f64,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self {
            replicas: 40,
            burn_sweeps: 30,
            frames: 10,
            draws_per_frame: 20,
            stderr_factor: 3.0,
            relative_tolerance: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { seed: 1, out_dir: PathBuf::from("runs/default") }
    }
}

fn one() -> usize {
    1
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Parse(e.to_string()))
    }

    /// Reads a TOML config, or the config embedded in a JSON run manifest.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            #[derive(Deserialize)]
            struct Embedded {
                config: ExperimentConfig,
            }
            let m: Embedded = serde_json::from_str(&text).map_err(|e| CliError::Parse(e.to_string()))?;
            Ok(m.config)
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn kernel(&self) -> Result<InteractionKernel, GasError> {
        let family = match self.kernel.family {
            KernelKind::Log => KernelFamily::Log,
            KernelKind::Riesz => KernelFamily::Riesz { s: self.kernel.s.unwrap_or(f64::NAN) },
        };
        InteractionKernel::new(family, self.kernel.dim)
    }

    pub fn potential(&self) -> Result<Potential, GasError> {
        let p = &self.potential;
        let family = match p.family {
            PotentialKind::Power => PotentialFamily::Power { alpha: p.alpha.unwrap_or(f64::NAN) },
            PotentialKind::Gaussian => PotentialFamily::Gaussian,
            PotentialKind::Tabulated => PotentialFamily::Tabulated {
                grid: p.grid.clone().unwrap_or_default(),
                values: p.values.clone().unwrap_or_default(),
            },
        };
        Potential::new(family, self.kernel.dim)
    }

    /// β used at N particles.
    pub fn beta(&self, n: usize) -> f64 {
        self.gas.beta.unwrap_or(self.gas.gamma / n as f64)
    }

    /// Coupling βN of the equilibrium that the N-particle gas is compared with.
    pub fn coupling(&self, n: usize) -> f64 {
        match self.gas.beta {
            Some(b) => b * n as f64,
            None => self.gas.gamma,
        }
    }

    pub fn bulk_center(&self) -> Vec<f64> {
        if self.bulk.center.is_empty() {
            vec![0.0; self.kernel.dim]
        } else {
            self.bulk.center.clone()
        }
    }

    pub fn upsilon(&self) -> Vec<f64> {
        if self.edge.upsilon.is_empty() {
            let mut e = vec![0.0; self.kernel.dim];
            e[0] = 1.0;
            e
        } else {
            self.edge.upsilon.clone()
        }
    }

    /// The log gas in x² on the line, which the tridiagonal model samples exactly.
    pub fn is_gaussian_log_gas(&self) -> bool {
        self.kernel.family == KernelKind::Log
            && self.kernel.dim == 1
            && self.potential.family == PotentialKind::Power
            && self.potential.alpha == Some(2.0)
    }

    /// Sampler actually used at N particles.
    pub fn resolved_method(&self, n: usize) -> Method {
        match self.sampler.method {
            Method::Auto if self.beta(n) == 0.0 => Method::Iid,
            Method::Auto if self.is_gaussian_log_gas() => Method::Tridiag,
            Method::Auto => Method::Mcmc,
            m => m,
        }
    }
}
