use rayon::prelude::*;
use serde::Serialize;

use super::iid::sample_iid;
use super::mcmc::{replica_rng, run_chain_from, ChainOptions, RecordMode};
use super::params::{GasParameters, ParticleSet};
use crate::error::{GasError, Result};

/// X_N(u) = N⁻¹ Σ_j g(u, x_j).
pub fn empirical_field(params: &GasParameters, config: &ParticleSet, u: &[f64]) -> Result<f64> {
    if u.len() != params.dim() || config.dim() != params.dim() {
        return Err(GasError::DimensionMismatch { expected: params.dim(), got: u.len() });
    }
    if config.is_empty() {
        return Err(GasError::EmptySample("configuration has no particles".into()));
    }
    Ok(params.kernel().field_sum(u, config.coords(), None) / config.len() as f64)
}

/// Mean and batch-means standard error of a correlated series.
pub fn batch_means(xs: &[f64], batches: usize) -> Result<(f64, f64)> {
    if batches < 2 || xs.len() < batches {
        return Err(GasError::invalid("batches", format!("need 2 ≤ batches ≤ {} samples", xs.len())));
    }
    let m = xs.len() / batches;
    let means: Vec<f64> = (0..batches).map(|b| xs[b * m..(b + 1) * m].iter().sum::<f64>() / m as f64).collect();
    let mean = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
    Ok((mean, (var / batches as f64).sqrt()))
}

/// Mean and standard error of independent samples.
pub fn mean_stderr(xs: &[f64]) -> Result<(f64, f64)> {
    if xs.len() < 2 {
        return Err(GasError::EmptySample("need at least two samples".into()));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// N⁻¹ Σ_j x_j^k along coordinate `axis`, for k = 1..=order.
pub fn empirical_moments(points: &ParticleSet, axis: usize, order: usize) -> Vec<f64> {
    let n = points.len().max(1) as f64;
    (1..=order as i32).map(|k| points.points().map(|p| p[axis].powi(k)).sum::<f64>() / n).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionRatio {
    pub estimate: f64,
    pub stderr: f64,
    pub replicas: usize,
    /// Largest single weight as a fraction of the total.
    pub max_weight_share: f64,
    pub heavy_tail: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionOptions {
    pub replicas: usize,
    /// Chain settings for the (N−1)-particle gas; recorded frames are reused.
    pub chain: ChainOptions,
    /// Test points u ~ μ₀ per recorded frame.
    pub draws_per_frame: usize,
}

/// Z_N/Z_{N−1} = L₀·E[e^{−β Σ_j g(u, x_j)}] with u ~ μ₀ independent of the (N−1)-gas at the same β.
pub fn estimate_partition_ratio(params: &GasParameters, opts: &PartitionOptions, seed: u64) -> Result<PartitionRatio> {
    if opts.replicas < 30 {
        return Err(GasError::invalid("replicas", format!("need at least 30 (got {})", opts.replicas)));
    }
    if params.n() == 0 || opts.draws_per_frame == 0 {
        return Err(GasError::invalid("N", "need N ≥ 1 and at least one draw per frame"));
    }
    let l0 = params.potential().normalization();
    let smaller = params.with_particles(params.n() - 1);
    let chain = ChainOptions { record: RecordMode::All, ..opts.chain.clone() };
    let per_replica: Vec<(f64, f64, f64)> = (0..opts.replicas)
        .into_par_iter()
        .map(|r| -> Result<(f64, f64, f64)> {
            let mut rng = replica_rng(seed, r as u64);
            let frames: Vec<ParticleSet> = if smaller.n() == 0 || smaller.beta() == 0.0 {
                vec![ParticleSet::empty(params.dim())]
            } else {
                let run = run_chain_from(&smaller, &chain, None, rng.clone())?;
                rng.set_stream(opts.replicas as u64 + r as u64);
                run.snapshots.into_iter().map(|s| s.points).collect()
            };
            let (mut sum, mut max, mut count) = (0.0, 0.0f64, 0.0);
            for frame in &frames {
                let us = sample_iid(params.potential(), opts.draws_per_frame, &mut rng)?;
                for u in us.points() {
                    let field = if frame.is_empty() { 0.0 } else { params.kernel().field_sum(u, frame.coords(), None) };
                    let w = if params.beta() == 0.0 { 1.0 } else { (-params.beta() * field).exp() };
                    sum += w;
                    max = max.max(w);
                    count += 1.0;
                }
            }
            Ok((sum / count, max, sum))
        })
        .collect::<Result<_>>()?;
    let means: Vec<f64> = per_replica.iter().map(|p| p.0).collect();
    let (mean, se) = mean_stderr(&means)?;
    let total: f64 = per_replica.iter().map(|p| p.2).sum();
    let max_weight_share = per_replica.iter().map(|p| p.1).fold(0.0, f64::max) / total;
    Ok(PartitionRatio {
        estimate: l0 * mean,
        stderr: l0 * se,
        replicas: opts.replicas,
        max_weight_share,
        heavy_tail: max_weight_share > 0.05,
    })
}

/// Normalized histogram of coordinate `axis` over many configurations; mass outside [lo, hi) is dropped
/// from the bins but kept in the normalization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if !(lo < hi) || bins == 0 {
            return Err(GasError::invalid("bins", "need lo < hi and at least one bin"));
        }
        Ok(Self { lo, hi, counts: vec![0; bins], total: 0 })
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn center(&self, b: usize) -> f64 {
        self.lo + (b as f64 + 0.5) * self.width()
    }

    pub fn add(&mut self, x: f64) {
        self.total += 1;
        if x >= self.lo && x < self.hi {
            let last = self.counts.len() - 1;
            let b = ((x - self.lo) / self.width()) as usize;
            self.counts[b.min(last)] += 1;
        }
    }

    pub fn density(&self) -> Vec<f64> {
        let norm = self.total.max(1) as f64 * self.width();
        self.counts.iter().map(|c| *c as f64 / norm).collect()
    }

    /// Σ_b |p̂_b − P(bin b)| plus the mismatch outside [lo, hi), given the exact interval masses.
    pub fn l1_distance(&self, mass: impl Fn(f64, f64) -> f64) -> f64 {
        let total = self.total.max(1) as f64;
        let w = self.width();
        let mut inside_emp = 0.0;
        let mut inside_exact = 0.0;
        let mut d = 0.0;
        for (b, c) in self.counts.iter().enumerate() {
            let a = self.lo + b as f64 * w;
            let p = mass(a, a + w);
            let q = *c as f64 / total;
            d += (q - p).abs();
            inside_emp += q;
            inside_exact += p;
        }
        d + ((1.0 - inside_emp) - (1.0 - inside_exact)).abs()
    }
}

/// Histogram estimate of the one-point density ρ_N from all particles of all configurations.
pub fn density_of_states_histogram(
    configs: &[ParticleSet],
    axis: usize,
    lo: f64,
    hi: f64,
    bins: usize,
) -> Result<Histogram> {
    let mut h = Histogram::new(lo, hi, bins)?;
    for c in configs {
        for p in c.points() {
            h.add(p[axis]);
        }
    }
    if h.total == 0 {
        return Err(GasError::EmptySample("no points to bin".into()));
    }
    Ok(h)
}

/// sup_b ρ̂_N(b) / e^{−Ṽ_κ(center_b)} over bins holding at least `min_count` points, with κ = βN.
pub fn wegner_sup_ratio(params: &GasParameters, hist: &Histogram, min_count: u64) -> Result<f64> {
    if params.dim() != 1 {
        return Err(GasError::DimensionMismatch { expected: 1, got: params.dim() });
    }
    let kappa = params.beta_n();
    let density = hist.density();
    let ratio = (0..density.len())
        .filter(|&b| hist.counts[b] >= min_count)
        .map(|b| density[b] / (-params.potential().tilted(params.kernel(), kappa, &[hist.center(b)])).exp())
        .fold(f64::NEG_INFINITY, f64::max);
    if ratio == f64::NEG_INFINITY {
        return Err(GasError::EmptySample("no bin reaches the minimum count".into()));
    }
    Ok(ratio)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{InteractionKernel, Potential};
    use crate::quadrature::integrate;
    use statrs::function::erf::erf;

    fn gas(n: usize, gamma: f64) -> GasParameters {
        GasParameters::new(n, gamma, InteractionKernel::log(1).unwrap(), Potential::power(2.0, 1).unwrap()).unwrap()
    }

    #[test]
    fn empirical_field_examples() {
        let riesz =
            GasParameters::new(2, 1.0, InteractionKernel::riesz(1.0, 2).unwrap(), Potential::gaussian(2).unwrap())
                .unwrap();
        let cfg = ParticleSet::new(2, vec![1.0, 0.0, 3.0, 0.0]).unwrap();
        assert!((empirical_field(&riesz, &cfg, &[0.0, 0.0]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let log = gas(1, 1.0);
        let e = ParticleSet::new(1, vec![std::f64::consts::E]).unwrap();
        assert!((empirical_field(&log, &e, &[0.0]).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(empirical_field(&log, &e, &[std::f64::consts::E]).unwrap(), f64::INFINITY);
        assert!(empirical_field(&log, &ParticleSet::empty(1), &[0.0]).is_err());
    }

    #[test]
    fn partition_ratio_free_gas_is_exact() {
        let p = gas(8, 0.0);
        let opts = PartitionOptions { replicas: 30, chain: ChainOptions::sweeps(7, 5, 5), draws_per_frame: 4 };
        let r = estimate_partition_ratio(&p, &opts, 1).unwrap();
        assert!((r.estimate - std::f64::consts::PI.sqrt()).abs() < 1e-12);
        assert_eq!(r.stderr, 0.0);
        let few = PartitionOptions { replicas: 10, ..opts };
        assert!(estimate_partition_ratio(&p, &few, 1).is_err());
    }

    #[test]
    fn partition_ratio_two_particles() {
        // Z₂/Z₁ at β = γ/2 with Z₁ = √π.
        let gamma = 0.4;
        let beta: f64 = gamma / 2.0;
        let w = |x: f64, y: f64| (x - y).abs().powf(beta) * (-x * x - y * y).exp();
        let z2 = integrate(
            &|x| integrate(&|y| w(x, y), -9.0, x, 1e-14, 1e-11) + integrate(&|y| w(x, y), x, 9.0, 1e-14, 1e-11),
            -9.0,
            9.0,
            1e-13,
            1e-10,
        );
        let exact = z2 / std::f64::consts::PI.sqrt();
        let p = gas(2, gamma);
        let opts = PartitionOptions { replicas: 40, chain: ChainOptions::sweeps(1, 100, 2000), draws_per_frame: 2 };
        let r = estimate_partition_ratio(&p, &opts, 9).unwrap();
        assert!((r.estimate - exact).abs() < 3.0 * r.stderr, "{} ± {} vs {exact}", r.estimate, r.stderr);
        assert!(!r.heavy_tail);
    }

    #[test]
    fn free_histogram_matches_gaussian() {
        let v = Potential::power(2.0, 1).unwrap();
        let mut rng = replica_rng(3, 0);
        let configs: Vec<ParticleSet> = (0..1000).map(|_| sample_iid(&v, 1000, &mut rng).unwrap()).collect();
        let h = density_of_states_histogram(&configs, 0, -4.0, 4.0, 80).unwrap();
        let mass = |a: f64, b: f64| 0.5 * (erf(b) - erf(a));
        assert!(h.l1_distance(mass) < 0.02);
        let p = gas(1000, 0.0);
        let sup = wegner_sup_ratio(&p, &h, 50).unwrap();
        assert!((sup - 1.0 / std::f64::consts::PI.sqrt()).abs() < 0.1);
    }

    #[test]
    fn histogram_bookkeeping() {
        let mut h = Histogram::new(0.0, 1.0, 4).unwrap();
        for x in [0.1, 0.3, 0.3, 0.9, 2.0] {
            h.add(x);
        }
        assert_eq!(h.counts, vec![1, 2, 0, 1]);
        assert_eq!(h.total, 5);
        let d = h.density();
        assert!((d.iter().sum::<f64>() * h.width() - 0.8).abs() < 1e-15);
        // Uniform on [0, 1] loses the 0.2 outside mass and per-bin deviations.
        let l1 = h.l1_distance(|a, b| b - a);
        assert!((l1 - (0.05 + 0.15 + 0.25 + 0.05 + 0.2)).abs() < 1e-12);
        assert!(Histogram::new(1.0, 0.0, 3).is_err());
        assert!(density_of_states_histogram(&[], 0, 0.0, 1.0, 3).is_err());
    }

    #[test]
    fn batch_means_and_moments() {
        let xs: Vec<f64> = (0..1000).map(|i| (i % 2) as f64).collect();
        let (m, se) = batch_means(&xs, 10).unwrap();
        assert_eq!(m, 0.5);
        assert_eq!(se, 0.0);
        assert!(batch_means(&xs, 1).is_err());
        let pts = ParticleSet::new(1, vec![1.0, -1.0, 2.0]).unwrap();
        assert_eq!(empirical_moments(&pts, 0, 3), vec![2.0 / 3.0, 2.0, 8.0 / 3.0]);
    }
}
