use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use super::config::ParticleConfiguration;
use super::iid::sample_iid;
use super::params::{GasParameters, ParticleSet};
use crate::error::{GasError, Result};

pub const TARGET_ACCEPTANCE: f64 = 0.3;
pub const ACCEPTANCE_BAND: (f64, f64) = (0.1, 0.6);

/// RNG for replica `replica` of a run seeded with `seed`.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

/// min(1, e^{−Δ𝓗}).
pub fn acceptance_probability(delta: f64) -> f64 {
    if delta.is_nan() || delta == f64::INFINITY {
        0.0
    } else if delta <= 0.0 {
        1.0
    } else {
        (-delta).exp()
    }
}

#[derive(Debug, Clone)]
pub struct ChainState {
    pub config: ParticleConfiguration,
    pub rng: ChaCha8Rng,
    pub proposal_scale: f64,
    pub accept_count: u64,
    pub step_count: u64,
}

impl ChainState {
    pub fn new(config: ParticleConfiguration, rng: ChaCha8Rng, proposal_scale: f64) -> Self {
        Self { config, rng, proposal_scale, accept_count: 0, step_count: 0 }
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.step_count == 0 {
            0.0
        } else {
            self.accept_count as f64 / self.step_count as f64
        }
    }
}

/// One single-particle Metropolis step with an isotropic Gaussian proposal. Returns whether it was accepted.
pub fn mh_step(state: &mut ChainState, params: &GasParameters) -> bool {
    state.step_count += 1;
    let n = state.config.len();
    if n == 0 {
        return false;
    }
    let dim = params.dim();
    let j = state.rng.random_range(0..n);
    let mut proposal = Vec::with_capacity(dim);
    for x in state.config.positions().point(j) {
        let z: f64 = state.rng.sample(StandardNormal);
        proposal.push(x + state.proposal_scale * z);
    }
    let u: f64 = state.rng.random();
    let delta = match state.config.delta_energy(params, j, &proposal) {
        Ok(d) => d,
        Err(_) => return false,
    };
    if u < acceptance_probability(delta) {
        state.config.apply_move(params, j, &proposal, delta);
        state.accept_count += 1;
        true
    } else {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum RecordMode {
    /// Every particle.
    All,
    /// The `k` particles with the largest coordinate `axis`.
    Top { axis: usize, k: usize },
    /// Energies only.
    Nothing,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainOptions {
    /// Total single-particle steps including burn-in.
    pub steps: u64,
    pub burn_in: u64,
    /// Steps between recorded configurations.
    pub thin: u64,
    pub initial_scale: f64,
    pub adapt: bool,
    /// Full recomputation of the cached energy every this many steps (0 disables).
    pub refresh_every: u64,
    pub record: RecordMode,
}

impl ChainOptions {
    /// Burn-in of `burn_sweeps`·N steps, then `frames` recordings N steps apart.
    pub fn sweeps(n: usize, burn_sweeps: u64, frames: u64) -> Self {
        let n = n.max(1) as u64;
        Self {
            steps: burn_sweeps * n + frames * n,
            burn_in: burn_sweeps * n,
            thin: n,
            initial_scale: 0.5,
            adapt: true,
            refresh_every: 0,
            record: RecordMode::All,
        }
    }

    /// Burn-in of 10·N sweeps and thinning of N steps.
    pub fn defaults_for(n: usize, frames: u64) -> Self {
        Self::sweeps(n, 10 * n as u64, frames)
    }

    fn validate(&self) -> Result<()> {
        if self.steps <= self.burn_in {
            return Err(GasError::invalid("steps", "must exceed burn_in"));
        }
        if self.thin == 0 {
            return Err(GasError::invalid("thin", "must be positive"));
        }
        if !(self.initial_scale > 0.0 && self.initial_scale.is_finite()) {
            return Err(GasError::invalid("initial_scale", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: u64,
    pub energy: f64,
    pub points: ParticleSet,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainDiagnostics {
    /// Acceptance after the proposal scale was frozen.
    pub acceptance_rate: f64,
    pub proposal_scale: f64,
    pub acceptance_flag: bool,
    /// Integrated autocorrelation time of the recorded energy, in frames.
    pub energy_autocorrelation: f64,
    /// Largest relative discrepancy between cached and recomputed energies.
    pub max_energy_drift: f64,
}

#[derive(Debug, Clone)]
pub struct ChainRun {
    pub snapshots: Vec<Snapshot>,
    pub energies: Vec<f64>,
    pub diagnostics: ChainDiagnostics,
    pub final_config: ParticleConfiguration,
}

fn snapshot(config: &ParticleConfiguration, mode: RecordMode, step: u64) -> Option<Snapshot> {
    let points = match mode {
        RecordMode::All => config.positions().clone(),
        RecordMode::Top { axis, k } => config.positions().top(axis, k),
        RecordMode::Nothing => return None,
    };
    Some(Snapshot { step, energy: config.energy(), points })
}

fn drift(config: &mut ParticleConfiguration, params: &GasParameters) -> Result<f64> {
    let cached = config.energy();
    config.refresh(params)?;
    Ok((cached - config.energy()).abs() / config.energy().abs().max(1.0))
}

/// Runs a chain from `start`, or from i.i.d. draws of e^{−V} when `start` is `None`.
pub fn run_chain_from(
    params: &GasParameters,
    opts: &ChainOptions,
    start: Option<ParticleSet>,
    mut rng: ChaCha8Rng,
) -> Result<ChainRun> {
    opts.validate()?;
    let positions = match start {
        Some(p) => p,
        None => sample_iid(params.potential(), params.n(), &mut rng)?,
    };
    if positions.len() != params.n() {
        return Err(GasError::invalid("start", format!("expected {} particles, got {}", params.n(), positions.len())));
    }
    let config = ParticleConfiguration::new(params, positions)?;
    let mut state = ChainState::new(config, rng, opts.initial_scale);
    let batch = (params.n() as u64).max(100);
    let mut batch_accepts = 0;
    let mut max_drift: f64 = 0.0;
    let mut snapshots = Vec::new();
    let mut energies = Vec::new();

    for step in 1..=opts.steps {
        let accepted = mh_step(&mut state, params);
        if step <= opts.burn_in {
            batch_accepts += accepted as u64;
            if opts.adapt && step % batch == 0 {
                let rate = batch_accepts as f64 / batch as f64;
                state.proposal_scale *= (2.0 * (rate - TARGET_ACCEPTANCE)).exp();
                batch_accepts = 0;
            }
            if step == opts.burn_in {
                state.accept_count = 0;
                state.step_count = 0;
            }
        }
        if opts.refresh_every > 0 && step % opts.refresh_every == 0 {
            max_drift = max_drift.max(drift(&mut state.config, params)?);
        }
        if step > opts.burn_in && (step - opts.burn_in).is_multiple_of(opts.thin) {
            energies.push(state.config.energy());
            snapshots.extend(snapshot(&state.config, opts.record, step));
        }
    }
    max_drift = max_drift.max(drift(&mut state.config, params)?);
    let rate = state.acceptance_rate();
    let diagnostics = ChainDiagnostics {
        acceptance_rate: rate,
        proposal_scale: state.proposal_scale,
        acceptance_flag: !(ACCEPTANCE_BAND.0..=ACCEPTANCE_BAND.1).contains(&rate),
        energy_autocorrelation: integrated_autocorrelation(&energies),
        max_energy_drift: max_drift,
    };
    Ok(ChainRun { snapshots, energies, diagnostics, final_config: state.config })
}

/// Runs one chain with the RNG of replica 0 for `seed`.
pub fn run_chain(params: &GasParameters, opts: &ChainOptions, seed: u64) -> Result<ChainRun> {
    run_chain_from(params, opts, None, replica_rng(seed, 0))
}

/// Independent replicas in parallel; replica r uses stream r of `seed`.
pub fn run_replicas(params: &GasParameters, opts: &ChainOptions, seed: u64, replicas: usize) -> Result<Vec<ChainRun>> {
    (0..replicas).into_par_iter().map(|r| run_chain_from(params, opts, None, replica_rng(seed, r as u64))).collect()
}

/// Integrated autocorrelation time 1 + 2Σρ(t) with Sokal's self-consistent window (c = 5).
pub fn integrated_autocorrelation(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 4 {
        return 1.0;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let var = series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    if var == 0.0 {
        return 1.0;
    }
    let mut tau = 1.0;
    for t in 1..n / 2 {
        let c: f64 = (0..n - t).map(|i| (series[i] - mean) * (series[i + t] - mean)).sum::<f64>() / n as f64;
        tau += 2.0 * c / var;
        if t as f64 >= 5.0 * tau {
            break;
        }
    }
    tau.max(1.0 / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{InteractionKernel, Potential};
    use crate::quadrature::integrate;
    use proptest::prelude::*;
    use rand::Rng;

    fn gaussian_gas(n: usize, gamma: f64) -> GasParameters {
        GasParameters::new(n, gamma, InteractionKernel::log(1).unwrap(), Potential::power(2.0, 1).unwrap()).unwrap()
    }

    fn batch_means(xs: &[f64], batches: usize) -> (f64, f64) {
        let m = xs.len() / batches;
        let means: Vec<f64> = (0..batches).map(|b| xs[b * m..(b + 1) * m].iter().sum::<f64>() / m as f64).collect();
        let mean = means.iter().sum::<f64>() / batches as f64;
        let var = means.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
        (mean, (var / batches as f64).sqrt())
    }

    #[test]
    fn acceptance_formula() {
        assert_eq!(acceptance_probability(-3.0), 1.0);
        assert_eq!(acceptance_probability(0.0), 1.0);
        assert_eq!(acceptance_probability(f64::INFINITY), 0.0);
        assert!((acceptance_probability(2.0f64.ln()) - 0.5).abs() < 1e-15);
        // Hand computed: two particles at {0, 1}, β = 1, V = x², move x₂ from 1 to 2.
        let p = gaussian_gas(2, 2.0);
        let c = ParticleConfiguration::new(&p, ParticleSet::new(1, vec![0.0, 1.0]).unwrap()).unwrap();
        let d = c.delta_energy(&p, 1, &[2.0]).unwrap();
        assert!((d - (-(2f64.ln()) + 3.0)).abs() < 1e-14);
        assert!((acceptance_probability(d) - 2.0 * (-3f64).exp()).abs() < 1e-15);
        // The reverse move is always accepted.
        let back = ParticleConfiguration::new(&p, ParticleSet::new(1, vec![0.0, 2.0]).unwrap()).unwrap();
        let d_rev = back.delta_energy(&p, 1, &[1.0]).unwrap();
        assert!((d + d_rev).abs() < 1e-14);
        assert_eq!(acceptance_probability(d_rev), 1.0);
    }

    proptest! {
        #[test]
        fn acceptance_ratio_satisfies_detailed_balance(x in -2.0f64..2.0, y in -2.0f64..2.0, other in -2.0f64..2.0) {
            prop_assume!((x - other).abs() > 1e-3 && (y - other).abs() > 1e-3);
            let p = gaussian_gas(2, 1.3);
            let cx = ParticleConfiguration::new(&p, ParticleSet::new(1, vec![other, x]).unwrap()).unwrap();
            let cy = ParticleConfiguration::new(&p, ParticleSet::new(1, vec![other, y]).unwrap()).unwrap();
            let fwd = (-cx.energy()).exp() * acceptance_probability(cx.delta_energy(&p, 1, &[y]).unwrap());
            let bwd = (-cy.energy()).exp() * acceptance_probability(cy.delta_energy(&p, 1, &[x]).unwrap());
            prop_assert!((fwd - bwd).abs() <= 1e-12 * fwd.max(bwd));
        }
    }

    #[test]
    fn single_particle_variance() {
        let p = gaussian_gas(1, 0.0);
        let opts = ChainOptions {
            steps: 1_000_000,
            burn_in: 1000,
            thin: 1,
            initial_scale: 1.0,
            adapt: true,
            refresh_every: 0,
            record: RecordMode::All,
        };
        let run = run_chain(&p, &opts, 11).unwrap();
        let xs: Vec<f64> = run.snapshots.iter().map(|s| s.points.point(0)[0].powi(2)).collect();
        let (m, se) = batch_means(&xs, 100);
        assert!((m - 0.5).abs() < 3.0 * se, "{m} ± {se}");
        assert!(!run.diagnostics.acceptance_flag);
    }

    #[test]
    fn two_particle_log_gas_second_moment() {
        // βN = 1: density ∝ |x−y|^{1/2} e^{−x²−y²}.
        let beta: f64 = 0.5;
        let weight = |x: f64, y: f64| (x - y).abs().powf(beta) * (-x * x - y * y).exp();
        let inner = |x: f64, f: &dyn Fn(f64, f64) -> f64| {
            integrate(&|y| f(x, y), -8.0, x, 1e-13, 1e-11) + integrate(&|y| f(x, y), x, 8.0, 1e-13, 1e-11)
        };
        let z = integrate(&|x| inner(x, &weight), -8.0, 8.0, 1e-12, 1e-10);
        let m2 = integrate(&|x| inner(x, &|x, y| (x * x + y * y) * weight(x, y)), -8.0, 8.0, 1e-12, 1e-10) / z;

        let p = gaussian_gas(2, 1.0);
        let opts = ChainOptions::sweeps(2, 500, 200_000);
        let run = run_chain(&p, &opts, 5).unwrap();
        let xs: Vec<f64> = run.snapshots.iter().map(|s| s.points.coords().iter().map(|x| x * x).sum()).collect();
        let (m, se) = batch_means(&xs, 100);
        assert!((m - m2).abs() < 3.0 * se, "{m} ± {se} vs {m2}");
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let p = gaussian_gas(8, 2.0);
        let opts = ChainOptions { refresh_every: 50, ..ChainOptions::sweeps(8, 20, 50) };
        let a = run_chain(&p, &opts, 99).unwrap();
        let b = run_chain(&p, &opts, 99).unwrap();
        assert_eq!(a.snapshots, b.snapshots);
        assert_eq!(a.energies, b.energies);
        let c = run_chain(&p, &opts, 100).unwrap();
        assert_ne!(a.snapshots, c.snapshots);
        let reps = run_replicas(&p, &opts, 99, 3).unwrap();
        assert_eq!(reps[0].snapshots, a.snapshots);
        assert_ne!(reps[1].snapshots, reps[0].snapshots);
    }

    #[test]
    fn cached_energy_survives_many_moves() {
        for kernel in [InteractionKernel::log(2).unwrap(), InteractionKernel::riesz(1.0, 2).unwrap()] {
            let p = GasParameters::new(32, 4.0, kernel, Potential::power(2.0, 2).unwrap()).unwrap();
            let opts = ChainOptions {
                steps: 40_000,
                burn_in: 1000,
                thin: 1000,
                initial_scale: 0.3,
                adapt: true,
                refresh_every: 0,
                record: RecordMode::Nothing,
            };
            let mut run = run_chain(&p, &opts, 3).unwrap();
            let accepted = (run.diagnostics.acceptance_rate * 39_000.0) as u64;
            assert!(accepted > 10_000, "{accepted}");
            assert!(run.snapshots.is_empty());
            let cached = run.final_config.energy();
            run.final_config.refresh(&p).unwrap();
            assert!((cached - run.final_config.energy()).abs() < 1e-6);
        }
    }

    #[test]
    fn invalid_options() {
        let p = gaussian_gas(4, 1.0);
        let mut opts = ChainOptions::sweeps(4, 10, 10);
        opts.burn_in = opts.steps;
        assert!(run_chain(&p, &opts, 1).is_err());
        let opts = ChainOptions { thin: 0, ..ChainOptions::sweeps(4, 10, 10) };
        assert!(run_chain(&p, &opts, 1).is_err());
    }

    #[test]
    fn autocorrelation_of_ar1() {
        let mut rng = replica_rng(1, 0);
        let phi: f64 = 0.8;
        let mut x = 0.0;
        let series: Vec<f64> = (0..200_000)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                x = phi * x + z;
                x
            })
            .collect();
        let tau = integrated_autocorrelation(&series);
        let exact = (1.0 + phi) / (1.0 - phi);
        assert!((tau / exact - 1.0).abs() < 0.1, "{tau} vs {exact}");
        let white: Vec<f64> = (0..10_000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        assert!((integrated_autocorrelation(&white) - 1.0).abs() < 0.2);
    }
}
