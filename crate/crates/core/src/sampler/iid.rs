use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::mcmc::replica_rng;
use super::params::ParticleSet;
use crate::error::{GasError, Result};
use crate::kernels::{segment_exp_integral, Potential, PotentialFamily};

/// Acceptance rates below this make rejection sampling a configuration error.
const MIN_EFFICIENCY: f64 = 1e-4;

/// Draws from density ∝ e^{−(va + c·t)} on t ∈ [0, w].
fn linear_exp_inverse(u: f64, w: f64, c: f64) -> f64 {
    if (c * w).abs() < 1e-10 {
        return u * w;
    }
    // F(t) = (1 − e^{−ct}) / (1 − e^{−cw})
    let t = -(u * (-c * w).exp_m1()).ln_1p() / c;
    t.clamp(0.0, w)
}

fn unit_direction<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let z: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let r = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r > 0.0 {
            return z.into_iter().map(|v| v / r).collect();
        }
    }
}

/// Picks index i with probability weights[i] / Σweights via the cumulative table.
fn pick(cumulative: &[f64], u: f64) -> usize {
    let target = u * cumulative[cumulative.len() - 1];
    cumulative.partition_point(|c| *c <= target).min(cumulative.len() - 1)
}

/// N independent draws from e^{−V}/∫e^{−V}.
pub fn sample_iid<R: Rng + ?Sized>(pot: &Potential, n: usize, rng: &mut R) -> Result<ParticleSet> {
    let dim = pot.dim();
    let mut coords = Vec::with_capacity(n * dim);
    match pot.family() {
        PotentialFamily::Gaussian => {
            coords.extend((0..n * dim).map(|_| rng.sample::<f64, _>(StandardNormal)));
        }
        PotentialFamily::Power { alpha } => {
            // |x|^α ~ Gamma(n/α, 1) with a uniform direction.
            let gamma = Gamma::new(dim as f64 / alpha, 1.0).map_err(|e| GasError::invalid("alpha", e.to_string()))?;
            for _ in 0..n {
                let r = gamma.sample(rng).powf(1.0 / alpha);
                coords.extend(unit_direction(dim, rng).into_iter().map(|v| r * v));
            }
        }
        PotentialFamily::Tabulated { grid, values } if dim == 1 => {
            let mut cumulative = Vec::with_capacity(grid.len() - 1);
            let mut acc = 0.0;
            for k in 0..grid.len() - 1 {
                acc += segment_exp_integral(grid[k], grid[k + 1], values[k], values[k + 1]);
                cumulative.push(acc);
            }
            for _ in 0..n {
                let k = pick(&cumulative, rng.random());
                let w = grid[k + 1] - grid[k];
                let c = (values[k + 1] - values[k]) / w;
                coords.push(grid[k] + linear_exp_inverse(rng.random(), w, c));
            }
        }
        PotentialFamily::Tabulated { grid, values } => {
            // Radial in ℝ²: r e^{−V(r)} is dominated by r_hi e^{−V(r)} on each segment; thin by r / r_hi.
            let mut cumulative = Vec::with_capacity(grid.len() - 1);
            let mut acc = 0.0;
            for k in 0..grid.len() - 1 {
                acc += grid[k + 1] * segment_exp_integral(grid[k], grid[k + 1], values[k], values[k + 1]);
                cumulative.push(acc);
            }
            let (mut tries, mut accepted) = (0u64, 0u64);
            while (accepted as usize) < n {
                tries += 1;
                if tries > 10_000 && (accepted as f64) < MIN_EFFICIENCY * tries as f64 {
                    return Err(GasError::invalid(
                        "potential",
                        format!("rejection efficiency {} below {MIN_EFFICIENCY}", accepted as f64 / tries as f64),
                    ));
                }
                let k = pick(&cumulative, rng.random());
                let (a, b) = (grid[k], grid[k + 1]);
                let c = (values[k + 1] - values[k]) / (b - a);
                let r = a + linear_exp_inverse(rng.random(), b - a, c);
                if rng.random::<f64>() * b < r {
                    accepted += 1;
                    let angle = rng.random::<f64>() * std::f64::consts::TAU;
                    coords.extend([r * angle.cos(), r * angle.sin()]);
                }
            }
        }
    }
    ParticleSet::new(dim, coords)
}

/// [`sample_iid`] with the replica-0 RNG of `seed`.
pub fn sample_iid_seeded(pot: &Potential, n: usize, seed: u64) -> Result<ParticleSet> {
    sample_iid(pot, n, &mut replica_rng(seed, 0))
}
