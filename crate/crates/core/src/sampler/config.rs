use super::params::{GasParameters, ParticleSet};
use crate::error::{GasError, Result};
use crate::kernels::dist_sq;

/// 𝓗_N = β Σ_{i<j} g(x_i, x_j) + Σ_j V(x_j); +∞ when two particles coincide.
pub fn total_energy(params: &GasParameters, positions: &ParticleSet) -> Result<f64> {
    if positions.dim() != params.dim() {
        return Err(GasError::DimensionMismatch { expected: params.dim(), got: positions.dim() });
    }
    let kernel = params.kernel();
    let mut pair = 0.0;
    let coords = positions.coords();
    for i in 0..positions.len() {
        // Σ_{j>i} g(x_i, x_j)
        pair += kernel.field_sum(positions.point(i), &coords[(i + 1) * params.dim()..], None);
    }
    let confinement: f64 = positions.points().map(|x| params.potential().eval(x)).sum();
    let interaction = if params.beta() == 0.0 { 0.0 } else { params.beta() * pair };
    Ok(interaction + confinement)
}

/// Per-particle fields Σ_{i≠j} g(x_j, x_i). The log kernel keeps ∏_{i≠j}|x_j − x_i|² as a mantissa in [1, 2)
/// and a binary exponent so that moves update it by multiplication.
#[derive(Debug, Clone, PartialEq)]
enum FieldCache {
    Sum(Vec<f64>),
    LogProduct { mantissa: Vec<f64>, exponent: Vec<i64> },
}

fn split_exponent(x: f64) -> (f64, i64) {
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64 - 1023;
    (f64::from_bits((bits & !(0x7ff << 52)) | (1023 << 52)), exp)
}

/// Particle positions with the cached energy and per-particle fields Σ_{i≠j} g(x_j, x_i).
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleConfiguration {
    positions: ParticleSet,
    cache: FieldCache,
    energy: f64,
}

impl ParticleConfiguration {
    pub fn new(params: &GasParameters, positions: ParticleSet) -> Result<Self> {
        if positions.dim() != params.dim() {
            return Err(GasError::DimensionMismatch { expected: params.dim(), got: positions.dim() });
        }
        let cache = FieldCache::Sum(Vec::new());
        let mut config = Self { positions, cache, energy: 0.0 };
        config.refresh(params)?;
        Ok(config)
    }

    /// Recomputes fields and energy from scratch.
    pub fn refresh(&mut self, params: &GasParameters) -> Result<()> {
        let n = self.positions.len();
        let kernel = params.kernel();
        let coords = self.positions.coords();
        let fields: Vec<f64> = (0..n).map(|j| kernel.field_sum(self.positions.point(j), coords, Some(j))).collect();
        if let Some(j) = fields.iter().position(|f| f.is_infinite() && *f > 0.0) {
            let p = self.positions.point(j);
            let i = (0..n).find(|&i| i != j && dist_sq(p, self.positions.point(i)) == 0.0).unwrap_or(j);
            return Err(GasError::CoincidentParticles(i.min(j), i.max(j)));
        }
        let pair: f64 = 0.5 * fields.iter().sum::<f64>();
        let confinement: f64 = self.positions.points().map(|x| params.potential().eval(x)).sum();
        self.energy = if params.beta() == 0.0 { 0.0 } else { params.beta() * pair } + confinement;
        self.cache = if kernel.is_log() {
            // field = −½ ln P  ⇒  P = e^{−2·field} = 2^{−2·field/ln 2}
            let (mantissa, exponent) = fields
                .iter()
                .map(|f| {
                    let log2 = -2.0 * f / std::f64::consts::LN_2;
                    let e = log2.floor();
                    (2f64.powf(log2 - e), e as i64)
                })
                .unzip();
            FieldCache::LogProduct { mantissa, exponent }
        } else {
            FieldCache::Sum(fields)
        };
        Ok(())
    }

    pub fn positions(&self) -> &ParticleSet {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// Cached Σ_{i≠j} g(x_j, x_i).
    pub fn field(&self, j: usize) -> f64 {
        match &self.cache {
            FieldCache::Sum(f) => f[j],
            FieldCache::LogProduct { mantissa, exponent } => {
                -0.5 * (mantissa[j].ln() + exponent[j] as f64 * std::f64::consts::LN_2)
            }
        }
    }

    pub fn fields(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.field(j)).collect()
    }

    /// 𝓗(x_j → proposal) − 𝓗, in O(N) from the cached field of particle j.
    pub fn delta_energy(&self, params: &GasParameters, j: usize, proposal: &[f64]) -> Result<f64> {
        if j >= self.len() {
            return Err(GasError::invalid("j", format!("index {j} out of range for {} particles", self.len())));
        }
        if proposal.len() != params.dim() {
            return Err(GasError::DimensionMismatch { expected: params.dim(), got: proposal.len() });
        }
        let old = self.positions.point(j);
        if old == proposal {
            return Ok(0.0);
        }
        let v_new = params.potential().eval(proposal);
        if v_new.is_infinite() {
            return Ok(f64::INFINITY);
        }
        let v_old = params.potential().eval(old);
        if params.beta() == 0.0 {
            return Ok(v_new - v_old);
        }
        let field_new = params.kernel().field_sum(proposal, self.positions.coords(), Some(j));
        if field_new == f64::INFINITY {
            return Ok(f64::INFINITY);
        }
        Ok(params.beta() * (field_new - self.field(j)) + v_new - v_old)
    }

    /// Moves particle j, updating every cached field and the energy by `delta`.
    pub(crate) fn apply_move(&mut self, params: &GasParameters, j: usize, proposal: &[f64], delta: f64) {
        let dim = params.dim();
        let kernel = params.kernel();
        let old: Vec<f64> = self.positions.point(j).to_vec();
        let coords = &self.positions.coords;
        match &mut self.cache {
            FieldCache::Sum(fields) => {
                let mut field_j = 0.0;
                for (i, q) in coords.chunks_exact(dim).enumerate() {
                    if i != j {
                        let g_new = kernel.profile_sq(dist_sq(proposal, q));
                        fields[i] += g_new - kernel.profile_sq(dist_sq(&old, q));
                        field_j += g_new;
                    }
                }
                fields[j] = field_j;
            }
            FieldCache::LogProduct { mantissa, exponent } => {
                let mut redo = Vec::new();
                for (i, q) in coords.chunks_exact(dim).enumerate() {
                    if i == j {
                        continue;
                    }
                    let updated = mantissa[i] * (dist_sq(proposal, q) / dist_sq(&old, q));
                    if updated.is_normal() {
                        let (m, e) = split_exponent(updated);
                        mantissa[i] = m;
                        exponent[i] += e;
                    } else {
                        redo.push(i);
                    }
                }
                let mut set = |i: usize, field: f64| {
                    let log2 = -2.0 * field / std::f64::consts::LN_2;
                    let e = log2.floor();
                    mantissa[i] = 2f64.powf(log2 - e);
                    exponent[i] = e as i64;
                };
                for i in redo {
                    let q = &coords[i * dim..(i + 1) * dim];
                    // Σ_{k≠i} with x_j already at the proposal.
                    let others = kernel.field_sum(q, coords, Some(i)) - kernel.profile_sq(dist_sq(q, &old))
                        + kernel.profile_sq(dist_sq(q, proposal));
                    set(i, others);
                }
                set(j, kernel.field_sum(proposal, coords, Some(j)));
            }
        }
        self.positions.coords[j * dim..(j + 1) * dim].copy_from_slice(proposal);
        self.energy += delta;
    }
}

#[cfg(test)]
impl ParticleSet {
    pub(crate) fn coords_mut(&mut self) -> &mut Vec<f64> {
        &mut self.coords
    }
}
