//! Two-body interaction kernels, confining potentials and the logarithmic tilt.
//!
//! Both kernel families are radial, so most hot paths go through the radial
//! profile evaluated on squared distances. Points are plain `&[f64]` slices of
//! length `dim`; particle sets are flat slices with stride `dim`.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta;
use statrs::function::gamma::gamma;

use crate::error::{GasError, Result};
use crate::quadrature;

/// Volume of the unit ball in ℝⁿ.
pub fn unit_ball_volume(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    std::f64::consts::PI.powf(h) / gamma(h + 1.0)
}

#[inline]
pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[inline]
pub fn dist_sq(u: &[f64], x: &[f64]) -> f64 {
    u.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// The tilt ϑ(x) = log(1 + |x|) that dominates the negative part of the log kernel.
#[inline]
pub fn theta(x: &[f64]) -> f64 {
    norm(x).ln_1p()
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(GasError::DimensionMismatch { expected, got })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum KernelFamily {
    /// g(u, x) = |x − u|^{−s} with 0 < s < n.
    Riesz { s: f64 },
    /// g(u, x) = log |x − u|^{−1}.
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteractionKernel {
    family: KernelFamily,
    dim: usize,
}

impl InteractionKernel {
    pub fn new(family: KernelFamily, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(GasError::invalid("dimension", "must be positive"));
        }
        match family {
            KernelFamily::Riesz { s } => {
                if !(s > 0.0 && s < dim as f64) {
                    return Err(GasError::invalid("kernel.s", format!("s must be < n and > 0 (s = {s}, n = {dim})")));
                }
            }
            KernelFamily::Log => {
                if dim > 2 {
                    return Err(GasError::invalid(
                        "kernel.family",
                        "the log kernel is only supported in dimensions 1 and 2",
                    ));
                }
            }
        }
        Ok(Self { family, dim })
    }

    pub fn riesz(s: f64, dim: usize) -> Result<Self> {
        Self::new(KernelFamily::Riesz { s }, dim)
    }

    pub fn log(dim: usize) -> Result<Self> {
        Self::new(KernelFamily::Log, dim)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_log(&self) -> bool {
        matches!(self.family, KernelFamily::Log)
    }

    /// Radial profile r ↦ g; +∞ at r = 0.
    #[inline]
    pub fn profile(&self, r: f64) -> f64 {
        match self.family {
            KernelFamily::Riesz { s } => {
                if r == 0.0 {
                    f64::INFINITY
                } else {
                    r.powf(-s)
                }
            }
            KernelFamily::Log => -r.ln(),
        }
    }

    /// Radial profile evaluated on a squared distance.
    #[inline]
    pub fn profile_sq(&self, d2: f64) -> f64 {
        match self.family {
            KernelFamily::Riesz { s } => {
                if d2 == 0.0 {
                    f64::INFINITY
                } else if s == 1.0 {
                    1.0 / d2.sqrt()
                } else {
                    d2.powf(-0.5 * s)
                }
            }
            KernelFamily::Log => -0.5 * d2.ln(),
        }
    }

    pub fn eval(&self, u: &[f64], x: &[f64]) -> Result<f64> {
        check_dim(self.dim, u.len())?;
        check_dim(self.dim, x.len())?;
        Ok(self.profile_sq(dist_sq(u, x)))
    }

    /// Truncation split g = min(g, k) + (g − min(g, k)).
    pub fn eval_split(&self, u: &[f64], x: &[f64], k: f64) -> Result<(f64, f64)> {
        if !(k > 0.0) {
            return Err(GasError::invalid("k", "truncation level must be positive"));
        }
        let g = self.eval(u, x)?;
        let low = g.min(k);
        let high = if g.is_infinite() { f64::INFINITY } else { g - low };
        Ok((low, high))
    }

    /// ϑ for this kernel: zero for Riesz kernels (already non-negative).
    #[inline]
    pub fn tilt(&self, x: &[f64]) -> f64 {
        match self.family {
            KernelFamily::Riesz { .. } => 0.0,
            KernelFamily::Log => theta(x),
        }
    }

    #[inline]
    pub fn tilt_radial(&self, r: f64) -> f64 {
        match self.family {
            KernelFamily::Riesz { .. } => 0.0,
            KernelFamily::Log => r.abs().ln_1p(),
        }
    }

    /// ∫ (g − min(g, k))^p dx over ℝⁿ for a Riesz kernel; finite for p < n/s.
    ///
    /// Exact value (nΩₙ/s)·B(n/s − p, p + 1)·k^{−(n/s − p)}.
    pub fn split_tail_norm(&self, k: f64, p: f64) -> Result<f64> {
        let s = match self.family {
            KernelFamily::Riesz { s } => s,
            KernelFamily::Log => {
                return Err(GasError::invalid("kernel.family", "tail norm is only closed-form for Riesz kernels"))
            }
        };
        let n = self.dim as f64;
        if !(p > 0.0 && p < n / s) {
            return Err(GasError::invalid("p", format!("need 0 < p < n/s = {}", n / s)));
        }
        if !(k > 0.0) {
            return Err(GasError::invalid("k", "truncation level must be positive"));
        }
        let c = n * unit_ball_volume(self.dim) / s * beta(n / s - p, p + 1.0);
        Ok(c * k.powf(-(n / s - p)))
    }

    /// Σᵢ g(point, xᵢ) over a flat particle slice, skipping index `skip`.
    ///
    /// The log family multiplies squared distances in blocks of eight into a
    /// running mantissa/exponent pair and takes a single logarithm.
    pub fn field_sum(&self, point: &[f64], others: &[f64], skip: Option<usize>) -> f64 {
        let dim = self.dim;
        let (head, tail) = match skip {
            Some(j) => (&others[..j * dim], &others[(j + 1) * dim..]),
            None => (others, &others[..0]),
        };
        match self.family {
            KernelFamily::Log => {
                let sum_ln = match dim {
                    1 => ln_dist_sq_sum::<1>(point, head) + ln_dist_sq_sum::<1>(point, tail),
                    2 => ln_dist_sq_sum::<2>(point, head) + ln_dist_sq_sum::<2>(point, tail),
                    _ => head.chunks_exact(dim).chain(tail.chunks_exact(dim)).map(|q| dist_sq(point, q).ln()).sum(),
                };
                -0.5 * sum_ln
            }
            KernelFamily::Riesz { .. } => {
                head.chunks_exact(dim).chain(tail.chunks_exact(dim)).map(|q| self.profile_sq(dist_sq(point, q))).sum()
            }
        }
    }
}

/// Splits a positive normal float into (mantissa in [1, 2), binary exponent).
#[inline]
fn split_exponent(x: f64) -> (f64, i64) {
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64 - 1023;
    (f64::from_bits((bits & !(0x7ff << 52)) | (1023 << 52)), exp)
}

/// Σ ln |point − q|² over the points of a flat coordinate slice in ℝ^D.
fn ln_dist_sq_sum<const D: usize>(point: &[f64], coords: &[f64]) -> f64 {
    let p: [f64; D] = point.try_into().expect("point dimension");
    let d2 = |q: &[f64]| -> f64 { (0..D).map(|k| (p[k] - q[k]) * (p[k] - q[k])).sum() };
    let mut mantissa = 1.0;
    let mut exponent: i64 = 0;
    let mut extra = 0.0;
    let chunks = coords.chunks_exact(8 * D);
    let rest = chunks.remainder();
    for block in chunks {
        let mut prod = 1.0;
        for q in block.chunks_exact(D) {
            prod *= d2(q);
        }
        if prod.is_normal() {
            let (m, e) = split_exponent(mantissa * prod);
            mantissa = m;
            exponent += e;
        } else {
            extra += block.chunks_exact(D).map(|q| d2(q).ln()).sum::<f64>();
        }
    }
    extra += rest.chunks_exact(D).map(|q| d2(q).ln()).sum::<f64>();
    mantissa.ln() + exponent as f64 * std::f64::consts::LN_2 + extra
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum PotentialFamily {
    /// V(x) = |x|^α.
    Power { alpha: f64 },
    /// V(x) = |x|²/2.
    Gaussian,
    /// Piecewise-linear profile; signed coordinate in 1D, radius in 2D.
    /// V = +∞ outside the tabulated range.
    Tabulated { grid: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    family: PotentialFamily,
    dim: usize,
}

impl Potential {
    pub fn new(family: PotentialFamily, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(GasError::invalid("dimension", "must be positive"));
        }
        let family = match family {
            PotentialFamily::Power { alpha } => {
                if !(alpha > 0.0 && alpha.is_finite()) {
                    return Err(GasError::invalid("potential.alpha", format!("must be > 0 (got {alpha})")));
                }
                PotentialFamily::Power { alpha }
            }
            PotentialFamily::Gaussian => PotentialFamily::Gaussian,
            PotentialFamily::Tabulated { grid, values } => {
                if grid.len() < 2 || grid.len() != values.len() {
                    return Err(GasError::invalid("potential.grid", "need at least two nodes and one value per node"));
                }
                if grid.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(GasError::invalid("potential.grid", "nodes must be strictly increasing"));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(GasError::invalid("potential.values", "values must be finite"));
                }
                if dim == 2 && grid[0] != 0.0 {
                    return Err(GasError::invalid("potential.grid", "radial tables must start at r = 0"));
                }
                if dim > 2 {
                    return Err(GasError::invalid("dimension", "tabulated potentials support n ≤ 2"));
                }
                // Additive normalization so that V ≥ 0; the Gibbs measure is unchanged.
                let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
                let values = values.into_iter().map(|v| v - min).collect();
                PotentialFamily::Tabulated { grid, values }
            }
        };
        Ok(Self { family, dim })
    }

    pub fn power(alpha: f64, dim: usize) -> Result<Self> {
        Self::new(PotentialFamily::Power { alpha }, dim)
    }

    pub fn gaussian(dim: usize) -> Result<Self> {
        Self::new(PotentialFamily::Gaussian, dim)
    }

    pub fn tabulated(grid: Vec<f64>, values: Vec<f64>, dim: usize) -> Result<Self> {
        Self::new(PotentialFamily::Tabulated { grid, values }, dim)
    }

    pub fn family(&self) -> &PotentialFamily {
        &self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// α for power potentials.
    pub fn power_exponent(&self) -> Option<f64> {
        match self.family {
            PotentialFamily::Power { alpha } => Some(alpha),
            PotentialFamily::Gaussian => None,
            PotentialFamily::Tabulated { .. } => None,
        }
    }

    /// Whether V depends on |x| only.
    pub fn is_radial(&self) -> bool {
        match self.family {
            PotentialFamily::Tabulated { .. } => self.dim == 2,
            _ => true,
        }
    }

    fn interp(grid: &[f64], values: &[f64], t: f64) -> f64 {
        if !(t >= grid[0] && t <= grid[grid.len() - 1]) {
            return f64::INFINITY;
        }
        let k = match grid.partition_point(|g| *g <= t) {
            0 => 0,
            p if p >= grid.len() => grid.len() - 2,
            p => p - 1,
        };
        let w = (t - grid[k]) / (grid[k + 1] - grid[k]);
        values[k] * (1.0 - w) + values[k + 1] * w
    }

    /// V as a function of the radius (radial potentials only).
    pub fn radial(&self, r: f64) -> f64 {
        match &self.family {
            PotentialFamily::Power { alpha } => r.abs().powf(*alpha),
            PotentialFamily::Gaussian => 0.5 * r * r,
            PotentialFamily::Tabulated { grid, values } => Self::interp(grid, values, r),
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.family {
            PotentialFamily::Power { alpha } => {
                if self.dim == 1 {
                    x[0].abs().powf(*alpha)
                } else if *alpha == 2.0 {
                    x.iter().map(|v| v * v).sum()
                } else {
                    norm(x).powf(*alpha)
                }
            }
            PotentialFamily::Gaussian => 0.5 * x.iter().map(|v| v * v).sum::<f64>(),
            PotentialFamily::Tabulated { grid, values } => {
                let t = if self.dim == 1 { x[0] } else { norm(x) };
                Self::interp(grid, values, t)
            }
        }
    }

    pub fn eval_checked(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        Ok(self.eval(x))
    }

    /// Ṽ_κ(x) = V(x) − κ·ϑ(x) for the given kernel's tilt.
    pub fn tilted(&self, kernel: &InteractionKernel, kappa: f64, x: &[f64]) -> f64 {
        self.eval(x) - kappa * kernel.tilt(x)
    }

    fn fd_step(&self) -> f64 {
        match &self.family {
            PotentialFamily::Tabulated { grid, .. } => {
                let h = grid.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
                0.25 * h
            }
            _ => 1e-5,
        }
    }

    fn singular_at_origin(&self, x: &[f64]) -> Result<()> {
        if let PotentialFamily::Power { alpha } = self.family {
            if alpha < 2.0 && x.iter().all(|v| *v == 0.0) {
                return Err(GasError::SingularPoint(format!(
                    "derivatives of |x|^{alpha} are not defined at the origin"
                )));
            }
        }
        Ok(())
    }

    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        self.singular_at_origin(x)?;
        match &self.family {
            PotentialFamily::Power { alpha } => {
                let r = norm(x);
                if r == 0.0 {
                    return Ok(vec![0.0; self.dim]);
                }
                let c = alpha * r.powf(alpha - 2.0);
                Ok(x.iter().map(|v| c * v).collect())
            }
            PotentialFamily::Gaussian => Ok(x.to_vec()),
            PotentialFamily::Tabulated { .. } => {
                let h = self.fd_step();
                let mut g = vec![0.0; self.dim];
                let mut xp = x.to_vec();
                for k in 0..self.dim {
                    xp[k] = x[k] + h;
                    let fp = self.eval(&xp);
                    xp[k] = x[k] - h;
                    let fm = self.eval(&xp);
                    xp[k] = x[k];
                    g[k] = (fp - fm) / (2.0 * h);
                }
                Ok(g)
            }
        }
    }

    /// Hilbert–Schmidt norm of the Hessian of V.
    pub fn hessian_norm(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        self.singular_at_origin(x)?;
        let n = self.dim as f64;
        match &self.family {
            PotentialFamily::Power { alpha } => {
                let r = norm(x);
                if r == 0.0 {
                    // α = 2 exactly: Hessian is 2·I.
                    return Ok(alpha * n.sqrt());
                }
                Ok(alpha * ((alpha - 1.0).powi(2) + n - 1.0).sqrt() * r.powf(alpha - 2.0))
            }
            PotentialFamily::Gaussian => Ok(n.sqrt()),
            PotentialFamily::Tabulated { .. } => {
                let h = 4.0 * self.fd_step();
                if self.dim == 1 {
                    let t = x[0];
                    let d2 = (self.eval(&[t + h]) - 2.0 * self.eval(&[t]) + self.eval(&[t - h])) / (h * h);
                    Ok(d2.abs())
                } else {
                    let r = norm(x).max(h);
                    let d1 = (self.radial(r + h) - self.radial(r - h)) / (2.0 * h);
                    let d2 = (self.radial(r + h) - 2.0 * self.radial(r) + self.radial(r - h)) / (h * h);
                    Ok((d2 * d2 + (n - 1.0) * (d1 / r).powi(2)).sqrt())
                }
            }
        }
    }

    /// ∫ e^{−V} over ℝⁿ (the constant L₀).
    pub fn normalization(&self) -> f64 {
        let n = self.dim as f64;
        match &self.family {
            PotentialFamily::Power { alpha } => n * unit_ball_volume(self.dim) * gamma(n / alpha) / alpha,
            PotentialFamily::Gaussian => (2.0 * std::f64::consts::PI).powf(n / 2.0),
            PotentialFamily::Tabulated { grid, values } => {
                if self.dim == 1 {
                    grid.windows(2)
                        .zip(values.windows(2))
                        .map(|(g, v)| segment_exp_integral(g[0], g[1], v[0], v[1]))
                        .sum()
                } else {
                    let f = |r: f64| 2.0 * std::f64::consts::PI * r * (-self.radial(r)).exp();
                    grid.windows(2).map(|g| quadrature::integrate(&f, g[0], g[1], 1e-14, 1e-12)).sum()
                }
            }
        }
    }
}

/// ∫_a^b e^{−(linear interpolation of va, vb)}.
pub(crate) fn segment_exp_integral(a: f64, b: f64, va: f64, vb: f64) -> f64 {
    let h = b - a;
    let m = (vb - va) / h;
    if (m * h).abs() < 1e-12 {
        h * (-va).exp()
    } else {
        (-va).exp() * (-(-m * h).exp_m1()) / m
    }
}
