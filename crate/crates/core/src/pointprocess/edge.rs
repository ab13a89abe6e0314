use serde::Serialize;

use crate::error::{GasError, Result};
use crate::kernels::{InteractionKernel, Potential};
use crate::sampler::ParticleSet;

/// Margin above which a frame condition is reported as violated.
pub const DEFAULT_FRAME_THRESHOLD: f64 = 0.5;

fn log_logs(n_particles: f64) -> Result<(f64, f64)> {
    if !(n_particles > std::f64::consts::E) {
        return Err(GasError::Domain(format!("log log N undefined for N = {n_particles}")));
    }
    let l = n_particles.ln();
    Ok((l, l.ln()))
}

fn check_shape(alpha: f64, l_gamma: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(GasError::invalid("alpha", format!("must be positive, got {alpha}")));
    }
    if !(l_gamma > 0.0 && l_gamma.is_finite()) {
        return Err(GasError::invalid("l_gamma", format!("must be positive, got {l_gamma}")));
    }
    Ok(())
}

fn radius(n_particles: f64, alpha: f64, dim: usize, l_gamma: f64, middle: f64) -> Result<f64> {
    check_shape(alpha, l_gamma)?;
    let (l, ll) = log_logs(n_particles)?;
    let correction = 1.0 - middle / (alpha * alpha) * ll / l - (alpha.powi(dim as i32) * l_gamma).ln() / (alpha * l);
    Ok(l.powf(1.0 / alpha) * correction)
}

/// Edge radius η_N of a Riesz gas in V = |x|^α.
pub fn edge_radius_riesz(n_particles: f64, alpha: f64, dim: usize, l_gamma: f64) -> Result<f64> {
    radius(n_particles, alpha, dim, l_gamma, dim as f64 * (alpha - 1.0))
}

/// Edge radius η_N of a log gas in V = |x|^α at coupling βN.
pub fn edge_radius_log(n_particles: f64, alpha: f64, dim: usize, beta_n: f64, l_gamma: f64) -> Result<f64> {
    radius(n_particles, alpha, dim, l_gamma, dim as f64 * (alpha - 1.0) - beta_n)
}

/// Numerical margins of the frame conditions; each tends to 0 as N → ∞.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameMargins {
    /// |N e^{−V(E_N)} / (L α_Nⁿ) − 1|, with the |E_N|^{βN} factor for log gases.
    pub mass_ratio: f64,
    /// 1 / (α_N |E_N|).
    pub zoom: f64,
    /// α_N^{−2} sup ‖∇²V(φ_N(x))‖ over the default edge window.
    pub curvature: f64,
    /// N⁻¹ log α_N (log gases only).
    pub log_scale: Option<f64>,
}

/// Affine chart φ_N(x) = E_N + α_N⁻¹ψ(x) around the edge point E_N = η_N υ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeFrame {
    pub n_particles: usize,
    pub alpha: f64,
    pub beta_n: f64,
    pub l_gamma: f64,
    pub eta: f64,
    pub alpha_n: f64,
    pub upsilon: Vec<f64>,
    /// Row-major n×n rotation with ψ(e₁) = υ.
    pub rotation: Vec<f64>,
    pub log_gas: bool,
    pub margins: FrameMargins,
}

/// Rotation in SO(n) sending e₁ to the unit vector υ: a Householder reflection composed with a sign flip.
pub fn edge_rotation(upsilon: &[f64]) -> Result<Vec<f64>> {
    let n = upsilon.len();
    let norm = upsilon.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n == 0 || (norm - 1.0).abs() > 1e-10 {
        return Err(GasError::invalid("upsilon", format!("must be a unit vector, |υ| = {norm}")));
    }
    let mut rot = vec![0.0; n * n];
    for i in 0..n {
        rot[i * n + i] = 1.0;
    }
    if n == 1 {
        rot[0] = upsilon[0].signum();
        return Ok(rot);
    }
    let mut v = upsilon.iter().map(|u| -u).collect::<Vec<_>>();
    v[0] += 1.0;
    let vv: f64 = v.iter().map(|x| x * x).sum();
    if vv < 1e-24 {
        return Ok(rot);
    }
    // (I − 2vvᵀ/vᵀv) · diag(1, …, 1, −1)
    for i in 0..n {
        for j in 0..n {
            let h = if i == j { 1.0 } else { 0.0 } - 2.0 * v[i] * v[j] / vv;
            rot[i * n + j] = if j == n - 1 { -h } else { h };
        }
    }
    Ok(rot)
}

impl EdgeFrame {
    /// Builds the frame and evaluates its condition margins without enforcing them.
    pub fn new(
        pot: &Potential,
        kernel: &InteractionKernel,
        n_particles: usize,
        beta_n: f64,
        l_gamma: f64,
        upsilon: &[f64],
    ) -> Result<Self> {
        let alpha =
            pot.power_exponent().ok_or_else(|| GasError::invalid("potential", "edge frames need a power potential"))?;
        let dim = pot.dim();
        if upsilon.len() != dim || kernel.dim() != dim {
            return Err(GasError::DimensionMismatch { expected: dim, got: upsilon.len() });
        }
        let n = n_particles as f64;
        let log_gas = kernel.is_log();
        let eta = if log_gas {
            edge_radius_log(n, alpha, dim, beta_n, l_gamma)?
        } else {
            edge_radius_riesz(n, alpha, dim, l_gamma)?
        };
        if !(eta > 0.0) {
            return Err(GasError::Domain(format!("edge radius η_N = {eta} is not positive at N = {n_particles}")));
        }
        let alpha_n = alpha * eta.powf(alpha - 1.0);
        let rotation = edge_rotation(upsilon)?;

        let mut log_ratio = n.ln() - eta.powf(alpha) - l_gamma.ln() - dim as f64 * alpha_n.ln();
        if log_gas {
            log_ratio += beta_n * eta.ln();
        }
        let mut frame = Self {
            n_particles,
            alpha,
            beta_n,
            l_gamma,
            eta,
            alpha_n,
            upsilon: upsilon.to_vec(),
            rotation,
            log_gas,
            margins: FrameMargins {
                mass_ratio: (log_ratio.exp() - 1.0).abs(),
                zoom: 1.0 / (alpha_n * eta),
                curvature: 0.0,
                log_scale: log_gas.then(|| alpha_n.ln() / n),
            },
        };
        frame.margins.curvature = frame.curvature_margin(pot)?;
        Ok(frame)
    }

    fn curvature_margin(&self, pot: &Potential) -> Result<f64> {
        let dim = self.dim();
        // Corners and midpoints of [−1, 6] × [−2, 2]^{n−1}.
        let axis0 = [-1.0, 0.0, 2.5, 6.0];
        let other = [-2.0, 0.0, 2.0];
        let mut sup: f64 = 0.0;
        let combos = axis0.len() * other.len().pow(dim as u32 - 1);
        for c in 0..combos {
            let mut x = vec![axis0[c % axis0.len()]];
            let mut rest = c / axis0.len();
            for _ in 1..dim {
                x.push(other[rest % other.len()]);
                rest /= other.len();
            }
            sup = sup.max(pot.hessian_norm(&self.map(&x))?);
        }
        Ok(sup / (self.alpha_n * self.alpha_n))
    }

    /// Fails with the first condition whose margin exceeds `threshold`.
    pub fn verify(&self, threshold: f64) -> Result<()> {
        let m = &self.margins;
        let checks = [
            (if self.log_gas { "c4" } else { "c1" }, m.mass_ratio),
            ("c1", m.zoom),
            ("c2", m.curvature),
            ("c4", m.log_scale.unwrap_or(0.0).abs()),
        ];
        for (condition, margin) in checks {
            if !(margin <= threshold) {
                return Err(GasError::FrameCondition { condition, margin, threshold });
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.upsilon.len()
    }

    /// E_N = η_N υ.
    pub fn center(&self) -> Vec<f64> {
        self.upsilon.iter().map(|u| self.eta * u).collect()
    }

    pub fn rotate(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n).map(|i| (0..n).map(|j| self.rotation[i * n + j] * x[j]).sum()).collect()
    }

    pub fn rotate_back(&self, y: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n).map(|j| (0..n).map(|i| self.rotation[i * n + j] * y[i]).sum()).collect()
    }

    /// φ_N(x).
    pub fn map(&self, x: &[f64]) -> Vec<f64> {
        self.rotate(x).into_iter().zip(&self.upsilon).map(|(r, u)| self.eta * u + r / self.alpha_n).collect()
    }

    /// φ_N⁻¹(y).
    pub fn inverse(&self, y: &[f64]) -> Vec<f64> {
        let shifted: Vec<f64> = y.iter().zip(&self.upsilon).map(|(yi, u)| self.alpha_n * (yi - self.eta * u)).collect();
        self.rotate_back(&shifted)
    }
}

/// Edge frame for V = |x|^α with the kernel deciding between the Riesz and log radius; margins above
/// [`DEFAULT_FRAME_THRESHOLD`] are errors.
pub fn build_edge_frame(
    pot: &Potential,
    kernel: &InteractionKernel,
    n_particles: usize,
    beta_n: f64,
    l_gamma: f64,
    upsilon: &[f64],
) -> Result<EdgeFrame> {
    let frame = EdgeFrame::new(pot, kernel, n_particles, beta_n, l_gamma, upsilon)?;
    frame.verify(DEFAULT_FRAME_THRESHOLD)?;
    Ok(frame)
}

/// Limiting edge intensity e^{−x₁} in frame coordinates.
pub fn edge_intensity(x: &[f64]) -> f64 {
    (-x[0]).exp()
}

/// ∫_W e^{−x₁} dx for a box W with finite transverse sides.
pub fn edge_expected_count(window: &super::Window) -> f64 {
    let along = (-window.lo[0]).exp() - (-window.hi[0]).exp();
    window.sides()[1..].iter().product::<f64>() * along
}

/// ξ_N = 2(√(log N)·m − log N) − ((βN − 1)/2) log log N + log(2L).
pub fn gumbel_statistic_from_max(max: f64, n_particles: f64, beta_n: f64, l_gamma: f64) -> Result<f64> {
    let (l, ll) = log_logs(n_particles)?;
    if !(l_gamma > 0.0) {
        return Err(GasError::invalid("l_gamma", format!("must be positive, got {l_gamma}")));
    }
    Ok(2.0 * (l.sqrt() * max - l) - 0.5 * (beta_n - 1.0) * ll + (2.0 * l_gamma).ln())
}

/// ξ_N of a one-dimensional configuration.
pub fn gumbel_statistic(config: &ParticleSet, n_particles: usize, beta_n: f64, l_gamma: f64) -> Result<f64> {
    if config.dim() != 1 {
        return Err(GasError::DimensionMismatch { expected: 1, got: config.dim() });
    }
    let max = config.max_coord(0).ok_or_else(|| GasError::EmptySample("no particles".into()))?;
    gumbel_statistic_from_max(max, n_particles as f64, beta_n, l_gamma)
}

/// Standard Gumbel CDF exp(−e^{−t}).
pub fn gumbel_cdf(t: f64) -> f64 {
    (-(-t).exp()).exp()
}
