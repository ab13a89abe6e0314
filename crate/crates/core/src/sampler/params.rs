use crate::error::{GasError, Result};
use crate::kernels::{InteractionKernel, Potential};

/// Model parameters of an N-particle gas. By default β = γ/N exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct GasParameters {
    n: usize,
    gamma: f64,
    beta: f64,
    kernel: InteractionKernel,
    potential: Potential,
}

impl GasParameters {
    pub fn new(n: usize, gamma: f64, kernel: InteractionKernel, potential: Potential) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(GasError::invalid("gamma", format!("must be finite and non-negative (got {gamma})")));
        }
        if kernel.dim() != potential.dim() {
            return Err(GasError::DimensionMismatch { expected: kernel.dim(), got: potential.dim() });
        }
        let beta = if n == 0 { 0.0 } else { gamma / n as f64 };
        Ok(Self { n, gamma, beta, kernel, potential })
    }

    /// Replaces the coupling so that βN ≠ γ is possible; γ is kept as a label.
    pub fn with_beta(mut self, beta: f64) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(GasError::invalid("beta", format!("must be finite and non-negative (got {beta})")));
        }
        self.beta = beta;
        Ok(self)
    }

    /// Same coupling β with a different particle count.
    pub fn with_particles(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn beta_n(&self) -> f64 {
        self.beta * self.n as f64
    }

    pub fn kernel(&self) -> &InteractionKernel {
        &self.kernel
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }
}

/// An unordered set of points in ℝⁿ stored as a flat coordinate array.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParticleSet {
    dim: usize,
    pub(crate) coords: Vec<f64>,
}

impl ParticleSet {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || !coords.len().is_multiple_of(dim) {
            return Err(GasError::invalid("positions", "coordinate count must be a multiple of the dimension"));
        }
        Ok(Self { dim, coords })
    }

    pub fn empty(dim: usize) -> Self {
        Self { dim, coords: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim.max(1))
    }

    /// Largest value of coordinate `axis`.
    pub fn max_coord(&self, axis: usize) -> Option<f64> {
        self.points().map(|p| p[axis]).fold(None, |m, v| Some(m.map_or(v, |m: f64| m.max(v))))
    }

    /// The `k` points with the largest coordinate `axis`, in decreasing order.
    pub fn top(&self, axis: usize, k: usize) -> ParticleSet {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.point(b)[axis].total_cmp(&self.point(a)[axis]));
        let coords = idx.iter().take(k).flat_map(|&i| self.point(i).iter().copied()).collect();
        ParticleSet { dim: self.dim, coords }
    }
}
