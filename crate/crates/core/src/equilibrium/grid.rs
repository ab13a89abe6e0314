use serde::{Deserialize, Serialize};

use crate::error::{GasError, Result};

/// Cell layout of a discretized density. Densities are constant on cells and
/// nodes sit at cell midpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GridGeometry {
    /// Uniform cells on [lo, hi] ⊂ ℝ.
    Line { lo: f64, hi: f64, cells: usize },
    /// Uniform annuli of the disc of radius `r_max` in ℝ²; radial densities only.
    Radial { r_max: f64, cells: usize },
    /// Uniform rectangles of [lo₀, hi₀] × [lo₁, hi₁].
    Tensor { lo: [f64; 2], hi: [f64; 2], cells: [usize; 2] },
}

impl GridGeometry {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: &str| Err(GasError::invalid("grid", reason.to_string()));
        match *self {
            GridGeometry::Line { lo, hi, cells } => {
                if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
                    return bad("need finite lo < hi");
                }
                if cells < 2 {
                    return bad("need at least two cells");
                }
            }
            GridGeometry::Radial { r_max, cells } => {
                if !(r_max > 0.0 && r_max.is_finite()) {
                    return bad("need a finite positive radius");
                }
                if cells < 2 {
                    return bad("need at least two cells");
                }
            }
            GridGeometry::Tensor { lo, hi, cells } => {
                for k in 0..2 {
                    if !(hi[k] > lo[k]) || !lo[k].is_finite() || !hi[k].is_finite() {
                        return bad("need finite lo < hi on both axes");
                    }
                    if cells[k] < 2 {
                        return bad("need at least two cells per axis");
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            GridGeometry::Line { .. } => 1,
            _ => 2,
        }
    }

    pub fn len(&self) -> usize {
        match *self {
            GridGeometry::Line { cells, .. } | GridGeometry::Radial { cells, .. } => cells,
            GridGeometry::Tensor { cells, .. } => cells[0] * cells[1],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The same domain with twice as many cells per axis.
    pub fn refined(&self) -> Self {
        match *self {
            GridGeometry::Line { lo, hi, cells } => GridGeometry::Line { lo, hi, cells: 2 * cells },
            GridGeometry::Radial { r_max, cells } => GridGeometry::Radial { r_max, cells: 2 * cells },
            GridGeometry::Tensor { lo, hi, cells } => {
                GridGeometry::Tensor { lo, hi, cells: [2 * cells[0], 2 * cells[1]] }
            }
        }
    }

    /// Cell widths: h for lines and annuli, (h₀, h₁) for rectangles.
    pub fn spacing(&self) -> [f64; 2] {
        match *self {
            GridGeometry::Line { lo, hi, cells } => {
                let h = (hi - lo) / cells as f64;
                [h, h]
            }
            GridGeometry::Radial { r_max, cells } => {
                let h = r_max / cells as f64;
                [h, h]
            }
            GridGeometry::Tensor { lo, hi, cells } => {
                [(hi[0] - lo[0]) / cells[0] as f64, (hi[1] - lo[1]) / cells[1] as f64]
            }
        }
    }

    /// Interval of cell `i` (line), radial shell (radial) or the x-range (tensor).
    pub fn cell_bounds(&self, i: usize) -> (f64, f64) {
        let [h, _] = self.spacing();
        match *self {
            GridGeometry::Line { lo, .. } => (lo + i as f64 * h, lo + (i + 1) as f64 * h),
            GridGeometry::Radial { .. } => (i as f64 * h, (i + 1) as f64 * h),
            GridGeometry::Tensor { lo, cells, .. } => {
                let ix = i / cells[1];
                (lo[0] + ix as f64 * h, lo[0] + (ix + 1) as f64 * h)
            }
        }
    }

    /// Rectangle of tensor cell `i` as ([x₀, x₁], [y₀, y₁]).
    pub fn rect(&self, i: usize) -> ([f64; 2], [f64; 2]) {
        match *self {
            GridGeometry::Tensor { lo, cells, .. } => {
                let [h0, h1] = self.spacing();
                let (ix, iy) = (i / cells[1], i % cells[1]);
                (
                    [lo[0] + ix as f64 * h0, lo[0] + (ix + 1) as f64 * h0],
                    [lo[1] + iy as f64 * h1, lo[1] + (iy + 1) as f64 * h1],
                )
            }
            _ => {
                let (a, b) = self.cell_bounds(i);
                ([a, b], [0.0, 0.0])
            }
        }
    }

    pub fn measure(&self, i: usize) -> f64 {
        let [h0, h1] = self.spacing();
        match self {
            GridGeometry::Line { .. } => h0,
            GridGeometry::Radial { .. } => {
                let (a, b) = self.cell_bounds(i);
                std::f64::consts::PI * (b * b - a * a)
            }
            GridGeometry::Tensor { .. } => h0 * h1,
        }
    }

    /// Representative node of cell `i` as a point of ℝⁿ (radial nodes lie on the positive x-axis).
    pub fn node(&self, i: usize) -> Vec<f64> {
        match self {
            GridGeometry::Line { .. } => {
                let (a, b) = self.cell_bounds(i);
                vec![0.5 * (a + b)]
            }
            GridGeometry::Radial { .. } => {
                let (a, b) = self.cell_bounds(i);
                vec![0.5 * (a + b), 0.0]
            }
            GridGeometry::Tensor { .. } => {
                let (x, y) = self.rect(i);
                vec![0.5 * (x[0] + x[1]), 0.5 * (y[0] + y[1])]
            }
        }
    }

    /// Index of the cell containing x, if any.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        let [h0, h1] = self.spacing();
        let idx = |t: f64, lo: f64, h: f64, n: usize| -> Option<usize> {
            let k = ((t - lo) / h).floor();
            if k >= 0.0 && (k as usize) < n {
                Some(k as usize)
            } else if t == lo + n as f64 * h {
                Some(n - 1)
            } else {
                None
            }
        };
        match *self {
            GridGeometry::Line { lo, cells, .. } => idx(x[0], lo, h0, cells),
            GridGeometry::Radial { cells, .. } => idx(crate::kernels::norm(x), 0.0, h0, cells),
            GridGeometry::Tensor { lo, cells, .. } => {
                let i = idx(x[0], lo[0], h0, cells[0])?;
                let j = idx(x[1], lo[1], h1, cells[1])?;
                Some(i * cells[1] + j)
            }
        }
    }
}

/// A probability density that is constant on the cells of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    geometry: GridGeometry,
    values: Vec<f64>,
    measures: Vec<f64>,
}

impl DensityGrid {
    /// Uniform density on the grid's domain.
    pub fn new(geometry: GridGeometry) -> Result<Self> {
        geometry.validate()?;
        let measures: Vec<f64> = (0..geometry.len()).map(|i| geometry.measure(i)).collect();
        let total: f64 = measures.iter().sum();
        let values = vec![1.0 / total; geometry.len()];
        Ok(Self { geometry, values, measures })
    }

    /// Density from per-node values, renormalized to mass 1.
    pub fn from_values(geometry: GridGeometry, values: Vec<f64>) -> Result<Self> {
        let mut grid = Self::new(geometry)?;
        if values.len() != grid.len() {
            return Err(GasError::DimensionMismatch { expected: grid.len(), got: values.len() });
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(GasError::invalid("density", "values must be finite and non-negative"));
        }
        grid.values = values;
        grid.normalize()?;
        Ok(grid)
    }

    /// Density from a function evaluated at the nodes, renormalized.
    pub fn from_fn(geometry: GridGeometry, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..geometry.len()).map(|i| f(&geometry.node(i))).collect();
        Self::from_values(geometry, values)
    }

    pub(crate) fn from_raw(geometry: GridGeometry, values: Vec<f64>) -> Self {
        let measures = (0..geometry.len()).map(|i| geometry.measure(i)).collect();
        Self { geometry, values, measures }
    }

    pub fn normalize(&mut self) -> Result<()> {
        let m = self.mass();
        if !(m > 0.0 && m.is_finite()) {
            return Err(GasError::invalid("density", "total mass must be positive and finite"));
        }
        self.values.iter_mut().for_each(|v| *v /= m);
        Ok(())
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn dim(&self) -> usize {
        self.geometry.dim()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn measures(&self) -> &[f64] {
        &self.measures
    }

    fn measure(&self, i: usize) -> f64 {
        self.measures[i]
    }

    pub fn node(&self, i: usize) -> Vec<f64> {
        self.geometry.node(i)
    }

    pub fn mass(&self) -> f64 {
        (0..self.len()).map(|i| self.values[i] * self.measure(i)).sum()
    }

    /// Mass of cell `i`.
    pub fn cell_mass(&self, i: usize) -> f64 {
        self.values[i] * self.measure(i)
    }

    /// ∫ f dμ with f sampled at the nodes.
    pub fn integrate_nodes(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        (0..self.len()).map(|i| self.cell_mass(i) * f(&self.node(i))).sum()
    }

    /// Density at x, interpolated linearly between nodes on lines and radial grids.
    pub fn density_at(&self, x: &[f64]) -> f64 {
        let Some(i) = self.geometry.locate(x) else {
            return 0.0;
        };
        match self.geometry {
            GridGeometry::Tensor { .. } => self.values[i],
            _ => {
                let t = if self.dim() == 1 { x[0] } else { crate::kernels::norm(x) };
                let c = self.node(i)[0];
                let j = if t >= c { i + 1 } else { i.wrapping_sub(1) };
                if j >= self.len() {
                    return self.values[i];
                }
                let cj = self.node(j)[0];
                let w = (t - c) / (cj - c);
                self.values[i] * (1.0 - w) + self.values[j] * w
            }
        }
    }

    /// μ([a, b]) for line grids, μ({a ≤ |x| ≤ b}) for radial grids.
    pub fn mass_in(&self, a: f64, b: f64) -> f64 {
        if let GridGeometry::Tensor { .. } = self.geometry {
            return (0..self.len())
                .filter(|&i| {
                    let r = crate::kernels::norm(&self.node(i));
                    r >= a && r <= b
                })
                .map(|i| self.cell_mass(i))
                .sum();
        }
        let mut total = 0.0;
        for i in 0..self.len() {
            let (lo, hi) = self.geometry.cell_bounds(i);
            let (l, h) = (lo.max(a), hi.min(b));
            if h > l {
                let frac = match self.geometry {
                    GridGeometry::Radial { .. } => (h * h - l * l) / (hi * hi - lo * lo),
                    _ => (h - l) / (hi - lo),
                };
                total += self.cell_mass(i) * frac;
            }
        }
        total
    }
}
