use serde::{Deserialize, Serialize};

use super::edge::EdgeFrame;
use crate::error::{GasError, Result};
use crate::sampler::ParticleSet;

/// Axis-aligned box [lo, hi) in ℝⁿ; bounds may be infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Window {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(GasError::DimensionMismatch { expected: lo.len(), got: hi.len() });
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b) || a.is_nan() || b.is_nan()) {
            return Err(GasError::invalid("window", "need lo < hi on every axis"));
        }
        Ok(Self { lo, hi })
    }

    /// [−h, h)ⁿ.
    pub fn cube(dim: usize, half_width: f64) -> Result<Self> {
        Self::new(vec![-half_width; dim], vec![half_width; dim])
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo], vec![hi])
    }

    /// ℝⁿ.
    pub fn everything(dim: usize) -> Self {
        Self { lo: vec![f64::NEG_INFINITY; dim], hi: vec![f64::INFINITY; dim] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (a, b))| *x >= *a && *x < *b)
    }

    pub fn measure(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    /// Side lengths.
    pub fn sides(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).collect()
    }

    /// Consecutive windows of width `width` tiling [lo, hi) along axis 0, sharing the other sides.
    pub fn tiles(&self, width: f64) -> Result<Vec<Window>> {
        let span = self.hi[0] - self.lo[0];
        if !(width > 0.0) || !span.is_finite() {
            return Err(GasError::invalid("width", "tiling needs a positive width and finite first axis"));
        }
        let count = (span / width + 1e-9).floor() as usize;
        Ok((0..count)
            .map(|k| {
                let mut w = self.clone();
                w.lo[0] = self.lo[0] + k as f64 * width;
                w.hi[0] = w.lo[0] + width;
                w
            })
            .collect())
    }
}

/// Record of the rescaling that produced a local sample; enough to map points back.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum FrameRecord {
    /// x ↦ N^{1/n}(x − E).
    Bulk {
        center: Vec<f64>,
        n_particles: usize,
    },
    Edge(EdgeFrame),
}

impl FrameRecord {
    pub fn bulk_scale(n_particles: usize, dim: usize) -> f64 {
        (n_particles as f64).powf(1.0 / dim as f64)
    }

    pub fn to_local(&self, x: &[f64]) -> Vec<f64> {
        match self {
            FrameRecord::Bulk { center, n_particles } => {
                let scale = Self::bulk_scale(*n_particles, center.len());
                x.iter().zip(center).map(|(xi, ei)| scale * (xi - ei)).collect()
            }
            FrameRecord::Edge(frame) => frame.inverse(x),
        }
    }

    pub fn to_global(&self, y: &[f64]) -> Vec<f64> {
        match self {
            FrameRecord::Bulk { center, n_particles } => {
                let scale = Self::bulk_scale(*n_particles, center.len());
                y.iter().zip(center).map(|(yi, ei)| ei + yi / scale).collect()
            }
            FrameRecord::Edge(frame) => frame.map(y),
        }
    }
}

/// Rescaled points of one configuration lying in `window`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSample {
    pub points: ParticleSet,
    pub window: Window,
    pub frame: FrameRecord,
}

impl PointSample {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points mapped back to the original coordinates.
    pub fn to_global(&self) -> ParticleSet {
        let coords = self.points.points().flat_map(|p| self.frame.to_global(p)).collect();
        ParticleSet::new(self.points.dim(), coords).expect("same dimension")
    }

    /// Points of the sample inside a sub-window.
    pub fn count_in(&self, window: &Window) -> usize {
        self.points.points().filter(|p| window.contains(p)).count()
    }
}

fn extract(config: &ParticleSet, frame: FrameRecord, window: &Window) -> Result<PointSample> {
    if window.dim() != config.dim() {
        return Err(GasError::DimensionMismatch { expected: config.dim(), got: window.dim() });
    }
    let mut coords = Vec::new();
    for p in config.points() {
        let y = frame.to_local(p);
        if window.contains(&y) {
            coords.extend(y);
        }
    }
    Ok(PointSample { points: ParticleSet::new(config.dim(), coords)?, window: window.clone(), frame })
}

/// {N^{1/n}(x_j − E)} ∩ window.
pub fn extract_bulk_local(
    config: &ParticleSet,
    center: &[f64],
    n_particles: usize,
    window: &Window,
) -> Result<PointSample> {
    if center.len() != config.dim() {
        return Err(GasError::DimensionMismatch { expected: config.dim(), got: center.len() });
    }
    extract(config, FrameRecord::Bulk { center: center.to_vec(), n_particles }, window)
}

/// {φ_N⁻¹(x_j)} ∩ window.
pub fn extract_edge_local(config: &ParticleSet, frame: &EdgeFrame, window: &Window) -> Result<PointSample> {
    extract(config, FrameRecord::Edge(frame.clone()), window)
}
