use serde::Serialize;

use super::sample::PointSample;
use crate::error::{GasError, Result};
use crate::sampler::mean_stderr;

/// Minimum replica count for correlation estimates.
pub const MIN_CORRELATION_REPLICAS: usize = 100;
/// Bins with fewer pooled counts are flagged as undersampled.
pub const MIN_BIN_COUNT: u64 = 10;

/// R̂⁽¹⁾ over positions along axis 0, or R̂⁽²⁾ over pair distances.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationHistogram {
    pub order: usize,
    pub edges: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub counts: Vec<u64>,
    pub undersampled: Vec<bool>,
    pub replicas: usize,
}

impl CorrelationHistogram {
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Mean over the upper half of the bins.
    pub fn plateau(&self) -> f64 {
        let tail = &self.values[self.values.len() / 2..];
        tail.iter().sum::<f64>() / tail.len() as f64
    }

    /// First bin over plateau; values well below 1 indicate repulsion.
    pub fn dip_ratio(&self) -> f64 {
        self.values[0] / self.plateau()
    }
}

/// ∫∫_{W×W} 1{a ≤ |x − y| < b} dx dy for a box of the given sides, valid while b ≤ the shortest side.
fn pair_measure(sides: &[f64], a: f64, b: f64) -> Result<f64> {
    let shortest = sides.iter().cloned().fold(f64::INFINITY, f64::min);
    if b > shortest {
        return Err(GasError::invalid("bins", format!("pair distance {b} exceeds the window side {shortest}")));
    }
    match sides {
        [l] => Ok(2.0 * ((l * b - 0.5 * b * b) - (l * a - 0.5 * a * a))),
        [w1, w2] => {
            // r ∫₀^{2π} (w1 − r|cos t|)(w2 − r|sin t|) dt integrated over r.
            let p =
                |r: f64| std::f64::consts::PI * w1 * w2 * r * r - 4.0 / 3.0 * (w1 + w2) * r.powi(3) + 0.5 * r.powi(4);
            Ok(p(b) - p(a))
        }
        _ => Err(GasError::DimensionMismatch { expected: 2, got: sides.len() }),
    }
}

/// Histogram estimate of the k-point correlation function (k ∈ {1, 2}) of replica samples sharing one window.
pub fn estimate_correlations(
    samples: &[PointSample],
    k: usize,
    lo: f64,
    hi: f64,
    bins: usize,
) -> Result<CorrelationHistogram> {
    if samples.is_empty() {
        return Err(GasError::EmptySample("no replica samples".into()));
    }
    if samples.len() < MIN_CORRELATION_REPLICAS {
        return Err(GasError::invalid(
            "samples",
            format!("need at least {MIN_CORRELATION_REPLICAS} replicas, got {}", samples.len()),
        ));
    }
    if !(lo < hi) || bins == 0 {
        return Err(GasError::invalid("bins", "need lo < hi and at least one bin"));
    }
    let window = &samples[0].window;
    if samples.iter().any(|s| &s.window != window) {
        return Err(GasError::invalid("samples", "replicas must share one window"));
    }
    let sides = window.sides();
    if sides.iter().any(|s| !s.is_finite()) {
        return Err(GasError::invalid("window", "correlations need a bounded window"));
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|b| lo + b as f64 * width).collect();
    let bin_of = |x: f64| (x >= lo && x < hi).then(|| (((x - lo) / width) as usize).min(bins - 1));

    let measures: Vec<f64> = match k {
        1 => {
            if lo < window.lo[0] || hi > window.hi[0] {
                return Err(GasError::invalid("bins", "intensity bins must lie inside the window"));
            }
            let transverse: f64 = sides[1..].iter().product();
            vec![width * transverse; bins]
        }
        2 => {
            if lo < 0.0 {
                return Err(GasError::invalid("bins", "pair distances are non-negative"));
            }
            edges.windows(2).map(|e| pair_measure(&sides, e[0], e[1])).collect::<Result<_>>()?
        }
        _ => return Err(GasError::invalid("k", format!("only k = 1, 2 are supported, got {k}"))),
    };

    let mut per_replica = vec![Vec::with_capacity(samples.len()); bins];
    let mut counts = vec![0u64; bins];
    for s in samples {
        let mut local = vec![0u64; bins];
        let pts: Vec<&[f64]> = s.points.points().collect();
        if k == 1 {
            for p in &pts {
                if let Some(b) = bin_of(p[0]) {
                    local[b] += 1;
                }
            }
        } else {
            for i in 0..pts.len() {
                for j in i + 1..pts.len() {
                    let r = pts[i].iter().zip(pts[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                    if let Some(b) = bin_of(r) {
                        // Ordered pairs.
                        local[b] += 2;
                    }
                }
            }
        }
        for b in 0..bins {
            counts[b] += local[b];
            per_replica[b].push(local[b] as f64 / measures[b]);
        }
    }
    let mut values = Vec::with_capacity(bins);
    let mut stderr = Vec::with_capacity(bins);
    for series in &per_replica {
        let (m, se) = mean_stderr(series)?;
        values.push(m);
        stderr.push(se);
    }
    Ok(CorrelationHistogram {
        order: k,
        edges,
        values,
        stderr,
        undersampled: counts.iter().map(|c| *c < MIN_BIN_COUNT).collect(),
        counts,
        replicas: samples.len(),
    })
}
