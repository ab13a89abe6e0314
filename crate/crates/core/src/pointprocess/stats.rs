use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::correlations::CorrelationHistogram;
use super::sample::{PointSample, Window};
use crate::error::{GasError, Result};
use crate::sampler::ParticleSet;

/// Minimum replica count for window statistics.
pub const MIN_REPLICAS: usize = 30;
/// Cells of a χ² test are merged until each expects at least this many counts.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub size: usize,
}

/// sup |F̂ − F| for a continuous target CDF.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(GasError::EmptySample("KS statistic of an empty sample".into()));
    }
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let m = xs.len() as f64;
    Ok(xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / m).abs().max((f - (i + 1) as f64 / m).abs())
        })
        .fold(0.0, f64::max))
}

/// Asymptotic Kolmogorov tail with Stephens' small-sample correction.
pub fn kolmogorov_p_value(statistic: f64, size: usize) -> f64 {
    let sqrt_m = (size as f64).sqrt();
    let lambda = (sqrt_m + 0.12 + 0.11 / sqrt_m) * statistic;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut p = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        p += if k % 2 == 1 { 2.0 * term } else { -2.0 * term };
        if term < 1e-16 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

pub fn ks_test(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    let statistic = ks_statistic(sample, cdf)?;
    Ok(KsResult { statistic, p_value: kolmogorov_p_value(statistic, sample.len()), size: sample.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DispersionResult {
    /// Sample variance over sample mean; 0 when the mean is 0.
    pub index: f64,
    /// Two-sided p-value of (m−1)·index against χ²_{m−1}.
    pub p_value: f64,
}

pub fn dispersion_test(counts: &[u64]) -> Result<DispersionResult> {
    if counts.len() < 2 {
        return Err(GasError::EmptySample("dispersion needs at least two counts".into()));
    }
    let (mean, var) = count_moments(counts);
    if mean == 0.0 {
        return Ok(DispersionResult { index: 0.0, p_value: 1.0 });
    }
    let index = var / mean;
    let df = (counts.len() - 1) as f64;
    let chi = ChiSquared::new(df).map_err(|e| GasError::invalid("counts", e.to_string()))?;
    let lower = chi.cdf(df * index);
    Ok(DispersionResult { index, p_value: (2.0 * lower.min(1.0 - lower)).min(1.0) })
}

fn count_moments(counts: &[u64]) -> (f64, f64) {
    let m = counts.len() as f64;
    let mean = counts.iter().sum::<u64>() as f64 / m;
    let var =
        if counts.len() > 1 { counts.iter().map(|c| (*c as f64 - mean).powi(2)).sum::<f64>() / (m - 1.0) } else { 0.0 };
    (mean, var)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    /// Lower ends of the merged cells; the last cell is open above.
    pub cells: Vec<u64>,
    pub observed: Vec<u64>,
    pub expected: Vec<f64>,
}

/// Pearson χ² of the counts against Poisson(mean); `fitted` parameters are removed from the degrees of freedom.
pub fn chi_square_poisson(counts: &[u64], mean: f64, fitted: usize) -> Result<ChiSquareResult> {
    if counts.is_empty() {
        return Err(GasError::EmptySample("no counts".into()));
    }
    if !(mean > 0.0 && mean.is_finite()) {
        return Err(GasError::invalid("mean", format!("must be positive, got {mean}")));
    }
    let total = counts.len() as f64;
    let ln_mean = mean.ln();
    let pmf = |k: u64| (k as f64 * ln_mean - mean - statrs::function::gamma::ln_gamma(k as f64 + 1.0)).exp();

    let mut cells = vec![0u64];
    let mut expected = vec![0.0];
    let mut cumulative = 0.0;
    let mut k = 0u64;
    loop {
        let p = pmf(k);
        cumulative += p;
        *expected.last_mut().unwrap() += total * p;
        let tail = total * (1.0 - cumulative).max(0.0);
        if tail < MIN_EXPECTED {
            *expected.last_mut().unwrap() += tail;
            break;
        }
        if *expected.last().unwrap() >= MIN_EXPECTED {
            cells.push(k + 1);
            expected.push(0.0);
        }
        k += 1;
    }
    // A short final cell joins its neighbour.
    if expected.len() > 1 && *expected.last().unwrap() < MIN_EXPECTED {
        let e = expected.pop().unwrap();
        cells.pop();
        *expected.last_mut().unwrap() += e;
    }
    if expected.len() < 2 + fitted {
        return Err(GasError::Domain(format!("only {} χ² cells with expected count ≥ {MIN_EXPECTED}", expected.len())));
    }
    let mut observed = vec![0u64; cells.len()];
    for c in counts {
        let idx = cells.partition_point(|lo| lo <= c) - 1;
        observed[idx] += 1;
    }
    let statistic = observed.iter().zip(&expected).map(|(o, e)| (*o as f64 - e).powi(2) / e).sum::<f64>();
    let df = cells.len() - 1 - fitted;
    let chi = ChiSquared::new(df as f64).map_err(|e| GasError::invalid("cells", e.to_string()))?;
    Ok(ChiSquareResult { statistic, degrees_of_freedom: df, p_value: chi.sf(statistic), cells, observed, expected })
}

/// Homogeneous Poisson process of the given rate on a bounded window.
pub fn poisson_process<R: Rng + ?Sized>(rate: f64, window: &Window, rng: &mut R) -> Result<ParticleSet> {
    let measure = window.measure();
    if !measure.is_finite() {
        return Err(GasError::invalid("window", "Poisson generator needs a bounded window"));
    }
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(GasError::invalid("rate", format!("must be non-negative, got {rate}")));
    }
    let count = if rate * measure > 0.0 {
        Poisson::new(rate * measure).map_err(|e| GasError::invalid("rate", e.to_string()))?.sample(rng) as usize
    } else {
        0
    };
    let dim = window.dim();
    let mut coords = Vec::with_capacity(count * dim);
    for _ in 0..count {
        for d in 0..dim {
            coords.push(window.lo[d] + rng.random::<f64>() * (window.hi[d] - window.lo[d]));
        }
    }
    ParticleSet::new(dim, coords)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowCounts {
    pub window: Window,
    pub counts: Vec<u64>,
    pub mean: f64,
    pub variance: f64,
    pub dispersion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub statistic: f64,
    pub p_value: Option<f64>,
    pub threshold: f64,
    pub passed: bool,
}

/// Summary of a local point-process analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct StatReport {
    pub replicas: usize,
    pub windows: Vec<WindowCounts>,
    /// Dispersion of all window counts pooled.
    pub dispersion: Option<DispersionResult>,
    pub gaps: Vec<f64>,
    pub ks: Vec<(String, KsResult)>,
    pub correlations: Vec<CorrelationHistogram>,
    pub verdicts: Vec<Verdict>,
}

impl StatReport {
    pub fn all_passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    /// Counts of every window, pooled.
    pub fn pooled_counts(&self) -> Vec<u64> {
        self.windows.iter().flat_map(|w| w.counts.iter().copied()).collect()
    }
}

fn check_replicas(samples: &[PointSample], min: usize) -> Result<()> {
    if samples.is_empty() {
        return Err(GasError::EmptySample("no replica samples".into()));
    }
    if samples.len() < min {
        return Err(GasError::invalid("samples", format!("need at least {min} replicas, got {}", samples.len())));
    }
    Ok(())
}

/// Per-window count statistics over replicas.
pub fn count_in_windows(samples: &[PointSample], windows: &[Window]) -> Result<StatReport> {
    check_replicas(samples, MIN_REPLICAS)?;
    let windows = windows
        .iter()
        .map(|w| {
            let counts: Vec<u64> = samples.iter().map(|s| s.count_in(w) as u64).collect();
            let (mean, variance) = count_moments(&counts);
            let dispersion = if mean > 0.0 { variance / mean } else { 0.0 };
            WindowCounts { window: w.clone(), counts, mean, variance, dispersion }
        })
        .collect();
    Ok(StatReport { replicas: samples.len(), windows, ..Default::default() })
}

/// Sorted forward gaps x_next − x along axis 0, pooled over replicas, for points x in `anchors`.
///
/// The successor may lie outside `anchors` but must be in the sample, so samples should extend past the
/// right end of `anchors`; points without a successor contribute nothing.
pub fn gap_statistics(samples: &[PointSample], anchors: &Window) -> Result<Vec<f64>> {
    check_replicas(samples, MIN_REPLICAS)?;
    if anchors.dim() != 1 || samples[0].points.dim() != 1 {
        return Err(GasError::DimensionMismatch { expected: 1, got: anchors.dim().max(samples[0].points.dim()) });
    }
    let mut gaps = Vec::new();
    for s in samples {
        let mut xs = s.points.coords().to_vec();
        xs.sort_by(f64::total_cmp);
        gaps.extend(xs.windows(2).filter(|w| anchors.contains(&w[..1])).map(|w| w[1] - w[0]));
    }
    if gaps.is_empty() {
        return Err(GasError::EmptySample("no gaps in the anchor window".into()));
    }
    gaps.sort_by(f64::total_cmp);
    Ok(gaps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointprocess::sample::FrameRecord;
    use crate::sampler::replica_rng;

    fn as_sample(points: ParticleSet, window: &Window) -> PointSample {
        PointSample { points, window: window.clone(), frame: FrameRecord::Bulk { center: vec![0.0], n_particles: 1 } }
    }

    #[test]
    fn ks_examples() {
        assert!((ks_statistic(&[0.25, 0.75], |x| x).unwrap() - 0.25).abs() < 1e-15);
        assert!(ks_statistic(&[], |x| x).is_err());
        let mut rng = replica_rng(11, 0);
        let xs: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let r = ks_test(&xs, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(r.statistic < 1.63 / 100.0 && r.p_value > 0.01);
        // Kolmogorov quantiles.
        assert!((kolmogorov_p_value(1.36 / 100.0, 10_000) - 0.05).abs() < 2e-3);
        assert!((kolmogorov_p_value(1.63 / 100.0, 10_000) - 0.01).abs() < 1e-3);
    }

    #[test]
    fn dispersion_examples() {
        let d = dispersion_test(&[3, 3, 3, 3]).unwrap();
        assert_eq!(d.index, 0.0);
        assert!(d.p_value < 1e-6);
        assert_eq!(dispersion_test(&[0, 0, 0]).unwrap().index, 0.0);
        let mut rng = replica_rng(12, 0);
        let pois = Poisson::new(4.0).unwrap();
        let counts: Vec<u64> = (0..5000).map(|_| pois.sample(&mut rng) as u64).collect();
        let d = dispersion_test(&counts).unwrap();
        assert!((d.index - 1.0).abs() < 0.06 && d.p_value > 0.01, "{d:?}");
    }

    #[test]
    fn chi_square_cells() {
        let mut rng = replica_rng(13, 0);
        let pois = Poisson::new(1.3).unwrap();
        let counts: Vec<u64> = (0..2000).map(|_| pois.sample(&mut rng) as u64).collect();
        let r = chi_square_poisson(&counts, 1.3, 0).unwrap();
        assert!(r.expected.iter().all(|e| *e >= MIN_EXPECTED));
        assert!((r.expected.iter().sum::<f64>() - 2000.0).abs() < 1e-6);
        assert_eq!(r.observed.iter().sum::<u64>(), 2000);
        assert!(r.p_value > 0.01, "{r:?}");
        // Wrong mean is rejected.
        assert!(chi_square_poisson(&counts, 1.8, 0).unwrap().p_value < 1e-6);
        // Overdispersed counts are rejected at the fitted mean.
        let mixed: Vec<u64> = counts.iter().enumerate().map(|(i, c)| if i % 2 == 0 { c * 2 } else { 0 }).collect();
        let m = mixed.iter().sum::<u64>() as f64 / 2000.0;
        assert!(chi_square_poisson(&mixed, m, 1).unwrap().p_value < 1e-6);
        assert!(chi_square_poisson(&[0, 0, 1], 0.01, 0).is_err());
    }

    #[test]
    fn grid_points_have_no_dispersion() {
        let window = Window::interval(0.0, 10.0).unwrap();
        let grid = ParticleSet::new(1, (0..10).map(|k| k as f64 + 0.5).collect()).unwrap();
        let samples: Vec<PointSample> = (0..30).map(|_| as_sample(grid.clone(), &window)).collect();
        let report = count_in_windows(&samples, &window.tiles(1.0).unwrap()).unwrap();
        assert_eq!(report.windows.len(), 10);
        assert!(report.windows.iter().all(|w| w.mean == 1.0 && w.dispersion == 0.0));
        assert!(count_in_windows(&samples[..10], std::slice::from_ref(&window)).is_err());
        assert!(matches!(count_in_windows(&[], &[window]), Err(GasError::EmptySample(_))));
    }

    #[test]
    fn synthetic_poisson_round_trip() {
        let window = Window::interval(0.0, 10.0).unwrap();
        let mut rng = replica_rng(14, 0);
        let samples: Vec<PointSample> =
            (0..400).map(|_| as_sample(poisson_process(1.0, &window, &mut rng).unwrap(), &window)).collect();
        let report = count_in_windows(&samples, &window.tiles(1.0).unwrap()).unwrap();
        for w in &report.windows {
            let se = (w.variance / 400.0).sqrt();
            assert!((w.mean - 1.0).abs() < 4.0 * se, "{w:?}");
        }
        let pooled = report.pooled_counts();
        assert!(chi_square_poisson(&pooled, 1.0, 0).unwrap().p_value > 0.01);
        let d = dispersion_test(&pooled).unwrap();
        assert!((d.index - 1.0).abs() < 0.1 && d.p_value > 0.01, "{d:?}");

        // Rate-ρ spacings are Exp(ρ).
        let rho = 2.5;
        let samples: Vec<PointSample> =
            (0..200).map(|_| as_sample(poisson_process(rho, &window, &mut rng).unwrap(), &window)).collect();
        let gaps = gap_statistics(&samples, &Window::interval(0.0, 6.0).unwrap()).unwrap();
        assert!(gaps.windows(2).all(|w| w[0] <= w[1]));
        let scaled: Vec<f64> = gaps.iter().map(|g| rho * g).collect();
        let ks = ks_test(&scaled, |x| 1.0 - (-x).exp()).unwrap();
        assert!(ks.statistic < 1.36 / (scaled.len() as f64).sqrt(), "{ks:?}");
    }

    #[test]
    fn poisson_generator_bounds() {
        let w = Window::new(vec![-1.0, 2.0], vec![1.0, 3.0]).unwrap();
        let mut rng = replica_rng(15, 0);
        let p = poisson_process(50.0, &w, &mut rng).unwrap();
        assert!(p.points().all(|x| w.contains(x)));
        assert!(poisson_process(1.0, &Window::everything(1), &mut rng).is_err());
        assert!(poisson_process(0.0, &w, &mut rng).unwrap().is_empty());
    }
}
