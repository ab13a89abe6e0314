use serde::{Deserialize, Serialize};

use super::correlations::estimate_correlations;
use super::edge::{edge_expected_count, gumbel_cdf, EdgeFrame};
use super::sample::{extract_bulk_local, extract_edge_local, PointSample, Window};
use super::stats::{
    chi_square_poisson, count_in_windows, dispersion_test, gap_statistics, ks_test, StatReport, Verdict,
};
use crate::error::{GasError, Result};
use crate::sampler::ParticleSet;

/// Settings of the bulk Poisson analysis around a point E.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BulkSettings {
    /// Significance level of the χ² and KS tests.
    pub level: f64,
    /// Allowed relative error of the mean unit-window count against the reference intensity.
    pub mean_tolerance: f64,
    /// Required ratio of the first R̂⁽²⁾ bin to its plateau.
    pub dip_threshold: f64,
    /// Unit windows tile [−h, h) along the first axis.
    pub count_half_width: f64,
    pub pair_bins: usize,
}

impl Default for BulkSettings {
    fn default() -> Self {
        Self { level: 0.01, mean_tolerance: 0.10, dip_threshold: 0.7, count_half_width: 5.0, pair_bins: 12 }
    }
}

/// Bulk analysis at a point E given the reference intensity ρ = μ(E) of the rescaled process.
#[derive(Debug, Clone, PartialEq)]
pub struct BulkAnalysis {
    pub center: Vec<f64>,
    pub n_particles: usize,
    pub intensity: f64,
    pub settings: BulkSettings,
}

impl BulkAnalysis {
    pub fn new(center: Vec<f64>, n_particles: usize, intensity: f64, settings: BulkSettings) -> Result<Self> {
        if !(intensity > 0.0 && intensity.is_finite()) {
            return Err(GasError::invalid("intensity", format!("must be positive, got {intensity}")));
        }
        if center.is_empty() || n_particles == 0 {
            return Err(GasError::invalid("center", "need a point and at least one particle"));
        }
        Ok(Self { center, n_particles, intensity, settings })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Half-width of the correlation and gap windows: about six mean spacings, at least the count range.
    pub fn analysis_half_width(&self) -> f64 {
        self.settings.count_half_width.max(6.0 / self.intensity)
    }

    /// Largest pair distance binned for R̂⁽²⁾.
    pub fn pair_range(&self) -> f64 {
        3.0 / self.intensity
    }

    fn local_window(&self, extra: f64) -> Window {
        let h = self.analysis_half_width();
        let mut w = Window::cube(self.dim(), h).expect("positive half-width");
        w.hi[0] += extra;
        w
    }

    /// Interval along the first axis, in original coordinates, that the analysis reads.
    pub fn global_range(&self) -> (f64, f64) {
        let w = self.local_window(self.gap_margin());
        let scale = (self.n_particles as f64).powf(1.0 / self.dim() as f64);
        (self.center[0] + w.lo[0] / scale, self.center[0] + w.hi[0] / scale)
    }

    fn gap_margin(&self) -> f64 {
        if self.dim() == 1 {
            20.0 / self.intensity
        } else {
            0.0
        }
    }

    pub fn count_windows(&self) -> Result<Vec<Window>> {
        let h = self.settings.count_half_width;
        let mut lo = vec![-0.5; self.dim()];
        let mut hi = vec![0.5; self.dim()];
        lo[0] = -h;
        hi[0] = h;
        Window::new(lo, hi)?.tiles(1.0)
    }

    pub fn run(&self, configs: &[ParticleSet]) -> Result<StatReport> {
        let s = &self.settings;
        let wide = self.local_window(self.gap_margin());
        let samples: Vec<PointSample> = configs
            .iter()
            .map(|c| extract_bulk_local(c, &self.center, self.n_particles, &wide))
            .collect::<Result<_>>()?;
        let mut report = count_in_windows(&samples, &self.count_windows()?)?;
        let counts = report.pooled_counts();
        let mean = counts.iter().sum::<u64>() as f64 / counts.len() as f64;
        let rel = (mean / self.intensity - 1.0).abs();
        report.verdicts.push(Verdict {
            name: "count_mean".into(),
            statistic: rel,
            p_value: None,
            threshold: s.mean_tolerance,
            passed: rel <= s.mean_tolerance,
        });
        let chi = if mean > 0.0 { chi_square_poisson(&counts, mean, 1).ok() } else { None };
        report.verdicts.push(match chi {
            Some(chi) => Verdict {
                name: "count_chi_square".into(),
                statistic: chi.statistic,
                p_value: Some(chi.p_value),
                threshold: s.level,
                passed: chi.p_value >= s.level,
            },
            None => Verdict {
                name: "count_chi_square".into(),
                statistic: f64::NAN,
                p_value: None,
                threshold: s.level,
                passed: false,
            },
        });
        report.dispersion = Some(dispersion_test(&counts)?);

        if self.dim() == 1 {
            let h = self.analysis_half_width();
            let anchors = Window::interval(-h, h)?;
            let gaps = gap_statistics(&samples, &anchors)?;
            let scaled: Vec<f64> = gaps.iter().map(|g| g * self.intensity).collect();
            let ks = ks_test(&scaled, |x| if x > 0.0 { -(-x).exp_m1() } else { 0.0 })?;
            report.verdicts.push(Verdict {
                name: "gap_ks".into(),
                statistic: ks.statistic,
                p_value: Some(ks.p_value),
                threshold: s.level,
                passed: ks.p_value >= s.level,
            });
            report.ks.push(("gaps_vs_exponential".into(), ks));
            report.gaps = scaled;
        }

        let inner = self.local_window(0.0);
        let trimmed: Vec<PointSample> = samples
            .iter()
            .map(|smp| {
                let coords = smp.points.points().filter(|p| inner.contains(p)).flatten().copied().collect();
                Ok(PointSample {
                    points: ParticleSet::new(self.dim(), coords)?,
                    window: inner.clone(),
                    frame: smp.frame.clone(),
                })
            })
            .collect::<Result<_>>()?;
        let r2 = estimate_correlations(&trimmed, 2, 0.0, self.pair_range(), s.pair_bins)?;
        let dip = r2.dip_ratio();
        report.verdicts.push(Verdict {
            name: "pair_correlation_dip".into(),
            statistic: dip,
            p_value: None,
            threshold: s.dip_threshold,
            passed: dip >= s.dip_threshold,
        });
        let h = self.analysis_half_width();
        report.correlations.push(estimate_correlations(&trimmed, 1, -h, h, 12)?);
        report.correlations.push(r2);
        Ok(report)
    }
}

/// Settings of the edge Poisson analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EdgeSettings {
    /// Family-wise level, split evenly over the thresholds.
    pub level: f64,
    /// Windows are [t, ∞) × [−w, w)^{n−1}.
    pub thresholds: Vec<f64>,
    pub transverse_half_width: f64,
}

impl Default for EdgeSettings {
    fn default() -> Self {
        Self { level: 0.01, thresholds: vec![-1.0, 0.0, 1.0], transverse_half_width: 2.0 }
    }
}

impl EdgeSettings {
    pub fn windows(&self, dim: usize) -> Result<Vec<Window>> {
        self.thresholds
            .iter()
            .map(|t| {
                let mut lo = vec![-self.transverse_half_width; dim];
                let mut hi = vec![self.transverse_half_width; dim];
                lo[0] = *t;
                hi[0] = f64::INFINITY;
                Window::new(lo, hi)
            })
            .collect()
    }
}

/// Counts in [t, ∞) windows of the edge frame against Poisson(∫ e^{−x₁}).
pub fn edge_analysis(configs: &[ParticleSet], frame: &EdgeFrame, settings: &EdgeSettings) -> Result<StatReport> {
    if settings.thresholds.is_empty() {
        return Err(GasError::invalid("thresholds", "need at least one edge window"));
    }
    let windows = settings.windows(frame.dim())?;
    let mut outer = windows[0].clone();
    for w in &windows {
        for d in 0..frame.dim() {
            outer.lo[d] = outer.lo[d].min(w.lo[d]);
        }
    }
    let samples: Vec<PointSample> =
        configs.iter().map(|c| extract_edge_local(c, frame, &outer)).collect::<Result<_>>()?;
    let mut report = count_in_windows(&samples, &windows)?;
    let level = settings.level / windows.len() as f64;
    let mut verdicts = Vec::new();
    for wc in &report.windows {
        let expected = edge_expected_count(&wc.window);
        let t = wc.window.lo[0];
        let chi = chi_square_poisson(&wc.counts, expected, 0)?;
        let verdict = Verdict {
            name: format!("edge_chi_square_t={t}"),
            statistic: chi.statistic,
            p_value: Some(chi.p_value),
            threshold: level,
            passed: chi.p_value >= level,
        };
        verdicts.push(verdict);
    }
    report.verdicts = verdicts;
    Ok(report)
}

/// Settings of the Gumbel analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GumbelSettings {
    /// Largest accepted KS distance to exp(−e^{−t}).
    pub ks_tolerance: f64,
}

impl Default for GumbelSettings {
    fn default() -> Self {
        Self { ks_tolerance: 0.10 }
    }
}

/// KS comparison of ξ_N values with the standard Gumbel law.
pub fn gumbel_analysis(statistics: &[f64], settings: &GumbelSettings) -> Result<StatReport> {
    let ks = ks_test(statistics, gumbel_cdf)?;
    let mut report = StatReport { replicas: statistics.len(), ..Default::default() };
    report.verdicts.push(Verdict {
        name: "gumbel_ks".into(),
        statistic: ks.statistic,
        p_value: Some(ks.p_value),
        threshold: settings.ks_tolerance,
        passed: ks.statistic <= settings.ks_tolerance,
    });
    report.ks.push(("xi_vs_gumbel".into(), ks));
    Ok(report)
}
