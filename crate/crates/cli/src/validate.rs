use std::fmt;

use mfgas_core::equilibrium::truncation_interval;
use mfgas_core::pointprocess::{MIN_CORRELATION_REPLICAS, MIN_REPLICAS};
use mfgas_core::{theta, GasError};
use serde::Serialize;

use crate::config::{Analysis, ExperimentConfig, KernelKind, Method, PotentialKind, Record};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// A problem with a configuration, keyed by the dotted name of the offending setting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    pub severity: Severity,
    pub key: String,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{tag}: {}: {}", self.key, self.message)
    }
}

#[derive(Default)]
struct Findings(Vec<Finding>);

impl Findings {
    fn error(&mut self, key: &str, message: impl Into<String>) {
        self.0.push(Finding { severity: Severity::Error, key: key.into(), message: message.into() });
    }

    fn warn(&mut self, key: &str, message: impl Into<String>) {
        self.0.push(Finding { severity: Severity::Warning, key: key.into(), message: message.into() });
    }

    fn gas_error(&mut self, fallback: &str, e: GasError) {
        match e {
            GasError::InvalidParameter { name, reason } => {
                let key = if name.contains('.') { name.to_string() } else { format!("{fallback}.{name}") };
                self.error(&key, reason)
            }
            other => self.error(fallback, other.to_string()),
        }
    }
}

pub fn has_errors(findings: &[Finding]) -> bool {
    findings.iter().any(|f| f.severity == Severity::Error)
}

/// Every check that can be made before running anything. Returns no findings for a well-formed config.
pub fn validate(c: &ExperimentConfig) -> Vec<Finding> {
    let mut out = Findings::default();
    let dim = c.kernel.dim;

    let kernel = match c.kernel() {
        Ok(k) => Some(k),
        Err(e) => {
            if c.kernel.family == KernelKind::Riesz && c.kernel.s.is_none() {
                out.error("kernel.s", "the Riesz kernel needs an exponent s");
            } else {
                out.gas_error("kernel", e);
            }
            None
        }
    };
    if c.kernel.family == KernelKind::Log && c.kernel.s.is_some() {
        out.warn("kernel.s", "ignored by the log kernel");
    }
    let potential = match c.potential() {
        Ok(p) => Some(p),
        Err(e) => {
            if c.potential.family == PotentialKind::Power && c.potential.alpha.is_none() {
                out.error("potential.alpha", "power potentials need an exponent alpha");
            } else {
                out.gas_error("potential", e);
            }
            None
        }
    };

    if !(c.gas.gamma >= 0.0 && c.gas.gamma.is_finite()) {
        out.error("gas.gamma", format!("must be finite and ≥ 0 (got {})", c.gas.gamma));
    }
    if c.gas.n.is_empty() {
        out.error("gas.n", "need at least one particle count");
    }
    if c.gas.n.iter().any(|&n| n < 2) {
        out.error("gas.n", "every particle count must be at least 2");
    }
    if let Some(b) = c.gas.beta {
        if !(b >= 0.0 && b.is_finite()) {
            out.error("gas.beta", format!("must be finite and ≥ 0 (got {b})"));
        }
    }
    let max_coupling = c.gas.n.iter().map(|&n| c.coupling(n)).fold(0.0, f64::max);

    let eq = &c.equilibrium;
    if eq.cells < 2 {
        out.error("equilibrium.cells", "need at least two cells");
    }
    if !(eq.tol > 0.0) {
        out.error("equilibrium.tol", "must be positive");
    }
    if !(eq.damping > 0.0 && eq.damping <= 1.0) {
        out.error("equilibrium.damping", "must lie in (0, 1]");
    }
    if eq.max_iter == 0 {
        out.error("equilibrium.max_iter", "must be positive");
    }
    if dim > 2 {
        out.error("kernel.dim", "equilibrium solves support dimensions 1 and 2");
    }
    if let (Some(k), Some(p)) = (&kernel, &potential) {
        if dim == 2 && !p.is_radial() {
            out.error("potential", "two-dimensional solves need a radial potential");
        }
        if let Some([lo, hi]) = eq.domain {
            if dim != 1 {
                out.error("equilibrium.domain", "explicit domains are one-dimensional");
            } else if !(lo < hi) {
                out.error("equilibrium.domain", "need lo < hi");
            } else if let Ok((a, b)) = truncation_interval(k, p, max_coupling, 1e-12) {
                if lo > a || hi < b {
                    out.warn(
                        "equilibrium.domain",
                        format!("[{lo}, {hi}] cuts the tails of e^(-V); mass up to 1e-12 needs [{a:.3}, {b:.3}]"),
                    );
                }
            }
        }
        if k.is_log() {
            if let PotentialKind::Tabulated = c.potential.family {
                growth_check(c, max_coupling, &mut out);
            }
        }
    }

    let s = &c.sampler;
    let configurations = s.replicas as u64 * s.frames;
    if s.replicas < MIN_REPLICAS {
        out.error("sampler.replicas", format!("need at least {MIN_REPLICAS}"));
    }
    if s.frames == 0 {
        out.error("sampler.frames", "must be positive");
    }
    if s.thin_sweeps == 0 {
        out.error("sampler.thin_sweeps", "must be positive");
    }
    if s.record == Record::Top && s.top_k == 0 {
        out.error("sampler.top_k", "must be positive");
    }
    for &n in &c.gas.n {
        let beta = c.beta(n);
        match (s.method, c.resolved_method(n)) {
            (_, Method::Tridiag) if !c.is_gaussian_log_gas() => {
                out.error("sampler.method", "the tridiagonal model samples only the 1D log gas in V = x^2")
            }
            (_, Method::Tridiag) if beta <= 0.0 => {
                out.error("sampler.method", "the tridiagonal model needs β > 0; use iid for β = 0")
            }
            (_, Method::Iid) if beta != 0.0 => {
                out.error("sampler.method", format!("i.i.d. sampling is exact only at β = 0 (β = {beta} at N = {n})"))
            }
            _ => {}
        }
    }

    let analyses = &c.stats.analyses;
    if analyses.contains(&Analysis::Bulk) {
        if s.record == Record::Top {
            out.error("sampler.record", "top-k records do not cover the bulk windows");
        }
        if configurations < MIN_CORRELATION_REPLICAS as u64 {
            out.error("sampler.replicas", format!("bulk correlations need {MIN_CORRELATION_REPLICAS} configurations"));
        }
        if c.bulk_center().len() != dim {
            out.error("bulk.center", format!("must have {dim} coordinates"));
        }
    }
    if analyses.contains(&Analysis::Edge) {
        if c.potential.family != PotentialKind::Power {
            out.error("potential.family", "edge frames are defined for V = |x|^alpha");
        }
        let u = c.upsilon();
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if u.len() != dim || (norm - 1.0).abs() > 1e-9 {
            out.error("edge.upsilon", format!("must be a unit vector with {dim} coordinates"));
        }
        if c.edge.settings.thresholds.is_empty() {
            out.error("edge.thresholds", "need at least one window");
        }
    }
    if analyses.contains(&Analysis::Gumbel) {
        let zero_beta = c.gas.n.iter().all(|&n| c.beta(n) == 0.0);
        let quadratic_line = dim == 1 && c.potential.family == PotentialKind::Power && c.potential.alpha == Some(2.0);
        if !quadratic_line || !(c.kernel.family == KernelKind::Log || zero_beta) {
            out.error("stats.analyses", "the Gumbel statistic is defined for the 1D log gas in V = x^2");
        }
    }
    if analyses.contains(&Analysis::Density) {
        let d = &c.density;
        if dim != 1 {
            out.error("stats.analyses", "density histograms are one-dimensional");
        }
        if s.record != Record::All {
            out.error("sampler.record", "density histograms need every particle (record = \"all\")");
        }
        if !(d.lo < d.hi) || d.bins == 0 {
            out.error("density.bins", "need lo < hi and at least one bin");
        }
    }
    if analyses.contains(&Analysis::Partition) {
        let p = &c.partition;
        if p.replicas < 30 {
            out.error("partition.replicas", "need at least 30");
        }
        if p.frames == 0 || p.draws_per_frame == 0 {
            out.error("partition.frames", "need at least one frame and one draw per frame");
        }
    }
    out.0
}

/// Log gases need V − κ log(1 + |x|) bounded below and ∫|x|^κ e^{−V} finite for every κ ≥ 0.
/// A table that rises only logarithmically toward its ends suggests a profile that violates this once the
/// cutoff is removed.
fn growth_check(c: &ExperimentConfig, coupling: f64, out: &mut Findings) {
    let (Some(grid), Some(values)) = (&c.potential.grid, &c.potential.values) else { return };
    if grid.len() < 2 || grid.len() != values.len() {
        return;
    }
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let ends: &[usize] = if c.kernel.dim == 1 { &[0, grid.len() - 1] } else { &[grid.len() - 1] };
    for &i in ends {
        let t = theta(&[grid[i]]);
        if t == 0.0 {
            continue;
        }
        let rate = (values[i] - min) / t;
        if rate < coupling + 2.0 {
            out.warn(
                "potential.values",
                format!(
                    "slow growth at x = {}: (V - min V)/log(1+|x|) = {rate:.3}; the growth condition for log \
                     gases (V - κ log(1+|x|) bounded below and finite moments of e^(-V) for all κ ≥ 0) \
                     holds only because of the table cutoff",
                    grid[i]
                ),
            );
        }
    }
}
