use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use super::mcmc::replica_rng;
use crate::error::{GasError, Result};

/// Shifts evaluated per Sturm pass.
const LANES: usize = 8;

/// Symmetric tridiagonal matrix: `diag` of length N, `off` of length N−1.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl Tridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if off.len() + 1 != diag.len() && !(diag.is_empty() && off.is_empty()) {
            return Err(GasError::DimensionMismatch { expected: diag.len().saturating_sub(1), got: off.len() });
        }
        if diag.iter().chain(&off).any(|v| !v.is_finite()) {
            return Err(GasError::invalid("matrix", "entries must be finite"));
        }
        Ok(Self { diag, off })
    }

    /// Matrix whose eigenvalues have joint density ∝ ∏_{i<j}|x_i − x_j|^β e^{−Σx_i²}: diagonal N(0, ½),
    /// off-diagonal χ_{β(N−k)}/2.
    pub fn gaussian_beta<R: Rng + ?Sized>(n: usize, beta: f64, rng: &mut R) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(GasError::invalid("beta", format!("must be positive (got {beta})")));
        }
        let diag = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) * std::f64::consts::FRAC_1_SQRT_2).collect();
        let mut off = Vec::with_capacity(n.saturating_sub(1));
        for k in 1..n {
            let chi2 = ChiSquared::new(beta * (n - k) as f64).map_err(|e| GasError::invalid("beta", e.to_string()))?;
            off.push(0.5 * chi2.sample(rng).sqrt());
        }
        Ok(Self { diag, off })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn off(&self) -> &[f64] {
        &self.off
    }

    /// Interval containing the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 } + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence).
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.len() {
            let b2 = if i > 0 { self.off[i - 1] * self.off[i - 1] } else { 0.0 };
            q = self.diag[i] - x - if i > 0 { b2 / q } else { 0.0 };
            if q == 0.0 {
                q = -f64::EPSILON * (self.diag[i].abs() + x.abs()).max(f64::MIN_POSITIVE);
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Sturm counts at several shifts in one pass; the independent recurrences overlap their latency.
    fn count_below_lanes<const L: usize>(&self, xs: [f64; L]) -> [usize; L] {
        let mut counts = [0usize; L];
        let mut q = [1.0f64; L];
        for i in 0..self.len() {
            let b2 = if i > 0 { self.off[i - 1] * self.off[i - 1] } else { 0.0 };
            let d = self.diag[i];
            for l in 0..L {
                let v = d - xs[l] - b2 / q[l];
                let v = if v == 0.0 { -f64::EPSILON * (d.abs() + xs[l].abs()).max(f64::MIN_POSITIVE) } else { v };
                counts[l] += usize::from(v < 0.0);
                q[l] = v;
            }
        }
        counts
    }

    /// Eigenvalues of indices `ks` (at most [`LANES`]) by simultaneous bisection inside [lo, hi].
    fn bisect_lanes(&self, ks: &[usize], lo: f64, hi: f64) -> Vec<f64> {
        let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
        let tol = 4.0 * f64::EPSILON * scale;
        let mut lows = [lo; LANES];
        let mut highs = [hi; LANES];
        loop {
            let xs: [f64; LANES] = std::array::from_fn(|l| 0.5 * (lows[l] + highs[l]));
            let active = (0..ks.len()).any(|l| highs[l] - lows[l] > tol && xs[l] > lows[l] && xs[l] < highs[l]);
            if !active {
                break;
            }
            let counts = self.count_below_lanes(xs);
            for (l, &k) in ks.iter().enumerate() {
                if counts[l] > k {
                    highs[l] = xs[l];
                } else {
                    lows[l] = xs[l];
                }
            }
        }
        (0..ks.len()).map(|l| 0.5 * (lows[l] + highs[l])).collect()
    }

    /// The k-th smallest eigenvalue (0-based) by multisection inside [lo, hi].
    fn bisect(&self, k: usize, mut lo: f64, mut hi: f64) -> f64 {
        let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
        while hi - lo > 4.0 * f64::EPSILON * scale {
            let step = (hi - lo) / (LANES + 1) as f64;
            let xs: [f64; LANES] = std::array::from_fn(|l| lo + (l + 1) as f64 * step);
            if xs[0] <= lo || xs[LANES - 1] >= hi {
                break;
            }
            let counts = self.count_below_lanes(xs);
            let (mut new_lo, mut new_hi) = (lo, hi);
            for l in 0..LANES {
                if counts[l] > k {
                    new_hi = xs[l];
                    break;
                }
                new_lo = xs[l];
            }
            if new_lo == lo && new_hi == hi {
                break;
            }
            lo = new_lo;
            hi = new_hi;
        }
        0.5 * (lo + hi)
    }

    /// Eigenvalues in [lo, hi), sorted.
    pub fn eigenvalues_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        let (glo, ghi) = self.gershgorin();
        let (lo_c, hi_c) = (lo.max(glo - 1.0), hi.min(ghi + 1.0));
        if lo_c >= hi_c {
            return Vec::new();
        }
        let (a, b) = (self.count_below(lo_c), self.count_below(hi_c));
        let ks: Vec<usize> = (a..b).collect();
        ks.chunks(LANES).flat_map(|chunk| self.bisect_lanes(chunk, lo_c, hi_c)).collect()
    }

    /// The `k` largest eigenvalues in decreasing order.
    pub fn largest(&self, k: usize) -> Vec<f64> {
        let n = self.len();
        let (glo, ghi) = self.gershgorin();
        let (lo, hi) = (glo - 1.0, ghi + 1.0);
        (0..k.min(n)).map(|i| self.bisect(n - 1 - i, lo, hi)).collect()
    }

    /// All eigenvalues in increasing order by the implicit QL algorithm.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let n = self.len();
        let mut d = self.diag.clone();
        let mut e = self.off.clone();
        e.push(0.0);
        for l in 0..n {
            let mut iter = 0;
            loop {
                let mut m = l;
                while m + 1 < n {
                    let dd = d[m].abs() + d[m + 1].abs();
                    if e[m].abs() <= f64::EPSILON * dd {
                        break;
                    }
                    m += 1;
                }
                if m == l {
                    break;
                }
                iter += 1;
                if iter > 60 {
                    return Err(GasError::Eigensolver(format!("QL iteration stalled at index {l}")));
                }
                let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                let mut r = g.hypot(1.0);
                g = d[m] - d[l] + e[l] / (g + r.copysign(g));
                let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
                let mut i = m;
                let mut deflated = false;
                while i > l {
                    i -= 1;
                    let f = s * e[i];
                    let b = c * e[i];
                    r = f.hypot(g);
                    e[i + 1] = r;
                    if r == 0.0 {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        deflated = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                }
                if deflated {
                    continue;
                }
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        }
        if d.iter().any(|v| !v.is_finite()) {
            return Err(GasError::Eigensolver("non-finite eigenvalue".into()));
        }
        d.sort_by(f64::total_cmp);
        Ok(d)
    }
}

/// Sorted eigenvalues of one Gaussian β-ensemble draw.
pub fn sample_tridiagonal_gbe(n: usize, beta: f64, seed: u64) -> Result<Vec<f64>> {
    Tridiagonal::gaussian_beta(n, beta, &mut replica_rng(seed, 0))?.eigenvalues()
}
