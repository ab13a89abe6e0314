use rayon::prelude::*;

use super::grid::{DensityGrid, GridGeometry};
use crate::error::{GasError, Result};
use crate::kernels::{InteractionKernel, KernelFamily, Potential};
use crate::quadrature::{gauss_legendre, integrate};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// G with G'(t) = g(|t|), G(0) = 0.
fn line_primitive(kernel: &InteractionKernel, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    match kernel.family() {
        KernelFamily::Riesz { s } => t.signum() * t.abs().powf(1.0 - s) / (1.0 - s),
        KernelFamily::Log => t - t * t.abs().ln(),
    }
}

/// F with F''(t) = g(|t|), F(0) = F'(0) = 0; even in t.
fn line_second_primitive(kernel: &InteractionKernel, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let a = t.abs();
    match kernel.family() {
        KernelFamily::Riesz { s } => a.powf(2.0 - s) / ((1.0 - s) * (2.0 - s)),
        KernelFamily::Log => -0.5 * a * a * a.ln() + 0.75 * a * a,
    }
}

/// ∫_0^R g(r) r dr.
fn radial_moment(kernel: &InteractionKernel, r: f64) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    match kernel.family() {
        KernelFamily::Riesz { s } => r.powf(2.0 - s) / (2.0 - s),
        KernelFamily::Log => -0.5 * r * r * r.ln() + 0.25 * r * r,
    }
}

/// ∫_{a ≤ |z| ≤ b} −log|x − z| dz in ℝ² with |x| = r (Newton's theorem).
fn log_shell_integral(r: f64, a: f64, b: f64) -> f64 {
    let phi = |rho: f64| {
        if rho == 0.0 {
            0.0
        } else {
            TWO_PI * (-0.5 * rho * rho * rho.ln() + 0.25 * rho * rho)
        }
    };
    if r <= a {
        phi(b) - phi(a)
    } else if r >= b {
        -r.ln() * std::f64::consts::PI * (b * b - a * a)
    } else {
        -r.ln() * std::f64::consts::PI * (r * r - a * a) + phi(b) - phi(r)
    }
}

/// Mean of |x − z|^{−s} over the circle |z| = ρ, with |x| = r.
fn riesz_circle_mean(s: f64, r: f64, rho: f64) -> f64 {
    let (lo, hi) = if r < rho { (r, rho) } else { (rho, r) };
    if lo == 0.0 {
        return hi.powf(-s);
    }
    let q2 = (lo / hi).powi(2);
    if q2 < 0.36 {
        // hi^{−s} · ₂F₁(s/2, s/2; 1; q²)
        let a = 0.5 * s;
        let (mut term, mut sum) = (1.0, 1.0);
        for k in 0..400 {
            let kf = k as f64;
            term *= ((a + kf) / (kf + 1.0)).powi(2) * q2;
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        return hi.powf(-s) * sum;
    }
    let d = (r - rho).powi(2);
    let f = |phi: f64| (d + 4.0 * r * rho * (0.5 * phi).sin().powi(2)).powf(-0.5 * s);
    integrate(&f, 0.0, std::f64::consts::PI, 1e-15, 1e-11) / std::f64::consts::PI
}

/// ∫_{a ≤ |z| ≤ b} |x − z|^{−s} dz in ℝ² with |x| = r.
fn riesz_shell_integral(s: f64, r: f64, a: f64, b: f64) -> f64 {
    let f = |rho: f64| TWO_PI * rho * riesz_circle_mean(s, r, rho);
    if r > a && r < b {
        integrate(&f, a, r, 1e-15, 1e-10) + integrate(&f, r, b, 1e-15, 1e-10)
    } else {
        integrate(&f, a, b, 1e-15, 1e-10)
    }
}

fn shell_integral(kernel: &InteractionKernel, r: f64, a: f64, b: f64) -> f64 {
    match kernel.family() {
        KernelFamily::Log => log_shell_integral(r, a, b),
        KernelFamily::Riesz { s } => riesz_shell_integral(s, r, a, b),
    }
}

/// ∫_0^X ∫_0^Y g(|u|) du for X, Y ≥ 0, by polar integration over two triangles.
fn corner_integral(kernel: &InteractionKernel, x: f64, y: f64) -> f64 {
    if x == 0.0 || y == 0.0 {
        return 0.0;
    }
    let split = y.atan2(x);
    let f1 = |t: f64| radial_moment(kernel, x / t.cos());
    let f2 = |t: f64| radial_moment(kernel, y / t.sin());
    integrate(&f1, 0.0, split, 1e-16, 1e-13) + integrate(&f2, split, std::f64::consts::FRAC_PI_2, 1e-16, 1e-13)
}

fn signed_corner(kernel: &InteractionKernel, x: f64, y: f64) -> f64 {
    x.signum() * y.signum() * corner_integral(kernel, x.abs(), y.abs())
}

/// Exact ∫_rect g(|p − z|) dz.
fn rect_integral(kernel: &InteractionKernel, xr: [f64; 2], yr: [f64; 2], p: &[f64]) -> f64 {
    let (x0, x1) = (xr[0] - p[0], xr[1] - p[0]);
    let (y0, y1) = (yr[0] - p[1], yr[1] - p[1]);
    signed_corner(kernel, x1, y1) - signed_corner(kernel, x0, y1) - signed_corner(kernel, x1, y0)
        + signed_corner(kernel, x0, y0)
}

/// Tensor-product Gauss–Legendre rule mapped to a rectangle.
fn rect_rule(xr: [f64; 2], yr: [f64; 2], order: usize) -> Vec<([f64; 2], f64)> {
    let (x, w) = gauss_legendre(order);
    let (hx, hy) = (0.5 * (xr[1] - xr[0]), 0.5 * (yr[1] - yr[0]));
    let (cx, cy) = (0.5 * (xr[0] + xr[1]), 0.5 * (yr[0] + yr[1]));
    let mut out = Vec::with_capacity(order * order);
    for i in 0..order {
        for j in 0..order {
            out.push(([cx + hx * x[i], cy + hy * x[j]], hx * hy * w[i] * w[j]));
        }
    }
    out
}

/// ∫_{cell i} g(x, z) dz.
pub fn cell_integral(kernel: &InteractionKernel, geometry: &GridGeometry, i: usize, x: &[f64]) -> f64 {
    match geometry {
        GridGeometry::Line { .. } => {
            let (a, b) = geometry.cell_bounds(i);
            line_primitive(kernel, b - x[0]) - line_primitive(kernel, a - x[0])
        }
        GridGeometry::Radial { .. } => {
            let (a, b) = geometry.cell_bounds(i);
            shell_integral(kernel, crate::kernels::norm(x), a, b)
        }
        GridGeometry::Tensor { .. } => {
            let (xr, yr) = geometry.rect(i);
            let [hx, hy] = geometry.spacing();
            let c = [0.5 * (xr[0] + xr[1]), 0.5 * (yr[0] + yr[1])];
            let far = (x[0] - c[0]).abs() > 3.0 * hx || (x[1] - c[1]).abs() > 3.0 * hy;
            if far {
                rect_rule(xr, yr, 3).iter().map(|(z, w)| w * kernel.profile_sq(crate::kernels::dist_sq(x, z))).sum()
            } else {
                rect_integral(kernel, xr, yr, x)
            }
        }
    }
}

#[derive(Debug, Clone)]
enum PairTable {
    /// P(c, d) = t[|c − d|].
    Line(Vec<f64>),
    /// Full symmetric matrix, row-major.
    Dense(Vec<f64>),
    /// P depends on (|Δi|, |Δj|); table is mx × my.
    Tensor { table: Vec<f64>, mx: usize, my: usize },
}

/// Cell-pair interaction integrals P(c, d) = ∬_{c × d} g on a fixed grid.
///
/// The energy of a cellwise-constant density is exactly Σ v_c v_d P(c, d), and
/// P v / m is its cell-averaged potential.
#[derive(Debug, Clone)]
pub struct GridOperator {
    geometry: GridGeometry,
    measures: Vec<f64>,
    table: PairTable,
}

impl GridOperator {
    pub fn new(kernel: &InteractionKernel, geometry: &GridGeometry) -> Result<Self> {
        geometry.validate()?;
        if kernel.dim() != geometry.dim() {
            return Err(GasError::DimensionMismatch { expected: geometry.dim(), got: kernel.dim() });
        }
        let measures = (0..geometry.len()).map(|i| geometry.measure(i)).collect();
        let table = match *geometry {
            GridGeometry::Line { cells, .. } => PairTable::Line(line_pairs(kernel, geometry.spacing()[0], cells)),
            GridGeometry::Radial { cells, .. } => PairTable::Dense(radial_pairs(kernel, geometry, cells)),
            GridGeometry::Tensor { cells, .. } => {
                PairTable::Tensor { table: tensor_pairs(kernel, geometry), mx: cells[0], my: cells[1] }
            }
        };
        Ok(Self { geometry: geometry.clone(), measures, table })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn pair(&self, c: usize, d: usize) -> f64 {
        match &self.table {
            PairTable::Line(t) => t[c.abs_diff(d)],
            PairTable::Dense(m) => m[c * self.measures.len() + d],
            PairTable::Tensor { table, my, .. } => {
                let (ci, cj) = (c / my, c % my);
                let (di, dj) = (d / my, d % my);
                table[ci.abs_diff(di) * my + cj.abs_diff(dj)]
            }
        }
    }

    /// w_c = Σ_d P(c, d) v_d.
    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        let n = self.measures.len();
        match &self.table {
            PairTable::Line(t) => (0..n)
                .into_par_iter()
                .map(|c| {
                    let mut acc = 0.0;
                    for (d, v) in values.iter().enumerate() {
                        acc += t[c.abs_diff(d)] * v;
                    }
                    acc
                })
                .collect(),
            PairTable::Dense(m) => (0..n)
                .into_par_iter()
                .map(|c| m[c * n..(c + 1) * n].iter().zip(values).map(|(p, v)| p * v).sum())
                .collect(),
            PairTable::Tensor { table, mx, my } => {
                let (mx, my) = (*mx, *my);
                (0..n)
                    .into_par_iter()
                    .map(|c| {
                        let (ci, cj) = (c / my, c % my);
                        let mut acc = 0.0;
                        for di in 0..mx {
                            let row = &table[ci.abs_diff(di) * my..];
                            for dj in 0..my {
                                acc += row[cj.abs_diff(dj)] * values[di * my + dj];
                            }
                        }
                        acc
                    })
                    .collect()
            }
        }
    }

    /// Cell averages of the potential generated by the density `values`.
    pub fn cell_potential(&self, values: &[f64]) -> Vec<f64> {
        self.apply(values).into_iter().zip(&self.measures).map(|(w, m)| w / m).collect()
    }

    pub fn energy(&self, values: &[f64]) -> f64 {
        self.apply(values).iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

fn line_pairs(kernel: &InteractionKernel, h: f64, cells: usize) -> Vec<f64> {
    let f = |t: f64| line_second_primitive(kernel, t);
    let (x, w) = gauss_legendre(10);
    (0..cells)
        .map(|k| {
            let kh = k as f64 * h;
            if k <= 3 {
                f((k as f64 - 1.0) * h) - 2.0 * f(kh) + f((k as f64 + 1.0) * h)
            } else {
                // ∫_{−h}^{h} (h − |t|) g(kh + t) dt
                let half = 0.5 * h;
                let mut acc = 0.0;
                for (xi, wi) in x.iter().zip(&w) {
                    let t = half * (xi + 1.0);
                    acc += wi * (h - t) * (kernel.profile(kh + t) + kernel.profile(kh - t));
                }
                acc * half
            }
        })
        .collect()
}

fn radial_pairs(kernel: &InteractionKernel, geometry: &GridGeometry, cells: usize) -> Vec<f64> {
    let h = geometry.spacing()[0];
    let (gx, gw) = gauss_legendre(6);
    let rows: Vec<Vec<f64>> = (0..cells)
        .into_par_iter()
        .map(|c| {
            let (ac, bc) = (c as f64 * h, (c + 1) as f64 * h);
            (c..cells)
                .map(|d| {
                    let (ad, bd) = (d as f64 * h, (d + 1) as f64 * h);
                    match kernel.family() {
                        KernelFamily::Riesz { s } if d >= c + 2 => {
                            // Smooth in both radii: product Gauss rule.
                            let mut acc = 0.0;
                            for (xi, wi) in gx.iter().zip(&gw) {
                                let r = ac + 0.5 * h * (xi + 1.0);
                                for (xj, wj) in gx.iter().zip(&gw) {
                                    let rho = ad + 0.5 * h * (xj + 1.0);
                                    acc += wi * wj * TWO_PI * r * TWO_PI * rho * riesz_circle_mean(s, r, rho);
                                }
                            }
                            acc * 0.25 * h * h
                        }
                        _ => {
                            let f = |r: f64| TWO_PI * r * shell_integral(kernel, r, ad, bd);
                            integrate(&f, ac, bc, 1e-16, 1e-11)
                        }
                    }
                })
                .collect()
        })
        .collect();
    let mut m = vec![0.0; cells * cells];
    for (c, row) in rows.iter().enumerate() {
        for (k, p) in row.iter().enumerate() {
            let d = c + k;
            m[c * cells + d] = *p;
            m[d * cells + c] = *p;
        }
    }
    m
}

fn tensor_pairs(kernel: &InteractionKernel, geometry: &GridGeometry) -> Vec<f64> {
    let GridGeometry::Tensor { cells, .. } = *geometry else { unreachable!() };
    let [hx, hy] = geometry.spacing();
    let (mx, my) = (cells[0], cells[1]);
    let base = rect_rule([0.0, hx], [0.0, hy], 6);
    let coarse = rect_rule([0.0, hx], [0.0, hy], 3);
    (0..mx * my)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / my, k % my);
            let xr = [i as f64 * hx, (i + 1) as f64 * hx];
            let yr = [j as f64 * hy, (j + 1) as f64 * hy];
            if i <= 2 && j <= 2 {
                base.iter().map(|(p, w)| w * rect_integral(kernel, xr, yr, p)).sum()
            } else {
                let mut acc = 0.0;
                for (p, wp) in &coarse {
                    for (q, wq) in &coarse {
                        let z = [q[0] + i as f64 * hx, q[1] + j as f64 * hy];
                        acc += wp * wq * kernel.profile_sq(crate::kernels::dist_sq(p, &z));
                    }
                }
                acc
            }
        })
        .collect()
}

fn check_kernel_grid(kernel: &InteractionKernel, mu: &DensityGrid) -> Result<()> {
    if kernel.dim() != mu.dim() {
        return Err(GasError::DimensionMismatch { expected: mu.dim(), got: kernel.dim() });
    }
    Ok(())
}

/// U^μ(x) = ∫ g(x, z) μ(dz), exact for the cellwise-constant density.
pub fn potential_of_measure(kernel: &InteractionKernel, mu: &DensityGrid, x: &[f64]) -> Result<f64> {
    check_kernel_grid(kernel, mu)?;
    if x.len() != kernel.dim() {
        return Err(GasError::DimensionMismatch { expected: kernel.dim(), got: x.len() });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(GasError::Domain("evaluation point must be finite".into()));
    }
    let geo = mu.geometry();
    Ok((0..mu.len())
        .filter(|&i| mu.values()[i] != 0.0)
        .map(|i| mu.values()[i] * cell_integral(kernel, geo, i, x))
        .sum())
}

/// ∬ g dμ dμ, exact on cell pairs.
pub fn energy(kernel: &InteractionKernel, mu: &DensityGrid) -> Result<f64> {
    check_kernel_grid(kernel, mu)?;
    let op = GridOperator::new(kernel, mu.geometry())?;
    let e = op.energy(mu.values());
    if !e.is_finite() {
        return Err(GasError::DivergentEnergy(format!("energy evaluated to {e}")));
    }
    Ok(e)
}

/// ∫ ϑ dμ with ϑ sampled at the nodes (zero for Riesz kernels).
pub fn tilt_moment(kernel: &InteractionKernel, mu: &DensityGrid) -> f64 {
    if kernel.is_log() {
        mu.integrate_nodes(|x| kernel.tilt(x))
    } else {
        0.0
    }
}

/// ∬ (g(x, y) + ϑ(x) + ϑ(y)) dμ dμ.
pub fn weighted_energy(kernel: &InteractionKernel, mu: &DensityGrid) -> Result<f64> {
    Ok(energy(kernel, mu)? + 2.0 * tilt_moment(kernel, mu))
}

fn same_grid(mu: &DensityGrid, nu: &DensityGrid) -> Result<()> {
    if mu.geometry() != nu.geometry() {
        return Err(GasError::invalid("grid", "measures must share the same grid"));
    }
    Ok(())
}

/// H(μ|ν) = ∫ log(dμ/dν) dμ; +∞ when μ charges a cell where ν vanishes.
pub fn relative_entropy(mu: &DensityGrid, nu: &DensityGrid) -> Result<f64> {
    same_grid(mu, nu)?;
    let mut h = 0.0;
    for i in 0..mu.len() {
        let (p, q) = (mu.values()[i], nu.values()[i]);
        if p == 0.0 {
            continue;
        }
        if q == 0.0 {
            return Ok(f64::INFINITY);
        }
        h += mu.measures()[i] * p * (p / q).ln();
    }
    Ok(h.max(0.0))
}

/// ν_γ ∝ e^{−V + γϑ} on the grid, with log of its normalization constant C_γ.
pub fn reference_measure(
    kernel: &InteractionKernel,
    pot: &Potential,
    gamma: f64,
    geometry: &GridGeometry,
) -> Result<(DensityGrid, f64)> {
    geometry.validate()?;
    let exps: Vec<f64> = (0..geometry.len())
        .map(|i| {
            let x = geometry.node(i);
            -pot.eval(&x) + gamma * kernel.tilt(&x)
        })
        .collect();
    let shift = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return Err(GasError::Domain("reference density vanishes on the whole grid".into()));
    }
    let vals: Vec<f64> = exps.iter().map(|e| (e - shift).exp()).collect();
    let raw = DensityGrid::from_raw(geometry.clone(), vals);
    let mass = raw.mass();
    let nu = DensityGrid::from_values(geometry.clone(), raw.values().to_vec())?;
    Ok((nu, mass.ln() + shift))
}

/// 𝓕_γ(μ) = (γ/2)·weighted energy + H(μ|ν_γ).
pub fn free_energy(kernel: &InteractionKernel, pot: &Potential, mu: &DensityGrid, gamma: f64) -> Result<f64> {
    if !(gamma >= 0.0) {
        return Err(GasError::invalid("gamma", "must be non-negative"));
    }
    check_kernel_grid(kernel, mu)?;
    let (nu, _) = reference_measure(kernel, pot, gamma, mu.geometry())?;
    let h = relative_entropy(mu, &nu)?;
    if h.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let interaction = if gamma == 0.0 { 0.0 } else { 0.5 * gamma * weighted_energy(kernel, mu)? };
    Ok(interaction + h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(lo: f64, hi: f64, cells: usize) -> GridGeometry {
        GridGeometry::Line { lo, hi, cells }
    }

    #[test]
    fn riesz_potential_of_uniform_interval() {
        let k = InteractionKernel::riesz(0.5, 1).unwrap();
        let mu = DensityGrid::new(line(0.0, 1.0, 50)).unwrap();
        let u = potential_of_measure(&k, &mu, &[2.0]).unwrap();
        // ∫_0^1 (2 − z)^{−1/2} dz
        assert_relative_eq!(u, 2.0 * (2f64.sqrt() - 1.0), epsilon = 1e-12);
        // Inside the support the singular cell is handled exactly: ∫_0^1 |x − z|^{−1/2} at x = 0.3.
        let inside = potential_of_measure(&k, &mu, &[0.3]).unwrap();
        assert_relative_eq!(inside, 2.0 * (0.3f64.sqrt() + 0.7f64.sqrt()), epsilon = 1e-12);
    }

    #[test]
    fn log_potential_of_thin_annulus_follows_shell_theorem() {
        let k = InteractionKernel::log(2).unwrap();
        let geo = GridGeometry::Radial { r_max: 1.01, cells: 101 };
        let mu = DensityGrid::from_fn(geo, |x| if x[0] > 1.0 { 1.0 } else { 0.0 }).unwrap();
        let u = potential_of_measure(&k, &mu, &[0.0, 3.0]).unwrap();
        assert_relative_eq!(u, -(3f64).ln(), epsilon = 1e-12);
        // Cross-check against brute-force angular quadrature of the circle at radius 1.005.
        let rho = 1.005;
        let f = |t: f64| -0.5 * ((3.0 - rho * t.cos()).powi(2) + (rho * t.sin()).powi(2)).ln();
        let brute = integrate(&f, 0.0, TWO_PI, 1e-14, 1e-13) / TWO_PI;
        assert_relative_eq!(u, brute, epsilon = 1e-10);
    }

    #[test]
    fn point_mass_cell_far_away() {
        let k = InteractionKernel::riesz(0.5, 1).unwrap();
        let geo = line(-1.0, 1.0, 200);
        let mu = DensityGrid::from_fn(geo.clone(), |x| if (x[0] - 0.505).abs() < 1e-9 { 1.0 } else { 0.0 }).unwrap();
        let u = potential_of_measure(&k, &mu, &[30.0]).unwrap();
        assert_relative_eq!(u, k.eval(&[0.505], &[30.0]).unwrap(), max_relative = 1e-5);
    }

    #[test]
    fn log_energy_of_uniform_interval_is_three_halves() {
        let k = InteractionKernel::log(1).unwrap();
        for cells in [1usize << 3, 1 << 6, 1 << 9, 1 << 11] {
            let mu = DensityGrid::new(line(0.0, 1.0, cells.max(2))).unwrap();
            assert_relative_eq!(energy(&k, &mu).unwrap(), 1.5, epsilon = 1e-9);
        }
    }

    /// Independent brute-force oracle: −∬ log|x − y| over [0,1]², integrating
    /// the inner variable exactly and the outer one by adaptive quadrature.
    #[test]
    fn brute_force_log_energy_oracle() {
        let inner = |x: f64| {
            let f = |y: f64| -(x - y).abs().ln();
            integrate(&f, 0.0, x, 1e-15, 1e-13) + integrate(&f, x, 1.0, 1e-15, 1e-13)
        };
        let e = integrate(&inner, 0.0, 1.0, 1e-13, 1e-11);
        assert_relative_eq!(e, 1.5, epsilon = 1e-8);
    }

    #[test]
    fn line_pair_table_matches_quadrature() {
        let k = InteractionKernel::riesz(0.3, 1).unwrap();
        let h = 0.1;
        let table = line_pairs(&k, h, 12);
        for (d, p) in table.iter().enumerate() {
            let inner = |x: f64| {
                let f = |y: f64| k.profile((x - y).abs());
                let (a, b) = (d as f64 * h, (d + 1) as f64 * h);
                if x > a && x < b {
                    integrate(&f, a, x, 1e-16, 1e-12) + integrate(&f, x, b, 1e-16, 1e-12)
                } else {
                    integrate(&f, a, b, 1e-16, 1e-12)
                }
            };
            let brute = integrate(&inner, 0.0, h, 1e-16, 1e-11);
            assert_relative_eq!(*p, brute, max_relative = 1e-8);
        }
    }

    #[test]
    fn two_point_cells_cross_term() {
        let k = InteractionKernel::riesz(0.5, 1).unwrap();
        let geo = line(0.0, 10.0, 1000);
        let d: f64 = 4.0;
        let mu = DensityGrid::from_fn(geo, |x| {
            if (x[0] - 3.005).abs() < 1e-9 || (x[0] - 7.005).abs() < 1e-9 {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let op = GridOperator::new(&k, mu.geometry()).unwrap();
        let v = mu.values();
        let self_terms: f64 = (0..mu.len()).map(|c| v[c] * v[c] * op.pair(c, c)).sum();
        let cross = op.energy(v) - self_terms;
        assert_relative_eq!(cross, 2.0 * 0.25 * d.powf(-0.5), max_relative = 1e-6);
    }

    #[test]
    fn weighted_energy_identity() {
        let k = InteractionKernel::log(1).unwrap();
        let mu = DensityGrid::from_fn(line(-3.0, 4.0, 300), |x| (-(x[0] - 0.5).powi(2)).exp()).unwrap();
        let diff = weighted_energy(&k, &mu).unwrap() - energy(&k, &mu).unwrap();
        let moment = mu.integrate_nodes(|x| (1.0 + x[0].abs()).ln());
        assert_relative_eq!(diff, 2.0 * moment, epsilon = 1e-12);
        let r = InteractionKernel::riesz(0.5, 1).unwrap();
        assert_eq!(weighted_energy(&r, &mu).unwrap(), energy(&r, &mu).unwrap());
    }

    #[test]
    fn relative_entropy_examples() {
        let geo = line(-8.0, 8.0, 1600);
        let gauss = |m: f64| DensityGrid::from_fn(geo.clone(), move |x| (-(x[0] - m).powi(2)).exp()).unwrap();
        let mu = gauss(0.0);
        assert_eq!(relative_entropy(&mu, &mu).unwrap(), 0.0);
        // Gaussians with variance 1/2: KL = m².
        let m = 0.7;
        assert_relative_eq!(relative_entropy(&mu, &gauss(m)).unwrap(), m * m, epsilon = 1e-6);
        let left = DensityGrid::from_fn(geo.clone(), |x| if x[0] < 0.0 { 1.0 } else { 0.0 }).unwrap();
        let right = DensityGrid::from_fn(geo.clone(), |x| if x[0] > 0.0 { 1.0 } else { 0.0 }).unwrap();
        assert_eq!(relative_entropy(&left, &right).unwrap(), f64::INFINITY);
    }

    #[test]
    fn free_energy_at_zero_coupling() {
        let k = InteractionKernel::log(1).unwrap();
        let v = Potential::power(2.0, 1).unwrap();
        let geo = line(-7.0, 7.0, 700);
        let mu0 = DensityGrid::from_fn(geo.clone(), |x| (-x[0] * x[0]).exp()).unwrap();
        assert!(free_energy(&k, &v, &mu0, 0.0).unwrap().abs() < 1e-14);
        let other = DensityGrid::from_fn(geo, |x| (-(x[0] - 0.2).powi(2)).exp()).unwrap();
        assert!(free_energy(&k, &v, &other, 0.0).unwrap() > 0.0);
    }

    #[test]
    fn free_energy_tilt_identity() {
        // 𝓕_γ = (γ/2)𝓔 + H(μ|ν₀) + log(C_γ/C₀)
        let k = InteractionKernel::log(1).unwrap();
        let v = Potential::power(2.0, 1).unwrap();
        let geo = line(-7.0, 7.0, 400);
        let gamma = 1.3;
        let mu = DensityGrid::from_fn(geo.clone(), |x| (-(x[0] - 0.3).powi(2) * 1.5).exp()).unwrap();
        let (nu0, ln_c0) = reference_measure(&k, &v, 0.0, &geo).unwrap();
        let (_, ln_cg) = reference_measure(&k, &v, gamma, &geo).unwrap();
        let lhs = free_energy(&k, &v, &mu, gamma).unwrap();
        let rhs = 0.5 * gamma * energy(&k, &mu).unwrap() + relative_entropy(&mu, &nu0).unwrap() + ln_cg - ln_c0;
        assert_relative_eq!(lhs, rhs, epsilon = 1e-12);
    }

    #[test]
    fn log_energy_is_nonnegative_on_mean_zero_functions() {
        let k = InteractionKernel::log(1).unwrap();
        let geo = line(-4.0, 4.0, 400);
        let op = GridOperator::new(&k, &geo).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            // Random smooth bumps with compact support, then remove the mean.
            let bumps: Vec<(f64, f64, f64)> = (0..4)
                .map(|_| (rng.random_range(-2.5..2.5), rng.random_range(0.2..1.2), rng.random_range(-1.0..1.0)))
                .collect();
            let mut f: Vec<f64> = (0..geo.len())
                .map(|i| {
                    let x = geo.node(i)[0];
                    bumps
                        .iter()
                        .map(|(c, w, a)| {
                            let t = (x - c) / w;
                            if t.abs() < 1.0 {
                                a * (-1.0 / (1.0 - t * t)).exp()
                            } else {
                                0.0
                            }
                        })
                        .sum()
                })
                .collect();
            let h = geo.spacing()[0];
            let mean: f64 = f.iter().sum::<f64>() * h;
            let support: Vec<usize> = (0..f.len()).filter(|&i| geo.node(i)[0].abs() < 3.5).collect();
            let width = support.len() as f64 * h;
            for &i in &support {
                f[i] -= mean / width;
            }
            assert!(f.iter().sum::<f64>().abs() * h < 1e-12);
            let e = op.energy(&f);
            assert!(e >= -1e-12, "energy {e}");
        }
    }

    #[test]
    fn riesz_energy_is_midpoint_convex() {
        let k = InteractionKernel::riesz(0.5, 1).unwrap();
        let geo = line(-3.0, 3.0, 300);
        let op = GridOperator::new(&k, &geo).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let (c1, c2) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let (w1, w2) = (rng.random_range(0.2..1.0), rng.random_range(0.2..1.0));
            let a = DensityGrid::from_fn(geo.clone(), |x| (-((x[0] - c1) / w1).powi(2)).exp()).unwrap();
            let b = DensityGrid::from_fn(geo.clone(), |x| (-((x[0] - c2) / w2).powi(2)).exp()).unwrap();
            let mid: Vec<f64> = a.values().iter().zip(b.values()).map(|(p, q)| 0.5 * (p + q)).collect();
            let lhs = op.energy(&mid);
            let rhs = 0.5 * (op.energy(a.values()) + op.energy(b.values()));
            assert!(lhs < rhs, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn radial_log_energy_of_uniform_disc() {
        // −∬ log|x − y| for the uniform probability on the unit disc equals 1/4.
        let k = InteractionKernel::log(2).unwrap();
        let mu = DensityGrid::new(GridGeometry::Radial { r_max: 1.0, cells: 40 }).unwrap();
        assert_relative_eq!(energy(&k, &mu).unwrap(), 0.25, epsilon = 1e-9);
    }

    #[test]
    fn radial_riesz_potential_at_centre() {
        // Uniform on the unit disc, s = 1: U(0) = ∫ |z|^{-1} dz / π = 2.
        let k = InteractionKernel::riesz(1.0, 2).unwrap();
        let mu = DensityGrid::new(GridGeometry::Radial { r_max: 1.0, cells: 20 }).unwrap();
        assert_relative_eq!(potential_of_measure(&k, &mu, &[0.0, 0.0]).unwrap(), 2.0, epsilon = 1e-9);
        // Off-centre value against brute-force polar quadrature around the evaluation point.
        let p = 0.4;
        let brute = {
            let f = |t: f64| {
                // distance from p to the unit circle along direction t
                let b = p * t.cos();
                // ∫_0^reach r^{-1} r dr
                -b + (b * b - p * p + 1.0).sqrt()
            };
            integrate(&f, 0.0, TWO_PI, 1e-14, 1e-12) / std::f64::consts::PI
        };
        assert_relative_eq!(potential_of_measure(&k, &mu, &[p, 0.0]).unwrap(), brute, max_relative = 1e-8);
    }

    #[test]
    fn tensor_and_radial_agree_on_a_gaussian() {
        let k = InteractionKernel::log(2).unwrap();
        // X − Y ~ N(0, I₂) for independent X, Y with density ∝ e^{−|x|²}, so the
        // energy is −E log|Z| = −(log 2 − γ_E)/2.
        let exact = -0.5 * (std::f64::consts::LN_2 - 0.577_215_664_901_532_9);
        let tensor = GridGeometry::Tensor { lo: [-4.0, -4.0], hi: [4.0, 4.0], cells: [80, 80] };
        let radial = GridGeometry::Radial { r_max: 5.6, cells: 200 };
        let f = |x: &[f64]| (-(x[0] * x[0] + x[1] * x[1])).exp();
        let mt = DensityGrid::from_fn(tensor, f).unwrap();
        let mr = DensityGrid::from_fn(radial, f).unwrap();
        let (et, er) = (energy(&k, &mt).unwrap(), energy(&k, &mr).unwrap());
        assert_relative_eq!(er, exact, max_relative = 2e-3);
        // Cellwise-constant densities converge at second order; 80 cells per axis is within 2%.
        assert_relative_eq!(et, exact, max_relative = 2e-2);
        let (ut, ur) =
            (potential_of_measure(&k, &mt, &[0.3, 0.2]).unwrap(), potential_of_measure(&k, &mr, &[0.3, 0.2]).unwrap());
        assert_relative_eq!(ut, ur, max_relative = 5e-3);
    }

    #[test]
    fn rect_integral_matches_brute_force() {
        for k in [InteractionKernel::log(2).unwrap(), InteractionKernel::riesz(1.2, 2).unwrap()] {
            let p = [0.3, -0.1];
            let (xr, yr) = ([0.0, 0.7], [-0.4, 0.5]);
            let inner = |x: f64| {
                let f = |y: f64| k.profile(((x - p[0]).powi(2) + (y - p[1]).powi(2)).sqrt());
                integrate(&f, yr[0], p[1], 1e-12, 1e-10) + integrate(&f, p[1], yr[1], 1e-12, 1e-10)
            };
            let brute = integrate(&inner, xr[0], p[0], 1e-11, 1e-9) + integrate(&inner, p[0], xr[1], 1e-11, 1e-9);
            assert_relative_eq!(rect_integral(&k, xr, yr, &p), brute, max_relative = 1e-6);
        }
    }
}
