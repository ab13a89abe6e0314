use super::functionals::{potential_of_measure, GridOperator};
use super::grid::{DensityGrid, GridGeometry};
use crate::error::{GasError, Result};
use crate::kernels::{InteractionKernel, Potential};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Largest damping η of the Picard update; halved whenever the residual exceeds its recent maximum.
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Largest mass allowed in the outermost cells before the domain is declared too small.
    pub boundary_eps: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { damping: 0.5, tol: 1e-10, max_iter: 2000, boundary_eps: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct EquilibriumSolution {
    kernel: InteractionKernel,
    density: DensityGrid,
    l_gamma: f64,
    potential: Vec<f64>,
    residual: f64,
    iterations: usize,
    gamma: f64,
    residual_history: Vec<f64>,
    free_energy_history: Vec<f64>,
    damping: f64,
}

impl EquilibriumSolution {
    pub fn density(&self) -> &DensityGrid {
        &self.density
    }

    pub fn l_gamma(&self) -> f64 {
        self.l_gamma
    }

    /// Cell-averaged potential U^{μ_γ}, one value per node.
    pub fn potential_field(&self) -> &[f64] {
        &self.potential
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn kernel(&self) -> &InteractionKernel {
        &self.kernel
    }

    pub fn residual_history(&self) -> &[f64] {
        &self.residual_history
    }

    /// Free energy of every accepted iterate, starting from the initial guess.
    pub fn free_energy_history(&self) -> &[f64] {
        &self.free_energy_history
    }

    pub fn free_energy(&self) -> f64 {
        *self.free_energy_history.last().unwrap_or(&f64::NAN)
    }

    /// Damping in force when the iteration stopped.
    pub fn final_damping(&self) -> f64 {
        self.damping
    }

    pub fn density_at(&self, x: &[f64]) -> f64 {
        self.density.density_at(x)
    }

    pub fn mass_in(&self, a: f64, b: f64) -> f64 {
        self.density.mass_in(a, b)
    }

    #[cfg(test)]
    pub(crate) fn replace_density(&mut self, mu: DensityGrid) {
        self.density = mu;
    }

    /// U^{μ_γ}(x) at an arbitrary point.
    pub fn potential_at(&self, x: &[f64]) -> Result<f64> {
        potential_of_measure(&self.kernel, &self.density, x)
    }
}

/// Discrete problem on a fixed grid: node values of V plus the pair operator.
struct Discretization {
    op: GridOperator,
    measures: Vec<f64>,
    v: Vec<f64>,
}

struct Evaluation {
    potential: Vec<f64>,
    target: Vec<f64>,
    ln_z: f64,
    residual: f64,
    free_energy: f64,
}

impl Discretization {
    fn new(kernel: &InteractionKernel, pot: &Potential, geometry: &GridGeometry) -> Result<Self> {
        if kernel.dim() != geometry.dim() {
            return Err(GasError::DimensionMismatch { expected: geometry.dim(), got: kernel.dim() });
        }
        if pot.dim() != geometry.dim() {
            return Err(GasError::DimensionMismatch { expected: geometry.dim(), got: pot.dim() });
        }
        if matches!(geometry, GridGeometry::Radial { .. }) && !pot.is_radial() {
            return Err(GasError::invalid("potential", "radial grids need a radial potential"));
        }
        let op = GridOperator::new(kernel, geometry)?;
        let nodes: Vec<Vec<f64>> = (0..geometry.len()).map(|i| geometry.node(i)).collect();
        Ok(Self {
            op,
            measures: (0..geometry.len()).map(|i| geometry.measure(i)).collect(),
            v: nodes.iter().map(|x| pot.eval(x)).collect(),
        })
    }

    /// T(μ) ∝ e^{−γŪ − V} with its log-normalization, the residual and the
    /// free energy up to the constant log C_γ: (γ/2)Σ m v Ū + Σ m v (log v + V).
    fn evaluate(&self, values: &[f64], gamma: f64) -> Evaluation {
        let potential = if gamma == 0.0 { vec![0.0; values.len()] } else { self.op.cell_potential(values) };
        let exps: Vec<f64> = potential.iter().zip(&self.v).map(|(u, v)| -gamma * u - v).collect();
        let shift = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = exps.iter().map(|e| (e - shift).exp()).collect();
        let z: f64 = raw.iter().zip(&self.measures).map(|(r, m)| r * m).sum();
        let target: Vec<f64> = raw.iter().map(|r| r / z).collect();
        let residual = values.iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let mut entropy = 0.0;
        let mut interaction = 0.0;
        for i in 0..values.len() {
            let (p, m) = (values[i], self.measures[i]);
            if p > 0.0 {
                entropy += m * p * (p.ln() + self.v[i]);
            }
            interaction += m * p * potential[i];
        }
        // The tilt terms cancel between the weighted energy and H(μ|ν_γ).
        let free_energy = 0.5 * gamma * interaction + entropy;
        Evaluation { potential, target, ln_z: z.ln() + shift, residual, free_energy }
    }

    fn boundary_mass(&self, values: &[f64], geometry: &GridGeometry) -> f64 {
        let n = values.len();
        let idx: Vec<usize> = match *geometry {
            GridGeometry::Line { .. } => vec![0, n - 1],
            GridGeometry::Radial { .. } => vec![n - 1],
            GridGeometry::Tensor { cells, .. } => (0..n)
                .filter(|&k| {
                    let (i, j) = (k / cells[1], k % cells[1]);
                    i == 0 || j == 0 || i == cells[0] - 1 || j == cells[1] - 1
                })
                .collect(),
        };
        idx.iter().map(|&i| values[i] * self.measures[i]).sum()
    }
}

/// Solves μ = L⁻¹ e^{−γU^μ − V} by damped Picard iteration started from μ₀ ∝ e^{−V}.
pub fn solve_equilibrium(
    kernel: &InteractionKernel,
    pot: &Potential,
    gamma: f64,
    geometry: &GridGeometry,
    opts: &SolverOptions,
) -> Result<EquilibriumSolution> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(GasError::invalid("gamma", format!("must be finite and non-negative (got {gamma})")));
    }
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(GasError::invalid("damping", "must lie in (0, 1]"));
    }
    if !(opts.tol > 0.0) {
        return Err(GasError::invalid("tol", "must be positive"));
    }
    geometry.validate()?;
    let disc = Discretization::new(kernel, pot, geometry)?;
    // Zero coupling is a fixed point after one map evaluation: start from T(anything).
    let start = disc.evaluate(&vec![0.0; geometry.len()], 0.0).target;
    let mut values = start;
    let mut eval = disc.evaluate(&values, gamma);
    let mut eta = opts.damping;
    let mut residual_history = vec![eval.residual];
    let mut free_energy_history = vec![eval.free_energy];
    let mut iterations = 1;
    while eval.residual > opts.tol {
        if iterations >= opts.max_iter {
            return Err(GasError::NonConvergence { iterations, residual: eval.residual, history: residual_history });
        }
        loop {
            let mut cand: Vec<f64> = values.iter().zip(&eval.target).map(|(a, b)| (1.0 - eta) * a + eta * b).collect();
            let mass: f64 = cand.iter().zip(&disc.measures).map(|(v, m)| v * m).sum();
            cand.iter_mut().for_each(|v| *v /= mass);
            let next = disc.evaluate(&cand, gamma);
            iterations += 1;
            // Non-monotone acceptance: the sup residual may rise briefly along a convergent path.
            let recent =
                residual_history[residual_history.len().saturating_sub(10)..].iter().cloned().fold(0.0, f64::max);
            if next.residual > recent && eta > 1e-6 && iterations < opts.max_iter {
                eta *= 0.5;
                continue;
            }
            values = cand;
            eval = next;
            eta = (eta * 1.1).min(opts.damping);
            break;
        }
        residual_history.push(eval.residual);
        free_energy_history.push(eval.free_energy);
    }
    let boundary = disc.boundary_mass(&values, geometry);
    if boundary > opts.boundary_eps {
        return Err(GasError::DomainTooSmall { boundary_mass: boundary, limit: opts.boundary_eps });
    }
    // Report the free energy with the ν_γ normalization folded in.
    let (_, ln_c) = super::functionals::reference_measure(kernel, pot, gamma, geometry)?;
    let free_energy_history = free_energy_history.into_iter().map(|f| f + ln_c).collect();
    Ok(EquilibriumSolution {
        kernel: *kernel,
        density: DensityGrid::from_raw(geometry.clone(), values),
        l_gamma: eval.ln_z.exp(),
        potential: eval.potential,
        residual: eval.residual,
        iterations,
        gamma,
        residual_history,
        free_energy_history,
        damping: eta,
    })
}

/// sup over nodes of |μ − L⁻¹e^{−γU^μ − V}|, with U^μ recomputed from scratch.
pub fn el_residual(kernel: &InteractionKernel, pot: &Potential, solution: &EquilibriumSolution) -> Result<f64> {
    let mu = solution.density();
    let disc = Discretization::new(kernel, pot, mu.geometry())?;
    let gamma = solution.gamma();
    let u = if gamma == 0.0 { vec![0.0; mu.len()] } else { disc.op.cell_potential(mu.values()) };
    let l = solution.l_gamma();
    Ok(mu
        .values()
        .iter()
        .zip(u.iter().zip(&disc.v))
        .map(|(p, (u, v))| (p - (-gamma * u - v).exp() / l).abs())
        .fold(0.0, f64::max))
}

/// Radius beyond which e^{−Ṽ_κ} falls below `rel` times its maximum, κ = γ + 1.
pub fn truncation_radius(kernel: &InteractionKernel, pot: &Potential, gamma: f64, rel: f64) -> Result<f64> {
    if !pot.is_radial() {
        return Err(GasError::invalid("potential", "truncation radius needs a radial potential"));
    }
    let kappa = gamma + 1.0;
    let f = |r: f64| pot.radial(r) - kappa * kernel.tilt_radial(r);
    let (at, min) = scan_min(&f);
    crossing(&f, at, 1.0, min - rel.ln())
}

/// Interval outside which e^{−Ṽ_κ} falls below `rel` times its maximum (1D potentials).
pub fn truncation_interval(kernel: &InteractionKernel, pot: &Potential, gamma: f64, rel: f64) -> Result<(f64, f64)> {
    if pot.dim() != 1 {
        return Err(GasError::DimensionMismatch { expected: 1, got: pot.dim() });
    }
    let kappa = gamma + 1.0;
    let f = |x: f64| pot.eval(&[x]) - kappa * kernel.tilt(&[x]);
    let (right_at, right_min) = scan_min(&f);
    let (left_at, left_min) = scan_min(&|x| f(-x));
    // Both wells must lie inside when the tilt makes Ṽ_κ double-welled.
    let level = right_min.min(left_min) - rel.ln();
    Ok((crossing(&f, -left_at, -1.0, level)?, crossing(&f, right_at, 1.0, level)?))
}

/// Minimum of f over x ≥ 0 on a geometric scan, stopping once f is far above it.
fn scan_min(f: &dyn Fn(f64) -> f64) -> (f64, f64) {
    let (mut x, mut step) = (0.0, 1e-3);
    let (mut best_at, mut best) = (0.0, f(0.0));
    while x < 1e7 {
        x += step;
        step *= 1.02;
        let v = f(x);
        if v < best {
            best = v;
            best_at = x;
        }
        if !v.is_finite() || v - best > 60.0 {
            break;
        }
    }
    (best_at, best)
}

/// First point past `start` in direction `dir` where f exceeds `level`.
fn crossing(f: &dyn Fn(f64) -> f64, start: f64, dir: f64, level: f64) -> Result<f64> {
    let (mut x, mut step) = (start, 1e-3);
    while !(f(x) > level) {
        x += dir * step;
        step *= 1.02;
        if (x - start).abs() > 1e7 {
            return Err(GasError::Domain("potential does not confine: no truncation point found".into()));
        }
    }
    let (mut a, mut b) = (x - dir * step / 1.02, x);
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        if f(m) > level {
            b = m;
        } else {
            a = m;
        }
    }
    Ok(b)
}

/// Default geometry: a line for n = 1, radial annuli for radial potentials in n = 2.
pub fn default_geometry(kernel: &InteractionKernel, pot: &Potential, gamma: f64, cells: usize) -> Result<GridGeometry> {
    match kernel.dim() {
        1 => {
            let (lo, hi) = truncation_interval(kernel, pot, gamma, 1e-12)?;
            Ok(GridGeometry::Line { lo, hi, cells })
        }
        2 => {
            let r_max = truncation_radius(kernel, pot, gamma, 1e-12)?;
            Ok(GridGeometry::Radial { r_max, cells })
        }
        n => Err(GasError::invalid("dimension", format!("equilibrium solves support n ≤ 2 (got {n})"))),
    }
}
