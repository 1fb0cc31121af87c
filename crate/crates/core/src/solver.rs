//! Discrete residual of the problem, its Jacobian, damped Newton, and the
//! exponential-substitution solver for constant `μ`.
//!
//! Unknowns are the interior nodes; in 2D interior node `(i, j)` has index
//! `(i - 1) + (nx - 2)(j - 1)`, so the Jacobian has bandwidth `nx - 2`.

use serde::{Deserialize, Serialize};

use crate::fields::CoefficientField;
use crate::geometry::Grid;
use crate::linalg::BandMatrix;
use crate::{Error, Result};

/// Discretization of `-Δu - μ|∇u|²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientScheme {
    /// Per axis, with `a = u_{k+1} - u_k`, `b = u_{k-1} - u_k`:
    /// `-(e^{μa} - 1 + e^{μb} - 1) / (μ h²)`. This is the image of the
    /// standard Laplacian under `w = e^{μu}`, so it keeps the discrete
    /// problem equivalent to its gradient-free transform; it is second order
    /// where `u` is smooth and reduces to `-Δ_h` for `μ = 0`.
    #[default]
    Exponential,
    /// Standard Laplacian minus `μ` times the squared central gradient.
    Central,
}

/// `expm1(x) / x`.
fn phi(x: f64) -> f64 {
    if x.abs() < 1e-5 {
        1.0 + x * (0.5 + x / 6.0)
    } else {
        x.exp_m1() / x
    }
}

/// `(expm1(x) - x) / x²`.
fn psi(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        0.5 + x * (1.0 / 6.0 + x * (1.0 / 24.0 + x / 120.0))
    } else {
        (x.exp_m1() - x) / (x * x)
    }
}

/// The coefficient data of one discretized problem.
#[derive(Debug, Clone)]
pub struct Problem {
    pub grid: Grid,
    pub mu: CoefficientField,
    pub c: CoefficientField,
    pub h: CoefficientField,
    pub scheme: GradientScheme,
}

impl Problem {
    pub fn new(grid: Grid, mu: CoefficientField, c: CoefficientField, h: CoefficientField) -> Result<Self> {
        for f in [&mu, &c, &h] {
            grid.check_len(&f.values)?;
        }
        Ok(Self {
            grid,
            mu,
            c,
            h,
            scheme: GradientScheme::default(),
        })
    }

    pub fn with_scheme(mut self, scheme: GradientScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn unknowns(&self) -> usize {
        self.grid.interior_count()
    }

    /// Interior node indices in unknown order.
    pub fn interior_nodes(&self) -> Vec<usize> {
        self.grid.interior().collect()
    }

    pub fn to_interior(&self, full: &[f64]) -> Vec<f64> {
        self.grid.interior().map(|k| full[k]).collect()
    }

    pub fn to_full(&self, interior: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.grid.len()];
        for (k, v) in self.grid.interior().zip(interior) {
            full[k] = *v;
        }
        full
    }

    fn unknown_of(&self, node: usize) -> usize {
        let (i, j) = self.grid.ij(node);
        if self.grid.dim() == 1 {
            i - 1
        } else {
            (i - 1) + (self.grid.shape()[0] - 2) * (j - 1)
        }
    }

    fn check_state(&self, u: &[f64]) -> Result<()> {
        self.grid.check_len(u)?;
        let max_abs = (0..u.len())
            .filter(|&k| self.grid.is_boundary(k))
            .map(|k| u[k].abs())
            .fold(0.0, f64::max);
        if max_abs > 0.0 {
            return Err(Error::BoundaryValue { max_abs });
        }
        Ok(())
    }

    fn axes(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.grid.dim()).map(move |a| (a, self.grid.spacing()[a]))
    }

    /// `-Δ_h u` minus the gradient term, at interior node `k`.
    fn operator_at(&self, u: &[f64], k: usize) -> f64 {
        let mu = self.mu.values[k];
        let mut acc = 0.0;
        for (axis, h) in self.axes() {
            let (m, p) = self.grid.neighbors(k, axis);
            let (a, b) = (u[p] - u[k], u[m] - u[k]);
            acc += match self.scheme {
                GradientScheme::Exponential => -(a * phi(mu * a) + b * phi(mu * b)) / (h * h),
                GradientScheme::Central => {
                    let g = (a - b) / (2.0 * h);
                    -(a + b) / (h * h) - mu * g * g
                }
            };
        }
        acc
    }

    /// Discrete `|∇u|²` consistent with the scheme, so that
    /// `-Δ_h u = μ·G + λcu + h` at a solution. Zero on boundary nodes.
    pub fn gradient_sq(&self, u: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.grid.len()];
        for k in self.grid.interior() {
            let mu = self.mu.values[k];
            g[k] = self
                .axes()
                .map(|(axis, h)| {
                    let (m, p) = self.grid.neighbors(k, axis);
                    let (a, b) = (u[p] - u[k], u[m] - u[k]);
                    match self.scheme {
                        GradientScheme::Exponential => {
                            (a * a * psi(mu * a) + b * b * psi(mu * b)) / (h * h)
                        }
                        GradientScheme::Central => {
                            let c = (a - b) / (2.0 * h);
                            c * c
                        }
                    }
                })
                .sum();
        }
        g
    }

    /// `-Δ_h u` on interior nodes, zero on the boundary.
    pub fn neg_laplacian(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        for k in self.grid.interior() {
            out[k] = self
                .axes()
                .map(|(axis, h)| {
                    let (m, p) = self.grid.neighbors(k, axis);
                    (2.0 * u[k] - u[m] - u[p]) / (h * h)
                })
                .sum();
        }
        out
    }

    /// Source `f = μG + λcu + h` of the Poisson problem `-Δ_h u = f`.
    pub fn source(&self, u: &[f64], lambda: f64) -> Vec<f64> {
        let g = self.gradient_sq(u);
        (0..self.grid.len())
            .map(|k| {
                if self.grid.is_boundary(k) {
                    0.0
                } else {
                    self.mu.values[k] * g[k] + lambda * self.c.values[k] * u[k] + self.h.values[k]
                }
            })
            .collect()
    }

    fn residual_unchecked(&self, u: &[f64], lambda: f64) -> Vec<f64> {
        let mut r = vec![0.0; self.grid.len()];
        for k in self.grid.interior() {
            r[k] = self.operator_at(u, k) - lambda * self.c.values[k] * u[k] - self.h.values[k];
        }
        r
    }

    /// Per-node residual; boundary entries are 0.
    pub fn residual(&self, u: &[f64], lambda: f64) -> Result<Vec<f64>> {
        self.check_state(u)?;
        Ok(self.residual_unchecked(u, lambda))
    }

    /// Jacobian of [`Problem::residual`] in `u`, on interior unknowns.
    pub fn jacobian(&self, u: &[f64], lambda: f64) -> Result<BandMatrix> {
        self.check_state(u)?;
        let n = self.unknowns();
        let band = if self.grid.dim() == 1 { 1 } else { self.grid.shape()[0] - 2 };
        let mut jac = BandMatrix::zeros(n, band, band);
        for k in self.grid.interior() {
            let row = self.unknown_of(k);
            let mu = self.mu.values[k];
            let mut diag = -lambda * self.c.values[k];
            for (axis, h) in self.axes() {
                let (m, p) = self.grid.neighbors(k, axis);
                let h2 = h * h;
                let (dp, dm) = match self.scheme {
                    GradientScheme::Exponential => {
                        let ep = (mu * (u[p] - u[k])).exp();
                        let em = (mu * (u[m] - u[k])).exp();
                        (-ep / h2, -em / h2)
                    }
                    GradientScheme::Central => {
                        let g = (u[p] - u[m]) / (2.0 * h);
                        (-1.0 / h2 - mu * g / h, -1.0 / h2 + mu * g / h)
                    }
                };
                diag -= dp + dm;
                if !self.grid.is_boundary(p) {
                    jac.add(row, self.unknown_of(p), dp);
                }
                if !self.grid.is_boundary(m) {
                    jac.add(row, self.unknown_of(m), dm);
                }
            }
            jac.add(row, row, diag);
        }
        Ok(jac)
    }

    /// `∂R/∂λ = -c u` on interior unknowns.
    pub fn dlambda(&self, u: &[f64]) -> Vec<f64> {
        self.grid.interior().map(|k| -self.c.values[k] * u[k]).collect()
    }

    /// Residual level reachable in floating point for a state of this size.
    fn roundoff_floor(&self, u: &[f64], jac_norm: f64) -> f64 {
        let unorm = sup_norm(u);
        let hnorm = self.h.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        8.0 * f64::EPSILON * (jac_norm * unorm + hnorm + 1.0)
    }

    /// Stopping threshold for the residual: the requested tolerance, raised
    /// to the rounding floor for large states on fine grids.
    pub fn effective_tolerance(&self, u: &[f64], lambda: f64, tol: f64) -> f64 {
        let jn = self
            .jacobian(u, lambda)
            .map(|j| row_sum_norm(&j))
            .unwrap_or(f64::INFINITY);
        tol.max(self.roundoff_floor(u, jn))
    }

    /// Zero on the boundary; product of sines with unit maximum. This is the
    /// exact first eigenvector of `-Δ_h` on the box.
    pub fn dirichlet_mode(&self) -> Vec<f64> {
        let d = self.grid.domain();
        let (lo, len) = (d.lower(), d.lengths());
        let dim = self.grid.dim();
        let mut v: Vec<f64> = (0..self.grid.len())
            .map(|k| {
                if self.grid.is_boundary(k) {
                    return 0.0;
                }
                let p = self.grid.point(k);
                (0..dim)
                    .map(|a| (std::f64::consts::PI * (p[a] - lo[a]) / len[a]).sin())
                    .product()
            })
            .collect();
        let m = sup_norm(&v);
        v.iter_mut().for_each(|x| *x /= m);
        v
    }
}

pub(crate) fn row_sum_norm(j: &BandMatrix) -> f64 {
    let n = j.dim();
    let (kl, ku) = (j.lower_bandwidth(), j.upper_bandwidth());
    (0..n)
        .map(|i| {
            (i.saturating_sub(kl)..(i + ku + 1).min(n))
                .map(|c| j.get(i, c).abs())
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

pub fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn assemble_residual(problem: &Problem, u: &[f64], lambda: f64) -> Result<Vec<f64>> {
    problem.residual(u, lambda)
}

pub fn assemble_jacobian(problem: &Problem, u: &[f64], lambda: f64) -> Result<BandMatrix> {
    problem.jacobian(u, lambda)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum Init {
    #[default]
    Zero,
    Given(Vec<f64>),
    /// `t` times the first Dirichlet mode of the domain (unit maximum).
    ScaledEigenfunction(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub tol_residual: f64,
    pub max_newton_iters: usize,
    pub backtrack: f64,
    pub min_step: f64,
    pub init: Init,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol_residual: 1e-10,
            max_newton_iters: 50,
            backtrack: 0.5,
            min_step: 1e-6,
            init: Init::Zero,
        }
    }
}

impl SolveOptions {
    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol_residual > 0.0) {
            return Err(Error::InvalidParameter("tol_residual must be positive".into()));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidParameter("backtrack factor must lie in (0, 1)".into()));
        }
        if !(self.min_step > 0.0 && self.min_step <= 1.0) {
            return Err(Error::InvalidParameter("min_step must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Nonnegativity threshold for flagging states.
pub const NONNEG_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionState {
    pub lambda: f64,
    pub u: Vec<f64>,
    pub residual_inf: f64,
    pub nonneg: bool,
    pub converged: bool,
    pub iterations: usize,
}

impl SolutionState {
    pub fn new(problem: &Problem, lambda: f64, u: Vec<f64>, converged: bool, iterations: usize) -> Result<Self> {
        let residual_inf = sup_norm(&problem.residual(&u, lambda)?);
        Ok(Self {
            lambda,
            nonneg: u.iter().all(|&v| v >= -NONNEG_TOL),
            u,
            residual_inf,
            converged,
            iterations,
        })
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.u)
    }

    pub fn l2_norm(&self, grid: &Grid) -> f64 {
        let sq: Vec<f64> = self.u.iter().map(|v| v * v).collect();
        grid.integrate(&sq, 0.0).unwrap_or(f64::NAN).sqrt()
    }
}

fn initial_guess(problem: &Problem, init: &Init) -> Result<Vec<f64>> {
    match init {
        Init::Zero => Ok(vec![0.0; problem.grid.len()]),
        Init::Given(u) => {
            problem.check_state(u)?;
            Ok(u.clone())
        }
        Init::ScaledEigenfunction(t) => Ok(problem.dirichlet_mode().iter().map(|v| t * v).collect()),
    }
}

/// Damped Newton with residual backtracking. A factorization breakdown is
/// returned as [`Error::SingularJacobian`]; a stalled line search returns a
/// state with `converged = false`.
pub fn newton_solve(problem: &Problem, lambda: f64, opts: &SolveOptions) -> Result<SolutionState> {
    opts.validate()?;
    let mut u = initial_guess(problem, &opts.init)?;
    let mut r = problem.residual_unchecked(&u, lambda);
    let mut rn = sup_norm(&r);
    let mut iterations = 0;
    let mut converged = false;
    while iterations <= opts.max_newton_iters {
        let jac = problem.jacobian(&u, lambda)?;
        let tol = opts.tol_residual.max(problem.roundoff_floor(&u, row_sum_norm(&jac)));
        if rn <= tol {
            converged = true;
            break;
        }
        if iterations == opts.max_newton_iters || !rn.is_finite() {
            break;
        }
        let lu = jac
            .factor()
            .map_err(|_| Error::SingularJacobian { lambda })?;
        let du = lu.solve(&problem.to_interior(&r));
        if du.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularJacobian { lambda });
        }
        let step = problem.to_full(&du);
        let mut t = 1.0;
        let accepted = loop {
            let trial: Vec<f64> = u.iter().zip(&step).map(|(a, d)| a - t * d).collect();
            let tr = problem.residual_unchecked(&trial, lambda);
            let tn = sup_norm(&tr);
            if tn.is_finite() && tn < (1.0 - 1e-4 * t) * rn {
                break Some((trial, tr, tn));
            }
            t *= opts.backtrack;
            if t < opts.min_step {
                break None;
            }
        };
        iterations += 1;
        match accepted {
            Some((trial, tr, tn)) => {
                u = trial;
                r = tr;
                rn = tn;
            }
            None => break,
        }
    }
    SolutionState::new(problem, lambda, u, converged, iterations)
}

/// Solves the transformed problem for `w = e^{μ₀u} - 1`,
/// `-Δ_h w = μ₀(1 + w)(λc·ln(1 + w)/μ₀ + h)`, and maps back. Requires a
/// constant `μ₀ > 0`.
pub fn cole_hopf_solve(problem: &Problem, lambda: f64, opts: &SolveOptions) -> Result<SolutionState> {
    opts.validate()?;
    let mu0 = match problem.mu.constant_value() {
        Some(m) if m > 0.0 => m,
        _ => return Err(Error::NonConstantMu),
    };
    let grid = &problem.grid;
    let c = &problem.c.values;
    let h = &problem.h.values;
    let lap = problem.clone().with_scheme(GradientScheme::Central);
    let zero_mu = CoefficientField {
        values: vec![0.0; grid.len()],
        ..problem.mu.clone()
    };
    let lap = Problem { mu: zero_mu, ..lap };

    let residual = |w: &[f64]| -> Option<Vec<f64>> {
        let nl = lap.neg_laplacian(w);
        let mut r = vec![0.0; grid.len()];
        for k in grid.interior() {
            if w[k] <= -1.0 {
                return None;
            }
            let s = mu0 * (1.0 + w[k]) * (lambda * c[k] * w[k].ln_1p() / mu0 + h[k]);
            r[k] = nl[k] - s;
        }
        Some(r)
    };

    let mut w = match &opts.init {
        Init::Zero => vec![0.0; grid.len()],
        other => initial_guess(problem, other)?
            .iter()
            .map(|u| (mu0 * u).exp_m1())
            .collect(),
    };
    let mut r = residual(&w).ok_or(Error::InvalidBranch)?;
    let mut rn = sup_norm(&r);
    let mut iterations = 0;
    let mut converged = false;
    let tol = opts.tol_residual * mu0;
    while iterations <= opts.max_newton_iters {
        let mut jac = lap.jacobian(&vec![0.0; grid.len()], 0.0)?;
        let scale = row_sum_norm(&jac) * sup_norm(&w) + 1.0;
        if rn <= tol.max(8.0 * f64::EPSILON * scale) {
            converged = true;
            break;
        }
        if iterations == opts.max_newton_iters {
            break;
        }
        for (row, k) in grid.interior().enumerate() {
            let d = lambda * c[k] * (w[k].ln_1p() + 1.0) + mu0 * h[k];
            jac.add(row, row, -d);
        }
        let lu = jac.factor().map_err(|_| Error::SingularJacobian { lambda })?;
        let step = problem.to_full(&lu.solve(&problem.to_interior(&r)));
        let mut t = 1.0;
        let mut hit_invalid = false;
        let accepted = loop {
            let trial: Vec<f64> = w.iter().zip(&step).map(|(a, d)| a - t * d).collect();
            match residual(&trial) {
                Some(tr) => {
                    let tn = sup_norm(&tr);
                    if tn.is_finite() && tn < (1.0 - 1e-4 * t) * rn {
                        break Some((trial, tr, tn));
                    }
                }
                None => hit_invalid = true,
            }
            t *= opts.backtrack;
            if t < opts.min_step {
                break None;
            }
        };
        iterations += 1;
        match accepted {
            Some((trial, tr, tn)) => {
                w = trial;
                r = tr;
                rn = tn;
            }
            None if hit_invalid => return Err(Error::InvalidBranch),
            None => break,
        }
    }
    if !converged && iterations >= opts.max_newton_iters {
        return Err(Error::NoConvergence(format!(
            "transformed Newton stopped after {iterations} iterations at residual {rn:e}"
        )));
    }
    let u: Vec<f64> = (0..grid.len())
        .map(|k| if grid.is_boundary(k) { 0.0 } else { w[k].ln_1p() / mu0 })
        .collect();
    SolutionState::new(problem, lambda, u, converged, iterations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{make_field, FieldSpec};
    use crate::geometry::Domain;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn field(g: &Grid, v: f64) -> CoefficientField {
        make_field(&FieldSpec::constant(v), g).unwrap()
    }

    fn model(n: usize, scheme: GradientScheme) -> Problem {
        let g = Grid::new(Domain::interval(0.0, 1.0).unwrap(), n).unwrap();
        Problem::new(g.clone(), field(&g, 1.0), field(&g, 1.0), field(&g, 1.0))
            .unwrap()
            .with_scheme(scheme)
    }

    fn square(n: usize, mu: f64) -> Problem {
        let g = Grid::with_shape(Domain::rectangle(0.0, 1.0, 0.0, 2.0).unwrap(), [n, n + 2]).unwrap();
        let c = make_field(&FieldSpec::DistancePower { coef: 1.5, sigma: 1.0 }, &g).unwrap();
        Problem::new(g.clone(), field(&g, mu), c, field(&g, 1.0)).unwrap()
    }

    #[test]
    fn zero_state_zero_data_has_zero_residual() {
        let p = model(11, GradientScheme::Exponential);
        let p = Problem { h: field(&p.grid, 0.0), ..p };
        let r = p.residual(&[0.0; 11], 3.7).unwrap();
        assert!(r.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn manufactured_sine_is_second_order() {
        let mut errs = Vec::new();
        for n in [21, 41, 81] {
            let g = Grid::new(Domain::interval(0.0, 1.0).unwrap(), n).unwrap();
            let h = make_field(&FieldSpec::constant(0.0), &g).unwrap();
            let hv = g.sample(|p| PI * PI * (PI * p[0]).sin());
            let h = CoefficientField { values: hv, ..h };
            let p = Problem::new(g.clone(), field(&g, 0.0), field(&g, 0.0), h).unwrap();
            let mut u = g.sample(|x| (PI * x[0]).sin());
            u[0] = 0.0;
            u[n - 1] = 0.0;
            let r = sup_norm(&p.residual(&u, 0.0).unwrap());
            assert!(r < 1.0 * g.h() * g.h() * PI.powi(4));
            errs.push(r);
        }
        assert!(errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5);
    }

    #[test]
    fn jacobian_at_zero_is_shifted_laplacian() {
        for scheme in [GradientScheme::Exponential, GradientScheme::Central] {
            let p = model(7, scheme);
            let h = p.grid.h();
            let j = p.jacobian(&[0.0; 7], 2.0).unwrap();
            assert_eq!(j.dim(), 5);
            assert_eq!((j.lower_bandwidth(), j.upper_bandwidth()), (1, 1));
            for i in 0..5 {
                assert!((j.get(i, i) - (2.0 / (h * h) - 2.0)).abs() < 1e-9);
                if i + 1 < 5 {
                    assert!((j.get(i, i + 1) + 1.0 / (h * h)).abs() < 1e-9);
                }
            }
        }
    }

    fn fd_check(p: &Problem, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = p.unknowns();
        let u = p.to_full(&(0..n).map(|_| rng.gen_range(0.0..1.0)).collect::<Vec<_>>());
        let v = p.to_full(&(0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>());
        let lambda = 1.3;
        let eps = 1e-6;
        let r0 = p.residual(&u, lambda).unwrap();
        let ue: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + eps * b).collect();
        let r1 = p.residual(&ue, lambda).unwrap();
        let jv = p.to_full(&p.jacobian(&u, lambda).unwrap().matvec(&p.to_interior(&v)));
        let scale = sup_norm(&jv).max(1.0);
        (0..u.len())
            .map(|k| ((r1[k] - r0[k]) / eps - jv[k]).abs())
            .fold(0.0, f64::max)
            / scale
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        for seed in 0..100 {
            for scheme in [GradientScheme::Exponential, GradientScheme::Central] {
                let p = model(9, scheme);
                assert!(fd_check(&p, seed) < 1e-4, "1d seed {seed}");
                let q = square(6, 0.7).with_scheme(scheme);
                assert!(fd_check(&q, seed) < 1e-4, "2d seed {seed}");
            }
        }
    }

    #[test]
    fn two_dimensional_bandwidth() {
        let p = square(7, 1.0);
        let j = p.jacobian(&vec![0.0; p.grid.len()], 0.0).unwrap();
        assert_eq!(j.dim(), 5 * 7);
        assert_eq!(j.lower_bandwidth(), 5);
    }

    #[test]
    fn trivial_data_converges_immediately() {
        let p = model(21, GradientScheme::Exponential);
        let p = Problem { h: field(&p.grid, 0.0), ..p };
        let s = newton_solve(&p, 0.0, &SolveOptions::default()).unwrap();
        assert!(s.converged && s.iterations <= 1);
        assert!(s.u.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn newton_and_cole_hopf_agree() {
        for lambda in [0.0, 1.0] {
            let p = model(101, GradientScheme::Exponential);
            let a = newton_solve(&p, lambda, &SolveOptions::default()).unwrap();
            let b = cole_hopf_solve(&p, lambda, &SolveOptions::default()).unwrap();
            assert!(a.converged && b.converged);
            assert!(a.nonneg && b.nonneg);
            let diff = a.u.iter().zip(&b.u).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(diff < 1e-8, "lambda {lambda}: {diff:e}");
            assert!(b.residual_inf < 1e-8);
        }
    }

    #[test]
    fn central_scheme_agrees_after_extrapolation() {
        // the two discretizations differ at O(h²); Richardson removes it
        let mid = |n: usize, f: &dyn Fn(&Problem) -> SolutionState| {
            let p = model(n, GradientScheme::Central);
            f(&p).u[(n - 1) / 2]
        };
        let newton = |p: &Problem| newton_solve(p, 0.0, &SolveOptions::default()).unwrap();
        let hopf = |p: &Problem| cole_hopf_solve(p, 0.0, &SolveOptions::default()).unwrap();
        let rich = |f: &dyn Fn(&Problem) -> SolutionState| (4.0 * mid(161, f) - mid(81, f)) / 3.0;
        let (a, b) = (rich(&newton), rich(&hopf));
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }

    #[test]
    fn cole_hopf_requires_constant_mu() {
        let g = Grid::new(Domain::interval(0.0, 3.0).unwrap(), 31).unwrap();
        let mu = make_field(&FieldSpec::indicator(Domain::interval(1.0, 2.0).unwrap()), &g).unwrap();
        let p = Problem::new(g.clone(), mu, field(&g, 1.0), field(&g, 1.0)).unwrap();
        assert!(matches!(cole_hopf_solve(&p, 0.0, &SolveOptions::default()), Err(Error::NonConstantMu)));
        let s = cole_hopf_solve(&Problem { h: field(&g, 0.0), mu: field(&g, 1.0), ..p }, 0.0, &SolveOptions::default()).unwrap();
        assert!(s.u.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn boundary_values_are_rejected() {
        let p = model(5, GradientScheme::Exponential);
        assert!(matches!(p.residual(&[1.0, 0.0, 0.0, 0.0, 0.0], 0.0), Err(Error::BoundaryValue { .. })));
        assert!(matches!(p.residual(&[0.0; 4], 0.0), Err(Error::GridMismatch { .. })));
    }

    #[test]
    fn two_dimensional_solve_is_nonnegative() {
        let p = square(15, 1.0);
        let s = newton_solve(&p, 1.0, &SolveOptions::default()).unwrap();
        assert!(s.converged && s.nonneg);
        assert!(s.residual_inf <= 1e-10);
        let recomputed = sup_norm(&p.residual(&s.u, 1.0).unwrap());
        assert!((recomputed - s.residual_inf).abs() <= 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn minimal_solution_is_nonnegative(t in 0.0..0.9f64, mu in 0.0..2.0f64, n in 11usize..60) {
            // γ₁ = π² for c ≡ 1 on (0, 1)
            let g = Grid::new(Domain::interval(0.0, 1.0).unwrap(), n).unwrap();
            let hv = g.sample(|x| 1.0 + (5.0 * x[0]).sin().max(0.0));
            let h = CoefficientField { values: hv, ..field(&g, 0.0) };
            let p = Problem::new(g.clone(), field(&g, mu), field(&g, 1.0), h).unwrap();
            // small data keeps the minimal branch alive up to λ close to γ₁
            let p = Problem { h: p.h.scaled(0.01), ..p };
            let lambda = t * PI * PI * 0.9;
            if let Ok(s) = newton_solve(&p, lambda, &SolveOptions::default()) {
                if s.converged {
                    prop_assert!(s.nonneg);
                }
            }
        }
    }
}
