//! Weighted principal eigenvalues `-Δ_h φ = γ W φ` with zero boundary values.

use serde::Serialize;

use crate::fields::{make_field, CoefficientField, FieldSpec};
use crate::geometry::{BoundaryRule, Domain, Grid, SUPPORT_EPS};
use crate::linalg::BandMatrix;
use crate::solver::{sup_norm, Problem};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenPair {
    pub value: f64,
    /// Nodal values on the grid the pair was requested for; unit trapezoid
    /// L² norm, positive in the interior.
    pub vector: Vec<f64>,
    /// `‖-Δ_h φ - value·W φ‖∞ / ‖φ‖∞`.
    pub residual_inf: f64,
    pub iterations: usize,
}

const MAX_ITERS: usize = 2000;

fn laplacian(grid: &Grid) -> Result<(Problem, BandMatrix)> {
    let zero = make_field(&FieldSpec::constant(0.0), grid)?;
    let p = Problem::new(grid.clone(), zero.clone(), zero.clone(), zero)?;
    let a = p.jacobian(&vec![0.0; grid.len()], 0.0)?;
    Ok((p, a))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Smallest eigenvalue of `-Δ_h φ = γ w φ` for a nonnegative, nontrivial
/// nodal weight `w`.
///
/// Plain inverse iteration until the eigenvalue settles to 1e-7, then
/// inverse iteration shifted to that estimate until the increment is below
/// 1e-10 (relative) and the eigen-residual is at rounding level.
pub fn weighted_eigenpair(grid: &Grid, weight: &[f64]) -> Result<EigenPair> {
    grid.check_len(weight)?;
    if let Some(k) = (0..grid.len()).find(|&k| !grid.is_boundary(k) && weight[k] < -SUPPORT_EPS) {
        return Err(Error::InvalidParameter(format!(
            "eigen weight must be nonnegative, got {} at node {k}",
            weight[k]
        )));
    }
    let (p, a) = laplacian(grid)?;
    let w = p.to_interior(weight);
    if w.iter().all(|v| v.abs() <= SUPPORT_EPS) {
        return Err(Error::ZeroWeight);
    }
    let wx = |x: &[f64]| -> Vec<f64> { x.iter().zip(&w).map(|(a, b)| a * b).collect() };
    let lu = a.factor()?;
    let mut x = p.to_interior(&p.dirichlet_mode());
    let mut rho = f64::NAN;
    let mut iterations = 0;
    let mut increment = f64::INFINITY;
    while iterations < MAX_ITERS {
        iterations += 1;
        let b = wx(&x);
        let y = lu.solve(&b);
        let next = dot(&y, &b) / dot(&y, &wx(&y));
        increment = ((next - rho) / next).abs();
        rho = next;
        let n = sup_norm(&y);
        x = y.iter().map(|v| v / n).collect();
        if increment < 1e-7 {
            break;
        }
    }
    let residual = |x: &[f64], rho: f64| -> f64 {
        let ax = a.matvec(x);
        let r = ax.iter().zip(wx(x)).map(|(p, q)| p - rho * q);
        r.fold(0.0f64, |m, v| m.max(v.abs())) / sup_norm(x)
    };
    let mut sigma = rho;
    let shifted = loop {
        let mut m = a.clone();
        for (i, wi) in w.iter().enumerate() {
            m.add(i, i, -sigma * wi);
        }
        match m.factor() {
            Ok(f) => break f,
            Err(_) => sigma *= 1.0 - 1e-10,
        }
    };
    let scale = crate::solver::row_sum_norm(&a);
    while iterations < MAX_ITERS {
        let res = residual(&x, rho);
        if increment <= 1e-10 * rho.abs().max(1.0) && res <= 64.0 * f64::EPSILON * scale {
            break;
        }
        iterations += 1;
        let y = shifted.solve(&wx(&x));
        let n = sup_norm(&y);
        x = y.iter().map(|v| v / n).collect();
        let next = dot(&x, &a.matvec(&x)) / dot(&x, &wx(&x));
        increment = (next - rho).abs();
        rho = next;
    }
    if iterations >= MAX_ITERS {
        return Err(Error::NoConvergence(format!(
            "eigen iteration stalled at increment {increment:e}"
        )));
    }
    let res = residual(&x, rho);
    let mut full = p.to_full(&x);
    let sign = if full.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    let tw = grid.weights(BoundaryRule::Include);
    let norm = full.iter().zip(&tw).map(|(v, q)| v * v * q).sum::<f64>().sqrt();
    full.iter_mut().for_each(|v| *v *= sign / norm);
    Ok(EigenPair {
        value: rho,
        vector: full,
        residual_inf: res,
        iterations,
    })
}

/// Principal eigenvalue of `-Δ_h φ = γ c φ`; no nontrivial nonnegative
/// solution of the problem exists for `λ > γ₁`.
pub fn gamma1(c: &CoefficientField, grid: &Grid) -> Result<EigenPair> {
    weighted_eigenpair(grid, &c.values)
}

/// First Dirichlet eigenpair of `-Δ` on an axis-aligned sub-box whose faces
/// lie on grid lines. The vector is embedded in `grid` (zero outside).
pub fn dirichlet_eigpair(sub_box: &Domain, grid: &Grid) -> Result<EigenPair> {
    sub_box.validate()?;
    if !grid.domain().contains_box(sub_box, 1e-12) || sub_box.dimension() != grid.dim() {
        return Err(Error::SubBoxOutsideDomain(sub_box.describe()));
    }
    let dim = grid.dim();
    let (glo, slo, shi) = (grid.domain().lower(), sub_box.lower(), sub_box.upper());
    let mut offset = [0usize; 2];
    let mut shape = [1usize; 2];
    for a in 0..dim {
        let h = grid.spacing()[a];
        let lo = (slo[a] - glo[a]) / h;
        let hi = (shi[a] - glo[a]) / h;
        if (lo - lo.round()).abs() > 1e-8 || (hi - hi.round()).abs() > 1e-8 {
            return Err(Error::MisalignedSubBox(format!(
                "{} against spacing {h}",
                sub_box.describe()
            )));
        }
        offset[a] = lo.round() as usize;
        shape[a] = (hi.round() - lo.round()) as usize + 1;
    }
    let sub = Grid::with_shape(*sub_box, shape)?;
    let pair = weighted_eigenpair(&sub, &vec![1.0; sub.len()])?;
    let mut full = vec![0.0; grid.len()];
    for k in 0..sub.len() {
        let (i, j) = sub.ij(k);
        full[grid.node(i + offset[0], j + offset[1])] = pair.vector[k];
    }
    Ok(EigenPair { vector: full, ..pair })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolvabilityReport {
    pub mu0: f64,
    /// Smallest eigenvalue of `-Δ_h φ = ν h φ`.
    pub nu1: f64,
    pub margin: f64,
    pub solvable: bool,
    /// The Sobolev-constant criterion needs `n ≥ 3`.
    pub sobolev_criterion: String,
}

/// Sufficient condition for solvability at `λ = 0` with constant `μ₀`:
/// `μ₀ < ν₁(h)`.
pub fn check_p0_solvability(mu0: f64, h: &CoefficientField, grid: &Grid) -> Result<SolvabilityReport> {
    if !(mu0.is_finite() && mu0 >= 0.0) {
        return Err(Error::InvalidParameter(format!("mu0 must be a nonnegative constant, got {mu0}")));
    }
    let nu1 = weighted_eigenpair(grid, &h.values)?.value;
    Ok(SolvabilityReport {
        mu0,
        nu1,
        margin: nu1 - mu0,
        solvable: mu0 < nu1,
        sobolev_criterion: if grid.dim() <= 2 {
            "not evaluated (n <= 2)".into()
        } else {
            "not evaluated".into()
        },
    })
}

/// `(min, max)` of `φ/δ` over interior nodes.
pub fn eigen_distance_comparability(phi: &[f64], grid: &Grid) -> Result<(f64, f64)> {
    grid.check_len(phi)?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for k in grid.interior() {
        let r = phi[k] / grid.delta()[k];
        lo = lo.min(r);
        hi = hi.max(r);
    }
    if lo <= 0.0 {
        return Err(Error::InvalidParameter("eigenfunction is not positive in the interior".into()));
    }
    Ok((lo, hi))
}
