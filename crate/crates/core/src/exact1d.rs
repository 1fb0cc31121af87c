//! Closed-form solutions on `(0, 3)` with `μ = χ_(1,2)`, `c = χ_(2,3)`,
//! `h = 0`: for every `j ≥ 1`
//!
//! ```text
//! u_j(x) = j x                          on [0, 1)
//!        = j + ln(1 + j(x - 1))         on [1, 2)
//!        = A_j sin((π/2 + ε_j)(3 - x))  on [2, 3]
//! ```
//!
//! solves the problem at `λ_j = (π/2 + ε_j)²`, with `A_j cos ε_j = j + ln(j+1)`
//! (continuity at 2) and `(π/2 + ε_j) tan ε_j = (j/(j+1)) / (j + ln(j+1))`
//! (continuity of the derivative). `‖u_j‖∞ ≥ j` while `λ_j → π²/4`.

use std::f64::consts::FRAC_PI_2;

use serde::Serialize;

use crate::fields::{make_field, FieldSpec};
use crate::geometry::{Domain, Grid};
use crate::solver::Problem;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactFamilyMember {
    pub j: u32,
    pub eps: f64,
    pub amp: f64,
    pub lambda: f64,
}

/// Right-hand side of the derivative matching condition.
pub fn matching_rhs(j: u32) -> f64 {
    let j = j as f64;
    (j / (j + 1.0)) / (j + (j + 1.0).ln())
}

/// `g(ε) = (π/2 + ε) tan ε - rhs(j)`; increasing on `[0, π/2)`.
pub fn matching_residual(eps: f64, j: u32) -> f64 {
    (FRAC_PI_2 + eps) * eps.tan() - matching_rhs(j)
}

/// Root of [`matching_residual`] in `(0, π/2)`.
pub fn solve_epsilon(j: u32) -> Result<f64> {
    if j == 0 {
        return Err(Error::InvalidParameter("family index starts at 1".into()));
    }
    let (mut lo, mut hi) = (1e-8, FRAC_PI_2 - 1e-8);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if matching_residual(mid, j) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    let mut eps = 0.5 * (lo + hi);
    for _ in 0..4 {
        let t = eps.tan();
        let dg = t + (FRAC_PI_2 + eps) * (1.0 + t * t);
        let next = eps - matching_residual(eps, j) / dg;
        if !(next > lo - 1e-12 && next < hi + 1e-12) {
            break;
        }
        eps = next;
    }
    Ok(eps)
}

pub fn family_member(j: u32) -> Result<ExactFamilyMember> {
    let eps = solve_epsilon(j)?;
    let jf = j as f64;
    Ok(ExactFamilyMember {
        j,
        eps,
        amp: (jf + (jf + 1.0).ln()) / eps.cos(),
        lambda: (FRAC_PI_2 + eps).powi(2),
    })
}

/// Members `first..=last`.
pub fn family_table(first: u32, last: u32) -> Result<Vec<ExactFamilyMember>> {
    (first..=last).map(family_member).collect()
}

impl ExactFamilyMember {
    pub fn frequency(&self) -> f64 {
        FRAC_PI_2 + self.eps
    }

    /// Same `ε` shift applied to every quantity derived from it, with the
    /// amplitude still fixed by continuity at `x = 2`. Used for sensitivity
    /// checks; the result is not a solution.
    pub fn with_eps(&self, eps: f64) -> Self {
        let jf = self.j as f64;
        Self {
            eps,
            amp: (jf + (jf + 1.0).ln()) / eps.cos(),
            lambda: (FRAC_PI_2 + eps).powi(2),
            ..*self
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        let j = self.j as f64;
        if x < 1.0 {
            j * x
        } else if x < 2.0 {
            j + (j * (x - 1.0)).ln_1p()
        } else {
            self.amp * (self.frequency() * (3.0 - x)).sin()
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let j = self.j as f64;
        if x < 1.0 {
            j
        } else if x < 2.0 {
            j / (1.0 + j * (x - 1.0))
        } else {
            -self.frequency() * self.amp * (self.frequency() * (3.0 - x)).cos()
        }
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        let j = self.j as f64;
        if x < 1.0 {
            0.0
        } else if x < 2.0 {
            let d = 1.0 + j * (x - 1.0);
            -j * j / (d * d)
        } else {
            -self.frequency().powi(2) * self.value(x)
        }
    }

    /// Location of the maximum, `3 - (π/2)/(π/2 + ε)`, where `u = A`.
    pub fn argmax(&self) -> f64 {
        3.0 - FRAC_PI_2 / self.frequency()
    }

    pub fn sample(&self, grid: &Grid) -> Vec<f64> {
        (0..grid.len())
            .map(|k| if grid.is_boundary(k) { 0.0 } else { self.value(grid.x(k)) })
            .collect()
    }
}

pub fn evaluate_member(member: &ExactFamilyMember, x: f64) -> f64 {
    member.value(x)
}

/// Grid on `(0, 3)` whose nodes include the kinks `x = 1, 2`.
pub fn aligned_grid(resolution: usize) -> Result<Grid> {
    if resolution < 4 || !(resolution - 1).is_multiple_of(3) {
        return Err(Error::MisalignedSubBox(format!(
            "{resolution} nodes on (0, 3) do not put nodes at x = 1, 2; need 3m + 1"
        )));
    }
    Grid::new(Domain::interval(0.0, 3.0)?, resolution)
}

/// Coefficients of the family on a grid over `(0, 3)`.
pub fn family_problem(grid: &Grid) -> Result<Problem> {
    let mu = make_field(&FieldSpec::indicator(Domain::interval(1.0, 2.0)?), grid)?;
    let c = make_field(&FieldSpec::indicator(Domain::interval(2.0, 3.0)?), grid)?;
    let h = make_field(&FieldSpec::constant(0.0), grid)?;
    Problem::new(grid.clone(), mu, c, h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MemberResidual {
    /// Max over nodes whose stencil does not straddle a kink.
    pub smooth_inf: f64,
    /// Max over the kink nodes `x = 1, 2`.
    pub kink_inf: f64,
    pub l1: f64,
}

pub fn residual_of_member(member: &ExactFamilyMember, problem: &Problem) -> Result<MemberResidual> {
    let grid = &problem.grid;
    let u = member.sample(grid);
    let r = problem.residual(&u, member.lambda)?;
    let tol = 1e-9 * grid.h();
    let mut out = MemberResidual {
        smooth_inf: 0.0,
        kink_inf: 0.0,
        l1: 0.0,
    };
    for k in grid.interior() {
        let x = grid.x(k);
        let a = r[k].abs();
        if (x - 1.0).abs() < tol || (x - 2.0).abs() < tol {
            out.kink_inf = out.kink_inf.max(a);
        } else {
            out.smooth_inf = out.smooth_inf.max(a);
        }
        out.l1 += a * grid.spacing()[0];
    }
    Ok(out)
}
