//! Finite-difference laboratory for the Dirichlet problem
//!
//! ```text
//! -Δu = μ(x)|∇u|² + λ c(x) u + h(x)  in Ω,   u = 0 on ∂Ω
//! ```
//!
//! with a possibly noncoercive gradient coefficient `μ ≥ 0`. The crate
//! discretizes the problem on uniform 1D/2D grids, solves it with damped
//! Newton (plus an independent exponential-substitution solver for constant
//! `μ`), traces solution branches in `λ` by pseudo-arclength continuation,
//! computes the weighted principal eigenvalue that bounds the nonnegative
//! solution set, builds an exact one-dimensional family of solutions with
//! unbounded norms, and evaluates weighted norms and functional inequalities
//! involving the distance to the boundary.
//!
//! Module map:
//!
//! * [`geometry`]: domains, grids, distance to the boundary, quadrature.
//! * [`fields`]: coefficient fields and hypothesis checks.
//! * [`linalg`]: tridiagonal, banded and dense direct solvers.
//! * [`solver`]: residual, Jacobian, Newton and exponential-substitution solves.
//! * [`spectral`]: weighted eigenvalues and eigenfunction bounds.
//! * [`continuation`]: branch tracing, folds, multiplicity, a priori functionals.
//! * [`exact1d`]: the closed-form counterexample family on `(0, 3)`.
//! * [`analysis`]: weighted norms and inequality checks.
//! * [`config`] and [`cli`]: experiment files and the command-line driver.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too; index loops
// mirror the stencil formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod cli;
pub mod config;
pub mod continuation;
pub mod error;
pub mod exact1d;
pub mod fields;
pub mod geometry;
pub mod linalg;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
