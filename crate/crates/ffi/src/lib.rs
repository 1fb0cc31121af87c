//! C ABI over `gradlab`.
//!
//! Objects are opaque handles created by `gl_*_new`/`gl_*` constructors and
//! released with the matching `gl_*_free`. Every fallible call returns a
//! [`GlStatus`]; on failure, `gl_last_error()` gives a message for the
//! calling thread. Panics never cross the boundary.

// Pointer arguments are validated (null checks) but otherwise trusted, as
// in any C API; marking every entry point `unsafe` would not change that.
#![allow(clippy::not_unsafe_ptr_arg_deref)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gradlab::config::ExperimentConfig;
use gradlab::continuation::{trace_branch, Branch, ContinuationOptions, Direction};
use gradlab::exact1d::family_member;
use gradlab::fields::{make_field, CoefficientField, FieldSpec};
use gradlab::geometry::{Domain, Grid};
use gradlab::solver::{newton_solve, Init, Problem, SolutionState, SolveOptions};
use gradlab::spectral::gamma1;
use gradlab::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad domain, resolution, field or configuration.
    InvalidArgument = 2,
    /// Iteration failed to converge or a system was singular.
    Numerical = 3,
    BufferTooSmall = 4,
    Io = 5,
    Panic = 6,
}

pub struct GlGrid(Grid);
pub struct GlProblem(Problem);
pub struct GlSolution(SolutionState);
pub struct GlBranch(Branch);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(e: &Error) -> GlStatus {
    if e.is_config() {
        GlStatus::InvalidArgument
    } else if matches!(e, Error::Io(_)) {
        GlStatus::Io
    } else {
        GlStatus::Numerical
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (GlStatus, String)>) -> GlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GlStatus::Ok,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            GlStatus::Panic
        }
    }
}

fn lib<T>(r: gradlab::Result<T>) -> Result<T, (GlStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn non_null<'a, T>(p: *const T, name: &str) -> Result<&'a T, (GlStatus, String)> {
    // SAFETY: the caller passes either null or a pointer obtained from this
    // library that has not been freed.
    unsafe { p.as_ref() }.ok_or((GlStatus::NullPointer, format!("{name} is null")))
}

fn out_ptr<T>(p: *mut *mut T, value: T) -> Result<(), (GlStatus, String)> {
    if p.is_null() {
        return Err((GlStatus::NullPointer, "output pointer is null".into()));
    }
    // SAFETY: checked non-null; the caller provides writable storage.
    unsafe { *p = Box::into_raw(Box::new(value)) };
    Ok(())
}

fn write_scalar<T>(p: *mut T, v: T) {
    if !p.is_null() {
        // SAFETY: optional output, caller-owned storage.
        unsafe { *p = v };
    }
}

fn slice<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], (GlStatus, String)> {
    if p.is_null() {
        return Err((GlStatus::NullPointer, format!("{name} is null")));
    }
    // SAFETY: the caller guarantees `len` readable doubles at `p`.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

/// Message of the last failed call on this thread; valid until the next
/// failing call. Never null.
#[no_mangle]
pub extern "C" fn gl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Uniform grid with `resolution` nodes on `[a, b]`.
#[no_mangle]
pub extern "C" fn gl_grid_new_interval(a: f64, b: f64, resolution: usize, out: *mut *mut GlGrid) -> GlStatus {
    guard(|| {
        let g = lib(Domain::interval(a, b).and_then(|d| Grid::new(d, resolution)))?;
        out_ptr(out, GlGrid(g))
    })
}

/// Uniform grid with `resolution` nodes per axis on `[ax, bx] × [ay, by]`.
#[no_mangle]
pub extern "C" fn gl_grid_new_rectangle(
    ax: f64,
    bx: f64,
    ay: f64,
    by: f64,
    resolution: usize,
    out: *mut *mut GlGrid,
) -> GlStatus {
    guard(|| {
        let g = lib(Domain::rectangle(ax, bx, ay, by).and_then(|d| Grid::new(d, resolution)))?;
        out_ptr(out, GlGrid(g))
    })
}

/// Number of nodes, boundary included; 0 for a null handle.
#[no_mangle]
pub extern "C" fn gl_grid_len(grid: *const GlGrid) -> usize {
    // SAFETY: see `non_null`.
    unsafe { grid.as_ref() }.map_or(0, |g| g.0.len())
}

/// Copies the node coordinates (`dim` per node, interleaved) into `buf`.
#[no_mangle]
pub extern "C" fn gl_grid_coordinates(grid: *const GlGrid, buf: *mut f64, len: usize) -> GlStatus {
    guard(|| {
        let g = &non_null(grid, "grid")?.0;
        let coords: Vec<f64> = (0..g.len()).flat_map(|k| g.point(k).to_vec()).collect();
        copy_out(&coords, buf, len)
    })
}

#[no_mangle]
pub extern "C" fn gl_grid_free(grid: *mut GlGrid) {
    if !grid.is_null() {
        // SAFETY: pointer came from `Box::into_raw` in this library.
        drop(unsafe { Box::from_raw(grid) });
    }
}

fn copy_out(values: &[f64], buf: *mut f64, len: usize) -> Result<(), (GlStatus, String)> {
    if buf.is_null() {
        return Err((GlStatus::NullPointer, "buffer is null".into()));
    }
    if len < values.len() {
        return Err((
            GlStatus::BufferTooSmall,
            format!("buffer holds {len} values, need {}", values.len()),
        ));
    }
    // SAFETY: `buf` has room for `len ≥ values.len()` doubles.
    unsafe { ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len()) };
    Ok(())
}

fn nodal(grid: &Grid, values: &[f64]) -> gradlab::Result<CoefficientField> {
    grid.check_len(values)?;
    let mut f = make_field(&FieldSpec::constant(0.0), grid)?;
    f.values = values.to_vec();
    f.support = None;
    Ok(f)
}

/// Problem with constant coefficients on a copy of `grid`.
#[no_mangle]
pub extern "C" fn gl_problem_new_constant(
    grid: *const GlGrid,
    mu: f64,
    c: f64,
    h: f64,
    out: *mut *mut GlProblem,
) -> GlStatus {
    guard(|| {
        let g = &non_null(grid, "grid")?.0;
        let field = |v| make_field(&FieldSpec::constant(v), g);
        let p = lib(field(mu).and_then(|m| Problem::new(g.clone(), m, field(c)?, field(h)?)))?;
        out_ptr(out, GlProblem(p))
    })
}

/// Problem with nodal coefficient values; each array holds `len` values,
/// one per grid node.
#[no_mangle]
pub extern "C" fn gl_problem_new_nodal(
    grid: *const GlGrid,
    mu: *const f64,
    c: *const f64,
    h: *const f64,
    len: usize,
    out: *mut *mut GlProblem,
) -> GlStatus {
    guard(|| {
        let g = &non_null(grid, "grid")?.0;
        let (mu, c, h) = (slice(mu, len, "mu")?, slice(c, len, "c")?, slice(h, len, "h")?);
        let p = lib((|| Problem::new(g.clone(), nodal(g, mu)?, nodal(g, c)?, nodal(g, h)?))())?;
        out_ptr(out, GlProblem(p))
    })
}

/// Problem described by an experiment file in TOML (NUL-terminated text).
#[no_mangle]
pub extern "C" fn gl_problem_from_toml(text: *const c_char, out: *mut *mut GlProblem) -> GlStatus {
    guard(|| {
        if text.is_null() {
            return Err((GlStatus::NullPointer, "text is null".into()));
        }
        // SAFETY: caller passes a NUL-terminated string.
        let s = unsafe { CStr::from_ptr(text) }
            .to_str()
            .map_err(|e| (GlStatus::InvalidArgument, e.to_string()))?;
        let p = lib(ExperimentConfig::from_toml(s).and_then(|c| c.problem()))?;
        out_ptr(out, GlProblem(p))
    })
}

/// Nodes of the problem's grid; 0 for a null handle.
#[no_mangle]
pub extern "C" fn gl_problem_len(problem: *const GlProblem) -> usize {
    // SAFETY: see `non_null`.
    unsafe { problem.as_ref() }.map_or(0, |p| p.0.grid.len())
}

#[no_mangle]
pub extern "C" fn gl_problem_free(problem: *mut GlProblem) {
    if !problem.is_null() {
        // SAFETY: pointer came from `Box::into_raw` in this library.
        drop(unsafe { Box::from_raw(problem) });
    }
}

/// Principal weighted eigenvalue `γ₁` of the problem's `c`.
#[no_mangle]
pub extern "C" fn gl_problem_gamma1(problem: *const GlProblem, out: *mut f64) -> GlStatus {
    guard(|| {
        let p = &non_null(problem, "problem")?.0;
        if out.is_null() {
            return Err((GlStatus::NullPointer, "output pointer is null".into()));
        }
        let v = lib(gamma1(&p.c, &p.grid))?.value;
        write_scalar(out, v);
        Ok(())
    })
}

/// Damped Newton at `lambda`. `initial` may be null (start from zero) or
/// point to one value per node. A state that fails to converge is still
/// returned in `out`, together with `GL_STATUS_NUMERICAL`.
#[no_mangle]
pub extern "C" fn gl_solve(
    problem: *const GlProblem,
    lambda: f64,
    tol: f64,
    max_iters: usize,
    initial: *const f64,
    out: *mut *mut GlSolution,
) -> GlStatus {
    guard(|| {
        let p = &non_null(problem, "problem")?.0;
        let mut opts = SolveOptions::default();
        if tol > 0.0 {
            opts.tol_residual = tol;
        }
        if max_iters > 0 {
            opts.max_newton_iters = max_iters;
        }
        if !initial.is_null() {
            opts.init = Init::Given(slice(initial, p.grid.len(), "initial")?.to_vec());
        }
        let s = lib(newton_solve(p, lambda, &opts))?;
        let converged = s.converged;
        let (iters, res) = (s.iterations, s.residual_inf);
        out_ptr(out, GlSolution(s))?;
        if converged {
            Ok(())
        } else {
            Err((
                GlStatus::Numerical,
                format!("Newton did not converge after {iters} iterations (residual {res:e})"),
            ))
        }
    })
}

#[no_mangle]
pub extern "C" fn gl_solution_lambda(s: *const GlSolution) -> f64 {
    // SAFETY: see `non_null`.
    unsafe { s.as_ref() }.map_or(f64::NAN, |s| s.0.lambda)
}

#[no_mangle]
pub extern "C" fn gl_solution_sup_norm(s: *const GlSolution) -> f64 {
    // SAFETY: see `non_null`.
    unsafe { s.as_ref() }.map_or(f64::NAN, |s| s.0.sup_norm())
}

#[no_mangle]
pub extern "C" fn gl_solution_residual(s: *const GlSolution) -> f64 {
    // SAFETY: see `non_null`.
    unsafe { s.as_ref() }.map_or(f64::NAN, |s| s.0.residual_inf)
}

/// 1 when converged, 0 otherwise (or for a null handle).
#[no_mangle]
pub extern "C" fn gl_solution_converged(s: *const GlSolution) -> i32 {
    // SAFETY: see `non_null`.
    unsafe { s.as_ref() }.map_or(0, |s| i32::from(s.0.converged))
}

/// 1 when every nodal value is nonnegative up to rounding.
#[no_mangle]
pub extern "C" fn gl_solution_nonneg(s: *const GlSolution) -> i32 {
    // SAFETY: see `non_null`.
    unsafe { s.as_ref() }.map_or(0, |s| i32::from(s.0.nonneg))
}

/// Copies the nodal values into `buf` (at least one slot per node).
#[no_mangle]
pub extern "C" fn gl_solution_values(s: *const GlSolution, buf: *mut f64, len: usize) -> GlStatus {
    guard(|| copy_out(&non_null(s, "solution")?.0.u, buf, len))
}

#[no_mangle]
pub extern "C" fn gl_solution_free(s: *mut GlSolution) {
    if !s.is_null() {
        // SAFETY: pointer came from `Box::into_raw` in this library.
        drop(unsafe { Box::from_raw(s) });
    }
}

/// Continuation from the Newton solution at `lambda0`, towards larger `λ`
/// first. Non-positive `ds_max`, `norm_cap` or `max_points` keep defaults.
#[no_mangle]
pub extern "C" fn gl_trace_branch(
    problem: *const GlProblem,
    lambda0: f64,
    ds_max: f64,
    norm_cap: f64,
    max_points: usize,
    out: *mut *mut GlBranch,
) -> GlStatus {
    guard(|| {
        let p = &non_null(problem, "problem")?.0;
        let mut opts = ContinuationOptions {
            direction: Direction::Increasing,
            ..Default::default()
        };
        if ds_max > 0.0 {
            opts.ds_max = ds_max;
            opts.ds_init = opts.ds_init.min(ds_max);
        }
        if norm_cap > 0.0 {
            opts.norm_cap = norm_cap;
        }
        if max_points > 0 {
            opts.max_points = max_points;
        }
        let start = lib(newton_solve(p, lambda0, &SolveOptions::default()))?;
        if !start.converged {
            return Err((GlStatus::Numerical, format!("no converged start at lambda = {lambda0}")));
        }
        let b = lib(trace_branch(p, &start, &opts))?;
        out_ptr(out, GlBranch(b))
    })
}

#[no_mangle]
pub extern "C" fn gl_branch_len(b: *const GlBranch) -> usize {
    // SAFETY: see `non_null`.
    unsafe { b.as_ref() }.map_or(0, |b| b.0.points.len())
}

/// Point `index` of the branch; every output pointer may be null.
#[no_mangle]
pub extern "C" fn gl_branch_point(
    b: *const GlBranch,
    index: usize,
    s: *mut f64,
    lambda: *mut f64,
    sup_norm: *mut f64,
    fold: *mut i32,
) -> GlStatus {
    guard(|| {
        let b = &non_null(b, "branch")?.0;
        let pt = b
            .points
            .get(index)
            .ok_or((GlStatus::InvalidArgument, format!("index {index} out of range")))?;
        write_scalar(s, pt.s);
        write_scalar(lambda, pt.state.lambda);
        write_scalar(sup_norm, pt.state.sup_norm());
        write_scalar(fold, i32::from(pt.fold));
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn gl_branch_fold_count(b: *const GlBranch) -> usize {
    // SAFETY: see `non_null`.
    unsafe { b.as_ref() }.map_or(0, |b| b.0.folds.len())
}

/// `λ` of the `index`-th turning point.
#[no_mangle]
pub extern "C" fn gl_branch_fold_lambda(b: *const GlBranch, index: usize, out: *mut f64) -> GlStatus {
    guard(|| {
        let b = &non_null(b, "branch")?.0;
        let &i = b
            .folds
            .get(index)
            .ok_or((GlStatus::InvalidArgument, format!("fold {index} out of range")))?;
        if out.is_null() {
            return Err((GlStatus::NullPointer, "output pointer is null".into()));
        }
        write_scalar(out, b.points[i].state.lambda);
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn gl_branch_free(b: *mut GlBranch) {
    if !b.is_null() {
        // SAFETY: pointer came from `Box::into_raw` in this library.
        drop(unsafe { Box::from_raw(b) });
    }
}

/// Parameters `(ε_j, A_j, λ_j)` of member `j ≥ 1` of the exact family on
/// `(0, 3)`.
#[no_mangle]
pub extern "C" fn gl_exact_member(j: u32, eps: *mut f64, amp: *mut f64, lambda: *mut f64) -> GlStatus {
    guard(|| {
        let m = lib(family_member(j))?;
        write_scalar(eps, m.eps);
        write_scalar(amp, m.amp);
        write_scalar(lambda, m.lambda);
        Ok(())
    })
}
