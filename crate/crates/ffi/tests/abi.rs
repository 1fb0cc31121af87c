//! The C ABI exercised from Rust, plus a C program compiled against the
//! generated header.

use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use gradlab_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(gl_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn solve_and_branch_through_handles() {
    let mut grid = ptr::null_mut();
    assert_eq!(gl_grid_new_interval(0.0, 1.0, 101, &mut grid), GlStatus::Ok);
    let mut problem = ptr::null_mut();
    assert_eq!(gl_problem_new_constant(grid, 1.0, 1.0, 1.0, &mut problem), GlStatus::Ok);
    assert_eq!(gl_problem_len(problem), 101);

    let mut sol = ptr::null_mut();
    assert_eq!(gl_solve(problem, 0.0, 0.0, 0, ptr::null(), &mut sol), GlStatus::Ok);
    assert_eq!(gl_solution_converged(sol), 1);
    assert_eq!(gl_solution_nonneg(sol), 1);
    let mut u = vec![0.0; 101];
    assert_eq!(gl_solution_values(sol, u.as_mut_ptr(), u.len()), GlStatus::Ok);
    assert!((u[50] - gl_solution_sup_norm(sol)).abs() < 1e-14);

    let mut branch = ptr::null_mut();
    assert_eq!(gl_trace_branch(problem, 0.0, 0.0, 0.0, 0, &mut branch), GlStatus::Ok);
    assert_eq!(gl_branch_fold_count(branch), 1);
    let mut lstar = 0.0;
    assert_eq!(gl_branch_fold_lambda(branch, 0, &mut lstar), GlStatus::Ok);
    assert!((lstar - 5.697).abs() < 1e-2, "{lstar}");
    let (mut s, mut l, mut n, mut fold) = (0.0, 0.0, 0.0, 0);
    assert_eq!(gl_branch_point(branch, 0, &mut s, &mut l, &mut n, &mut fold), GlStatus::Ok);
    assert_eq!((s, l, fold), (0.0, 0.0, 0));
    let len = gl_branch_len(branch);
    assert_eq!(
        gl_branch_point(branch, len, ptr::null_mut(), ptr::null_mut(), ptr::null_mut(), ptr::null_mut()),
        GlStatus::InvalidArgument
    );

    gl_branch_free(branch);
    gl_solution_free(sol);
    gl_problem_free(problem);
    gl_grid_free(grid);
}

#[test]
fn errors_are_codes_with_messages() {
    let mut grid = ptr::null_mut();
    assert_eq!(gl_grid_new_interval(0.0, 1.0, 2, &mut grid), GlStatus::InvalidArgument);
    assert!(grid.is_null());
    assert!(last_error().contains("too small"), "{}", last_error());

    assert_eq!(gl_problem_new_constant(ptr::null(), 1.0, 1.0, 1.0, &mut ptr::null_mut()), GlStatus::NullPointer);
    assert_eq!(gl_grid_len(ptr::null()), 0);
    assert!(gl_solution_lambda(ptr::null()).is_nan());

    let cfg = c"[grid]\nresolution = 2\n";
    assert_eq!(gl_problem_from_toml(cfg.as_ptr(), &mut ptr::null_mut()), GlStatus::InvalidArgument);

    // far beyond the fold there is no solution near zero
    let mut g = ptr::null_mut();
    assert_eq!(gl_grid_new_interval(0.0, 1.0, 51, &mut g), GlStatus::Ok);
    let mut p = ptr::null_mut();
    assert_eq!(gl_problem_new_constant(g, 1.0, 1.0, 1.0, &mut p), GlStatus::Ok);
    let mut sol = ptr::null_mut();
    let st = gl_solve(p, 7.0, 0.0, 20, ptr::null(), &mut sol);
    assert_eq!(st, GlStatus::Numerical, "{}", last_error());
    gl_solution_free(sol);
    gl_problem_free(p);
    gl_grid_free(g);

    // freeing null is a no-op
    gl_grid_free(ptr::null_mut());
}

#[test]
fn nodal_and_toml_problems_agree() {
    let mut grid = ptr::null_mut();
    assert_eq!(gl_grid_new_interval(0.0, 1.0, 41, &mut grid), GlStatus::Ok);
    let ones = vec![1.0; 41];
    let mut a = ptr::null_mut();
    assert_eq!(
        gl_problem_new_nodal(grid, ones.as_ptr(), ones.as_ptr(), ones.as_ptr(), 41, &mut a),
        GlStatus::Ok
    );
    let mut b = ptr::null_mut();
    assert_eq!(gl_problem_from_toml(c"[grid]\nresolution = 41\n".as_ptr(), &mut b), GlStatus::Ok);
    let (mut ga, mut gb) = (0.0, 0.0);
    assert_eq!(gl_problem_gamma1(a, &mut ga), GlStatus::Ok);
    assert_eq!(gl_problem_gamma1(b, &mut gb), GlStatus::Ok);
    assert!((ga - gb).abs() < 1e-12);
    assert_eq!(
        gl_problem_new_nodal(grid, ones.as_ptr(), ones.as_ptr(), ones.as_ptr(), 40, &mut ptr::null_mut()),
        GlStatus::InvalidArgument
    );
    let (mut eps, mut amp, mut lambda) = (0.0, 0.0, 0.0);
    assert_eq!(gl_exact_member(1, &mut eps, &mut amp, &mut lambda), GlStatus::Ok);
    assert!(lambda > 3.0 && lambda < 3.05);
    assert_eq!(gl_exact_member(0, &mut eps, &mut amp, &mut lambda), GlStatus::InvalidArgument);
    gl_problem_free(a);
    gl_problem_free(b);
    gl_grid_free(grid);
}

#[test]
fn c_program_links_against_the_header() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap();
    let lib = profile_dir.join("libgradlab_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());
    let out = std::env::temp_dir().join(format!("gradlab_smoke_{}", std::process::id()));
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&out)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let run = Command::new(&out).output().unwrap();
    let _ = std::fs::remove_file(&out);
    assert!(
        run.status.success(),
        "{}{}",
        String::from_utf8_lossy(&run.stdout),
        String::from_utf8_lossy(&run.stderr)
    );
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
