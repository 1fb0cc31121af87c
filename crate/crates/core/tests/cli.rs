//! The `gradlab` binary end to end: artifacts, determinism, resume and
//! exit statuses.

use std::path::Path;
use std::process::Command;

fn gradlab(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_gradlab"))
        .arg("--out")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs");
    let text = format!("{}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr));
    (out.status.code().unwrap_or(-1), text)
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn rows(path: &Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn exact_table_has_decreasing_lambda() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = gradlab(dir.path(), &["exact", "--first", "1", "--last", "5"]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(dir.path().join("exact.csv")).unwrap();
    assert!(text.starts_with("j,eps,amp,lambda\n"));
    let t = rows(&dir.path().join("exact.csv"));
    assert_eq!(t.len(), 5);
    assert!(t.windows(2).all(|w| w[1][3] < w[0][3]));
    assert!(t.iter().all(|r| r[3] > 2.4674));
}

#[test]
fn eigen_report_for_unit_weight() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out) = gradlab(dir.path(), &["eigen"]);
    assert_eq!(code, 0, "{out}");
    let report: toml::Table = std::fs::read_to_string(dir.path().join("eigen.toml")).unwrap().parse().unwrap();
    let g = report["report"]["gamma1"]["extrapolated"].as_float().unwrap();
    assert!((g - 9.8696).abs() < 1e-4, "{g}");
    assert!(report["meta"]["config_fingerprint"].as_str().unwrap().len() == 16);
    assert!(report["meta"].get("created_unix").is_none());
}

#[test]
fn branch_files_are_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(gradlab(a.path(), &["--quiet", "continue"]).0, 0);
    assert_eq!(gradlab(b.path(), &["--quiet", "continue"]).0, 0);
    for f in ["branch.csv", "branch.csv.meta.toml", "branch.checkpoint.toml", "folds.toml"] {
        let (x, y) = (std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
        assert!(x == y, "{f} differs");
    }
    let header = std::fs::read_to_string(a.path().join("branch.csv")).unwrap();
    assert!(header.starts_with("s,lambda,sup_norm,l2_norm,fold,residual_inf\n"));
    // timestamps only on request, and never in the CSV
    let c = tempfile::tempdir().unwrap();
    assert_eq!(gradlab(c.path(), &["--quiet", "--timestamp", "continue"]).0, 0);
    assert_eq!(std::fs::read(a.path().join("branch.csv")).unwrap(), std::fs::read(c.path().join("branch.csv")).unwrap());
    let meta = std::fs::read_to_string(c.path().join("branch.csv.meta.toml")).unwrap();
    assert!(meta.contains("created_unix"));
}

#[test]
fn resumed_trace_matches_uninterrupted_trace() {
    let full = tempfile::tempdir().unwrap();
    let split = tempfile::tempdir().unwrap();
    assert_eq!(gradlab(full.path(), &["--quiet", "continue"]).0, 0);
    let cfg = write_config(split.path(), "short.toml", "[continuation]\nmax_points = 40\n");
    assert_eq!(gradlab(split.path(), &["--quiet", "--config", &cfg, "continue"]).0, 0);
    // the start point, 40 steps and possibly a refined fold point
    let first = rows(&split.path().join("branch.csv")).len();
    assert!((41..=42).contains(&first), "{first}");
    assert_eq!(gradlab(split.path(), &["--quiet", "continue", "--resume"]).0, 0);

    let (a, b) = (rows(&full.path().join("branch.csv")), rows(&split.path().join("branch.csv")));
    assert_eq!(a.len(), b.len());
    for (ra, rb) in a.iter().zip(&b) {
        for (x, y) in ra.iter().zip(rb) {
            assert!((x - y).abs() <= 1e-8 * (1.0 + x.abs()), "{ra:?} vs {rb:?}");
        }
    }
    let meta: toml::Table = std::fs::read_to_string(split.path().join("branch.csv.meta.toml")).unwrap().parse().unwrap();
    assert_eq!(meta["points"].as_integer().unwrap() as usize, b.len());
    assert_eq!(meta["folds"].as_array().unwrap().len(), 1);

    // a checkpoint from a different problem is refused
    let other = write_config(split.path(), "other.toml", "[fields]\nh = { kind = \"constant\", value = 2.0 }\n");
    let (code, out) = gradlab(split.path(), &["--quiet", "--config", &other, "continue", "--resume"]);
    assert_eq!(code, 2, "{out}");
}

#[test]
fn exit_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.toml", "[grid]\nresolution = 1\n");
    assert_eq!(gradlab(dir.path(), &["--config", &bad, "solve"]).0, 2);
    let unknown = write_config(dir.path(), "unknown.toml", "colour = \"red\"\n");
    assert_eq!(gradlab(dir.path(), &["--config", &unknown, "solve"]).0, 2);
    assert_eq!(gradlab(dir.path(), &["frobnicate"]).0, 2);
    assert_eq!(gradlab(dir.path(), &["--config", "/nonexistent.toml", "solve"]).0, 2);

    // beyond the fold Newton from zero has nothing to converge to
    let far = write_config(dir.path(), "far.toml", "[lambda]\nvalue = 7.0\n");
    let (code, out) = gradlab(dir.path(), &["--config", &far, "solve"]);
    assert_eq!(code, 3, "{out}");
    assert!(out.contains("did not converge"), "{out}");

    // μ ≡ 1 reaches the boundary, so one hypothesis fails
    let (code, out) = gradlab(dir.path(), &["verify", "assumptions"]);
    assert_eq!(code, 1, "{out}");
    assert!(out.contains("mu_compact_support: Fails"));

    assert_eq!(gradlab(dir.path(), &["--quiet", "solve"]).0, 0);
    assert!(dir.path().join("solution.csv").exists());
    assert!(dir.path().join("solve.toml").exists());
}

#[test]
fn verify_suites_pass_on_the_model_problem() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "few.toml", "[verify]\ntrials = 500\n");
    for suite in ["interpolation", "hardy", "brezis-cabre", "exp-identity"] {
        let (code, out) = gradlab(dir.path(), &["--config", &cfg, "verify", suite]);
        assert_eq!(code, 0, "{suite}: {out}");
        assert!(out.contains("PASS") && !out.contains("FAIL"), "{out}");
    }
}

#[test]
fn reproduce_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out) = gradlab(dir.path(), &["reproduce", "theorem5-model"]);
    assert_eq!(code, 0, "{out}");
    for f in ["branch.csv", "model_branch.toml", "two_solutions.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let two = std::fs::read_to_string(dir.path().join("two_solutions.csv")).unwrap();
    assert!(two.starts_with("x,u_lower,u_upper\n"));

    let (code, out) = gradlab(dir.path(), &["reproduce", "theorem2"]);
    assert_eq!(code, 0, "{out}");
    assert_eq!(rows(&dir.path().join("exact.csv")).len(), 20);
    assert_eq!(rows(&dir.path().join("recovery.csv")).len(), 3);

    let (code, out) = gradlab(dir.path(), &["reproduce", "gamma1-threshold"]);
    assert_eq!(code, 0, "{out}");
}
