use std::path::Path;
use std::process::Command;

fn sqmc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sqmc"))
}

fn write_config(dir: &Path, name: &str, json: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, json).unwrap();
    p
}

#[test]
fn filter_writes_means_and_increments() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "lg.json", r#"{"model":"lg1d","T":10,"data_seed":2}"#);
    let out = dir.path().join("hist.csv");
    let status = sqmc()
        .args(["filter", "--model", cfg.to_str().unwrap(), "--algo", "smc", "--N", "128", "--seed", "7", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,mean_x1,loglik_increment");
    assert_eq!(lines.len(), 12);
}

#[test]
fn smooth_forward_reports_ancestors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sv.json", r#"{"model":"sv2d","T":5,"data_seed":2}"#);
    let out = sqmc()
        .args(["smooth", "--model", cfg.to_str().unwrap(), "--method", "forward", "--N", "64", "--phi", "x1,x2^2"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("t,x1,x2^2,distinct_ancestors\n"));
    assert_eq!(text.lines().count(), 7);
}

#[test]
fn smooth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "lg.json", r#"{"model":"lg1d","T":8,"data_seed":2}"#);
    let run = || {
        sqmc()
            .args(["smooth", "--model", cfg.to_str().unwrap(), "--method", "backward-qmc", "--N", "64", "--seed", "3"])
            .output()
            .unwrap()
            .stdout
    };
    assert_eq!(run(), run());
}

#[test]
fn unknown_test_function_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "lg.json", r#"{"model":"lg1d","T":3,"data_seed":2}"#);
    let out = sqmc().args(["smooth", "--model", cfg.to_str().unwrap(), "--phi", "x9"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown test function"));
}

#[test]
fn simulate_writes_states_and_observations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sv.json", r#"{"model":"sv2d","T":3,"data_seed":5}"#);
    let out = sqmc().args(["simulate", "--model", cfg.to_str().unwrap()]).output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("t,y_1,y_2,x_1,x_2\n"));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn bench_outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "lg.json", r#"{"model":"lg1d","T":15,"data_seed":2}"#);
    let run = |sub: &str| {
        let outdir = dir.path().join(sub);
        let status = sqmc()
            .args(["bench", "--model", cfg.to_str().unwrap(), "--methods", "marginal,backward-qmc,backward-iid"])
            .args(["--algos", "smc,sqmc", "--N", "32", "--reps", "3", "--seed", "4", "--outdir"])
            .arg(&outdir)
            .status()
            .unwrap();
        assert!(status.success());
        outdir
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["records.csv", "gains.csv", "manifest.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let gains = std::fs::read_to_string(a.join("gains.csv")).unwrap();
    for c in ["marginal", "backward", "hybrid"] {
        assert!(gains.lines().any(|l| l.starts_with(&format!("{c},32,x1,3,kalman-smoother,"))), "{c}");
    }
    assert!(a.join("timings.csv").exists());
}

#[test]
fn bench_requires_stored_reference_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sv.json", r#"{"model":"sv2d","T":4,"data_seed":2}"#);
    let out = sqmc()
        .args(["bench", "--model", cfg.to_str().unwrap(), "--reference"])
        .arg(dir.path().join("missing.json"))
        .args(["--N", "16", "--reps", "2", "--outdir"])
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing stored reference"));
}

#[test]
fn bench_with_saved_reference_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sv.json", r#"{"model":"sv2d","T":4,"data_seed":2}"#);
    let reference = dir.path().join("ref.json");
    let base = |extra: &[&str], outdir: &str| {
        sqmc()
            .args(["bench", "--model", cfg.to_str().unwrap(), "--methods", "marginal", "--N", "16", "--reps", "2"])
            .args(extra)
            .arg("--outdir")
            .arg(dir.path().join(outdir))
            .status()
            .unwrap()
    };
    let r = reference.to_str().unwrap();
    assert!(base(&["--reference-n", "128", "--save-reference", r], "a").success());
    let first = std::fs::read(&reference).unwrap();
    assert!(base(&["--reference-n", "128", "--save-reference", r], "b").success());
    assert_eq!(std::fs::read(&reference).unwrap(), first);
    assert!(base(&["--reference", r], "c").success());
    assert_eq!(
        std::fs::read(dir.path().join("a/gains.csv")).unwrap(),
        std::fs::read(dir.path().join("c/gains.csv")).unwrap()
    );
}

#[test]
fn rescale_override_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "lg.json", r#"{"model":"lg1d","T":3,"data_seed":2}"#);
    let ok = sqmc()
        .args(["filter", "--model", cfg.to_str().unwrap(), "--N", "16", "--rescale-loc", "0", "--rescale-scale", "2"])
        .output()
        .unwrap();
    assert!(ok.status.success());
    let bad = sqmc()
        .args(["filter", "--model", cfg.to_str().unwrap(), "--N", "16", "--rescale-loc", "0", "--rescale-scale", "-1"])
        .output()
        .unwrap();
    assert!(!bad.status.success());
}
