use std::fs;
use std::path::Path;
use std::process::Command;

fn freegig(args: &[&str], out: &Path) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_freegig"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
        .status
        .code()
        .expect("exit code")
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn convolve_passes_and_writes_r_residual() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(freegig(&["convolve", "--lambda", "2", "--alpha", "1", "--beta", "1"], dir.path()), 0);
    let residuals = fs::read_to_string(dir.path().join("residuals.csv")).unwrap();
    assert!(residuals.starts_with("check,value,tolerance,pass\n"));
    assert!(residuals.contains("r_transform_identity,"));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    let density = fs::read_to_string(dir.path().join("density.csv")).unwrap();
    assert_eq!(density.lines().count(), 201);
}

#[test]
fn my_rerun_is_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["my", "--lambda", "2", "--alpha", "1", "--beta", "1", "--n", "24", "--reps", "3", "--seed", "11"];
    let ca = freegig(&args, a.path());
    let cb = freegig(&args, b.path());
    assert_eq!(ca, cb);
    let (fa, fb) = (csv_files(a.path()), csv_files(b.path()));
    assert!(fa.len() >= 4);
    assert_eq!(fa, fb);
    assert!(a.path().join("u_spectrum.svg").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // Tiny matrices cannot meet the KS tolerance.
    let tiny = ["my", "--lambda", "2", "--alpha", "1", "--beta", "1", "--n", "4", "--reps", "2", "--seed", "1"];
    assert_eq!(freegig(&tiny, dir.path()), 1);
    assert_eq!(freegig(&["my", "--lambda", "0.5", "--alpha", "1", "--beta", "1", "--seed", "1"], dir.path()), 2);
    assert_eq!(freegig(&["regression", "--lambda", "2", "--alpha", "1", "--beta", "1", "--order", "9"], dir.path()), 2);
    assert_eq!(freegig(&["inverse", "--lambda", "2", "--alpha", "-1", "--beta", "1"], dir.path()), 2);

    let file = dir.path().join("not_a_dir");
    fs::write(&file, "x").unwrap();
    assert_eq!(freegig(&["support"], &file.join("sub")), 2);
}

#[test]
fn module_error_leaves_manifest() {
    let dir = tempfile::tempdir().unwrap();
    // A grid touching y = 0 is rejected by the inverse check after the run starts.
    let code = freegig(
        &["inverse", "--lambda", "2", "--alpha", "1", "--beta", "3", "--grid-lo", "-1", "--grid-hi", "1", "--grid-points", "2"],
        dir.path(),
    );
    assert_eq!(code, 2);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("error.json")).unwrap()).unwrap();
    assert_eq!(manifest["experiment"], "inverse");
    assert_eq!(manifest["exit_code"], 2);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "lambda = 3.0\nalpha = 2.0\nbeta = 0.5\norder = 3\n").unwrap();
    let out = dir.path().join("out");
    assert_eq!(freegig(&["quadratic", "--config", cfg.to_str().unwrap(), "--order", "5"], &out), 0);
    let coeffs = fs::read_to_string(out.join("coefficients.csv")).unwrap();
    assert_eq!(coeffs.lines().count(), 7);

    fs::write(&cfg, "lambda = 3.0\nunknown_key = 1\n").unwrap();
    assert_eq!(freegig(&["inverse", "--config", cfg.to_str().unwrap()], &out), 2);
}
