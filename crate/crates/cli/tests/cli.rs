use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_floquet-decay")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Rows of a CSV file as vectors of fields, header first.
fn rows(p: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(p).unwrap().lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn survival_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = run(&["survival", "--pipeline", "volterra", "--tmax", "20", "--out", path(d)]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(fs::read(a.join("theta.csv")).unwrap(), fs::read(b.join("theta.csv")).unwrap());
    assert_eq!(fs::read(a.join("manifest.toml")).unwrap(), fs::read(b.join("manifest.toml")).unwrap());
    assert!(a.join("theta.svg").exists());
}

#[test]
fn undriven_survival_is_flat_in_every_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["survival", "--pipeline", "all", "--r", "0", "--tmax", "5", "--sample", "0.5", "--out", path(dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for label in ["laplace", "volterra", "oracle"] {
        let table = rows(&dir.path().join(format!("theta_{label}.csv")));
        assert_eq!(table[0], ["t", "re_theta", "im_theta", "abs2"]);
        for row in &table[1..] {
            let abs2: f64 = row[3].parse().unwrap();
            assert!((abs2 - 1.0).abs() < 1e-6, "{label}: {abs2}");
        }
    }
    assert!(dir.path().join("deviation.csv").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = path(dir.path());
    // invalid manifest
    assert_eq!(code(&run(&["survival", "--omega", "-1", "--out", d])), 2);
    assert_eq!(code(&run(&["survival", "--potential", "free", "--out", d])), 2);
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[model]\nomgea = 1.2\n").unwrap();
    assert_eq!(code(&run(&["survival", "--config", path(&cfg), "--out", d])), 2);
    // no stabilization point to trap on
    assert_eq!(code(&run(&["free-trap", "--a", "0.5", "--omega", "1.5", "--tmax", "10", "--out", d])), 3);
    // tightened invariant suite
    let out = run(&["validate", "--quick", "--tol", "0.1"]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("Laplace"));
}

#[test]
fn shallow_well_gives_header_only_manifold() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["stabilize", "--a", "0.4", "--omega-min", "0.95", "--omega-max", "2", "--mode", "frequency", "--out", path(dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let table = rows(&dir.path().join("manifold.csv"));
    assert_eq!(table.len(), 1);
    assert_eq!(table[0][0], "a");
}

#[test]
fn fits_recover_synthetic_rates() {
    let dir = tempfile::tempdir().unwrap();
    let exp = dir.path().join("exp.csv");
    let mut body = String::from("t,re_theta,im_theta,abs2\n");
    for i in 0..=1000 {
        let t = 0.1 * i as f64;
        let s = (-0.1 * t).exp() * (1.0 + 0.01 * (2.0 * t).cos());
        body += &format!("{t},{},0,{s}\n", s.sqrt());
    }
    fs::write(&exp, body).unwrap();
    let out = run(&["fit", "--input", path(&exp), "--kind", "exponential-window", "--window", "10,90", "--omega", "2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    let row: Vec<&str> = text.lines().last().unwrap().split(',').collect();
    assert!((row[3].parse::<f64>().unwrap() + 0.1).abs() < 1e-3, "{text}");

    let tail = dir.path().join("tail.csv");
    let mut body = String::from("t,re_theta,im_theta,abs2\n");
    for i in 0..=200 {
        let t = 10f64.powf(2.0 + 3.0 * i as f64 / 200.0);
        body += &format!("{t},0,0,{}\n", 5.0 * t.powi(-3));
    }
    fs::write(&tail, body).unwrap();
    let fit_dir = dir.path().join("fit");
    let out = run(&["fit", "--input", path(&tail), "--kind", "power-law-tail", "--window", "1000,100000", "--out", path(&fit_dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let table = rows(&fit_dir.join("fit.csv"));
    assert!((table[1][3].parse::<f64>().unwrap() + 3.0).abs() < 1e-9);
}
