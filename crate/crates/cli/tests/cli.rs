//! End-to-end tests of the experiment runner: exit codes, outputs and
//! determinism across worker counts.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_liestoch"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn run_ok(output: &Output) {
    assert!(
        output.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

#[test]
fn list_is_machine_readable_and_complete() {
    let output = bin().args(["list", "--json"]).output().unwrap();
    run_ok(&output);
    let value: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    let groups = value["groups"].as_array().unwrap();
    assert!(groups.len() >= 5, "{groups:?}");
    let maps: Vec<&str> = value["maps"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m.as_str().unwrap())
        .collect();
    for corpus in ["exp_x_so3", "exp_xsq_so3", "exp_xa_yb_so3"] {
        assert!(maps.contains(&corpus), "missing {corpus}");
    }
    assert!(value["experiments"]
        .as_array()
        .unwrap()
        .iter()
        .any(|e| e == "pluzhnikov"));
}

#[test]
fn unknown_group_exits_2_without_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let cfg = write_config(
        dir.path(),
        "bad.toml",
        &format!(
            "experiment = \"levy\"\ngroup = \"so4\"\nseed = 1\npaths = 150\nsteps = 100\nout_dir = \"{}\"\n",
            out_dir.display()
        ),
    );
    let output = bin()
        .args(["run", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(!out_dir.exists(), "no output may be written on config errors");
}

#[test]
fn missing_config_is_a_config_error() {
    let output = bin().args(["run"]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn levy_run_writes_reports_and_honors_expect() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("levy");
    let cfg = write_config(
        dir.path(),
        "levy.toml",
        &format!(
            "experiment = \"levy\"\ngroup = \"r3\"\nseed = 9\npaths = 200\nsteps = 128\nhorizon = 1.0\nout_dir = \"{}\"\n\n[thresholds]\nrel_tol = 0.2\n",
            out_dir.display()
        ),
    );
    let output = bin()
        .args(["run", "--config", cfg.to_str().unwrap(), "--expect", "pass"])
        .output()
        .unwrap();
    run_ok(&output);

    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["experiment"], "levy");
    assert_eq!(report["seed"], 9);
    assert_eq!(report["verdict"], "Pass");
    assert!(report["config_hash"].as_str().unwrap().len() == 16);

    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert!(summary.starts_with("report,role,label,time,statistic,score,threshold,pass"));
    assert!(summary.lines().count() > 4);

    // A passing run with --expect fail exits 1.
    let mismatch = bin()
        .args(["run", "--config", cfg.to_str().unwrap(), "--expect", "fail"])
        .output()
        .unwrap();
    assert_eq!(mismatch.status.code(), Some(1));
}

#[test]
fn reports_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for (i, threads) in ["1", "4", "8"].iter().enumerate() {
        let out_dir = dir.path().join(format!("run{i}"));
        let cfg = write_config(
            dir.path(),
            &format!("det{i}.toml"),
            &format!(
                "experiment = \"theorem1\"\ngroup = \"so3\"\nseed = 11\npaths = 150\nsteps = 100\nout_dir = \"{}\"\n",
                out_dir.display()
            ),
        );
        let output = bin()
            .args([
                "run",
                "--config",
                cfg.to_str().unwrap(),
                "--threads",
                threads,
            ])
            .output()
            .unwrap();
        run_ok(&output);
        bytes.push(std::fs::read(out_dir.join("report.json")).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
    assert_eq!(bytes[1], bytes[2]);
}

#[test]
fn pluzhnikov_run_reports_agreement_and_residual_field() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("plz");
    let cfg = write_config(
        dir.path(),
        "plz.toml",
        &format!(
            "experiment = \"pluzhnikov\"\nmap = \"exp_xsq_so3\"\nseed = 3\npaths = 200\nsteps = 128\nout_dir = \"{}\"\n\n[lattice]\npoints_per_axis = 5\n",
            out_dir.display()
        ),
    );
    let output = bin()
        .args(["run", "--config", cfg.to_str().unwrap(), "--expect", "pass"])
        .output()
        .unwrap();
    run_ok(&output);
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("report.json")).unwrap()).unwrap();
    // Checker and Monte-Carlo both classify the quadratic map as
    // non-harmonic; the experiment verdict is their agreement.
    assert_eq!(report["pluzhnikov"]["checker_harmonic"], false);
    assert_eq!(report["pluzhnikov"]["mc_harmonic"], false);
    assert_eq!(report["pluzhnikov"]["agree"], true);
    assert_eq!(report["verdict"], "Pass");
    let residuals = std::fs::read_to_string(out_dir.join("residuals.csv")).unwrap();
    assert!(residuals.starts_with("x1,r1,r2,r3,norm"));
    assert_eq!(residuals.lines().count(), 6);
}

#[test]
fn emit_paths_writes_noise_tagged_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("paths_run");
    let cfg = write_config(
        dir.path(),
        "small.toml",
        &format!(
            "experiment = \"theorem2\"\ngroup = \"so3\"\nseed = 5\npaths = 150\nsteps = 100\nout_dir = \"{}\"\n\n[thresholds]\nrel_tol = 0.25\n",
            out_dir.display()
        ),
    );
    // 150 paths exceed the emit limit: the run succeeds, paths are skipped.
    let output = bin()
        .args(["run", "--config", cfg.to_str().unwrap(), "--emit-paths"])
        .output()
        .unwrap();
    run_ok(&output);
    assert!(!out_dir.join("paths").exists());

    // Within the limit (128) the per-path files carry the noise header.
    let out_dir2 = dir.path().join("paths_run2");
    let output = bin()
        .args([
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--emit-paths",
            "--paths",
            "100",
            "--out",
            out_dir2.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(output.status.code() == Some(0) || output.status.code() == Some(4));
    let sample = std::fs::read_to_string(out_dir2.join("paths/path_0003.csv")).unwrap();
    assert!(sample.contains("seed=5 path_index=3"));
}

#[test]
fn converge_runs_without_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("conv");
    let output = bin()
        .args([
            "converge",
            "--seed",
            "2",
            "--out",
            out_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    run_ok(&output);
    let rates = std::fs::read_to_string(out_dir.join("rates.csv")).unwrap();
    assert!(rates.contains("exp_log_scheme:so3"));
    assert!(rates.contains("exp_log_scheme:r2"));
    assert!(rates.contains("naturality_samegrid:su2_to_so3"));
    assert!(rates.contains("pullback_fd:exp_xcube_so3"));
}
