//! End-to-end tests of the `inversion` binary: exit codes, file outputs,
//! determinism, and error reporting.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_inversion"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().arg("--outdir").arg(dir).args(args).output().expect("binary runs")
}

#[test]
fn missing_required_flag_is_usage_error() {
    // `sweep` without --model/--p.
    let out = bin().arg("sweep").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("--model") || stderr.contains("required"), "stderr: {stderr}");
}

#[test]
fn unknown_model_is_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["sweep", "--model", "bogus", "--p", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown model"));
}

#[test]
fn json_errors_flag_emits_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["--json-errors", "sweep", "--model", "bogus", "--p", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    let parsed: serde_json::Value = serde_json::from_str(stderr.trim()).expect("JSON on stderr");
    assert!(parsed["error"].as_str().unwrap().contains("unknown model"));
}

#[test]
fn trajectory_writes_clean_rabi_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["trajectory", "--preset", "nh3", "--p", "0", "--cycles", "4", "--svg", "traj.svg"],
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let mut lines = csv.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(lines.next(), Some("t,y"));
    // First sample: y(0) = 1; quarter cycle later y = 1/2.
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "0");
    assert_eq!(first[1], "1");
    let quarter = csv
        .lines()
        .find(|l| !l.starts_with('#') && l.starts_with("0.25,"))
        .expect("sample at t = 0.25");
    let y: f64 = quarter.split(',').nth(1).unwrap().parse().unwrap();
    assert!((y - 0.5).abs() < 1e-12);

    let svg = std::fs::read_to_string(dir.path().join("traj.svg")).unwrap();
    assert!(svg.starts_with("<svg"));

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("trajectory.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["subcommand"], "trajectory");
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
}

#[test]
fn scripted_impacts_mode_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "trajectory",
            "--preset",
            "nh3",
            "--omega-p",
            "60",
            "--impacts",
            "0.7:auto,1.6:auto",
            "--cycles",
            "3",
            "--seed",
            "5",
        ],
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#') && !l.starts_with("t,")).count(), 3 * 64);
}

#[test]
fn sweep_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "sweep", "--model", "nh3", "--p", "1:3:1", "--ensemble", "4", "--cycles", "64", "--seed", "7",
    ];
    let out1 = run_in(dir.path(), &args.iter().chain(["--out", "a.csv"].iter()).cloned().collect::<Vec<_>>());
    let out2 = run_in(dir.path(), &args.iter().chain(["--out", "b.csv"].iter()).cloned().collect::<Vec<_>>());
    assert!(out1.status.success() && out2.status.success());
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b, "same seed must give byte-identical CSV");
}

#[test]
fn thread_cap_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["sweep", "--model", "classical-full", "--p", "1:2:1", "--ensemble", "4", "--cycles", "64"];
    let mut one: Vec<&str> = vec!["--threads", "1"];
    one.extend_from_slice(&base);
    one.extend_from_slice(&["--out", "one.csv"]);
    let mut many: Vec<&str> = vec!["--threads", "4"];
    many.extend_from_slice(&base);
    many.extend_from_slice(&["--out", "many.csv"]);
    assert!(run_in(dir.path(), &one).status.success());
    assert!(run_in(dir.path(), &many).status.success());
    assert_eq!(
        std::fs::read(dir.path().join("one.csv")).unwrap(),
        std::fs::read(dir.path().join("many.csv")).unwrap()
    );
}

#[test]
fn sweep_svg_has_two_panels() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "sweep", "--model", "classical-full", "--p", "1:2:0.5", "--ensemble", "2", "--cycles", "64",
            "--svg", "sweep.svg",
        ],
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let svg = std::fs::read_to_string(dir.path().join("sweep.svg")).unwrap();
    assert!(svg.contains("Fitted peak frequency"));
    assert!(svg.contains("Fitted width"));
    assert!(svg.contains("strong-impact"));
}

#[test]
fn compare_pipeline_and_schema_errors() {
    let dir = tempfile::tempdir().unwrap();
    // A small sweep with pressure labels.
    let out = run_in(
        dir.path(),
        &[
            "sweep", "--model", "nh3", "--p", "0.5:4:0.5", "--ensemble", "4", "--cycles", "256",
            "--out", "sweep.csv",
        ],
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    // Dataset within the mapped pressure range (0.11 .. 0.89 bar).
    let data = "# fixture for tests\npressure_bar,nu0_norm,b_norm\n0.2,0.98,0.15\n0.5,0.92,0.35\n0.8,0.85,0.5\n";
    std::fs::write(dir.path().join("data.csv"), data).unwrap();

    let out = run_in(
        dir.path(),
        &[
            "compare", "--sweep", "sweep.csv", "--data", "data.csv", "--scaling", "nh3",
            "--svg", "overlay.svg",
        ],
    );
    // Paths inside --sweep/--data are relative to the cwd of the test, so
    // pass absolute ones instead when the first call fails.
    let out = if out.status.success() {
        out
    } else {
        run_in(
            dir.path(),
            &[
                "compare",
                "--sweep",
                dir.path().join("sweep.csv").to_str().unwrap(),
                "--data",
                dir.path().join("data.csv").to_str().unwrap(),
                "--scaling",
                "nh3",
                "--svg",
                "overlay.svg",
            ],
        )
    };
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("compare.json")).unwrap()).unwrap();
    assert!(report["nu0_rms"].is_number());
    assert_eq!(report["pressures"].as_array().unwrap().len(), 3);
    assert!(dir.path().join("overlay.svg").exists());

    // Mismatched dataset columns -> schema error, nonzero exit.
    std::fs::write(dir.path().join("bad.csv"), "a,b,c\n1,2,3\n").unwrap();
    let out = run_in(
        dir.path(),
        &[
            "compare",
            "--sweep",
            dir.path().join("sweep.csv").to_str().unwrap(),
            "--data",
            dir.path().join("bad.csv").to_str().unwrap(),
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema"));

    // Missing sweep file -> descriptive error.
    let out = run_in(
        dir.path(),
        &["compare", "--sweep", "nope.csv", "--data", dir.path().join("data.csv").to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.csv"));
}

#[test]
fn coherence_outputs_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "coherence", "--preset", "nh3", "--p", "7.5", "--ensemble", "4", "--cycles", "64",
            "--svg", "hist.svg",
        ],
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let payload: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("coherence.json")).unwrap()).unwrap();
    assert!(payload["mean_coherence"].as_f64().unwrap() > 0.0);
    assert_eq!(payload["per_trajectory_coherence"].as_array().unwrap().len(), 4);
    assert!(dir.path().join("hist.svg").exists());

    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("per-trajectory |rho_LR|"));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    std::fs::write(&config, r#"{ "seed": 99, "cycles": 32, "ensemble": 2 }"#).unwrap();

    // Config's cycles apply.
    let out = bin()
        .arg("--outdir")
        .arg(dir.path())
        .arg("--config")
        .arg(&config)
        .args(["trajectory", "--p", "0"])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#') && !l.starts_with("t,")).count(), 32 * 64);
    assert!(csv.contains("seed=99"));

    // Explicit flag beats the file.
    let out = bin()
        .arg("--outdir")
        .arg(dir.path())
        .arg("--config")
        .arg(&config)
        .args(["trajectory", "--p", "0", "--cycles", "2", "--seed", "1"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#') && !l.starts_with("t,")).count(), 2 * 64);
    assert!(csv.contains("seed=1"));

    // Unknown config keys are rejected.
    std::fs::write(&config, r#"{ "sede": 1 }"#).unwrap();
    let out = bin()
        .arg("--outdir")
        .arg(dir.path())
        .arg("--config")
        .arg(&config)
        .args(["trajectory", "--p", "0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn outdir_env_var_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .env("INVERSION_OUTDIR", dir.path())
        .args(["trajectory", "--p", "0", "--cycles", "1"])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("trajectory.csv").exists());
}
