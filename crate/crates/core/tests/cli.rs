use std::fs;
use std::path::Path;
use std::process::Command;

fn kacgas(dir: &Path, args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_kacgas")).current_dir(dir).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn gas_trace_from_file_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.cfg"),
        "seed = 1\n# fig two\n[gas-trace]\nn = 100\nregion = 0:0.5\ngrid = 0:0.5:240\n",
    )
    .unwrap();
    let (code, stdout, stderr) =
        kacgas(dir.path(), &["gas-trace", "--config", "run.cfg", "--seed", "7", "--out", "o", "--n=400"]);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("trace.csv"));
    let csv = fs::read_to_string(dir.path().join("o/trace.csv")).unwrap();
    assert_eq!(csv.lines().count(), 241);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["master_seed"], 7);
    assert_eq!(summary["config"]["n"], "400");
    assert!(summary["wall_time_s"].is_f64());
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, stderr) = kacgas(dir.path(), &["kac-brute", "--n=25", "--mu=0.5", "--t_max=3"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("kac-brute.n"), "{stderr}");
    let (code, _, stderr) = kacgas(dir.path(), &["gas-scaling", "--n_values=500", "--epsilon=1.5"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("gas-scaling.epsilon: out of range"), "{stderr}");
    let (code, _, _) = kacgas(dir.path(), &["no-such-command"]);
    assert_eq!(code, 2);
    let (code, _, _) = kacgas(dir.path(), &["macro", "--config", "missing.cfg"]);
    assert_eq!(code, 2);
}

#[test]
fn runtime_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    // t_max beyond two revolutions is rejected by the ensemble itself
    let (code, _, stderr) = kacgas(dir.path(), &["kac-ensemble", "--n=16", "--mu=0.3", "--t_max=40", "--window=none"]);
    assert_eq!(code, 3, "{stderr}");
    // the file blocks the output directory
    fs::write(dir.path().join("blocked"), "").unwrap();
    let (code, _, _) = kacgas(dir.path(), &["macro", "--out", "blocked/sub"]);
    assert_eq!(code, 3);
}

#[test]
fn macro_summary_and_reruns() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let (code, _, stderr) = kacgas(dir.path(), &["macro", "--out", out, "--k=1e32"]);
        assert_eq!(code, 0, "{stderr}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a/summary.json")).unwrap()).unwrap();
    assert!((summary["results"]["exponent"].as_f64().unwrap() + 1500.0).abs() < 1e-9);
    let seq = summary["results"]["sequence_bound"]["log10_value"].as_f64().unwrap();
    assert!(seq <= 2f64.log10() - 618.0, "{seq}");
    assert_eq!(fs::read(dir.path().join("a/bounds.csv")).unwrap(), fs::read(dir.path().join("b/bounds.csv")).unwrap());
    let csv = fs::read_to_string(dir.path().join("a/bounds.csv")).unwrap();
    assert!(csv.starts_with("quantity,log_value,linear_value_or_underflow\n"));
    assert!(!csv.contains(' '));
}

#[test]
fn worker_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    for (out, w) in [("w1", "1"), ("w4", "4")] {
        let (code, _, stderr) = kacgas(
            dir.path(),
            &["gas-scaling", "--out", out, "--workers", w, "--n_values=100,200", "--histories=500", "--epsilon=0.1"],
        );
        assert_eq!(code, 0, "{stderr}");
    }
    assert_eq!(
        fs::read(dir.path().join("w1/scaling.csv")).unwrap(),
        fs::read(dir.path().join("w4/scaling.csv")).unwrap()
    );
}
