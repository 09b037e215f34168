use std::fs;
use std::process::Command;

use dilrnn::cli::run;

fn run_cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["dilrnn"];
    argv.extend_from_slice(args);
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn help_and_version_exit_zero() {
    let (code, out, _) = run_cli(&["--help"]);
    assert_eq!(code, 0);
    for sub in ["train", "eval", "analyze", "verify-theory", "ablate"] {
        assert!(out.contains(sub), "help lacks {sub}");
    }
    assert_eq!(run_cli(&["--version"]).0, 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run_cli(&[]).0, 1);
    assert_eq!(run_cli(&["frobnicate"]).0, 1);
    assert_eq!(run_cli(&["train", "--layers", "many"]).0, 1);
    let (code, _, err) = run_cli(&["train"]);
    assert_eq!(code, 1);
    assert!(err.contains("seed"), "{err}");
    assert_eq!(run_cli(&["train", "--seed", "1", "--cell", "transformer"]).0, 1);
    assert_eq!(run_cli(&["train", "--seed", "1", "--task", "imagenet"]).0, 1);
    assert_eq!(run_cli(&["analyze"]).0, 1);
    assert_eq!(run_cli(&["analyze", "--kind", "dilated_rnn", "--layers", "3", "--base", "1"]).0, 1);
    assert_eq!(run_cli(&["verify-theory", "--max-d", "1"]).0, 1);
}

#[test]
fn missing_config_file_exits_one() {
    let (code, _, err) = run_cli(&["train", "--config", "/nonexistent/run.toml"]);
    assert_eq!(code, 1);
    assert!(err.contains("/nonexistent/run.toml"), "{err}");
}

#[test]
fn verify_theory_defaults_pass_and_print_the_discrepancy_table() {
    let (code, out, err) = run_cli(&["verify-theory"]);
    assert_eq!(code, 0, "{out}{err}");
    assert!(!out.contains("FAIL"));
    assert!(out.contains("3,4,4.25,4.0,0.25,1/4"), "{out}");
}

#[test]
fn injected_wrong_ranking_exits_two() {
    let (code, out, err) = run_cli(&["verify-theory", "--max-d", "4", "--inject-wrong-ranking"]);
    assert_eq!(code, 2, "{out}");
    assert!(out.contains("FAIL optimality"));
    assert!(err.contains("optimality"));
}

#[test]
fn verify_theory_writes_its_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v");
    let (code, stdout, _) = run_cli(&["verify-theory", "--max-d", "4", "--bases", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(fs::read_to_string(out.join("verify.txt")).unwrap(), stdout);
}

#[test]
fn analyze_from_flags_and_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a");
    let (code, stdout, err) = run_cli(&[
        "analyze",
        "--kind",
        "regular_skip_rnn",
        "--layers",
        "9",
        "--period",
        "256",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("mean_recurrent_length = \"34945/256\""), "{stdout}");
    assert!(stdout.contains("mean_recurrent_length_value = 136.50390625"));
    let csv = fs::read_to_string(out.join("analysis.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "n,max_d");
    assert_eq!(lines.len(), 257);
    assert_eq!(lines[1], "1,10");
    assert_eq!(lines[255], "255,264");
    assert_eq!(lines[256], "256,10");
    assert!(fs::read_to_string(out.join("summary.toml")).unwrap().contains("regular_skip"));

    let arch = dir.path().join("cnn.toml");
    fs::write(&arch, "version = 1\nkind = \"dilated_cnn\"\nlayers = 10\n").unwrap();
    let (code, stdout, _) = run_cli(&["analyze", "--config", arch.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.contains("receptive_field = \"1024\""), "{stdout}");
}

#[test]
fn analyze_reports_parse_positions() {
    let dir = tempfile::tempdir().unwrap();
    let arch = dir.path().join("bad.toml");
    fs::write(&arch, "version = 1\nkind = \"wavenet\"\nlayers = 3\n").unwrap();
    let (code, _, err) = run_cli(&["analyze", "--config", arch.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains(":2:"), "{err}");
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_dilrnn");
    let ok = Command::new(bin).args(["analyze", "--layers", "3"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("mean_recurrent_length = \"17/4\""));
    let usage = Command::new(bin).arg("bogus").output().unwrap();
    assert_eq!(usage.status.code(), Some(1));
    let verify = Command::new(bin)
        .args(["verify-theory", "--max-d", "3", "--inject-wrong-ranking"])
        .output()
        .unwrap();
    assert_eq!(verify.status.code(), Some(2));
}
