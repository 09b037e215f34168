use std::fs;
use std::path::Path;

use dilrnn::ablate::{ablate, sweep_configs, Sweep};
use dilrnn::checkpoint::{self, CheckpointHeader};
use dilrnn::cli::run;
use dilrnn::config::{ArchName, RunConfig};
use dilrnn::train::{evaluate_checkpoint, train, METRICS_HEADER};
use dilrnn::AppError;

fn tiny(seed: u64) -> RunConfig {
    let mut cfg = RunConfig::copy_memory(6, seed);
    cfg.model.layers = 3;
    cfg.model.hidden = 5;
    cfg.training.batch = 8;
    cfg.training.validation_batch = 16;
    cfg.training.iterations = 12;
    cfg.training.eval_every = 4;
    cfg
}

fn read(p: &Path) -> Vec<u8> {
    fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    train(&tiny(3), Some(&a)).unwrap();
    train(&tiny(3), Some(&b)).unwrap();
    train(&tiny(4), Some(&c)).unwrap();
    for f in ["metrics.csv", "best.ckpt", "summary.toml"] {
        assert_eq!(read(&a.join(f)), read(&b.join(f)), "{f}");
    }
    assert_ne!(read(&a.join("metrics.csv")), read(&c.join("metrics.csv")));
}

#[test]
fn metrics_schema_and_cadence() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = train(&tiny(1), Some(dir.path())).unwrap();
    let text = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], METRICS_HEADER);
    assert_eq!(lines.len(), 4);
    let iters: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(iters, ["4", "8", "12"]);
    assert!(lines[1..].iter().all(|l| l.ends_with(',')), "seconds column is empty without timing");
    assert_eq!(outcome.records.len(), 3);
    assert!(outcome.records.iter().all(|r| r.val_loss.is_finite() && (0.0..=1.0).contains(&r.val_acc)));

    let mut timed = tiny(1);
    timed.training.timing = true;
    let dir2 = tempfile::tempdir().unwrap();
    train(&timed, Some(dir2.path())).unwrap();
    let text = fs::read_to_string(dir2.path().join("metrics.csv")).unwrap();
    assert!(text.lines().skip(1).all(|l| !l.ends_with(',')));
    assert!(fs::read_to_string(dir2.path().join("summary.toml")).unwrap().contains("wall_seconds"));
}

#[test]
fn last_iteration_is_always_evaluated() {
    let mut cfg = tiny(2);
    cfg.training.iterations = 10;
    let out = train(&cfg, None).unwrap();
    let iters: Vec<usize> = out.records.iter().map(|r| r.iteration).collect();
    assert_eq!(iters, [4, 8, 10]);
}

#[test]
fn target_loss_stops_early() {
    let mut cfg = tiny(2);
    cfg.training.target_loss = Some(100.0);
    let out = train(&cfg, None).unwrap();
    assert!(out.summary.stopped_early);
    assert_eq!(out.summary.iterations_run, 4);
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let out = train(&tiny(5), Some(dir.path())).unwrap();
    let header = CheckpointHeader::for_model(&out.model, 12, Some(0.5));
    let bytes = checkpoint::encode(&out.model, &header).unwrap();
    let (model, back) = checkpoint::decode(&bytes).unwrap();
    assert_eq!(back, header);
    let a: Vec<u64> = out.model.flat_values().iter().map(|v| v.to_bits()).collect();
    let b: Vec<u64> = model.flat_values().iter().map(|v| v.to_bits()).collect();
    assert_eq!(a, b);
    assert_eq!(checkpoint::encode(&model, &back).unwrap(), bytes);

    let mut cut = bytes.clone();
    cut.truncate(bytes.len() - 3);
    assert!(checkpoint::decode(&cut).is_err());
    let mut bad = bytes;
    bad[0] ^= 1;
    assert!(checkpoint::decode(&bad).is_err());
}

#[test]
fn eval_reproduces_the_best_validation_loss() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(6);
    let out = train(&cfg, Some(dir.path())).unwrap();
    let report = evaluate_checkpoint(&dir.path().join("best.ckpt"), &cfg).unwrap();
    assert_eq!(report.loss.to_bits(), out.summary.best_val_loss.to_bits());
}

#[test]
fn eval_of_a_missing_checkpoint_is_a_usage_failure() {
    let mut out = Vec::new();
    let mut errs = Vec::new();
    let code = run(
        ["dilrnn", "eval", "--checkpoint", "/nonexistent.ckpt", "--seed", "1"],
        &mut out,
        &mut errs,
    );
    assert_eq!(code, 1);
    assert!(String::from_utf8_lossy(&errs).contains("/nonexistent.ckpt"));
}

#[test]
fn diverging_training_is_a_numeric_failure() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(7);
    cfg.optimizer.lr = 1e308;
    cfg.training.iterations = 50;
    let err = train(&cfg, Some(dir.path())).unwrap_err();
    assert!(matches!(err, AppError::Numeric(_)), "{err}");
    assert_eq!(err.exit_code(), 3);
    let diag = fs::read_to_string(dir.path().join("failure.txt")).unwrap();
    assert!(diag.starts_with("iteration = "));
}

#[test]
fn cli_train_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.toml");
    fs::write(
        &cfg_path,
        "version = 1\nseed = 9\n[task]\nname = \"copy_memory\"\ndelay = 4\n\
         [model]\nlayers = 2\nhidden = 3\n[training]\nbatch = 4\niterations = 3\neval_every = 3\n",
    )
    .unwrap();
    let out_dir = dir.path().join("o");
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(
        [
            "dilrnn",
            "train",
            "--config",
            cfg_path.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
            "--hidden",
            "4",
        ],
        &mut out,
        &mut err,
    );
    assert_eq!(code, 0, "{}", String::from_utf8_lossy(&err));
    for f in ["metrics.csv", "best.ckpt", "summary.toml"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    let (model, _) = checkpoint::load(&out_dir.join("best.ckpt")).unwrap();
    assert_eq!(model.hidden_dim(), 4);
}

#[test]
fn start_exponent_sweep_keeps_the_top_dilation() {
    let mut cfg = tiny(1);
    cfg.model.layers = 7;
    let runs = sweep_configs(&cfg, &Sweep::StartExponents(vec![0, 1, 2])).unwrap();
    let shape: Vec<(usize, u32)> = runs.iter().map(|(_, c)| (c.model.layers, c.model.start_exponent)).collect();
    assert_eq!(shape, [(7, 0), (6, 1), (5, 2)]);
    assert!(sweep_configs(&cfg, &Sweep::StartExponents(vec![7])).is_err());
    assert!(sweep_configs(&cfg, &Sweep::LayerCounts(vec![])).is_err());
    let mut skip = cfg;
    skip.model.architecture = ArchName::RegularSkip;
    assert!(sweep_configs(&skip, &Sweep::LayerCounts(vec![2])).is_err());
}

#[test]
fn single_configuration_sweep_matches_train() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(8);
    let rows = ablate(&cfg, &Sweep::LayerCounts(vec![3]), Some(&dir.path().join("sweep"))).unwrap();
    train(&cfg, Some(&dir.path().join("single"))).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(
        read(&dir.path().join("sweep/layers_3/metrics.csv")),
        read(&dir.path().join("single/metrics.csv"))
    );
    let summary = fs::read_to_string(dir.path().join("sweep/ablation.csv")).unwrap();
    assert!(summary.starts_with("label,layers,start_exponent,"));
    assert!(summary.lines().nth(1).unwrap().starts_with("layers_3,3,0,"));
}
