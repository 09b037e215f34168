//! Command-line interface.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use dilrnn_core::graph::{ArchKind, ArchSpec};

use crate::ablate::{ablate, Sweep};
use crate::analysis::{analyze, verify_theory, write_analysis, VerifyOptions};
use crate::config::{load_arch_spec, RunConfig, TaskName};
use crate::error::{AppError, AppResult};
use crate::train::{evaluate_checkpoint, train, write_toml};

#[derive(Debug, Parser)]
#[command(name = "dilrnn", version, about = "Dilated recurrent networks: training and memory analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Overrides shared by the training commands.
#[derive(Debug, Args, Default, Clone)]
pub struct RunArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// copy_memory, pixel_mnist or noisy_mnist
    #[arg(long)]
    pub task: Option<String>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub base: Option<usize>,
    #[arg(long = "start-exponent")]
    pub start_exponent: Option<u32>,
    #[arg(long)]
    pub hidden: Option<usize>,
    /// vanilla, lstm or gru
    #[arg(long)]
    pub cell: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model; writes metrics.csv, best.ckpt and summary.toml.
    Train(RunArgs),
    /// Evaluate a checkpoint on the seeded validation batch of a task.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Path-length table and memory measures of an architecture.
    Analyze {
        /// Architecture file (TOML).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "dilated_rnn")]
        kind: String,
        #[arg(long)]
        layers: Option<usize>,
        #[arg(long)]
        base: Option<usize>,
        #[arg(long = "start-exponent")]
        start_exponent: Option<u32>,
        /// Skip length of a regular-skip RNN.
        #[arg(long)]
        period: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exhaustive checks of the path-length theory.
    VerifyTheory {
        #[arg(long = "max-d", default_value_t = 8)]
        max_d: usize,
        #[arg(long, value_delimiter = ',', default_value = "2,3")]
        bases: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Negative self-test: asserts a wrong optimal schedule.
        #[arg(long = "inject-wrong-ranking")]
        inject_wrong_ranking: bool,
    },
    /// Train a sweep over starting dilations or depths.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long = "start-exponents", value_delimiter = ',', conflicts_with = "layer_counts")]
        start_exponents: Option<Vec<u32>>,
        #[arg(long = "layer-counts", value_delimiter = ',')]
        layer_counts: Option<Vec<usize>>,
    },
}

fn resolve(args: &RunArgs) -> AppResult<RunConfig> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => {
            let seed = args
                .seed
                .ok_or_else(|| AppError::Usage("a seed is required (--seed or seed in --config)".into()))?;
            RunConfig::copy_memory(100, seed)
        }
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = &args.task {
        cfg.task.name = TaskName::parse(t)?;
    }
    if let Some(v) = args.layers {
        cfg.model.layers = v;
    }
    if let Some(v) = args.base {
        cfg.model.base = v;
    }
    if let Some(v) = args.start_exponent {
        cfg.model.start_exponent = v;
    }
    if let Some(v) = args.hidden {
        cfg.model.hidden = v;
    }
    if let Some(v) = &args.cell {
        cfg.model.cell = v.clone();
    }
    if let Some(o) = &args.out {
        cfg.out = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig, fallback: &str) -> PathBuf {
    cfg.out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("runs/{fallback}-{}-seed{}", cfg.task.name.name(), cfg.seed)))
}

fn arch_from_flags(
    kind: &str,
    layers: Option<usize>,
    base: Option<usize>,
    start_exponent: Option<u32>,
    period: Option<usize>,
) -> AppResult<ArchSpec> {
    let kind = ArchKind::parse(kind)?;
    let layers = layers.ok_or_else(|| AppError::Usage("analyze needs --config or --layers".into()))?;
    let spec = ArchSpec {
        kind,
        layers,
        base: base.unwrap_or(2),
        start_exponent: start_exponent.unwrap_or(0),
        period,
        dilations: None,
    };
    spec.dilations()?;
    Ok(spec)
}

/// Runs one command, writing human-readable output to `stdout`.
pub fn execute(cli: Cli, stdout: &mut dyn Write) -> AppResult<()> {
    let io = |e| AppError::io("<stdout>", e);
    match cli.command {
        Command::Train(args) => {
            let cfg = resolve(&args)?;
            let dir = out_dir(&cfg, "train");
            let outcome = train(&cfg, Some(&dir))?;
            let text = toml::to_string(&outcome.summary).map_err(|e| AppError::Usage(e.to_string()))?;
            writeln!(stdout, "{text}wrote {}", dir.display()).map_err(io)?;
        }
        Command::Eval { checkpoint, run } => {
            let cfg = resolve(&run)?;
            let report = evaluate_checkpoint(&checkpoint, &cfg)?;
            if let Some(o) = &run.out {
                std::fs::create_dir_all(o).map_err(|e| AppError::io(o, e))?;
                write_toml(&o.join("eval.toml"), &report)?;
            }
            let text = toml::to_string(&report).map_err(|e| AppError::Usage(e.to_string()))?;
            write!(stdout, "{text}").map_err(io)?;
        }
        Command::Analyze {
            config,
            kind,
            layers,
            base,
            start_exponent,
            period,
            out,
        } => {
            let spec = match &config {
                Some(p) => load_arch_spec(p)?,
                None => arch_from_flags(&kind, layers, base, start_exponent, period)?,
            };
            let analysis = analyze(&spec)?;
            if let Some(o) = &out {
                write_analysis(o, &analysis)?;
            }
            let text = toml::to_string(&analysis.summary).map_err(|e| AppError::Usage(e.to_string()))?;
            write!(stdout, "{text}").map_err(io)?;
        }
        Command::VerifyTheory {
            max_d,
            bases,
            out,
            inject_wrong_ranking,
        } => {
            let report = verify_theory(&VerifyOptions {
                max_d,
                bases,
                inject_wrong_ranking,
            })?;
            let text = report.render();
            if let Some(o) = &out {
                std::fs::create_dir_all(o).map_err(|e| AppError::io(o, e))?;
                let p = o.join("verify.txt");
                std::fs::write(&p, &text).map_err(|e| AppError::io(&p, e))?;
            }
            write!(stdout, "{text}").map_err(io)?;
            if !report.passed() {
                let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
                return Err(AppError::Verification(failed.join(", ")));
            }
        }
        Command::Ablate {
            run,
            start_exponents,
            layer_counts,
        } => {
            let cfg = resolve(&run)?;
            let sweep = match (start_exponents, layer_counts) {
                (_, Some(l)) => Sweep::LayerCounts(l),
                (Some(s), None) => Sweep::StartExponents(s),
                (None, None) => Sweep::StartExponents(vec![0, 1, 2]),
            };
            let dir = out_dir(&cfg, "ablate");
            let rows = ablate(&cfg, &sweep, Some(&dir))?;
            for r in rows {
                writeln!(
                    stdout,
                    "{}: layers {} final_val_loss {} wall {:.1}s",
                    r.label, r.layers, r.outcome.summary.final_val_loss, r.outcome.wall_seconds
                )
                .map_err(io)?;
            }
            writeln!(stdout, "wrote {}", Path::new(&dir).display()).map_err(io)?;
        }
    }
    Ok(())
}

/// Parses `args` and runs; returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{rendered}");
            } else {
                let _ = write!(stderr, "{rendered}");
            }
            return code;
        }
    };
    match execute(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
