//! Training loop, validation and metrics.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use dilrnn_core::model::{DilatedRnnModel, LossStats};
use dilrnn_core::numeric::Rng;
use dilrnn_core::tasks::{
    gen_copy_memory, pixel_batch, CopyMemoryConfig, IdxImages, PixelSequenceConfig, TaskBatch, COPY_CLASSES,
};

use crate::checkpoint::{self, CheckpointHeader};
use crate::config::{RunConfig, TaskName};
use crate::error::{AppError, AppResult};
use crate::mnist::load_mnist_idx;

const MODEL_STREAM: u64 = 0;
const TRAIN_STREAM: u64 = 1;
const VALIDATION_STREAM: u64 = 2;

pub const METRICS_HEADER: &str = "iteration,train_loss,val_loss,val_acc,seconds";

/// Produces training and validation batches as pure functions of
/// `(config, seed, iteration)`.
pub enum TaskSource {
    CopyMemory {
        delay: usize,
    },
    Pixels {
        images: IdxImages,
        labels: Vec<u8>,
        train_count: usize,
        pixels: PixelSequenceConfig,
    },
}

impl TaskSource {
    pub fn from_config(cfg: &RunConfig) -> AppResult<Self> {
        match cfg.task.name {
            TaskName::CopyMemory => Ok(TaskSource::CopyMemory { delay: cfg.task.delay }),
            TaskName::PixelMnist | TaskName::NoisyMnist => {
                let (images, labels) = load_mnist_idx(
                    cfg.task.images.as_deref().unwrap_or(Path::new("")),
                    cfg.task.labels.as_deref().unwrap_or(Path::new("")),
                )?;
                if images.rows * images.cols != dilrnn_core::tasks::IMAGE_PIXELS {
                    return Err(AppError::Usage(format!(
                        "expected 28x28 images, found {}x{}",
                        images.rows, images.cols
                    )));
                }
                if cfg.task.holdout == 0 || cfg.task.holdout >= images.count {
                    return Err(AppError::Usage(format!(
                        "holdout must be between 1 and {} for this file",
                        images.count.saturating_sub(1)
                    )));
                }
                let pixels = PixelSequenceConfig {
                    permutation_seed: cfg.task.permutation_seed,
                    pad_to: if cfg.task.name == TaskName::NoisyMnist { cfg.task.pad_to } else { None },
                    noise_seed: 0,
                };
                pixels.validate()?;
                Ok(TaskSource::Pixels {
                    train_count: images.count - cfg.task.holdout,
                    images,
                    labels,
                    pixels,
                })
            }
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            TaskSource::CopyMemory { .. } => COPY_CLASSES,
            TaskSource::Pixels { .. } => 1,
        }
    }

    pub fn num_classes(&self) -> usize {
        10
    }

    pub fn train_batch(&self, seed: u64, iteration: usize, size: usize) -> AppResult<TaskBatch> {
        let base = Rng::derive(seed, TRAIN_STREAM).seed();
        let mut rng = Rng::derive(base, iteration as u64);
        match self {
            TaskSource::CopyMemory { delay } => Ok(gen_copy_memory(&CopyMemoryConfig {
                delay: *delay,
                batch: size,
                seed: rng.seed(),
            })?),
            TaskSource::Pixels {
                images,
                labels,
                train_count,
                pixels,
            } => {
                let idx: Vec<usize> = (0..size).map(|_| rng.below(*train_count as u64) as usize).collect();
                let cfg = PixelSequenceConfig {
                    noise_seed: rng.next_u64(),
                    ..pixels.clone()
                };
                self.pixel_rows(images, labels, &idx, &cfg)
            }
        }
    }

    /// The fixed held-out batch used for model selection and `eval`.
    pub fn validation_batch(&self, seed: u64, size: usize) -> AppResult<TaskBatch> {
        let vseed = Rng::derive(seed, VALIDATION_STREAM).seed();
        match self {
            TaskSource::CopyMemory { delay } => Ok(gen_copy_memory(&CopyMemoryConfig {
                delay: *delay,
                batch: size,
                seed: vseed,
            })?),
            TaskSource::Pixels {
                images,
                labels,
                train_count,
                pixels,
            } => {
                let idx: Vec<usize> = (*train_count..images.count).take(size).collect();
                let cfg = PixelSequenceConfig {
                    noise_seed: vseed,
                    ..pixels.clone()
                };
                self.pixel_rows(images, labels, &idx, &cfg)
            }
        }
    }

    fn pixel_rows(
        &self,
        images: &IdxImages,
        labels: &[u8],
        idx: &[usize],
        cfg: &PixelSequenceConfig,
    ) -> AppResult<TaskBatch> {
        let imgs: Vec<&[f64]> = idx.iter().map(|&i| images.image(i)).collect();
        let labs: Vec<u8> = idx.iter().map(|&i| labels[i]).collect();
        Ok(pixel_batch(&imgs, &labs, cfg)?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRecord {
    pub iteration: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub seconds: Option<f64>,
}

impl MetricsRecord {
    fn fields(&self) -> [String; 5] {
        [
            self.iteration.to_string(),
            self.train_loss.to_string(),
            self.val_loss.to_string(),
            self.val_acc.to_string(),
            self.seconds.map(|s| format!("{s:.3}")).unwrap_or_default(),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainSummary {
    pub task: String,
    pub seed: u64,
    pub parameters: usize,
    pub iterations_run: usize,
    pub stopped_early: bool,
    pub best_iteration: usize,
    pub best_val_loss: f64,
    pub final_val_loss: f64,
    pub final_val_acc: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_seconds: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub summary: TrainSummary,
    pub records: Vec<MetricsRecord>,
    /// Always measured, never written unless timing is enabled.
    pub wall_seconds: f64,
    pub model: DilatedRnnModel,
}

pub fn build_model(cfg: &RunConfig, source: &TaskSource) -> AppResult<DilatedRnnModel> {
    let mcfg = cfg.model.model_config(source.input_dim(), source.num_classes())?;
    Ok(DilatedRnnModel::new(&mcfg, &mut Rng::derive(cfg.seed, MODEL_STREAM))?)
}

pub fn evaluate(model: &DilatedRnnModel, batch: &TaskBatch) -> AppResult<LossStats> {
    Ok(model.evaluate(&batch.inputs, &batch.targets, &batch.mask)?)
}

struct Outputs {
    dir: PathBuf,
    metrics: csv::Writer<fs::File>,
}

impl Outputs {
    fn create(dir: &Path) -> AppResult<Self> {
        fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
        let path = dir.join("metrics.csv");
        let file = fs::File::create(&path).map_err(|e| AppError::io(&path, e))?;
        let mut metrics = csv::Writer::from_writer(file);
        metrics.write_record(METRICS_HEADER.split(','))?;
        metrics.flush().map_err(|e| AppError::io(&path, e))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            metrics,
        })
    }

    fn record(&mut self, r: &MetricsRecord) -> AppResult<()> {
        self.metrics.write_record(r.fields())?;
        self.metrics.flush().map_err(|e| AppError::io(self.dir.join("metrics.csv"), e))
    }

    fn diagnostic(&self, iteration: usize, message: &str) {
        let path = self.dir.join("failure.txt");
        if let Ok(mut f) = fs::File::create(path) {
            let _ = writeln!(f, "iteration = {iteration}\nerror = {message:?}");
        }
    }
}

/// Trains per `cfg`; with `out` set, writes `metrics.csv`, `best.ckpt` and
/// `summary.toml` there.
pub fn train(cfg: &RunConfig, out: Option<&Path>) -> AppResult<TrainOutcome> {
    cfg.validate()?;
    let source = TaskSource::from_config(cfg)?;
    let mut model = build_model(cfg, &source)?;
    let opt = cfg.optimizer.rmsprop();
    let tcfg = &cfg.training;
    let validation = source.validation_batch(cfg.seed, tcfg.validation_batch)?;
    let mut outputs = out.map(Outputs::create).transpose()?;

    let start = Instant::now();
    let mut records = Vec::new();
    let mut running = 0.0;
    let mut since = 0usize;
    let mut best: Option<(usize, f64)> = None;
    let mut last_val = LossStats::default();
    let mut iterations_run = 0;
    let mut stopped_early = false;

    for it in 1..=tcfg.iterations {
        let step = (|| -> AppResult<f64> {
            let batch = source.train_batch(cfg.seed, it, tcfg.batch)?;
            model.zero_grads();
            let stats = model.accumulate_gradients(&batch.inputs, &batch.targets, &batch.mask, tcfg.interleaved)?;
            if !stats.loss.is_finite() {
                return Err(AppError::Numeric(format!("training loss {}", stats.loss)));
            }
            model.rmsprop_step(&opt)?;
            Ok(stats.loss)
        })();
        let loss = match step {
            Ok(l) => l,
            Err(e) => {
                if let Some(o) = &outputs {
                    o.diagnostic(it, &e.to_string());
                }
                return Err(e);
            }
        };
        running += loss;
        since += 1;
        iterations_run = it;

        if it % tcfg.eval_every == 0 || it == tcfg.iterations {
            let val = evaluate(&model, &validation)?;
            let rec = MetricsRecord {
                iteration: it,
                train_loss: running / since as f64,
                val_loss: val.loss,
                val_acc: val.accuracy(),
                seconds: tcfg.timing.then(|| start.elapsed().as_secs_f64()),
            };
            running = 0.0;
            since = 0;
            if let Some(o) = outputs.as_mut() {
                o.record(&rec)?;
            }
            records.push(rec);
            last_val = val;
            if best.is_none_or(|(_, b)| val.loss < b) {
                best = Some((it, val.loss));
                if let Some(o) = &outputs {
                    let header = CheckpointHeader::for_model(&model, it, Some(val.loss));
                    checkpoint::save(&o.dir.join("best.ckpt"), &model, &header)?;
                }
            }
            if tcfg.target_loss.is_some_and(|t| val.loss < t) {
                stopped_early = true;
                break;
            }
        }
    }

    let wall = start.elapsed().as_secs_f64();
    let (best_iteration, best_val_loss) = best.unwrap_or((0, f64::NAN));
    let summary = TrainSummary {
        task: cfg.task.name.name().into(),
        seed: cfg.seed,
        parameters: model.param_count(),
        iterations_run,
        stopped_early,
        best_iteration,
        best_val_loss,
        final_val_loss: last_val.loss,
        final_val_acc: last_val.accuracy(),
        wall_seconds: tcfg.timing.then_some(wall),
    };
    if let Some(o) = &outputs {
        write_toml(&o.dir.join("summary.toml"), &summary)?;
    }
    Ok(TrainOutcome {
        summary,
        records,
        wall_seconds: wall,
        model,
    })
}

pub fn write_toml<T: Serialize>(path: &Path, value: &T) -> AppResult<()> {
    let text = toml::to_string(value).map_err(|e| AppError::Usage(format!("serialising {}: {e}", path.display())))?;
    fs::write(path, text).map_err(|e| AppError::io(path, e))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub checkpoint_iteration: usize,
    pub examples: usize,
    pub loss: f64,
    pub accuracy: f64,
}

/// Evaluates a checkpoint on the seeded validation batch of `cfg`.
pub fn evaluate_checkpoint(path: &Path, cfg: &RunConfig) -> AppResult<EvalReport> {
    let (model, header) = checkpoint::load(path)?;
    let source = TaskSource::from_config(cfg)?;
    if model.input_dim() != source.input_dim() || model.num_classes() != source.num_classes() {
        return Err(AppError::Usage(format!(
            "checkpoint expects input_dim {} and {} classes, task {} provides {} and {}",
            model.input_dim(),
            model.num_classes(),
            cfg.task.name.name(),
            source.input_dim(),
            source.num_classes()
        )));
    }
    let batch = source.validation_batch(cfg.seed, cfg.training.validation_batch)?;
    let stats = evaluate(&model, &batch)?;
    Ok(EvalReport {
        checkpoint_iteration: header.iteration,
        examples: stats.count,
        loss: stats.loss,
        accuracy: stats.accuracy(),
    })
}
