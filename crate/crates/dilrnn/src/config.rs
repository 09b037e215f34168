//! Versioned TOML files: run configurations and architecture specs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use dilrnn_core::cells::{CellInit, CellKind};
use dilrnn_core::graph::{ArchKind, ArchSpec};
use dilrnn_core::model::{Architecture, InitScheme, ModelConfig};
use dilrnn_core::numeric::RmsProp;

use crate::error::{AppError, AppResult};

pub const CONFIG_VERSION: u32 = 1;

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn parse_toml<T: serde::de::DeserializeOwned>(text: &str, path: &Path) -> AppResult<T> {
    toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_col(text, s.start));
        AppError::Parse {
            path: path.to_path_buf(),
            line,
            column,
            message: e.message().to_string(),
        }
    })
}

fn read(path: &Path) -> AppResult<String> {
    fs::read_to_string(path).map_err(|e| AppError::io(path, e))
}

fn check_version(version: u32, path: &Path) -> AppResult<()> {
    if version != CONFIG_VERSION {
        return Err(AppError::Parse {
            path: path.to_path_buf(),
            line: 1,
            column: 1,
            message: format!("unsupported version {version}, expected {CONFIG_VERSION}"),
        });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskName {
    CopyMemory,
    PixelMnist,
    NoisyMnist,
}

impl TaskName {
    pub fn parse(s: &str) -> AppResult<Self> {
        match s {
            "copy_memory" => Ok(TaskName::CopyMemory),
            "pixel_mnist" => Ok(TaskName::PixelMnist),
            "noisy_mnist" => Ok(TaskName::NoisyMnist),
            other => Err(AppError::Usage(format!("unknown task `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TaskName::CopyMemory => "copy_memory",
            TaskName::PixelMnist => "pixel_mnist",
            TaskName::NoisyMnist => "noisy_mnist",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSection {
    pub name: TaskName,
    /// Copy-memory delay `T`.
    #[serde(default = "default_delay")]
    pub delay: usize,
    /// IDX files for the pixel tasks.
    pub images: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    /// Trailing images of the file held out for validation.
    #[serde(default = "default_holdout")]
    pub holdout: usize,
    pub permutation_seed: Option<u64>,
    /// Padded length of the noisy variant.
    pub pad_to: Option<usize>,
}

fn default_delay() -> usize {
    100
}

fn default_holdout() -> usize {
    1000
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchName {
    Dilated,
    Single,
    Stacked,
    RegularSkip,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "default_cell")]
    pub cell: String,
    #[serde(default = "default_arch")]
    pub architecture: ArchName,
    #[serde(default = "default_layers")]
    pub layers: usize,
    #[serde(default = "default_base")]
    pub base: usize,
    #[serde(default)]
    pub start_exponent: u32,
    /// Skip length of the regular-skip baseline.
    pub skip: Option<usize>,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default = "default_init")]
    pub init: String,
    #[serde(default = "default_forget_bias")]
    pub forget_bias: f64,
}

fn default_cell() -> String {
    "vanilla".into()
}
fn default_arch() -> ArchName {
    ArchName::Dilated
}
fn default_layers() -> usize {
    9
}
fn default_base() -> usize {
    2
}
fn default_hidden() -> usize {
    10
}
fn default_init() -> String {
    "standard_normal".into()
}
fn default_forget_bias() -> f64 {
    1.0
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            cell: default_cell(),
            architecture: default_arch(),
            layers: default_layers(),
            base: default_base(),
            start_exponent: 0,
            skip: None,
            hidden: default_hidden(),
            init: default_init(),
            forget_bias: default_forget_bias(),
        }
    }
}

impl ModelSection {
    pub fn model_config(&self, input_dim: usize, num_classes: usize) -> AppResult<ModelConfig> {
        let kind = CellKind::parse(&self.cell)?;
        let architecture = match self.architecture {
            ArchName::Dilated => Architecture::Dilated,
            ArchName::Single => Architecture::Single,
            ArchName::Stacked => Architecture::Stacked,
            ArchName::RegularSkip => Architecture::RegularSkip {
                skip: self
                    .skip
                    .ok_or_else(|| AppError::Usage("regular_skip needs model.skip".into()))?,
            },
        };
        if self.architecture != ArchName::Dilated && self.start_exponent != 0 {
            return Err(AppError::Usage("start_exponent only applies to dilated models".into()));
        }
        let mut cfg = ModelConfig::dilated(kind, self.layers, self.base, self.start_exponent)
            .dims(input_dim, self.hidden, num_classes)
            .with_init(InitScheme::parse(&self.init)?);
        cfg.architecture = architecture;
        cfg.init = CellInit {
            forget_bias: self.forget_bias,
        };
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_decay")]
    pub decay: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_lr() -> f64 {
    0.001
}
fn default_decay() -> f64 {
    0.9
}
fn default_epsilon() -> f64 {
    1e-8
}

impl Default for OptimizerSection {
    fn default() -> Self {
        OptimizerSection {
            lr: default_lr(),
            decay: default_decay(),
            epsilon: default_epsilon(),
        }
    }
}

impl OptimizerSection {
    pub fn rmsprop(&self) -> RmsProp {
        RmsProp {
            lr: self.lr,
            decay: self.decay,
            epsilon: self.epsilon,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    #[serde(default = "default_batch")]
    pub batch: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
    #[serde(default = "default_batch")]
    pub validation_batch: usize,
    /// Stop once the validation loss falls below this value.
    pub target_loss: Option<f64>,
    /// Fill the `seconds` column (makes metrics time-dependent).
    #[serde(default)]
    pub timing: bool,
    #[serde(default = "default_true")]
    pub interleaved: bool,
}

fn default_batch() -> usize {
    128
}
fn default_iterations() -> usize {
    5000
}
fn default_eval_every() -> usize {
    100
}
fn default_true() -> bool {
    true
}

impl Default for TrainingSection {
    fn default() -> Self {
        TrainingSection {
            batch: default_batch(),
            iterations: default_iterations(),
            eval_every: default_eval_every(),
            validation_batch: default_batch(),
            target_loss: None,
            timing: false,
            interleaved: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub task: TaskSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub training: TrainingSection,
}

impl RunConfig {
    /// Copy memory with the published optimiser settings.
    pub fn copy_memory(delay: usize, seed: u64) -> Self {
        RunConfig {
            version: CONFIG_VERSION,
            seed,
            out: None,
            task: TaskSection {
                name: TaskName::CopyMemory,
                delay,
                images: None,
                labels: None,
                holdout: default_holdout(),
                permutation_seed: None,
                pad_to: None,
            },
            model: ModelSection::default(),
            optimizer: OptimizerSection::default(),
            training: TrainingSection::default(),
        }
    }

    pub fn from_toml(text: &str, path: &Path) -> AppResult<Self> {
        let cfg: RunConfig = parse_toml(text, path)?;
        check_version(cfg.version, path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> AppResult<Self> {
        Self::from_toml(&read(path)?, path)
    }

    pub fn validate(&self) -> AppResult<()> {
        let t = &self.training;
        if t.batch == 0 || t.validation_batch == 0 || t.eval_every == 0 {
            return Err(AppError::Usage("batch sizes and eval_every must be positive".into()));
        }
        self.optimizer.rmsprop().validate()?;
        match self.task.name {
            TaskName::CopyMemory if self.task.delay == 0 => {
                Err(AppError::Usage("copy memory needs delay >= 1".into()))
            }
            TaskName::PixelMnist | TaskName::NoisyMnist if self.task.images.is_none() || self.task.labels.is_none() => {
                Err(AppError::Usage(format!("{} needs task.images and task.labels", self.task.name.name())))
            }
            TaskName::NoisyMnist if self.task.pad_to.is_none() => {
                Err(AppError::Usage("noisy_mnist needs task.pad_to".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArchFile {
    version: u32,
    kind: String,
    layers: usize,
    #[serde(default = "default_base")]
    base: usize,
    #[serde(default)]
    start_exponent: u32,
    period: Option<usize>,
    dilations: Option<Vec<usize>>,
}

/// Parses an architecture file (`kind`, `layers`, `base`, `start_exponent`,
/// `period`, `dilations`).
pub fn parse_arch_spec(text: &str, path: &Path) -> AppResult<ArchSpec> {
    let f: ArchFile = parse_toml(text, path)?;
    check_version(f.version, path)?;
    let kind = ArchKind::parse(&f.kind).map_err(|e| {
        let offset = text.find(&f.kind).unwrap_or(0);
        let (line, column) = line_col(text, offset);
        AppError::Parse {
            path: path.to_path_buf(),
            line,
            column,
            message: e.to_string(),
        }
    })?;
    let layers = if kind == ArchKind::CustomSchedule {
        f.dilations.as_ref().map_or(f.layers, Vec::len)
    } else {
        f.layers
    };
    let spec = ArchSpec {
        kind,
        layers,
        base: f.base,
        start_exponent: f.start_exponent,
        period: f.period,
        dilations: f.dilations,
    };
    spec.dilations()?;
    Ok(spec)
}

pub fn load_arch_spec(path: &Path) -> AppResult<ArchSpec> {
    parse_arch_spec(&read(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_and_column() {
        assert_eq!(line_col("ab\ncd\nef", 4), (2, 2));
        assert_eq!(line_col("x", 0), (1, 1));
    }

    #[test]
    fn minimal_run_config() {
        let text = "version = 1\nseed = 3\n[task]\nname = \"copy_memory\"\ndelay = 20\n";
        let cfg = RunConfig::from_toml(text, Path::new("run.toml")).unwrap();
        assert_eq!(cfg.task.delay, 20);
        assert_eq!(cfg.training.batch, 128);
        assert_eq!(cfg.optimizer.rmsprop(), RmsProp::default());
    }

    #[test]
    fn unknown_key_points_at_its_line() {
        let text = "version = 1\nseed = 3\n[task]\nname = \"copy_memory\"\ndelya = 20\n";
        match RunConfig::from_toml(text, Path::new("run.toml")) {
            Err(AppError::Parse { line, column, .. }) => assert_eq!((line, column), (5, 1)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn seed_is_mandatory() {
        let text = "version = 1\n[task]\nname = \"copy_memory\"\n";
        assert!(matches!(RunConfig::from_toml(text, Path::new("r")), Err(AppError::Parse { .. })));
    }

    #[test]
    fn version_is_checked() {
        let text = "version = 2\nseed = 1\n[task]\nname = \"copy_memory\"\n";
        assert!(matches!(RunConfig::from_toml(text, Path::new("r")), Err(AppError::Parse { .. })));
    }

    #[test]
    fn arch_files() {
        let spec = parse_arch_spec("version = 1\nkind = \"dilated_rnn\"\nlayers = 9\n", Path::new("a")).unwrap();
        assert_eq!(spec.period().unwrap(), 256);
        let spec = parse_arch_spec(
            "version = 1\nkind = \"custom_schedule\"\nlayers = 3\ndilations = [1, 3, 9]\n",
            Path::new("a"),
        )
        .unwrap();
        assert_eq!(spec.dilations().unwrap(), vec![1, 3, 9]);
        match parse_arch_spec("version = 1\nkind = \"dilated\"\nlayers = 2\n", Path::new("a")) {
            Err(AppError::Parse { line, column, .. }) => assert_eq!((line, column), (2, 9)),
            other => panic!("{other:?}"),
        }
        assert!(parse_arch_spec("version = 1\nkind = \"custom_schedule\"\nlayers = 2\ndilations = [1, 3, 4]\n", Path::new("a")).is_err());
    }
}
