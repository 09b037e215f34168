//! Binary checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! 8 bytes   magic "DILRNNCK"
//! u32       format version (1)
//! u32       header length H
//! H bytes   UTF-8 TOML header: model shape, init, training position
//! u64       parameter count P
//! P × f64   parameter values in the model's serialization order
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use dilrnn_core::cells::{CellInit, CellKind};
use dilrnn_core::model::{Architecture, DilatedRnnModel, InitScheme, ModelConfig};
use dilrnn_core::numeric::Rng;

use crate::error::{AppError, AppResult};

const MAGIC: &[u8; 8] = b"DILRNNCK";
const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub cell: String,
    pub architecture: String,
    pub skip: Option<usize>,
    pub layers: usize,
    pub base: usize,
    pub start_exponent: u32,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub num_classes: usize,
    pub forget_bias: f64,
    pub init: String,
    pub iteration: usize,
    pub val_loss: Option<f64>,
}

impl CheckpointHeader {
    pub fn for_model(model: &DilatedRnnModel, iteration: usize, val_loss: Option<f64>) -> Self {
        let cfg = model.config();
        CheckpointHeader {
            cell: cfg.kind.name().into(),
            architecture: cfg.architecture.name().into(),
            skip: match cfg.architecture {
                Architecture::RegularSkip { skip } => Some(skip),
                _ => None,
            },
            layers: cfg.num_layers,
            base: cfg.base,
            start_exponent: cfg.start_exponent,
            input_dim: cfg.input_dim,
            hidden_dim: cfg.hidden_dim,
            num_classes: cfg.num_classes,
            forget_bias: cfg.init.forget_bias,
            init: cfg.weights.name().into(),
            iteration,
            val_loss,
        }
    }

    pub fn model_config(&self) -> AppResult<ModelConfig> {
        let kind = CellKind::parse(&self.cell)?;
        let architecture = match (self.architecture.as_str(), self.skip) {
            ("dilated", _) => Architecture::Dilated,
            ("single", _) => Architecture::Single,
            ("stacked", _) => Architecture::Stacked,
            ("regular_skip", Some(skip)) => Architecture::RegularSkip { skip },
            (other, _) => return Err(AppError::Usage(format!("checkpoint has unknown architecture `{other}`"))),
        };
        let mut cfg = ModelConfig::dilated(kind, self.layers, self.base, self.start_exponent)
            .dims(self.input_dim, self.hidden_dim, self.num_classes)
            .with_init(InitScheme::parse(&self.init)?);
        cfg.architecture = architecture;
        cfg.init = CellInit {
            forget_bias: self.forget_bias,
        };
        Ok(cfg)
    }
}

pub fn encode(model: &DilatedRnnModel, header: &CheckpointHeader) -> AppResult<Vec<u8>> {
    let text = toml::to_string(header).map_err(|e| AppError::Usage(format!("checkpoint header: {e}")))?;
    let values = model.flat_values();
    let mut out = Vec::with_capacity(24 + text.len() + 8 * values.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(text.len() as u32).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

fn format_error(offset: usize, message: impl Into<String>) -> AppError {
    AppError::Core(dilrnn_core::Error::Format {
        offset,
        message: message.into(),
    })
}

fn take<'a>(bytes: &'a [u8], at: &mut usize, n: usize, what: &str) -> AppResult<&'a [u8]> {
    let slice = bytes
        .get(*at..*at + n)
        .ok_or_else(|| format_error(bytes.len(), format!("truncated checkpoint: missing {what}")))?;
    *at += n;
    Ok(slice)
}

pub fn decode(bytes: &[u8]) -> AppResult<(DilatedRnnModel, CheckpointHeader)> {
    let mut at = 0;
    if take(bytes, &mut at, 8, "magic")? != MAGIC {
        return Err(format_error(0, "not a checkpoint (bad magic)"));
    }
    let version = u32::from_le_bytes(take(bytes, &mut at, 4, "version")?.try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(format_error(8, format!("unsupported checkpoint version {version}")));
    }
    let len = u32::from_le_bytes(take(bytes, &mut at, 4, "header length")?.try_into().unwrap()) as usize;
    let start = at;
    let text = std::str::from_utf8(take(bytes, &mut at, len, "header")?)
        .map_err(|_| format_error(start, "header is not UTF-8"))?;
    let header: CheckpointHeader =
        toml::from_str(text).map_err(|e| format_error(start, format!("header: {}", e.message())))?;
    let count = u64::from_le_bytes(take(bytes, &mut at, 8, "parameter count")?.try_into().unwrap()) as usize;
    let mut model = DilatedRnnModel::new(&header.model_config()?, &mut Rng::new(0))?;
    if count != model.param_count() {
        return Err(format_error(
            at - 8,
            format!("{count} parameters stored, the header describes {}", model.param_count()),
        ));
    }
    let data = take(bytes, &mut at, 8 * count, "parameter values")?;
    if at != bytes.len() {
        return Err(format_error(at, "trailing bytes after parameters"));
    }
    let values: Vec<f64> = data.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    model.set_flat_values(&values)?;
    Ok((model, header))
}

pub fn save(path: &Path, model: &DilatedRnnModel, header: &CheckpointHeader) -> AppResult<()> {
    fs::write(path, encode(model, header)?).map_err(|e| AppError::io(path, e))
}

pub fn load(path: &Path) -> AppResult<(DilatedRnnModel, CheckpointHeader)> {
    decode(&fs::read(path).map_err(|e| AppError::io(path, e))?)
}
