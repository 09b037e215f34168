//! Sweeps over the starting dilation or the depth.

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{ArchName, RunConfig};
use crate::error::{AppError, AppResult};
use crate::train::{train, TrainOutcome};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Sweep {
    /// Raise the bottom dilation to `M^l0` by dropping the lowest layers;
    /// the top dilation stays fixed.
    StartExponents(Vec<u32>),
    /// Number of layers, with the schedule starting at the configured `l0`.
    LayerCounts(Vec<usize>),
}

#[derive(Clone, Debug)]
pub struct AblationRow {
    pub label: String,
    pub layers: usize,
    pub start_exponent: u32,
    pub outcome: TrainOutcome,
}

/// The configurations of a sweep, labelled.
pub fn sweep_configs(base: &RunConfig, sweep: &Sweep) -> AppResult<Vec<(String, RunConfig)>> {
    if base.model.architecture != ArchName::Dilated {
        return Err(AppError::Usage("ablations sweep dilated models".into()));
    }
    let mut out = Vec::new();
    match sweep {
        Sweep::StartExponents(l0s) => {
            let top = base.model.layers as u32 + base.model.start_exponent;
            for &l0 in l0s {
                if l0 >= top {
                    return Err(AppError::Usage(format!("start exponent {l0} leaves no layers")));
                }
                let mut cfg = base.clone();
                cfg.model.start_exponent = l0;
                cfg.model.layers = (top - l0) as usize;
                out.push((format!("l0_{l0}"), cfg));
            }
        }
        Sweep::LayerCounts(counts) => {
            for &layers in counts {
                if layers == 0 {
                    return Err(AppError::Usage("layer counts must be positive".into()));
                }
                let mut cfg = base.clone();
                cfg.model.layers = layers;
                out.push((format!("layers_{layers}"), cfg));
            }
        }
    }
    if out.is_empty() {
        return Err(AppError::Usage("empty sweep".into()));
    }
    Ok(out)
}

/// Trains every configuration; with `out`, each run writes to its own
/// subdirectory and `ablation.csv` collects the results (wall time
/// included).
pub fn ablate(base: &RunConfig, sweep: &Sweep, out: Option<&Path>) -> AppResult<Vec<AblationRow>> {
    let mut rows = Vec::new();
    for (label, cfg) in sweep_configs(base, sweep)? {
        let dir: Option<PathBuf> = out.map(|o| o.join(&label));
        let outcome = train(&cfg, dir.as_deref())?;
        rows.push(AblationRow {
            label,
            layers: cfg.model.layers,
            start_exponent: cfg.model.start_exponent,
            outcome,
        });
    }
    if let Some(o) = out {
        fs::create_dir_all(o).map_err(|e| AppError::io(o, e))?;
        let path = o.join("ablation.csv");
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record([
            "label",
            "layers",
            "start_exponent",
            "parameters",
            "iterations",
            "final_val_loss",
            "final_val_acc",
            "best_val_loss",
            "wall_seconds",
        ])?;
        for r in &rows {
            let s = &r.outcome.summary;
            w.write_record([
                r.label.clone(),
                r.layers.to_string(),
                r.start_exponent.to_string(),
                s.parameters.to_string(),
                s.iterations_run.to_string(),
                s.final_val_loss.to_string(),
                s.final_val_acc.to_string(),
                s.best_val_loss.to_string(),
                format!("{:.3}", r.outcome.wall_seconds),
            ])?;
        }
        w.flush().map_err(|e| AppError::io(&path, e))?;
    }
    Ok(rows)
}
