use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::SequenceActivations;
use crate::error::{Error, Result};
use crate::numeric::{softmax_cross_entropy, DenseMatrix};

/// Loss summed over masked timesteps, plus the counts needed for means.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossStats {
    /// Mean cross-entropy per masked (timestep, example) pair.
    pub loss: f64,
    pub correct: usize,
    pub count: usize,
}

impl LossStats {
    pub fn accuracy(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.correct as f64 / self.count as f64
        }
    }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Cross-entropy averaged over every masked (timestep, example) pair, and
/// its gradient with respect to the logits (`None` at unmasked steps).
///
/// `targets[t][b]` is the label of example `b` at time `t`; entries at
/// unmasked steps are ignored.
pub fn masked_cross_entropy(
    acts: &SequenceActivations,
    targets: &[Vec<usize>],
    mask: &[bool],
) -> Result<(LossStats, Vec<Option<DenseMatrix>>)> {
    let t_len = acts.len();
    if targets.len() != t_len || mask.len() != t_len {
        return Err(Error::dim(
            "masked_cross_entropy",
            format!("{t_len} timesteps"),
            format!("{} targets, {} mask entries", targets.len(), mask.len()),
        ));
    }
    let steps = mask.iter().filter(|&&m| m).count();
    let mut grads = vec![None; t_len];
    let mut stats = LossStats::default();
    if steps == 0 {
        return Ok((stats, grads));
    }
    let inv = 1.0 / steps as f64;
    for t in (0..t_len).filter(|&t| mask[t]) {
        let logits = acts.logits[t].as_ref().ok_or_else(|| {
            Error::Consistency(format!("no logits computed at masked timestep {t}"))
        })?;
        let (loss, mut g) = softmax_cross_entropy(logits, &targets[t])?;
        stats.loss += loss * inv;
        g.scale(inv);
        for (r, &label) in targets[t].iter().enumerate() {
            if argmax(logits.row(r)) == label {
                stats.correct += 1;
            }
        }
        stats.count += targets[t].len();
        grads[t] = Some(g);
    }
    if !stats.loss.is_finite() {
        return Err(Error::Numeric(alloc::string::String::from("loss")));
    }
    Ok((stats, grads))
}
