use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{Architecture, DilatedRnnModel, LossStats, SequenceActivations};
use crate::cells::CellState;
use crate::error::{Error, Result};
use crate::numeric::{matmul_nt_acc, matmul_tn_acc, DenseMatrix};

fn add_into(slot: &mut Option<DenseMatrix>, g: DenseMatrix) -> Result<()> {
    match slot {
        Some(acc) => acc.add_assign(&g),
        None => {
            *slot = Some(g);
            Ok(())
        }
    }
}

impl DilatedRnnModel {
    /// Backpropagation through time. `d_logits[t]` is `∂L/∂logits_t` or
    /// `None` where the loss does not look; parameter gradients are added to
    /// the current buffers. Works for activations from any forward route.
    pub fn backward(
        &mut self,
        acts: &SequenceActivations,
        inputs: &[DenseMatrix],
        d_logits: &[Option<DenseMatrix>],
    ) -> Result<()> {
        if acts.generation != self.generation {
            return Err(Error::Consistency(format!(
                "activations are from parameter generation {}, model is at {}",
                acts.generation, self.generation
            )));
        }
        let t_len = acts.len();
        if inputs.len() != t_len || d_logits.len() != t_len || acts.layers.len() != self.layers.len() {
            return Err(Error::Consistency(format!(
                "backward over {t_len} cached steps got {} inputs and {} logit gradients",
                inputs.len(),
                d_logits.len()
            )));
        }
        let batch = acts.batch;
        let hidden = self.config.hidden_dim;

        // Readout and fusion head.
        let mut d_top: Vec<Option<DenseMatrix>> = vec![None; t_len];
        for (t, dz) in d_logits.iter().enumerate() {
            let Some(dz) = dz else { continue };
            if acts.logits[t].is_none() {
                return Err(Error::Consistency(format!("gradient at t={t} but no logits were computed")));
            }
            let top = &acts.layers.last().unwrap()[t].state.hidden;
            let features = acts.fused[t].as_ref().unwrap_or(top);
            matmul_tn_acc(features, dz, &mut self.readout_weights.grad)?;
            let bg = self.readout_bias.grad.row_mut(0);
            for r in 0..batch {
                for (g, &d) in bg.iter_mut().zip(dz.row(r)) {
                    *g += d;
                }
            }
            let mut dh = DenseMatrix::zeros(batch, hidden);
            matmul_nt_acc(dz, &self.readout_weights.value, &mut dh)?;
            match &mut self.fusion {
                Some(head) => {
                    for (k, lag) in head.lags.iter_mut().enumerate().take(t + 1) {
                        let src = &acts.layers.last().unwrap()[t - k].state.hidden;
                        matmul_tn_acc(src, &dh, &mut lag.grad)?;
                        let mut back = DenseMatrix::zeros(batch, hidden);
                        matmul_nt_acc(&dh, &lag.value, &mut back)?;
                        add_into(&mut d_top[t - k], back)?;
                    }
                }
                None => add_into(&mut d_top[t], dh)?,
            }
        }

        let zero = CellState::zeros(self.config.kind, batch, hidden);
        let skip_arch = matches!(self.config.architecture, Architecture::RegularSkip { .. });
        let mut d_out = d_top;
        for l in (0..self.layers.len()).rev() {
            let dil = self.schedule.dilations()[l];
            let caches = &acts.layers[l];
            let mut d_mem: Vec<Option<DenseMatrix>> = vec![None; t_len];
            let mut d_below: Vec<Option<DenseMatrix>> = vec![None; t_len];
            let want_input = l > 0;
            let cell = &mut self.layers[l];
            for t in (0..t_len).rev() {
                let dh = d_out[t].take();
                let dm = d_mem[t].take();
                if dh.is_none() && dm.is_none() {
                    continue;
                }
                let dh = dh.unwrap_or_else(|| DenseMatrix::zeros(batch, hidden));
                let x = if l == 0 { &inputs[t] } else { &acts.layers[l - 1][t].state.hidden };
                let (rec_lag, skip_lag) = if skip_arch { (1, Some(dil)) } else { (dil, None) };
                let rec_in = if t >= rec_lag { &caches[t - rec_lag].state } else { &zero };
                let skipped = skip_lag.map(|s| if t >= s { &caches[t - s].state } else { &zero });
                let g = cell.backward(x, rec_in, skipped, &caches[t], &dh, dm.as_ref(), want_input)?;
                if t >= rec_lag {
                    add_into(&mut d_out[t - rec_lag], g.recurrent.hidden)?;
                    if let Some(m) = g.recurrent.memory {
                        add_into(&mut d_mem[t - rec_lag], m)?;
                    }
                }
                if let (Some(s), Some(gs)) = (skip_lag, g.skipped) {
                    if t >= s {
                        add_into(&mut d_out[t - s], gs)?;
                    }
                }
                if let Some(gx) = g.input {
                    d_below[t] = Some(gx);
                }
            }
            d_out = d_below;
        }
        Ok(())
    }

    /// Forward, masked loss and backward in one call; returns the loss
    /// statistics. Logits are only computed at masked steps.
    pub fn accumulate_gradients(
        &mut self,
        inputs: &[DenseMatrix],
        targets: &[Vec<usize>],
        mask: &[bool],
        interleaved: bool,
    ) -> Result<LossStats> {
        let positions: Vec<usize> = (0..mask.len()).filter(|&t| mask[t]).collect();
        let acts = if interleaved {
            self.forward_interleaved_at(inputs, &positions)?
        } else {
            self.forward_at(inputs, &positions)?
        };
        let (stats, d_logits) = super::masked_cross_entropy(&acts, targets, mask)?;
        self.backward(&acts, inputs, &d_logits)?;
        Ok(stats)
    }

    /// Loss statistics without touching gradients.
    pub fn evaluate(&self, inputs: &[DenseMatrix], targets: &[Vec<usize>], mask: &[bool]) -> Result<LossStats> {
        let positions: Vec<usize> = (0..mask.len()).filter(|&t| mask[t]).collect();
        let acts = self.forward_interleaved_at(inputs, &positions)?;
        Ok(super::masked_cross_entropy(&acts, targets, mask)?.0)
    }
}
