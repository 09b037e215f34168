use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{Architecture, DilatedRnnModel};
use crate::cells::{CellParams, CellState, StepCache};
use crate::error::{Error, Result};
use crate::numeric::{matmul_acc, DenseMatrix};

/// Cached forward pass: per-layer, per-timestep cell activations plus the
/// fused features and logits at the readout positions.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceActivations {
    pub layers: Vec<Vec<StepCache>>,
    pub fused: Vec<Option<DenseMatrix>>,
    pub logits: Vec<Option<DenseMatrix>>,
    pub(super) batch: usize,
    pub(super) generation: u64,
}

impl SequenceActivations {
    pub fn len(&self) -> usize {
        self.logits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logits.is_empty()
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn top_hidden(&self, t: usize) -> &DenseMatrix {
        &self.layers.last().unwrap()[t].state.hidden
    }

    /// Largest absolute difference over every cached hidden state and logit.
    pub fn max_abs_diff(&self, other: &SequenceActivations) -> f64 {
        let mut d: f64 = 0.0;
        for (a, b) in self.layers.iter().flatten().zip(other.layers.iter().flatten()) {
            d = d.max(a.state.hidden.max_abs_diff(&b.state.hidden));
            if let (Some(x), Some(y)) = (&a.state.memory, &b.state.memory) {
                d = d.max(x.max_abs_diff(y));
            }
        }
        for (a, b) in self.logits.iter().zip(&other.logits) {
            match (a, b) {
                (Some(x), Some(y)) => d = d.max(x.max_abs_diff(y)),
                (None, None) => {}
                _ => return f64::INFINITY,
            }
        }
        d
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Route {
    Sequential,
    Interleaved,
    PhaseSplit,
}

fn run_dilated_layer(cell: &CellParams, xs: &[&DenseMatrix], dilation: usize, zero: &CellState) -> Result<Vec<StepCache>> {
    let mut out: Vec<StepCache> = Vec::with_capacity(xs.len());
    for (t, x) in xs.iter().enumerate() {
        let cache = {
            let rec = if t >= dilation { &out[t - dilation].state } else { zero };
            cell.step(x, rec)?
        };
        out.push(cache);
    }
    Ok(out)
}

fn run_skip_layer(cell: &CellParams, xs: &[&DenseMatrix], skip: usize, zero: &CellState) -> Result<Vec<StepCache>> {
    let mut out: Vec<StepCache> = Vec::with_capacity(xs.len());
    for (t, x) in xs.iter().enumerate() {
        let cache = {
            let prev = if t >= 1 { &out[t - 1].state } else { zero };
            let skipped = if t >= skip { &out[t - skip].state } else { zero };
            cell.skip_step(x, prev, skipped)?
        };
        out.push(cache);
    }
    Ok(out)
}

/// The `s` phase subsequences `{x_{ks+p}}` are stacked along the batch axis
/// and advanced together as one dilation-1 recurrence; outputs are split back
/// to their original timesteps. Later steps carry only the phases that are
/// still running, which handles lengths not divisible by `s`.
fn run_interleaved_layer(
    cell: &CellParams,
    xs: &[&DenseMatrix],
    dilation: usize,
    batch: usize,
) -> Result<Vec<StepCache>> {
    let t_len = xs.len();
    let mut out: Vec<Option<StepCache>> = vec![None; t_len];
    let mut prev: Option<CellState> = None;
    let mut k = 0;
    while k * dilation < t_len {
        let start = k * dilation;
        let active = dilation.min(t_len - start);
        let x = DenseMatrix::vstack(&xs[start..start + active])?;
        let rec = match &prev {
            None => CellState::zeros(cell.kind(), active * batch, cell.hidden_dim()),
            Some(p) => p.row_block(0, active * batch),
        };
        let cache = cell.step(&x, &rec)?;
        for p in 0..active {
            out[start + p] = Some(cache.row_block(p * batch, (p + 1) * batch));
        }
        prev = Some(cache.state);
        k += 1;
    }
    Ok(out.into_iter().map(|c| c.expect("every timestep visited")).collect())
}

impl DilatedRnnModel {
    fn check_inputs(&self, inputs: &[DenseMatrix]) -> Result<usize> {
        let first = inputs
            .first()
            .ok_or_else(|| Error::dim("forward", "at least one timestep", "0"))?;
        let batch = first.rows();
        for (t, x) in inputs.iter().enumerate() {
            if x.shape() != (batch, self.config.input_dim) {
                return Err(Error::dim(
                    "forward",
                    format!("{}x{} at every timestep", batch, self.config.input_dim),
                    format!("{}x{} at t={t}", x.rows(), x.cols()),
                ));
            }
        }
        Ok(batch)
    }

    /// Full forward pass with logits at every timestep.
    pub fn forward(&self, inputs: &[DenseMatrix]) -> Result<SequenceActivations> {
        let all: Vec<usize> = (0..inputs.len()).collect();
        self.run(inputs, &all, Route::Sequential)
    }

    /// Forward pass computing logits only at `positions`.
    pub fn forward_at(&self, inputs: &[DenseMatrix], positions: &[usize]) -> Result<SequenceActivations> {
        self.run(inputs, positions, Route::Sequential)
    }

    /// Same result as [`forward`](Self::forward), computed by splitting each
    /// dilated layer into interleaved subsequences processed side by side.
    pub fn forward_interleaved(&self, inputs: &[DenseMatrix]) -> Result<SequenceActivations> {
        let all: Vec<usize> = (0..inputs.len()).collect();
        self.run(inputs, &all, Route::Interleaved)
    }

    pub fn forward_interleaved_at(&self, inputs: &[DenseMatrix], positions: &[usize]) -> Result<SequenceActivations> {
        self.run(inputs, positions, Route::Interleaved)
    }

    /// Generalised stack with starting dilation `W = M^l0 > 1`: the input is
    /// cut into `W` downsampled subsequences, each is run through the stack
    /// with dilations `s(l)/W` (shared weights), and the fusion head combines
    /// `W` consecutive top-layer outputs into each logit.
    pub fn fusion_forward(&self, inputs: &[DenseMatrix]) -> Result<SequenceActivations> {
        if self.fusion.is_none() {
            return Err(Error::config("fusion_forward needs a starting dilation above one (l0 > 0)"));
        }
        let all: Vec<usize> = (0..inputs.len()).collect();
        self.run(inputs, &all, Route::PhaseSplit)
    }

    fn run(&self, inputs: &[DenseMatrix], positions: &[usize], route: Route) -> Result<SequenceActivations> {
        let batch = self.check_inputs(inputs)?;
        let t_len = inputs.len();
        if let Some(&bad) = positions.iter().find(|&&p| p >= t_len) {
            return Err(Error::Index {
                op: "forward readout",
                index: bad,
                limit: t_len,
            });
        }
        let zero = CellState::zeros(self.config.kind, batch, self.config.hidden_dim);
        let skip = matches!(self.config.architecture, Architecture::RegularSkip { .. });
        let mut layers: Vec<Vec<StepCache>> = Vec::with_capacity(self.layers.len());

        if route == Route::PhaseSplit {
            let window = self.schedule.starting_dilation();
            let mut phase_caches: Vec<Vec<Option<StepCache>>> = Vec::new();
            for _ in 0..self.layers.len() {
                phase_caches.push(vec![None; t_len]);
            }
            for phase in 0..window.min(t_len) {
                let positions_p: Vec<usize> = (phase..t_len).step_by(window).collect();
                let mut xs: Vec<DenseMatrix> = positions_p.iter().map(|&t| inputs[t].clone()).collect();
                for (l, cell) in self.layers.iter().enumerate() {
                    let dil = self.schedule.dilations()[l] / window;
                    let refs: Vec<&DenseMatrix> = xs.iter().collect();
                    let caches = run_dilated_layer(cell, &refs, dil, &zero)?;
                    xs = caches.iter().map(|c| c.state.hidden.clone()).collect();
                    for (c, &t) in caches.into_iter().zip(&positions_p) {
                        phase_caches[l][t] = Some(c);
                    }
                }
            }
            for per_layer in phase_caches {
                layers.push(per_layer.into_iter().map(|c| c.expect("all phases ran")).collect());
            }
        } else {
            for (l, cell) in self.layers.iter().enumerate() {
                let xs: Vec<&DenseMatrix> = if l == 0 {
                    inputs.iter().collect()
                } else {
                    layers[l - 1].iter().map(|c| &c.state.hidden).collect()
                };
                let dil = self.schedule.dilations()[l];
                let caches = if skip {
                    run_skip_layer(cell, &xs, dil, &zero)?
                } else if route == Route::Interleaved && dil > 1 {
                    run_interleaved_layer(cell, &xs, dil, batch)?
                } else {
                    run_dilated_layer(cell, &xs, dil, &zero)?
                };
                layers.push(caches);
            }
        }

        let mut fused = vec![None; t_len];
        let mut logits = vec![None; t_len];
        let top = layers.last().expect("at least one layer");
        for &t in positions {
            if logits[t].is_some() {
                continue;
            }
            let features = match &self.fusion {
                Some(head) => {
                    let mut f = DenseMatrix::zeros(batch, self.config.hidden_dim);
                    for (k, lag) in head.lags.iter().enumerate().take(t + 1) {
                        matmul_acc(&top[t - k].state.hidden, &lag.value, &mut f)?;
                    }
                    Some(f)
                }
                None => None,
            };
            let h = features.as_ref().unwrap_or(&top[t].state.hidden);
            let mut z = DenseMatrix::zeros(batch, self.config.num_classes);
            let b = self.readout_bias.value.row(0);
            for r in 0..batch {
                z.row_mut(r).copy_from_slice(b);
            }
            matmul_acc(h, &self.readout_weights.value, &mut z)?;
            if !z.is_finite() {
                return Err(Error::Numeric(format!("logits at t={t}")));
            }
            logits[t] = Some(z);
            fused[t] = features;
        }

        Ok(SequenceActivations {
            layers,
            fused,
            logits,
            batch,
            generation: self.generation,
        })
    }
}
