//! Single-step recurrent cells.
//!
//! Weights are stored gate-block-wise: a cell with `G` gate blocks keeps
//! `input_dim × G·H` input weights, `H × G·H` recurrent weights and a
//! `1 × G·H` bias, with block `k` in columns `k·H..(k+1)·H`.
//!
//! * vanilla: `h' = tanh(x·Wx + h·Wr + b)`
//! * LSTM, blocks `[i f g o]`: `c' = f⊙c + i⊙g`, `h' = o⊙tanh(c')`
//! * GRU, blocks `[z r n]`, reset applied to the recurrent part of the
//!   candidate: `n = tanh(xn + r⊙hn)`, `h' = z⊙h + (1−z)⊙n`
//!
//! A regular-skip cell adds a second recurrent matrix `W'r` applied to the
//! state `s` steps back; both recurrent contributions are summed into the
//! pre-activation. Only vanilla cells support it.

use alloc::format;
use alloc::string::String;

use crate::error::{Error, Result};
use crate::numeric::{
    matmul_acc, matmul_nt_acc, matmul_tn_acc, sigmoid, standard_normal_init, DenseMatrix, Parameter, Rng,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CellKind {
    Vanilla,
    Lstm,
    Gru,
}

impl CellKind {
    pub fn gate_blocks(self) -> usize {
        match self {
            CellKind::Vanilla => 1,
            CellKind::Lstm => 4,
            CellKind::Gru => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CellKind::Vanilla => "vanilla",
            CellKind::Lstm => "lstm",
            CellKind::Gru => "gru",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "vanilla" => Ok(CellKind::Vanilla),
            "lstm" => Ok(CellKind::Lstm),
            "gru" => Ok(CellKind::Gru),
            other => Err(Error::config(format!("unknown cell kind `{other}`"))),
        }
    }

    pub fn all() -> [CellKind; 3] {
        [CellKind::Vanilla, CellKind::Lstm, CellKind::Gru]
    }
}

impl core::fmt::Display for CellKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// Initialisation knobs. Weight matrices are always N(0, 1); biases start at
/// zero except the LSTM forget block, which starts at `forget_bias`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellInit {
    pub forget_bias: f64,
}

impl Default for CellInit {
    fn default() -> Self {
        CellInit { forget_bias: 1.0 }
    }
}

/// Recurrent state passed between steps. `memory` is the LSTM cell state.
#[derive(Clone, Debug, PartialEq)]
pub struct CellState {
    pub hidden: DenseMatrix,
    pub memory: Option<DenseMatrix>,
}

impl CellState {
    pub fn zeros(kind: CellKind, batch: usize, hidden_dim: usize) -> Self {
        CellState {
            hidden: DenseMatrix::zeros(batch, hidden_dim),
            memory: (kind == CellKind::Lstm).then(|| DenseMatrix::zeros(batch, hidden_dim)),
        }
    }

    pub fn batch(&self) -> usize {
        self.hidden.rows()
    }

    pub(crate) fn row_block(&self, start: usize, end: usize) -> Self {
        CellState {
            hidden: self.hidden.row_block(start, end),
            memory: self.memory.as_ref().map(|m| m.row_block(start, end)),
        }
    }
}

/// Forward activations of one step, kept for the backward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct StepCache {
    pub state: CellState,
    /// LSTM `[i f g o]` or GRU `[z r n]` activations.
    gates: Option<DenseMatrix>,
    /// LSTM `tanh(c')`; GRU recurrent contribution to the candidate block.
    aux: Option<DenseMatrix>,
}

impl StepCache {
    pub(crate) fn row_block(&self, start: usize, end: usize) -> Self {
        StepCache {
            state: self.state.row_block(start, end),
            gates: self.gates.as_ref().map(|m| m.row_block(start, end)),
            aux: self.aux.as_ref().map(|m| m.row_block(start, end)),
        }
    }
}

/// Gradients leaving a step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepGrads {
    /// `∂L/∂x`, when requested.
    pub input: Option<DenseMatrix>,
    /// Gradient with respect to the recurrent state that was fed in.
    pub recurrent: CellState,
    /// Gradient with respect to the skipped hidden state (regular skip only).
    pub skipped: Option<DenseMatrix>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellParams {
    kind: CellKind,
    input_dim: usize,
    hidden_dim: usize,
    pub input_weights: Parameter,
    pub recurrent_weights: Parameter,
    pub skip_weights: Option<Parameter>,
    pub bias: Parameter,
}

impl CellParams {
    pub fn new(
        kind: CellKind,
        input_dim: usize,
        hidden_dim: usize,
        with_skip: bool,
        init: &CellInit,
        rng: &mut Rng,
        prefix: &str,
    ) -> Result<Self> {
        if input_dim == 0 || hidden_dim == 0 {
            return Err(Error::config("cell dimensions must be positive"));
        }
        if with_skip && kind != CellKind::Vanilla {
            return Err(Error::config(format!(
                "regular skip connections are only defined for vanilla cells, not {kind}"
            )));
        }
        let width = kind.gate_blocks() * hidden_dim;
        let name = |s: &str| -> String { format!("{prefix}{s}") };
        let input_weights = Parameter::new(name("input_weights"), standard_normal_init(input_dim, width, rng));
        let recurrent_weights =
            Parameter::new(name("recurrent_weights"), standard_normal_init(hidden_dim, width, rng));
        let skip_weights = with_skip
            .then(|| Parameter::new(name("skip_weights"), standard_normal_init(hidden_dim, width, rng)));
        let mut bias = DenseMatrix::zeros(1, width);
        if kind == CellKind::Lstm {
            for j in hidden_dim..2 * hidden_dim {
                bias.set(0, j, init.forget_bias);
            }
        }
        Ok(CellParams {
            kind,
            input_dim,
            hidden_dim,
            input_weights,
            recurrent_weights,
            skip_weights,
            bias: Parameter::new(name("bias"), bias),
        })
    }

    pub fn kind(&self) -> CellKind {
        self.kind
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn has_skip(&self) -> bool {
        self.skip_weights.is_some()
    }

    /// Number of trainable scalars.
    pub fn param_count(&self) -> usize {
        self.params().map(Parameter::len).sum()
    }

    /// Parameters in serialization order: input, recurrent, skip, bias.
    pub fn params(&self) -> impl Iterator<Item = &Parameter> {
        [Some(&self.input_weights), Some(&self.recurrent_weights), self.skip_weights.as_ref(), Some(&self.bias)]
            .into_iter()
            .flatten()
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        [
            Some(&mut self.input_weights),
            Some(&mut self.recurrent_weights),
            self.skip_weights.as_mut(),
            Some(&mut self.bias),
        ]
        .into_iter()
        .flatten()
    }

    /// One dilated step: the only recurrent input is `recurrent_in`
    /// (the state `s` steps back, or zeros).
    pub fn step(&self, x: &DenseMatrix, recurrent_in: &CellState) -> Result<StepCache> {
        if self.has_skip() {
            return Err(Error::config("cell has skip weights; use skip_step"));
        }
        self.forward(x, recurrent_in, None)
    }

    /// One regular-skip step with recurrent inputs from `t−1` (`prev`) and
    /// `t−s` (`skipped`).
    pub fn skip_step(&self, x: &DenseMatrix, prev: &CellState, skipped: &CellState) -> Result<StepCache> {
        if !self.has_skip() {
            return Err(Error::config("skip_step needs extra recurrent weights"));
        }
        self.check_state("skip_step", skipped, x.rows())?;
        self.forward(x, prev, Some(&skipped.hidden))
    }

    fn check_state(&self, op: &'static str, s: &CellState, batch: usize) -> Result<()> {
        if s.hidden.shape() != (batch, self.hidden_dim) {
            return Err(Error::dim(
                op,
                format!("state {}x{}", batch, self.hidden_dim),
                format!("{}x{}", s.hidden.rows(), s.hidden.cols()),
            ));
        }
        if (self.kind == CellKind::Lstm) != s.memory.is_some() {
            return Err(Error::dim(op, "memory present iff LSTM", "mismatch"));
        }
        Ok(())
    }

    fn forward(&self, x: &DenseMatrix, rec: &CellState, skipped: Option<&DenseMatrix>) -> Result<StepCache> {
        let batch = x.rows();
        if x.cols() != self.input_dim {
            return Err(Error::dim(
                "cell_step",
                format!("input width {}", self.input_dim),
                format!("{}", x.cols()),
            ));
        }
        self.check_state("cell_step", rec, batch)?;
        let h = self.hidden_dim;
        let width = self.kind.gate_blocks() * h;
        let mut pre = DenseMatrix::zeros(batch, width);
        let b = self.bias.value.row(0);
        for r in 0..batch {
            pre.row_mut(r).copy_from_slice(b);
        }
        matmul_acc(x, &self.input_weights.value, &mut pre)?;

        match self.kind {
            CellKind::Vanilla => {
                matmul_acc(&rec.hidden, &self.recurrent_weights.value, &mut pre)?;
                if let (Some(hs), Some(ws)) = (skipped, &self.skip_weights) {
                    matmul_acc(hs, &ws.value, &mut pre)?;
                }
                for v in pre.as_mut_slice() {
                    *v = crate::numeric::tanh(*v);
                }
                Ok(StepCache {
                    state: CellState {
                        hidden: pre,
                        memory: None,
                    },
                    gates: None,
                    aux: None,
                })
            }
            CellKind::Lstm => {
                matmul_acc(&rec.hidden, &self.recurrent_weights.value, &mut pre)?;
                let c_in = rec.memory.as_ref().expect("checked");
                let mut c = DenseMatrix::zeros(batch, h);
                let mut tc = DenseMatrix::zeros(batch, h);
                let mut hid = DenseMatrix::zeros(batch, h);
                for r in 0..batch {
                    let g = pre.row_mut(r);
                    for j in 0..h {
                        g[j] = sigmoid(g[j]);
                        g[h + j] = sigmoid(g[h + j]);
                        g[2 * h + j] = crate::numeric::tanh(g[2 * h + j]);
                        g[3 * h + j] = sigmoid(g[3 * h + j]);
                    }
                    let ci = c_in.row(r);
                    let (cr, tr, hr) = (c.row_mut(r), tc.row_mut(r), hid.row_mut(r));
                    for j in 0..h {
                        cr[j] = g[h + j] * ci[j] + g[j] * g[2 * h + j];
                        tr[j] = crate::numeric::tanh(cr[j]);
                        hr[j] = g[3 * h + j] * tr[j];
                    }
                }
                Ok(StepCache {
                    state: CellState {
                        hidden: hid,
                        memory: Some(c),
                    },
                    gates: Some(pre),
                    aux: Some(tc),
                })
            }
            CellKind::Gru => {
                let mut rc = DenseMatrix::zeros(batch, width);
                matmul_acc(&rec.hidden, &self.recurrent_weights.value, &mut rc)?;
                let mut hid = DenseMatrix::zeros(batch, h);
                let mut rc_n = DenseMatrix::zeros(batch, h);
                for r in 0..batch {
                    let g = pre.row_mut(r);
                    let rr = rc.row(r);
                    let hin = rec.hidden.row(r);
                    let rn = rc_n.row_mut(r);
                    for j in 0..h {
                        let z = sigmoid(g[j] + rr[j]);
                        let rs = sigmoid(g[h + j] + rr[h + j]);
                        rn[j] = rr[2 * h + j];
                        let n = crate::numeric::tanh(g[2 * h + j] + rs * rn[j]);
                        g[j] = z;
                        g[h + j] = rs;
                        g[2 * h + j] = n;
                    }
                    let hr = hid.row_mut(r);
                    for j in 0..h {
                        let z = g[j];
                        hr[j] = z * hin[j] + (1.0 - z) * g[2 * h + j];
                    }
                }
                Ok(StepCache {
                    state: CellState {
                        hidden: hid,
                        memory: None,
                    },
                    gates: Some(pre),
                    aux: Some(rc_n),
                })
            }
        }
    }

    /// Analytic backward pass of one step. Parameter gradients are added to
    /// the existing buffers, so shared weights accumulate across time.
    #[allow(clippy::too_many_arguments)]
    pub fn backward(
        &mut self,
        x: &DenseMatrix,
        recurrent_in: &CellState,
        skipped: Option<&CellState>,
        cache: &StepCache,
        d_hidden: &DenseMatrix,
        d_memory: Option<&DenseMatrix>,
        want_input_grad: bool,
    ) -> Result<StepGrads> {
        let batch = x.rows();
        let h = self.hidden_dim;
        let consistent = cache.state.hidden.shape() == (batch, h)
            && d_hidden.shape() == (batch, h)
            && recurrent_in.hidden.shape() == (batch, h)
            && cache.gates.is_some() == (self.kind != CellKind::Vanilla)
            && cache.state.memory.is_some() == (self.kind == CellKind::Lstm)
            && skipped.is_some() == self.has_skip()
            && x.cols() == self.input_dim;
        if !consistent {
            return Err(Error::Consistency(format!(
                "step cache does not match a {} cell with batch {batch}",
                self.kind
            )));
        }
        let width = self.kind.gate_blocks() * h;
        // `dpre` feeds the input weights and bias, `drec` the recurrent ones.
        let mut dpre = DenseMatrix::zeros(batch, width);
        let mut drec_gru: Option<DenseMatrix> = None;
        let mut dh_direct: Option<DenseMatrix> = None;
        let mut dc_prev: Option<DenseMatrix> = None;

        match self.kind {
            CellKind::Vanilla => {
                let hid = &cache.state.hidden;
                for (i, d) in dpre.as_mut_slice().iter_mut().enumerate() {
                    let y = hid.as_slice()[i];
                    *d = d_hidden.as_slice()[i] * (1.0 - y * y);
                }
            }
            CellKind::Lstm => {
                let gates = cache.gates.as_ref().unwrap();
                let tc = cache.aux.as_ref().unwrap();
                let c_in = recurrent_in.memory.as_ref().ok_or_else(|| {
                    Error::Consistency(String::from("LSTM backward needs the incoming memory"))
                })?;
                let mut dcp = DenseMatrix::zeros(batch, h);
                for r in 0..batch {
                    let g = gates.row(r);
                    let t = tc.row(r);
                    let ci = c_in.row(r);
                    let dh = d_hidden.row(r);
                    let dcr = d_memory.map(|m| m.row(r));
                    let dp = dpre.row_mut(r);
                    let dcpr = dcp.row_mut(r);
                    for j in 0..h {
                        let (ig, fg, gg, og) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                        let dc = dcr.map_or(0.0, |m| m[j]) + dh[j] * og * (1.0 - t[j] * t[j]);
                        let d_o = dh[j] * t[j];
                        dp[j] = dc * gg * ig * (1.0 - ig);
                        dp[h + j] = dc * ci[j] * fg * (1.0 - fg);
                        dp[2 * h + j] = dc * ig * (1.0 - gg * gg);
                        dp[3 * h + j] = d_o * og * (1.0 - og);
                        dcpr[j] = dc * fg;
                    }
                }
                dc_prev = Some(dcp);
            }
            CellKind::Gru => {
                let gates = cache.gates.as_ref().unwrap();
                let rc_n = cache.aux.as_ref().unwrap();
                let mut drec = DenseMatrix::zeros(batch, width);
                let mut dhd = DenseMatrix::zeros(batch, h);
                for r in 0..batch {
                    let g = gates.row(r);
                    let rn = rc_n.row(r);
                    let hin = recurrent_in.hidden.row(r);
                    let dh = d_hidden.row(r);
                    let dp = dpre.row_mut(r);
                    let dr = drec.row_mut(r);
                    let dd = dhd.row_mut(r);
                    for j in 0..h {
                        let (z, rs, n) = (g[j], g[h + j], g[2 * h + j]);
                        let dz = dh[j] * (hin[j] - n);
                        let dn = dh[j] * (1.0 - z);
                        dd[j] = dh[j] * z;
                        let dan = dn * (1.0 - n * n);
                        let drs = dan * rn[j];
                        let daz = dz * z * (1.0 - z);
                        let dar = drs * rs * (1.0 - rs);
                        dp[j] = daz;
                        dp[h + j] = dar;
                        dp[2 * h + j] = dan;
                        dr[j] = daz;
                        dr[h + j] = dar;
                        dr[2 * h + j] = dan * rs;
                    }
                }
                drec_gru = Some(drec);
                dh_direct = Some(dhd);
            }
        }

        let drec = drec_gru.as_ref().unwrap_or(&dpre);
        matmul_tn_acc(x, &dpre, &mut self.input_weights.grad)?;
        {
            let gb = self.bias.grad.row_mut(0);
            for r in 0..batch {
                for (g, d) in gb.iter_mut().zip(dpre.row(r)) {
                    *g += d;
                }
            }
        }
        matmul_tn_acc(&recurrent_in.hidden, drec, &mut self.recurrent_weights.grad)?;

        let mut d_rec_h = dh_direct.unwrap_or_else(|| DenseMatrix::zeros(batch, h));
        matmul_nt_acc(drec, &self.recurrent_weights.value, &mut d_rec_h)?;

        let d_skipped = match (skipped, self.skip_weights.as_mut()) {
            (Some(s), Some(ws)) => {
                matmul_tn_acc(&s.hidden, drec, &mut ws.grad)?;
                let mut ds = DenseMatrix::zeros(batch, h);
                matmul_nt_acc(drec, &ws.value, &mut ds)?;
                Some(ds)
            }
            _ => None,
        };

        let input = if want_input_grad {
            let mut dx = DenseMatrix::zeros(batch, self.input_dim);
            matmul_nt_acc(&dpre, &self.input_weights.value, &mut dx)?;
            Some(dx)
        } else {
            None
        };

        Ok(StepGrads {
            input,
            recurrent: CellState {
                hidden: d_rec_h,
                memory: dc_prev,
            },
            skipped: d_skipped,
        })
    }
}
