//! Multi-layer dilated recurrent networks.
//!
//! Layer `l` at time `t` consumes the output of layer `l−1` at `t` and its own
//! state at `t − s(l)`; states before time zero are zero. A readout maps the
//! top layer (or the fusion head, when the schedule starts above dilation
//! one) to class logits at the requested timesteps.

mod backward;
mod forward;
mod loss;
mod schedule;

use alloc::format;
use alloc::vec::Vec;

pub use forward::SequenceActivations;
pub use loss::{masked_cross_entropy, LossStats};
pub use schedule::DilationSchedule;

use crate::cells::{CellInit, CellKind, CellParams};
use crate::error::{Error, Result};
use crate::numeric::{rmsprop_step, standard_normal_init, DenseMatrix, Parameter, RmsProp, Rng};

/// How the layers of a model are connected through time.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Architecture {
    /// Dilated skip connections only, exponential schedule.
    Dilated,
    /// One ordinary recurrent layer.
    Single,
    /// Ordinary recurrent layers stacked (dilation 1 everywhere).
    Stacked,
    /// Each layer sees `t−1` and `t−skip` (vanilla cells only).
    RegularSkip { skip: usize },
}

impl Architecture {
    pub fn name(&self) -> &'static str {
        match self {
            Architecture::Dilated => "dilated",
            Architecture::Single => "single",
            Architecture::Stacked => "stacked",
            Architecture::RegularSkip { .. } => "regular_skip",
        }
    }
}

/// How cell weight matrices are drawn. Readout and fusion weights are
/// always standard normal, biases zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InitScheme {
    /// Every weight matrix N(0, 1).
    #[default]
    StandardNormal,
    /// Cell weights N(0, 1) divided by `sqrt(fan_in)`.
    ScaledNormal,
}

impl InitScheme {
    pub fn name(self) -> &'static str {
        match self {
            InitScheme::StandardNormal => "standard_normal",
            InitScheme::ScaledNormal => "scaled_normal",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "standard_normal" => Ok(InitScheme::StandardNormal),
            "scaled_normal" => Ok(InitScheme::ScaledNormal),
            other => Err(Error::config(format!("unknown init scheme `{other}`"))),
        }
    }
}

/// Everything needed to rebuild a model's shape.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub kind: CellKind,
    pub architecture: Architecture,
    pub num_layers: usize,
    /// Base `M` and start exponent `l0` (dilated architecture only).
    pub base: usize,
    pub start_exponent: u32,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub num_classes: usize,
    pub init: CellInit,
    pub weights: InitScheme,
}

impl ModelConfig {
    pub fn dilated(kind: CellKind, num_layers: usize, base: usize, start_exponent: u32) -> Self {
        ModelConfig {
            kind,
            architecture: Architecture::Dilated,
            num_layers,
            base,
            start_exponent,
            input_dim: 1,
            hidden_dim: 1,
            num_classes: 2,
            init: CellInit::default(),
            weights: InitScheme::StandardNormal,
        }
    }

    pub fn baseline(kind: CellKind, architecture: Architecture, num_layers: usize) -> Self {
        ModelConfig {
            architecture,
            ..ModelConfig::dilated(kind, num_layers, 2, 0)
        }
    }

    pub fn dims(mut self, input_dim: usize, hidden_dim: usize, num_classes: usize) -> Self {
        self.input_dim = input_dim;
        self.hidden_dim = hidden_dim;
        self.num_classes = num_classes;
        self
    }

    pub fn with_init(mut self, weights: InitScheme) -> Self {
        self.weights = weights;
        self
    }

    pub fn schedule(&self) -> Result<DilationSchedule> {
        match self.architecture {
            Architecture::Dilated => DilationSchedule::exponential(self.num_layers, self.base, self.start_exponent),
            Architecture::Single => {
                if self.num_layers != 1 {
                    return Err(Error::config("a single-layer baseline has exactly one layer"));
                }
                DilationSchedule::uniform(1, 1)
            }
            Architecture::Stacked => DilationSchedule::uniform(self.num_layers, 1),
            Architecture::RegularSkip { skip } => {
                if skip == 0 {
                    return Err(Error::config("skip length must be >= 1"));
                }
                DilationSchedule::uniform(self.num_layers, skip)
            }
        }
    }
}

/// Linear map over the last `window` top-layer outputs:
/// `f_t = Σ_k h_{t−k} · F_k` for `k < window` and `t−k ≥ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct FusionHead {
    pub lags: Vec<Parameter>,
}

impl FusionHead {
    pub fn window(&self) -> usize {
        self.lags.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DilatedRnnModel {
    config: ModelConfig,
    schedule: DilationSchedule,
    layers: Vec<CellParams>,
    readout_weights: Parameter,
    readout_bias: Parameter,
    fusion: Option<FusionHead>,
    generation: u64,
}

impl DilatedRnnModel {
    /// Builds and initialises a model: weight matrices per
    /// [`InitScheme`], biases zero (plus the LSTM forget offset).
    pub fn new(config: &ModelConfig, rng: &mut Rng) -> Result<Self> {
        let schedule = config.schedule()?;
        if config.input_dim == 0 || config.hidden_dim == 0 || config.num_classes == 0 {
            return Err(Error::config("input, hidden and class dimensions must be positive"));
        }
        let skip = matches!(config.architecture, Architecture::RegularSkip { .. });
        let mut layers = Vec::with_capacity(schedule.num_layers());
        for l in 0..schedule.num_layers() {
            let input_dim = if l == 0 { config.input_dim } else { config.hidden_dim };
            let mut cell = CellParams::new(
                config.kind,
                input_dim,
                config.hidden_dim,
                skip,
                &config.init,
                rng,
                &format!("layer{l}."),
            )?;
            if config.weights == InitScheme::ScaledNormal {
                let bias = cell.params().count() - 1;
                for p in cell.params_mut().take(bias) {
                    let fan_in = p.value.rows() as f64;
                    p.value.scale(1.0 / libm::sqrt(fan_in));
                }
            }
            layers.push(cell);
        }
        let readout_weights = Parameter::new(
            "readout.weights",
            standard_normal_init(config.hidden_dim, config.num_classes, rng),
        );
        let readout_bias = Parameter::new("readout.bias", DenseMatrix::zeros(1, config.num_classes));
        let window = schedule.starting_dilation();
        let fusion = (config.architecture == Architecture::Dilated && window > 1).then(|| FusionHead {
            lags: (0..window)
                .map(|k| {
                    Parameter::new(
                        format!("fusion.lag{k}"),
                        standard_normal_init(config.hidden_dim, config.hidden_dim, rng),
                    )
                })
                .collect(),
        });
        Ok(DilatedRnnModel {
            config: config.clone(),
            schedule,
            layers,
            readout_weights,
            readout_bias,
            fusion,
            generation: 0,
        })
    }

    /// Dilated stack with `s(l) = M^(l−1+l0)`.
    pub fn dilated(
        kind: CellKind,
        schedule: &DilationSchedule,
        input_dim: usize,
        hidden_dim: usize,
        num_classes: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        if !schedule.is_exponential() {
            return Err(Error::config("dilated models need an exponential schedule"));
        }
        let cfg = ModelConfig::dilated(kind, schedule.num_layers(), schedule.base(), schedule.start_exponent())
            .dims(input_dim, hidden_dim, num_classes);
        Self::new(&cfg, rng)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn kind(&self) -> CellKind {
        self.config.kind
    }

    pub fn schedule(&self) -> &DilationSchedule {
        &self.schedule
    }

    pub fn hidden_dim(&self) -> usize {
        self.config.hidden_dim
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    pub fn num_classes(&self) -> usize {
        self.config.num_classes
    }

    pub fn layers(&self) -> &[CellParams] {
        &self.layers
    }

    pub fn fusion(&self) -> Option<&FusionHead> {
        self.fusion.as_ref()
    }

    pub fn readout(&self) -> (&Parameter, &Parameter) {
        (&self.readout_weights, &self.readout_bias)
    }

    /// Bumped whenever parameter values may change; activations remember it.
    pub fn generation(&self) -> u64 {
        self.generation
    }

    /// All parameters in serialization order: layers bottom-up (input,
    /// recurrent, skip, bias), readout weights, readout bias, fusion lags.
    pub fn params(&self) -> impl Iterator<Item = &Parameter> {
        self.layers
            .iter()
            .flat_map(|c| c.params())
            .chain([&self.readout_weights, &self.readout_bias])
            .chain(self.fusion.iter().flat_map(|f| f.lags.iter()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.generation += 1;
        self.layers
            .iter_mut()
            .flat_map(|c| c.params_mut())
            .chain([&mut self.readout_weights, &mut self.readout_bias])
            .chain(self.fusion.iter_mut().flat_map(|f| f.lags.iter_mut()))
    }

    pub fn param_count(&self) -> usize {
        self.params().map(Parameter::len).sum()
    }

    pub fn flat_values(&self) -> Vec<f64> {
        self.params().flat_map(|p| p.value.as_slice().iter().copied()).collect()
    }

    pub fn flat_grads(&self) -> Vec<f64> {
        self.params().flat_map(|p| p.grad.as_slice().iter().copied()).collect()
    }

    pub fn set_flat_values(&mut self, values: &[f64]) -> Result<()> {
        let total = self.param_count();
        if values.len() != total {
            return Err(Error::dim("set_flat_values", format!("{total}"), format!("{}", values.len())));
        }
        let mut off = 0;
        for p in self.params_mut() {
            let n = p.len();
            p.value.as_mut_slice().copy_from_slice(&values[off..off + n]);
            off += n;
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for p in self.layers.iter_mut().flat_map(|c| c.params_mut()) {
            p.zero_grad();
        }
        self.readout_weights.zero_grad();
        self.readout_bias.zero_grad();
        for p in self.fusion.iter_mut().flat_map(|f| f.lags.iter_mut()) {
            p.zero_grad();
        }
    }

    /// One RMSProp update of every parameter; gradients are cleared.
    ///
    /// All gradients are checked before any value changes, so a non-finite
    /// gradient leaves the model untouched.
    pub fn rmsprop_step(&mut self, opt: &RmsProp) -> Result<()> {
        opt.validate()?;
        if let Some(bad) = self.params().find(|p| !p.grad.is_finite()) {
            return Err(Error::Numeric(bad.name.clone()));
        }
        for p in self.params_mut() {
            rmsprop_step(p, opt)?;
        }
        Ok(())
    }
}
