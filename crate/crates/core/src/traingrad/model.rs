use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};
use rand_xoshiro::Xoshiro256PlusPlus;

use super::surrogate::SurrogateSpec;
use super::tape::{SpikeMode, Tape, Threshold, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::seqcore::build_lif_kernel;

/// Optimizer treatment of a parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    /// Linear weights: base learning rate, decayed.
    Weight,
    /// Biases: base learning rate, not decayed.
    Bias,
    /// Neuron dynamics (`Δ`, `τ`, `θ`, `α`): neuron learning rate, not decayed.
    Neuron,
}

impl ParamGroup {
    pub fn code(self) -> u8 {
        match self {
            ParamGroup::Weight => 0,
            ParamGroup::Bias => 1,
            ParamGroup::Neuron => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ParamGroup::Weight),
            1 => Some(ParamGroup::Bias),
            2 => Some(ParamGroup::Neuron),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    /// `(in, out)` row-major.
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    pub fn new(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        let normal = Normal::new(0.0, 1.0 / (fan_in as f64).sqrt()).expect("positive std");
        let data = (0..fan_in * fan_out).map(|_| normal.sample(rng)).collect();
        Self {
            weight: Tensor::new(vec![fan_in, fan_out], data).expect("shape matches"),
            bias: Tensor::zeros(&[fan_out]),
        }
    }

    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Tensor::zeros(&[fan_in, fan_out]),
            bias: Tensor::zeros(&[fan_out]),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn fan_out(&self) -> usize {
        self.weight.shape()[1]
    }

    fn apply(&self, tape: &mut Tape, x: Var, vars: &mut Vec<Var>) -> Result<Var> {
        let w = tape.param(self.weight.clone());
        let b = tape.param(self.bias.clone());
        vars.extend([w, b]);
        tape.affine(x, w, Some(b))
    }
}

/// Trainable resonate-and-fire neuron with log-parameterized `Δ` and `τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrfLayer {
    pub log_delta: Tensor,
    pub log_tau: Tensor,
    pub theta: Tensor,
    pub v_th: f64,
}

impl PrfLayer {
    /// `Δ` log-uniform in `delta_range`, `θ` uniform in `theta_range`, `τ` fixed.
    pub fn init(
        width: usize,
        delta_range: (f64, f64),
        theta_range: (f64, f64),
        tau: f64,
        v_th: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let (lo, hi) = (delta_range.0.ln(), delta_range.1.ln());
        let log_delta = (0..width)
            .map(|_| lo + rng.gen::<f64>() * (hi - lo))
            .collect();
        let theta = (0..width)
            .map(|_| theta_range.0 + rng.gen::<f64>() * (theta_range.1 - theta_range.0))
            .collect();
        Self {
            log_delta: Tensor::new(vec![width], log_delta).expect("shape matches"),
            log_tau: Tensor::filled(&[width], tau.ln()),
            theta: Tensor::new(vec![width], theta).expect("shape matches"),
            v_th,
        }
    }

    pub fn width(&self) -> usize {
        self.theta.len()
    }

    fn register(&self, tape: &mut Tape, vars: &mut Vec<Var>) -> [Var; 3] {
        let p = [
            tape.param(self.log_delta.clone()),
            tape.param(self.log_tau.clone()),
            tape.param(self.theta.clone()),
        ];
        vars.extend(p);
        p
    }

    fn fire(&self, tape: &mut Tape, u: Var, kernel: Var, ctx: &Context) -> Result<Var> {
        let up = tape.convolve(u, kernel)?;
        tape.spike(
            up,
            Threshold::Scalar(self.v_th),
            None,
            ctx.surrogate,
            ctx.mode,
        )
    }

    /// Keep `τ > Δ` so the kernel decays.
    pub fn clamp(&mut self) {
        let margin = 1e-3f64.ln_1p();
        let ld = self.log_delta.data().to_vec();
        for (lt, ld) in self.log_tau.data_mut().iter_mut().zip(ld) {
            if *lt < ld + margin {
                *lt = ld + margin;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockMode {
    Causal,
    Bidirectional,
}

/// Spike-driven temporal and channel mixing block.
///
/// ```text
/// S   = TN(U)                  (or [TN(U), Rev(TN(Rev(U)))] when bidirectional)
/// RPE = U + Linear1(S)
/// S'  = alpha · H(RPE − V_sn)
/// out = RPE + Linear2(S')
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct SdTcmBlock {
    pub temporal: PrfLayer,
    pub spatial_v_th: f64,
    pub alpha: Tensor,
    pub linear1: Linear,
    pub linear2: Linear,
    pub mode: BlockMode,
}

impl SdTcmBlock {
    pub fn width(&self) -> usize {
        self.temporal.width()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.width();
        let fan = match self.mode {
            BlockMode::Causal => d,
            BlockMode::Bidirectional => 2 * d,
        };
        if self.linear1.fan_in() != fan || self.linear1.fan_out() != d {
            return Err(Error::shape(format!(
                "linear1 is {}x{}, block needs {fan}x{d}",
                self.linear1.fan_in(),
                self.linear1.fan_out()
            )));
        }
        if self.linear2.fan_in() != d || self.linear2.fan_out() != d {
            return Err(Error::shape("linear2 must be D x D"));
        }
        if self.alpha.shape() != [d]
            || self.temporal.log_tau.len() != d
            || self.temporal.log_delta.len() != d
        {
            return Err(Error::shape(
                "neuron parameters must have one entry per channel",
            ));
        }
        if self.alpha.data().iter().any(|&a| !(a > 0.0)) {
            return Err(Error::param("alpha must be positive"));
        }
        Ok(())
    }

    fn forward(&self, tape: &mut Tape, u: Var, ctx: &Context, vars: &mut Vec<Var>) -> Result<Var> {
        let steps = tape.value(u).shape()[0];
        let [ld, lt, th] = self.temporal.register(tape, vars);
        let kernel = tape.prf_kernel(ld, lt, th, steps)?;
        let forward = self.temporal.fire(tape, u, kernel, ctx)?;
        let s = match self.mode {
            BlockMode::Causal => forward,
            BlockMode::Bidirectional => {
                let ur = tape.reverse(u)?;
                let sr = self.temporal.fire(tape, ur, kernel, ctx)?;
                let back = tape.reverse(sr)?;
                tape.concat(forward, back)?
            }
        };
        ctx.record(s);
        let mixed = self.linear1.apply(tape, s, vars)?;
        let rpe = tape.add(u, mixed)?;
        let alpha = tape.param(self.alpha.clone());
        vars.push(alpha);
        let s2 = tape.spike(
            rpe,
            Threshold::Scalar(self.spatial_v_th),
            Some(alpha),
            ctx.surrogate,
            ctx.mode,
        )?;
        ctx.record(s2);
        let mixed = self.linear2.apply(tape, s2, vars)?;
        tape.add(rpe, mixed)
    }
}

/// One stage of a network after the input embedding.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    /// PRF neuron followed by a linear map.
    Prf {
        neuron: PrfLayer,
        linear: Linear,
    },
    /// Parallel LIF neuron with fixed decay followed by a linear map.
    Lif {
        beta: f64,
        v_th: f64,
        linear: Linear,
    },
    Block(SdTcmBlock),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NeuronKind {
    Prf,
    Lif { beta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Architecture {
    /// Embedding, then `depth` × (neuron → linear), then readout.
    FeedForward(NeuronKind),
    /// Embedding, then `depth` SD-TCM blocks, then readout.
    SdTcm(BlockMode),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub input_dim: usize,
    pub width: usize,
    pub depth: usize,
    pub classes: usize,
    pub v_th: f64,
    pub spatial_v_th: f64,
    pub delta_range: (f64, f64),
    pub theta_range: (f64, f64),
    pub tau_init: f64,
    pub surrogate: SurrogateSpec,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.width == 0 || self.depth == 0 || self.classes < 2 {
            return Err(Error::Config(
                "input_dim, width and depth must be >= 1, classes >= 2".into(),
            ));
        }
        let (lo, hi) = self.delta_range;
        if !(lo > 0.0 && lo < hi) {
            return Err(Error::Config(format!(
                "delta range ({lo}, {hi}) must satisfy 0 < min < max"
            )));
        }
        if !(self.tau_init > hi) {
            return Err(Error::Config(
                "tau_init must exceed the largest delta".into(),
            ));
        }
        if self.theta_range.0 > self.theta_range.1 {
            return Err(Error::Config("theta range is reversed".into()));
        }
        if !(self.v_th > 0.0 && self.spatial_v_th > 0.0 && self.surrogate.width > 0.0) {
            return Err(Error::Config(
                "thresholds and surrogate width must be positive".into(),
            ));
        }
        if let Architecture::FeedForward(NeuronKind::Lif { beta }) = self.architecture {
            if !(beta > 0.0 && beta < 1.0) {
                return Err(Error::Config(format!("LIF beta {beta} outside (0, 1)")));
            }
        }
        Ok(())
    }
}

struct Context {
    surrogate: SurrogateSpec,
    mode: SpikeMode,
    spikes: std::cell::RefCell<Vec<Var>>,
}

impl Context {
    fn record(&self, v: Var) {
        self.spikes.borrow_mut().push(v);
    }
}

/// Handles produced by [`Model::forward`].
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub logits: Var,
    /// Tape leaves in [`Model::params`] order.
    pub params: Vec<Var>,
    /// Every spike tensor, in layer order.
    pub spikes: Vec<Var>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub embed: Linear,
    pub layers: Vec<Layer>,
    pub head: Linear,
}

impl Model {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let d = config.width;
        let embed = Linear::new(config.input_dim, d, &mut rng);
        let prf = |rng: &mut Xoshiro256PlusPlus| {
            PrfLayer::init(
                d,
                config.delta_range,
                config.theta_range,
                config.tau_init,
                config.v_th,
                rng,
            )
        };
        let layers = (0..config.depth)
            .map(|_| match config.architecture {
                Architecture::FeedForward(NeuronKind::Prf) => Layer::Prf {
                    neuron: prf(&mut rng),
                    linear: Linear::new(d, d, &mut rng),
                },
                Architecture::FeedForward(NeuronKind::Lif { beta }) => Layer::Lif {
                    beta,
                    v_th: config.v_th,
                    linear: Linear::new(d, d, &mut rng),
                },
                Architecture::SdTcm(mode) => {
                    let fan = if mode == BlockMode::Bidirectional {
                        2 * d
                    } else {
                        d
                    };
                    Layer::Block(SdTcmBlock {
                        temporal: prf(&mut rng),
                        spatial_v_th: config.spatial_v_th,
                        alpha: Tensor::filled(&[d], 1.0),
                        linear1: Linear::new(fan, d, &mut rng),
                        linear2: Linear::new(d, d, &mut rng),
                        mode,
                    })
                }
            })
            .collect();
        let head = Linear::new(d, config.classes, &mut rng);
        Ok(Self {
            config,
            embed,
            layers,
            head,
        })
    }

    /// Named parameters in a fixed order.
    pub fn params(&self) -> Vec<(String, ParamGroup, &Tensor)> {
        fn lin<'a>(out: &mut Vec<(String, ParamGroup, &'a Tensor)>, p: &str, l: &'a Linear) {
            out.push((format!("{p}.weight"), ParamGroup::Weight, &l.weight));
            out.push((format!("{p}.bias"), ParamGroup::Bias, &l.bias));
        }
        fn prf<'a>(out: &mut Vec<(String, ParamGroup, &'a Tensor)>, p: &str, n: &'a PrfLayer) {
            out.push((format!("{p}.log_delta"), ParamGroup::Neuron, &n.log_delta));
            out.push((format!("{p}.log_tau"), ParamGroup::Neuron, &n.log_tau));
            out.push((format!("{p}.theta"), ParamGroup::Neuron, &n.theta));
        }
        let mut out = Vec::new();
        lin(&mut out, "embed", &self.embed);
        for (i, layer) in self.layers.iter().enumerate() {
            let p = format!("layers.{i}");
            match layer {
                Layer::Prf { neuron, linear } => {
                    prf(&mut out, &format!("{p}.neuron"), neuron);
                    lin(&mut out, &format!("{p}.linear"), linear);
                }
                Layer::Lif { linear, .. } => lin(&mut out, &format!("{p}.linear"), linear),
                Layer::Block(b) => {
                    prf(&mut out, &format!("{p}.temporal"), &b.temporal);
                    lin(&mut out, &format!("{p}.linear1"), &b.linear1);
                    out.push((format!("{p}.alpha"), ParamGroup::Neuron, &b.alpha));
                    lin(&mut out, &format!("{p}.linear2"), &b.linear2);
                }
            }
        }
        lin(&mut out, "head", &self.head);
        out
    }

    /// Mutable parameters in the same order as [`Model::params`].
    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = vec![&mut self.embed.weight, &mut self.embed.bias];
        for layer in &mut self.layers {
            match layer {
                Layer::Prf { neuron, linear } => out.extend([
                    &mut neuron.log_delta,
                    &mut neuron.log_tau,
                    &mut neuron.theta,
                    &mut linear.weight,
                    &mut linear.bias,
                ]),
                Layer::Lif { linear, .. } => out.extend([&mut linear.weight, &mut linear.bias]),
                Layer::Block(b) => out.extend([
                    &mut b.temporal.log_delta,
                    &mut b.temporal.log_tau,
                    &mut b.temporal.theta,
                    &mut b.linear1.weight,
                    &mut b.linear1.bias,
                    &mut b.alpha,
                    &mut b.linear2.weight,
                    &mut b.linear2.bias,
                ]),
            }
        }
        out.extend([&mut self.head.weight, &mut self.head.bias]);
        out
    }

    /// Re-establish parameter constraints after an update.
    pub fn clamp(&mut self) {
        for layer in &mut self.layers {
            match layer {
                Layer::Prf { neuron, .. } => neuron.clamp(),
                Layer::Block(b) => {
                    b.temporal.clamp();
                    for a in b.alpha.data_mut() {
                        *a = a.max(1e-6);
                    }
                }
                Layer::Lif { .. } => {}
            }
        }
    }

    /// Record the network on `tape` for a `(T, B, input_dim)` batch.
    pub fn forward(&self, tape: &mut Tape, input: &Tensor, mode: SpikeMode) -> Result<ForwardPass> {
        let steps = match input.shape() {
            &[t, _, i] if i == self.config.input_dim => t,
            s => {
                return Err(Error::shape(format!(
                    "input must be (T, B, {}), got {s:?}",
                    self.config.input_dim
                )))
            }
        };
        let ctx = Context {
            surrogate: self.config.surrogate,
            mode,
            spikes: Default::default(),
        };
        let mut vars = Vec::new();
        let x = tape.constant(input.clone());
        let mut h = self.embed.apply(tape, x, &mut vars)?;
        for layer in &self.layers {
            h = match layer {
                Layer::Prf { neuron, linear } => {
                    let [ld, lt, th] = neuron.register(tape, &mut vars);
                    let kernel = tape.prf_kernel(ld, lt, th, steps)?;
                    let s = neuron.fire(tape, h, kernel, &ctx)?;
                    ctx.record(s);
                    linear.apply(tape, s, &mut vars)?
                }
                Layer::Lif { beta, v_th, linear } => {
                    let n = tape.value(h).last_dim();
                    let k = build_lif_kernel(&vec![*beta; n], steps)?;
                    let kernel = tape.constant(Tensor::new(vec![steps, n], k.values().to_vec())?);
                    let up = tape.convolve(h, kernel)?;
                    let reset = tape.reset_scan(up, *v_th, &[*beta])?;
                    let s =
                        tape.spike(up, Threshold::Detached(reset), None, ctx.surrogate, mode)?;
                    ctx.record(s);
                    linear.apply(tape, s, &mut vars)?
                }
                Layer::Block(b) => b.forward(tape, h, &ctx, &mut vars)?,
            };
        }
        let logits = readout(tape, h, &self.head, &mut vars)?;
        Ok(ForwardPass {
            logits,
            params: vars,
            spikes: ctx.spikes.into_inner(),
        })
    }

    /// Class logits `(B, classes)` without keeping a tape.
    pub fn logits(&self, input: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let pass = self.forward(&mut tape, input, SpikeMode::Heaviside)?;
        Ok(tape.value(pass.logits).clone())
    }
}

/// Mean over time, then affine to class logits.
pub fn readout(tape: &mut Tape, x: Var, head: &Linear, vars: &mut Vec<Var>) -> Result<Var> {
    let pooled = tape.mean_time(x)?;
    head.apply(tape, pooled, vars)
}

/// Run one SD-TCM block on its own tape. Returns the block output and the
/// parameter leaves in `temporal, linear1, alpha, linear2` order.
pub fn sdtcm_forward(
    tape: &mut Tape,
    input: Var,
    block: &SdTcmBlock,
    surrogate: SurrogateSpec,
    mode: SpikeMode,
) -> Result<(Var, Vec<Var>)> {
    block.validate()?;
    let d = tape.value(input).last_dim();
    if d != block.width() {
        return Err(Error::shape(format!(
            "input width {d} does not match block width {}",
            block.width()
        )));
    }
    let ctx = Context {
        surrogate,
        mode,
        spikes: Default::default(),
    };
    let mut vars = Vec::new();
    let out = block.forward(tape, input, &ctx, &mut vars)?;
    Ok((out, vars))
}
