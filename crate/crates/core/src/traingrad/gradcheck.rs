use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use super::model::{Architecture, BlockMode, Model, ModelConfig};
use super::surrogate::SurrogateSpec;
use super::tape::{SpikeMode, Tape};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradCheckConfig {
    pub steps: usize,
    pub batch: usize,
    pub width: usize,
    pub depth: usize,
    pub classes: usize,
    pub bidirectional: bool,
    /// Central-difference step.
    pub h: f64,
    /// Denominator floor for the relative error.
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            steps: 32,
            batch: 2,
            width: 8,
            depth: 2,
            classes: 3,
            bidirectional: false,
            h: 1e-6,
            floor: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// `(parameter name, flat index)` of the largest relative error.
    pub worst: (String, usize),
}

fn loss(model: &Model, input: &Tensor, labels: &[usize]) -> Result<f64> {
    let mut tape = Tape::new();
    let pass = model.forward(&mut tape, input, SpikeMode::Smooth)?;
    let l = tape.cross_entropy(pass.logits, labels)?;
    Ok(tape.value(l).item())
}

/// Compare tape gradients of an SD-TCM classifier against central differences.
///
/// Spikes use the smooth surrogate in both passes so the loss is
/// differentiable; the relative error of each scalar is
/// `|g − ĝ| / max(|g|, |ĝ|, floor)`.
pub fn sdtcm_gradient_check(config: &GradCheckConfig) -> Result<GradCheckReport> {
    if !(config.h > 0.0 && config.floor > 0.0) {
        return Err(Error::param("step and floor must be positive"));
    }
    let mode = if config.bidirectional {
        BlockMode::Bidirectional
    } else {
        BlockMode::Causal
    };
    let mut model = Model::new(
        ModelConfig {
            architecture: Architecture::SdTcm(mode),
            input_dim: 1,
            width: config.width,
            depth: config.depth,
            classes: config.classes,
            v_th: 1.0,
            spatial_v_th: 1.0,
            delta_range: (0.05, 0.5),
            theta_range: (0.0, std::f64::consts::PI),
            tau_init: 4.0,
            surrogate: SurrogateSpec::default(),
        },
        config.seed,
    )?;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let input = Tensor::new(
        vec![config.steps, config.batch, 1],
        (0..config.steps * config.batch)
            .map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal))
            .collect(),
    )?;
    let labels: Vec<usize> = (0..config.batch)
        .map(|_| rng.gen_range(0..config.classes))
        .collect();

    let mut tape = Tape::new();
    let pass = model.forward(&mut tape, &input, SpikeMode::Smooth)?;
    let l = tape.cross_entropy(pass.logits, &labels)?;
    let grads = tape.backward(l)?;
    let analytic: Vec<Tensor> = pass
        .params
        .iter()
        .map(|&v| {
            grads
                .get(v)
                .cloned()
                .unwrap_or_else(|| Tensor::zeros(tape.value(v).shape()))
        })
        .collect();
    drop(tape);

    let names: Vec<String> = model.params().into_iter().map(|p| p.0).collect();
    let mut report = GradCheckReport {
        checked: 0,
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        worst: (String::new(), 0),
    };
    for (p, name) in names.iter().enumerate() {
        for i in 0..analytic[p].len() {
            let orig = model.params_mut()[p].data()[i];
            model.params_mut()[p].data_mut()[i] = orig + config.h;
            let up = loss(&model, &input, &labels)?;
            model.params_mut()[p].data_mut()[i] = orig - config.h;
            let down = loss(&model, &input, &labels)?;
            model.params_mut()[p].data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * config.h);
            let a = analytic[p].data()[i];
            let abs = (a - numeric).abs();
            let rel = abs / a.abs().max(numeric.abs()).max(config.floor);
            report.checked += 1;
            report.max_abs_error = report.max_abs_error.max(abs);
            if rel > report.max_rel_error || !rel.is_finite() {
                report.max_rel_error = rel;
                report.worst = (name.clone(), i);
            }
        }
    }
    Ok(report)
}
