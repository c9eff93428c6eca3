use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use super::data::Dataset;
use super::model::{Architecture, Model, ModelConfig};
use super::optim::AdamW;
use super::surrogate::SurrogateSpec;
use super::tape::{SpikeMode, Tape};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub depth: usize,
    pub width: usize,
    pub lr: f64,
    pub neuron_lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub delta_min: f64,
    pub delta_max: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub tau_init: f64,
    pub v_th: f64,
    pub surrogate_width: f64,
    /// Normalization layers. Only `false` is supported.
    pub normalization: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            depth: 1,
            width: 16,
            lr: 0.01,
            neuron_lr: 0.01,
            weight_decay: 0.0,
            batch_size: 32,
            epochs: 30,
            delta_min: 0.1,
            delta_max: 1.0,
            theta_min: 0.0,
            theta_max: 0.05,
            tau_init: 256.0,
            v_th: 1.0,
            surrogate_width: 2.0,
            normalization: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.depth == 0 || self.width == 0 || self.batch_size == 0 || self.epochs == 0 {
            return bad("depth, width, batch_size and epochs must be >= 1");
        }
        if !(self.lr >= 0.0 && self.neuron_lr >= 0.0 && self.weight_decay >= 0.0) {
            return bad("learning rates and weight decay must be non-negative");
        }
        if !(self.delta_min > 0.0 && self.delta_min < self.delta_max) {
            return bad("delta range must satisfy 0 < delta_min < delta_max");
        }
        if self.theta_min > self.theta_max {
            return bad("theta_min must not exceed theta_max");
        }
        if !(self.tau_init > self.delta_max) {
            return bad("tau_init must exceed delta_max");
        }
        if !(self.v_th > 0.0 && self.surrogate_width > 0.0) {
            return bad("v_th and surrogate_width must be positive");
        }
        if self.normalization {
            return bad("normalization layers are not available");
        }
        Ok(())
    }

    pub fn model_config(
        &self,
        architecture: Architecture,
        input_dim: usize,
        classes: usize,
    ) -> ModelConfig {
        ModelConfig {
            architecture,
            input_dim,
            width: self.width,
            depth: self.depth,
            classes,
            v_th: self.v_th,
            spatial_v_th: self.v_th,
            delta_range: (self.delta_min, self.delta_max),
            theta_range: (self.theta_min, self.theta_max),
            tau_init: self.tau_init,
            surrogate: SurrogateSpec {
                width: self.surrogate_width,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
}

fn correct(logits: &Tensor, labels: &[usize]) -> usize {
    let c = logits.last_dim();
    logits
        .data()
        .chunks_exact(c)
        .zip(labels)
        .filter(|(row, &l)| argmax(row) == l)
        .count()
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

/// One optimizer step on a batch. Returns the batch loss and correct count.
pub fn train_step(
    model: &mut Model,
    opt: &mut AdamW,
    input: &Tensor,
    labels: &[usize],
) -> Result<(f64, usize)> {
    let mut tape = Tape::new();
    let pass = model.forward(&mut tape, input, SpikeMode::Heaviside)?;
    let loss = tape.cross_entropy(pass.logits, labels)?;
    let value = tape.value(loss).item();
    if !value.is_finite() {
        return Err(Error::Diverged(format!("loss is {value}")));
    }
    let hits = correct(tape.value(pass.logits), labels);
    let mut grads = tape.backward(loss)?;
    let groups: Vec<_> = model.params().iter().map(|p| p.1).collect();
    let grads: Vec<Tensor> = pass
        .params
        .iter()
        .map(|&v| {
            grads
                .take(v)
                .unwrap_or_else(|| Tensor::zeros(tape.value(v).shape()))
        })
        .collect();
    if let Some(i) = grads
        .iter()
        .position(|g| g.data().iter().any(|x| !x.is_finite()))
    {
        return Err(Error::Diverged(format!(
            "non-finite gradient for {}",
            model.params()[i].0
        )));
    }
    drop(tape);
    opt.update(&mut model.params_mut(), &groups, &grads);
    model.clamp();
    Ok((value, hits))
}

/// Mean loss and accuracy over a dataset.
pub fn evaluate(model: &Model, data: &Dataset, batch_size: usize) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Err(Error::Empty("cannot evaluate on an empty dataset"));
    }
    let idx: Vec<usize> = (0..data.len()).collect();
    let (mut loss, mut hits) = (0.0, 0);
    for chunk in idx.chunks(batch_size.max(1)) {
        let (x, y) = data.batch(chunk);
        let mut tape = Tape::new();
        let pass = model.forward(&mut tape, &x, SpikeMode::Heaviside)?;
        let l = tape.cross_entropy(pass.logits, &y)?;
        loss += tape.value(l).item() * chunk.len() as f64;
        hits += correct(tape.value(pass.logits), &y);
    }
    let n = data.len() as f64;
    Ok((loss / n, hits as f64 / n))
}

/// Mini-batch training with per-epoch reshuffling. Deterministic given the
/// config seed. A non-finite loss aborts with [`Error::Diverged`].
pub fn train(
    model: &mut Model,
    train_set: &Dataset,
    test_set: Option<&Dataset>,
    config: &TrainConfig,
) -> Result<Vec<EpochMetrics>> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::Empty("training set is empty"));
    }
    let mut opt = AdamW::new(config.lr, config.neuron_lr, config.weight_decay);
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let (mut total, mut hits) = (0.0, 0);
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let (x, y) = train_set.batch(chunk);
            let (loss, h) = train_step(model, &mut opt, &x, &y).map_err(|e| match e {
                Error::Diverged(m) => Error::Diverged(format!("epoch {epoch}, batch {b}: {m}")),
                e => e,
            })?;
            total += loss * chunk.len() as f64;
            hits += h;
        }
        let n = train_set.len() as f64;
        let test_accuracy = match test_set {
            Some(t) => Some(evaluate(model, t, config.batch_size)?.1),
            None => None,
        };
        history.push(EpochMetrics {
            epoch,
            loss: total / n,
            train_accuracy: hits as f64 / n,
            test_accuracy,
        });
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traingrad::data::impulse_task;
    use crate::traingrad::model::NeuronKind;

    fn small() -> TrainConfig {
        TrainConfig {
            width: 4,
            batch_size: 8,
            epochs: 2,
            delta_min: 0.05,
            delta_max: 0.5,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_untouched() {
        let cfg = TrainConfig {
            lr: 0.0,
            neuron_lr: 0.0,
            ..small()
        };
        let data = impulse_task(24, 16, 1).unwrap();
        let mut model = Model::new(
            cfg.model_config(Architecture::FeedForward(NeuronKind::Prf), 1, 2),
            4,
        )
        .unwrap();
        let before = model.clone();
        train(&mut model, &data, None, &cfg).unwrap();
        assert_eq!(model, before);
    }

    #[test]
    fn runs_are_reproducible() {
        let cfg = small();
        let data = impulse_task(24, 16, 1).unwrap();
        let run = || {
            let mut m = Model::new(
                cfg.model_config(Architecture::FeedForward(NeuronKind::Prf), 1, 2),
                4,
            )
            .unwrap();
            let h = train(&mut m, &data, Some(&data), &cfg).unwrap();
            (m, h)
        };
        let (m1, h1) = run();
        let (m2, h2) = run();
        assert_eq!(h1, h2);
        assert_eq!(m1, m2);
    }

    #[test]
    fn exploding_loss_aborts() {
        let cfg = small();
        let data = impulse_task(8, 16, 1).unwrap();
        let mut m = Model::new(
            cfg.model_config(Architecture::FeedForward(NeuronKind::Prf), 1, 2),
            4,
        )
        .unwrap();
        for w in m.head.weight.data_mut() {
            *w = f64::NAN;
        }
        let err = train(&mut m, &data, None, &cfg).unwrap_err();
        assert!(
            matches!(err, Error::Diverged(ref msg) if msg.contains("epoch 0")),
            "{err}"
        );
    }

    #[test]
    fn config_rejects_bad_values() {
        for cfg in [
            TrainConfig {
                delta_min: 0.2,
                delta_max: 0.1,
                ..small()
            },
            TrainConfig {
                epochs: 0,
                ..small()
            },
            TrainConfig {
                normalization: true,
                ..small()
            },
            TrainConfig {
                lr: -1.0,
                ..small()
            },
        ] {
            assert!(cfg.validate().is_err());
        }
    }
}
