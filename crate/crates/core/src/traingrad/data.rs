use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Labelled sequences stored sample-major as `(n, T, input_dim)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    steps: usize,
    input_dim: usize,
    classes: usize,
    inputs: Vec<f64>,
    labels: Vec<usize>,
}

impl Dataset {
    pub fn new(
        steps: usize,
        input_dim: usize,
        classes: usize,
        inputs: Vec<f64>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        if steps == 0 || input_dim == 0 || classes == 0 {
            return Err(Error::shape("dataset dimensions must be >= 1"));
        }
        if inputs.len() != labels.len() * steps * input_dim {
            return Err(Error::shape(format!(
                "{} input values for {} samples of ({steps}, {input_dim})",
                inputs.len(),
                labels.len()
            )));
        }
        if let Some(l) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::param(format!(
                "label {l} out of range for {classes} classes"
            )));
        }
        Ok(Self {
            steps,
            input_dim,
            classes,
            inputs,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let w = self.steps * self.input_dim;
        &self.inputs[i * w..(i + 1) * w]
    }

    /// The first `n` samples.
    pub fn take(&self, n: usize) -> Self {
        self.range(0, n)
    }

    /// Samples `start..end`, clipped to the dataset.
    pub fn range(&self, start: usize, end: usize) -> Self {
        let end = end.min(self.len());
        let start = start.min(end);
        let w = self.steps * self.input_dim;
        Self {
            inputs: self.inputs[start * w..end * w].to_vec(),
            labels: self.labels[start..end].to_vec(),
            ..*self
        }
    }

    /// Gather samples into a time-major `(T, B, input_dim)` batch.
    pub fn batch(&self, indices: &[usize]) -> (Tensor, Vec<usize>) {
        let b = indices.len();
        let mut data = vec![0.0; self.steps * b * self.input_dim];
        for (j, &i) in indices.iter().enumerate() {
            let s = self.sample(i);
            for t in 0..self.steps {
                let dst = (t * b + j) * self.input_dim;
                data[dst..dst + self.input_dim]
                    .copy_from_slice(&s[t * self.input_dim..(t + 1) * self.input_dim]);
            }
        }
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        (
            Tensor::new(vec![self.steps, b, self.input_dim], data).expect("shape matches"),
            labels,
        )
    }
}

/// Binary task: a single unit impulse at a random step; label 0 if it falls in
/// the first half of the sequence and 1 otherwise.
pub fn impulse_task(samples: usize, steps: usize, seed: u64) -> Result<Dataset> {
    if steps < 2 {
        return Err(Error::param("impulse task needs at least two steps"));
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let half = steps / 2;
    let mut inputs = vec![0.0; samples * steps];
    let mut labels = Vec::with_capacity(samples);
    for i in 0..samples {
        let label = rng.gen_range(0..2usize);
        let pos = if label == 0 {
            rng.gen_range(0..half)
        } else {
            rng.gen_range(half..steps)
        };
        inputs[i * steps + pos] = 1.0;
        labels.push(label);
    }
    Dataset::new(steps, 1, 2, inputs, labels)
}
