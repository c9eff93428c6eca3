use super::model::ParamGroup;
use super::tensor::Tensor;

/// Adam with decoupled weight decay and separate rates for weights and neuron
/// parameters. Decay applies to [`ParamGroup::Weight`] only.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub lr: f64,
    pub neuron_lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamW {
    pub fn new(lr: f64, neuron_lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            neuron_lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Apply one update. `params`, `groups` and `grads` are parallel lists.
    pub fn update(&mut self, params: &mut [&mut Tensor], groups: &[ParamGroup], grads: &[Tensor]) {
        assert_eq!(params.len(), grads.len());
        assert_eq!(params.len(), groups.len());
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (lr, decay) = match groups[i] {
                ParamGroup::Weight => (self.lr, self.weight_decay),
                ParamGroup::Bias => (self.lr, 0.0),
                ParamGroup::Neuron => (self.neuron_lr, 0.0),
            };
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (j, (w, &gj)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * gj;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * gj * gj;
                if lr == 0.0 {
                    continue;
                }
                let mhat = m[j] / bc1;
                let vhat = v[j] / bc2;
                *w -= lr * (mhat / (vhat.sqrt() + self.eps) + decay * *w);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = Tensor::new(vec![2], vec![1.0, -1.0]).unwrap();
        let g = Tensor::new(vec![2], vec![0.3, -5.0]).unwrap();
        let mut opt = AdamW::new(0.1, 0.01, 0.0);
        opt.update(&mut [&mut p], &[ParamGroup::Bias], &[g]);
        assert!((p.data()[0] - 0.9).abs() < 1e-6);
        assert!((p.data()[1] + 0.9).abs() < 1e-6);
    }

    #[test]
    fn groups_use_their_rates() {
        let mut w = Tensor::filled(&[1], 2.0);
        let mut n = Tensor::filled(&[1], 2.0);
        let g = Tensor::filled(&[1], 0.0);
        let mut opt = AdamW::new(0.1, 0.01, 0.5);
        opt.update(
            &mut [&mut w, &mut n],
            &[ParamGroup::Weight, ParamGroup::Neuron],
            &[g.clone(), g],
        );
        assert!((w.data()[0] - (2.0 - 0.1 * 0.5 * 2.0)).abs() < 1e-12);
        assert_eq!(n.data()[0], 2.0);
    }

    #[test]
    fn zero_rate_is_a_no_op() {
        let mut p = Tensor::new(vec![3], vec![0.1, 0.2, 0.3]).unwrap();
        let before = p.clone();
        let g = Tensor::new(vec![3], vec![1.0, -2.0, 3.0]).unwrap();
        let mut opt = AdamW::new(0.0, 0.0, 0.05);
        for _ in 0..5 {
            opt.update(
                &mut [&mut p],
                &[ParamGroup::Weight],
                std::slice::from_ref(&g),
            );
        }
        assert_eq!(p, before);
    }
}
