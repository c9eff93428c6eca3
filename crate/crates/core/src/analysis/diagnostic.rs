use crate::error::{Error, Result};
use crate::seqcore::{DecayKernel, Scalar, SequenceBatch};

/// `Σ_j K_j · S_{T−1−j}` for every `(b, n)` lane, batch-major.
///
/// This is the factor through which the loss gradient at the last step
/// reaches the kernel; two spike patterns with equal values here are
/// indistinguishable to a learning rule driven by it.
pub fn kernel_gradient_diagnostic<K: Scalar>(
    kernel: &DecayKernel<K>,
    spikes: &SequenceBatch<f64>,
) -> Result<Vec<K>> {
    let (steps, batch, channels) = spikes.shape();
    if kernel.channels() != channels || kernel.steps() < steps {
        return Err(Error::shape(format!(
            "kernel ({}, {}) does not cover spikes ({steps}, {batch}, {channels})",
            kernel.steps(),
            kernel.channels()
        )));
    }
    let mut out = Vec::with_capacity(batch * channels);
    for b in 0..batch {
        for c in 0..channels {
            let mut acc = K::ZERO;
            for j in 0..steps {
                let s = spikes.get(steps - 1 - j, b, c);
                if s != 0.0 {
                    acc += kernel.get(j, c) * K::from_real(s);
                }
            }
            out.push(acc);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqcore::{build_prf_kernel, SeqKind};
    use num_complex::Complex64;

    fn lane(s: &[f64]) -> SequenceBatch<f64> {
        SequenceBatch::from_lane(s.to_vec(), SeqKind::Spike).unwrap()
    }

    #[test]
    fn hand_computed_value() {
        let k = DecayKernel::new(vec![1.0, 0.5, 0.25], 3, 1).unwrap();
        assert_eq!(
            kernel_gradient_diagnostic(&k, &lane(&[1.0, 0.0, 1.0])).unwrap(),
            vec![1.25]
        );
    }

    #[test]
    fn rotating_kernel_separates_patterns_a_constant_one_cannot() {
        let a = lane(&[1.0, 0.0, 0.0, 1.0]);
        let b = lane(&[0.0, 1.0, 1.0, 0.0]);
        let flat = DecayKernel::new(vec![1.0; 4], 4, 1).unwrap();
        assert_eq!(
            kernel_gradient_diagnostic(&flat, &a).unwrap(),
            kernel_gradient_diagnostic(&flat, &b).unwrap()
        );
        let rot = build_prf_kernel(&[1.0], &[1e6], &[std::f64::consts::FRAC_PI_2], 4).unwrap();
        let ga: Vec<Complex64> = kernel_gradient_diagnostic(&rot, &a).unwrap();
        let gb = kernel_gradient_diagnostic(&rot, &b).unwrap();
        assert!((ga[0] - gb[0]).norm() > 1.0);
    }

    #[test]
    fn short_kernel_is_rejected() {
        let k = DecayKernel::new(vec![1.0, 0.5], 2, 1).unwrap();
        assert!(kernel_gradient_diagnostic(&k, &lane(&[1.0, 0.0, 1.0])).is_err());
    }
}
