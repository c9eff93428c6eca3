use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

use super::{DecayKernel, Scalar, SeqKind, SequenceBatch};
use crate::error::{Error, Result};

/// Smallest power of two that holds a linear convolution of two length-`steps` sequences.
pub fn padded_len(steps: usize) -> usize {
    (2 * steps - 1).next_power_of_two()
}

fn check_shapes<K: Scalar>(input: &SequenceBatch<f64>, kernel: &DecayKernel<K>) -> Result<()> {
    if input.steps() != kernel.steps() {
        return Err(Error::shape(format!(
            "input has {} steps, kernel has {}",
            input.steps(),
            kernel.steps()
        )));
    }
    if input.channels() != kernel.channels() {
        return Err(Error::shape(format!(
            "input has {} channels, kernel has {}",
            input.channels(),
            kernel.channels()
        )));
    }
    Ok(())
}

/// Direct `O(T²)` causal convolution: `out[t] = Σ_{k ≤ t} kernel[t − k] · input[k]`.
pub fn naive_convolve<K: Scalar>(
    input: &SequenceBatch<f64>,
    kernel: &DecayKernel<K>,
) -> Result<SequenceBatch<K>> {
    check_shapes(input, kernel)?;
    let (steps, batch, channels) = input.shape();
    let mut out = vec![K::ZERO; input.data().len()];
    for t in 0..steps {
        for b in 0..batch {
            for c in 0..channels {
                let mut acc = K::ZERO;
                for k in 0..=t {
                    acc += kernel.get(t - k, c) * K::from_real(input.get(k, b, c));
                }
                out[(t * batch + b) * channels + c] = acc;
            }
        }
    }
    Ok(SequenceBatch::from_parts(
        out,
        steps,
        batch,
        channels,
        SeqKind::Potential,
    ))
}

/// Causal convolution through zero-padded FFTs, one lane at a time.
///
/// Padding to `next_pow2(2T − 1)` turns the circular product into the linear
/// convolution; the output is truncated back to `T`.
pub fn causal_convolve<K: Convolvable>(
    input: &SequenceBatch<f64>,
    kernel: &DecayKernel<K>,
) -> Result<SequenceBatch<K>> {
    check_shapes(input, kernel)?;
    Ok(K::fft_convolve(input, kernel))
}

/// Kernel element types with an FFT convolution path.
pub trait Convolvable: Scalar {
    #[doc(hidden)]
    fn fft_convolve(input: &SequenceBatch<f64>, kernel: &DecayKernel<Self>) -> SequenceBatch<Self>;
}

impl Convolvable for f64 {
    fn fft_convolve(input: &SequenceBatch<f64>, kernel: &DecayKernel<f64>) -> SequenceBatch<f64> {
        Convolver::new(input.steps()).convolve(input, kernel)
    }
}

impl Convolvable for Complex64 {
    fn fft_convolve(
        input: &SequenceBatch<f64>,
        kernel: &DecayKernel<Complex64>,
    ) -> SequenceBatch<Complex64> {
        let (steps, batch, channels) = input.shape();
        let n = padded_len(steps);
        let mut planner = FftPlanner::<f64>::new();
        let fwd: Arc<dyn Fft<f64>> = planner.plan_fft_forward(n);
        let inv: Arc<dyn Fft<f64>> = planner.plan_fft_inverse(n);
        let scale = 1.0 / n as f64;

        let per_channel: Vec<Vec<Vec<Complex64>>> = (0..channels)
            .into_par_iter()
            .map(|c| {
                let mut kspec = vec![Complex64::new(0.0, 0.0); n];
                kspec[..steps].copy_from_slice(&kernel.row(c));
                fwd.process(&mut kspec);
                (0..batch)
                    .map(|b| {
                        let mut buf = vec![Complex64::new(0.0, 0.0); n];
                        for (dst, src) in buf.iter_mut().zip(input.lane(b, c)) {
                            dst.re = src;
                        }
                        fwd.process(&mut buf);
                        for (x, k) in buf.iter_mut().zip(&kspec) {
                            *x *= k * scale;
                        }
                        inv.process(&mut buf);
                        buf.truncate(steps);
                        buf
                    })
                    .collect()
            })
            .collect();
        scatter(per_channel, steps, batch, channels)
    }
}

fn scatter<T: Scalar>(
    per_channel: Vec<Vec<Vec<T>>>,
    steps: usize,
    batch: usize,
    channels: usize,
) -> SequenceBatch<T> {
    let mut out = vec![T::ZERO; steps * batch * channels];
    for (c, lanes) in per_channel.into_iter().enumerate() {
        for (b, lane) in lanes.into_iter().enumerate() {
            for (t, v) in lane.into_iter().enumerate() {
                out[(t * batch + b) * channels + c] = v;
            }
        }
    }
    SequenceBatch::from_parts(out, steps, batch, channels, SeqKind::Potential)
}

/// Real FFT convolution engine with plans cached for one sequence length.
///
/// Besides the forward convolution it offers the two adjoints needed for
/// reverse-mode gradients: correlation with the kernel (gradient w.r.t. the
/// input) and correlation with the input (gradient w.r.t. the kernel).
#[derive(Clone)]
pub struct Convolver {
    steps: usize,
    fft_len: usize,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
}

impl std::fmt::Debug for Convolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Convolver")
            .field("steps", &self.steps)
            .field("fft_len", &self.fft_len)
            .finish()
    }
}

impl Convolver {
    pub fn new(steps: usize) -> Self {
        assert!(steps >= 1, "convolver needs at least one step");
        let fft_len = padded_len(steps);
        let mut planner = RealFftPlanner::<f64>::new();
        Self {
            steps,
            fft_len,
            r2c: planner.plan_fft_forward(fft_len),
            c2r: planner.plan_fft_inverse(fft_len),
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn fft_len(&self) -> usize {
        self.fft_len
    }

    /// Spectrum of a zero-padded real sequence of length `steps`.
    pub fn spectrum(&self, lane: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(lane.len(), self.steps);
        let mut buf = self.r2c.make_input_vec();
        buf[..self.steps].copy_from_slice(lane);
        let mut spec = self.r2c.make_output_vec();
        self.r2c
            .process(&mut buf, &mut spec)
            .expect("buffer sizes come from the plan");
        spec
    }

    fn inverse(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        // DC and Nyquist bins of a real signal's spectrum are real.
        let last = spec.len() - 1;
        spec[0].im = 0.0;
        spec[last].im = 0.0;
        let mut out = self.c2r.make_output_vec();
        self.c2r
            .process(&mut spec, &mut out)
            .expect("buffer sizes come from the plan");
        let scale = 1.0 / self.fft_len as f64;
        out.truncate(self.steps);
        for v in &mut out {
            *v *= scale;
        }
        out
    }

    /// `out[t] = Σ_{k ≤ t} kernel[t − k] · lane[k]`.
    pub fn convolve_lane(&self, lane: &[f64], kernel_spec: &[Complex64]) -> Vec<f64> {
        let mut spec = self.spectrum(lane);
        for (x, k) in spec.iter_mut().zip(kernel_spec) {
            *x *= k;
        }
        self.inverse(spec)
    }

    /// `out[j] = Σ_{t ≥ j} grad[t] · kernel[t − j]`, the adjoint of [`Self::convolve_lane`].
    pub fn correlate_lane(&self, grad: &[f64], kernel_spec: &[Complex64]) -> Vec<f64> {
        let mut spec = self.spectrum(grad);
        for (g, k) in spec.iter_mut().zip(kernel_spec) {
            *g *= k.conj();
        }
        self.inverse(spec)
    }

    fn check(&self, input: &SequenceBatch<f64>) {
        assert_eq!(
            input.steps(),
            self.steps,
            "convolver built for another length"
        );
    }

    pub fn convolve(
        &self,
        input: &SequenceBatch<f64>,
        kernel: &DecayKernel<f64>,
    ) -> SequenceBatch<f64> {
        self.check(input);
        let (steps, batch, channels) = input.shape();
        let out = self.convolve_raw(input.data(), batch, channels, kernel.values());
        SequenceBatch::from_parts(out, steps, batch, channels, SeqKind::Potential)
    }

    /// Gradient of `convolve` w.r.t. its input, given the output gradient.
    pub fn correlate(
        &self,
        grad: &SequenceBatch<f64>,
        kernel: &DecayKernel<f64>,
    ) -> SequenceBatch<f64> {
        self.check(grad);
        let (steps, batch, channels) = grad.shape();
        let out = self.correlate_raw(grad.data(), batch, channels, kernel.values());
        SequenceBatch::from_parts(out, steps, batch, channels, SeqKind::Current)
    }

    /// Gradient of `convolve` w.r.t. the kernel: `gk[j][c] = Σ_b Σ_t grad[t] · input[t − j]`.
    pub fn kernel_grad(
        &self,
        grad: &SequenceBatch<f64>,
        input: &SequenceBatch<f64>,
    ) -> DecayKernel<f64> {
        self.check(grad);
        assert_eq!(grad.shape(), input.shape());
        let (steps, batch, channels) = grad.shape();
        let values = self.kernel_grad_raw(grad.data(), input.data(), batch, channels);
        DecayKernel::new(values, steps, channels).expect("shape derived from input")
    }

    /// [`Self::convolve`] on a raw time-major `(T, B, N)` buffer and `(T, N)` kernel.
    pub fn convolve_raw(
        &self,
        data: &[f64],
        batch: usize,
        channels: usize,
        kernel: &[f64],
    ) -> Vec<f64> {
        self.lanewise(data, batch, channels, kernel, false)
    }

    /// [`Self::correlate`] on raw buffers.
    pub fn correlate_raw(
        &self,
        grad: &[f64],
        batch: usize,
        channels: usize,
        kernel: &[f64],
    ) -> Vec<f64> {
        self.lanewise(grad, batch, channels, kernel, true)
    }

    fn lanewise(
        &self,
        data: &[f64],
        batch: usize,
        channels: usize,
        kernel: &[f64],
        adjoint: bool,
    ) -> Vec<f64> {
        let steps = self.steps;
        assert_eq!(data.len(), steps * batch * channels);
        assert_eq!(kernel.len(), steps * channels);
        let per_channel: Vec<Vec<Vec<f64>>> = (0..channels)
            .into_par_iter()
            .map(|c| {
                let kspec = self.spectrum(&strided(kernel, c, channels));
                (0..batch)
                    .map(|b| {
                        let lane = strided(data, b * channels + c, batch * channels);
                        if adjoint {
                            self.correlate_lane(&lane, &kspec)
                        } else {
                            self.convolve_lane(&lane, &kspec)
                        }
                    })
                    .collect()
            })
            .collect();
        scatter(per_channel, steps, batch, channels).into_data()
    }

    /// [`Self::kernel_grad`] on raw buffers; returns a `(T, N)` buffer.
    pub fn kernel_grad_raw(
        &self,
        grad: &[f64],
        input: &[f64],
        batch: usize,
        channels: usize,
    ) -> Vec<f64> {
        let steps = self.steps;
        assert_eq!(grad.len(), steps * batch * channels);
        assert_eq!(input.len(), grad.len());
        let rows: Vec<Vec<f64>> = (0..channels)
            .into_par_iter()
            .map(|c| {
                let mut acc = vec![Complex64::new(0.0, 0.0); self.fft_len / 2 + 1];
                for b in 0..batch {
                    let offset = b * channels + c;
                    let g = self.spectrum(&strided(grad, offset, batch * channels));
                    let x = self.spectrum(&strided(input, offset, batch * channels));
                    for ((a, g), x) in acc.iter_mut().zip(&g).zip(&x) {
                        *a += g * x.conj();
                    }
                }
                self.inverse(acc)
            })
            .collect();
        let mut values = vec![0.0; steps * channels];
        for (c, row) in rows.into_iter().enumerate() {
            for (t, v) in row.into_iter().enumerate() {
                values[t * channels + c] = v;
            }
        }
        values
    }
}

fn strided(data: &[f64], offset: usize, stride: usize) -> Vec<f64> {
    data[offset..].iter().step_by(stride).copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqcore::{build_lif_kernel, build_prf_kernel};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn lane(v: &[f64]) -> SequenceBatch<f64> {
        SequenceBatch::from_lane(v.to_vec(), SeqKind::Current).unwrap()
    }

    fn half_kernel() -> DecayKernel<f64> {
        build_lif_kernel(&[0.5], 3).unwrap()
    }

    #[test]
    fn padding_is_next_power_of_two() {
        assert_eq!(padded_len(1), 1);
        assert_eq!(padded_len(2), 4);
        assert_eq!(padded_len(3), 8);
        assert_eq!(padded_len(512), 1024);
        assert_eq!(padded_len(513), 2048);
    }

    #[test]
    fn impulse_and_constant_inputs() {
        for (input, expected) in [
            ([2.0, 0.0, 0.0], [2.0, 1.0, 0.5]),
            ([1.0, 1.0, 1.0], [1.0, 1.5, 1.75]),
        ] {
            let naive = naive_convolve(&lane(&input), &half_kernel()).unwrap();
            assert_eq!(naive.data(), &expected);
            let fast = causal_convolve(&lane(&input), &half_kernel()).unwrap();
            for (a, b) in fast.data().iter().zip(expected) {
                assert!((a - b).abs() <= 1e-10 * b.abs());
            }
        }
    }

    #[test]
    fn unit_impulse_reproduces_kernel() {
        let k = build_prf_kernel(&[0.7], &[3.0], &[0.9], 17).unwrap();
        let mut x = vec![0.0; 17];
        x[0] = 1.0;
        let y = causal_convolve(&lane(&x), &k).unwrap();
        for (a, b) in y.data().iter().zip(k.row(0)) {
            assert_abs_diff_eq!(a.re, b.re, epsilon = 1e-14);
            assert_abs_diff_eq!(a.im, b.im, epsilon = 1e-14);
        }
    }

    #[test]
    fn single_step_sequence() {
        let k = build_lif_kernel(&[0.5], 1).unwrap();
        let y = causal_convolve(&lane(&[3.0]), &k).unwrap();
        assert_abs_diff_eq!(y.data()[0], 3.0, epsilon = 1e-15);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let k = build_lif_kernel(&[0.5], 4).unwrap();
        assert!(causal_convolve(&lane(&[1.0, 2.0, 3.0]), &k).is_err());
        assert!(naive_convolve(&lane(&[1.0, 2.0, 3.0]), &k).is_err());
        let k2 = build_lif_kernel(&[0.5, 0.5], 3).unwrap();
        assert!(causal_convolve(&lane(&[1.0, 2.0, 3.0]), &k2).is_err());
    }

    fn batch_strategy() -> impl Strategy<Value = (usize, usize, usize, Vec<f64>, Vec<f64>)> {
        (1usize..=64, 1usize..=3, 1usize..=3).prop_flat_map(|(t, b, n)| {
            (
                Just(t),
                Just(b),
                Just(n),
                prop::collection::vec(-3.0f64..3.0, t * b * n),
                prop::collection::vec(0.05f64..0.95, n),
            )
        })
    }

    proptest! {
        #[test]
        fn fft_matches_naive((t, b, n, data, beta) in batch_strategy()) {
            let x = SequenceBatch::new(data, t, b, n, SeqKind::Current).unwrap();
            let k = build_lif_kernel(&beta, t).unwrap();
            let fast = causal_convolve(&x, &k).unwrap();
            let slow = naive_convolve(&x, &k).unwrap();
            let scale = slow.data().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
            for (a, b) in fast.data().iter().zip(slow.data()) {
                prop_assert!((a - b).abs() <= 1e-9 * scale);
            }
        }

        #[test]
        fn output_is_causal(t in 2usize..40, split in 0usize..39, seed in any::<u64>()) {
            let split = split % (t - 1);
            let mut v: Vec<f64> = (0..t).map(|i| ((seed.wrapping_add(i as u64) % 97) as f64) / 50.0 - 1.0).collect();
            let k = build_prf_kernel(&[0.4], &[2.5], &[1.1], t).unwrap();
            let before = causal_convolve(&lane(&v), &k).unwrap();
            for x in v.iter_mut().skip(split + 1) {
                *x += 10.0;
            }
            let after = causal_convolve(&lane(&v), &k).unwrap();
            for i in 0..=split {
                prop_assert!((before.data()[i] - after.data()[i]).norm() <= 1e-9);
            }
        }

        #[test]
        fn adjoints_match_inner_products(t in 1usize..48, seed in any::<u64>()) {
            // <conv(x, k), g> == <x, correlate(g, k)> == <k, kernel_grad(g, x)>
            let gen = |s: u64, i: usize| (((s ^ (i as u64 * 0x9E37)) % 1000) as f64) / 500.0 - 1.0;
            let x: Vec<f64> = (0..t).map(|i| gen(seed, i)).collect();
            let g: Vec<f64> = (0..t).map(|i| gen(seed.rotate_left(17), i)).collect();
            let kv: Vec<f64> = (0..t).map(|i| gen(seed.rotate_left(31), i)).collect();
            let k = DecayKernel::new(kv.clone(), t, 1).unwrap();
            let conv = Convolver::new(t);
            let y = conv.convolve(&lane(&x), &k);
            let lhs: f64 = y.data().iter().zip(&g).map(|(a, b)| a * b).sum();
            let gx = conv.correlate(&lane(&g), &k);
            let mid: f64 = gx.data().iter().zip(&x).map(|(a, b)| a * b).sum();
            let gk = conv.kernel_grad(&lane(&g), &lane(&x));
            let rhs: f64 = gk.values().iter().zip(&kv).map(|(a, b)| a * b).sum();
            prop_assert!((lhs - mid).abs() <= 1e-9 * (1.0 + lhs.abs()));
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
        }
    }
}
