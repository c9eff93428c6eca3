use num_complex::Complex64;

use super::DecayKernel;
use crate::error::{Error, Result};

/// `(β⁰, β¹, …, β^{T−1})` per channel.
///
/// Powers come from a running product, never `powi`, so every platform
/// rounds identically.
pub fn build_lif_kernel(beta: &[f64], steps: usize) -> Result<DecayKernel<f64>> {
    if steps == 0 || beta.is_empty() {
        return Err(Error::shape(
            "kernel needs at least one step and one channel",
        ));
    }
    if let Some(b) = beta.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
        return Err(Error::param(format!("beta {b} outside (0, 1)")));
    }
    let n = beta.len();
    let mut values = Vec::with_capacity(steps * n);
    let mut power = vec![1.0; n];
    for _ in 0..steps {
        values.extend_from_slice(&power);
        for (p, b) in power.iter_mut().zip(beta) {
            *p *= b;
        }
    }
    DecayKernel::new(values, steps, n)
}

/// Complex decay factor `A = exp(Δ·(−1/τ + iθ))`.
pub fn prf_decay(delta: f64, tau: f64, theta: f64) -> Complex64 {
    Complex64::new(delta * (-1.0 / tau), delta * theta).exp()
}

pub(crate) fn check_prf_params(delta: &[f64], tau: &[f64], theta: &[f64]) -> Result<()> {
    if delta.len() != tau.len() || delta.len() != theta.len() {
        return Err(Error::shape(
            "delta, tau and theta must have one entry per channel",
        ));
    }
    for ((&d, &t), &th) in delta.iter().zip(tau).zip(theta) {
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::param(format!("delta {d} must be positive")));
        }
        if !(t > d) || !t.is_finite() {
            return Err(Error::param(format!(
                "tau {t} must exceed delta {d}; the kernel would not decay"
            )));
        }
        if !th.is_finite() {
            return Err(Error::param("theta must be finite"));
        }
    }
    Ok(())
}

/// `(Δ·A⁰, Δ·A¹, …, Δ·A^{T−1})` per channel.
pub fn build_prf_kernel(
    delta: &[f64],
    tau: &[f64],
    theta: &[f64],
    steps: usize,
) -> Result<DecayKernel<Complex64>> {
    if steps == 0 || delta.is_empty() {
        return Err(Error::shape(
            "kernel needs at least one step and one channel",
        ));
    }
    check_prf_params(delta, tau, theta)?;
    let n = delta.len();
    let decay: Vec<Complex64> = (0..n)
        .map(|c| prf_decay(delta[c], tau[c], theta[c]))
        .collect();
    let mut power = vec![Complex64::new(1.0, 0.0); n];
    let mut values = Vec::with_capacity(steps * n);
    for _ in 0..steps {
        values.extend(power.iter().zip(delta).map(|(p, &d)| p * d));
        for (p, a) in power.iter_mut().zip(&decay) {
            *p *= a;
        }
    }
    DecayKernel::new(values, steps, n)
}
