use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::neurons::{prf_sequential, PrfParams};
use crate::seqcore::{prf_decay, SeqKind, SequenceBatch};

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResponse {
    pub omegas: Vec<f64>,
    /// `|x_ω / c₀|` at each drive frequency.
    pub magnitude: Vec<f64>,
    pub tau: f64,
    pub theta: f64,
}

impl FrequencyResponse {
    /// Drive frequency with the largest magnitude (first one on ties).
    pub fn peak(&self) -> (f64, f64) {
        let mut best = 0;
        for (i, &m) in self.magnitude.iter().enumerate() {
            if m > self.magnitude[best] {
                best = i;
            }
        }
        (self.omegas[best], self.magnitude[best])
    }
}

/// Continuous-time resonance curve `1 / √((1/τ)² + (ω − θ)²)`. Peaks at `ω = θ`
/// with value `τ`.
pub fn frequency_response(tau: f64, theta: f64, omegas: &[f64]) -> Result<FrequencyResponse> {
    if !(tau > 0.0) {
        return Err(Error::param(format!("tau {tau} must be positive")));
    }
    let magnitude = omegas
        .iter()
        .map(|w| 1.0 / ((1.0 / tau).powi(2) + (w - theta).powi(2)).sqrt())
        .collect();
    Ok(FrequencyResponse {
        omegas: omegas.to_vec(),
        magnitude,
        tau,
        theta,
    })
}

/// Steady-state gain of the discrete recurrence `ũ_t = A·ũ_{t−1} + Δ·c_t` for
/// `c_t = e^{iωΔt}`: `|Δ / (1 − A·e^{−iωΔ})|`.
pub fn discrete_gain(delta: f64, tau: f64, theta: f64, omega: f64) -> f64 {
    let a = prf_decay(delta, tau, theta);
    let rot = Complex64::new(0.0, -omega * delta).exp();
    (delta / (Complex64::new(1.0, 0.0) - a * rot)).norm()
}

/// Drive the sequential PRF neuron with `c_t = e^{iωΔt}` for `steps` steps and
/// measure the oscillation amplitude of `ℜ{ũ}` over the last quarter.
///
/// The neuron takes real input, so the complex drive is applied as two real
/// runs (cosine and sine) combined by linearity.
pub fn simulate_frequency_response(
    tau: f64,
    theta: f64,
    delta: f64,
    omegas: &[f64],
    steps: usize,
) -> Result<FrequencyResponse> {
    if steps < 4 {
        return Err(Error::param("simulation needs at least four steps"));
    }
    let params = PrfParams::new(vec![tau], vec![theta], vec![delta], f64::MAX)?;
    let n = omegas.len();
    let mut cos = Vec::with_capacity(steps * n);
    let mut sin = Vec::with_capacity(steps * n);
    for t in 0..steps {
        for &w in omegas {
            let phase = w * delta * t as f64;
            cos.push(phase.cos());
            sin.push(phase.sin());
        }
    }
    // One lane per frequency.
    let run = |data: Vec<f64>| -> Result<SequenceBatch<Complex64>> {
        let x = SequenceBatch::new(data, steps, n, 1, SeqKind::Current)?;
        Ok(prf_sequential(&x, &params.clone())?.1)
    };
    let uc = run(cos)?;
    let us = run(sin)?;
    let start = steps - steps / 4;
    let magnitude = (0..n)
        .map(|b| {
            let window = start..steps;
            let len = window.len() as f64;
            window
                .map(|t| {
                    let u = uc.get(t, b, 0) + Complex64::i() * us.get(t, b, 0);
                    u.norm()
                })
                .sum::<f64>()
                / len
        })
        .collect();
    Ok(FrequencyResponse {
        omegas: omegas.to_vec(),
        magnitude,
        tau,
        theta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn closed_form_values() {
        let r = frequency_response(2.0, 1.0, &[1.0, 1.5, 0.0]).unwrap();
        assert_abs_diff_eq!(r.magnitude[0], 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.magnitude[1], 1.0 / 0.5f64.sqrt(), epsilon = 1e-12);
        assert!(frequency_response(0.0, 1.0, &[1.0]).is_err());
    }

    #[test]
    fn closed_form_peaks_at_theta() {
        let omegas: Vec<f64> = (0..=200).map(|k| k as f64 * 0.01).collect();
        let r = frequency_response(3.0, 0.73, &omegas).unwrap();
        let (w, m) = r.peak();
        assert_abs_diff_eq!(w, 0.73, epsilon = 1e-12);
        assert_abs_diff_eq!(m, 3.0, epsilon = 1e-12);
        assert!(r.magnitude.iter().all(|&m| m > 0.0));
    }

    #[test]
    fn simulation_matches_discrete_gain() {
        let (tau, theta, delta) = (2.0, 0.5, 0.1);
        let omegas = [0.0, 0.25, 0.5, 0.75, 1.0];
        let sim = simulate_frequency_response(tau, theta, delta, &omegas, 4096).unwrap();
        for (w, m) in omegas.iter().zip(&sim.magnitude) {
            assert_abs_diff_eq!(*m, discrete_gain(delta, tau, theta, *w), epsilon = 1e-9);
        }
    }

    #[test]
    fn simulation_tracks_closed_form_for_small_steps() {
        let (tau, theta, delta) = (2.0, 1.0, 0.05);
        let omegas: Vec<f64> = (0..=8).map(|k| k as f64 * 0.25).collect();
        let sim = simulate_frequency_response(tau, theta, delta, &omegas, 4096).unwrap();
        let exact = frequency_response(tau, theta, &omegas).unwrap();
        for (s, e) in sim.magnitude.iter().zip(&exact.magnitude) {
            assert!((s - e).abs() / e < 0.1, "{s} vs {e}");
        }
    }
}
