use num_complex::Complex64;

use super::{heaviside, per_channel};
use crate::error::{Error, Result};
use crate::seqcore::kernel::check_prf_params;
use crate::seqcore::{build_prf_kernel, causal_convolve, prf_decay, SeqKind, SequenceBatch};

/// Resonate-and-fire parameters: complex decay `γ̃ = −1/τ + iθ`, step size `Δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrfParams {
    pub tau: Vec<f64>,
    pub theta: Vec<f64>,
    pub delta: Vec<f64>,
    pub v_th: f64,
}

impl PrfParams {
    pub fn new(tau: Vec<f64>, theta: Vec<f64>, delta: Vec<f64>, v_th: f64) -> Result<Self> {
        let p = Self {
            tau,
            theta,
            delta,
            v_th,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.tau.len().max(self.theta.len()).max(self.delta.len());
        let (tau, theta, delta) = self.expand(n)?;
        check_prf_params(&delta, &tau, &theta)?;
        if !(self.v_th > 0.0) {
            return Err(Error::param(format!(
                "threshold {} must be positive",
                self.v_th
            )));
        }
        Ok(())
    }

    /// `(τ, θ, Δ)` broadcast to `channels`.
    pub fn expand(&self, channels: usize) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        if channels == 0 {
            return Err(Error::param("PRF parameters must not be empty"));
        }
        Ok((
            per_channel(&self.tau, channels, "tau")?,
            per_channel(&self.theta, channels, "theta")?,
            per_channel(&self.delta, channels, "delta")?,
        ))
    }
}

/// `ũ_t = exp(Δγ̃)·ũ_{t−1} + Δ·c_t`, `s_t = [ℜ{ũ_t} ≥ V_th]`, stepping through time.
pub fn prf_sequential(
    input: &SequenceBatch<f64>,
    params: &PrfParams,
) -> Result<(SequenceBatch<f64>, SequenceBatch<Complex64>)> {
    params.validate()?;
    let (steps, batch, channels) = input.shape();
    let (tau, theta, delta) = params.expand(channels)?;
    let decay: Vec<Complex64> = (0..channels)
        .map(|c| prf_decay(delta[c], tau[c], theta[c]))
        .collect();
    let width = batch * channels;
    let mut u = vec![Complex64::new(0.0, 0.0); width];
    let mut spikes = Vec::with_capacity(input.data().len());
    let mut potentials = Vec::with_capacity(input.data().len());
    for t in 0..steps {
        for (i, &c) in input.step(t).iter().enumerate() {
            let ch = i % channels;
            u[i] = decay[ch] * u[i] + Complex64::new(delta[ch] * c, 0.0);
            spikes.push(heaviside(u[i].re >= params.v_th));
        }
        potentials.extend_from_slice(&u);
    }
    Ok((
        SequenceBatch::from_parts(spikes, steps, batch, channels, SeqKind::Spike),
        SequenceBatch::from_parts(potentials, steps, batch, channels, SeqKind::Potential),
    ))
}

/// `Ũ = C ∗ K̃` by FFT, then `S = [ℜ{Ũ} ≥ V_th]`. No reset scan: the PRF
/// neuron has no output-dependent reset.
pub fn prf_parallel(
    input: &SequenceBatch<f64>,
    params: &PrfParams,
) -> Result<(SequenceBatch<f64>, SequenceBatch<Complex64>)> {
    params.validate()?;
    let (tau, theta, delta) = params.expand(input.channels())?;
    let kernel = build_prf_kernel(&delta, &tau, &theta, input.steps())?;
    let u = causal_convolve(input, &kernel)?;
    let spikes = u.map(SeqKind::Spike, |v| heaviside(v.re >= params.v_th));
    Ok((spikes, u))
}

/// Real-valued inference state with merged coefficients
/// `(φ_re, φ_im) = e^{−Δ/τ}(cos Δθ, sin Δθ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeployPrfState {
    /// `ℜ{ũ}`
    pub u: f64,
    /// `ℑ{ũ}`
    pub r: f64,
    pub phi_re: f64,
    pub phi_im: f64,
}

impl DeployPrfState {
    pub fn new(delta: f64, tau: f64, theta: f64) -> Result<Self> {
        check_prf_params(&[delta], &[tau], &[theta])?;
        let a = prf_decay(delta, tau, theta);
        Ok(Self {
            u: 0.0,
            r: 0.0,
            phi_re: a.re,
            phi_im: a.im,
        })
    }
}

/// One inference step: two extra multiplies and one extra add over LIF.
pub fn prf_deploy_step(
    state: DeployPrfState,
    c: f64,
    delta: f64,
    v_th: f64,
) -> (DeployPrfState, bool) {
    let u = state.phi_re * state.u - state.phi_im * state.r + delta * c;
    let r = state.phi_re * state.r + state.phi_im * state.u;
    (DeployPrfState { u, r, ..state }, u >= v_th)
}

/// Run [`prf_deploy_step`] over every lane of a batch.
pub fn prf_deploy_run(
    input: &SequenceBatch<f64>,
    params: &PrfParams,
) -> Result<(SequenceBatch<f64>, SequenceBatch<Complex64>)> {
    params.validate()?;
    let (steps, batch, channels) = input.shape();
    let (tau, theta, delta) = params.expand(channels)?;
    let mut states = Vec::with_capacity(batch * channels);
    for _ in 0..batch {
        for c in 0..channels {
            states.push(DeployPrfState::new(delta[c], tau[c], theta[c])?);
        }
    }
    let mut spikes = Vec::with_capacity(input.data().len());
    let mut potentials = Vec::with_capacity(input.data().len());
    for t in 0..steps {
        for (i, &c) in input.step(t).iter().enumerate() {
            let (next, s) = prf_deploy_step(states[i], c, delta[i % channels], params.v_th);
            states[i] = next;
            spikes.push(heaviside(s));
            potentials.push(Complex64::new(next.u, next.r));
        }
    }
    Ok((
        SequenceBatch::from_parts(spikes, steps, batch, channels, SeqKind::Spike),
        SequenceBatch::from_parts(potentials, steps, batch, channels, SeqKind::Potential),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neurons::leaky_integrate;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    fn lane(v: &[f64]) -> SequenceBatch<f64> {
        SequenceBatch::from_lane(v.to_vec(), SeqKind::Current).unwrap()
    }

    fn quarter() -> PrfParams {
        PrfParams::new(vec![2.0], vec![FRAC_PI_2], vec![1.0], 1.0).unwrap()
    }

    #[test]
    fn impulse_rotates_by_quarter_turns() {
        let (s, u) = prf_sequential(&lane(&[1.0, 0.0, 0.0, 0.0]), &quarter()).unwrap();
        let re: Vec<f64> = u.data().iter().map(|v| v.re).collect();
        for (a, b) in re.iter().zip([1.0, 0.0, -0.36787944117144233, 0.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        assert_eq!(s.data(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_input_stays_at_rest() {
        let (s, u) = prf_sequential(&lane(&[0.0; 5]), &quarter()).unwrap();
        assert!(s.data().iter().all(|&x| x == 0.0));
        assert!(u.data().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn theta_zero_unit_step_is_reset_free_lif() {
        let tau = 3.7;
        let p = PrfParams::new(vec![tau], vec![0.0], vec![1.0], 1.0).unwrap();
        let x = lane(&[0.4, -1.0, 2.5, 0.3, 0.0, 0.7]);
        let (_, u) = prf_sequential(&x, &p).unwrap();
        let lif = leaky_integrate(&x, &[(-1.0 / tau).exp()]).unwrap();
        for (a, b) in u.data().iter().zip(lif.data()) {
            assert_eq!(a.re, *b);
            assert_eq!(a.im, 0.0);
        }
    }

    #[test]
    fn parallel_and_deploy_agree_with_sequential() {
        let x = lane(&[1.0, 0.0, 0.0, 0.0]);
        let (s0, u0) = prf_sequential(&x, &quarter()).unwrap();
        let (s1, u1) = prf_parallel(&x, &quarter()).unwrap();
        let (s2, u2) = prf_deploy_run(&x, &quarter()).unwrap();
        assert_eq!(s0, s1);
        assert_eq!(s0, s2);
        for ((a, b), c) in u0.data().iter().zip(u1.data()).zip(u2.data()) {
            assert!((a - b).norm() <= 1e-9);
            assert!((a - c).norm() <= 1e-12);
        }
    }

    #[test]
    fn merged_coefficients() {
        let st = DeployPrfState::new(1.0, 2.0, FRAC_PI_2).unwrap();
        assert_abs_diff_eq!(st.phi_re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(st.phi_im, 0.6065306597126334, epsilon = 1e-15);

        let st = DeployPrfState::new(0.5, 4.0, 0.0).unwrap();
        assert_eq!(st.phi_im, 0.0);
        // Imaginary part is never excited: plain leaky integration.
        let (st, _) = prf_deploy_step(st, 1.0, 0.5, 1.0);
        let (st, _) = prf_deploy_step(st, 1.0, 0.5, 1.0);
        assert_eq!(st.r, 0.0);
        assert_abs_diff_eq!(st.u, 0.5 * (-0.125f64).exp() + 0.5, epsilon = 1e-15);
    }

    #[test]
    fn rejects_non_decaying_params() {
        assert!(PrfParams::new(vec![1.0], vec![0.0], vec![1.0], 1.0).is_err());
        assert!(PrfParams::new(vec![2.0], vec![0.0], vec![1.0], 0.0).is_err());
        assert!(DeployPrfState::new(1.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn oscillation_angle_is_delta_theta() {
        let (d, theta) = (0.25, 1.2);
        let a = prf_decay(d, 10.0, theta);
        assert_abs_diff_eq!(a.arg(), d * theta, epsilon = 1e-15);
    }
}
