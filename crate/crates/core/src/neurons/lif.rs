use super::{heaviside, per_channel};
use crate::error::{Error, Result};
use crate::seqcore::{build_lif_kernel, causal_convolve, SeqKind, SequenceBatch};

/// Leaky integrate-and-fire parameters. Reset is soft, to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LifParams {
    /// Per-channel decay `β = 1 − 1/τ`, or a single value for all channels.
    pub beta: Vec<f64>,
    pub v_th: f64,
}

impl LifParams {
    pub fn new(beta: Vec<f64>, v_th: f64) -> Result<Self> {
        let p = Self { beta, v_th };
        p.validate()?;
        Ok(p)
    }

    /// From a membrane time constant `τ > 1`.
    pub fn from_tau(tau: &[f64], v_th: f64) -> Result<Self> {
        Self::new(tau.iter().map(|t| 1.0 - 1.0 / t).collect(), v_th)
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta.is_empty() {
            return Err(Error::param("beta must not be empty"));
        }
        if let Some(b) = self.beta.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
            return Err(Error::param(format!("beta {b} outside (0, 1)")));
        }
        if !(self.v_th > 0.0) {
            return Err(Error::param(format!(
                "threshold {} must be positive",
                self.v_th
            )));
        }
        Ok(())
    }
}

/// Step-by-step LIF: `u_t = β(u_{t−1} − V_th·s_{t−1}) + c_t`, `s_t = [u_t ≥ V_th]`.
///
/// Returns spikes and the pre-reset membrane `u_t`.
pub fn lif_sequential(
    input: &SequenceBatch<f64>,
    params: &LifParams,
) -> Result<(SequenceBatch<f64>, SequenceBatch<f64>)> {
    params.validate()?;
    let (steps, batch, channels) = input.shape();
    let beta = per_channel(&params.beta, channels, "beta")?;
    let width = batch * channels;
    let mut u = vec![0.0; width];
    let mut s = vec![0.0; width];
    let mut spikes = Vec::with_capacity(input.data().len());
    let mut potentials = Vec::with_capacity(input.data().len());
    for t in 0..steps {
        for (i, &c) in input.step(t).iter().enumerate() {
            let ui = beta[i % channels] * (u[i] - params.v_th * s[i]) + c;
            u[i] = ui;
            s[i] = heaviside(ui >= params.v_th);
        }
        spikes.extend_from_slice(&s);
        potentials.extend_from_slice(&u);
    }
    Ok((
        SequenceBatch::from_parts(spikes, steps, batch, channels, SeqKind::Spike),
        SequenceBatch::from_parts(potentials, steps, batch, channels, SeqKind::Potential),
    ))
}

/// Reset-free leaky integration `u_t = β·u_{t−1} + c_t`, evaluated step by step.
pub fn leaky_integrate(input: &SequenceBatch<f64>, beta: &[f64]) -> Result<SequenceBatch<f64>> {
    let (steps, batch, channels) = input.shape();
    let beta = per_channel(beta, channels, "beta")?;
    let width = batch * channels;
    let mut u = vec![0.0; width];
    let mut out = Vec::with_capacity(input.data().len());
    for t in 0..steps {
        for (i, &c) in input.step(t).iter().enumerate() {
            u[i] = beta[i % channels] * u[i] + c;
        }
        out.extend_from_slice(&u);
    }
    Ok(SequenceBatch::from_parts(
        out,
        steps,
        batch,
        channels,
        SeqKind::Potential,
    ))
}

/// Scan the dynamic threshold `d_t` from reset-free potentials `u′_t`.
///
/// Per lane: `d_1 = V_th`; after each step the accumulated reset `A` gains one
/// if `u′_t ≥ d_t`, decays by `β`, and `d_{t+1} = V_th·A + V_th`.
pub fn decoupled_reset_scan(
    potentials: &SequenceBatch<f64>,
    v_th: f64,
    beta: &[f64],
) -> Result<SequenceBatch<f64>> {
    let (steps, batch, channels) = potentials.shape();
    let beta = per_channel(beta, channels, "beta")?;
    let width = batch * channels;
    let mut acc = vec![0.0; width];
    let mut current = vec![v_th; width];
    let mut out = Vec::with_capacity(potentials.data().len());
    for t in 0..steps {
        out.extend_from_slice(&current);
        for (i, &u) in potentials.step(t).iter().enumerate() {
            if u >= current[i] {
                acc[i] += 1.0;
            }
            acc[i] *= beta[i % channels];
            current[i] = v_th * acc[i] + v_th;
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

#[derive(Debug, Clone)]
pub struct LifParallelOutput {
    pub spikes: SequenceBatch<f64>,
    /// Reset-free potentials `U′ = C ∗ K`.
    pub uprime: SequenceBatch<f64>,
    /// Decoupled reset thresholds `D`.
    pub reset: SequenceBatch<f64>,
    pub v_th: f64,
}

impl LifParallelOutput {
    /// Recover the sequential pre-reset membrane: `u_t = u′_t − d_t + V_th`.
    pub fn membrane(&self) -> SequenceBatch<f64> {
        let data = self
            .uprime
            .data()
            .iter()
            .zip(self.reset.data())
            .map(|(u, d)| u - d + self.v_th)
            .collect();
        let (t, b, n) = self.uprime.shape();
        SequenceBatch::from_parts(data, t, b, n, SeqKind::Potential)
    }
}

/// Parallel LIF: FFT convolution for `U′`, a linear scan for `D`, then `S = [U′ ≥ D]`.
pub fn lif_parallel(input: &SequenceBatch<f64>, params: &LifParams) -> Result<LifParallelOutput> {
    params.validate()?;
    let beta = per_channel(&params.beta, input.channels(), "beta")?;
    let kernel = build_lif_kernel(&beta, input.steps())?;
    let uprime = causal_convolve(input, &kernel)?;
    let reset = decoupled_reset_scan(&uprime, params.v_th, &beta)?;
    let spikes = uprime
        .data()
        .iter()
        .zip(reset.data())
        .map(|(u, d)| heaviside(u >= d))
        .collect();
    let (t, b, n) = input.shape();
    Ok(LifParallelOutput {
        spikes: SequenceBatch::from_parts(spikes, t, b, n, SeqKind::Spike),
        uprime,
        reset,
        v_th: params.v_th,
    })
}
