//! Randomized sequential-vs-parallel agreement suites.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neurons::{
    decoupled_reset_scan, lif_parallel, lif_sequential, prf_deploy_run, prf_parallel,
    prf_sequential, LifParams, PrfParams,
};
use crate::seqcore::{
    build_lif_kernel, build_prf_kernel, causal_convolve, Scalar, SeqKind, SequenceBatch,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeuronChoice {
    Lif,
    Prf,
}

/// Deliberate defects for checking that the suite can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    #[default]
    None,
    /// The parallel path convolves with a kernel delayed by one step.
    ShiftedKernel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EquivConfig {
    pub cases: usize,
    pub max_steps: usize,
    pub max_batch: usize,
    pub max_channels: usize,
    /// Allowed `max|a − b| / max(1, max|b|)` per case.
    pub tolerance: f64,
    pub fault: Fault,
}

impl Default for EquivConfig {
    fn default() -> Self {
        Self {
            cases: 1000,
            max_steps: 512,
            max_batch: 8,
            max_channels: 32,
            tolerance: 1e-9,
            fault: Fault::None,
        }
    }
}

impl EquivConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cases == 0 || self.max_steps == 0 || self.max_batch == 0 || self.max_channels == 0 {
            return Err(Error::Config("equivalence limits must be >= 1".into()));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::Config("tolerance must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivCase {
    pub case: usize,
    /// Replays this case via [`run_equivalence_case`].
    pub seed: u64,
    pub steps: usize,
    pub batch: usize,
    pub channels: usize,
    pub spike_mismatches: usize,
    pub membrane_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivReport {
    pub neuron: NeuronChoice,
    pub cases: usize,
    pub spike_mismatches: usize,
    pub max_membrane_delta: f64,
    pub failing_seeds: Vec<u64>,
    pub passed: bool,
    pub per_case: Vec<EquivCase>,
}

fn mismatches(a: &[f64], b: &[f64]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

fn delta<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    let scale = b.iter().map(|v| v.modulus()).fold(1.0, f64::max);
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x + y * T::from_real(-1.0)).modulus())
        .fold(0.0, f64::max)
        / scale
}

fn lif_case(x: &SequenceBatch<f64>, beta: Vec<f64>, fault: Fault) -> Result<(usize, f64)> {
    let params = LifParams::new(beta, 1.0)?;
    let (s_seq, u_seq) = lif_sequential(x, &params)?;
    let (spikes, membrane) = match fault {
        Fault::None => {
            let out = lif_parallel(x, &params)?;
            (out.spikes.clone(), out.membrane())
        }
        Fault::ShiftedKernel => {
            let kernel = build_lif_kernel(&params.beta, x.steps())?.shifted_by_one();
            let up = causal_convolve(x, &kernel)?;
            let d = decoupled_reset_scan(&up, 1.0, &params.beta)?;
            let s: Vec<f64> = up
                .data()
                .iter()
                .zip(d.data())
                .map(|(u, d)| f64::from(u8::from(u >= d)))
                .collect();
            let m: Vec<f64> = up
                .data()
                .iter()
                .zip(d.data())
                .map(|(u, d)| u - d + 1.0)
                .collect();
            let (t, b, n) = x.shape();
            (
                SequenceBatch::new(s, t, b, n, SeqKind::Spike)?,
                SequenceBatch::new(m, t, b, n, SeqKind::Potential)?,
            )
        }
    };
    Ok((
        mismatches(spikes.data(), s_seq.data()),
        delta(membrane.data(), u_seq.data()),
    ))
}

fn prf_case(x: &SequenceBatch<f64>, params: PrfParams, fault: Fault) -> Result<(usize, f64)> {
    let (s_seq, u_seq) = prf_sequential(x, &params)?;
    let (s_par, u_par) = match fault {
        Fault::None => prf_parallel(x, &params)?,
        Fault::ShiftedKernel => {
            let (tau, theta, delta) = params.expand(x.channels())?;
            let kernel = build_prf_kernel(&delta, &tau, &theta, x.steps())?.shifted_by_one();
            let u = causal_convolve(x, &kernel)?;
            let s = u.map(SeqKind::Spike, |v| f64::from(u8::from(v.re >= params.v_th)));
            (s, u)
        }
    };
    let (s_dep, u_dep) = prf_deploy_run(x, &params)?;
    let mis = mismatches(s_par.data(), s_seq.data()) + mismatches(s_dep.data(), s_seq.data());
    let d = delta::<Complex64>(u_par.data(), u_seq.data())
        .max(delta::<Complex64>(u_dep.data(), u_seq.data()));
    Ok((mis, d))
}

/// Run the case drawn from `seed`: `T ≤ max_steps`, `B ≤ max_batch`,
/// `N ≤ max_channels`, `c ~ N(0, 1)`, `V_th = 1`. LIF draws `β ∈ (0.05, 0.95)`
/// per channel; PRF draws `Δ` log-uniform in `[0.05, 1]`, `τ ∈ (1.1Δ, 100Δ)`
/// and `θ ∈ [0, π]` per channel.
pub fn run_equivalence_case(
    neuron: NeuronChoice,
    seed: u64,
    config: &EquivConfig,
) -> Result<EquivCase> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let steps = rng.gen_range(1..=config.max_steps);
    let batch = rng.gen_range(1..=config.max_batch);
    let channels = rng.gen_range(1..=config.max_channels);
    let data: Vec<f64> = (0..steps * batch * channels)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    let x = SequenceBatch::new(data, steps, batch, channels, SeqKind::Current)?;
    let (spike_mismatches, membrane_delta) = match neuron {
        NeuronChoice::Lif => {
            let beta = (0..channels).map(|_| rng.gen_range(0.05..0.95)).collect();
            lif_case(&x, beta, config.fault)?
        }
        NeuronChoice::Prf => {
            let delta: Vec<f64> = (0..channels)
                .map(|_| (rng.gen_range(0.05f64.ln()..=0.0)).exp())
                .collect();
            let tau = delta
                .iter()
                .map(|d| d * rng.gen_range(1.1..100.0))
                .collect();
            let theta = (0..channels)
                .map(|_| rng.gen_range(0.0..=std::f64::consts::PI))
                .collect();
            prf_case(&x, PrfParams::new(tau, theta, delta, 1.0)?, config.fault)?
        }
    };
    Ok(EquivCase {
        case: 0,
        seed,
        steps,
        batch,
        channels,
        spike_mismatches,
        membrane_delta,
    })
}

/// Case `i` uses seed `seed + i`. The report depends only on the inputs.
pub fn run_equivalence_suite(
    neuron: NeuronChoice,
    config: &EquivConfig,
    seed: u64,
) -> Result<EquivReport> {
    config.validate()?;
    let per_case = (0..config.cases)
        .into_par_iter()
        .map(|i| {
            run_equivalence_case(neuron, seed.wrapping_add(i as u64), config)
                .map(|c| EquivCase { case: i, ..c })
        })
        .collect::<Result<Vec<_>>>()?;
    let failing_seeds: Vec<u64> = per_case
        .iter()
        .filter(|c| c.spike_mismatches > 0 || !(c.membrane_delta <= config.tolerance))
        .map(|c| c.seed)
        .collect();
    Ok(EquivReport {
        neuron,
        cases: config.cases,
        spike_mismatches: per_case.iter().map(|c| c.spike_mismatches).sum(),
        max_membrane_delta: per_case
            .iter()
            .map(|c| c.membrane_delta)
            .fold(0.0, f64::max),
        passed: failing_seeds.is_empty(),
        failing_seeds,
        per_case,
    })
}
