use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neurons::{
    alif_sequential, leaky_integrate, lif_sequential, prf_sequential, AlifParams, LifParams,
    PrfParams,
};
use crate::seqcore::{prf_decay, SeqKind, SequenceBatch};

/// Adaptation settings for the LIF/ALIF comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlifCoupling {
    /// `V_th = 1`, `ρ = 1`, coupling `β = β_lif`.
    UnitDecay,
    /// `V_th = 1`, `ρ = β_lif`, coupling `β = β_lif`: the adaptation trace decays
    /// like the LIF membrane.
    MatchedDecay,
}

/// `(case seed, β, input, LIF spikes, ALIF spikes)`.
pub type Counterexample = (u64, f64, Vec<f64>, Vec<f64>, Vec<f64>);

#[derive(Debug, Clone, PartialEq)]
pub struct AlifIdentityReport {
    pub cases: usize,
    pub mismatched_cases: usize,
    /// First mismatch found.
    pub counterexample: Option<Counterexample>,
}

impl AlifIdentityReport {
    pub fn passed(&self) -> bool {
        self.mismatched_cases == 0
    }
}

/// Compare soft-reset LIF against reset-free ALIF on random single-lane inputs
/// (`T ≤ max_steps`, `β ∈ (0.05, 0.95)`, `c ~ N(0, 1)`).
pub fn check_alif_identity(
    cases: usize,
    max_steps: usize,
    coupling: AlifCoupling,
    seed: u64,
) -> Result<AlifIdentityReport> {
    if max_steps == 0 {
        return Err(Error::param("max_steps must be >= 1"));
    }
    let mut mismatched = 0;
    let mut counterexample = None;
    for case in 0..cases as u64 {
        let case_seed = seed.wrapping_add(case);
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(case_seed);
        let steps = rng.gen_range(1..=max_steps);
        let beta = rng.gen_range(0.05..0.95);
        let input: Vec<f64> = (0..steps).map(|_| rng.sample(StandardNormal)).collect();
        let x = SequenceBatch::from_lane(input.clone(), SeqKind::Current)?;
        let (lif, _) = lif_sequential(&x, &LifParams::new(vec![beta], 1.0)?)?;
        let rho = match coupling {
            AlifCoupling::UnitDecay => 1.0,
            AlifCoupling::MatchedDecay => beta,
        };
        let alif = alif_sequential(
            &x,
            &AlifParams {
                v_th: 1.0,
                beta,
                rho,
            },
            beta,
        )?;
        if lif.data() != alif.data() {
            mismatched += 1;
            counterexample.get_or_insert_with(|| {
                (
                    case_seed,
                    beta,
                    input,
                    lif.data().to_vec(),
                    alif.data().to_vec(),
                )
            });
        }
    }
    Ok(AlifIdentityReport {
        cases,
        mismatched_cases: mismatched,
        counterexample,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrfIdentityReport {
    pub cases: usize,
    /// Largest `|ℜ{ũ_t} − u_t|` seen; zero when the arithmetic is shared.
    pub max_abs_diff: f64,
    pub max_imag: f64,
}

/// PRF with `Δ = 1`, `θ = 0` against reset-free LIF with `β = e^{−1/τ}`.
pub fn check_prf_lif_identity(
    cases: usize,
    max_steps: usize,
    seed: u64,
) -> Result<PrfIdentityReport> {
    let mut max_abs_diff: f64 = 0.0;
    let mut max_imag: f64 = 0.0;
    for case in 0..cases as u64 {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed.wrapping_add(case));
        let steps = rng.gen_range(1..=max_steps.max(1));
        let channels = rng.gen_range(1..=4);
        let tau: Vec<f64> = (0..channels).map(|_| rng.gen_range(1.05..100.0)).collect();
        let data: Vec<f64> = (0..steps * channels)
            .map(|_| rng.sample(StandardNormal))
            .collect();
        let x = SequenceBatch::new(data, steps, 1, channels, SeqKind::Current)?;
        let params = PrfParams::new(tau.clone(), vec![0.0], vec![1.0], 1.0)?;
        let (_, u) = prf_sequential(&x, &params)?;
        let beta: Vec<f64> = tau.iter().map(|t| (-1.0 / t).exp()).collect();
        let lif = leaky_integrate(&x, &beta)?;
        for (a, b) in u.data().iter().zip(lif.data()) {
            max_abs_diff = max_abs_diff.max((a.re - b).abs());
            max_imag = max_imag.max(a.im.abs());
        }
    }
    Ok(PrfIdentityReport {
        cases,
        max_abs_diff,
        max_imag,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceReport {
    pub trials: usize,
    pub steps: usize,
    pub empirical_var: f64,
    /// `Δ²σ²(1 − e^{−2ΔT/τ}) / (1 − e^{−2Δ/τ})`, the variance after `T` steps.
    pub finite_var: f64,
    /// `Δ²σ² / (1 − e^{−2Δ/τ})`, the stationary variance.
    pub exact_var: f64,
    /// `τΔσ²/2`.
    pub approx_var: f64,
    /// Standard error of a sample variance, `exact·√(2/(n−1))`.
    pub standard_error: f64,
}

impl VarianceReport {
    /// Empirical deviation from the stationary variance in standard errors.
    pub fn z_score(&self) -> f64 {
        if self.standard_error == 0.0 {
            if self.empirical_var == self.exact_var {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.empirical_var - self.exact_var).abs() / self.standard_error
        }
    }
}

/// Smallest `T` with `e^{−2ΔT/τ} < 1e−3`.
pub fn settle_steps(delta: f64, tau: f64) -> usize {
    (tau * 1000f64.ln() / (2.0 * delta)).floor() as usize + 1
}

/// Monte-Carlo variance of `ℜ{ũ_T}` for `θ = 0` and i.i.d. `c_t ~ N(0, σ²)`.
///
/// Trial `i` draws from its own generator seeded with `seed + i`, so results
/// do not depend on thread scheduling.
pub fn check_stationary_variance(
    tau: f64,
    delta: f64,
    sigma: f64,
    trials: usize,
    steps: usize,
    seed: u64,
) -> Result<VarianceReport> {
    if trials < 2 {
        return Err(Error::param("need at least two trials"));
    }
    if !(sigma >= 0.0) {
        return Err(Error::param("sigma must be non-negative"));
    }
    PrfParams::new(vec![tau], vec![0.0], vec![delta], 1.0)?;
    let a = prf_decay(delta, tau, 0.0).re;
    let samples: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed.wrapping_add(i));
            let normal = Normal::new(0.0, sigma).expect("sigma checked");
            let mut u = 0.0;
            for _ in 0..steps {
                u = a * u + delta * normal.sample(&mut rng);
            }
            u
        })
        .collect();
    let n = trials as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let empirical_var = samples.iter().map(|u| (u - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let decay = (-2.0 * delta / tau).exp();
    let exact_var = delta * delta * sigma * sigma / (1.0 - decay);
    let finite_var = exact_var * (1.0 - decay.powi(steps as i32));
    Ok(VarianceReport {
        trials,
        steps,
        empirical_var,
        finite_var,
        exact_var,
        approx_var: tau * delta * sigma * sigma / 2.0,
        standard_error: exact_var * (2.0 / (n - 1.0)).sqrt(),
    })
}
