//! Run configuration for the command-line tool, stored as TOML.
//!
//! Every section is optional and falls back to its defaults; unknown keys are
//! rejected. See `configs/default.toml` in the repository for the full schema.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{AlifCoupling, EnergyModel};
use crate::bench::BenchConfig;
use crate::equiv::{EquivConfig, NeuronChoice};
use crate::error::{Error, Result};
use crate::traingrad::{Architecture, BlockMode, GradCheckConfig, NeuronKind, TrainConfig};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub simulate: SimulateConfig,
    pub equiv: EquivSection,
    pub bench: BenchSection,
    pub train: TrainSection,
    pub freq: FreqConfig,
    pub variance: VarianceConfig,
    pub energy: EnergyConfig,
    pub stats: StatsConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.simulate.validate()?;
        self.equiv.suite.validate()?;
        check(
            self.equiv.identity_cases > 0 && self.equiv.identity_max_steps > 0,
            "equiv: identity_cases and identity_max_steps must be >= 1",
        )?;
        self.bench.bench.validate()?;
        self.train.validate()?;
        self.freq.validate()?;
        self.variance.validate()?;
        self.energy
            .model
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.stats.validate()
    }
}

fn check(ok: bool, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(msg.to_string()))
    }
}

/// One neuron layer on random input, compared across its forms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub neuron: NeuronChoice,
    pub steps: usize,
    pub batch: usize,
    pub channels: usize,
    pub input_scale: f64,
    pub v_th: f64,
    pub beta: f64,
    pub tau: f64,
    pub theta: f64,
    pub delta: f64,
    pub tolerance: f64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            neuron: NeuronChoice::Prf,
            steps: 256,
            batch: 2,
            channels: 4,
            input_scale: 1.0,
            v_th: 1.0,
            beta: 0.9,
            tau: 4.0,
            theta: 0.5,
            delta: 0.5,
            tolerance: 1e-9,
        }
    }
}

impl SimulateConfig {
    fn validate(&self) -> Result<()> {
        check(
            self.steps > 0 && self.batch > 0 && self.channels > 0,
            "simulate: shape must be >= 1",
        )?;
        check(self.v_th > 0.0, "simulate: v_th must be positive")?;
        check(
            self.beta > 0.0 && self.beta < 1.0,
            "simulate: beta outside (0, 1)",
        )?;
        check(
            self.delta > 0.0 && self.tau > self.delta,
            "simulate: need 0 < delta < tau",
        )?;
        check(
            self.theta.is_finite() && self.input_scale.is_finite(),
            "simulate: values must be finite",
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EquivCheck {
    Lif,
    Prf,
    /// Soft-reset LIF against reset-free adaptive LIF.
    AlifIdentity,
    /// PRF with `Δ = 1`, `θ = 0` against reset-free LIF.
    PrfLifIdentity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EquivSection {
    pub checks: Vec<EquivCheck>,
    pub suite: EquivConfig,
    /// Random cases for the two identities.
    pub identity_cases: usize,
    pub identity_max_steps: usize,
    pub alif_coupling: AlifCoupling,
}

impl Default for EquivSection {
    fn default() -> Self {
        Self {
            checks: vec![
                EquivCheck::Lif,
                EquivCheck::Prf,
                EquivCheck::AlifIdentity,
                EquivCheck::PrfLifIdentity,
            ],
            suite: EquivConfig::default(),
            identity_cases: 1000,
            identity_max_steps: 256,
            alif_coupling: AlifCoupling::UnitDecay,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSection {
    #[serde(flatten)]
    pub bench: BenchConfig,
    /// Required sequential/parallel ratio at `check_len`.
    pub min_speedup: f64,
    pub check_len: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            bench: BenchConfig::default(),
            min_speedup: 2.0,
            check_len: 1024,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Classify whether a single impulse falls in the first or second half.
    Impulse,
    Smnist,
    Psmnist,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArchChoice {
    Prf,
    Lif,
    Sdtcm,
    SdtcmBidirectional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub task: Task,
    pub architecture: ArchChoice,
    pub lif_beta: f64,
    pub train_samples: usize,
    pub test_samples: usize,
    /// Sequence length of the impulse task.
    pub steps: usize,
    pub permute_seed: u64,
    /// Pass when the best test accuracy reaches this.
    pub min_test_accuracy: Option<f64>,
    /// Fail when the best test accuracy exceeds this.
    pub max_test_accuracy: Option<f64>,
    pub require_monotone_loss: bool,
    pub gradcheck: Option<GradCheckConfig>,
    pub max_rel_error: f64,
    pub hyper: TrainConfig,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            task: Task::Impulse,
            architecture: ArchChoice::Prf,
            lif_beta: 0.5,
            train_samples: 512,
            test_samples: 256,
            steps: 256,
            permute_seed: 0,
            min_test_accuracy: None,
            max_test_accuracy: None,
            require_monotone_loss: false,
            gradcheck: None,
            max_rel_error: 1e-5,
            hyper: TrainConfig::default(),
        }
    }
}

impl TrainSection {
    pub fn architecture(&self) -> Architecture {
        match self.architecture {
            ArchChoice::Prf => Architecture::FeedForward(NeuronKind::Prf),
            ArchChoice::Lif => Architecture::FeedForward(NeuronKind::Lif {
                beta: self.lif_beta,
            }),
            ArchChoice::Sdtcm => Architecture::SdTcm(BlockMode::Causal),
            ArchChoice::SdtcmBidirectional => Architecture::SdTcm(BlockMode::Bidirectional),
        }
    }

    fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        check(
            self.lif_beta > 0.0 && self.lif_beta < 1.0,
            "train: lif_beta outside (0, 1)",
        )?;
        check(
            self.train_samples > 0 && self.steps > 0,
            "train: samples and steps must be >= 1",
        )?;
        for a in [self.min_test_accuracy, self.max_test_accuracy]
            .into_iter()
            .flatten()
        {
            check(
                (0.0..=1.0).contains(&a),
                "train: accuracy bounds must lie in [0, 1]",
            )?;
        }
        check(
            self.max_rel_error > 0.0,
            "train: max_rel_error must be positive",
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FreqConfig {
    pub tau: f64,
    pub theta: f64,
    pub delta: f64,
    /// Grid `ω_k = θ·k/half_points`, `k = 0..=2·half_points`.
    pub half_points: usize,
    pub steps: usize,
    /// Allowed `|peak − τ|/τ`.
    pub tolerance: f64,
}

impl Default for FreqConfig {
    fn default() -> Self {
        Self {
            tau: 2.0,
            theta: 0.5,
            delta: 0.1,
            half_points: 50,
            steps: 4096,
            tolerance: 0.1,
        }
    }
}

impl FreqConfig {
    pub fn omegas(&self) -> Vec<f64> {
        (0..=2 * self.half_points)
            .map(|k| self.theta * k as f64 / self.half_points as f64)
            .collect()
    }

    fn validate(&self) -> Result<()> {
        check(
            self.theta > 0.0 && self.theta.is_finite(),
            "freq: theta must be positive",
        )?;
        check(
            self.delta > 0.0 && self.tau > self.delta,
            "freq: need 0 < delta < tau",
        )?;
        check(
            self.half_points > 0 && self.steps >= 4,
            "freq: grid and drive must be non-trivial",
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VarianceConfig {
    pub tau: f64,
    pub delta: f64,
    pub sigma: f64,
    pub trials: usize,
    /// Defaults to the first `T` with `e^{−2ΔT/τ} < 1e−3`.
    pub steps: Option<usize>,
    pub max_z: f64,
    /// `Δ/τ` for the small-step approximation check.
    pub small_ratio: f64,
    pub small_tolerance: f64,
}

impl Default for VarianceConfig {
    fn default() -> Self {
        Self {
            tau: 4.0,
            delta: 0.5,
            sigma: 1.0,
            trials: 100_000,
            steps: None,
            max_z: 3.0,
            small_ratio: 0.01,
            small_tolerance: 0.01,
        }
    }
}

impl VarianceConfig {
    fn validate(&self) -> Result<()> {
        check(
            self.delta > 0.0 && self.tau > self.delta,
            "variance: need 0 < delta < tau",
        )?;
        check(
            self.sigma >= 0.0 && self.trials >= 2,
            "variance: sigma >= 0 and trials >= 2",
        )?;
        check(
            self.small_ratio > 0.0 && self.small_ratio < 1.0,
            "variance: small_ratio outside (0, 1)",
        )?;
        check(
            self.max_z > 0.0 && self.small_tolerance > 0.0,
            "variance: tolerances must be positive",
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyConfig {
    pub model: EnergyModel,
    pub state: usize,
    pub seq_len: usize,
    pub max_ratio: f64,
    /// Published ratio the estimate is compared against.
    pub reference_ratio: f64,
    pub reference_factor: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            model: EnergyModel::default(),
            state: 64,
            seq_len: 2000,
            max_ratio: 0.05,
            reference_ratio: 0.075 / 5.104,
            reference_factor: 3.0,
        }
    }
}

/// Firing rates of a model on task data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StatsConfig {
    pub samples: usize,
    /// Parameters from a checkpoint; a fresh model otherwise.
    pub checkpoint: Option<String>,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self {
            samples: 64,
            checkpoint: None,
        }
    }
}

impl StatsConfig {
    fn validate(&self) -> Result<()> {
        check(self.samples > 0, "stats: samples must be >= 1")
    }
}
