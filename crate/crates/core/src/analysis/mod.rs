//! Numerical checks of the neuron models' analytical properties, plus energy
//! and firing-rate accounting.

mod diagnostic;
mod energy;
mod frequency;
mod identities;
mod rates;

pub use diagnostic::kernel_gradient_diagnostic;
pub use energy::{
    estimate_energy, listops_layers, EnergyModel, EnergyReport, LayerEnergy, LayerSpec,
    ModelFamily, LISTOPS_SN_RATES, LISTOPS_TN_RATES,
};
pub use frequency::{
    discrete_gain, frequency_response, simulate_frequency_response, FrequencyResponse,
};
pub use identities::{
    check_alif_identity, check_prf_lif_identity, check_stationary_variance, settle_steps,
    AlifCoupling, AlifIdentityReport, Counterexample, PrfIdentityReport, VarianceReport,
};
pub use rates::{firing_rate_stats, FiringRates};
