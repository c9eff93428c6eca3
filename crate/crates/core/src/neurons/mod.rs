//! Neuron dynamics in sequential, parallel and deployment forms.
//!
//! Every neuron uses soft reset to zero (subtract `V_th` after a spike) and
//! fires on `u ≥ V_th`; the parallel forms share that tie rule so spike
//! trains match the sequential ones exactly.

mod alif;
mod lif;
mod prf;
mod spatial;

pub use alif::{alif_sequential, AlifParams};
pub use lif::{
    decoupled_reset_scan, leaky_integrate, lif_parallel, lif_sequential, LifParallelOutput,
    LifParams,
};
pub use prf::{
    prf_deploy_run, prf_deploy_step, prf_parallel, prf_sequential, DeployPrfState, PrfParams,
};
pub use spatial::{fold_alpha_into_linear, spatial_neuron};

use crate::error::{Error, Result};

/// Expand a per-channel parameter: one value broadcasts to every channel.
pub(crate) fn per_channel(values: &[f64], channels: usize, name: &str) -> Result<Vec<f64>> {
    match values.len() {
        1 => Ok(vec![values[0]; channels]),
        n if n == channels => Ok(values.to_vec()),
        n => Err(Error::shape(format!(
            "{name} has {n} entries for {channels} channels"
        ))),
    }
}

#[inline]
pub(crate) fn heaviside(x: bool) -> f64 {
    if x {
        1.0
    } else {
        0.0
    }
}
