use super::per_channel;
use crate::error::{Error, Result};
use crate::seqcore::SequenceBatch;

/// Stateless threshold unit: `out_t = α_c · [c_t ≥ V_th]`.
///
/// This is the `τ → 1⁺` limit of LIF, where the membrane forgets everything
/// but the current input.
pub fn spatial_neuron(
    input: &SequenceBatch<f64>,
    v_th: f64,
    alpha: &[f64],
) -> Result<SequenceBatch<f64>> {
    let (steps, batch, channels) = input.shape();
    let alpha = per_channel(alpha, channels, "alpha")?;
    if let Some(a) = alpha.iter().find(|a| !(**a > 0.0)) {
        return Err(Error::param(format!("amplitude {a} must be positive")));
    }
    let data = input
        .data()
        .iter()
        .enumerate()
        .map(|(i, &c)| if c >= v_th { alpha[i % channels] } else { 0.0 })
        .collect();
    SequenceBatch::gated_spikes(data, steps, batch, channels, &alpha)
}

/// Merge a spike amplitude into the following weight matrix (`in × out`,
/// row-major): `(α ⊙ s)·W = s·(diag(α)·W)`.
pub fn fold_alpha_into_linear(alpha: &[f64], weight: &[f64], out_dim: usize) -> Result<Vec<f64>> {
    if weight.len() != alpha.len() * out_dim {
        return Err(Error::shape("weight must be (alpha.len() x out_dim)"));
    }
    Ok(weight
        .chunks(out_dim)
        .zip(alpha)
        .flat_map(|(row, &a)| row.iter().map(move |w| a * w))
        .collect())
}
