use super::heaviside;
use crate::error::{Error, Result};
use crate::seqcore::{SeqKind, SequenceBatch};

/// Adaptive-threshold LIF without membrane reset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlifParams {
    pub v_th: f64,
    /// Coupling of the adaptation variable into the threshold.
    pub beta: f64,
    /// Per-step decay of the adaptation variable.
    pub rho: f64,
}

impl AlifParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_th > 0.0) {
            return Err(Error::param("threshold must be positive"));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::param(format!("rho {} outside (0, 1]", self.rho)));
        }
        Ok(())
    }
}

/// `u_t = β_lif·u_{t−1} + c_t`, `z_t = [u_t ≥ V_th + β·a_t]`, `a_{t+1} = ρ·a_t + z_t`.
pub fn alif_sequential(
    input: &SequenceBatch<f64>,
    params: &AlifParams,
    beta_lif: f64,
) -> Result<SequenceBatch<f64>> {
    params.validate()?;
    let (steps, batch, channels) = input.shape();
    let width = batch * channels;
    let mut u = vec![0.0; width];
    let mut a = vec![0.0; width];
    let mut out = Vec::with_capacity(input.data().len());
    for t in 0..steps {
        for (i, &c) in input.step(t).iter().enumerate() {
            u[i] = beta_lif * u[i] + c;
            let z = heaviside(u[i] >= params.v_th + params.beta * a[i]);
            a[i] = params.rho * a[i] + z;
            out.push(z);
        }
    }
    Ok(SequenceBatch::from_parts(
        out,
        steps,
        batch,
        channels,
        SeqKind::Spike,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neurons::{lif_sequential, LifParams};

    fn lane(v: &[f64]) -> SequenceBatch<f64> {
        SequenceBatch::from_lane(v.to_vec(), SeqKind::Current).unwrap()
    }

    const UNIT_RHO: AlifParams = AlifParams {
        v_th: 1.0,
        beta: 0.5,
        rho: 1.0,
    };

    #[test]
    fn single_spike_matches_soft_reset_lif() {
        let z = alif_sequential(&lane(&[2.0, 0.0, 0.0]), &UNIT_RHO, 0.5).unwrap();
        assert_eq!(z.data(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn silent_without_input() {
        let z = alif_sequential(&lane(&[0.0; 4]), &UNIT_RHO, 0.5).unwrap();
        assert!(z.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unit_rho_undercounts_decayed_resets() {
        // u = (1, 1.5, 1.75); thresholds with rho = 1 are (1, 1.5, 2.0), so
        // the third step stays silent while soft-reset LIF fires every step.
        let x = lane(&[1.0, 1.0, 1.0]);
        let z = alif_sequential(&x, &UNIT_RHO, 0.5).unwrap();
        assert_eq!(z.data(), &[1.0, 1.0, 0.0]);
        let (s, _) = lif_sequential(&x, &LifParams::new(vec![0.5], 1.0).unwrap()).unwrap();
        assert_eq!(s.data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn adaptation_decaying_like_membrane_matches_lif() {
        // rho = beta_lif and coupling V_th * beta_lif reproduce the soft reset.
        let x = lane(&[1.0, 1.0, 1.0]);
        let p = AlifParams {
            v_th: 1.0,
            beta: 0.5,
            rho: 0.5,
        };
        let z = alif_sequential(&x, &p, 0.5).unwrap();
        assert_eq!(z.data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn rho_is_validated() {
        let p = AlifParams {
            v_th: 1.0,
            beta: 0.5,
            rho: 1.5,
        };
        assert!(alif_sequential(&lane(&[1.0]), &p, 0.5).is_err());
    }
}
