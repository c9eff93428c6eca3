use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-layer temporal-neuron firing rates (%) for the ListOps model.
pub const LISTOPS_TN_RATES: [f64; 8] = [0.0, 5.17, 2.50, 2.83, 0.80, 1.17, 3.02, 2.22];
/// Per-layer spatial-neuron firing rates (%) for the ListOps model.
pub const LISTOPS_SN_RATES: [f64; 8] = [9.60, 5.29, 4.51, 2.63, 5.58, 3.57, 9.57, 5.07];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelFamily {
    S4LegS,
    BinaryS4D,
    Gsu,
    Ours,
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "s4legs" | "s4" => Ok(Self::S4LegS),
            "binarys4d" => Ok(Self::BinaryS4D),
            "gsu" => Ok(Self::Gsu),
            "ours" | "prf" | "sdtcm" => Ok(Self::Ours),
            _ => Err(Error::param(format!("unknown model family {s:?}"))),
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Self::S4LegS => "s4-legs",
            Self::BinaryS4D => "binary-s4d",
            Self::Gsu => "gsu",
            Self::Ours => "ours",
        })
    }
}

/// Energy per operation in pJ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyModel {
    pub e_mac: f64,
    pub e_ac: f64,
    pub e_m: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        Self {
            e_mac: 4.6,
            e_ac: 0.9,
            e_m: 3.7,
        }
    }
}

impl EnergyModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.e_mac > 0.0 && self.e_ac > 0.0 && self.e_m > 0.0) {
            return Err(Error::param("energy constants must be positive"));
        }
        if !(self.e_ac < self.e_mac) {
            return Err(Error::param(
                "an accumulate must cost less than a multiply-accumulate",
            ));
        }
        Ok(())
    }
}

/// One block: model width `D`, SSM state size `H`, and the firing rates of
/// its token-mixing and channel-mixing inputs (fractions in `[0, 1]`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub width: usize,
    pub state: usize,
    pub rate_tn: f64,
    pub rate_sn: f64,
}

/// Operation counts for one timestep of one layer.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LayerEnergy {
    pub mac: f64,
    pub ac: f64,
    pub m: f64,
    /// pJ per timestep.
    pub energy_pj: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub family: ModelFamily,
    pub seq_len: usize,
    pub model: EnergyModel,
    pub layers: Vec<LayerEnergy>,
    pub firing_rates: Vec<(f64, f64)>,
    pub total_mj: f64,
}

fn counts(family: ModelFamily, l: &LayerSpec) -> (f64, f64, f64) {
    let d = l.width as f64;
    let h = l.state as f64;
    let ssm = (h * h + d * h) + (h * d + d * d);
    match family {
        ModelFamily::S4LegS => (ssm + 2.0 * d * d + 2.0 * d, 0.0, d),
        ModelFamily::BinaryS4D | ModelFamily::Gsu => (ssm + 2.0 * d, 2.0 * l.rate_sn * d * d, d),
        ModelFamily::Ours => (
            0.0,
            3.0 * d + (l.rate_tn * d * d + d) + (l.rate_sn * d * d + d),
            5.0 * d,
        ),
    }
}

pub fn estimate_energy(
    family: ModelFamily,
    layers: &[LayerSpec],
    seq_len: usize,
    model: &EnergyModel,
) -> Result<EnergyReport> {
    model.validate()?;
    let mut out = Vec::with_capacity(layers.len());
    for l in layers {
        for r in [l.rate_tn, l.rate_sn] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::param(format!("firing rate {r} outside [0, 1]")));
            }
        }
        let (mac, ac, m) = counts(family, l);
        out.push(LayerEnergy {
            mac,
            ac,
            m,
            energy_pj: mac * model.e_mac + ac * model.e_ac + m * model.e_m,
        });
    }
    let total_pj: f64 = out.iter().map(|l| l.energy_pj).sum::<f64>() * seq_len as f64;
    Ok(EnergyReport {
        family,
        seq_len,
        model: *model,
        layers: out,
        firing_rates: layers.iter().map(|l| (l.rate_tn, l.rate_sn)).collect(),
        total_mj: total_pj * 1e-9,
    })
}

/// Eight `D = 128` blocks with the ListOps firing rates and SSM state `H`.
pub fn listops_layers(state: usize) -> Vec<LayerSpec> {
    LISTOPS_TN_RATES
        .iter()
        .zip(LISTOPS_SN_RATES)
        .map(|(&tn, sn)| LayerSpec {
            width: 128,
            state,
            rate_tn: tn / 100.0,
            rate_sn: sn / 100.0,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn layer(r: f64) -> LayerSpec {
        LayerSpec {
            width: 128,
            state: 64,
            rate_tn: r,
            rate_sn: r,
        }
    }

    #[test]
    fn ours_matches_hand_count() {
        let m = EnergyModel::default();
        let r = estimate_energy(ModelFamily::Ours, &[layer(0.0353)], 1, &m).unwrap();
        let d = 128.0;
        let ac = 3.0 * d + 2.0 * (0.0353 * d * d + d);
        assert_eq!(r.layers[0].mac, 0.0);
        assert_relative_eq!(r.layers[0].ac, ac, max_relative = 1e-15);
        assert_eq!(r.layers[0].m, 5.0 * d);
        assert_relative_eq!(
            r.total_mj,
            (ac * 0.9 + 5.0 * d * 3.7) * 1e-9,
            max_relative = 1e-12
        );
    }

    #[test]
    fn silent_channel_mixing_costs_residual_adds_only() {
        let m = EnergyModel::default();
        let silent = LayerSpec {
            rate_sn: 0.0,
            ..layer(0.1)
        };
        let base = LayerSpec {
            rate_sn: 0.0,
            rate_tn: 0.0,
            ..layer(0.0)
        };
        let a = estimate_energy(ModelFamily::Ours, &[silent], 1, &m)
            .unwrap()
            .layers[0];
        let token_only =
            5.0 * 128.0 * m.e_m + 3.0 * 128.0 * m.e_ac + (0.1 * 128.0 * 128.0 + 128.0) * m.e_ac;
        assert_relative_eq!(
            a.energy_pj - token_only,
            m.e_ac * 128.0,
            max_relative = 1e-12
        );
        let b = estimate_energy(ModelFamily::Ours, &[base], 1, &m)
            .unwrap()
            .layers[0];
        assert_eq!(b.ac, 3.0 * 128.0 + 2.0 * 128.0);
    }

    #[test]
    fn s4_counts() {
        let r = estimate_energy(
            ModelFamily::S4LegS,
            &[layer(0.5)],
            1,
            &EnergyModel::default(),
        )
        .unwrap();
        let (d, h) = (128.0, 64.0);
        assert_eq!(
            r.layers[0].mac,
            h * h + 2.0 * d * h + d * d + 2.0 * d * d + 2.0 * d
        );
        assert_eq!(r.layers[0].ac, 0.0);
        assert_eq!(r.layers[0].m, d);
    }

    #[test]
    fn linear_in_length_and_constants() {
        let layers = listops_layers(64);
        let m = EnergyModel::default();
        for fam in [
            ModelFamily::S4LegS,
            ModelFamily::BinaryS4D,
            ModelFamily::Gsu,
            ModelFamily::Ours,
        ] {
            let one = estimate_energy(fam, &layers, 100, &m).unwrap().total_mj;
            let three = estimate_energy(fam, &layers, 300, &m).unwrap().total_mj;
            assert_relative_eq!(three, 3.0 * one, max_relative = 1e-12);
            let doubled = EnergyModel {
                e_mac: 2.0 * m.e_mac,
                e_ac: 2.0 * m.e_ac,
                e_m: 2.0 * m.e_m,
            };
            assert_relative_eq!(
                estimate_energy(fam, &layers, 100, &doubled)
                    .unwrap()
                    .total_mj,
                2.0 * one,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn listops_ratio_is_small() {
        let m = EnergyModel::default();
        let ours = estimate_energy(ModelFamily::Ours, &listops_layers(64), 2000, &m).unwrap();
        let s4 = estimate_energy(ModelFamily::S4LegS, &listops_layers(64), 2000, &m).unwrap();
        assert!(ours.total_mj / s4.total_mj <= 0.05);
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = EnergyModel::default();
        assert!(estimate_energy(ModelFamily::Ours, &[layer(1.5)], 1, &m).is_err());
        assert!(estimate_energy(
            ModelFamily::Ours,
            &[layer(0.1)],
            1,
            &EnergyModel { e_ac: 5.0, ..m }
        )
        .is_err());
        assert!("mamba".parse::<ModelFamily>().is_err());
        assert_eq!(
            "S4-LegS".parse::<ModelFamily>().unwrap(),
            ModelFamily::S4LegS
        );
    }
}
