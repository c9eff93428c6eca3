use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiringRates {
    /// Fraction of nonzero entries in each layer's spike tensor.
    pub per_layer: Vec<f64>,
    /// Unweighted mean of `per_layer`; 0 when there are no layers.
    pub average: f64,
}

pub fn firing_rate_stats<S: AsRef<[f64]>>(layers: &[S]) -> FiringRates {
    let per_layer: Vec<f64> = layers
        .iter()
        .map(|l| {
            let l = l.as_ref();
            if l.is_empty() {
                0.0
            } else {
                l.iter().filter(|v| **v != 0.0).count() as f64 / l.len() as f64
            }
        })
        .collect();
    let average = if per_layer.is_empty() {
        0.0
    } else {
        per_layer.iter().sum::<f64>() / per_layer.len() as f64
    };
    FiringRates { per_layer, average }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_nonzero_fraction() {
        let r = firing_rate_stats(&[vec![0.0; 8], vec![1.0; 3], vec![1.0, 0.0, 0.0, 0.0]]);
        assert_eq!(r.per_layer, vec![0.0, 1.0, 0.25]);
        assert!((r.average - 1.25 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn no_layers() {
        let r = firing_rate_stats::<Vec<f64>>(&[]);
        assert!(r.per_layer.is_empty());
        assert_eq!(r.average, 0.0);
    }
}
