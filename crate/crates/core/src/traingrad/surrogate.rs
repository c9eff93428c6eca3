use std::f64::consts::PI;

/// Smoothed Heaviside used for spike gradients.
///
/// The forward pass stays an exact step; only backward (or the smooth
/// forward used by gradient checks) sees `σ(x) = atan(π·a·x)/π + 1/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateSpec {
    /// Sharpness `a`; the derivative peaks at `a` for `x = 0`.
    pub width: f64,
}

impl Default for SurrogateSpec {
    fn default() -> Self {
        Self { width: 2.0 }
    }
}

impl SurrogateSpec {
    pub fn smooth(&self, x: f64) -> f64 {
        (PI * self.width * x).atan() / PI + 0.5
    }

    pub fn grad(&self, x: f64) -> f64 {
        surrogate_grad(x, self)
    }
}

/// `d/dx σ(x) = a / (1 + (π·a·x)²)`.
pub fn surrogate_grad(x: f64, spec: &SurrogateSpec) -> f64 {
    let z = PI * spec.width * x;
    spec.width / (1.0 + z * z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn peak_and_tails() {
        let unit = SurrogateSpec { width: 1.0 };
        assert_eq!(surrogate_grad(0.0, &unit), 1.0);
        assert!(surrogate_grad(1e6, &unit) < 1e-12);
        assert!(surrogate_grad(-1e6, &unit) < 1e-12);
        assert_eq!(surrogate_grad(0.0, &SurrogateSpec::default()), 2.0);
    }

    #[test]
    fn symmetric() {
        let s = SurrogateSpec::default();
        for x in [0.01, 0.3, 1.0, 7.5] {
            assert_eq!(surrogate_grad(x, &s), surrogate_grad(-x, &s));
        }
    }

    #[test]
    fn derivative_of_smooth_step() {
        let s = SurrogateSpec { width: 1.7 };
        let h = 1e-6;
        for x in [-0.8, -0.1, 0.0, 0.05, 0.6] {
            let fd = (s.smooth(x + h) - s.smooth(x - h)) / (2.0 * h);
            assert!((fd - s.grad(x)).abs() < 1e-8);
        }
        assert!((s.smooth(-1e9)).abs() < 1e-9);
        assert!((s.smooth(1e9) - 1.0).abs() < 1e-9);
    }
}
