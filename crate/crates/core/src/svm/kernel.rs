use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Soft-margin penalty and RBF width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub c: f64,
    pub gamma: f64,
}

impl KernelParams {
    pub fn new(c: f64, gamma: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidInput(format!("C must be positive, got {c}")));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        Ok(Self { c, gamma })
    }
}

#[inline]
pub(crate) fn squared_distance(x: &[f64], z: &[f64]) -> f64 {
    x.iter()
        .zip(z)
        .map(|(a, b)| {
            let d = a - b;
            d * d
        })
        .sum()
}

/// `exp(-gamma * |x - z|^2)` without the dimension check.
#[inline]
pub(crate) fn rbf(x: &[f64], z: &[f64], gamma: f64) -> f64 {
    (-gamma * squared_distance(x, z)).exp()
}

/// Gaussian RBF kernel `K(x, z) = exp(-gamma * |x - z|^2)`.
pub fn rbf_kernel(x: &[f64], z: &[f64], gamma: f64) -> Result<f64> {
    if x.len() != z.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: z.len(),
        });
    }
    Ok(rbf(x, z, gamma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_points() {
        assert_eq!(rbf_kernel(&[0.3, 0.7], &[0.3, 0.7], 5.0).unwrap(), 1.0);
    }

    #[test]
    fn direct_evaluation() {
        // |x - z|^2 = 1 + 9 = 10
        let k = rbf_kernel(&[0.0, 0.0], &[1.0, 3.0], 0.1).unwrap();
        assert!((k - (-1.0f64).exp()).abs() < 1e-15);
        assert!((k - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            rbf_kernel(&[0.0], &[0.0, 1.0], 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn params_validation() {
        assert!(KernelParams::new(1000.0, 0.1).is_ok());
        assert!(KernelParams::new(0.0, 0.1).is_err());
        assert!(KernelParams::new(1.0, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(
            x in prop::collection::vec(-3.0f64..3.0, 5),
            z in prop::collection::vec(-3.0f64..3.0, 5),
            g in 0.01f64..10.0
        ) {
            let a = rbf_kernel(&x, &z, g).unwrap();
            let b = rbf_kernel(&z, &x, g).unwrap();
            prop_assert_eq!(a, b);
            prop_assert!(a > 0.0 && a <= 1.0 || a == 0.0 && squared_distance(&x, &z) * g > 700.0);
        }
    }
}
