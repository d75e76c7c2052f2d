//! Weibull tail models fitted by maximum likelihood.
//!
//! A lower-tail model describes the smallest scores of a sample and has
//! support `x > location`. An upper-tail model is the reversed Weibull for the
//! largest scores, with support `x < location`. In both orientations
//! [`WeibullModel::cdf`] is non-decreasing in `x`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_NEWTON: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tail {
    Lower,
    Upper,
}

/// Where the location parameter goes relative to the tail samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Location {
    /// Just outside the most extreme tail sample, offset by the tail span
    /// divided by the tail size.
    BeyondTail,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullModel {
    pub shape: f64,
    pub scale: f64,
    pub location: f64,
    pub tail: Tail,
}

impl WeibullModel {
    fn reduced(&self, x: f64) -> Option<f64> {
        let z = match self.tail {
            Tail::Lower => x - self.location,
            Tail::Upper => self.location - x,
        };
        (z > 0.0).then(|| (z / self.scale).powf(self.shape))
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match (self.tail, self.reduced(x)) {
            (Tail::Lower, None) => 0.0,
            (Tail::Lower, Some(t)) => -(-t).exp_m1(),
            (Tail::Upper, None) => 1.0,
            (Tail::Upper, Some(t)) => (-t).exp(),
        }
    }

    pub fn survival(&self, x: f64) -> f64 {
        match (self.tail, self.reduced(x)) {
            (Tail::Lower, None) => 1.0,
            (Tail::Lower, Some(t)) => (-t).exp(),
            (Tail::Upper, None) => 0.0,
            (Tail::Upper, Some(t)) => -(-t).exp_m1(),
        }
    }

    /// Calibrated probability: the CDF, clamped into `[0, 1]`.
    pub fn prob(&self, x: f64) -> f64 {
        self.cdf(x).clamp(0.0, 1.0)
    }
}

/// `max(3, ceil(n / 2))`.
pub fn default_tail_size(available: usize) -> usize {
    available.div_ceil(2).max(3)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullFitter {
    pub tail_size: usize,
    pub tail: Tail,
    pub location: Location,
}

impl WeibullFitter {
    pub fn fit(&self, samples: &[f64]) -> Result<WeibullModel> {
        if self.tail_size < 3 {
            return Err(Error::Calibration(format!(
                "tail size must be at least 3, got {}",
                self.tail_size
            )));
        }
        if samples.len() < self.tail_size {
            return Err(Error::Calibration(format!(
                "{} samples is fewer than the tail size {}",
                samples.len(),
                self.tail_size
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::Calibration("non-finite sample".into()));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let tail: Vec<f64> = match self.tail {
            Tail::Lower => sorted[..self.tail_size].to_vec(),
            Tail::Upper => sorted[sorted.len() - self.tail_size..].to_vec(),
        };
        let (lo, hi) = (tail[0], tail[tail.len() - 1]);
        let span = hi - lo;
        if span <= 0.0 {
            return Err(Error::Calibration("degenerate tail: all samples equal".into()));
        }
        let location = match self.location {
            Location::Fixed(t) => t,
            Location::BeyondTail => {
                let margin = span / self.tail_size as f64;
                match self.tail {
                    Tail::Lower => lo - margin,
                    Tail::Upper => hi + margin,
                }
            }
        };
        let z: Vec<f64> = tail
            .iter()
            .map(|&x| match self.tail {
                Tail::Lower => x - location,
                Tail::Upper => location - x,
            })
            .collect();
        if z.iter().any(|&v| v <= 0.0) {
            return Err(Error::Calibration(format!(
                "location {location} does not lie strictly outside the tail"
            )));
        }
        let (shape, scale) = fit_two_parameter(&z)?;
        Ok(WeibullModel {
            shape,
            scale,
            location,
            tail: self.tail,
        })
    }
}

/// Fits the `tail_size` extreme samples with the location just beyond them.
pub fn weibull_fit(samples: &[f64], tail_size: usize, tail: Tail) -> Result<WeibullModel> {
    WeibullFitter {
        tail_size,
        tail,
        location: Location::BeyondTail,
    }
    .fit(samples)
}

/// Maximum-likelihood `(shape, scale)` for strictly positive data.
///
/// Solves the profile equation
/// `h(k) = sum z^k ln z / sum z^k - 1/k - mean(ln z) = 0`, which is strictly
/// increasing in `k`, by Newton's method inside a bisection bracket. The scale
/// follows as `(mean z^k)^(1/k)`.
pub fn fit_two_parameter(z: &[f64]) -> Result<(f64, f64)> {
    if z.len() < 2 {
        return Err(Error::Calibration("need at least two samples".into()));
    }
    if z.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::Calibration("samples must be positive and finite".into()));
    }
    // Work on u = z / max(z) in (0, 1] so that u^k never overflows.
    let zmax = z.iter().copied().fold(f64::MIN, f64::max);
    let ln_u: Vec<f64> = z.iter().map(|&v| (v / zmax).ln()).collect();
    let n = ln_u.len() as f64;
    let mean_ln = ln_u.iter().sum::<f64>() / n;
    if ln_u.iter().all(|&l| l == ln_u[0]) {
        return Err(Error::Calibration("degenerate sample: all values equal".into()));
    }
    let eval = |k: f64| -> (f64, f64) {
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for &l in &ln_u {
            let w = (k * l).exp();
            s0 += w;
            s1 += w * l;
            s2 += w * l * l;
        }
        let m1 = s1 / s0;
        let h = m1 - 1.0 / k - mean_ln;
        let dh = s2 / s0 - m1 * m1 + 1.0 / (k * k);
        (h, dh)
    };

    let (mut lo, mut hi) = (0.5, 2.0);
    while eval(lo).0 > 0.0 {
        lo /= 2.0;
        if lo < 1e-8 {
            return Err(Error::Calibration("shape bracket underflow".into()));
        }
    }
    while eval(hi).0 < 0.0 {
        hi *= 2.0;
        if hi > 1e8 {
            return Err(Error::Calibration("shape bracket overflow".into()));
        }
    }
    let mut k = 0.5 * (lo + hi);
    let mut converged = false;
    for _ in 0..MAX_NEWTON {
        let (h, dh) = eval(k);
        if h == 0.0 {
            converged = true;
            break;
        }
        if h < 0.0 {
            lo = k;
        } else {
            hi = k;
        }
        let newton = k - h / dh;
        let next = if dh > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - k).abs() <= 1e-12 * k.max(1.0) || (hi - lo) <= 1e-14 * hi {
            k = next;
            converged = true;
            break;
        }
        k = next;
    }
    if !converged {
        return Err(Error::Calibration(
            "Weibull shape iteration did not converge".into(),
        ));
    }
    let mean_uk = ln_u.iter().map(|&l| (k * l).exp()).sum::<f64>() / n;
    let scale = zmax * mean_uk.powf(1.0 / k);
    Ok((k, scale))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lower(k: f64, lambda: f64, tau: f64) -> WeibullModel {
        WeibullModel {
            shape: k,
            scale: lambda,
            location: tau,
            tail: Tail::Lower,
        }
    }

    #[test]
    fn cdf_identities() {
        for k in [0.5, 1.0, 2.0, 7.0] {
            let m = lower(k, 1.7, 0.3);
            assert!((m.cdf(0.3 + 1.7) - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
            assert!((m.cdf(0.3 + 1.7 * 2f64.ln().powf(1.0 / k)) - 0.5).abs() < 1e-14);
            assert_eq!(m.cdf(0.3), 0.0);
            assert_eq!(m.cdf(-5.0), 0.0);
            assert!((m.cdf(1e9) - 1.0).abs() < 1e-15);
            assert!((m.cdf(1.0) + m.survival(1.0) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn reversed_weibull_is_monotone_and_saturates() {
        let m = WeibullModel {
            shape: 3.0,
            scale: 0.5,
            location: 1.0,
            tail: Tail::Upper,
        };
        let xs = [-3.0, -1.0, 0.0, 0.5, 0.9, 0.99, 1.0, 2.0];
        let ps: Vec<f64> = xs.iter().map(|&x| m.prob(x)).collect();
        assert!(ps.windows(2).all(|w| w[0] <= w[1]), "{ps:?}");
        assert_eq!(m.prob(1.0), 1.0);
        assert!((m.cdf(0.5) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn tail_selection_and_location() {
        let samples: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let m = weibull_fit(&samples, 4, Tail::Lower).unwrap();
        // tail {1,2,3,4}: span 3, margin 3/4
        assert_eq!(m.location, 0.25);
        assert!(m.prob(1.0) > 0.0);
        let u = weibull_fit(&samples, 4, Tail::Upper).unwrap();
        assert_eq!(u.location, 10.75);
        assert!(u.prob(10.0) < 1.0);
        assert!(u.prob(7.0) < u.prob(9.0));
    }

    #[test]
    fn fit_errors() {
        assert!(weibull_fit(&[1.0, 2.0, 3.0], 2, Tail::Lower).is_err());
        assert!(weibull_fit(&[1.0, 2.0], 3, Tail::Lower).is_err());
        assert!(weibull_fit(&[2.0; 8], 4, Tail::Lower).is_err());
        let fixed = WeibullFitter {
            tail_size: 3,
            tail: Tail::Lower,
            location: Location::Fixed(1.5),
        };
        assert!(fixed.fit(&[1.0, 2.0, 3.0]).is_err());
        assert!(fit_two_parameter(&[1.0, -1.0]).is_err());
    }

    #[test]
    fn exponential_sample_has_closed_form_scale_at_unit_shape() {
        // For k = 1 the profile equation reduces to the exponential MLE, so
        // data whose MLE shape is exactly 1 must return scale = mean.
        // Symmetric log-spacing makes shape > 0; just check the scale identity.
        let z = [0.2, 0.5, 1.1, 1.9, 3.3];
        let (k, lam) = fit_two_parameter(&z).unwrap();
        let mean_zk = z.iter().map(|v: &f64| v.powf(k)).sum::<f64>() / z.len() as f64;
        assert!((lam - mean_zk.powf(1.0 / k)).abs() < 1e-12 * lam);
        let h = z.iter().map(|v| v.powf(k) * v.ln()).sum::<f64>()
            / z.iter().map(|v| v.powf(k)).sum::<f64>()
            - 1.0 / k
            - z.iter().map(|v| v.ln()).sum::<f64>() / z.len() as f64;
        assert!(h.abs() < 1e-10, "profile residual {h}");
    }

    #[test]
    fn full_sample_fit_recovers_unit_scale_rayleigh() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Weibull};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let dist = Weibull::new(1.0, 2.0).unwrap();
        let draws: Vec<f64> = (0..1000).map(|_| dist.sample(&mut rng)).collect();
        for location in [Location::Fixed(0.0), Location::BeyondTail] {
            let m = WeibullFitter { tail_size: draws.len(), tail: Tail::Lower, location }
                .fit(&draws)
                .unwrap();
            assert!((1.8..=2.2).contains(&m.shape), "{location:?}: shape {}", m.shape);
            assert!((0.95..=1.05).contains(&m.scale), "{location:?}: scale {}", m.scale);
        }
    }
}
