use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_ITER: usize = 100;
const MIN_STEP: f64 = 1e-10;
const SIGMA: f64 = 1e-12;
const EPS: f64 = 1e-5;

/// `p(f) = 1 / (1 + exp(A f + B))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlattCalibrator {
    pub a: f64,
    pub b: f64,
}

impl PlattCalibrator {
    pub fn prob(&self, f: f64) -> f64 {
        sigmoid_of(self.a * f + self.b)
    }
}

/// `1 / (1 + exp(t))` without overflow for either sign of `t`.
fn sigmoid_of(t: f64) -> f64 {
    if t >= 0.0 {
        let e = (-t).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + t.exp())
    }
}

fn objective(dec: &[f64], targets: &[f64], a: f64, b: f64) -> f64 {
    dec.iter()
        .zip(targets)
        .map(|(&f, &t)| {
            let z = f * a + b;
            if z >= 0.0 {
                t * z + (-z).exp().ln_1p()
            } else {
                (t - 1.0) * z + z.exp().ln_1p()
            }
        })
        .sum()
}

/// Fits `(A, B)` by Newton's method with backtracking on the negative
/// log-likelihood of smoothed targets `(N+ + 1)/(N+ + 2)` and `1/(N- + 2)`.
///
/// `positive[i]` is the ground truth for decision value `dec[i]`.
pub fn platt_fit(dec: &[f64], positive: &[bool]) -> Result<PlattCalibrator> {
    if dec.len() != positive.len() {
        return Err(Error::DimensionMismatch {
            expected: dec.len(),
            actual: positive.len(),
        });
    }
    if dec.iter().any(|f| !f.is_finite()) {
        return Err(Error::Calibration("non-finite decision value".into()));
    }
    let n_pos = positive.iter().filter(|&&p| p).count() as f64;
    let n_neg = positive.len() as f64 - n_pos;
    if n_pos == 0.0 || n_neg == 0.0 {
        return Err(Error::Calibration(
            "sigmoid fit needs both positive and negative examples".into(),
        ));
    }
    let hi = (n_pos + 1.0) / (n_pos + 2.0);
    let lo = 1.0 / (n_neg + 2.0);
    let targets: Vec<f64> = positive.iter().map(|&p| if p { hi } else { lo }).collect();

    let mut a = 0.0;
    let mut b = ((n_neg + 1.0) / (n_pos + 1.0)).ln();
    let mut fval = objective(dec, &targets, a, b);
    let mut converged = false;
    for _ in 0..MAX_ITER {
        let (mut h11, mut h22, mut h21) = (SIGMA, SIGMA, 0.0);
        let (mut g1, mut g2) = (0.0, 0.0);
        for (&f, &t) in dec.iter().zip(&targets) {
            let z = f * a + b;
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = t - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < EPS && g2.abs() < EPS {
            converged = true;
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        while step >= MIN_STEP {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(dec, &targets, na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if step < MIN_STEP {
            // No descent direction left: at the optimum to machine precision,
            // or the Newton direction is unusable.
            if g1.abs() < 1e-3 && g2.abs() < 1e-3 {
                converged = true;
                break;
            }
            return Err(Error::Calibration(format!(
                "sigmoid line search failed (gradient {g1:.3e}, {g2:.3e})"
            )));
        }
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::Calibration("sigmoid fit diverged".into()));
    }
    if !converged {
        warn!("sigmoid fit reached {MAX_ITER} iterations");
    }
    Ok(PlattCalibrator { a, b })
}
