use serde::{Deserialize, Serialize};

use super::weibull::{default_tail_size, Location, Tail, WeibullFitter, WeibullModel};
use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};
use crate::svm::{train_one_class, OneClassSvmModel, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapConfig {
    pub nu: f64,
    /// Minimum gate probability for a point to count as in-class.
    pub delta_tau: f64,
    /// Lower-tail size; `None` uses half the training set (at least 3).
    pub tail_size: Option<usize>,
}

impl Default for CapConfig {
    fn default() -> Self {
        Self {
            nu: 0.1,
            delta_tau: 0.001,
            tail_size: None,
        }
    }
}

/// Class-membership gate: a one-class machine whose scores are calibrated by
/// a lower-tail Weibull fitted on the least typical training points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapGate {
    pub one_class: OneClassSvmModel,
    pub weibull: WeibullModel,
    pub delta_tau: f64,
}

impl CapGate {
    pub fn score(&self, x: &[f64]) -> f64 {
        self.one_class.decision_value(x)
    }

    pub fn prob(&self, x: &[f64]) -> f64 {
        self.weibull.prob(self.score(x))
    }

    pub fn passes(&self, x: &[f64]) -> bool {
        self.prob(x) >= self.delta_tau
    }
}

/// Trains the gate on the members of one class.
///
/// Every RBF one-class score exceeds the asymptotic value `-rho` reached far
/// from the data. The Weibull location is kept strictly above that value, so
/// distant points get a gate probability of exactly zero.
pub fn fit_cap_gate(
    x: &FeatureMatrix,
    gamma: f64,
    cap: &CapConfig,
    solver: &SolverConfig,
) -> Result<CapGate> {
    if x.rows() < 3 {
        return Err(Error::Calibration(format!(
            "gate needs at least 3 training vectors, got {}",
            x.rows()
        )));
    }
    let one_class = train_one_class(x, gamma, cap.nu, solver)?;
    let mut scores: Vec<f64> = x.iter_rows().map(|r| one_class.decision_value(r)).collect();
    scores.sort_by(f64::total_cmp);
    let tail_size = cap
        .tail_size
        .unwrap_or_else(|| default_tail_size(scores.len()))
        .min(scores.len());
    let min = scores[0];
    let span = scores[tail_size - 1] - min;
    if span <= 0.0 {
        return Err(Error::Calibration("gate scores are all equal".into()));
    }
    let mut location = min - span / tail_size as f64;
    let floor = one_class.asymptotic_score();
    if floor < min {
        location = location.max(0.5 * (floor + min));
    }
    let weibull = WeibullFitter {
        tail_size,
        tail: Tail::Lower,
        location: Location::Fixed(location),
    }
    .fit(&scores)?;
    Ok(CapGate {
        one_class,
        weibull,
        delta_tau: cap.delta_tau,
    })
}
