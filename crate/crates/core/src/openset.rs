//! Open-set classifiers built on one-vs-rest machines.
//!
//! Both models produce one probability per known class and reject a point as
//! [`Prediction::Unknown`] when no class reaches the decision threshold.
//! Probabilities are independent per class and are never renormalized.

use log::info;
use serde::{Deserialize, Serialize};

use crate::calibration::{
    default_tail_size, fit_cap_gate, platt_fit, CapConfig, CapGate, Location, PlattCalibrator,
    Tail, WeibullFitter, WeibullModel,
};
use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::svm::{stratified_folds, train_ovr, ClassWeighting, KernelParams, OvrModel, SolverConfig};

/// Folds used to collect out-of-sample decision values for the sigmoids.
pub const PLATT_CV_FOLDS: usize = 3;

/// The two recognizer families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Platt,
    Wsvm,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Platt => "platt",
            Family::Wsvm => "wsvm",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "platt" => Ok(Family::Platt),
            "wsvm" => Ok(Family::Wsvm),
            other => Err(Error::InvalidInput(format!("unknown classifier family `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Prediction {
    Known(usize),
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenSetPrediction {
    pub per_class_probability: Vec<f64>,
    pub predicted: Prediction,
    pub threshold_used: f64,
}

/// Anything that scores a point with one probability per known class.
pub trait OpenSetClassifier: Sync {
    fn num_classes(&self) -> usize;

    fn class_probabilities(&self, x: &[f64]) -> Vec<f64>;

    fn predict(&self, x: &[f64], threshold: f64) -> OpenSetPrediction {
        let per_class_probability = self.class_probabilities(x);
        OpenSetPrediction {
            predicted: decide(&per_class_probability, threshold),
            per_class_probability,
            threshold_used: threshold,
        }
    }

    /// Probabilities for every row; compute once and reuse with [`decide`]
    /// when sweeping thresholds.
    fn batch_probabilities(&self, x: &FeatureMatrix, exec: Execution) -> Vec<Vec<f64>> {
        exec.map_range(x.rows(), |i| self.class_probabilities(x.row(i)))
    }
}

/// Highest-probability class if it reaches `threshold`, otherwise unknown.
/// Ties go to the lowest class index.
pub fn decide(probabilities: &[f64], threshold: f64) -> Prediction {
    let mut best: Option<(usize, f64)> = None;
    for (k, &p) in probabilities.iter().enumerate() {
        if best.is_none_or(|(_, b)| p > b) {
            best = Some((k, p));
        }
    }
    match best {
        Some((k, p)) if p >= threshold => Prediction::Known(k),
        _ => Prediction::Unknown,
    }
}

fn check_training_set(x: &FeatureMatrix, class_of: &[usize], class_names: &[String]) -> Result<()> {
    if x.rows() != class_of.len() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            actual: class_of.len(),
        });
    }
    if class_names.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "open-set training needs at least two known classes, got {}",
            class_names.len()
        )));
    }
    let mut counts = vec![0usize; class_names.len()];
    for &c in class_of {
        *counts
            .get_mut(c)
            .ok_or_else(|| Error::InvalidInput(format!("class index {c} out of range")))? += 1;
    }
    if let Some(k) = counts.iter().position(|&n| n == 0) {
        return Err(Error::for_class(
            &class_names[k],
            Error::InvalidInput("no training examples".into()),
        ));
    }
    Ok(())
}

fn rename_class_error(e: Error, class_names: &[String]) -> Error {
    match e {
        Error::ClassFit { class, source } => {
            let name = class
                .strip_prefix('#')
                .and_then(|k| k.parse::<usize>().ok())
                .and_then(|k| class_names.get(k))
                .cloned()
                .unwrap_or(class);
            Error::ClassFit { class: name, source }
        }
        other => other,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct WsvmConfig {
    pub cap: CapConfig,
    /// Tail size for both score models; `None` uses half of the respective
    /// score set (at least 3).
    pub tail_size: Option<usize>,
}

/// Per-class calibration of the OvR decision value `f`.
///
/// `psi` is fitted on the smallest decision values of the class's own
/// training points and `eta` on the largest decision values of everything
/// else. Both CDFs increase with `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WsvmClassModel {
    pub gate: CapGate,
    pub psi: WeibullModel,
    pub eta: WeibullModel,
}

impl WsvmClassModel {
    pub fn probability(&self, x: &[f64], f: f64) -> f64 {
        if !self.gate.passes(x) {
            return 0.0;
        }
        self.eta.prob(f) * self.psi.prob(f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WsvmModel {
    pub ovr: OvrModel,
    pub classes: Vec<WsvmClassModel>,
}

impl OpenSetClassifier for WsvmModel {
    fn num_classes(&self) -> usize {
        self.classes.len()
    }

    fn class_probabilities(&self, x: &[f64]) -> Vec<f64> {
        self.ovr
            .models
            .iter()
            .zip(&self.classes)
            .map(|(m, c)| c.probability(x, m.decision_value(x)))
            .collect()
    }
}

fn fit_tail(scores: &[f64], tail: Tail, tail_size: Option<usize>) -> Result<WeibullModel> {
    let size = tail_size
        .unwrap_or_else(|| default_tail_size(scores.len()))
        .min(scores.len());
    WeibullFitter {
        tail_size: size,
        tail,
        location: Location::BeyondTail,
    }
    .fit(scores)
}

pub fn train_wsvm(
    x: &FeatureMatrix,
    class_of: &[usize],
    class_names: &[String],
    params: KernelParams,
    wsvm: &WsvmConfig,
    solver: &SolverConfig,
) -> Result<WsvmModel> {
    check_training_set(x, class_of, class_names)?;
    let n = class_names.len();
    let ovr = train_ovr(x, class_of, n, params, ClassWeighting::None, solver)
        .map_err(|e| rename_class_error(e, class_names))?;
    let inner = SolverConfig {
        exec: Execution::Sequential,
        ..*solver
    };
    let classes = solver.exec.try_map(&(0..n).collect::<Vec<_>>(), |&k| {
        let fit = || -> Result<WsvmClassModel> {
            let members: Vec<usize> = (0..class_of.len()).filter(|&i| class_of[i] == k).collect();
            let gate = fit_cap_gate(&x.select(&members), params.gamma, &wsvm.cap, &inner)?;
            let model = &ovr.models[k];
            let (mut pos, mut neg) = (Vec::new(), Vec::new());
            for (i, row) in x.iter_rows().enumerate() {
                let f = model.decision_value(row);
                if class_of[i] == k {
                    pos.push(f);
                } else {
                    neg.push(f);
                }
            }
            let psi = fit_tail(&pos, Tail::Lower, wsvm.tail_size)?;
            let eta = fit_tail(&neg, Tail::Upper, wsvm.tail_size)?;
            Ok(WsvmClassModel { gate, psi, eta })
        };
        fit().map_err(|e| Error::for_class(&class_names[k], e))
    })?;
    info!("trained W-SVM over {n} classes");
    Ok(WsvmModel { ovr, classes })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlattModel {
    pub ovr: OvrModel,
    pub sigmoids: Vec<PlattCalibrator>,
}

impl OpenSetClassifier for PlattModel {
    fn num_classes(&self) -> usize {
        self.sigmoids.len()
    }

    fn class_probabilities(&self, x: &[f64]) -> Vec<f64> {
        self.ovr
            .models
            .iter()
            .zip(&self.sigmoids)
            .map(|(m, s)| s.prob(m.decision_value(x)))
            .collect()
    }
}

/// OvR machines with a sigmoid per class fitted on cross-validated decision
/// values; the deployed machines are retrained on all of `x`.
pub fn train_platt(
    x: &FeatureMatrix,
    class_of: &[usize],
    class_names: &[String],
    params: KernelParams,
    seed: u64,
    solver: &SolverConfig,
) -> Result<PlattModel> {
    check_training_set(x, class_of, class_names)?;
    let n = class_names.len();
    let fold_of = stratified_folds(class_of, class_names, PLATT_CV_FOLDS, seed)?;
    let mut held_dec = vec![vec![0.0; x.rows()]; n];
    for f in 0..PLATT_CV_FOLDS {
        let train: Vec<usize> = (0..x.rows()).filter(|&i| fold_of[i] != f).collect();
        let held: Vec<usize> = (0..x.rows()).filter(|&i| fold_of[i] == f).collect();
        let yt: Vec<usize> = train.iter().map(|&i| class_of[i]).collect();
        let model = train_ovr(&x.select(&train), &yt, n, params, ClassWeighting::None, solver)
            .map_err(|e| rename_class_error(e, class_names))?;
        let decs = solver.exec.map(&held, |&i| model.decision_values(x.row(i)));
        for (&i, d) in held.iter().zip(decs) {
            for (k, v) in d.into_iter().enumerate() {
                held_dec[k][i] = v;
            }
        }
    }
    let sigmoids = (0..n)
        .map(|k| {
            let positive: Vec<bool> = class_of.iter().map(|&c| c == k).collect();
            platt_fit(&held_dec[k], &positive).map_err(|e| Error::for_class(&class_names[k], e))
        })
        .collect::<Result<Vec<_>>>()?;
    let ovr = train_ovr(x, class_of, n, params, ClassWeighting::None, solver)
        .map_err(|e| rename_class_error(e, class_names))?;
    info!("trained Platt-calibrated OvR over {n} classes");
    Ok(PlattModel { ovr, sigmoids })
}
