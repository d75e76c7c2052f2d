use serde::{Deserialize, Serialize};

use super::{smo_train_with_solution, BinarySvmModel, ClassWeighting, KernelParams, SolverConfig};
use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};
use crate::par::Execution;

/// One binary model per class, class `k` trained as +1 against the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvrModel {
    pub models: Vec<BinarySvmModel>,
}

impl OvrModel {
    pub fn num_classes(&self) -> usize {
        self.models.len()
    }

    pub fn decision_values(&self, x: &[f64]) -> Vec<f64> {
        self.models.iter().map(|m| m.decision_value(x)).collect()
    }

    /// Closed-set argmax of decision values; ties go to the lowest index.
    pub fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.decision_values(x))
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in v.iter().enumerate().skip(1) {
        if s > v[best] {
            best = i;
        }
    }
    best
}

/// `class_of[i]` is the class index of row `i`; every class in
/// `0..n_classes` must be present.
pub fn train_ovr(
    x: &FeatureMatrix,
    class_of: &[usize],
    n_classes: usize,
    params: KernelParams,
    weighting: ClassWeighting,
    cfg: &SolverConfig,
) -> Result<OvrModel> {
    if n_classes < 2 {
        return Err(Error::InvalidInput(format!(
            "one-vs-rest needs at least two classes, got {n_classes}"
        )));
    }
    if let Some(&bad) = class_of.iter().find(|&&c| c >= n_classes) {
        return Err(Error::InvalidInput(format!("class index {bad} out of range")));
    }
    // The class-level loop is the parallel one; the rows inside each solve are
    // computed sequentially to avoid oversubscription.
    let inner = SolverConfig {
        exec: Execution::Sequential,
        ..*cfg
    };
    let models = cfg.exec.try_map(&(0..n_classes).collect::<Vec<_>>(), |&k| {
        let y: Vec<f64> = class_of
            .iter()
            .map(|&c| if c == k { 1.0 } else { -1.0 })
            .collect();
        smo_train_with_solution(x, &y, params, weighting, &inner)
            .map(|(m, _)| m)
            .map_err(|e| Error::for_class(&format!("#{k}"), e))
    })?;
    Ok(OvrModel { models })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_ties_to_lowest() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[2.0]), 0);
    }

    #[test]
    fn two_classes_mirror_each_other() {
        let x = FeatureMatrix::from_rows(&[[0.0], [0.1], [1.0], [1.1]]).unwrap();
        let m = train_ovr(
            &x,
            &[0, 0, 1, 1],
            2,
            KernelParams::new(10.0, 1.0).unwrap(),
            ClassWeighting::None,
            &SolverConfig {
                tol: 1e-8,
                ..SolverConfig::default()
            },
        )
        .unwrap();
        assert_eq!(m.num_classes(), 2);
        for q in [0.0, 0.3, 0.7, 1.1] {
            let d = m.decision_values(&[q]);
            assert!((d[0] + d[1]).abs() < 1e-6, "{d:?}");
        }
        assert_eq!(m.predict(&[0.05]), 0);
        assert_eq!(m.predict(&[1.05]), 1);
    }

    #[test]
    fn missing_class_fails_with_context() {
        let x = FeatureMatrix::from_rows(&[[0.0], [1.0]]).unwrap();
        let err = train_ovr(
            &x,
            &[0, 0],
            2,
            KernelParams::new(1.0, 1.0).unwrap(),
            ClassWeighting::None,
            &SolverConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::ClassFit { .. }));
        assert!(train_ovr(
            &x,
            &[0, 3],
            2,
            KernelParams::new(1.0, 1.0).unwrap(),
            ClassWeighting::None,
            &SolverConfig::default()
        )
        .is_err());
    }
}
