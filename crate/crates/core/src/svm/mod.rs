//! Soft-margin RBF support vector machines.

mod cache;
mod grid;
mod kernel;
mod ovr;
mod smo;

pub use grid::{
    grid_search_cv, odd_decade_grid, stratified_folds, GridCell, GridSearchResult, ODD_DECADES,
};
pub use kernel::{rbf_kernel, KernelParams};
pub use ovr::{train_ovr, OvrModel};
pub use smo::{DualSolution, SolverConfig};

use serde::{Deserialize, Serialize};

use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};
use smo::{KernelQ, Problem};

/// Per-class penalty scaling for imbalanced problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassWeighting {
    #[default]
    None,
    /// `C_i = C * l / (2 * l_{y_i})`.
    Balanced,
}

/// Support vectors with signed coefficients `a_i y_i` and bias `b`;
/// `f(x) = sum_i coef_i K(sv_i, x) + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvmModel {
    pub support_vectors: FeatureMatrix,
    pub dual_coefficients: Vec<f64>,
    pub bias: f64,
    pub kernel: KernelParams,
}

impl BinarySvmModel {
    pub fn decision_value(&self, x: &[f64]) -> f64 {
        kernel_expansion(&self.support_vectors, &self.dual_coefficients, self.kernel.gamma, x)
            + self.bias
    }

    pub fn num_support_vectors(&self) -> usize {
        self.dual_coefficients.len()
    }
}

/// One-class solution; `g(x) = sum_i a_i K(sv_i, x) - rho`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneClassSvmModel {
    pub support_vectors: FeatureMatrix,
    pub coefficients: Vec<f64>,
    pub rho: f64,
    pub gamma: f64,
    pub nu: f64,
}

impl OneClassSvmModel {
    pub fn decision_value(&self, x: &[f64]) -> f64 {
        kernel_expansion(&self.support_vectors, &self.coefficients, self.gamma, x) - self.rho
    }

    /// The decision value far from every support vector.
    pub fn asymptotic_score(&self) -> f64 {
        -self.rho
    }
}

fn kernel_expansion(sv: &FeatureMatrix, coef: &[f64], gamma: f64, x: &[f64]) -> f64 {
    sv.iter_rows()
        .zip(coef)
        .map(|(s, c)| c * kernel::rbf(s, x, gamma))
        .sum()
}

/// Solves the C-SVC dual for labels `y` in {-1, +1}; returns the model and
/// the full dual solution.
pub fn smo_train_with_solution(
    x: &FeatureMatrix,
    y: &[f64],
    params: KernelParams,
    weighting: ClassWeighting,
    cfg: &SolverConfig,
) -> Result<(BinarySvmModel, DualSolution)> {
    if x.rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            actual: y.len(),
        });
    }
    if let Some(bad) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
        return Err(Error::InvalidInput(format!("labels must be +1/-1, got {bad}")));
    }
    let n_pos = y.iter().filter(|&&v| v > 0.0).count();
    let n_neg = y.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let l = y.len() as f64;
    let upper: Vec<f64> = y
        .iter()
        .map(|&yi| match weighting {
            ClassWeighting::None => params.c,
            ClassWeighting::Balanced => {
                let n = if yi > 0.0 { n_pos } else { n_neg } as f64;
                params.c * l / (2.0 * n)
            }
        })
        .collect();
    let problem = Problem {
        q: KernelQ::new(x, y, params.gamma, cfg.exec),
        p: vec![-1.0; y.len()],
        y,
        upper,
        alpha0: vec![0.0; y.len()],
    };
    let sol = smo::solve(problem, cfg)?;
    let keep: Vec<usize> = (0..y.len()).filter(|&i| sol.alpha[i] > 0.0).collect();
    let model = BinarySvmModel {
        support_vectors: x.select(&keep),
        dual_coefficients: keep.iter().map(|&i| sol.alpha[i] * y[i]).collect(),
        bias: -sol.rho,
        kernel: params,
    };
    Ok((model, sol))
}

pub fn smo_train(
    x: &FeatureMatrix,
    y: &[f64],
    params: KernelParams,
    cfg: &SolverConfig,
) -> Result<BinarySvmModel> {
    smo_train_with_solution(x, y, params, ClassWeighting::None, cfg).map(|(m, _)| m)
}

/// nu-style one-class machine: `0 <= a_i <= 1`, `sum a_i = nu * l`.
pub fn train_one_class_with_solution(
    x: &FeatureMatrix,
    gamma: f64,
    nu: f64,
    cfg: &SolverConfig,
) -> Result<(OneClassSvmModel, DualSolution)> {
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(Error::InvalidInput(format!("nu must lie in (0, 1], got {nu}")));
    }
    if x.is_empty() {
        return Err(Error::InvalidInput("one-class training set is empty".into()));
    }
    let l = x.rows();
    let total = nu * l as f64;
    let full = total.floor() as usize;
    let mut alpha0 = vec![0.0; l];
    for a in alpha0.iter_mut().take(full) {
        *a = 1.0;
    }
    if full < l {
        alpha0[full] = total - full as f64;
    }
    let y = vec![1.0; l];
    let problem = Problem {
        q: KernelQ::new(x, &y, gamma, cfg.exec),
        p: vec![0.0; l],
        y: &y,
        upper: vec![1.0; l],
        alpha0,
    };
    let sol = smo::solve(problem, cfg)?;
    let keep: Vec<usize> = (0..l).filter(|&i| sol.alpha[i] > 0.0).collect();
    let model = OneClassSvmModel {
        support_vectors: x.select(&keep),
        coefficients: keep.iter().map(|&i| sol.alpha[i]).collect(),
        rho: sol.rho,
        gamma,
        nu,
    };
    Ok((model, sol))
}

pub fn train_one_class(
    x: &FeatureMatrix,
    gamma: f64,
    nu: f64,
    cfg: &SolverConfig,
) -> Result<OneClassSvmModel> {
    train_one_class_with_solution(x, gamma, nu, cfg).map(|(m, _)| m)
}
