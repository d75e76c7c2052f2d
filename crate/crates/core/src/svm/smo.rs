//! Sequential minimal optimization for the box- and equality-constrained dual
//!
//! ```text
//! min_a  1/2 a'Qa + p'a   s.t.  y'a = const,  0 <= a_i <= C_i
//! ```
//!
//! with second-order working-set selection. `Q_ij = y_i y_j K(x_i, x_j)` for
//! C-SVC and `Q_ij = K(x_i, x_j)` for the one-class formulation.

use log::debug;
use serde::{Deserialize, Serialize};

use super::cache::RowCache;
use super::kernel::rbf;
use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};
use crate::par::Execution;

const TAU: f64 = 1e-12;
const PARALLEL_ROW_MIN: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Stopping tolerance on the maximal KKT violation `m(a) - M(a)`.
    pub tol: f64,
    /// Iteration cap; `None` means `max(10^7, 100 * l)`.
    pub max_iter: Option<usize>,
    pub cache_bytes: usize,
    #[serde(skip, default)]
    pub exec: Execution,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_iter: None,
            cache_bytes: 256 << 20,
            exec: Execution::default(),
        }
    }
}

/// Optimal dual variables plus solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    /// Threshold `rho`; decision values are `sum_i a_i y_i K(x_i, x) - rho`.
    pub rho: f64,
    /// Dual objective `1/2 a'Qa + p'a` at the solution.
    pub objective: f64,
    /// Gradient `Qa + p` at the solution.
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub max_violation: f64,
    pub kernel_evaluations: u64,
}

/// The kernel side of the problem: rows of `Q` built from feature rows.
pub(crate) struct KernelQ<'a> {
    x: &'a FeatureMatrix,
    y: &'a [f64],
    gamma: f64,
    exec: Execution,
}

impl<'a> KernelQ<'a> {
    pub(crate) fn new(x: &'a FeatureMatrix, y: &'a [f64], gamma: f64, exec: Execution) -> Self {
        Self { x, y, gamma, exec }
    }

    fn fill_row(&self, i: usize, out: &mut [f64]) {
        let xi = self.x.row(i);
        let yi = self.y[i];
        let n = out.len();
        if self.exec.is_parallel() && n >= PARALLEL_ROW_MIN {
            let vals = self.exec.map_range(n, |j| yi * self.y[j] * rbf(xi, self.x.row(j), self.gamma));
            out.copy_from_slice(&vals);
        } else {
            for (j, o) in out.iter_mut().enumerate() {
                *o = yi * self.y[j] * rbf(xi, self.x.row(j), self.gamma);
            }
        }
    }
}

pub(crate) struct Problem<'a> {
    pub q: KernelQ<'a>,
    pub p: Vec<f64>,
    pub y: &'a [f64],
    pub upper: Vec<f64>,
    pub alpha0: Vec<f64>,
}

fn is_upper(a: f64, c: f64) -> bool {
    a >= c
}

fn is_lower(a: f64) -> bool {
    a <= 0.0
}

pub(crate) fn solve(problem: Problem<'_>, cfg: &SolverConfig) -> Result<DualSolution> {
    let Problem {
        q,
        p,
        y,
        upper,
        alpha0,
    } = problem;
    let l = p.len();
    if cfg.tol <= 0.0 || !cfg.tol.is_finite() {
        return Err(Error::InvalidInput(format!(
            "solver tolerance must be positive, got {}",
            cfg.tol
        )));
    }
    let max_iter = cfg.max_iter.unwrap_or_else(|| 10_000_000usize.max(100 * l));
    let mut cache = RowCache::new(l, cfg.cache_bytes);
    let mut fill = |i: usize, out: &mut [f64]| q.fill_row(i, out);
    // RBF: K(x, x) = 1 and y_i^2 = 1.
    let qd = vec![1.0; l];

    let mut alpha = alpha0;
    let mut grad = p.clone();
    for (i, &ai) in alpha.iter().enumerate() {
        if ai != 0.0 {
            let qi = cache.get(i, &mut fill);
            for (g, &v) in grad.iter_mut().zip(qi) {
                *g += ai * v;
            }
        }
    }

    let mut iter = 0usize;
    let mut violation;
    loop {
        // Working set selection: i maximizes -y_t grad_t over I_up, j minimizes
        // the second-order objective decrease over I_low.
        let mut gmax = f64::NEG_INFINITY;
        let mut gmax_idx = usize::MAX;
        for t in 0..l {
            if y[t] > 0.0 {
                if !is_upper(alpha[t], upper[t]) && -grad[t] >= gmax {
                    gmax = -grad[t];
                    gmax_idx = t;
                }
            } else if !is_lower(alpha[t]) && grad[t] >= gmax {
                gmax = grad[t];
                gmax_idx = t;
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut gmin_idx = usize::MAX;
        let mut obj_diff_min = f64::INFINITY;
        if gmax_idx != usize::MAX {
            let i = gmax_idx;
            let qi = cache.get(i, &mut fill);
            for j in 0..l {
                if y[j] > 0.0 {
                    if !is_lower(alpha[j]) {
                        let grad_diff = gmax + grad[j];
                        if grad[j] >= gmax2 {
                            gmax2 = grad[j];
                        }
                        if grad_diff > 0.0 {
                            let quad = qd[i] + qd[j] - 2.0 * y[i] * qi[j];
                            let obj = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                            if obj <= obj_diff_min {
                                gmin_idx = j;
                                obj_diff_min = obj;
                            }
                        }
                    }
                } else if !is_upper(alpha[j], upper[j]) {
                    let grad_diff = gmax - grad[j];
                    if -grad[j] >= gmax2 {
                        gmax2 = -grad[j];
                    }
                    if grad_diff > 0.0 {
                        let quad = qd[i] + qd[j] + 2.0 * y[i] * qi[j];
                        let obj = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                        if obj <= obj_diff_min {
                            gmin_idx = j;
                            obj_diff_min = obj;
                        }
                    }
                }
            }
        }
        violation = gmax + gmax2;
        if violation < cfg.tol || gmin_idx == usize::MAX || gmax_idx == usize::MAX {
            break;
        }
        if iter >= max_iter {
            return Err(Error::NotConverged {
                iterations: iter,
                violation,
                tol: cfg.tol,
            });
        }
        iter += 1;

        let (i, j) = (gmax_idx, gmin_idx);
        let (qi, qj) = cache.get_pair(i, j, &mut fill);
        let (ci, cj) = (upper[i], upper[j]);
        let (old_ai, old_aj) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = qd[i] + qd[j] + 2.0 * qi[j];
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let mut quad = qd[i] + qd[j] - 2.0 * qi[j];
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let dai = alpha[i] - old_ai;
        let daj = alpha[j] - old_aj;
        for k in 0..l {
            grad[k] += qi[k] * dai + qj[k] * daj;
        }
    }

    // rho: mean of y_i grad_i over free variables, else the midpoint of the
    // feasible interval.
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut n_free = 0usize;
    let mut sum_free = 0.0;
    for i in 0..l {
        let yg = y[i] * grad[i];
        if is_upper(alpha[i], upper[i]) {
            if y[i] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if is_lower(alpha[i]) {
            if y[i] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    };
    let objective = alpha
        .iter()
        .zip(grad.iter().zip(&p))
        .map(|(a, (g, pi))| a * (g + pi))
        .sum::<f64>()
        / 2.0;
    let kernel_evaluations = cache.misses * l as u64;
    debug!(
        "smo: l={l} iterations={iter} violation={violation:.3e} cache hits={} misses={}",
        cache.hits, cache.misses
    );
    Ok(DualSolution {
        alpha,
        rho,
        objective,
        gradient: grad,
        iterations: iter,
        max_violation: violation.max(0.0),
        kernel_evaluations,
    })
}
