use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{train_ovr, ClassWeighting, KernelParams, SolverConfig};
use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};
use crate::par::Execution;

/// `{1e-5, 1e-3, 1e-1, 1e1, 1e3, 1e5}`.
pub const ODD_DECADES: [f64; 6] = [1e-5, 1e-3, 1e-1, 1e1, 1e3, 1e5];

/// Cartesian product of the odd decades for both C and gamma.
pub fn odd_decade_grid() -> Vec<KernelParams> {
    let mut grid = Vec::new();
    for &c in &ODD_DECADES {
        for &gamma in &ODD_DECADES {
            grid.push(KernelParams { c, gamma });
        }
    }
    grid
}

/// Fold id for every sample; each class is shuffled with `seed` and dealt
/// round-robin so fold sizes differ by at most one per class.
pub fn stratified_folds(
    class_of: &[usize],
    class_names: &[String],
    folds: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 folds, got {folds}")));
    }
    let mut members = vec![Vec::new(); class_names.len()];
    for (i, &c) in class_of.iter().enumerate() {
        members[c].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0; class_of.len()];
    for (c, idx) in members.iter_mut().enumerate() {
        if idx.len() < folds {
            return Err(Error::ClassTooSmall {
                class: class_names[c].clone(),
                count: idx.len(),
                folds,
            });
        }
        idx.shuffle(&mut rng);
        for (k, &i) in idx.iter().enumerate() {
            fold_of[i] = k % folds;
        }
    }
    Ok(fold_of)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub params: KernelParams,
    /// `None` when some fold failed to train (e.g. hit the iteration cap).
    pub mean_accuracy: Option<f64>,
    pub fold_accuracies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best: KernelParams,
    pub table: Vec<GridCell>,
}

/// Mean closed-set OvR accuracy per grid cell over stratified folds.
///
/// The best cell has the highest mean accuracy; ties go to the smaller C,
/// then the smaller gamma.
pub fn grid_search_cv(
    x: &FeatureMatrix,
    class_of: &[usize],
    class_names: &[String],
    grid: &[KernelParams],
    folds: usize,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<GridSearchResult> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty parameter grid".into()));
    }
    let fold_of = stratified_folds(class_of, class_names, folds, seed)?;
    let n_classes = class_names.len();
    let tasks: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..folds).map(move |f| (g, f)))
        .collect();
    let inner = SolverConfig {
        exec: Execution::Sequential,
        ..*cfg
    };
    let scores: Vec<Result<f64>> = cfg.exec.map(&tasks, |&(g, f)| {
        let train: Vec<usize> = (0..fold_of.len()).filter(|&i| fold_of[i] != f).collect();
        let held: Vec<usize> = (0..fold_of.len()).filter(|&i| fold_of[i] == f).collect();
        let xt = x.select(&train);
        let yt: Vec<usize> = train.iter().map(|&i| class_of[i]).collect();
        let model = train_ovr(&xt, &yt, n_classes, grid[g], ClassWeighting::None, &inner)?;
        let correct = held
            .iter()
            .filter(|&&i| model.predict(x.row(i)) == class_of[i])
            .count();
        Ok(correct as f64 / held.len() as f64)
    });
    let mut table = Vec::with_capacity(grid.len());
    for (g, params) in grid.iter().enumerate() {
        let cell: Vec<&Result<f64>> = scores[g * folds..(g + 1) * folds].iter().collect();
        let ok: Vec<f64> = cell.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
        let mean_accuracy = if ok.len() == folds {
            Some(ok.iter().sum::<f64>() / folds as f64)
        } else {
            for r in cell.iter().filter_map(|r| r.as_ref().err()) {
                warn!("grid cell C={} gamma={} failed: {r}", params.c, params.gamma);
            }
            None
        };
        info!(
            "grid C={:e} gamma={:e}: {}",
            params.c,
            params.gamma,
            mean_accuracy.map_or("failed".to_string(), |a| format!("{a:.4}"))
        );
        table.push(GridCell {
            params: *params,
            mean_accuracy,
            fold_accuracies: ok,
        });
    }
    let best = pick_best(&table)
        .ok_or_else(|| Error::InvalidInput("every grid cell failed to train".into()))?;
    Ok(GridSearchResult { best, table })
}

fn pick_best(table: &[GridCell]) -> Option<KernelParams> {
    let mut best: Option<(f64, KernelParams)> = None;
    for cell in table {
        let Some(acc) = cell.mean_accuracy else {
            continue;
        };
        let better = match best {
            None => true,
            Some((b, p)) => {
                acc > b
                    || (acc == b
                        && (cell.params.c < p.c
                            || (cell.params.c == p.c && cell.params.gamma < p.gamma)))
            }
        };
        if better {
            best = Some((acc, cell.params));
        }
    }
    best.map(|(_, p)| p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn folds_are_stratified() {
        let class_of: Vec<usize> = (0..30).map(|i| usize::from(i >= 12)).collect();
        let f = stratified_folds(&class_of, &names(2), 3, 7).unwrap();
        for fold in 0..3 {
            let a = (0..30).filter(|&i| f[i] == fold && class_of[i] == 0).count();
            let b = (0..30).filter(|&i| f[i] == fold && class_of[i] == 1).count();
            assert_eq!((a, b), (4, 6));
        }
        assert_eq!(f, stratified_folds(&class_of, &names(2), 3, 7).unwrap());
    }

    #[test]
    fn class_smaller_than_folds_is_named() {
        let err = stratified_folds(&[0, 0, 0, 1, 1], &names(2), 3, 0).unwrap_err();
        match err {
            Error::ClassTooSmall { class, count, folds } => {
                assert_eq!((class.as_str(), count, folds), ("c1", 2, 3))
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn default_grid_is_odd_decades() {
        let g = odd_decade_grid();
        assert_eq!(g.len(), 36);
        assert!(g.contains(&KernelParams { c: 1e3, gamma: 1e-1 }));
        assert!(!g.iter().any(|p| p.c == 1e2));
    }

    #[test]
    fn tie_rule_prefers_smaller_c_then_gamma() {
        let cell = |c, gamma, acc| GridCell {
            params: KernelParams { c, gamma },
            mean_accuracy: acc,
            fold_accuracies: vec![],
        };
        let table = vec![
            cell(10.0, 1.0, Some(0.9)),
            cell(1.0, 10.0, Some(0.9)),
            cell(1.0, 0.1, Some(0.9)),
            cell(0.1, 0.1, None),
            cell(100.0, 0.1, Some(0.8)),
        ];
        assert_eq!(pick_best(&table), Some(KernelParams { c: 1.0, gamma: 0.1 }));
    }

    #[test]
    fn single_cell_grid_returns_that_cell() {
        let rows: Vec<[f64; 1]> = (0..12).map(|i| [i as f64 / 12.0]).collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let class_of: Vec<usize> = (0..12).map(|i| usize::from(i >= 6)).collect();
        let only = KernelParams { c: 10.0, gamma: 5.0 };
        let r = grid_search_cv(&x, &class_of, &names(2), &[only], 3, 1, &SolverConfig::default())
            .unwrap();
        assert_eq!(r.best, only);
        assert_eq!(r.table.len(), 1);
        assert_eq!(r.table[0].mean_accuracy, Some(1.0));
    }
}
