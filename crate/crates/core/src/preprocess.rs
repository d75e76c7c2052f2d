//! Class-balance filters and min-max scaling.

use std::collections::BTreeMap;

use log::info;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureMatrix, FeatureVector};
use crate::error::{Error, Result};
use crate::ingest::Labeled;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_DOWNSAMPLE_FACTOR: usize = 100;
pub const DEFAULT_MIN_CLASS_COUNT: usize = 20;

/// Per-label counts in lexicographic label order.
pub fn class_counts<T: Labeled>(items: &[T]) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for it in items {
        *counts.entry(it.label().to_string()).or_insert(0) += 1;
    }
    counts
}

/// The two most frequent labels; ties go to the lexicographically smaller label.
pub fn dominant_classes<T: Labeled>(items: &[T]) -> Result<[String; 2]> {
    let counts = class_counts(items);
    if counts.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "downsampling needs at least two classes, found {}",
            counts.len()
        )));
    }
    let mut ranked: Vec<(&String, &usize)> = counts.iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
    Ok([ranked[0].0.clone(), ranked[1].0.clone()])
}

/// Reduces each of the two most frequent classes to `ceil(n / factor)` items by
/// seeded uniform sampling without replacement. Survivors keep input order.
pub fn downsample_dominant<T: Labeled>(items: Vec<T>, factor: usize, seed: u64) -> Result<Vec<T>> {
    if factor == 0 {
        return Err(Error::InvalidInput("downsample factor must be >= 1".into()));
    }
    let dominant = dominant_classes(&items)?;
    if factor == 1 {
        return Ok(items);
    }
    let mut keep = vec![true; items.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // dominant[] is in a fixed order, so the rng stream is consumed deterministically.
    let mut sorted = dominant.clone();
    sorted.sort();
    for class in &sorted {
        let members: Vec<usize> = items
            .iter()
            .enumerate()
            .filter(|(_, it)| it.label() == class)
            .map(|(i, _)| i)
            .collect();
        let target = members.len().div_ceil(factor);
        for &i in &members {
            keep[i] = false;
        }
        for j in index::sample(&mut rng, members.len(), target) {
            keep[members[j]] = true;
        }
        info!(
            "downsampled `{class}` from {} to {target} (factor {factor})",
            members.len()
        );
    }
    Ok(items
        .into_iter()
        .zip(keep)
        .filter_map(|(it, k)| k.then_some(it))
        .collect())
}

/// Removes every class with fewer than `min_count` members.
pub fn drop_rare_classes<T: Labeled>(items: Vec<T>, min_count: usize) -> Result<Vec<T>> {
    let counts = class_counts(&items);
    for (class, n) in counts.iter().filter(|(_, &n)| n < min_count) {
        info!("dropping rare class `{class}` ({n} < {min_count})");
    }
    let out: Vec<T> = items
        .into_iter()
        .filter(|it| counts[it.label()] >= min_count)
        .collect();
    if out.is_empty() {
        return Err(Error::InvalidInput(
            "rare-class filter removed every training record".into(),
        ));
    }
    Ok(out)
}

/// Which corpus the min-max scaler is fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingMode {
    /// Fit on training data only; test values are clamped into `[0, 1]`.
    #[default]
    TrainOnly,
    /// Fit on training and test data together.
    TrainAndTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ScalingParams {
    /// Element-wise min and max over every row of every given matrix.
    pub fn fit(corpora: &[&FeatureMatrix]) -> Result<Self> {
        let first = corpora
            .iter()
            .find(|m| !m.is_empty())
            .ok_or_else(|| Error::InvalidInput("cannot fit a scaler on no data".into()))?;
        let cols = first.cols();
        let mut min = vec![f64::INFINITY; cols];
        let mut max = vec![f64::NEG_INFINITY; cols];
        for m in corpora {
            if m.is_empty() {
                continue;
            }
            if m.cols() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    actual: m.cols(),
                });
            }
            for row in m.iter_rows() {
                for (j, &v) in row.iter().enumerate() {
                    min[j] = min[j].min(v);
                    max[j] = max[j].max(v);
                }
            }
        }
        Ok(Self { min, max })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    fn scale_value(&self, j: usize, v: f64) -> f64 {
        let (lo, hi) = (self.min[j], self.max[j]);
        if hi <= lo {
            return 0.0;
        }
        ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
    }

    pub fn apply(&self, raw: &[f64]) -> Result<FeatureVector> {
        if raw.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: raw.len(),
            });
        }
        Ok(FeatureVector(
            raw.iter()
                .enumerate()
                .map(|(j, &v)| self.scale_value(j, v))
                .collect(),
        ))
    }

    pub fn apply_matrix(&self, raw: &FeatureMatrix) -> Result<FeatureMatrix> {
        let mut out = FeatureMatrix::new(self.dim());
        for row in raw.iter_rows() {
            out.push_row(&self.apply(row)?.0)?;
        }
        Ok(out)
    }
}
