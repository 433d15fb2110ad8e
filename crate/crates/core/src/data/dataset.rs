use ndarray::{Array2, Axis};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Batch;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Labeled feature vectors, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDataset {
    pub features: Array2<f32>,
    pub labels: Vec<usize>,
    pub classes: usize,
    pub split: Split,
}

impl FeatureDataset {
    pub fn new(
        features: Array2<f32>,
        labels: Vec<usize>,
        classes: usize,
        split: Split,
    ) -> Result<Self> {
        if labels.is_empty() || features.nrows() != labels.len() {
            return Err(Error::shape(format!(
                "{} rows, {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if classes == 0 || labels.iter().any(|&y| y >= classes) {
            return Err(Error::domain("label outside [0, classes)"));
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("non-finite feature"));
        }
        Ok(Self {
            features: features.as_standard_layout().into_owned(),
            labels,
            classes,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Row indices of each class.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.classes];
        for (i, &y) in self.labels.iter().enumerate() {
            out[y].push(i);
        }
        out
    }

    /// Rows at `indices` (duplicates allowed) as a training batch.
    pub fn gather(&self, indices: &[usize]) -> Result<Batch> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::shape(format!("index {bad} out of range")));
        }
        let features = self.features.select(Axis(0), indices);
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Batch::new(features, labels)
    }
}

/// Gaussian class clusters: class `c` is `Normal(mu_c, I)` with `mu_c` a
/// random unit direction scaled by `separation`.
pub fn generate_synthetic(
    classes: usize,
    dim: usize,
    train_per_class: usize,
    test_per_class: usize,
    separation: f64,
    seed: u64,
) -> Result<(FeatureDataset, FeatureDataset)> {
    if classes == 0 || dim == 0 || train_per_class == 0 || test_per_class == 0 {
        return Err(Error::domain("synthetic dataset counts must be >= 1"));
    }
    if !(separation >= 0.0) || !separation.is_finite() {
        return Err(Error::domain(format!("separation {separation}")));
    }
    let root = RngStream::new(seed).derive("synthetic");
    let mut rng = root.derive("means").rng();
    let mut means = Array2::<f64>::zeros((classes, dim));
    for mut row in means.rows_mut() {
        loop {
            row.iter_mut().for_each(|x| *x = StandardNormal.sample(&mut rng));
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                row.iter_mut().for_each(|x| *x *= separation / norm);
                break;
            }
        }
    }

    let draw = |label: &str, per_class: usize, split: Split| {
        let mut rng = root.derive(label).rng();
        let n = classes * per_class;
        let mut features = Array2::<f32>::zeros((n, dim));
        let mut labels = Vec::with_capacity(n);
        for c in 0..classes {
            for r in 0..per_class {
                let mut row = features.row_mut(c * per_class + r);
                for (x, &m) in row.iter_mut().zip(means.row(c)) {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    *x = (m + e) as f32;
                }
                labels.push(c);
            }
        }
        FeatureDataset::new(features, labels, classes, split)
    };
    Ok((
        draw("train", train_per_class, Split::Train)?,
        draw("test", test_per_class, Split::Test)?,
    ))
}
