//! Labelled datasets and the ways to obtain them.

mod idx;
mod synthetic;
mod tabular;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng;

pub use idx::{load_idx, write_idx};
pub use synthetic::{generate_synthetic, SamplesPerClass, SyntheticSpec};
pub use tabular::load_csv;

/// Row-major feature matrix with integer class labels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dataset {
    name: String,
    input_dim: usize,
    n_classes: usize,
    features: Vec<f64>,
    labels: Vec<usize>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        input_dim: usize,
        n_classes: usize,
        features: Vec<f64>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::invalid("input_dim", "must be at least 1"));
        }
        if n_classes < 2 {
            return Err(Error::invalid("n_classes", "must be at least 2"));
        }
        if features.len() != labels.len() * input_dim {
            return Err(Error::LengthMismatch {
                what: "features",
                expected: labels.len() * input_dim,
                found: features.len(),
            });
        }
        if let Some((index, &value)) = features.iter().enumerate().find(|(_, v)| !v.is_finite())
        {
            return Err(Error::NonFinite { index, value });
        }
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= n_classes) {
            return Err(Error::invalid(
                "labels",
                format!("sample {i} has label {l}, outside [0, {n_classes})"),
            ));
        }
        Ok(Dataset {
            name: name.into(),
            input_dim,
            n_classes,
            features,
            labels,
        })
    }

    pub fn empty(name: impl Into<String>, input_dim: usize, n_classes: usize) -> Result<Self> {
        Dataset::new(name, input_dim, n_classes, Vec::new(), Vec::new())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    /// Counts for every class that occurs at least once.
    pub fn class_counts(&self) -> BTreeMap<usize, usize> {
        let mut counts = BTreeMap::new();
        for &l in &self.labels {
            *counts.entry(l).or_insert(0) += 1;
        }
        counts
    }

    /// Indices of every sample of `class`, in ascending order.
    pub fn class_indices(&self, class: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == class).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.input_dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            name: self.name.clone(),
            input_dim: self.input_dim,
            n_classes: self.n_classes,
            features,
            labels,
        }
    }

    /// Concatenates datasets that share `input_dim` and `n_classes`.
    pub fn concat<'a>(name: &str, parts: impl IntoIterator<Item = &'a Dataset>) -> Result<Dataset> {
        let mut parts = parts.into_iter();
        let first = parts.next().ok_or(Error::Empty("dataset list"))?;
        let mut out = first.clone();
        out.name = name.to_string();
        for p in parts {
            if p.input_dim != out.input_dim {
                return Err(Error::DimensionMismatch {
                    left: out.input_dim,
                    right: p.input_dim,
                });
            }
            if p.n_classes != out.n_classes {
                return Err(Error::invalid(
                    "n_classes",
                    format!("cannot concatenate {} and {} classes", out.n_classes, p.n_classes),
                ));
            }
            out.features.extend_from_slice(&p.features);
            out.labels.extend_from_slice(&p.labels);
        }
        Ok(out)
    }
}

/// Number of training samples for a local split: `round(fraction · n)`,
/// clamped so both sides are nonempty when `n >= 2`.
pub(crate) fn train_count(n: usize, fraction: f64) -> usize {
    let raw = (fraction * n as f64).round() as usize;
    if n < 2 {
        return n;
    }
    raw.clamp(1, n - 1)
}

pub(crate) fn check_fraction(fraction: f64) -> Result<()> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(
            "train_fraction",
            format!("must lie strictly between 0 and 1, got {fraction}"),
        ));
    }
    Ok(())
}

/// Random train/test partition, deterministic in `seed`.
pub fn split_train_test(d: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    check_fraction(train_fraction)?;
    if d.len() < 2 {
        return Err(Error::invalid(
            "dataset",
            format!("need at least 2 samples to split, found {}", d.len()),
        ));
    }
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.shuffle(&mut rng::stream(seed, &[rng::tag::SPLIT]));
    let n_train = train_count(d.len(), train_fraction);
    let (train, test) = order.split_at(n_train);
    Ok((d.subset(train), d.subset(test)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numbered(n: usize) -> Dataset {
        let features: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
        Dataset::new("numbered", 1, 3, features, labels).unwrap()
    }

    fn ids(d: &Dataset) -> Vec<usize> {
        let mut v: Vec<usize> = d.features().iter().map(|&x| x as usize).collect();
        v.sort_unstable();
        v
    }

    #[test]
    fn construction_validates() {
        assert!(Dataset::new("x", 2, 3, vec![0.0; 3], vec![0]).is_err());
        assert!(Dataset::new("x", 1, 3, vec![0.0], vec![3]).is_err());
        assert!(Dataset::new("x", 1, 1, vec![0.0], vec![0]).is_err());
        assert!(Dataset::new("x", 1, 2, vec![f64::NAN], vec![0]).is_err());
    }

    #[test]
    fn class_counts_match_labels() {
        let d = numbered(10);
        assert_eq!(d.class_counts(), BTreeMap::from([(0, 4), (1, 3), (2, 3)]));
        assert_eq!(d.class_indices(1), vec![1, 4, 7]);
    }

    #[test]
    fn split_ninety_ten() {
        let (train, test) = split_train_test(&numbered(100), 0.9, 4).unwrap();
        assert_eq!((train.len(), test.len()), (90, 10));
    }

    #[test]
    fn split_is_a_partition() {
        let d = numbered(37);
        let (train, test) = split_train_test(&d, 0.7, 11).unwrap();
        let mut all = ids(&train);
        all.extend(ids(&test));
        all.sort_unstable();
        assert_eq!(all, (0..37).collect::<Vec<_>>());
        assert_eq!(train.len(), 26);
    }

    #[test]
    fn split_is_seed_deterministic() {
        let d = numbered(50);
        assert_eq!(
            split_train_test(&d, 0.9, 3).unwrap(),
            split_train_test(&d, 0.9, 3).unwrap()
        );
        assert_ne!(
            split_train_test(&d, 0.9, 3).unwrap().0,
            split_train_test(&d, 0.9, 4).unwrap().0
        );
    }

    #[test]
    fn split_rejects_bad_input() {
        assert!(split_train_test(&numbered(10), 1.0, 0).is_err());
        assert!(split_train_test(&numbered(10), 0.0, 0).is_err());
        assert!(split_train_test(&numbered(1), 0.5, 0).is_err());
    }

    #[test]
    fn tiny_splits_keep_both_sides() {
        assert_eq!(train_count(2, 0.9), 1);
        assert_eq!(train_count(20, 0.9), 18);
        assert_eq!(train_count(3, 0.01), 1);
        assert_eq!(train_count(1, 0.9), 1);
    }

    #[test]
    fn concat_checks_shapes() {
        let a = numbered(3);
        let joined = Dataset::concat("j", [&a, &a]).unwrap();
        assert_eq!(joined.len(), 6);
        let other = Dataset::new("o", 2, 3, vec![0.0; 2], vec![0]).unwrap();
        assert!(Dataset::concat("j", [&a, &other]).is_err());
    }
}
