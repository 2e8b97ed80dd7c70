use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SamplesPerClass {
    Uniform(usize),
    PerClass(Vec<usize>),
}

/// Isotropic Gaussian blobs, one per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_classes: usize,
    pub input_dim: usize,
    pub samples_per_class: SamplesPerClass,
    /// Within-class standard deviation.
    pub cluster_spread: f64,
    /// Standard deviation of the class centroids around the origin.
    pub class_separation: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 {
            return Err(Error::invalid("n_classes", "must be at least 2"));
        }
        if self.input_dim == 0 {
            return Err(Error::invalid("input_dim", "must be at least 1"));
        }
        match &self.samples_per_class {
            SamplesPerClass::Uniform(0) => {
                return Err(Error::invalid("samples_per_class", "must be at least 1"))
            }
            SamplesPerClass::PerClass(v) if v.len() != self.n_classes => {
                return Err(Error::invalid(
                    "samples_per_class",
                    format!("has {} entries for {} classes", v.len(), self.n_classes),
                ))
            }
            SamplesPerClass::PerClass(v) if v.contains(&0) => {
                return Err(Error::invalid("samples_per_class", "every entry must be at least 1"))
            }
            _ => {}
        }
        for (field, v) in [
            ("cluster_spread", self.cluster_spread),
            ("class_separation", self.class_separation),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(field, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn count(&self, class: usize) -> usize {
        match &self.samples_per_class {
            SamplesPerClass::Uniform(n) => *n,
            SamplesPerClass::PerClass(v) => v[class],
        }
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = rng::stream(spec.seed, &[rng::tag::DATA]);
    let centroids: Vec<Vec<f64>> = (0..spec.n_classes)
        .map(|_| {
            (0..spec.input_dim)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    spec.class_separation * z
                })
                .collect::<Vec<f64>>()
        })
        .collect();

    let total: usize = (0..spec.n_classes).map(|c| spec.count(c)).sum();
    let mut features = Vec::with_capacity(total * spec.input_dim);
    let mut labels = Vec::with_capacity(total);
    for (class, centre) in centroids.iter().enumerate() {
        for _ in 0..spec.count(class) {
            for &mu in centre {
                let z: f64 = StandardNormal.sample(&mut rng);
                features.push(mu + spec.cluster_spread * z);
            }
            labels.push(class);
        }
    }
    Dataset::new("synthetic", spec.input_dim, spec.n_classes, features, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn spec(samples: SamplesPerClass) -> SyntheticSpec {
        SyntheticSpec {
            n_classes: 2,
            input_dim: 3,
            samples_per_class: samples,
            cluster_spread: 1.0,
            class_separation: 5.0,
            seed: 42,
        }
    }

    #[test]
    fn counts_match_spec() {
        let d = generate_synthetic(&spec(SamplesPerClass::Uniform(10))).unwrap();
        assert_eq!(d.len(), 20);
        assert_eq!(d.class_counts(), BTreeMap::from([(0, 10), (1, 10)]));

        let d = generate_synthetic(&spec(SamplesPerClass::PerClass(vec![67, 11]))).unwrap();
        assert_eq!(d.class_counts(), BTreeMap::from([(0, 67), (1, 11)]));
    }

    #[test]
    fn deterministic_in_seed() {
        let s = spec(SamplesPerClass::Uniform(10));
        assert_eq!(generate_synthetic(&s).unwrap(), generate_synthetic(&s).unwrap());
        let mut other = s.clone();
        other.seed = 43;
        assert_ne!(generate_synthetic(&s).unwrap(), generate_synthetic(&other).unwrap());
    }

    #[test]
    fn validation() {
        assert!(generate_synthetic(&spec(SamplesPerClass::PerClass(vec![1]))).is_err());
        assert!(generate_synthetic(&spec(SamplesPerClass::Uniform(0))).is_err());
        let mut s = spec(SamplesPerClass::Uniform(3));
        s.cluster_spread = 0.0;
        assert!(generate_synthetic(&s).is_err());
    }
}
