//! Flat model-parameter vectors and the reductions the server needs.
//!
//! Every model, whatever its layer structure, is exchanged as one flattened
//! `f64` vector. Reductions always accumulate in input order, so a caller that
//! orders clients by id gets bit-reproducible results.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the sum of aggregation coefficients.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// A non-empty vector of finite model parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("parameter vector"));
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(ParamVector(values))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "parameter vector must have dim >= 1");
        ParamVector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    fn check_dim(&self, other: &ParamVector) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for ParamVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        ParamVector::new(values)
    }
}

impl From<ParamVector> for Vec<f64> {
    fn from(p: ParamVector) -> Self {
        p.0
    }
}

impl AsRef<[f64]> for ParamVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

fn common_dim(vs: &[ParamVector]) -> Result<usize> {
    let first = vs.first().ok_or(Error::Empty("parameter vector list"))?;
    for v in &vs[1..] {
        first.check_dim(v)?;
    }
    Ok(first.dim())
}

fn finite(values: Vec<f64>) -> Result<ParamVector> {
    ParamVector::new(values)
}

/// Sum of absolute coordinate differences.
pub fn l1_distance(a: &ParamVector, b: &ParamVector) -> Result<f64> {
    a.check_dim(b)?;
    Ok(a.0.iter().zip(&b.0).map(|(x, y)| (x - y).abs()).sum())
}

/// Coordinatewise arithmetic mean.
pub fn average(vs: &[ParamVector]) -> Result<ParamVector> {
    let dim = common_dim(vs)?;
    if vs.len() == 1 {
        return Ok(vs[0].clone());
    }
    let mut acc = vec![0.0; dim];
    for v in vs {
        for (a, x) in acc.iter_mut().zip(&v.0) {
            *a += x;
        }
    }
    let k = vs.len() as f64;
    acc.iter_mut().for_each(|a| *a /= k);
    finite(acc)
}

/// `Σ_k alphas[k] · vs[k]`, where the alphas form a convex combination.
pub fn weighted_sum(vs: &[ParamVector], alphas: &[f64]) -> Result<ParamVector> {
    let dim = common_dim(vs)?;
    if alphas.len() != vs.len() {
        return Err(Error::LengthMismatch {
            what: "coefficients",
            expected: vs.len(),
            found: alphas.len(),
        });
    }
    if let Some((index, &value)) = alphas
        .iter()
        .enumerate()
        .find(|(_, a)| !a.is_finite() || **a < 0.0)
    {
        return Err(Error::invalid(
            "coefficients",
            format!("entry {index} is {value}; coefficients must be finite and nonnegative"),
        ));
    }
    let sum: f64 = alphas.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::NotNormalized { sum });
    }
    let mut acc = vec![0.0; dim];
    for (v, &alpha) in vs.iter().zip(alphas) {
        for (a, x) in acc.iter_mut().zip(&v.0) {
            *a += alpha * x;
        }
    }
    finite(acc)
}
