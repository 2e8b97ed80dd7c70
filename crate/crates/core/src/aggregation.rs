//! Server-side weighting schemes.
//!
//! Each scheme maps the round's client updates to a [`CoefficientSet`], a
//! convex weighting over the participating clients. The global model is the
//! weighted sum of the participants' parameters under those coefficients.
//!
//! * `Mean`: uniform weights.
//! * `FedAvg`: weights proportional to local training-set size.
//! * `IDA`: weights proportional to the inverse ℓ1 distance between a client's
//!   parameters and the unweighted mean of all participants' parameters.
//! * `INTRAC`: weights inversely proportional to a client's own training
//!   accuracy, floored at chance level `1/K`.
//!
//! Schemes compose by elementwise product followed by renormalization.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{self, ParamVector, NORMALIZATION_TOLERANCE};
use crate::ClientId;

pub const DEFAULT_EPSILON: f64 = 1e-8;

/// One participant's contribution to a round.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientUpdate {
    pub client_id: ClientId,
    pub params: ParamVector,
    pub n_samples: usize,
    /// Accuracy on the client's own training shard after local training.
    pub train_accuracy: f64,
}

impl ClientUpdate {
    pub fn new(
        client_id: ClientId,
        params: ParamVector,
        n_samples: usize,
        train_accuracy: f64,
    ) -> Result<Self> {
        let update = ClientUpdate {
            client_id,
            params,
            n_samples,
            train_accuracy,
        };
        update.validate()?;
        Ok(update)
    }

    fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::Client {
                client: self.client_id,
                reason: "n_samples must be at least 1".into(),
            });
        }
        if !(0.0..=1.0).contains(&self.train_accuracy) {
            return Err(Error::Client {
                client: self.client_id,
                reason: format!(
                    "train accuracy {} is outside [0, 1]",
                    self.train_accuracy
                ),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum StrategyKind {
    Mean,
    FedAvg,
    Ida,
    IdaFedAvg,
    IdaIntrac,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::Mean,
        StrategyKind::FedAvg,
        StrategyKind::Ida,
        StrategyKind::IdaFedAvg,
        StrategyKind::IdaIntrac,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Mean => "mean",
            StrategyKind::FedAvg => "fedavg",
            StrategyKind::Ida => "ida",
            StrategyKind::IdaFedAvg => "ida+fedavg",
            StrategyKind::IdaIntrac => "ida+intrac",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let normalized: String = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .collect::<String>()
            .to_ascii_lowercase();
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == normalized)
            .ok_or_else(|| {
                Error::invalid(
                    "strategy",
                    format!(
                        "unknown strategy {s:?}; expected one of mean, fedavg, ida, ida+fedavg, ida+intrac"
                    ),
                )
            })
    }
}

impl TryFrom<String> for StrategyKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<StrategyKind> for String {
    fn from(k: StrategyKind) -> Self {
        k.name().to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregationStrategy {
    pub kind: StrategyKind,
    pub epsilon: f64,
}

impl AggregationStrategy {
    pub fn new(kind: StrategyKind, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::invalid(
                "epsilon",
                format!("must be a positive finite number, got {epsilon}"),
            ));
        }
        Ok(AggregationStrategy { kind, epsilon })
    }
}

impl From<StrategyKind> for AggregationStrategy {
    fn from(kind: StrategyKind) -> Self {
        AggregationStrategy {
            kind,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

/// Normalized, nonnegative weights keyed by client id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSet {
    alphas: BTreeMap<ClientId, f64>,
}

impl CoefficientSet {
    /// Normalizes raw nonnegative weights so they sum to one.
    ///
    /// Bitwise-equal raw weights map to exactly `1/K` each, so every scheme
    /// agrees bit-for-bit on symmetric inputs.
    pub fn from_raw(raw: BTreeMap<ClientId, f64>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::Empty("client update set"));
        }
        if let Some((&client, &w)) = raw.iter().find(|(_, w)| !w.is_finite() || **w < 0.0) {
            return Err(Error::Client {
                client,
                reason: format!("raw weight {w} is not a finite nonnegative number"),
            });
        }
        let first = *raw.values().next().expect("nonempty");
        let alphas = if raw.values().all(|w| w.to_bits() == first.to_bits()) {
            if first == 0.0 {
                return Err(Error::DegenerateCoefficients);
            }
            let uniform = 1.0 / raw.len() as f64;
            raw.into_keys().map(|id| (id, uniform)).collect()
        } else {
            let total: f64 = raw.values().sum();
            if total <= 0.0 || !total.is_finite() {
                return Err(Error::DegenerateCoefficients);
            }
            raw.into_iter().map(|(id, w)| (id, w / total)).collect()
        };
        Ok(CoefficientSet { alphas })
    }

    pub fn get(&self, client: ClientId) -> Option<f64> {
        self.alphas.get(&client).copied()
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    /// Iterates in ascending client id.
    pub fn iter(&self) -> impl Iterator<Item = (ClientId, f64)> + '_ {
        self.alphas.iter().map(|(&k, &v)| (k, v))
    }

    pub fn clients(&self) -> impl Iterator<Item = ClientId> + '_ {
        self.alphas.keys().copied()
    }

    pub fn values(&self) -> Vec<f64> {
        self.alphas.values().copied().collect()
    }

    pub fn sum(&self) -> f64 {
        self.alphas.values().sum()
    }

    pub fn min(&self) -> f64 {
        self.alphas.values().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.alphas.values().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Client holding the smallest coefficient; ties go to the lowest id.
    pub fn argmin(&self) -> Option<ClientId> {
        self.alphas
            .iter()
            .fold(None, |best: Option<(ClientId, f64)>, (&id, &a)| match best {
                Some((_, b)) if b <= a => best,
                _ => Some((id, a)),
            })
            .map(|(id, _)| id)
    }

    pub fn is_normalized(&self) -> bool {
        (self.sum() - 1.0).abs() <= NORMALIZATION_TOLERANCE
            && self
                .alphas
                .values()
                .all(|&a| (0.0..=1.0 + NORMALIZATION_TOLERANCE).contains(&a))
    }
}

/// Checks shared invariants and returns the updates sorted by client id.
fn sorted_updates(updates: &[ClientUpdate]) -> Result<Vec<&ClientUpdate>> {
    if updates.is_empty() {
        return Err(Error::Empty("client update set"));
    }
    let mut sorted: Vec<&ClientUpdate> = updates.iter().collect();
    sorted.sort_by_key(|u| u.client_id);
    for pair in sorted.windows(2) {
        if pair[0].client_id == pair[1].client_id {
            return Err(Error::DuplicateClient(pair[0].client_id));
        }
    }
    for u in &sorted {
        u.validate()?;
    }
    Ok(sorted)
}

pub fn mean_weights(updates: &[ClientUpdate]) -> Result<CoefficientSet> {
    let sorted = sorted_updates(updates)?;
    CoefficientSet::from_raw(sorted.iter().map(|u| (u.client_id, 1.0)).collect())
}

pub fn fedavg_weights(updates: &[ClientUpdate]) -> Result<CoefficientSet> {
    let sorted = sorted_updates(updates)?;
    CoefficientSet::from_raw(
        sorted
            .iter()
            .map(|u| (u.client_id, u.n_samples as f64))
            .collect(),
    )
}

/// Distance of each client (ascending id) to the unweighted mean of all
/// clients in the set.
pub fn distances_to_mean(updates: &[ClientUpdate]) -> Result<Vec<(ClientId, f64)>> {
    let sorted = sorted_updates(updates)?;
    let params: Vec<ParamVector> = sorted.iter().map(|u| u.params.clone()).collect();
    let mean = params::average(&params)?;
    sorted
        .iter()
        .map(|u| Ok((u.client_id, params::l1_distance(&mean, &u.params)?)))
        .collect()
}

/// Normalized `1 / (d + epsilon)` weights.
pub fn inverse_distance_weights(
    distances: &[(ClientId, f64)],
    epsilon: f64,
) -> Result<CoefficientSet> {
    AggregationStrategy::new(StrategyKind::Ida, epsilon)?;
    CoefficientSet::from_raw(
        distances
            .iter()
            .map(|&(id, d)| (id, 1.0 / (d + epsilon)))
            .collect(),
    )
}

pub fn ida_weights(updates: &[ClientUpdate], epsilon: f64) -> Result<CoefficientSet> {
    AggregationStrategy::new(StrategyKind::Ida, epsilon)?;
    inverse_distance_weights(&distances_to_mean(updates)?, epsilon)
}

pub fn intrac_weights(updates: &[ClientUpdate]) -> Result<CoefficientSet> {
    let sorted = sorted_updates(updates)?;
    let chance = 1.0 / sorted.len() as f64;
    let floored: Vec<f64> = sorted
        .iter()
        .map(|u| u.train_accuracy.max(chance))
        .collect();
    let z: f64 = floored.iter().sum();
    CoefficientSet::from_raw(
        sorted
            .iter()
            .zip(&floored)
            .map(|(u, a)| (u.client_id, z / a))
            .collect(),
    )
}

pub fn combine_weights(sets: &[CoefficientSet]) -> Result<CoefficientSet> {
    let first = sets.first().ok_or(Error::Empty("coefficient set list"))?;
    let ids: BTreeSet<ClientId> = first.clients().collect();
    for s in &sets[1..] {
        let other: BTreeSet<ClientId> = s.clients().collect();
        if other != ids {
            return Err(Error::ClientSetMismatch(
                ids.symmetric_difference(&other).copied().collect(),
            ));
        }
    }
    CoefficientSet::from_raw(
        ids.iter()
            .map(|&id| {
                let product = sets
                    .iter()
                    .map(|s| s.alphas[&id])
                    .product::<f64>();
                (id, product)
            })
            .collect(),
    )
}

pub fn coefficients(
    updates: &[ClientUpdate],
    strategy: AggregationStrategy,
) -> Result<CoefficientSet> {
    let eps = strategy.epsilon;
    match strategy.kind {
        StrategyKind::Mean => mean_weights(updates),
        StrategyKind::FedAvg => fedavg_weights(updates),
        StrategyKind::Ida => ida_weights(updates, eps),
        StrategyKind::IdaFedAvg => {
            combine_weights(&[ida_weights(updates, eps)?, fedavg_weights(updates)?])
        }
        StrategyKind::IdaIntrac => {
            combine_weights(&[ida_weights(updates, eps)?, intrac_weights(updates)?])
        }
    }
}

/// Aggregates and returns the coefficients that were used.
pub fn aggregate_with_coefficients(
    updates: &[ClientUpdate],
    strategy: AggregationStrategy,
) -> Result<(ParamVector, CoefficientSet)> {
    let coefs = coefficients(updates, strategy)?;
    let sorted = sorted_updates(updates)?;
    let params: Vec<ParamVector> = sorted.iter().map(|u| u.params.clone()).collect();
    let alphas: Vec<f64> = sorted
        .iter()
        .map(|u| coefs.get(u.client_id).expect("coefficient for every client"))
        .collect();
    let combined = params::weighted_sum(&params, &alphas)?;
    // Every convex combination of one point is that point; skip the rounding.
    if params.windows(2).all(|w| w[0] == w[1]) {
        return Ok((params[0].clone(), coefs));
    }
    Ok((combined, coefs))
}

pub fn aggregate(updates: &[ClientUpdate], strategy: AggregationStrategy) -> Result<ParamVector> {
    aggregate_with_coefficients(updates, strategy).map(|(p, _)| p)
}
