//! Deterministic federated-learning simulator.
//!
//! Clients train small classifiers on private non-iid shards; a server
//! combines their parameters with one of several weighting schemes:
//! uniform mean, sample-count weighting (FedAvg), inverse distance to the
//! participants' mean model (IDA), and inverse training accuracy (INTRAC),
//! plus products of these.
//!
//! Every random choice is keyed by an explicit seed, so runs are
//! bit-reproducible and independent of thread scheduling.

pub mod aggregation;
pub mod data;
pub mod error;
pub mod metrics;
pub mod models;
pub mod orchestrator;
pub mod parallel;
pub mod params;
pub mod partition;
pub mod rng;

pub type ClientId = usize;

pub use aggregation::{AggregationStrategy, ClientUpdate, CoefficientSet, StrategyKind};
pub use data::Dataset;
pub use error::{Error, Result};
pub use models::{ModelKind, ModelSpec, TrainConfig};
pub use parallel::Execution;
pub use params::ParamVector;
