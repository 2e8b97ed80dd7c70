//! The federated training loop.
//!
//! Each round samples `⌈pr·K⌉` clients, has each of them train from the
//! current global model on its private shard, and aggregates the returned
//! parameters into the next global model. Clients train independently (in
//! parallel when enabled); the aggregation reduces in ascending client id.

mod scenario;

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::aggregation::{self, AggregationStrategy, ClientUpdate};
use crate::error::{Error, Result};
use crate::metrics::{self, RoundRecord};
use crate::models::{self, ModelSpec, TrainConfig};
use crate::parallel::{self, Execution};
use crate::params::ParamVector;
use crate::partition::FederatedSplit;
use crate::rng;
use crate::ClientId;

pub use scenario::{run_scenario, ScenarioOutcome, ScenarioRun, ScenarioSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FederationConfig {
    pub rounds: usize,
    pub participation_rate: f64,
    pub strategy: AggregationStrategy,
    pub train: TrainConfig,
    pub model: ModelSpec,
    pub seed: u64,
    /// Evaluate every `eval_stride` rounds; the final round is always evaluated.
    pub eval_stride: usize,
    /// Record per-round wall time; off by default so artifacts are byte-stable.
    pub record_wall_time: bool,
    pub execution: Execution,
}

impl FederationConfig {
    pub fn new(model: ModelSpec, train: TrainConfig, strategy: AggregationStrategy, rounds: usize) -> Self {
        FederationConfig {
            rounds,
            participation_rate: 1.0,
            strategy,
            train,
            model,
            seed: 0,
            eval_stride: 1,
            record_wall_time: false,
            execution: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::invalid("federation.rounds", "must be at least 1"));
        }
        let pr = self.participation_rate;
        if !(pr > 0.0 && pr <= 1.0) {
            return Err(Error::invalid(
                "federation.participation_rate",
                format!("must lie in (0, 1], got {pr}"),
            ));
        }
        if self.eval_stride == 0 {
            return Err(Error::invalid("federation.eval_stride", "must be at least 1"));
        }
        AggregationStrategy::new(self.strategy.kind, self.strategy.epsilon)?;
        self.train.validate()?;
        self.model.validate()
    }
}

/// `⌈pr·K⌉`, clamped to `[1, K]`. A tolerance of 1e-9 absorbs representation
/// error so that e.g. `0.07 · 100` yields 7, not 8.
pub fn participant_count(participation_rate: f64, n_clients: usize) -> usize {
    let raw = (participation_rate * n_clients as f64 - 1e-9).ceil();
    (raw.max(1.0) as usize).min(n_clients)
}

/// Clients sampled uniformly without replacement for `round`, ascending.
pub fn sample_participants(
    seed: u64,
    round: usize,
    clients: &[ClientId],
    participation_rate: f64,
) -> Vec<ClientId> {
    let m = participant_count(participation_rate, clients.len());
    if m == clients.len() {
        return clients.to_vec();
    }
    let mut rng = rng::stream(seed, &[rng::tag::PARTICIPANTS, round as u64]);
    let mut chosen: Vec<ClientId> = index::sample(&mut rng, clients.len(), m)
        .into_iter()
        .map(|i| clients[i])
        .collect();
    chosen.sort_unstable();
    chosen
}

/// How a client responds when asked to train.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClientBehavior {
    Honest,
    /// Ignores its data and returns a fresh initialization-law draw scaled by
    /// `scale`, optionally over-reporting its sample count.
    RandomParams {
        scale: f64,
        reported_samples: Option<usize>,
    },
    /// Trains honestly, then adds initialization-law noise scaled by `scale`.
    Perturbed { scale: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientState {
    pub client_id: ClientId,
    /// Parameters after the client's most recent local training.
    pub params: ParamVector,
    pub train_accuracy: Option<f64>,
    pub n_samples: usize,
    pub participations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FederationState {
    pub global_params: ParamVector,
    /// Number of completed rounds.
    pub round: usize,
    pub clients: Vec<ClientState>,
    pub history: Vec<RoundRecord>,
}

impl FederationState {
    pub fn final_record(&self) -> Option<&RoundRecord> {
        self.history.last()
    }

    pub fn final_global_accuracy(&self) -> Option<f64> {
        self.final_record().and_then(RoundRecord::global_accuracy)
    }

    pub fn hull_violations(&self) -> usize {
        self.history.iter().filter(|r| !r.hull_ok).count()
    }
}

/// Checks `min_k p_k[i] <= g[i] <= max_k p_k[i]` for every coordinate.
pub fn within_convex_hull(global: &ParamVector, updates: &[ClientUpdate]) -> bool {
    (0..global.dim()).all(|i| {
        let (lo, hi) = updates.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), u| {
            let x = u.params.as_slice()[i];
            (lo.min(x), hi.max(x))
        });
        let g = global.as_slice()[i];
        let slack = 1e-9 * lo.abs().max(hi.abs()).max(1.0);
        g >= lo - slack && g <= hi + slack
    })
}

/// A configured federation over one split.
#[derive(Debug, Clone)]
pub struct Federation<'a> {
    cfg: &'a FederationConfig,
    split: &'a FederatedSplit,
    behaviors: BTreeMap<ClientId, ClientBehavior>,
}

struct Trained {
    update: ClientUpdate,
    local: ParamVector,
}

impl<'a> Federation<'a> {
    pub fn new(cfg: &'a FederationConfig, split: &'a FederatedSplit) -> Result<Self> {
        cfg.validate()?;
        if split.input_dim() != cfg.model.input_dim {
            return Err(Error::DimensionMismatch {
                left: split.input_dim(),
                right: cfg.model.input_dim,
            });
        }
        if split.n_classes() > cfg.model.n_classes {
            return Err(Error::invalid(
                "model.n_classes",
                format!(
                    "model predicts {} classes but the data has {}",
                    cfg.model.n_classes,
                    split.n_classes()
                ),
            ));
        }
        for s in split.shards() {
            if s.train.is_empty() {
                return Err(Error::Client {
                    client: s.client_id,
                    reason: "training shard is empty".into(),
                });
            }
        }
        Ok(Federation {
            cfg,
            split,
            behaviors: BTreeMap::new(),
        })
    }

    pub fn with_behavior(mut self, client: ClientId, behavior: ClientBehavior) -> Result<Self> {
        self.split.shard(client)?;
        match behavior {
            ClientBehavior::RandomParams { scale, .. } | ClientBehavior::Perturbed { scale }
                if !(scale.is_finite() && scale >= 0.0) =>
            {
                return Err(Error::invalid("behavior.scale", format!("must be finite and nonnegative, got {scale}")))
            }
            ClientBehavior::RandomParams { reported_samples: Some(0), .. } => {
                return Err(Error::invalid("behavior.reported_samples", "must be at least 1"))
            }
            _ => {}
        }
        self.behaviors.insert(client, behavior);
        Ok(self)
    }

    pub fn config(&self) -> &FederationConfig {
        self.cfg
    }

    pub fn split(&self) -> &FederatedSplit {
        self.split
    }

    pub fn initial_state(&self) -> Result<FederationState> {
        let global_params = models::init_params(&self.cfg.model)?;
        let clients = self
            .split
            .shards()
            .iter()
            .map(|s| ClientState {
                client_id: s.client_id,
                params: global_params.clone(),
                train_accuracy: None,
                n_samples: s.train.len(),
                participations: 0,
            })
            .collect();
        Ok(FederationState {
            global_params,
            round: 0,
            clients,
            history: Vec::new(),
        })
    }

    fn behavior(&self, client: ClientId) -> ClientBehavior {
        self.behaviors.get(&client).copied().unwrap_or(ClientBehavior::Honest)
    }

    fn noise(&self, client: ClientId, round: usize, tag: u64, scale: f64) -> Vec<f64> {
        let mut rng = rng::stream(self.cfg.seed, &[tag, client as u64, round as u64]);
        models::sample_init(&self.cfg.model, &mut rng)
            .into_iter()
            .map(|x| x * scale)
            .collect()
    }

    fn train_client(&self, client: ClientId, round: usize, global: &ParamVector) -> Result<Trained> {
        let shard = self.split.shard(client)?;
        let spec = &self.cfg.model;
        let (params, n_samples) = match self.behavior(client) {
            ClientBehavior::Honest | ClientBehavior::Perturbed { .. } => {
                let seed = rng::derive_seed(
                    self.cfg.seed,
                    &[rng::tag::LOCAL_TRAIN, self.cfg.train.seed, client as u64, round as u64],
                );
                let outcome = models::train_local(spec, global, &shard.train, &self.cfg.train.with_seed(seed))
                    .map_err(|e| Error::Client { client, reason: e.to_string() })?;
                let params = match self.behavior(client) {
                    ClientBehavior::Perturbed { scale } => {
                        let noise = self.noise(client, round, rng::tag::PERTURB, scale);
                        let values = outcome
                            .params
                            .as_slice()
                            .iter()
                            .zip(noise)
                            .map(|(p, n)| p + n)
                            .collect();
                        ParamVector::new(values)?
                    }
                    _ => outcome.params,
                };
                (params, shard.train.len())
            }
            ClientBehavior::RandomParams { scale, reported_samples } => (
                ParamVector::new(self.noise(client, round, rng::tag::ADVERSARY, scale))?,
                reported_samples.unwrap_or(shard.train.len()),
            ),
        };
        let train_accuracy = models::evaluate(spec, &params, &shard.train)?;
        Ok(Trained {
            update: ClientUpdate::new(client, params.clone(), n_samples, train_accuracy)?,
            local: params,
        })
    }

    pub fn run_round(&self, mut state: FederationState) -> Result<FederationState> {
        if state.round >= self.cfg.rounds {
            return Err(Error::invalid(
                "round",
                format!("federation already completed its {} rounds", self.cfg.rounds),
            ));
        }
        let started = Instant::now();
        let t = state.round;
        let participants = sample_participants(
            self.cfg.seed,
            t,
            &self.split.client_ids(),
            self.cfg.participation_rate,
        );
        if participants.is_empty() {
            return Err(Error::Empty("participant set"));
        }

        let global = &state.global_params;
        let trained: Vec<Trained> = parallel::map_collect(self.cfg.execution, &participants, |&c| {
            self.train_client(c, t, global)
        })
        .into_iter()
        .collect::<Result<_>>()?;

        let updates: Vec<ClientUpdate> = trained.iter().map(|t| t.update.clone()).collect();
        let (next, coefficients) = aggregation::aggregate_with_coefficients(&updates, self.cfg.strategy)?;
        let hull_ok = within_convex_hull(&next, &updates);

        for tr in trained {
            let idx = state
                .clients
                .binary_search_by_key(&tr.update.client_id, |c| c.client_id)
                .expect("participant is a known client");
            let client = &mut state.clients[idx];
            client.params = tr.local;
            client.train_accuracy = Some(tr.update.train_accuracy);
            client.participations += 1;
        }
        state.global_params = next;
        state.round = t + 1;

        let round = state.round;
        let eval = if round.is_multiple_of(self.cfg.eval_stride) || round == self.cfg.rounds {
            Some(metrics::evaluate_round(
                &self.cfg.model,
                &state.global_params,
                self.split,
                self.cfg.execution,
            )?)
        } else {
            None
        };
        let wall_ms = if self.cfg.record_wall_time {
            started.elapsed().as_millis() as u64
        } else {
            0
        };
        state.history.push(RoundRecord {
            round,
            strategy: self.cfg.strategy.kind.to_string(),
            participants,
            coefficients,
            eval,
            hull_ok,
            wall_ms,
        });
        Ok(state)
    }

    pub fn run(&self) -> Result<FederationState> {
        let mut state = self.initial_state()?;
        while state.round < self.cfg.rounds {
            state = self.run_round(state)?;
        }
        Ok(state)
    }
}

pub fn run_round(
    state: FederationState,
    cfg: &FederationConfig,
    split: &FederatedSplit,
) -> Result<FederationState> {
    Federation::new(cfg, split)?.run_round(state)
}

pub fn run_federation(cfg: &FederationConfig, split: &FederatedSplit) -> Result<FederationState> {
    Federation::new(cfg, split)?.run()
}
