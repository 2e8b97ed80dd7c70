//! Experiment drivers: sweeps over strategies, heterogeneity and
//! participation, plus the two adversarial setups.

use serde::{Deserialize, Serialize};

use super::{ClientBehavior, Federation, FederationConfig, FederationState};
use crate::aggregation::{AggregationStrategy, StrategyKind};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::parallel;
use crate::partition::{self, FederatedSplit, PartitionSpec};
use crate::rng;
use crate::ClientId;

fn all_strategies() -> Vec<StrategyKind> {
    StrategyKind::ALL.to_vec()
}

fn default_adversary_scale() -> f64 {
    10.0
}

fn default_n_lowest() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioSpec {
    /// A single run with the base configuration.
    Single,
    /// Every combination of classes-per-client, participation rate and strategy.
    Grid {
        classes_per_client: Vec<usize>,
        participation_rates: Vec<f64>,
        #[serde(default = "all_strategies")]
        strategies: Vec<StrategyKind>,
    },
    /// One run per strategy on a shared split.
    Ablation {
        #[serde(default = "all_strategies")]
        strategies: Vec<StrategyKind>,
    },
    LowParticipation {
        participation_rates: Vec<f64>,
        #[serde(default = "all_strategies")]
        strategies: Vec<StrategyKind>,
    },
    /// Train, double the data of the `n_lowest` weakest clients, train again.
    /// With `perturb_scale` set those clients also add noise to every update
    /// in the second phase.
    SeverityDoubling {
        #[serde(default = "default_n_lowest")]
        n_lowest: usize,
        #[serde(default = "all_strategies")]
        strategies: Vec<StrategyKind>,
        #[serde(default)]
        perturb_scale: Option<f64>,
    },
    /// The listed clients submit scaled random parameters every round.
    Poisoned {
        adversaries: Vec<ClientId>,
        #[serde(default = "default_adversary_scale")]
        scale: f64,
        /// Adversaries report this multiple of the median honest sample count.
        #[serde(default)]
        sample_multiplier: Option<f64>,
        #[serde(default = "all_strategies")]
        strategies: Vec<StrategyKind>,
    },
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        let strategies = match self {
            ScenarioSpec::Single => return Ok(()),
            ScenarioSpec::Grid { classes_per_client, participation_rates, strategies } => {
                if classes_per_client.is_empty() || classes_per_client.contains(&0) {
                    return Err(Error::invalid(
                        "scenario.classes_per_client",
                        "must list at least one value, all at least 1",
                    ));
                }
                check_rates(participation_rates)?;
                strategies
            }
            ScenarioSpec::Ablation { strategies } => strategies,
            ScenarioSpec::LowParticipation { participation_rates, strategies } => {
                check_rates(participation_rates)?;
                strategies
            }
            ScenarioSpec::SeverityDoubling { n_lowest, strategies, perturb_scale } => {
                if *n_lowest == 0 {
                    return Err(Error::invalid("scenario.n_lowest", "must be at least 1"));
                }
                if let Some(s) = perturb_scale {
                    check_scale("scenario.perturb_scale", *s)?;
                }
                strategies
            }
            ScenarioSpec::Poisoned { adversaries, scale, sample_multiplier, strategies } => {
                check_scale("scenario.scale", *scale)?;
                if let Some(m) = sample_multiplier {
                    if !(*m > 0.0 && m.is_finite()) {
                        return Err(Error::invalid(
                            "scenario.sample_multiplier",
                            format!("must be positive, got {m}"),
                        ));
                    }
                }
                let mut sorted = adversaries.clone();
                sorted.sort_unstable();
                if sorted.windows(2).any(|w| w[0] == w[1]) {
                    return Err(Error::invalid("scenario.adversaries", "lists a client twice"));
                }
                strategies
            }
        };
        if strategies.is_empty() {
            return Err(Error::invalid("scenario.strategies", "must list at least one strategy"));
        }
        Ok(())
    }

    /// `(setting, strategy)` for every run `run_scenario` will produce, in order.
    pub fn planned_runs(&self, base: StrategyKind) -> Vec<(String, StrategyKind)> {
        let cross = |settings: Vec<String>, strategies: &[StrategyKind]| {
            settings
                .into_iter()
                .flat_map(|s| strategies.iter().map(move |&k| (s.clone(), k)))
                .collect()
        };
        match self {
            ScenarioSpec::Single => vec![(String::new(), base)],
            ScenarioSpec::Ablation { strategies } | ScenarioSpec::Poisoned { strategies, .. } => {
                cross(vec![String::new()], strategies)
            }
            ScenarioSpec::Grid { classes_per_client, participation_rates, strategies } => cross(
                classes_per_client
                    .iter()
                    .flat_map(|n| participation_rates.iter().map(move |pr| format!("ncc{n}_pr{pr}")))
                    .collect(),
                strategies,
            ),
            ScenarioSpec::LowParticipation { participation_rates, strategies } => {
                cross(participation_rates.iter().map(|pr| format!("pr{pr}")).collect(), strategies)
            }
            ScenarioSpec::SeverityDoubling { strategies, .. } => {
                cross(vec!["phase1".into(), "phase2".into()], strategies)
            }
        }
    }

    pub fn planned_labels(&self, base: StrategyKind) -> Vec<String> {
        self.planned_runs(base).iter().map(|(s, k)| label(s, *k)).collect()
    }
}

fn check_rates(rates: &[f64]) -> Result<()> {
    if rates.is_empty() {
        return Err(Error::invalid("scenario.participation_rates", "must list at least one rate"));
    }
    for &pr in rates {
        if !(pr > 0.0 && pr <= 1.0) {
            return Err(Error::invalid(
                "scenario.participation_rates",
                format!("every rate must lie in (0, 1], got {pr}"),
            ));
        }
    }
    Ok(())
}

fn check_scale(field: &'static str, s: f64) -> Result<()> {
    if s.is_finite() && s >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be finite and nonnegative, got {s}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRun {
    /// Unique within the scenario and safe to use as a file stem.
    pub label: String,
    /// The sweep coordinates without the strategy, e.g. `ncc3_pr0.5`.
    pub setting: String,
    pub strategy: StrategyKind,
    pub state: FederationState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutcome {
    pub runs: Vec<ScenarioRun>,
    /// The split each run trained on, indexed like `runs`' settings.
    pub splits: Vec<(String, FederatedSplit)>,
    /// Clients whose shards were doubled (severity scenario only).
    pub doubled_clients: Vec<ClientId>,
}

impl ScenarioOutcome {
    pub fn run(&self, label: &str) -> Option<&ScenarioRun> {
        self.runs.iter().find(|r| r.label == label)
    }
}

struct Job<'a> {
    setting: String,
    strategy: StrategyKind,
    cfg: FederationConfig,
    split: &'a FederatedSplit,
    behaviors: Vec<(ClientId, ClientBehavior)>,
}

fn label(setting: &str, strategy: StrategyKind) -> String {
    if setting.is_empty() {
        strategy.name().to_string()
    } else {
        format!("{setting}_{}", strategy.name())
    }
}

fn with_strategy(base: &FederationConfig, kind: StrategyKind) -> FederationConfig {
    FederationConfig {
        strategy: AggregationStrategy { kind, ..base.strategy },
        ..*base
    }
}

fn execute(jobs: Vec<Job<'_>>, base: &FederationConfig) -> Result<Vec<ScenarioRun>> {
    parallel::map_collect(base.execution, &jobs, |job| {
        let mut fed = Federation::new(&job.cfg, job.split)?;
        for &(client, behavior) in &job.behaviors {
            fed = fed.with_behavior(client, behavior)?;
        }
        Ok(ScenarioRun {
            label: label(&job.setting, job.strategy),
            setting: job.setting.clone(),
            strategy: job.strategy,
            state: fed.run()?,
        })
    })
    .into_iter()
    .collect()
}

fn sweep<'a>(
    setting: &str,
    base: &FederationConfig,
    split: &'a FederatedSplit,
    strategies: &[StrategyKind],
    behaviors: &[(ClientId, ClientBehavior)],
) -> Vec<Job<'a>> {
    strategies
        .iter()
        .map(|&kind| Job {
            setting: setting.to_string(),
            strategy: kind,
            cfg: with_strategy(base, kind),
            split,
            behaviors: behaviors.to_vec(),
        })
        .collect()
}

fn median(mut v: Vec<usize>) -> f64 {
    v.sort_unstable();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0
    }
}

/// Clients ranked by final local test accuracy, weakest first, ties by id.
pub fn weakest_clients(state: &FederationState, n: usize) -> Result<Vec<ClientId>> {
    let eval = state
        .final_record()
        .and_then(|r| r.eval.as_ref())
        .ok_or_else(|| Error::invalid("history", "final round carries no evaluation"))?;
    let mut ranked: Vec<(ClientId, f64)> = eval.local.per_client.iter().map(|(&c, &a)| (c, a)).collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    Ok(ranked.into_iter().take(n).map(|(c, _)| c).collect())
}

/// Runs every federation a scenario describes. Runs within a sweep share
/// their split so that only the swept parameter differs between them.
pub fn run_scenario(
    spec: &ScenarioSpec,
    base: &FederationConfig,
    data: &Dataset,
    partition_spec: &PartitionSpec,
) -> Result<ScenarioOutcome> {
    spec.validate()?;
    base.validate()?;
    let mut doubled_clients = Vec::new();

    let (runs, splits) = match spec {
        ScenarioSpec::Single => {
            let split = partition::partition(data, partition_spec)?;
            let runs = execute(sweep("", base, &split, &[base.strategy.kind], &[]), base)?;
            (runs, vec![(String::new(), split)])
        }
        ScenarioSpec::Ablation { strategies } => {
            let split = partition::partition(data, partition_spec)?;
            let runs = execute(sweep("", base, &split, strategies, &[]), base)?;
            (runs, vec![(String::new(), split)])
        }
        ScenarioSpec::Grid { classes_per_client, participation_rates, strategies } => {
            let splits = classes_per_client
                .iter()
                .map(|&ncc| {
                    let ps = PartitionSpec { classes_per_client: ncc, ..*partition_spec };
                    Ok((format!("ncc{ncc}"), partition::partition(data, &ps)?))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut jobs = Vec::new();
            for (ncc_label, split) in &splits {
                for &pr in participation_rates {
                    let cfg = FederationConfig { participation_rate: pr, ..*base };
                    jobs.extend(sweep(&format!("{ncc_label}_pr{pr}"), &cfg, split, strategies, &[]));
                }
            }
            (execute(jobs, base)?, splits)
        }
        ScenarioSpec::LowParticipation { participation_rates, strategies } => {
            let split = partition::partition(data, partition_spec)?;
            let mut jobs = Vec::new();
            for &pr in participation_rates {
                let cfg = FederationConfig { participation_rate: pr, ..*base };
                jobs.extend(sweep(&format!("pr{pr}"), &cfg, &split, strategies, &[]));
            }
            let runs = execute(jobs, base)?;
            (runs, vec![(String::new(), split)])
        }
        ScenarioSpec::SeverityDoubling { n_lowest, strategies, perturb_scale } => {
            let split = partition::partition(data, partition_spec)?;
            if *n_lowest > split.n_clients() {
                return Err(Error::invalid(
                    "scenario.n_lowest",
                    format!("{n_lowest} exceeds the {} clients", split.n_clients()),
                ));
            }
            let mut runs = execute(sweep("phase1", base, &split, strategies, &[]), base)?;
            doubled_clients = weakest_clients(&runs[0].state, *n_lowest)?;
            doubled_clients.sort_unstable();
            let seed = rng::derive_seed(partition_spec.seed, &[rng::tag::DOUBLE]);
            let doubled = partition::double_client_samples(&split, data, &doubled_clients, seed)?;
            let behaviors: Vec<(ClientId, ClientBehavior)> = match perturb_scale {
                Some(scale) => doubled_clients
                    .iter()
                    .map(|&c| (c, ClientBehavior::Perturbed { scale: *scale }))
                    .collect(),
                None => Vec::new(),
            };
            runs.extend(execute(sweep("phase2", base, &doubled, strategies, &behaviors), base)?);
            (runs, vec![("phase1".into(), split), ("phase2".into(), doubled)])
        }
        ScenarioSpec::Poisoned { adversaries, scale, sample_multiplier, strategies } => {
            let split = partition::partition(data, partition_spec)?;
            for &a in adversaries {
                split.shard(a)?;
            }
            let honest: Vec<usize> = split
                .shards()
                .iter()
                .filter(|s| !adversaries.contains(&s.client_id))
                .map(|s| s.train.len())
                .collect();
            let reported_samples = match sample_multiplier {
                Some(m) if honest.is_empty() => {
                    return Err(Error::invalid(
                        "scenario.sample_multiplier",
                        format!("multiplier {m} needs at least one honest client"),
                    ))
                }
                Some(m) => Some(((m * median(honest)).round() as usize).max(1)),
                None => None,
            };
            let behaviors: Vec<(ClientId, ClientBehavior)> = adversaries
                .iter()
                .map(|&c| (c, ClientBehavior::RandomParams { scale: *scale, reported_samples }))
                .collect();
            let runs = execute(sweep("", base, &split, strategies, &behaviors), base)?;
            (runs, vec![(String::new(), split)])
        }
    };
    Ok(ScenarioOutcome { runs, splits, doubled_clients })
}
