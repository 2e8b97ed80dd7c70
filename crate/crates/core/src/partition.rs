//! Label-skewed federated splits.
//!
//! Each client is assigned `classes_per_client` distinct classes at random and
//! draws its samples from those classes' pools without replacement, so no
//! sample is shared between clients. Each client's local data is then split
//! into its own train and test shards.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{check_fraction, train_count, Dataset};
use crate::error::{Error, Result};
use crate::rng;
use crate::ClientId;

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplesLaw {
    /// Each class's pool is divided evenly among the clients holding it.
    Balanced,
    /// Each (client, class) pair draws a count uniform in `1..=max`.
    UniformUpTo(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub n_clients: usize,
    pub classes_per_client: usize,
    pub samples_law: SamplesLaw,
    pub train_fraction: f64,
    pub seed: u64,
}

impl PartitionSpec {
    pub fn new(n_clients: usize, classes_per_client: usize, seed: u64) -> Self {
        PartitionSpec {
            n_clients,
            classes_per_client,
            samples_law: SamplesLaw::Balanced,
            train_fraction: DEFAULT_TRAIN_FRACTION,
            seed,
        }
    }

    pub fn validate(&self, n_classes: usize) -> Result<()> {
        if self.n_clients == 0 {
            return Err(Error::invalid("partition.n_clients", "must be at least 1"));
        }
        if self.classes_per_client == 0 {
            return Err(Error::invalid("partition.classes_per_client", "must be at least 1"));
        }
        if self.classes_per_client > n_classes {
            return Err(Error::invalid(
                "partition.classes_per_client",
                format!(
                    "{} classes per client requested but the dataset has only {n_classes}",
                    self.classes_per_client
                ),
            ));
        }
        if let SamplesLaw::UniformUpTo(0) = self.samples_law {
            return Err(Error::invalid("partition.samples_law", "uniform_up_to must be at least 1"));
        }
        check_fraction(self.train_fraction)
    }
}

/// One client's private data.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientShard {
    pub client_id: ClientId,
    pub classes: Vec<usize>,
    pub train: Dataset,
    pub test: Dataset,
    /// Row indices into the source dataset, when known.
    pub train_origin: Option<Vec<usize>>,
    pub test_origin: Option<Vec<usize>>,
}

impl ClientShard {
    /// A shard built from explicit data; its classes are the labels present.
    pub fn new(client_id: ClientId, train: Dataset, test: Dataset) -> Self {
        let classes = train
            .labels()
            .iter()
            .chain(test.labels())
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        ClientShard {
            client_id,
            classes,
            train,
            test,
            train_origin: None,
            test_origin: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FederatedSplit {
    shards: Vec<ClientShard>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShardSummary {
    pub client_id: ClientId,
    pub classes: Vec<usize>,
    pub train_counts: BTreeMap<usize, usize>,
    pub test_counts: BTreeMap<usize, usize>,
}

impl FederatedSplit {
    /// Shards must have distinct ids and share input and class dimensions.
    pub fn from_shards(mut shards: Vec<ClientShard>) -> Result<Self> {
        let first = shards.first().ok_or(Error::Empty("shard list"))?;
        let (dim, classes) = (first.train.input_dim(), first.train.n_classes());
        for s in &shards {
            for d in [&s.train, &s.test] {
                if d.input_dim() != dim {
                    return Err(Error::DimensionMismatch {
                        left: dim,
                        right: d.input_dim(),
                    });
                }
                if d.n_classes() != classes {
                    return Err(Error::Client {
                        client: s.client_id,
                        reason: "shards disagree on the number of classes".into(),
                    });
                }
            }
        }
        shards.sort_by_key(|s| s.client_id);
        for pair in shards.windows(2) {
            if pair[0].client_id == pair[1].client_id {
                return Err(Error::DuplicateClient(pair[0].client_id));
            }
        }
        Ok(FederatedSplit { shards })
    }

    /// Shards in ascending client id.
    pub fn shards(&self) -> &[ClientShard] {
        &self.shards
    }

    pub fn shard(&self, id: ClientId) -> Result<&ClientShard> {
        self.shards
            .binary_search_by_key(&id, |s| s.client_id)
            .map(|i| &self.shards[i])
            .map_err(|_| Error::UnknownClient(id))
    }

    pub fn n_clients(&self) -> usize {
        self.shards.len()
    }

    pub fn client_ids(&self) -> Vec<ClientId> {
        self.shards.iter().map(|s| s.client_id).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.shards[0].train.input_dim()
    }

    pub fn n_classes(&self) -> usize {
        self.shards[0].train.n_classes()
    }

    pub fn assignment(&self) -> BTreeMap<ClientId, Vec<usize>> {
        self.shards
            .iter()
            .map(|s| (s.client_id, s.classes.clone()))
            .collect()
    }

    /// Union of every client's training shard.
    pub fn pooled_train(&self) -> Result<Dataset> {
        Dataset::concat("pooled-train", self.shards.iter().map(|s| &s.train))
    }

    /// Union of every client's test shard.
    pub fn pooled_test(&self) -> Result<Dataset> {
        Dataset::concat("pooled-test", self.shards.iter().map(|s| &s.test))
    }

    pub fn summary(&self) -> Vec<ShardSummary> {
        self.shards
            .iter()
            .map(|s| ShardSummary {
                client_id: s.client_id,
                classes: s.classes.clone(),
                train_counts: s.train.class_counts(),
                test_counts: s.test.class_counts(),
            })
            .collect()
    }

    pub fn write_summary(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(&self.summary()).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }
}

fn assign_classes(spec: &PartitionSpec, n_classes: usize) -> Vec<Vec<usize>> {
    (0..spec.n_clients)
        .map(|k| {
            let mut rng = rng::stream(spec.seed, &[rng::tag::ASSIGN, k as u64]);
            let mut classes = index::sample(&mut rng, n_classes, spec.classes_per_client).into_vec();
            classes.sort_unstable();
            classes
        })
        .collect()
}

/// Shuffled sample pools, one per class.
fn class_pools(d: &Dataset, seed: u64) -> Vec<Vec<usize>> {
    (0..d.n_classes())
        .map(|c| {
            let mut pool = d.class_indices(c);
            pool.shuffle(&mut rng::stream(seed, &[rng::tag::DRAW, c as u64]));
            pool
        })
        .collect()
}

fn draw_balanced(
    assignment: &[Vec<usize>],
    pools: &[Vec<usize>],
) -> Vec<Vec<usize>> {
    let mut local = vec![Vec::new(); assignment.len()];
    // Remainders rotate through the holders across classes so that shard
    // sizes stay within one of each other when every client holds every class.
    let mut offset = 0usize;
    for (class, pool) in pools.iter().enumerate() {
        let holders: Vec<usize> = (0..assignment.len())
            .filter(|&k| assignment[k].contains(&class))
            .collect();
        if holders.is_empty() {
            continue;
        }
        let m = holders.len();
        let (base, rem) = (pool.len() / m, pool.len() % m);
        let mut sizes = vec![base; m];
        for j in 0..rem {
            sizes[(offset + j) % m] += 1;
        }
        offset += rem;
        let mut start = 0;
        for (&k, size) in holders.iter().zip(sizes) {
            local[k].extend_from_slice(&pool[start..start + size]);
            start += size;
        }
    }
    local
}

fn draw_uniform(
    spec: &PartitionSpec,
    max_per_class: usize,
    assignment: &[Vec<usize>],
    pools: &mut [Vec<usize>],
) -> Vec<Vec<usize>> {
    assignment
        .iter()
        .enumerate()
        .map(|(k, classes)| {
            let mut rng = rng::stream(spec.seed, &[rng::tag::DRAW, u64::MAX, k as u64]);
            let mut local = Vec::new();
            for &c in classes {
                let want = rng.random_range(1..=max_per_class);
                let pool = &mut pools[c];
                let take = want.min(pool.len());
                local.extend(pool.drain(pool.len() - take..));
            }
            local
        })
        .collect()
}

pub fn partition(d: &Dataset, spec: &PartitionSpec) -> Result<FederatedSplit> {
    spec.validate(d.n_classes())?;
    let assignment = assign_classes(spec, d.n_classes());
    let mut pools = class_pools(d, spec.seed);
    let local = match spec.samples_law {
        SamplesLaw::Balanced => draw_balanced(&assignment, &pools),
        SamplesLaw::UniformUpTo(max) => draw_uniform(spec, max, &assignment, &mut pools),
    };

    let shards = local
        .into_iter()
        .zip(assignment)
        .enumerate()
        .map(|(k, (mut rows, classes))| {
            if rows.len() < 2 {
                return Err(Error::Client {
                    client: k,
                    reason: format!(
                        "received {} samples; at least 2 are needed to form train and test shards",
                        rows.len()
                    ),
                });
            }
            rows.sort_unstable();
            rows.shuffle(&mut rng::stream(spec.seed, &[rng::tag::SPLIT, k as u64]));
            let n_train = train_count(rows.len(), spec.train_fraction);
            let (train_rows, test_rows) = rows.split_at(n_train);
            Ok(ClientShard {
                client_id: k,
                classes,
                train: d.subset(train_rows),
                test: d.subset(test_rows),
                train_origin: Some(train_rows.to_vec()),
                test_origin: Some(test_rows.to_vec()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    FederatedSplit::from_shards(shards)
}

/// Doubles the training shard of each listed client while preserving its
/// per-class proportions.
///
/// Extra samples come from rows of `pool` (the dataset the split was drawn
/// from) that no client holds yet. When a class runs dry the client's own
/// training rows of that class are resampled with replacement.
pub fn double_client_samples(
    split: &FederatedSplit,
    pool: &Dataset,
    client_ids: &[ClientId],
    seed: u64,
) -> Result<FederatedSplit> {
    let targets: BTreeSet<ClientId> = client_ids.iter().copied().collect();
    for &id in &targets {
        split.shard(id)?;
    }
    if targets.is_empty() {
        return Ok(split.clone());
    }
    if pool.input_dim() != split.input_dim() {
        return Err(Error::DimensionMismatch {
            left: pool.input_dim(),
            right: split.input_dim(),
        });
    }

    let mut used: BTreeSet<usize> = BTreeSet::new();
    for s in split.shards() {
        for origin in [&s.train_origin, &s.test_origin].into_iter().flatten() {
            used.extend(origin.iter().copied());
        }
    }
    let origins_known = split.shards().iter().all(|s| s.train_origin.is_some());

    let mut shards = split.shards().to_vec();
    for shard in shards.iter_mut().filter(|s| targets.contains(&s.client_id)) {
        let id = shard.client_id;
        let mut extra_rows = Vec::new();
        let mut resampled_local = Vec::new();
        for (class, count) in shard.train.class_counts() {
            let mut rng = rng::stream(seed, &[rng::tag::DOUBLE, id as u64, class as u64]);
            let mut fresh: Vec<usize> = if origins_known {
                pool.class_indices(class)
                    .into_iter()
                    .filter(|i| !used.contains(i))
                    .collect()
            } else {
                Vec::new()
            };
            fresh.shuffle(&mut rng);
            fresh.truncate(count);
            used.extend(fresh.iter().copied());
            let missing = count - fresh.len();
            if missing > 0 {
                log::warn!(
                    "client {id}: pool has only {} unused samples of class {class}; resampling {missing} with replacement",
                    fresh.len()
                );
                let own = shard.train.class_indices(class);
                resampled_local.extend((0..missing).map(|_| own[rng.random_range(0..own.len())]));
            }
            extra_rows.extend(fresh);
        }
        let extra = pool.subset(&extra_rows);
        let repeated = shard.train.subset(&resampled_local);
        shard.train = Dataset::concat(shard.train.name(), [&shard.train, &extra, &repeated])?;
        if let Some(origin) = shard.train_origin.as_mut() {
            origin.extend_from_slice(&extra_rows);
            let previous = origin.clone();
            origin.extend(resampled_local.iter().map(|&r| previous[r]));
        }
    }
    FederatedSplit::from_shards(shards)
}
