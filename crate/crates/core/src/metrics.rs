//! Per-round evaluation and the CSV/JSON run artifacts.
//!
//! Two accuracies are tracked for the global model: the pooled accuracy over
//! the union of all clients' test shards, and each client's accuracy on its
//! own test shard (summarized as mean ± population std across clients).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::aggregation::CoefficientSet;
use crate::error::{Error, Result};
use crate::models::{self, Batch, ModelSpec};
use crate::parallel::{self, Execution};
use crate::params::ParamVector;
use crate::partition::FederatedSplit;
use crate::ClientId;

pub const CSV_HEADER: [&str; 9] = [
    "round",
    "participants",
    "strategy",
    "global_acc",
    "local_acc_mean",
    "local_acc_std",
    "min_alpha",
    "max_alpha",
    "wall_ms",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalStats {
    pub per_client: BTreeMap<ClientId, f64>,
    pub mean: f64,
    pub std: f64,
}

impl LocalStats {
    pub fn from_accuracies(per_client: BTreeMap<ClientId, f64>) -> Result<Self> {
        if per_client.is_empty() {
            return Err(Error::Empty("client accuracy map"));
        }
        let (mean, std) = mean_std(per_client.values().copied());
        Ok(LocalStats {
            per_client,
            mean,
            std,
        })
    }
}

/// Mean and population standard deviation.
pub fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundEval {
    pub global_accuracy: f64,
    pub local: LocalStats,
    /// Test-shard size per client; pooled accuracy is the size-weighted mean.
    pub test_sizes: BTreeMap<ClientId, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based index of the completed round.
    pub round: usize,
    pub strategy: String,
    pub participants: Vec<ClientId>,
    pub coefficients: CoefficientSet,
    /// `None` on rounds skipped by the evaluation stride.
    pub eval: Option<RoundEval>,
    pub hull_ok: bool,
    pub wall_ms: u64,
}

impl RoundRecord {
    pub fn global_accuracy(&self) -> Option<f64> {
        self.eval.as_ref().map(|e| e.global_accuracy)
    }
}

fn test_counts(
    spec: &ModelSpec,
    params: &ParamVector,
    split: &FederatedSplit,
    exec: Execution,
) -> Result<Vec<(ClientId, usize, usize)>> {
    parallel::map_collect(exec, split.shards(), |s| {
        let correct = models::count_correct(spec, params, Batch::full(&s.test))?;
        Ok((s.client_id, correct, s.test.len()))
    })
    .into_iter()
    .collect()
}

/// Accuracy over the pooled union of every client's test shard.
pub fn global_accuracy(spec: &ModelSpec, params: &ParamVector, split: &FederatedSplit) -> Result<f64> {
    let counts = test_counts(spec, params, split, Execution::Sequential)?;
    let (correct, total) = counts
        .iter()
        .fold((0, 0), |(c, t), &(_, ci, ti)| (c + ci, t + ti));
    if total == 0 {
        return Err(Error::Empty("pooled test set"));
    }
    Ok(correct as f64 / total as f64)
}

/// The global model's accuracy on each client's own test shard.
pub fn local_accuracy_stats(
    spec: &ModelSpec,
    params: &ParamVector,
    split: &FederatedSplit,
) -> Result<LocalStats> {
    evaluate_round(spec, params, split, Execution::Sequential).map(|e| e.local)
}

/// Both evaluation quantities from a single pass over the test shards.
pub fn evaluate_round(
    spec: &ModelSpec,
    params: &ParamVector,
    split: &FederatedSplit,
    exec: Execution,
) -> Result<RoundEval> {
    let counts = test_counts(spec, params, split, exec)?;
    let mut per_client = BTreeMap::new();
    let mut test_sizes = BTreeMap::new();
    let (mut correct, mut total) = (0usize, 0usize);
    for (id, c, n) in counts {
        if n == 0 {
            return Err(Error::Client {
                client: id,
                reason: "test shard is empty".into(),
            });
        }
        per_client.insert(id, c as f64 / n as f64);
        test_sizes.insert(id, n);
        correct += c;
        total += n;
    }
    Ok(RoundEval {
        global_accuracy: correct as f64 / total as f64,
        local: LocalStats::from_accuracies(per_client)?,
        test_sizes,
    })
}

fn fmt6(x: f64) -> String {
    format!("{x:.6}")
}

fn csv_row(r: &RoundRecord) -> [String; 9] {
    let participants = r
        .participants
        .iter()
        .map(|p| p.to_string())
        .collect::<Vec<_>>()
        .join(";");
    let (g, m, s) = match &r.eval {
        Some(e) => (
            fmt6(e.global_accuracy),
            fmt6(e.local.mean),
            fmt6(e.local.std),
        ),
        None => Default::default(),
    };
    [
        r.round.to_string(),
        participants,
        r.strategy.clone(),
        g,
        m,
        s,
        fmt6(r.coefficients.min()),
        fmt6(r.coefficients.max()),
        r.wall_ms.to_string(),
    ]
}

pub fn write_history(history: &[RoundRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in history {
        w.write_record(csv_row(r)).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One parsed line of a history CSV.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct HistoryRow {
    pub round: usize,
    pub participants: String,
    pub strategy: String,
    pub global_acc: Option<f64>,
    pub local_acc_mean: Option<f64>,
    pub local_acc_std: Option<f64>,
    pub min_alpha: f64,
    pub max_alpha: f64,
    pub wall_ms: u64,
}

impl HistoryRow {
    pub fn participant_ids(&self) -> Vec<ClientId> {
        self.participants
            .split(';')
            .filter(|s| !s.is_empty())
            .filter_map(|s| s.parse().ok())
            .collect()
    }
}

pub fn read_history(path: impl AsRef<Path>) -> Result<Vec<HistoryRow>> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = r.headers().map_err(csv_err)?;
    if headers.iter().ne(CSV_HEADER) {
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: 0,
            reason: format!("unexpected header {:?}", headers.iter().collect::<Vec<_>>()),
        });
    }
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

/// Headline numbers of a finished run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub strategy: String,
    pub rounds: usize,
    pub final_global_acc: f64,
    pub final_local_mean: f64,
    pub final_local_std: f64,
    pub best_global_acc: f64,
    pub best_round: usize,
}

impl RunSummary {
    pub fn from_history(label: &str, history: &[RoundRecord]) -> Result<Self> {
        let last = history.last().ok_or(Error::Empty("history"))?;
        let final_eval = last.eval.as_ref().ok_or_else(|| {
            Error::invalid("history", "final round carries no evaluation")
        })?;
        let (best_round, best_global_acc) = history
            .iter()
            .filter_map(|r| r.global_accuracy().map(|g| (r.round, g)))
            .fold((last.round, f64::NEG_INFINITY), |best, cur| {
                if cur.1 > best.1 {
                    cur
                } else {
                    best
                }
            });
        Ok(RunSummary {
            label: label.to_string(),
            strategy: last.strategy.clone(),
            rounds: last.round,
            final_global_acc: final_eval.global_accuracy,
            final_local_mean: final_eval.local.mean,
            final_local_std: final_eval.local.std,
            best_global_acc,
            best_round,
        })
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    summary: &'a RunSummary,
    rounds: &'a [RoundRecord],
}

/// Writes the per-run JSON carrying full per-client accuracies and
/// coefficient sets.
pub fn write_sidecar(
    summary: &RunSummary,
    history: &[RoundRecord],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(
        &mut w,
        &Sidecar {
            summary,
            rounds: history,
        },
    )
    .map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Final-row values of every run, formatted exactly as in the run CSVs.
pub fn write_summary_csv(summaries: &[RunSummary], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record([
        "label",
        "strategy",
        "rounds",
        "global_acc",
        "local_acc_mean",
        "local_acc_std",
        "best_global_acc",
        "best_round",
    ])
    .map_err(csv_err)?;
    for s in summaries {
        w.write_record([
            s.label.clone(),
            s.strategy.clone(),
            s.rounds.to_string(),
            fmt6(s.final_global_acc),
            fmt6(s.final_local_mean),
            fmt6(s.final_local_std),
            fmt6(s.best_global_acc),
            s.best_round.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use crate::partition::{ClientShard, FederatedSplit};

    /// One-feature data where class = (x > 0); a model with weight +1 on
    /// class 1 and -1 on class 0 is perfect.
    fn threshold_model() -> (ModelSpec, ParamVector) {
        let spec = ModelSpec::logistic(1, 2, 0);
        (spec, ParamVector::new(vec![-1.0, 1.0, 0.0, 0.0]).unwrap())
    }

    fn shard(id: ClientId, xs: &[f64], labels: &[usize]) -> ClientShard {
        let test = Dataset::new("t", 1, 2, xs.to_vec(), labels.to_vec()).unwrap();
        ClientShard::new(id, test.clone(), test)
    }

    fn split_with_accuracy(sizes: &[(usize, usize)]) -> FederatedSplit {
        // Each client has `n` samples with `correct` of them labelled truthfully.
        FederatedSplit::from_shards(
            sizes
                .iter()
                .enumerate()
                .map(|(id, &(n, correct))| {
                    let xs = vec![1.0; n];
                    let labels: Vec<usize> = (0..n).map(|i| usize::from(i < correct)).collect();
                    shard(id, &xs, &labels)
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn perfect_model_scores_one() {
        let (spec, p) = threshold_model();
        let s = shard(0, &[-1.0, 2.0, 3.0], &[0, 1, 1]);
        let split = FederatedSplit::from_shards(vec![s.clone(), ClientShard { client_id: 1, ..s }]).unwrap();
        assert_eq!(global_accuracy(&spec, &p, &split).unwrap(), 1.0);
        let stats = local_accuracy_stats(&spec, &p, &split).unwrap();
        assert_eq!((stats.mean, stats.std), (1.0, 0.0));
    }

    #[test]
    fn pooled_accuracy_is_sample_weighted() {
        let (spec, p) = threshold_model();
        let split = split_with_accuracy(&[(10, 10), (30, 15)]);
        assert_eq!(global_accuracy(&spec, &p, &split).unwrap(), 0.625);
        let eval = evaluate_round(&spec, &p, &split, Execution::Parallel).unwrap();
        let weighted: f64 = eval
            .local
            .per_client
            .iter()
            .map(|(id, a)| a * eval.test_sizes[id] as f64)
            .sum::<f64>()
            / 40.0;
        assert!((weighted - eval.global_accuracy).abs() < 1e-12);

        let reversed = split_with_accuracy(&[(30, 15), (10, 10)]);
        assert_eq!(global_accuracy(&spec, &p, &reversed).unwrap(), 0.625);
    }

    #[test]
    fn local_stats_examples() {
        let (spec, p) = threshold_model();
        let stats = local_accuracy_stats(&spec, &p, &split_with_accuracy(&[(10, 4), (10, 6)])).unwrap();
        assert!((stats.mean - 0.5).abs() < 1e-15);
        assert!((stats.std - 0.1).abs() < 1e-15);
        let single = local_accuracy_stats(&spec, &p, &split_with_accuracy(&[(4, 3)])).unwrap();
        assert_eq!((single.mean, single.std), (0.75, 0.0));
    }

    #[test]
    fn empty_test_shard_names_client() {
        let (spec, p) = threshold_model();
        let train = Dataset::new("t", 1, 2, vec![1.0], vec![1]).unwrap();
        let empty = Dataset::empty("e", 1, 2).unwrap();
        let split = FederatedSplit::from_shards(vec![
            ClientShard::new(0, train.clone(), train.clone()),
            ClientShard::new(3, train, empty),
        ])
        .unwrap();
        assert!(matches!(
            local_accuracy_stats(&spec, &p, &split),
            Err(Error::Client { client: 3, .. })
        ));
    }

    fn record(round: usize) -> RoundRecord {
        let coefficients = CoefficientSet::from_raw(BTreeMap::from([(0, 1.0), (4, 3.0)])).unwrap();
        let local = LocalStats::from_accuracies(BTreeMap::from([(0, 0.25), (4, 0.75)])).unwrap();
        RoundRecord {
            round,
            strategy: "ida".into(),
            participants: vec![0, 4],
            coefficients,
            eval: Some(RoundEval {
                global_accuracy: 0.1 * round as f64 + 1.0 / 3.0 / 10.0,
                local,
                test_sizes: BTreeMap::from([(0, 4), (4, 4)]),
            }),
            hull_ok: true,
            wall_ms: 7,
        }
    }

    #[test]
    fn history_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        write_history(&[], &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 1);

        let history: Vec<_> = (1..=3).map(record).collect();
        write_history(&history, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
        assert_eq!(text.lines().nth(1).unwrap(), "1,0;4,ida,0.133333,0.500000,0.250000,0.250000,0.750000,7");

        let rows = read_history(&path).unwrap();
        for (row, rec) in rows.iter().zip(&history) {
            assert!((row.global_acc.unwrap() - rec.global_accuracy().unwrap()).abs() <= 1e-6);
            assert_eq!(row.participant_ids(), rec.participants);
        }
    }

    #[test]
    fn skipped_evaluations_are_blank() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        let mut r = record(1);
        r.eval = None;
        write_history(&[r], &path).unwrap();
        let rows = read_history(&path).unwrap();
        assert_eq!(rows[0].global_acc, None);
    }

    #[test]
    fn summary_tracks_best_round() {
        let mut history: Vec<_> = (1..=3).map(record).collect();
        history[1].eval.as_mut().unwrap().global_accuracy = 0.99;
        let s = RunSummary::from_history("x", &history).unwrap();
        assert_eq!((s.best_round, s.best_global_acc), (2, 0.99));
        assert_eq!(s.final_global_acc, history[2].global_accuracy().unwrap());
    }
}
