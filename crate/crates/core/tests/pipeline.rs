use std::fs;

use fedweight::data::{generate_synthetic, load_idx, write_idx, SamplesPerClass, SyntheticSpec};
use fedweight::metrics::{self, read_history, RunSummary, CSV_HEADER};
use fedweight::orchestrator::{run_federation, run_scenario, FederationConfig, ScenarioSpec};
use fedweight::partition::{partition, FederatedSplit, PartitionSpec};
use fedweight::{Dataset, Execution, ModelSpec, StrategyKind, TrainConfig};

fn pixels() -> Dataset {
    // Values on the 1/255 grid survive the byte round trip exactly.
    let spec = SyntheticSpec {
        n_classes: 3,
        input_dim: 16,
        samples_per_class: SamplesPerClass::Uniform(30),
        cluster_spread: 0.1,
        class_separation: 0.3,
        seed: 9,
    };
    let d = generate_synthetic(&spec).unwrap();
    let features = d
        .features()
        .iter()
        .map(|x| ((x + 1.0) * 127.5).round().clamp(0.0, 255.0) / 255.0)
        .collect();
    Dataset::new("pixels", 16, 3, features, d.labels().to_vec()).unwrap()
}

fn config(kind: StrategyKind) -> FederationConfig {
    let train = TrainConfig { learning_rate: 0.5, batch_size: 8, local_iterations: 1, seed: 1 };
    FederationConfig::new(ModelSpec::mlp(16, 8, 3, 2), train, kind.into(), 5)
}

#[test]
fn idx_files_feed_a_federation() {
    let tmp = tempfile::tempdir().unwrap();
    let (img, lab) = (tmp.path().join("img"), tmp.path().join("lab"));
    let original = pixels();
    write_idx(&original, &img, &lab, 4, 4).unwrap();
    let loaded = load_idx(&img, &lab, 3).unwrap();
    assert_eq!(loaded.features(), original.features());
    assert_eq!(loaded.labels(), original.labels());

    let split = partition(&loaded, &PartitionSpec::new(4, 2, 1)).unwrap();
    let state = run_federation(&config(StrategyKind::IdaIntrac), &split).unwrap();
    assert_eq!(state.round, 5);
    assert!(state.final_global_accuracy().unwrap() > 1.0 / 3.0);
}

#[test]
fn history_files_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let split = partition(&pixels(), &PartitionSpec::new(5, 2, 1)).unwrap();
    let mut cfg = config(StrategyKind::Ida);
    cfg.participation_rate = 0.6;
    cfg.eval_stride = 2;
    let state = run_federation(&cfg, &split).unwrap();

    let csv = tmp.path().join("run.csv");
    metrics::write_history(&state.history, &csv).unwrap();
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next().unwrap().split(',').collect::<Vec<_>>(), CSV_HEADER);

    let rows = read_history(&csv).unwrap();
    assert_eq!(rows.len(), state.history.len());
    for (row, rec) in rows.iter().zip(&state.history) {
        assert_eq!(row.round, rec.round);
        assert_eq!(row.participant_ids(), rec.participants);
        assert_eq!(row.participant_ids().len(), 3);
        assert_eq!(row.global_acc.is_some(), rec.eval.is_some());
        if let Some(g) = rec.global_accuracy() {
            assert!((row.global_acc.unwrap() - g).abs() <= 5e-7);
        }
        assert!((row.min_alpha - rec.coefficients.min()).abs() <= 5e-7);
    }

    let summary = RunSummary::from_history("ida", &state.history).unwrap();
    let json = tmp.path().join("run.json");
    metrics::write_sidecar(&summary, &state.history, &json).unwrap();
    let value: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(value["summary"]["label"], "ida");
    assert_eq!(value["rounds"].as_array().unwrap().len(), 5);
}

#[test]
fn execution_mode_does_not_change_a_sweep() {
    let data = pixels();
    let spec = ScenarioSpec::Poisoned {
        adversaries: vec![2],
        scale: 10.0,
        sample_multiplier: Some(3.0),
        strategies: StrategyKind::ALL.to_vec(),
    };
    let ps = PartitionSpec::new(6, 2, 4);
    let mut cfg = config(StrategyKind::FedAvg);
    cfg.participation_rate = 0.5;
    let parallel = run_scenario(&spec, &cfg, &data, &ps).unwrap();
    cfg.execution = Execution::Sequential;
    let sequential = run_scenario(&spec, &cfg, &data, &ps).unwrap();
    assert_eq!(parallel.runs, sequential.runs);
}

#[test]
fn handmade_split_with_uneven_shards() {
    let data = pixels();
    let shards = (0..3)
        .map(|c| {
            let rows: Vec<usize> = (0..data.len()).filter(|i| i % 3 == c).take(10 + 10 * c).collect();
            let (train, test) = rows.split_at(rows.len() - 3);
            fedweight::partition::ClientShard::new(c, data.subset(train), data.subset(test))
        })
        .collect();
    let split = FederatedSplit::from_shards(shards).unwrap();
    let state = run_federation(&config(StrategyKind::FedAvg), &split).unwrap();
    let c = &state.history[0].coefficients;
    assert!((c.get(0).unwrap() - 7.0 / 51.0).abs() < 1e-15);
    assert!((c.get(2).unwrap() - 27.0 / 51.0).abs() < 1e-15);
}
