use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use fedweight::metrics::{self, RunSummary};
use fedweight::orchestrator::{self, participant_count};
use fedweight::partition;

use crate::config::{ConfigError, ExperimentConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Runtime(#[from] fedweight::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            _ => 2,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub eval_stride: Option<usize>,
}

pub fn apply_overrides(mut cfg: ExperimentConfig, o: &Overrides, source: &Path) -> Result<ExperimentConfig, ConfigError> {
    if let Some(seed) = o.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &o.output_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(stride) = o.eval_stride {
        cfg.federation.eval_stride = stride;
    }
    cfg.validate().map_err(|(key, message)| ConfigError {
        file: source.to_path_buf(),
        key,
        line: None,
        message,
    })?;
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub setting: String,
    pub summary: RunSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub rows: Vec<TableRow>,
    pub files: Vec<PathBuf>,
}

/// Final global accuracy and local mean ± std per run, in percent.
pub fn format_table(rows: &[TableRow]) -> String {
    let setting_w = rows.iter().map(|r| r.setting.len()).max().unwrap_or(0).max(7);
    let strategy_w = rows.iter().map(|r| r.summary.strategy.len()).max().unwrap_or(0).max(8);
    let mut s = format!(
        "{:<setting_w$}  {:<strategy_w$}  {:>8}  {:>16}\n",
        "setting", "strategy", "global %", "local % (±std)"
    );
    for r in rows {
        let setting = if r.setting.is_empty() { "-" } else { &r.setting };
        let local = format!(
            "{:.2} ± {:.2}",
            100.0 * r.summary.final_local_mean,
            100.0 * r.summary.final_local_std
        );
        s += &format!(
            "{setting:<setting_w$}  {:<strategy_w$}  {:>8.2}  {local:>16}\n",
            r.summary.strategy,
            100.0 * r.summary.final_global_acc,
        );
    }
    s
}

/// Validates the experiment end to end (data, split) and describes the runs
/// without training.
pub fn plan(cfg: &ExperimentConfig, out: &mut impl Write) -> Result<(), CliError> {
    let data = cfg.load_dataset()?;
    let pspec = cfg.partition_spec(data.n_classes());
    let split = partition::partition(&data, &pspec)?;
    let fed = cfg.federation_config(data.input_dim(), data.n_classes());
    fed.validate()?;
    let runs = cfg.scenario.planned_runs(fed.strategy.kind);
    let w = |e| CliError::Io { path: PathBuf::from("<stdout>"), source: e };

    writeln!(
        out,
        "dataset: {} ({} samples, {} classes, {} features)",
        data.name(),
        data.len(),
        data.n_classes(),
        data.input_dim()
    )
    .map_err(w)?;
    writeln!(
        out,
        "partition: {} clients, {} classes each, train fraction {}",
        split.n_clients(),
        pspec.classes_per_client,
        pspec.train_fraction
    )
    .map_err(w)?;
    writeln!(
        out,
        "model: {:?}, {} parameters; {} rounds, lr {}, batch {}, E={}",
        fed.model.kind,
        fed.model.param_count(),
        fed.rounds,
        fed.train.learning_rate,
        fed.train.batch_size,
        fed.train.local_iterations
    )
    .map_err(w)?;
    writeln!(out, "{} runs -> {}", runs.len(), cfg.output_dir.display()).map_err(w)?;
    for (label, (setting, _)) in cfg.scenario.planned_labels(fed.strategy.kind).iter().zip(&runs) {
        let pr = setting
            .split('_')
            .find_map(|p| p.strip_prefix("pr"))
            .and_then(|p| p.parse::<f64>().ok())
            .unwrap_or(fed.participation_rate);
        writeln!(
            out,
            "  {label}: {} of {} clients per round",
            participant_count(pr, split.n_clients()),
            split.n_clients()
        )
        .map_err(w)?;
    }
    Ok(())
}

pub fn run(cfg: &ExperimentConfig, out: &mut impl Write) -> Result<Report, CliError> {
    let data = cfg.load_dataset()?;
    let pspec = cfg.partition_spec(data.n_classes());
    let fed = cfg.federation_config(data.input_dim(), data.n_classes());

    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut files = Vec::new();
    let echo = dir.join("config.resolved.toml");
    fs::write(&echo, cfg.to_toml()).map_err(io_err(&echo))?;
    files.push(echo);

    log::info!("running {} federations", cfg.scenario.planned_runs(fed.strategy.kind).len());
    let outcome = orchestrator::run_scenario(&cfg.scenario, &fed, &data, &pspec)?;

    for (setting, split) in &outcome.splits {
        let path = if setting.is_empty() {
            dir.join("partition.json")
        } else {
            dir.join(format!("partition_{setting}.json"))
        };
        split.write_summary(&path)?;
        files.push(path);
    }

    let mut rows = Vec::new();
    for run in &outcome.runs {
        let summary = RunSummary::from_history(&run.label, &run.state.history)?;
        let csv = dir.join(format!("{}.csv", run.label));
        metrics::write_history(&run.state.history, &csv)?;
        let json = dir.join(format!("{}.json", run.label));
        metrics::write_sidecar(&summary, &run.state.history, &json)?;
        files.extend([csv, json]);
        rows.push(TableRow { setting: run.setting.clone(), summary });
    }
    let summary_path = dir.join("summary.csv");
    let summaries: Vec<RunSummary> = rows.iter().map(|r| r.summary.clone()).collect();
    metrics::write_summary_csv(&summaries, &summary_path)?;
    files.push(summary_path);

    if !outcome.doubled_clients.is_empty() {
        writeln!(out, "doubled clients: {:?}", outcome.doubled_clients).map_err(io_err(Path::new("<stdout>")))?;
    }
    write!(out, "{}", format_table(&rows)).map_err(io_err(Path::new("<stdout>")))?;
    Ok(Report { rows, files })
}
