use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fedweight_cli::{apply_overrides, parse_config, plan, run, CliError, Overrides};

#[derive(Parser)]
#[command(name = "fedweight", version, about = "Run federated-learning aggregation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a TOML config file.
    Run {
        config: PathBuf,
        /// Override the experiment seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Validate the config and data, print the plan, and exit.
        #[arg(long)]
        dry_run: bool,
        /// Evaluate every N rounds (the final round is always evaluated).
        #[arg(long)]
        eval_stride: Option<usize>,
    },
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let Command::Run { config, seed, output, dry_run, eval_stride } = cli.command;
    let parsed = parse_config(&config)?;
    let cfg = apply_overrides(parsed, &Overrides { seed, output_dir: output, eval_stride }, &config)?;
    let mut stdout = io::stdout().lock();
    if dry_run {
        plan(&cfg, &mut stdout)
    } else {
        run(&cfg, &mut stdout).map(|_| ())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
