use clap::{Parser, Subcommand};
use hyperk::cli::{cmd_explain, cmd_run, cmd_synth, cmd_validate_config};
use hyperk::config::{RunConfig, ScenarioSelection};
use std::path::PathBuf;
use std::process::ExitCode;

/// ICU hyperkalemia risk pipeline: synthetic cohorts, KDIGO staging,
/// day-1 features, interpretable classifiers, lead-time AUC evaluation,
/// and exact Shapley attributions.
#[derive(Parser)]
#[command(name = "hyperk", version)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Scenario selection override: case1, case2, or both.
    #[arg(long, global = true)]
    scenario: Option<String>,

    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset into the configured input dir.
    Synth,
    /// Run the full pipeline: cohort, features, models, attributions,
    /// result table.
    Run,
    /// Attribute saved-model predictions over a persisted feature matrix.
    Explain {
        /// Saved model JSON (from `run`).
        #[arg(long)]
        model: PathBuf,
        /// Model-space feature matrix CSV (from `run`).
        #[arg(long)]
        features: PathBuf,
        /// Comma-separated patient ids (default: all rows).
        #[arg(long)]
        rows: Option<String>,
        /// Cross-check fast attributions against subset enumeration
        /// (tree models with at most 15 features).
        #[arg(long, default_value_t = false)]
        brute_check: bool,
    },
    /// Parse and validate the config; print its hash.
    ValidateConfig,
}

fn load_config(cli: &Cli) -> hyperk::Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(scenario) = &cli.scenario {
        config.scenario = ScenarioSelection::parse(scenario)?;
    }
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> hyperk::Result<()> {
    if let Some(jobs) = cli.jobs {
        // best effort: the global pool may already exist in-process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    match &cli.command {
        Command::Synth => cmd_synth(&load_config(&cli)?),
        Command::Run => cmd_run(&load_config(&cli)?).map(|_| ()),
        Command::Explain {
            model,
            features,
            rows,
            brute_check,
        } => {
            let config = load_config(&cli)?;
            let ids: Option<Vec<String>> = rows
                .as_ref()
                .map(|s| s.split(',').map(|x| x.trim().to_string()).collect());
            cmd_explain(&config, model, features, ids.as_deref(), *brute_check)
        }
        Command::ValidateConfig => {
            let path = cli
                .config
                .as_ref()
                .ok_or_else(|| hyperk::Error::config("validate-config requires --config"))?;
            let hash = cmd_validate_config(path)?;
            println!("config ok, hash {hash}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::new()
            .filter_or("HYPERK_LOG", "info")
            .write_style("HYPERK_LOG_STYLE"),
    )
    .format_timestamp(None)
    .init();

    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
