//! `comm`: collaborative multi-agent prompting over multiple-choice problems.

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use commands::{
    cmd_ablate, cmd_cache, cmd_eval, cmd_run, cmd_validate, AblateArgs, CacheOp, CliError,
    EvalArgs, RunArgs,
};
use comm_core::evaluation::{AblationSuite, MethodKind, ReportFormat, ShotMode};
use comm_core::orchestrator::RunMode;
use config::{EffectiveConfig, FlagConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "comm",
    version,
    about = "Role-played expert agents discuss multiple-choice problems; a summarizer answers.",
    after_help = "Credentials come from COMM_API_KEY or the config file only, never from flags."
)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalOpts {
    /// TOML config file (lowest precedence after built-in defaults).
    #[arg(long, global = true, env = "COMM_CONFIG", value_name = "PATH")]
    config: Option<PathBuf>,
    /// Chat-completions endpoint base URL.
    #[arg(long, global = true, env = "COMM_BACKEND_URL", value_name = "URL")]
    backend_url: Option<String>,
    /// Model id requested from the backend.
    #[arg(long, global = true, env = "COMM_MODEL", value_name = "ID")]
    model: Option<String>,
    /// Directory for the on-disk response cache.
    #[arg(long, global = true, env = "COMM_CACHE_DIR", value_name = "DIR")]
    cache_dir: Option<PathBuf>,
    /// Directory containing team presets.
    #[arg(long, global = true, env = "COMM_PRESETS_DIR", value_name = "DIR")]
    presets_dir: Option<PathBuf>,
    /// Replay completions from a JSONL script instead of calling any backend.
    #[arg(long, global = true, value_name = "JSONL")]
    script: Option<PathBuf>,
    /// Render and print prompts without any backend traffic.
    #[arg(long, global = true)]
    dry_run: bool,
    /// Attempts per request for transient backend failures.
    #[arg(long, global = true, value_name = "N")]
    retries: Option<u32>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one problem through a team and print the full transcript.
    Run {
        /// Team preset name (a subdirectory of the presets dir).
        #[arg(long)]
        preset: String,
        /// Problem CSV: question, four choices, answer letter.
        #[arg(long, value_name = "CSV")]
        dataset: PathBuf,
        /// Which problem in the dataset to run (0-based).
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Agent wiring: "multi" (one session per agent) or "single"
        /// (one session role-playing every agent).
        #[arg(long, default_value = "multi")]
        mode: String,
        /// Override the preset's discussion turn count.
        #[arg(long)]
        turns: Option<u32>,
        /// Also write the transcript as pretty JSON to this file.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Evaluate a method over a dataset and report accuracy.
    Eval {
        #[arg(long, value_name = "CSV")]
        dataset: PathBuf,
        /// Name used in problem ids and reports (default: dataset file stem).
        #[arg(long, value_name = "NAME")]
        dataset_name: Option<String>,
        /// standard | cot | comm_multi | comm_single_instance
        #[arg(long, default_value = "comm_multi")]
        method: String,
        /// Team preset name; required for collaborative methods.
        #[arg(long)]
        preset: Option<String>,
        /// zero | few
        #[arg(long)]
        shots: Option<String>,
        /// Exemplar TOML for few-shot baselines.
        #[arg(long, value_name = "TOML")]
        exemplars: Option<PathBuf>,
        /// Override the preset's discussion turn count.
        #[arg(long)]
        turns: Option<u32>,
        /// Evaluate only the first N problems.
        #[arg(long, value_name = "N")]
        limit: Option<usize>,
        /// Worker threads for problem-level parallelism.
        #[arg(long, value_name = "N")]
        parallelism: Option<usize>,
        /// Write per-problem transcripts as JSON lines to this file.
        #[arg(long, value_name = "PATH")]
        transcripts: Option<PathBuf>,
        /// plain | delimited | json
        #[arg(long, default_value = "plain")]
        format: String,
        /// Write the report here instead of stdout.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Run an ablation suite and print its comparison table.
    Ablate {
        /// agent_count | expert_composition | turn_count
        #[arg(long)]
        suite: String,
        #[arg(long, value_name = "CSV")]
        dataset: PathBuf,
        /// Benchmark name whose presets to use: expects presets named
        /// "{name}_zero" and "{name}_few" (default: dataset file stem).
        #[arg(long, value_name = "NAME")]
        benchmark: Option<String>,
        /// Evaluate only the first N problems.
        #[arg(long, value_name = "N")]
        limit: Option<usize>,
        /// Worker threads for problem-level parallelism.
        #[arg(long, value_name = "N")]
        parallelism: Option<usize>,
        /// plain | delimited | json
        #[arg(long, default_value = "plain")]
        format: String,
        /// Write the table here instead of stdout.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Inspect or maintain the response cache.
    Cache {
        #[command(subcommand)]
        op: CacheCommand,
    },
    /// Check presets for integrity violations.
    Validate {
        /// Check one preset instead of all of them.
        #[arg(long)]
        preset: Option<String>,
    },
}

#[derive(Subcommand, Clone, Copy)]
enum CacheCommand {
    /// Print entry count and total bytes.
    Stats,
    /// Remove all cached entries.
    Clear,
    /// Re-digest every entry and report corruption.
    Verify,
}

fn parse<T: std::str::FromStr<Err = String>>(what: &str, value: &str) -> Result<T, CliError> {
    value.parse::<T>().map_err(|e| CliError::Config(format!("invalid --{what}: {e}")))
}

fn parse_mode(value: &str) -> Result<RunMode, CliError> {
    match value {
        "multi" => Ok(RunMode::MultiAgent),
        "single" => Ok(RunMode::SingleAgentRoleplay),
        other => Err(CliError::Config(format!(
            "invalid --mode {other:?}; expected multi or single"
        ))),
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let flags = FlagConfig {
        config_file: cli.global.config,
        backend_url: cli.global.backend_url,
        model: cli.global.model,
        cache_dir: cli.global.cache_dir,
        presets_dir: cli.global.presets_dir,
        script: cli.global.script,
        dry_run: cli.global.dry_run,
        retries: cli.global.retries,
    };
    let config = EffectiveConfig::merge(flags).map_err(CliError::Config)?;
    match cli.command {
        Command::Run { preset, dataset, index, mode, turns, out } => cmd_run(
            &config,
            RunArgs { preset, dataset, index, mode: parse_mode(&mode)?, turns, out },
        ),
        Command::Eval {
            dataset,
            dataset_name,
            method,
            preset,
            shots,
            exemplars,
            turns,
            limit,
            parallelism,
            transcripts,
            format,
            out,
        } => cmd_eval(
            &config,
            EvalArgs {
                dataset,
                dataset_name,
                method: parse::<MethodKind>("method", &method)?,
                preset,
                shots: shots.as_deref().map(|s| parse::<ShotMode>("shots", s)).transpose()?,
                exemplars,
                turns,
                limit,
                parallelism,
                transcripts,
                format: parse::<ReportFormat>("format", &format)?,
                out,
            },
        ),
        Command::Ablate { suite, dataset, benchmark, limit, parallelism, format, out } => {
            cmd_ablate(
                &config,
                AblateArgs {
                    suite: parse::<AblationSuite>("suite", &suite)?,
                    dataset,
                    benchmark,
                    limit,
                    parallelism,
                    format: parse::<ReportFormat>("format", &format)?,
                    out,
                },
            )
        }
        Command::Cache { op } => cmd_cache(
            &config,
            match op {
                CacheCommand::Stats => CacheOp::Stats,
                CacheCommand::Clear => CacheOp::Clear,
                CacheCommand::Verify => CacheOp::Verify,
            },
        ),
        Command::Validate { preset } => cmd_validate(&config, preset),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
