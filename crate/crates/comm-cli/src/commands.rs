//! Command implementations: run, eval, ablate, cache, validate.

use crate::config::EffectiveConfig;
use comm_core::backend::{
    with_cache, with_retry, CacheStore, ChatBackend, ConstantBackend, RemoteBackend, RetryPolicy,
    ScriptedBackend,
};
use comm_core::datasets::{load_exemplar_file, load_mmlu_csv, load_team_preset, DataError};
use comm_core::domain::{AgentTurn, DecodingParams, Label, Role, Transcript};
use comm_core::evaluation::{
    emit_report, evaluate, run_ablation, write_transcripts_jsonl, AblationContext, AblationSuite,
    EvalError, MethodKind, MethodSpec, ReportFormat, ShotMode,
};
use comm_core::orchestrator::{run, RunError, RunMode};
use comm_core::presets::{validate_all, validate_bundle};
use std::path::{Path, PathBuf};

/// Command failure carrying its process exit code class.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config, preset, or method setup (exit 2).
    Config(String),
    /// The backend gave up after retries (exit 3).
    Backend(String),
    /// Unreadable or malformed data files (exit 4).
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Backend(_) => 3,
            CliError::Data(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) | CliError::Backend(msg) | CliError::Data(msg) => {
                f.write_str(msg)
            }
        }
    }
}

fn classify_data(e: DataError) -> CliError {
    match e {
        DataError::UnknownPreset { .. } => CliError::Config(e.to_string()),
        other => CliError::Data(other.to_string()),
    }
}

fn classify_eval(e: EvalError) -> CliError {
    match e {
        EvalError::Data(inner) => classify_data(inner),
        EvalError::Method(_) | EvalError::Domain(_) | EvalError::Render(_) => {
            CliError::Config(e.to_string())
        }
        EvalError::EmptyProblemSet => CliError::Data(e.to_string()),
    }
}

fn classify_run(e: RunError) -> CliError {
    match e {
        RunError::Backend { source, .. } => CliError::Backend(source.to_string()),
        other => CliError::Config(other.to_string()),
    }
}

/// Builds the configured backend stack: scripted replay or remote-with-retry,
/// optionally wrapped in the on-disk cache. Dry runs use a constant local
/// backend so nothing ever leaves the process.
fn build_backend(config: &EffectiveConfig) -> Result<Box<dyn ChatBackend>, CliError> {
    if config.dry_run {
        return Ok(Box::new(ConstantBackend("[dry-run]".into())));
    }
    let base: Box<dyn ChatBackend> = match &config.script {
        Some(path) => Box::new(
            ScriptedBackend::from_jsonl_path(path)
                .map_err(|e| CliError::Data(format!("cannot load script: {e}")))?,
        ),
        None => {
            let remote =
                RemoteBackend::new(&config.backend_url, config.api_key.clone(), config.timeout)
                    .map_err(|e| CliError::Config(e.to_string()))?;
            let policy = RetryPolicy { max_attempts: config.retries, ..Default::default() };
            Box::new(with_retry(remote, policy))
        }
    };
    match &config.cache_dir {
        Some(dir) => {
            let store = CacheStore::open(dir).map_err(|e| CliError::Data(e.to_string()))?;
            Ok(Box::new(with_cache(base, store)))
        }
        None => Ok(base),
    }
}

fn presets_root(config: &EffectiveConfig) -> Result<PathBuf, CliError> {
    config.presets_root().ok_or_else(|| {
        CliError::Config(
            "no presets directory found; pass --presets-dir, set COMM_PRESETS_DIR, or run from \
             a directory containing presets/"
                .into(),
        )
    })
}

fn dataset_name_of(path: &Path, explicit: Option<&str>) -> String {
    match explicit {
        Some(name) => name.to_string(),
        None => path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".to_string()),
    }
}

fn role_name(role: Role) -> &'static str {
    match role {
        Role::System => "system",
        Role::User => "user",
        Role::Assistant => "assistant",
    }
}

fn print_rendered_prompts(turns: &[AgentTurn]) {
    for (i, turn) in turns.iter().enumerate() {
        println!("--- prompt {}/{} · {} ---", i + 1, turns.len(), turn.agent_name);
        for message in &turn.prompt {
            match &message.author {
                Some(author) => println!("[{} · {author}]", role_name(message.role)),
                None => println!("[{}]", role_name(message.role)),
            }
            println!("{}", message.content);
            println!();
        }
    }
}

fn print_transcript(transcript: &Transcript, gold: Label) {
    for (i, turn) in transcript.turns.iter().enumerate() {
        println!("--- turn {}/{} · {} ---", i + 1, transcript.turns.len(), turn.agent_name);
        println!("{}", turn.completion);
        println!();
    }
    println!(
        "verdict: extracted={} gold={} correct={}",
        transcript.verdict.extracted.map(|l| l.to_string()).unwrap_or_else(|| "-".into()),
        gold,
        if transcript.verdict.correct { "yes" } else { "no" }
    );
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn transcript_json(transcript: &Transcript) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(transcript).expect("transcript serializes");
    bytes.push(b'\n');
    bytes
}

pub struct RunArgs {
    pub preset: String,
    pub dataset: PathBuf,
    pub index: usize,
    pub mode: RunMode,
    pub turns: Option<u32>,
    pub out: Option<PathBuf>,
}

pub fn cmd_run(config: &EffectiveConfig, args: RunArgs) -> Result<(), CliError> {
    eprintln!("{}", config.redacted_display());
    let root = presets_root(config)?;
    let mut team = load_team_preset(&root, &args.preset).map_err(classify_data)?;
    if let Some(turns) = args.turns {
        team.turns = turns;
        team.validate().map_err(|e| CliError::Config(e.to_string()))?;
    }
    let dataset_name = dataset_name_of(&args.dataset, None);
    let problems = load_mmlu_csv(&args.dataset, &dataset_name).map_err(classify_data)?;
    let problem = problems.get(args.index).ok_or_else(|| {
        CliError::Config(format!(
            "problem index {} out of range; {} has {} problems",
            args.index,
            args.dataset.display(),
            problems.len()
        ))
    })?;

    let backend = build_backend(config)?;
    let transcript = run(args.mode, &team, problem, &*backend).map_err(classify_run)?;

    if config.dry_run {
        print_rendered_prompts(&transcript.turns);
        return Ok(());
    }
    println!("problem: {}", problem.id);
    println!(
        "preset: {} · mode: {} · turns: {} · team: {}",
        args.preset,
        args.mode,
        team.turns,
        &transcript.team_fingerprint[..12]
    );
    println!();
    print_transcript(&transcript, problem.gold);
    if let Some(out) = &args.out {
        write_output(out, &transcript_json(&transcript))?;
        eprintln!("transcript written to {}", out.display());
    }
    Ok(())
}

pub struct EvalArgs {
    pub dataset: PathBuf,
    pub dataset_name: Option<String>,
    pub method: MethodKind,
    pub preset: Option<String>,
    pub shots: Option<ShotMode>,
    pub exemplars: Option<PathBuf>,
    pub turns: Option<u32>,
    pub limit: Option<usize>,
    pub parallelism: Option<usize>,
    pub transcripts: Option<PathBuf>,
    pub format: ReportFormat,
    pub out: Option<PathBuf>,
}

fn build_method(config: &EffectiveConfig, args: &EvalArgs) -> Result<MethodSpec, CliError> {
    let is_comm =
        matches!(args.method, MethodKind::CommMulti | MethodKind::CommSingleInstance);
    if is_comm {
        let preset = args.preset.as_deref().ok_or_else(|| {
            CliError::Config(format!("method {} requires --preset", args.method))
        })?;
        if args.exemplars.is_some() {
            return Err(CliError::Config(
                "collaborative methods take exemplars from the preset; drop --exemplars".into(),
            ));
        }
        let root = presets_root(config)?;
        let mut team = load_team_preset(&root, preset).map_err(classify_data)?;
        if let Some(turns) = args.turns {
            team.turns = turns;
            team.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        let spec = MethodSpec::comm(args.method, team);
        if let Some(shots) = args.shots {
            if shots != spec.shot_mode {
                return Err(CliError::Config(format!(
                    "--shots {shots} conflicts with preset {preset}, which is {}-shot",
                    spec.shot_mode
                )));
            }
        }
        Ok(spec)
    } else {
        if args.preset.is_some() {
            return Err(CliError::Config(format!(
                "baseline method {} does not take --preset",
                args.method
            )));
        }
        if args.turns.is_some() {
            return Err(CliError::Config("--turns only applies to collaborative methods".into()));
        }
        let shot_mode = args.shots.unwrap_or(ShotMode::Zero);
        let shots = match shot_mode {
            ShotMode::Zero => {
                if args.exemplars.is_some() {
                    return Err(CliError::Config(
                        "--exemplars requires --shots few".into(),
                    ));
                }
                None
            }
            ShotMode::Few => {
                let path = args.exemplars.as_ref().ok_or_else(|| {
                    CliError::Config("few-shot baselines need --exemplars <file.toml>".into())
                })?;
                let require_reasoning = args.method == MethodKind::Cot;
                Some(
                    load_exemplar_file(path, "baseline", require_reasoning)
                        .map_err(classify_data)?,
                )
            }
        };
        Ok(MethodSpec::baseline(args.method, shot_mode, shots)
            .with_decoding(DecodingParams::greedy(&config.model)))
    }
}

pub fn cmd_eval(config: &EffectiveConfig, args: EvalArgs) -> Result<(), CliError> {
    eprintln!("{}", config.redacted_display());
    let method = build_method(config, &args)?;
    method.validate().map_err(classify_eval)?;

    let dataset_name = dataset_name_of(&args.dataset, args.dataset_name.as_deref());
    let mut problems = load_mmlu_csv(&args.dataset, &dataset_name).map_err(classify_data)?;
    if let Some(limit) = args.limit {
        if limit == 0 {
            return Err(CliError::Config("--limit must be at least 1".into()));
        }
        problems.truncate(limit);
    }
    let parallelism = args.parallelism.or(config.default_parallelism).unwrap_or(1);
    if parallelism == 0 {
        return Err(CliError::Config("--parallelism must be at least 1".into()));
    }

    let backend = build_backend(config)?;
    let mut outcome = evaluate(&method, &problems, &*backend, parallelism, &dataset_name)
        .map_err(classify_eval)?;

    if config.dry_run {
        for transcript in &outcome.transcripts {
            println!("### {}", transcript.problem_id);
            print_rendered_prompts(&transcript.turns);
        }
        return Ok(());
    }
    if let Some(path) = &args.transcripts {
        write_transcripts_jsonl(path, &outcome.transcripts)
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
        outcome.report.transcripts_path = Some(path.display().to_string());
        eprintln!("transcripts written to {}", path.display());
    }
    let bytes = emit_report(&outcome.report, args.format);
    match &args.out {
        Some(path) => {
            write_output(path, &bytes)?;
            eprintln!("report written to {}", path.display());
        }
        None => print_bytes(&bytes)?,
    }
    Ok(())
}

fn print_bytes(bytes: &[u8]) -> Result<(), CliError> {
    use std::io::Write;
    std::io::stdout()
        .write_all(bytes)
        .map_err(|e| CliError::Data(format!("cannot write to stdout: {e}")))
}

pub struct AblateArgs {
    pub suite: AblationSuite,
    pub dataset: PathBuf,
    pub benchmark: Option<String>,
    pub limit: Option<usize>,
    pub parallelism: Option<usize>,
    pub format: ReportFormat,
    pub out: Option<PathBuf>,
}

pub fn cmd_ablate(config: &EffectiveConfig, args: AblateArgs) -> Result<(), CliError> {
    eprintln!("{}", config.redacted_display());
    if config.dry_run {
        return Err(CliError::Config(
            "--dry-run applies to run and eval; ablations always execute".into(),
        ));
    }
    let root = presets_root(config)?;
    let benchmark = dataset_name_of(&args.dataset, args.benchmark.as_deref());
    let mut problems = load_mmlu_csv(&args.dataset, &benchmark).map_err(classify_data)?;
    if let Some(limit) = args.limit {
        if limit == 0 {
            return Err(CliError::Config("--limit must be at least 1".into()));
        }
        problems.truncate(limit);
    }
    let parallelism = args.parallelism.or(config.default_parallelism).unwrap_or(1).max(1);

    let backend = build_backend(config)?;
    let ctx = AblationContext {
        presets_root: &root,
        dataset_name: &benchmark,
        problems: &problems,
        parallelism,
    };
    let outcome = run_ablation(args.suite, &ctx, &*backend).map_err(classify_eval)?;
    let bytes = outcome.table.emit(args.format);
    match &args.out {
        Some(path) => {
            write_output(path, &bytes)?;
            eprintln!("table written to {}", path.display());
        }
        None => print_bytes(&bytes)?,
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheOp {
    Stats,
    Clear,
    Verify,
}

pub fn cmd_cache(config: &EffectiveConfig, op: CacheOp) -> Result<(), CliError> {
    let dir = config.cache_dir.as_ref().ok_or_else(|| {
        CliError::Config("no cache directory; pass --cache-dir or set COMM_CACHE_DIR".into())
    })?;
    let store = CacheStore::open(dir).map_err(|e| CliError::Data(e.to_string()))?;
    match op {
        CacheOp::Stats => {
            let stats = store.stats().map_err(|e| CliError::Data(e.to_string()))?;
            println!("cache: {}", dir.display());
            println!("entries: {}", stats.entries);
            println!("bytes: {}", stats.bytes);
        }
        CacheOp::Clear => {
            let removed = store.clear().map_err(|e| CliError::Data(e.to_string()))?;
            println!("cleared {removed} entries from {}", dir.display());
        }
        CacheOp::Verify => {
            let issues = store.verify().map_err(|e| CliError::Data(e.to_string()))?;
            if issues.is_empty() {
                println!("cache verified: 0 corrupt entries");
            } else {
                for issue in &issues {
                    println!("corrupt: {} ({})", issue.key, issue.detail);
                }
                return Err(CliError::Data(format!(
                    "cache verification found {} corrupt entries",
                    issues.len()
                )));
            }
        }
    }
    Ok(())
}

pub fn cmd_validate(config: &EffectiveConfig, preset: Option<String>) -> Result<(), CliError> {
    let root = presets_root(config)?;
    let violations = match &preset {
        Some(name) => validate_bundle(&root, name),
        None => validate_all(&root),
    };
    if violations.is_empty() {
        println!("presets ok: {}", root.display());
        Ok(())
    } else {
        for violation in &violations {
            println!("violation: {violation}");
        }
        Err(CliError::Data(format!("{} preset violations", violations.len())))
    }
}
