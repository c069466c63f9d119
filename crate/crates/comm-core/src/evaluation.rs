//! Method evaluation over problem sets, ablation suites, and report emission.

use crate::backend::{ChatBackend, SessionId};
use crate::datasets::{load_exemplar_file, load_team_preset, DataError};
use crate::domain::{
    AgentPosition, AgentSpec, AgentTurn, DomainError, ExemplarSet, Label, Problem, TeamConfig,
    Transcript,
};
use crate::extraction::extract_choice;
use crate::orchestrator::{run_single_agent, run_team, RunError};
use crate::prompt::{build_baseline_prompt, BaselineMethod, RenderError};
use serde::{Deserialize, Serialize, Serializer};
use sha2::{Digest, Sha256};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use thiserror::Error;

/// The prompting method under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Standard,
    Cot,
    CommMulti,
    CommSingleInstance,
}

impl std::fmt::Display for MethodKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MethodKind::Standard => "standard",
            MethodKind::Cot => "cot",
            MethodKind::CommMulti => "comm_multi",
            MethodKind::CommSingleInstance => "comm_single_instance",
        })
    }
}

impl std::str::FromStr for MethodKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standard" => Ok(MethodKind::Standard),
            "cot" => Ok(MethodKind::Cot),
            "comm_multi" => Ok(MethodKind::CommMulti),
            "comm_single_instance" => Ok(MethodKind::CommSingleInstance),
            other => Err(format!(
                "unknown method {other:?}; expected standard, cot, comm_multi, or comm_single_instance"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShotMode {
    Zero,
    Few,
}

impl std::fmt::Display for ShotMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ShotMode::Zero => "zero",
            ShotMode::Few => "few",
        })
    }
}

impl std::str::FromStr for ShotMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zero" => Ok(ShotMode::Zero),
            "few" => Ok(ShotMode::Few),
            other => Err(format!("unknown shot mode {other:?}; expected zero or few")),
        }
    }
}

/// A fully specified method: kind, shot mode, the team for collaborative
/// kinds, and demonstrations for few-shot baselines.
#[derive(Debug, Clone, Serialize)]
pub struct MethodSpec {
    pub kind: MethodKind,
    pub shot_mode: ShotMode,
    pub team: Option<TeamConfig>,
    pub shots: Option<ExemplarSet>,
    /// Decoding for baseline methods; collaborative methods take decoding
    /// from the team config instead.
    pub decoding: Option<crate::domain::DecodingParams>,
}

impl MethodSpec {
    pub fn baseline(kind: MethodKind, shot_mode: ShotMode, shots: Option<ExemplarSet>) -> Self {
        MethodSpec { kind, shot_mode, team: None, shots, decoding: None }
    }

    pub fn comm(kind: MethodKind, team: TeamConfig) -> Self {
        let shot_mode = if team.is_few_shot() { ShotMode::Few } else { ShotMode::Zero };
        MethodSpec { kind, shot_mode, team: Some(team), shots: None, decoding: None }
    }

    pub fn with_decoding(mut self, decoding: crate::domain::DecodingParams) -> Self {
        self.decoding = Some(decoding);
        self
    }

    pub fn is_comm(&self) -> bool {
        matches!(self.kind, MethodKind::CommMulti | MethodKind::CommSingleInstance)
    }

    /// Human-readable label used in reports.
    pub fn label(&self) -> String {
        format!("{} ({}-shot)", self.kind, self.shot_mode)
    }

    /// Digest identifying this method configuration in transcripts.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("method spec serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        match (self.is_comm(), &self.team) {
            (true, None) => {
                return Err(EvalError::Method(format!(
                    "method {} requires a team config",
                    self.kind
                )));
            }
            (false, Some(_)) => {
                return Err(EvalError::Method(format!(
                    "baseline method {} must not carry a team config",
                    self.kind
                )));
            }
            _ => {}
        }
        if let Some(team) = &self.team {
            team.validate()?;
            let team_mode = if team.is_few_shot() { ShotMode::Few } else { ShotMode::Zero };
            if team_mode != self.shot_mode {
                return Err(EvalError::Method(format!(
                    "shot mode {} does not match the team preset ({team_mode}-shot)",
                    self.shot_mode
                )));
            }
            if self.shots.is_some() {
                return Err(EvalError::Method(
                    "collaborative methods take exemplars from the team preset, not shots".into(),
                ));
            }
            if self.decoding.is_some() {
                return Err(EvalError::Method(
                    "collaborative methods take decoding from the team preset".into(),
                ));
            }
        } else {
            match self.shot_mode {
                ShotMode::Few => {
                    if self.shots.as_ref().is_none_or(|s| s.is_empty()) {
                        return Err(EvalError::Method(format!(
                            "few-shot baseline {} needs a non-empty exemplar set",
                            self.kind
                        )));
                    }
                }
                ShotMode::Zero => {
                    if self.shots.as_ref().is_some_and(|s| !s.is_empty()) {
                        return Err(EvalError::Method(format!(
                            "zero-shot baseline {} must not carry exemplars",
                            self.kind
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// One problem's outcome inside a report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemVerdict {
    pub problem_id: String,
    pub extracted: Option<Label>,
    pub correct: bool,
    /// Failure note when the backend gave up on this problem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn two_decimals<S: Serializer>(value: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{value:.2}"))
}

/// Aggregated evaluation result for one (method, dataset) pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub method: String,
    pub dataset: String,
    pub n_total: usize,
    pub n_correct: usize,
    /// 100 * n_correct / n_total; rendered with two decimals everywhere.
    #[serde(serialize_with = "two_decimals")]
    pub accuracy_percent: f64,
    pub verdicts: Vec<ProblemVerdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcripts_path: Option<String>,
}

impl EvalReport {
    pub fn accuracy_display(&self) -> String {
        format!("{:.2}", self.accuracy_percent)
    }
}

/// Report plus the per-problem transcripts, ordered by problem index.
#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub report: EvalReport,
    pub transcripts: Vec<Transcript>,
}

struct ProblemResult {
    transcript: Transcript,
    verdict: ProblemVerdict,
}

fn baseline_method(kind: MethodKind) -> BaselineMethod {
    match kind {
        MethodKind::Standard => BaselineMethod::Standard,
        _ => BaselineMethod::Cot,
    }
}

fn run_one(
    method: &MethodSpec,
    problem: &Problem,
    backend: &dyn ChatBackend,
) -> Result<ProblemResult, EvalError> {
    let outcome = match method.kind {
        MethodKind::CommMulti | MethodKind::CommSingleInstance => {
            let team = method.team.as_ref().expect("validated");
            let run = if method.kind == MethodKind::CommMulti {
                run_team(team, problem, backend)
            } else {
                run_single_agent(team, problem, backend)
            };
            match run {
                Ok(transcript) => Ok(transcript),
                Err(RunError::Backend { source, partial }) => Err((
                    format!("backend failure: {source}"),
                    Transcript {
                        problem_id: problem.id.clone(),
                        team_fingerprint: crate::domain::fingerprint(team),
                        turns: partial,
                        verdict: crate::domain::Verdict {
                            extracted: None,
                            correct: false,
                            raw_final: String::new(),
                        },
                    },
                )),
                Err(RunError::Config(e)) => return Err(EvalError::Domain(e)),
                Err(RunError::Render(e)) => return Err(EvalError::Render(e)),
            }
        }
        MethodKind::Standard | MethodKind::Cot => {
            let empty = ExemplarSet::default();
            let shots = method.shots.as_ref().unwrap_or(&empty);
            let prompt = build_baseline_prompt(problem, baseline_method(method.kind), shots)?;
            let session = SessionId::new(format!("{}::baseline", problem.id));
            let fingerprint = method.fingerprint();
            match backend.complete(&session, &prompt, &baseline_decoding(method)) {
                Ok(completion) => {
                    let extracted = extract_choice(&completion, &problem.labels());
                    Ok(Transcript {
                        problem_id: problem.id.clone(),
                        team_fingerprint: fingerprint,
                        turns: vec![AgentTurn {
                            agent_name: method.kind.to_string(),
                            turn_index: 1,
                            prompt,
                            completion: completion.clone(),
                        }],
                        verdict: crate::domain::Verdict {
                            extracted,
                            correct: extracted == Some(problem.gold),
                            raw_final: completion,
                        },
                    })
                }
                Err(e) => Err((
                    format!("backend failure: {e}"),
                    Transcript {
                        problem_id: problem.id.clone(),
                        team_fingerprint: fingerprint,
                        turns: Vec::new(),
                        verdict: crate::domain::Verdict {
                            extracted: None,
                            correct: false,
                            raw_final: String::new(),
                        },
                    },
                )),
            }
        }
    };
    Ok(match outcome {
        Ok(transcript) => {
            let verdict = ProblemVerdict {
                problem_id: problem.id.clone(),
                extracted: transcript.verdict.extracted,
                correct: transcript.verdict.correct,
                note: None,
            };
            ProblemResult { transcript, verdict }
        }
        Err((note, transcript)) => {
            let verdict = ProblemVerdict {
                problem_id: problem.id.clone(),
                extracted: None,
                correct: false,
                note: Some(note),
            };
            ProblemResult { transcript, verdict }
        }
    })
}

/// Decoding for baseline prompts: the method's override, else greedy over a
/// fixed fallback model id.
fn baseline_decoding(method: &MethodSpec) -> crate::domain::DecodingParams {
    method
        .decoding
        .clone()
        .unwrap_or_else(|| crate::domain::DecodingParams::greedy(BASELINE_MODEL_FALLBACK))
}

/// Model id used for baseline runs when no override is supplied.
pub const BASELINE_MODEL_FALLBACK: &str = "default-model";

/// Evaluates `method` over every problem exactly once.
///
/// Problems run on a bounded worker pool of `parallelism` threads, but results
/// are gathered and reported in problem-index order, so output is byte-stable
/// across parallelism levels given a deterministic backend. A backend failure
/// scores that problem incorrect (with a note) and evaluation continues.
pub fn evaluate(
    method: &MethodSpec,
    problems: &[Problem],
    backend: &dyn ChatBackend,
    parallelism: usize,
    dataset: &str,
) -> Result<EvalOutcome, EvalError> {
    method.validate()?;
    if problems.is_empty() {
        return Err(EvalError::EmptyProblemSet);
    }
    let workers = parallelism.max(1).min(problems.len());
    let results: Mutex<Vec<Option<Result<ProblemResult, EvalError>>>> =
        Mutex::new((0..problems.len()).map(|_| None).collect());

    if workers == 1 {
        let results = results.lock().expect("results lock");
        let mut results = results;
        for (i, problem) in problems.iter().enumerate() {
            results[i] = Some(run_one(method, problem, backend));
        }
    } else {
        let next = AtomicUsize::new(0);
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= problems.len() {
                        break;
                    }
                    let outcome = run_one(method, &problems[i], backend);
                    results.lock().expect("results lock")[i] = Some(outcome);
                });
            }
        });
    }

    let collected = results.into_inner().expect("results lock");
    let mut verdicts = Vec::with_capacity(problems.len());
    let mut transcripts = Vec::with_capacity(problems.len());
    let mut n_correct = 0usize;
    for slot in collected {
        let result = slot.expect("every problem attempted")?;
        if result.verdict.correct {
            n_correct += 1;
        }
        verdicts.push(result.verdict);
        transcripts.push(result.transcript);
    }
    let n_total = problems.len();
    let report = EvalReport {
        method: method.label(),
        dataset: dataset.to_string(),
        n_total,
        n_correct,
        accuracy_percent: 100.0 * n_correct as f64 / n_total as f64,
        verdicts,
        transcripts_path: None,
    };
    Ok(EvalOutcome { report, transcripts })
}

/// Writes transcripts as JSON lines, one full transcript object per problem.
pub fn write_transcripts_jsonl(path: &Path, transcripts: &[Transcript]) -> std::io::Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for transcript in transcripts {
        serde_json::to_writer(&mut out, transcript)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Output encodings for reports and comparison tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    PlainTable,
    Delimited,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "plain" | "plain_table" | "table" => Ok(ReportFormat::PlainTable),
            "delimited" | "tsv" => Ok(ReportFormat::Delimited),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown format {other:?}; expected plain, delimited, or json")),
        }
    }
}

fn render_cell(extracted: &Option<Label>) -> String {
    extracted.map(|l| l.to_string()).unwrap_or_else(|| "-".to_string())
}

/// Serializes a report; stable and diff-friendly in every format.
pub fn emit_report(report: &EvalReport, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Json => {
            let mut bytes = serde_json::to_vec_pretty(report).expect("report serializes");
            bytes.push(b'\n');
            bytes
        }
        ReportFormat::Delimited => {
            let mut out = String::new();
            out.push_str(&format!("method\t{}\n", report.method));
            out.push_str(&format!("dataset\t{}\n", report.dataset));
            out.push_str(&format!("n_total\t{}\n", report.n_total));
            out.push_str(&format!("n_correct\t{}\n", report.n_correct));
            out.push_str(&format!("accuracy_percent\t{}\n", report.accuracy_display()));
            if let Some(path) = &report.transcripts_path {
                out.push_str(&format!("transcripts\t{path}\n"));
            }
            out.push('\n');
            out.push_str("problem_id\textracted\tcorrect\tnote\n");
            for v in &report.verdicts {
                out.push_str(&format!(
                    "{}\t{}\t{}\t{}\n",
                    v.problem_id,
                    render_cell(&v.extracted),
                    if v.correct { "yes" } else { "no" },
                    v.note.as_deref().unwrap_or("-"),
                ));
            }
            out.into_bytes()
        }
        ReportFormat::PlainTable => {
            let mut out = String::new();
            out.push_str(&format!("method:   {}\n", report.method));
            out.push_str(&format!("dataset:  {}\n", report.dataset));
            out.push_str(&format!(
                "accuracy: {} ({} / {})\n",
                report.accuracy_display(),
                report.n_correct,
                report.n_total
            ));
            if let Some(path) = &report.transcripts_path {
                out.push_str(&format!("transcripts: {path}\n"));
            }
            out.push('\n');
            let rows: Vec<[String; 4]> = report
                .verdicts
                .iter()
                .map(|v| {
                    [
                        v.problem_id.clone(),
                        render_cell(&v.extracted),
                        if v.correct { "yes".into() } else { "no".into() },
                        v.note.clone().unwrap_or_else(|| "-".into()),
                    ]
                })
                .collect();
            let header = ["problem_id", "extracted", "correct", "note"];
            let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
            for row in &rows {
                for (w, cell) in widths.iter_mut().zip(row.iter()) {
                    *w = (*w).max(cell.len());
                }
            }
            let fmt_row = |cells: &[&str], widths: &[usize]| -> String {
                cells
                    .iter()
                    .zip(widths)
                    .map(|(c, w)| format!("{c:<w$}"))
                    .collect::<Vec<_>>()
                    .join("  ")
                    .trim_end()
                    .to_string()
            };
            out.push_str(&fmt_row(&header, &widths));
            out.push('\n');
            for row in &rows {
                let cells: Vec<&str> = row.iter().map(|s| s.as_str()).collect();
                out.push_str(&fmt_row(&cells, &widths));
                out.push('\n');
            }
            out.into_bytes()
        }
    }
}

/// A labeled comparison grid produced by an ablation suite.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComparisonTable {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ComparisonTable {
    /// First-column labels, one per row.
    pub fn row_labels(&self) -> Vec<&str> {
        self.rows.iter().map(|r| r[0].as_str()).collect()
    }

    pub fn emit(&self, format: ReportFormat) -> Vec<u8> {
        match format {
            ReportFormat::Json => {
                let mut bytes = serde_json::to_vec_pretty(self).expect("table serializes");
                bytes.push(b'\n');
                bytes
            }
            ReportFormat::Delimited => {
                let mut out = format!("# {}\n", self.title);
                out.push_str(&self.columns.join("\t"));
                out.push('\n');
                for row in &self.rows {
                    out.push_str(&row.join("\t"));
                    out.push('\n');
                }
                out.into_bytes()
            }
            ReportFormat::PlainTable => {
                let mut widths: Vec<usize> = self.columns.iter().map(|c| c.len()).collect();
                for row in &self.rows {
                    for (w, cell) in widths.iter_mut().zip(row.iter()) {
                        *w = (*w).max(cell.len());
                    }
                }
                let fmt_row = |cells: &[String]| -> String {
                    cells
                        .iter()
                        .zip(&widths)
                        .map(|(c, w)| format!("{c:<w$}"))
                        .collect::<Vec<_>>()
                        .join("  ")
                        .trim_end()
                        .to_string()
                };
                let mut out = format!("{}\n", self.title);
                out.push_str(&fmt_row(&self.columns));
                out.push('\n');
                out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
                out.push('\n');
                for row in &self.rows {
                    out.push_str(&fmt_row(row));
                    out.push('\n');
                }
                out.into_bytes()
            }
        }
    }
}

/// The three ablation suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationSuite {
    AgentCount,
    ExpertComposition,
    TurnCount,
}

impl std::str::FromStr for AblationSuite {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "agent_count" => Ok(AblationSuite::AgentCount),
            "expert_composition" => Ok(AblationSuite::ExpertComposition),
            "turn_count" => Ok(AblationSuite::TurnCount),
            other => Err(format!(
                "unknown suite {other:?}; expected agent_count, expert_composition, or turn_count"
            )),
        }
    }
}

/// Everything an ablation needs besides the backend.
pub struct AblationContext<'a> {
    pub presets_root: &'a Path,
    /// Dataset identifier matching the preset naming scheme ("{name}_zero",
    /// "{name}_few"), e.g. "college_physics".
    pub dataset_name: &'a str,
    pub problems: &'a [Problem],
    pub parallelism: usize,
}

/// Table plus the per-cell reports that produced it.
pub struct AblationOutcome {
    pub table: ComparisonTable,
    pub reports: Vec<EvalReport>,
}

fn display_benchmark(name: &str) -> String {
    name.split(['_', '-'])
        .filter(|w| !w.is_empty())
        .map(|w| {
            let mut chars = w.chars();
            match chars.next() {
                Some(first) => first.to_uppercase().collect::<String>() + chars.as_str(),
                None => String::new(),
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn title_case_word(name: &str) -> String {
    display_benchmark(name)
}

fn load_preset_pair(
    ctx: &AblationContext,
) -> Result<(TeamConfig, TeamConfig), EvalError> {
    let zero = load_team_preset(ctx.presets_root, &format!("{}_zero", ctx.dataset_name))?;
    let few = load_team_preset(ctx.presets_root, &format!("{}_few", ctx.dataset_name))?;
    Ok((zero, few))
}

fn accuracy_cell(
    method: &MethodSpec,
    ctx: &AblationContext,
    backend: &dyn ChatBackend,
    reports: &mut Vec<EvalReport>,
) -> Result<String, EvalError> {
    let outcome = evaluate(method, ctx.problems, backend, ctx.parallelism, ctx.dataset_name)?;
    let cell = outcome.report.accuracy_display();
    reports.push(outcome.report);
    Ok(cell)
}

/// Restricts a team to the given expert roster, renumbering positions.
fn with_experts(base: &TeamConfig, experts: Vec<AgentSpec>) -> TeamConfig {
    let mut config = base.clone();
    config.experts = experts
        .into_iter()
        .enumerate()
        .map(|(i, mut agent)| {
            agent.position = AgentPosition::Expert((i + 1) as u32);
            agent
        })
        .collect();
    config
}

fn duplicated_expert(agent: &AgentSpec) -> Vec<AgentSpec> {
    let mut second = agent.clone();
    second.name = format!("second {}", agent.name);
    if let Some(set) = &mut second.exemplar_set {
        set.owner_role = second.name.clone();
    }
    vec![agent.clone(), second]
}

/// Runs one ablation suite and shapes its comparison table.
pub fn run_ablation(
    suite: AblationSuite,
    ctx: &AblationContext,
    backend: &dyn ChatBackend,
) -> Result<AblationOutcome, EvalError> {
    if ctx.problems.is_empty() {
        return Err(EvalError::EmptyProblemSet);
    }
    let mut reports = Vec::new();
    let benchmark = display_benchmark(ctx.dataset_name);
    let (zero_team, few_team) = load_preset_pair(ctx)?;

    let table = match suite {
        AblationSuite::AgentCount => {
            let mut rows = Vec::new();
            for (setting, team) in [("Zero-shot", &zero_team), ("Few-shot", &few_team)] {
                let single = MethodSpec::comm(MethodKind::CommSingleInstance, team.clone());
                let multi = MethodSpec::comm(MethodKind::CommMulti, team.clone());
                let single_cell = accuracy_cell(&single, ctx, backend, &mut reports)?;
                let multi_cell = accuracy_cell(&multi, ctx, backend, &mut reports)?;
                rows.push(vec![
                    benchmark.clone(),
                    setting.to_string(),
                    single_cell,
                    multi_cell,
                ]);
            }
            ComparisonTable {
                title: format!("Single Agent v.s. Multiple Agents, (Accuracy, %) — {benchmark}"),
                columns: vec![
                    "Benchmark".into(),
                    "Settings".into(),
                    "Single Agent".into(),
                    "Multiple Agents".into(),
                ],
                rows,
            }
        }
        AblationSuite::TurnCount => {
            let mut rows = Vec::new();
            for (setting, team) in [("Zero-shot", &zero_team), ("Few-shot", &few_team)] {
                let mut cells = Vec::new();
                for turns in [1u32, 2] {
                    let mut config = team.clone();
                    config.turns = turns;
                    let method = MethodSpec::comm(MethodKind::CommMulti, config);
                    cells.push(accuracy_cell(&method, ctx, backend, &mut reports)?);
                }
                rows.push(vec![
                    benchmark.clone(),
                    setting.to_string(),
                    cells[0].clone(),
                    cells[1].clone(),
                ]);
            }
            ComparisonTable {
                title: format!("Single Turn v.s. Multiple Turns, (Accuracy, %) — {benchmark}"),
                columns: vec![
                    "Benchmark".into(),
                    "Settings".into(),
                    "One Turn (Acc%)".into(),
                    "Two Turns (Acc%)".into(),
                ],
                rows,
            }
        }
        AblationSuite::ExpertComposition => {
            if zero_team.expert_count() != 2 || few_team.expert_count() != 2 {
                return Err(EvalError::Method(format!(
                    "expert_composition needs two-expert presets; {} has {} experts",
                    ctx.dataset_name,
                    zero_team.expert_count()
                )));
            }
            // Chain-of-thought demonstrations for the few-shot reference row.
            let cot_shots_path = ctx
                .presets_root
                .join(format!("{}_few", ctx.dataset_name))
                .join("exemplars/chain_of_thought.toml");
            let cot_shots = load_exemplar_file(&cot_shots_path, "chain-of-thought", true)?;

            let mut rows = Vec::new();
            let mut composition_row =
                |label: String,
                 zero_method: MethodSpec,
                 few_method: MethodSpec,
                 reports: &mut Vec<EvalReport>|
                 -> Result<(), EvalError> {
                    let zero_cell = accuracy_cell(&zero_method, ctx, backend, reports)?;
                    let few_cell = accuracy_cell(&few_method, ctx, backend, reports)?;
                    rows.push(vec![label, zero_cell, few_cell]);
                    Ok(())
                };

            composition_row(
                "CoT".into(),
                MethodSpec::baseline(MethodKind::Cot, ShotMode::Zero, None)
                    .with_decoding(zero_team.decoding.clone()),
                MethodSpec::baseline(MethodKind::Cot, ShotMode::Few, Some(cot_shots))
                    .with_decoding(few_team.decoding.clone()),
                &mut reports,
            )?;
            for i in 0..2 {
                composition_row(
                    format!("One {} Only", title_case_word(&zero_team.experts[i].name)),
                    MethodSpec::comm(
                        MethodKind::CommMulti,
                        with_experts(&zero_team, vec![zero_team.experts[i].clone()]),
                    ),
                    MethodSpec::comm(
                        MethodKind::CommMulti,
                        with_experts(&few_team, vec![few_team.experts[i].clone()]),
                    ),
                    &mut reports,
                )?;
            }
            for i in 0..2 {
                composition_row(
                    format!("Two {}s", title_case_word(&zero_team.experts[i].name)),
                    MethodSpec::comm(
                        MethodKind::CommMulti,
                        with_experts(&zero_team, duplicated_expert(&zero_team.experts[i])),
                    ),
                    MethodSpec::comm(
                        MethodKind::CommMulti,
                        with_experts(&few_team, duplicated_expert(&few_team.experts[i])),
                    ),
                    &mut reports,
                )?;
            }
            composition_row(
                "Both Experts (CoMM)".into(),
                MethodSpec::comm(MethodKind::CommMulti, zero_team.clone()),
                MethodSpec::comm(MethodKind::CommMulti, few_team.clone()),
                &mut reports,
            )?;

            ComparisonTable {
                title: format!(
                    "Single Expert v.s. Multiple Experts on {benchmark}, (Accuracy, %)"
                ),
                columns: vec!["Settings".into(), "Zero-shot".into(), "Few-shot".into()],
                rows,
            }
        }
    };
    Ok(AblationOutcome { table, reports })
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("method configuration error: {0}")]
    Method(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("no problems to evaluate")]
    EmptyProblemSet,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{ConstantBackend, HashAnswerBackend};
    use crate::testutil::{exemplar, problem_abcd, team_config};

    fn problems(golds: &str) -> Vec<Problem> {
        golds
            .chars()
            .enumerate()
            .map(|(i, g)| problem_abcd(&format!("t:{i}"), g))
            .collect()
    }

    #[test]
    fn accuracy_arithmetic_matches_hand_counts() {
        // Backend always answers A; golds A,A,A,B → 3/4 correct.
        let backend = ConstantBackend("The answer is (A).".into());
        let method = MethodSpec::baseline(MethodKind::Standard, ShotMode::Zero, None);
        let outcome = evaluate(&method, &problems("AAAB"), &backend, 1, "fixture").unwrap();
        assert_eq!(outcome.report.n_total, 4);
        assert_eq!(outcome.report.n_correct, 3);
        assert_eq!(outcome.report.accuracy_display(), "75.00");

        let wrong = ConstantBackend("The answer is (D).".into());
        let outcome = evaluate(&method, &problems("AAAB"), &wrong, 1, "fixture").unwrap();
        assert_eq!(outcome.report.accuracy_display(), "0.00");
    }

    #[test]
    fn two_decimal_rendering_matches_convention() {
        let report = EvalReport {
            method: "m".into(),
            dataset: "d".into(),
            n_total: 17,
            n_correct: 11,
            accuracy_percent: 100.0 * 11.0 / 17.0,
            verdicts: vec![],
            transcripts_path: None,
        };
        assert_eq!(report.accuracy_display(), "64.71");
    }

    #[test]
    fn parallel_evaluation_is_byte_identical_to_serial() {
        let backend = HashAnswerBackend::new("ABCD".chars());
        let method = MethodSpec::comm(MethodKind::CommMulti, team_config(2, 1, false));
        let set = problems(&"ABCD".repeat(13)); // 52 problems
        let serial = evaluate(&method, &set, &backend, 1, "fixture").unwrap();
        let parallel = evaluate(&method, &set, &backend, 8, "fixture").unwrap();
        for format in [ReportFormat::PlainTable, ReportFormat::Delimited, ReportFormat::Json] {
            assert_eq!(
                emit_report(&serial.report, format),
                emit_report(&parallel.report, format)
            );
        }
        assert_eq!(serial.transcripts, parallel.transcripts);
    }

    #[test]
    fn shuffling_problems_does_not_change_accuracy() {
        let backend = HashAnswerBackend::new("ABCD".chars());
        let method = MethodSpec::comm(MethodKind::CommMulti, team_config(2, 1, false));
        let set = problems("ABCDDCBAABCD");
        let forward = evaluate(&method, &set, &backend, 2, "fixture").unwrap();
        let mut reversed = set.clone();
        reversed.reverse();
        let backward = evaluate(&method, &reversed, &backend, 2, "fixture").unwrap();
        assert_eq!(forward.report.n_correct, backward.report.n_correct);
        assert_eq!(forward.report.accuracy_display(), backward.report.accuracy_display());
    }

    #[test]
    fn backend_failure_scores_incorrect_and_continues() {
        // Script provides enough responses for problems 1 and 3 only (2 calls each
        // for a 1-expert team); the middle problem starves.
        let backend = crate::backend::ScriptedBackend::from_responses([
            "The answer is (A).",
            "The answer is (A).",
            "The answer is (A).",
        ]);
        let method = MethodSpec::comm(MethodKind::CommMulti, team_config(1, 1, false));
        let outcome = evaluate(&method, &problems("AA"), &backend, 1, "fixture").unwrap();
        assert_eq!(outcome.report.n_total, 2);
        assert_eq!(outcome.report.n_correct, 1);
        assert!(outcome.report.verdicts[1].note.as_deref().unwrap().contains("backend failure"));
        assert_eq!(outcome.transcripts[1].turns.len(), 1, "partial transcript preserved");
    }

    #[test]
    fn method_validation_enforces_team_and_shots_rules() {
        let no_team = MethodSpec {
            kind: MethodKind::CommMulti,
            shot_mode: ShotMode::Zero,
            team: None,
            shots: None,
            decoding: None,
        };
        assert!(no_team.validate().is_err());

        let baseline_with_team = MethodSpec {
            kind: MethodKind::Standard,
            shot_mode: ShotMode::Zero,
            team: Some(team_config(1, 1, false)),
            shots: None,
            decoding: None,
        };
        assert!(baseline_with_team.validate().is_err());

        let few_without_shots =
            MethodSpec::baseline(MethodKind::Cot, ShotMode::Few, None);
        assert!(few_without_shots.validate().is_err());

        let mismatched_mode = MethodSpec {
            kind: MethodKind::CommMulti,
            shot_mode: ShotMode::Few,
            team: Some(team_config(2, 1, false)),
            shots: None,
            decoding: None,
        };
        assert!(mismatched_mode.validate().is_err());

        let ok_few = MethodSpec::baseline(
            MethodKind::Cot,
            ShotMode::Few,
            Some(ExemplarSet {
                owner_role: "baseline".into(),
                exemplars: vec![exemplar("q", "r", 'A')],
            }),
        );
        assert!(ok_few.validate().is_ok());
    }

    #[test]
    fn report_emission_is_stable_and_consistent_across_formats() {
        let backend = ConstantBackend("The answer is (B).".into());
        let method = MethodSpec::baseline(MethodKind::Standard, ShotMode::Zero, None);
        let outcome = evaluate(&method, &problems("BABA"), &backend, 1, "fixture").unwrap();
        let json = String::from_utf8(emit_report(&outcome.report, ReportFormat::Json)).unwrap();
        let plain =
            String::from_utf8(emit_report(&outcome.report, ReportFormat::PlainTable)).unwrap();
        let tsv =
            String::from_utf8(emit_report(&outcome.report, ReportFormat::Delimited)).unwrap();
        assert!(json.contains("\"n_correct\": 2"));
        assert!(json.contains("\"accuracy_percent\": \"50.00\""));
        assert!(plain.contains("accuracy: 50.00 (2 / 4)"));
        assert!(tsv.contains("n_correct\t2"));
    }
}
