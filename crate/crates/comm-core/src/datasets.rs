//! File ingestion: multiple-choice CSVs, exemplar files, and team presets.

use crate::domain::{
    AgentPosition, AgentSpec, Choice, DecodingParams, DomainError, Exemplar, ExemplarSet, Label,
    Problem, TeamConfig,
};
use crate::prompt::{
    EXPERT_USER_PLACEHOLDERS, PERSONA_PLACEHOLDERS, SUMMARIZER_USER_PLACEHOLDERS,
    SYSTEM_PLACEHOLDERS,
};
use crate::template::{Template, TemplateError};
use serde::Deserialize;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Describes one problem file: stable name (used in reports and problem ids),
/// location, and the expected column count.
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    pub name: String,
    pub path: PathBuf,
    pub expected_columns: usize,
    pub split: String,
}

impl DatasetManifest {
    /// Manifest with the name taken from the file stem (e.g. `college_physics.csv`
    /// → "college_physics").
    pub fn from_path(path: impl Into<PathBuf>) -> Self {
        let path = path.into();
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".to_string());
        DatasetManifest { name, path, expected_columns: 6, split: "test".into() }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn load(&self) -> Result<Vec<Problem>, DataError> {
        load_mmlu_csv(&self.path, &self.name)
    }
}

/// Loads a 6-column multiple-choice CSV: question, four options, answer letter.
///
/// A header row is recognized (and skipped) only when its last cell is
/// "answer" or "gold", so a malformed answer letter fails loudly instead of
/// being mistaken for a header. Problem ids are "{dataset}:{row_index}" with
/// row indices counting data rows from zero in file order.
pub fn load_mmlu_csv(path: &Path, dataset: &str) -> Result<Vec<Problem>, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|source| DataError::Csv { path: display(path), source })?;

    let mut problems = Vec::new();
    let mut data_row = 0usize;
    for (file_row, record) in reader.records().enumerate() {
        let record = record.map_err(|source| DataError::Csv { path: display(path), source })?;
        if file_row == 0 {
            let last = record.iter().last().unwrap_or("").trim().to_ascii_lowercase();
            if last == "answer" || last == "gold" {
                continue;
            }
        }
        if record.len() != 6 {
            return Err(DataError::Row {
                path: display(path),
                row: file_row + 1,
                detail: format!("expected 6 columns, found {}", record.len()),
            });
        }
        let question = record[0].trim().to_string();
        let options: Vec<String> = (1..=4).map(|i| record[i].trim().to_string()).collect();
        let answer = record[5].trim();
        let gold = parse_single_label(answer).map_err(|detail| DataError::Row {
            path: display(path),
            row: file_row + 1,
            detail,
        })?;
        let problem = Problem::new(format!("{dataset}:{data_row}"), question, options, gold)
            .map_err(|e| DataError::Row {
                path: display(path),
                row: file_row + 1,
                detail: e.to_string(),
            })?;
        problems.push(problem);
        data_row += 1;
    }
    if problems.is_empty() {
        return Err(DataError::EmptyDataset { path: display(path) });
    }
    Ok(problems)
}

fn parse_single_label(raw: &str) -> Result<Label, String> {
    let mut chars = raw.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => {
            Label::new(c).map_err(|_| format!("answer {raw:?} is not an uppercase letter"))
        }
        _ => Err(format!("answer {raw:?} is not a single letter")),
    }
}

#[derive(Debug, Deserialize)]
struct RawExemplarFile {
    #[serde(default, rename = "exemplar")]
    exemplars: Vec<RawExemplar>,
}

#[derive(Debug, Deserialize)]
struct RawExemplar {
    question: String,
    choices: Vec<String>,
    answer: String,
    #[serde(default)]
    reasoning: Option<String>,
}

/// Loads an exemplar TOML file into an [`ExemplarSet`] in file order.
///
/// With `require_reasoning` (few-shot use), a record without reasoning text is
/// a load error; an empty file yields an empty set either way.
pub fn load_exemplar_file(
    path: &Path,
    owner_role: &str,
    require_reasoning: bool,
) -> Result<ExemplarSet, DataError> {
    let raw_text = std::fs::read_to_string(path)
        .map_err(|source| DataError::Io { path: display(path), source })?;
    let raw: RawExemplarFile = toml::from_str(&raw_text)
        .map_err(|source| DataError::Toml { path: display(path), detail: source.to_string() })?;
    let mut exemplars = Vec::with_capacity(raw.exemplars.len());
    for (i, rec) in raw.exemplars.into_iter().enumerate() {
        let context = |detail: String| DataError::Row {
            path: display(path),
            row: i + 1,
            detail,
        };
        let gold = parse_single_label(&rec.answer).map_err(context)?;
        let choices = rec
            .choices
            .iter()
            .enumerate()
            .map(|(j, text)| {
                Label::from_index(j).map(|label| Choice { label, text: text.clone() })
            })
            .collect::<Result<Vec<_>, DomainError>>()
            .map_err(|e| context(e.to_string()))?;
        let reasoning = rec.reasoning.unwrap_or_default();
        if require_reasoning && reasoning.trim().is_empty() {
            return Err(context(format!(
                "exemplar {} for {owner_role} has no reasoning text, required in few-shot mode",
                i + 1
            )));
        }
        let exemplar =
            Exemplar { question: rec.question, choices, reasoning, answer: gold };
        exemplar.validate().map_err(|e| context(e.to_string()))?;
        exemplars.push(exemplar);
    }
    Ok(ExemplarSet { owner_role: owner_role.to_string(), exemplars })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTeamPreset {
    #[serde(default)]
    name: Option<String>,
    turns: u32,
    #[serde(default)]
    shared_questions: bool,
    #[serde(default)]
    system_template: Option<String>,
    #[serde(default)]
    system_template_file: Option<String>,
    #[serde(default)]
    expert_user_template: Option<String>,
    #[serde(default)]
    expert_user_template_file: Option<String>,
    #[serde(default)]
    summarizer_user_template: Option<String>,
    #[serde(default)]
    summarizer_user_template_file: Option<String>,
    decoding: RawDecoding,
    #[serde(rename = "experts")]
    experts: Vec<RawAgent>,
    summarizer: RawAgent,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDecoding {
    model_id: String,
    #[serde(default)]
    temperature: f64,
    #[serde(default)]
    max_tokens: Option<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAgent {
    name: String,
    #[serde(default)]
    persona: Option<String>,
    #[serde(default)]
    persona_file: Option<String>,
    #[serde(default)]
    exemplars_file: Option<String>,
}

/// Resolves an inline-text-or-file-path field pair to text.
fn text_or_file(
    preset_path: &Path,
    base: &Path,
    field: &str,
    inline: Option<String>,
    file: Option<String>,
) -> Result<Option<String>, DataError> {
    match (inline, file) {
        (Some(_), Some(_)) => Err(DataError::ConflictingFields {
            path: display(preset_path),
            field: field.to_string(),
        }),
        (Some(text), None) => Ok(Some(text)),
        (None, Some(rel)) => {
            let full = base.join(rel);
            let text = std::fs::read_to_string(&full)
                .map_err(|source| DataError::Io { path: display(&full), source })?;
            Ok(Some(text.trim_end_matches('\n').to_string()))
        }
        (None, None) => Ok(None),
    }
}

fn compile_checked(
    path: &Path,
    what: &str,
    source: &str,
    allowed: &[&str],
) -> Result<(), DataError> {
    Template::compile(source, allowed).map(|_| ()).map_err(|e| DataError::Template {
        path: display(path),
        what: what.to_string(),
        source: e,
    })
}

/// Loads a team preset directory (`{root}/{name}/team.toml`).
///
/// Template and persona files are compiled here so unknown placeholders fail
/// at load time, and the resulting config is fully validated.
pub fn load_team_preset(root: &Path, name: &str) -> Result<TeamConfig, DataError> {
    let preset_dir = root.join(name);
    let preset_path = preset_dir.join("team.toml");
    if !preset_path.is_file() {
        return Err(DataError::UnknownPreset {
            name: name.to_string(),
            available: available_presets(root),
        });
    }
    let raw_text = std::fs::read_to_string(&preset_path)
        .map_err(|source| DataError::Io { path: display(&preset_path), source })?;
    let raw: RawTeamPreset = toml::from_str(&raw_text).map_err(|source| DataError::Toml {
        path: display(&preset_path),
        detail: source.to_string(),
    })?;

    let system_template = text_or_file(
        &preset_path,
        &preset_dir,
        "system_template",
        raw.system_template,
        raw.system_template_file,
    )?
    .ok_or_else(|| DataError::MissingField {
        path: display(&preset_path),
        field: "system_template (or system_template_file)".into(),
    })?;
    let expert_user_template = text_or_file(
        &preset_path,
        &preset_dir,
        "expert_user_template",
        raw.expert_user_template,
        raw.expert_user_template_file,
    )?
    .unwrap_or_else(|| crate::prompt::DEFAULT_EXPERT_USER_TEMPLATE.to_string());
    let summarizer_user_template = text_or_file(
        &preset_path,
        &preset_dir,
        "summarizer_user_template",
        raw.summarizer_user_template,
        raw.summarizer_user_template_file,
    )?
    .unwrap_or_else(|| crate::prompt::DEFAULT_SUMMARIZER_USER_TEMPLATE.to_string());

    compile_checked(&preset_path, "system template", &system_template, SYSTEM_PLACEHOLDERS)?;
    compile_checked(
        &preset_path,
        "expert user template",
        &expert_user_template,
        EXPERT_USER_PLACEHOLDERS,
    )?;
    compile_checked(
        &preset_path,
        "summarizer user template",
        &summarizer_user_template,
        SUMMARIZER_USER_PLACEHOLDERS,
    )?;

    let few_shot = raw.experts.iter().any(|e| e.exemplars_file.is_some());
    let mut experts = Vec::with_capacity(raw.experts.len());
    for (i, agent) in raw.experts.into_iter().enumerate() {
        experts.push(resolve_agent(
            &preset_path,
            &preset_dir,
            agent,
            AgentPosition::Expert((i + 1) as u32),
            few_shot,
        )?);
    }
    let summarizer =
        resolve_agent(&preset_path, &preset_dir, raw.summarizer, AgentPosition::Summarizer, false)?;

    let config = TeamConfig {
        system_template,
        expert_user_template,
        summarizer_user_template,
        experts,
        summarizer,
        turns: raw.turns,
        decoding: DecodingParams {
            temperature: raw.decoding.temperature,
            max_tokens: raw.decoding.max_tokens,
            model_id: raw.decoding.model_id,
        },
        shared_questions: raw.shared_questions,
    };
    config.validate().map_err(|e| DataError::InvalidPreset {
        path: display(&preset_path),
        detail: e.to_string(),
    })?;
    let _ = raw.name; // the directory name is authoritative
    Ok(config)
}

fn resolve_agent(
    preset_path: &Path,
    preset_dir: &Path,
    raw: RawAgent,
    position: AgentPosition,
    require_reasoning: bool,
) -> Result<AgentSpec, DataError> {
    let persona_template = text_or_file(
        preset_path,
        preset_dir,
        &format!("persona for {}", raw.name),
        raw.persona,
        raw.persona_file,
    )?
    .ok_or_else(|| DataError::MissingField {
        path: display(preset_path),
        field: format!("persona (or persona_file) for agent {}", raw.name),
    })?;
    compile_checked(
        preset_path,
        &format!("persona for {}", raw.name),
        &persona_template,
        PERSONA_PLACEHOLDERS,
    )?;
    let exemplar_set = match raw.exemplars_file {
        Some(rel) => {
            let full = preset_dir.join(rel);
            Some(load_exemplar_file(&full, &raw.name, require_reasoning)?)
        }
        None => None,
    };
    Ok(AgentSpec { name: raw.name, persona_template, exemplar_set, position })
}

/// Preset names under `root`, i.e. subdirectories containing a `team.toml`.
pub fn available_presets(root: &Path) -> Vec<String> {
    let mut names = Vec::new();
    if let Ok(entries) = std::fs::read_dir(root) {
        for entry in entries.flatten() {
            let path = entry.path();
            if path.is_dir() && path.join("team.toml").is_file() {
                names.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
    }
    names.sort();
    names
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse {path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path} row {row}: {detail}")]
    Row { path: String, row: usize, detail: String },
    #[error("{path} contains no problems")]
    EmptyDataset { path: String },
    #[error("cannot parse {path}: {detail}")]
    Toml { path: String, detail: String },
    #[error("{path}: missing required field {field}")]
    MissingField { path: String, field: String },
    #[error("{path}: set either inline {field} or its _file variant, not both")]
    ConflictingFields { path: String, field: String },
    #[error("unknown preset {name:?}; available: {available:?}")]
    UnknownPreset { name: String, available: Vec<String> },
    #[error("{path}: invalid {what}: {source}")]
    Template { path: String, what: String, source: TemplateError },
    #[error("{path}: invalid team config: {detail}")]
    InvalidPreset { path: String, detail: String },
}
