//! Deterministic prompt rendering: team system text, per-expert prompts with
//! exemplar injection and discussion history, the summarizer prompt, and the
//! single-message baseline prompts.

use crate::domain::{
    AgentPosition, AgentSpec, ChatMessage, DomainError, ExemplarSet, Problem, TeamConfig,
};
use crate::template::{Template, TemplateError};
use thiserror::Error;

/// Placeholders available to team system templates.
pub const SYSTEM_PLACEHOLDERS: &[&str] = &["question", "choices", "roles"];
/// Placeholders available to expert user-message templates.
pub const EXPERT_USER_PLACEHOLDERS: &[&str] = &["exemplars", "question", "choices", "history"];
/// Placeholders available to the summarizer user-message template.
pub const SUMMARIZER_USER_PLACEHOLDERS: &[&str] = &["question", "choices", "history"];
/// Placeholders available to persona templates.
pub const PERSONA_PLACEHOLDERS: &[&str] = &["name"];

pub const DEFAULT_EXPERT_USER_TEMPLATE: &str =
    "{exemplars}Q: {question}\n{choices}\n\n{history}Give your reasoning and your tentative answer.";

pub const DEFAULT_SUMMARIZER_USER_TEMPLATE: &str =
    "Q: {question}\n{choices}\n\n{history}";

/// Fixed closing instruction appended to every summarizer prompt so the final
/// answer is machine-extractable.
pub const SUMMARIZER_INSTRUCTION: &str = "Considering the discussion above, state the team's \
final answer in exactly one sentence of the form \"The answer is (X).\" where X is the letter \
of the chosen option.";

/// System message used by the single-message baseline prompts.
pub const BASELINE_SYSTEM_MESSAGE: &str = "You are a helpful assistant.";

/// Elicitation suffix for chain-of-thought baselines.
pub const STEP_BY_STEP: &str = "Let's think step by step.";

/// Everything a renderer needs to know about the state of one run.
#[derive(Debug, Clone, Default)]
pub struct TemplateContext {
    pub system_text: Option<String>,
    /// `(agent_name, completion)` pairs in transcript order.
    pub prior_outputs: Vec<(String, String)>,
    /// Pre-rendered exemplar block for the agent being prompted, if any.
    pub exemplar_block: Option<String>,
}

impl TemplateContext {
    pub fn new(system_text: impl Into<String>) -> Self {
        TemplateContext {
            system_text: Some(system_text.into()),
            prior_outputs: Vec::new(),
            exemplar_block: None,
        }
    }
}

/// How exemplar records and baseline prompts phrase the answer section.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineFormat {
    /// Question then the bare answer sentence.
    Standard,
    /// Question, a step-by-step elicitation, worked reasoning, then the answer sentence.
    Cot,
}

/// Renders a problem's choices as one "(A) text" line per option.
pub fn render_choice_lines(problem: &Problem) -> String {
    problem
        .choices
        .iter()
        .map(|c| format!("({}) {}", c.label, c.text))
        .collect::<Vec<_>>()
        .join("\n")
}

fn render_choice_lines_of(choices: &[crate::domain::Choice]) -> String {
    choices
        .iter()
        .map(|c| format!("({}) {}", c.label, c.text))
        .collect::<Vec<_>>()
        .join("\n")
}

/// The shared team-environment text (the system message body for every agent).
pub fn render_system(config: &TeamConfig, problem: &Problem) -> Result<String, RenderError> {
    config.validate()?;
    problem.validate()?;
    let roles = config
        .experts
        .iter()
        .map(|e| e.name.as_str())
        .chain(std::iter::once(config.summarizer.name.as_str()))
        .collect::<Vec<_>>()
        .join(", ");
    let template = Template::compile(&config.system_template, SYSTEM_PLACEHOLDERS)?;
    let text = template.render(&[
        ("question", problem.question.as_str()),
        ("choices", &render_choice_lines(problem)),
        ("roles", &roles),
    ])?;
    Ok(text)
}

/// Concatenates an exemplar set into "Q: ... A: ..." records, one per exemplar.
///
/// Every record ends with the canonical answer sentence "The answer is (L)."
/// so demonstrations teach the extractable output shape.
pub fn render_exemplar_block(
    set: &ExemplarSet,
    format: BaselineFormat,
) -> Result<String, RenderError> {
    if set.is_empty() {
        return Err(RenderError::EmptyExemplarSet { owner_role: set.owner_role.clone() });
    }
    let records = set
        .exemplars
        .iter()
        .map(|ex| {
            let answer_sentence = format!("The answer is ({}).", ex.answer);
            let answer_part = match format {
                BaselineFormat::Standard => answer_sentence,
                BaselineFormat::Cot => {
                    format!("{STEP_BY_STEP} {} {answer_sentence}", ex.reasoning.trim())
                }
            };
            format!(
                "Q: {}\n{}\nA: {}",
                ex.question,
                render_choice_lines_of(&ex.choices),
                answer_part
            )
        })
        .collect::<Vec<_>>();
    Ok(records.join("\n\n"))
}

/// Formats prior outputs as attributed history blocks; empty when none exist.
///
/// Non-empty history carries a trailing blank line so templates can place
/// `{history}` mid-text without dangling separators in the empty case.
pub fn render_history(prior_outputs: &[(String, String)]) -> String {
    if prior_outputs.is_empty() {
        return String::new();
    }
    let blocks = prior_outputs
        .iter()
        .map(|(author, text)| format!("{author} said:\n{text}"))
        .collect::<Vec<_>>()
        .join("\n\n");
    format!("{blocks}\n\n")
}

fn render_persona(agent: &AgentSpec) -> Result<String, RenderError> {
    let template = Template::compile(&agent.persona_template, PERSONA_PLACEHOLDERS)?;
    Ok(template.render(&[("name", agent.name.as_str())])?)
}

/// Renders the user-message body for an expert without any sequencing checks.
///
/// Shared by the team path (which formats real history) and the single-session
/// path (where history lives in the conversation instead of the prompt text).
pub fn render_expert_user_text(
    config: &TeamConfig,
    problem: &Problem,
    exemplar_block: Option<&str>,
    history_text: &str,
) -> Result<String, RenderError> {
    let exemplars = match exemplar_block {
        Some(block) if !block.is_empty() => format!("{block}\n\n"),
        _ => String::new(),
    };
    let template = Template::compile(&config.expert_user_template, EXPERT_USER_PLACEHOLDERS)?;
    Ok(template.render(&[
        ("exemplars", exemplars.as_str()),
        ("question", problem.question.as_str()),
        ("choices", &render_choice_lines(problem)),
        ("history", history_text),
    ])?)
}

/// Renders the user-message body for the summarizer, ending with the fixed
/// final-answer instruction.
pub fn render_summarizer_user_text(
    config: &TeamConfig,
    problem: &Problem,
    history_text: &str,
) -> Result<String, RenderError> {
    let template =
        Template::compile(&config.summarizer_user_template, SUMMARIZER_USER_PLACEHOLDERS)?;
    let body = template.render(&[
        ("question", problem.question.as_str()),
        ("choices", &render_choice_lines(problem)),
        ("history", history_text),
    ])?;
    if body.is_empty() || body.ends_with('\n') {
        Ok(format!("{body}{SUMMARIZER_INSTRUCTION}"))
    } else {
        Ok(format!("{body}\n\n{SUMMARIZER_INSTRUCTION}"))
    }
}

fn agent_system_message(
    system_text: &str,
    agent: &AgentSpec,
) -> Result<ChatMessage, RenderError> {
    let persona = render_persona(agent)?;
    Ok(ChatMessage::system(format!("{system_text}\n\n{persona}")))
}

/// The full two-message prompt for one expert at one point in the discussion.
///
/// The system message combines the team environment with the expert's persona;
/// the user message carries exemplars (if any), the problem, and every prior
/// output attributed as "{author} said:".
pub fn render_expert_prompt(
    config: &TeamConfig,
    agent: &AgentSpec,
    problem: &Problem,
    ctx: &TemplateContext,
) -> Result<Vec<ChatMessage>, RenderError> {
    let system_text =
        ctx.system_text.as_deref().ok_or(RenderError::MissingSystemText)?;
    let index = match agent.position {
        AgentPosition::Expert(i) => i as usize,
        AgentPosition::Summarizer => {
            return Err(RenderError::WrongPosition {
                agent: agent.name.clone(),
                expected: "expert".into(),
            });
        }
    };
    let k = config.expert_count();
    let turns = config.turns as usize;
    let n = ctx.prior_outputs.len();
    // Expert i speaking in round t has seen exactly (t-1)*k + (i-1) outputs.
    let valid = (1..=turns).any(|t| n == (t - 1) * k + (index - 1));
    if !valid {
        return Err(RenderError::OutOfSequence {
            agent: agent.name.clone(),
            prior_outputs: n,
            experts: k,
            turns: config.turns,
        });
    }
    let history = render_history(&ctx.prior_outputs);
    let user = render_expert_user_text(config, problem, ctx.exemplar_block.as_deref(), &history)?;
    Ok(vec![agent_system_message(system_text, agent)?, ChatMessage::user(user)])
}

/// The full two-message prompt for the summarizer after all discussion rounds.
pub fn render_summarizer_prompt(
    config: &TeamConfig,
    agent: &AgentSpec,
    problem: &Problem,
    ctx: &TemplateContext,
) -> Result<Vec<ChatMessage>, RenderError> {
    let system_text =
        ctx.system_text.as_deref().ok_or(RenderError::MissingSystemText)?;
    if agent.position != AgentPosition::Summarizer {
        return Err(RenderError::WrongPosition {
            agent: agent.name.clone(),
            expected: "summarizer".into(),
        });
    }
    let expected = config.expert_count() * config.turns as usize;
    let n = ctx.prior_outputs.len();
    if n != expected || n == 0 {
        return Err(RenderError::OutOfSequence {
            agent: agent.name.clone(),
            prior_outputs: n,
            experts: config.expert_count(),
            turns: config.turns,
        });
    }
    let history = render_history(&ctx.prior_outputs);
    let user = render_summarizer_user_text(config, problem, &history)?;
    Ok(vec![agent_system_message(system_text, agent)?, ChatMessage::user(user)])
}

/// Which single-message baseline to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineMethod {
    Standard,
    Cot,
}

impl BaselineMethod {
    pub fn format(self) -> BaselineFormat {
        match self {
            BaselineMethod::Standard => BaselineFormat::Standard,
            BaselineMethod::Cot => BaselineFormat::Cot,
        }
    }
}

/// Builds a baseline prompt: one fixed system message plus exactly one user
/// message in the interleaved "Q: ... A: ..." shape.
pub fn build_baseline_prompt(
    problem: &Problem,
    method: BaselineMethod,
    shots: &ExemplarSet,
) -> Result<Vec<ChatMessage>, RenderError> {
    problem.validate()?;
    let query_suffix = match method {
        BaselineMethod::Standard => "A:".to_string(),
        BaselineMethod::Cot => format!("A: {STEP_BY_STEP}"),
    };
    let query = format!(
        "Q: {}\n{}\n{}",
        problem.question,
        render_choice_lines(problem),
        query_suffix
    );
    let user = if shots.is_empty() {
        query
    } else {
        let block = render_exemplar_block(shots, method.format())?;
        format!("{block}\n\n{query}")
    };
    Ok(vec![ChatMessage::system(BASELINE_SYSTEM_MESSAGE), ChatMessage::user(user)])
}

#[derive(Debug, Error)]
pub enum RenderError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("context has no system text; render the team environment first")]
    MissingSystemText,
    #[error("agent {agent} is not positioned as a {expected}")]
    WrongPosition { agent: String, expected: String },
    #[error("agent {agent} cannot speak after {prior_outputs} prior outputs in a {experts}-expert, {turns}-turn schedule")]
    OutOfSequence { agent: String, prior_outputs: usize, experts: usize, turns: u32 },
    #[error("exemplar set for {owner_role} is empty; zero-shot prompts omit the block entirely")]
    EmptyExemplarSet { owner_role: String },
}
