//! Core data types shared by every other module. No I/O, no backend knowledge.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use thiserror::Error;

/// A single uppercase choice label (A, B, C, ...).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label(char);

impl Label {
    pub fn new(c: char) -> Result<Self, DomainError> {
        if c.is_ascii_uppercase() {
            Ok(Label(c))
        } else {
            Err(DomainError::InvalidLabel(c))
        }
    }

    /// Label for a 0-based choice position: 0 -> A, 1 -> B, ...
    pub fn from_index(index: usize) -> Result<Self, DomainError> {
        if index < 26 {
            Ok(Label((b'A' + index as u8) as char))
        } else {
            Err(DomainError::TooManyChoices(index + 1))
        }
    }

    pub fn as_char(&self) -> char {
        self.0
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_char(self.0)
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        let mut chars = raw.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => Label::new(c).map_err(serde::de::Error::custom),
            _ => Err(serde::de::Error::custom(format!(
                "expected a single uppercase letter, got {raw:?}"
            ))),
        }
    }
}

/// One answer option: a label plus its text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Choice {
    pub label: Label,
    pub text: String,
}

/// One multiple-choice question with labeled options and a gold label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Problem {
    pub id: String,
    pub question: String,
    pub choices: Vec<Choice>,
    pub gold: Label,
}

impl Problem {
    /// Build a problem from option texts; labels are assigned A, B, C, ... in order.
    pub fn new(
        id: impl Into<String>,
        question: impl Into<String>,
        option_texts: Vec<String>,
        gold: Label,
    ) -> Result<Self, DomainError> {
        let choices = option_texts
            .into_iter()
            .enumerate()
            .map(|(i, text)| Ok(Choice { label: Label::from_index(i)?, text }))
            .collect::<Result<Vec<_>, DomainError>>()?;
        let problem = Problem { id: id.into(), question: question.into(), choices, gold };
        problem.validate()?;
        Ok(problem)
    }

    pub fn labels(&self) -> Vec<Label> {
        self.choices.iter().map(|c| c.label).collect()
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        if self.question.trim().is_empty() {
            return Err(DomainError::EmptyQuestion { problem_id: self.id.clone() });
        }
        if self.choices.len() < 2 {
            return Err(DomainError::TooFewChoices {
                problem_id: self.id.clone(),
                count: self.choices.len(),
            });
        }
        for (i, choice) in self.choices.iter().enumerate() {
            let expected = Label::from_index(i)?;
            if choice.label != expected {
                return Err(DomainError::NonContiguousLabels {
                    problem_id: self.id.clone(),
                    position: i,
                    found: choice.label,
                    expected,
                });
            }
        }
        if !self.choices.iter().any(|c| c.label == self.gold) {
            return Err(DomainError::GoldNotAmongChoices {
                problem_id: self.id.clone(),
                gold: self.gold,
            });
        }
        Ok(())
    }
}

/// One few-shot demonstration: a question with a role-specific reasoning path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub question: String,
    pub choices: Vec<Choice>,
    pub reasoning: String,
    pub answer: Label,
}

impl Exemplar {
    pub fn validate(&self) -> Result<(), DomainError> {
        if !self.choices.iter().any(|c| c.label == self.answer) {
            return Err(DomainError::ExemplarAnswerNotAmongChoices { answer: self.answer });
        }
        for (i, choice) in self.choices.iter().enumerate() {
            let expected = Label::from_index(i)?;
            if choice.label != expected {
                return Err(DomainError::NonContiguousLabels {
                    problem_id: format!("exemplar {:.40}", self.question),
                    position: i,
                    found: choice.label,
                    expected,
                });
            }
        }
        Ok(())
    }
}

/// Per-agent few-shot demonstrations, in prompt order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExemplarSet {
    pub owner_role: String,
    pub exemplars: Vec<Exemplar>,
}

impl ExemplarSet {
    pub fn is_empty(&self) -> bool {
        self.exemplars.is_empty()
    }

    pub fn validate(&self, few_shot: bool) -> Result<(), DomainError> {
        for exemplar in &self.exemplars {
            exemplar.validate()?;
            if few_shot && exemplar.reasoning.trim().is_empty() {
                return Err(DomainError::MissingReasoning { owner_role: self.owner_role.clone() });
            }
        }
        Ok(())
    }
}

/// Where an agent sits in the team: contributing expert or final summarizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentPosition {
    /// 1-based position among the experts.
    Expert(u32),
    Summarizer,
}

/// One role-played team member: persona text plus optional demonstrations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub name: String,
    /// Persona text template; rendered into the agent's system message.
    pub persona_template: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exemplar_set: Option<ExemplarSet>,
    pub position: AgentPosition,
}

impl AgentSpec {
    pub fn has_exemplars(&self) -> bool {
        self.exemplar_set.as_ref().is_some_and(|s| !s.is_empty())
    }
}

/// Decoding parameters passed through to the chat backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodingParams {
    #[serde(default)]
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
    pub model_id: String,
}

impl DecodingParams {
    pub fn greedy(model_id: impl Into<String>) -> Self {
        DecodingParams { temperature: 0.0, max_tokens: None, model_id: model_id.into() }
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        if self.temperature < 0.0 || !self.temperature.is_finite() {
            return Err(DomainError::InvalidTemperature(self.temperature));
        }
        Ok(())
    }
}

/// Full specification of an agent team.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamConfig {
    /// Template for the shared system message that sets up the team environment.
    pub system_template: String,
    /// Template for expert user messages (exemplars, problem, discussion history).
    #[serde(default = "default_expert_user_template")]
    pub expert_user_template: String,
    /// Template for the summarizer user message (problem and discussion history).
    #[serde(default = "default_summarizer_user_template")]
    pub summarizer_user_template: String,
    pub experts: Vec<AgentSpec>,
    pub summarizer: AgentSpec,
    pub turns: u32,
    pub decoding: DecodingParams,
    /// Whether expert exemplar sets must cover identical questions.
    #[serde(default)]
    pub shared_questions: bool,
}

fn default_expert_user_template() -> String {
    crate::prompt::DEFAULT_EXPERT_USER_TEMPLATE.to_string()
}

fn default_summarizer_user_template() -> String {
    crate::prompt::DEFAULT_SUMMARIZER_USER_TEMPLATE.to_string()
}

impl TeamConfig {
    pub fn expert_count(&self) -> usize {
        self.experts.len()
    }

    /// Few-shot mode means at least one expert carries demonstrations.
    pub fn is_few_shot(&self) -> bool {
        self.experts.iter().any(|e| e.has_exemplars())
    }

    /// Expected transcript length: experts each turn, then one summarizer call.
    pub fn expected_turn_count(&self) -> usize {
        self.expert_count() * self.turns as usize + 1
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        if self.experts.is_empty() {
            return Err(DomainError::NoExperts);
        }
        if self.turns == 0 {
            return Err(DomainError::ZeroTurns);
        }
        self.decoding.validate()?;
        for (i, expert) in self.experts.iter().enumerate() {
            match expert.position {
                AgentPosition::Expert(index) if index as usize == i + 1 => {}
                AgentPosition::Expert(index) => {
                    return Err(DomainError::BadExpertIndex {
                        name: expert.name.clone(),
                        found: index,
                        expected: (i + 1) as u32,
                    });
                }
                AgentPosition::Summarizer => {
                    return Err(DomainError::ExtraSummarizer { name: expert.name.clone() });
                }
            }
        }
        if self.summarizer.position != AgentPosition::Summarizer {
            return Err(DomainError::SummarizerMisplaced { name: self.summarizer.name.clone() });
        }
        if self.summarizer.has_exemplars() {
            return Err(DomainError::SummarizerWithExemplars {
                name: self.summarizer.name.clone(),
            });
        }
        let few_shot = self.is_few_shot();
        for expert in &self.experts {
            if let Some(set) = &expert.exemplar_set {
                set.validate(few_shot)?;
            }
        }
        if few_shot {
            let lengths: Vec<usize> = self
                .experts
                .iter()
                .map(|e| e.exemplar_set.as_ref().map_or(0, |s| s.exemplars.len()))
                .collect();
            if lengths.windows(2).any(|w| w[0] != w[1]) {
                return Err(DomainError::ExemplarLengthMismatch { lengths });
            }
            if self.shared_questions {
                let first = &self.experts[0];
                let reference: Vec<&str> = first
                    .exemplar_set
                    .as_ref()
                    .map(|s| s.exemplars.iter().map(|e| e.question.as_str()).collect())
                    .unwrap_or_default();
                for expert in &self.experts[1..] {
                    let questions: Vec<&str> = expert
                        .exemplar_set
                        .as_ref()
                        .map(|s| s.exemplars.iter().map(|e| e.question.as_str()).collect())
                        .unwrap_or_default();
                    if questions != reference {
                        return Err(DomainError::SharedQuestionMismatch {
                            first: first.name.clone(),
                            second: expert.name.clone(),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Deterministic, content-addressed digest of a team configuration.
///
/// Equal configs yield equal digests; any field change yields a different digest.
pub fn fingerprint(config: &TeamConfig) -> String {
    let bytes = serde_json::to_vec(config).expect("team config serializes");
    let digest = Sha256::digest(&bytes);
    hex::encode(digest)
}

/// Who authored a chat message, as the wire protocol sees it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

/// One message in a chat conversation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    /// Agent name for attribution in transcripts; not sent over the wire.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author: Option<String>,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::System, author: None, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::User, author: None, content: content.into() }
    }

    pub fn assistant(author: impl Into<String>, content: impl Into<String>) -> Self {
        ChatMessage { role: Role::Assistant, author: Some(author.into()), content: content.into() }
    }
}

/// One agent invocation: the rendered prompt and the raw completion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentTurn {
    pub agent_name: String,
    /// Discussion round, 1-based; the summarizer turn is numbered `turns + 1`.
    pub turn_index: u32,
    pub prompt: Vec<ChatMessage>,
    pub completion: String,
}

impl AgentTurn {
    pub fn validate(&self) -> Result<(), DomainError> {
        let system_count = self.prompt.iter().filter(|m| m.role == Role::System).count();
        if self.prompt.first().map(|m| m.role) != Some(Role::System) || system_count != 1 {
            return Err(DomainError::BadPromptShape { agent: self.agent_name.clone() });
        }
        Ok(())
    }
}

/// The extracted final answer and whether it matches the gold label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub extracted: Option<Label>,
    pub correct: bool,
    /// Raw summarizer output the answer was extracted from.
    pub raw_final: String,
}

/// Ordered record of every agent invocation for one problem, plus the verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub problem_id: String,
    pub team_fingerprint: String,
    pub turns: Vec<AgentTurn>,
    pub verdict: Verdict,
}

impl Transcript {
    /// Checks the transcript length law `k*T + 1` and per-turn prompt shape.
    pub fn validate_against(&self, config: &TeamConfig) -> Result<(), DomainError> {
        let expected = config.expected_turn_count();
        if self.turns.len() != expected {
            return Err(DomainError::BadTranscriptLength {
                expected,
                found: self.turns.len(),
            });
        }
        for turn in &self.turns {
            turn.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("choice labels must be uppercase letters, got {0:?}")]
    InvalidLabel(char),
    #[error("too many choices: {0} exceeds the A-Z label range")]
    TooManyChoices(usize),
    #[error("problem {problem_id}: question text is empty")]
    EmptyQuestion { problem_id: String },
    #[error("problem {problem_id}: needs at least 2 choices, got {count}")]
    TooFewChoices { problem_id: String, count: usize },
    #[error("problem {problem_id}: label {found} at position {position} breaks the contiguous A.. prefix (expected {expected})")]
    NonContiguousLabels { problem_id: String, position: usize, found: Label, expected: Label },
    #[error("problem {problem_id}: gold label {gold} is not among the choices")]
    GoldNotAmongChoices { problem_id: String, gold: Label },
    #[error("exemplar answer {answer} is not among its choices")]
    ExemplarAnswerNotAmongChoices { answer: Label },
    #[error("exemplar set for {owner_role}: reasoning text is required in few-shot mode")]
    MissingReasoning { owner_role: String },
    #[error("team has no experts")]
    NoExperts,
    #[error("turns must be >= 1")]
    ZeroTurns,
    #[error("temperature must be finite and >= 0, got {0}")]
    InvalidTemperature(f64),
    #[error("expert {name} has index {found}, expected {expected} (indices must be 1..k with no gaps)")]
    BadExpertIndex { name: String, found: u32, expected: u32 },
    #[error("agent {name} in the expert list is positioned as a summarizer; exactly one summarizer is allowed")]
    ExtraSummarizer { name: String },
    #[error("summarizer {name} does not have the summarizer position")]
    SummarizerMisplaced { name: String },
    #[error("summarizer {name} must not carry exemplars")]
    SummarizerWithExemplars { name: String },
    #[error("expert exemplar sets differ in length: {lengths:?}")]
    ExemplarLengthMismatch { lengths: Vec<usize> },
    #[error("shared_questions is set but {first} and {second} cover different exemplar questions")]
    SharedQuestionMismatch { first: String, second: String },
    #[error("agent {agent}: prompt must begin with exactly one system message")]
    BadPromptShape { agent: String },
    #[error("transcript has {found} turns, expected k*T + 1 = {expected}")]
    BadTranscriptLength { expected: usize, found: usize },
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{exemplar, problem_abcd, team_config};

    #[test]
    fn problem_labels_are_contiguous() {
        let p = problem_abcd("t:0", 'B');
        assert_eq!(
            p.labels().iter().map(Label::as_char).collect::<Vec<_>>(),
            vec!['A', 'B', 'C', 'D']
        );
    }

    #[test]
    fn problem_rejects_gold_outside_choices() {
        let err = Problem::new(
            "t:0",
            "q?",
            vec!["a".into(), "b".into()],
            Label::new('E').unwrap(),
        )
        .unwrap_err();
        assert!(matches!(err, DomainError::GoldNotAmongChoices { .. }));
    }

    #[test]
    fn problem_rejects_single_choice_and_empty_question() {
        let err =
            Problem::new("t:0", "q?", vec!["only".into()], Label::new('A').unwrap()).unwrap_err();
        assert!(matches!(err, DomainError::TooFewChoices { .. }));

        let err =
            Problem::new("t:1", "  ", vec!["a".into(), "b".into()], Label::new('A').unwrap())
                .unwrap_err();
        assert!(matches!(err, DomainError::EmptyQuestion { .. }));
    }

    #[test]
    fn problem_rejects_duplicate_labels() {
        let mut p = problem_abcd("t:0", 'A');
        p.choices[1].label = Label::new('A').unwrap();
        assert!(matches!(p.validate(), Err(DomainError::NonContiguousLabels { .. })));
    }

    #[test]
    fn team_validation_rejects_structural_errors() {
        let mut config = team_config(2, 1, false);
        config.experts.clear();
        assert!(matches!(config.validate(), Err(DomainError::NoExperts)));

        let mut config = team_config(2, 1, false);
        config.turns = 0;
        assert!(matches!(config.validate(), Err(DomainError::ZeroTurns)));

        let mut config = team_config(2, 1, false);
        config.experts[1].position = AgentPosition::Summarizer;
        assert!(matches!(config.validate(), Err(DomainError::ExtraSummarizer { .. })));

        let mut config = team_config(2, 1, false);
        config.summarizer.exemplar_set = Some(ExemplarSet {
            owner_role: "summarizer".into(),
            exemplars: vec![exemplar("q", "r1", 'A')],
        });
        assert!(matches!(config.validate(), Err(DomainError::SummarizerWithExemplars { .. })));
    }

    #[test]
    fn team_validation_rejects_mismatched_exemplar_sets() {
        let mut config = team_config(2, 1, true);
        config.experts[0]
            .exemplar_set
            .as_mut()
            .unwrap()
            .exemplars
            .push(exemplar("extra", "r", 'A'));
        assert!(matches!(config.validate(), Err(DomainError::ExemplarLengthMismatch { .. })));

        let mut config = team_config(2, 1, true);
        config.shared_questions = true;
        config.experts[1].exemplar_set.as_mut().unwrap().exemplars[0].question =
            "different".into();
        assert!(matches!(config.validate(), Err(DomainError::SharedQuestionMismatch { .. })));
    }

    #[test]
    fn fingerprint_is_deterministic_and_content_sensitive() {
        let config = team_config(2, 1, false);
        assert_eq!(fingerprint(&config), fingerprint(&config.clone()));

        let mut two_turns = config.clone();
        two_turns.turns = 2;
        assert_ne!(fingerprint(&config), fingerprint(&two_turns));

        let mut renamed = config.clone();
        renamed.experts[0].name = "chemist".into();
        assert_ne!(fingerprint(&config), fingerprint(&renamed));
    }

    #[test]
    fn agent_turn_requires_leading_system_message() {
        let turn = AgentTurn {
            agent_name: "physicist".into(),
            turn_index: 1,
            prompt: vec![ChatMessage::user("no system")],
            completion: "x".into(),
        };
        assert!(matches!(turn.validate(), Err(DomainError::BadPromptShape { .. })));
    }
}
