//! Deterministic extraction of a choice label from free-form completion text.

use crate::domain::Label;
use serde::Deserialize;
use std::path::Path;
use std::sync::OnceLock;
use thiserror::Error;

/// The extraction rules in priority order. Within each rule the *last*
/// occurrence wins (discussions revise earlier tentative answers), and any
/// matched label outside the universe is skipped with the search continuing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    /// "The answer is (L)" — the canonical sentence.
    CanonicalSentence,
    /// "answer is L" or "answer: L", case-insensitive.
    AnswerPhrase,
    /// A standalone parenthesized label "(L)".
    ParenthesizedLabel,
    /// A standalone capital letter bounded by non-alphanumerics.
    StandaloneLetter,
}

pub const DEFAULT_RULES: [Rule; 4] = [
    Rule::CanonicalSentence,
    Rule::AnswerPhrase,
    Rule::ParenthesizedLabel,
    Rule::StandaloneLetter,
];

/// Rule list plus the label universe for one problem.
#[derive(Debug, Clone)]
pub struct ExtractionRules {
    pub rules: Vec<Rule>,
    pub label_universe: Vec<Label>,
}

impl ExtractionRules {
    pub fn for_labels(labels: &[Label]) -> Self {
        ExtractionRules { rules: DEFAULT_RULES.to_vec(), label_universe: labels.to_vec() }
    }

    /// Applies the rules in order; total over arbitrary text.
    pub fn extract(&self, text: &str) -> Option<Label> {
        for rule in &self.rules {
            let candidates = match rule {
                Rule::CanonicalSentence => canonical_sentence_labels(text),
                Rule::AnswerPhrase => answer_phrase_labels(text),
                Rule::ParenthesizedLabel => parenthesized_labels(text),
                Rule::StandaloneLetter => standalone_letters(text),
            };
            // Last occurrence first; skip labels outside the universe.
            for c in candidates.into_iter().rev() {
                if let Ok(label) = Label::new(c) {
                    if self.label_universe.contains(&label) {
                        return Some(label);
                    }
                }
            }
        }
        None
    }
}

/// Extracts a choice label from `text`, restricted to `labels`.
pub fn extract_choice(text: &str, labels: &[Label]) -> Option<Label> {
    ExtractionRules::for_labels(labels).extract(text)
}

fn canonical_regex() -> &'static regex::Regex {
    static RE: OnceLock<regex::Regex> = OnceLock::new();
    RE.get_or_init(|| {
        regex::Regex::new(r"(?i)\bthe\s+answer\s+is\s*\(([a-z])\)").expect("valid regex")
    })
}

fn answer_phrase_regex() -> &'static regex::Regex {
    static RE: OnceLock<regex::Regex> = OnceLock::new();
    RE.get_or_init(|| {
        regex::Regex::new(r"(?i)\banswer\s*(?:is|:)\s*\(?([a-z])\b").expect("valid regex")
    })
}

fn canonical_sentence_labels(text: &str) -> Vec<char> {
    canonical_regex()
        .captures_iter(text)
        .filter_map(|c| c.get(1))
        .map(|m| m.as_str().chars().next().unwrap().to_ascii_uppercase())
        .collect()
}

fn answer_phrase_labels(text: &str) -> Vec<char> {
    answer_phrase_regex()
        .captures_iter(text)
        .filter_map(|c| c.get(1))
        .map(|m| m.as_str().chars().next().unwrap().to_ascii_uppercase())
        .collect()
}

/// Finds "(L)" with an uppercase letter; scanned by hand so adjacent matches
/// like "(A)(B)" are all seen.
fn parenthesized_labels(text: &str) -> Vec<char> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    for i in 0..bytes.len().saturating_sub(2) {
        if bytes[i] == b'('
            && bytes[i + 1].is_ascii_uppercase()
            && bytes[i + 2] == b')'
        {
            out.push(bytes[i + 1] as char);
        }
    }
    out
}

/// Finds single capital letters whose neighbors are absent or non-alphanumeric.
fn standalone_letters(text: &str) -> Vec<char> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    for (i, &b) in bytes.iter().enumerate() {
        if !b.is_ascii_uppercase() {
            continue;
        }
        let prev_ok = i == 0 || !bytes[i - 1].is_ascii_alphanumeric();
        let next_ok = i + 1 >= bytes.len() || !bytes[i + 1].is_ascii_alphanumeric();
        if prev_ok && next_ok {
            out.push(b as char);
        }
    }
    out
}

/// One hand-labeled extraction case: text, the label universe, and the
/// expected result (absent means "no label extractable").
#[derive(Debug, Clone, Deserialize)]
pub struct CorpusCase {
    pub text: String,
    /// Universe as a compact string, e.g. "ABCD".
    pub labels: String,
    #[serde(default)]
    pub expected: Option<String>,
}

impl CorpusCase {
    pub fn label_universe(&self) -> Result<Vec<Label>, CorpusError> {
        self.labels
            .chars()
            .map(|c| Label::new(c).map_err(|_| CorpusError::BadLabel { labels: self.labels.clone() }))
            .collect()
    }

    pub fn expected_label(&self) -> Result<Option<Label>, CorpusError> {
        match &self.expected {
            None => Ok(None),
            Some(s) => {
                let mut chars = s.chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) => Label::new(c)
                        .map(Some)
                        .map_err(|_| CorpusError::BadLabel { labels: s.clone() }),
                    _ => Err(CorpusError::BadLabel { labels: s.clone() }),
                }
            }
        }
    }
}

/// Loads a JSON-lines corpus of hand-labeled extraction cases.
pub fn load_corpus(path: &Path) -> Result<Vec<CorpusCase>, CorpusError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|source| CorpusError::Io { path: path.display().to_string(), source })?;
    let mut cases = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let case: CorpusCase = serde_json::from_str(trimmed)
            .map_err(|source| CorpusError::Parse { line: i + 1, source })?;
        cases.push(case);
    }
    Ok(cases)
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("corpus line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error("corpus labels {labels:?} must be uppercase letters")]
    BadLabel { labels: String },
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abcd() -> Vec<Label> {
        "ABCD".chars().map(|c| Label::new(c).unwrap()).collect()
    }

    #[test]
    fn canonical_sentence_wins() {
        assert_eq!(
            extract_choice("Lots of talk... The answer is (C).", &abcd()),
            Some(Label::new('C').unwrap())
        );
    }

    #[test]
    fn last_occurrence_overrides_earlier_answers() {
        assert_eq!(
            extract_choice("Maybe (A)... but finally the answer is (B).", &abcd()),
            Some(Label::new('B').unwrap())
        );
        assert_eq!(
            extract_choice(
                "The answer is (A). Wait, reconsidering: The answer is (D).",
                &abcd()
            ),
            Some(Label::new('D').unwrap())
        );
    }

    #[test]
    fn out_of_universe_labels_are_skipped_and_search_continues() {
        assert_eq!(extract_choice("The answer is (E).", &abcd()), None);
        // E is skipped; the earlier in-universe canonical match still wins.
        assert_eq!(
            extract_choice("The answer is (B). Or rather, the answer is (E).", &abcd()),
            Some(Label::new('B').unwrap())
        );
    }

    #[test]
    fn phrase_rule_handles_colon_and_case() {
        assert_eq!(
            extract_choice("final ANSWER: c", &abcd()),
            Some(Label::new('C').unwrap())
        );
        assert_eq!(
            extract_choice("I think the answer is b", &abcd()),
            Some(Label::new('B').unwrap())
        );
        // A word starting after "answer is" is not a label.
        assert_eq!(extract_choice("the answer is unclear", &abcd()), None);
    }

    #[test]
    fn parenthesized_and_standalone_fallbacks() {
        assert_eq!(
            extract_choice("Option (B) fits best.", &abcd()),
            Some(Label::new('B').unwrap())
        );
        assert_eq!(extract_choice("I'd go with D.", &abcd()), Some(Label::new('D').unwrap()));
        assert_eq!(extract_choice("(A)(C)", &abcd()), Some(Label::new('C').unwrap()));
    }

    #[test]
    fn total_over_arbitrary_text() {
        assert_eq!(extract_choice("", &abcd()), None);
        assert_eq!(extract_choice("no labels here at all", &abcd()), None);
        assert_eq!(extract_choice("🚀 🚀 🚀", &abcd()), None);
        assert_eq!(extract_choice("answer is", &abcd()), None);
    }

    #[test]
    fn rule_priority_beats_position() {
        // A standalone "D" occurs after the phrase match, but the phrase rule
        // has higher priority.
        assert_eq!(
            extract_choice("answer is B ... trailing mark D", &abcd()),
            Some(Label::new('B').unwrap())
        );
    }
}
