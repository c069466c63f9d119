//! Placeholder templating for prompt files: `{name}` slots, `{{`/`}}` escapes.

use thiserror::Error;

/// A parsed template whose placeholders were checked against an allowed set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    segments: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Literal(String),
    Placeholder(String),
}

impl Template {
    /// Parses `source`, rejecting any placeholder not in `allowed`.
    ///
    /// `{{` and `}}` escape literal braces. Unknown placeholders fail here,
    /// at load time, rather than when the template is first rendered.
    pub fn compile(source: &str, allowed: &[&str]) -> Result<Self, TemplateError> {
        let mut segments = Vec::new();
        let mut literal = String::new();
        let mut chars = source.char_indices().peekable();
        while let Some((pos, c)) = chars.next() {
            match c {
                '{' => {
                    if chars.peek().map(|&(_, c)| c) == Some('{') {
                        chars.next();
                        literal.push('{');
                        continue;
                    }
                    let mut name = String::new();
                    let mut closed = false;
                    for (_, nc) in chars.by_ref() {
                        if nc == '}' {
                            closed = true;
                            break;
                        }
                        name.push(nc);
                    }
                    if !closed {
                        return Err(TemplateError::UnclosedPlaceholder { position: pos });
                    }
                    if name.is_empty()
                        || !name.chars().all(|c| c.is_ascii_lowercase() || c == '_')
                    {
                        return Err(TemplateError::MalformedPlaceholder { name, position: pos });
                    }
                    if !allowed.contains(&name.as_str()) {
                        return Err(TemplateError::UnknownPlaceholder {
                            name,
                            allowed: allowed.iter().map(|s| s.to_string()).collect(),
                        });
                    }
                    if !literal.is_empty() {
                        segments.push(Segment::Literal(std::mem::take(&mut literal)));
                    }
                    segments.push(Segment::Placeholder(name));
                }
                '}' => {
                    if chars.peek().map(|&(_, c)| c) == Some('}') {
                        chars.next();
                        literal.push('}');
                    } else {
                        return Err(TemplateError::StrayBrace { position: pos });
                    }
                }
                other => literal.push(other),
            }
        }
        if !literal.is_empty() {
            segments.push(Segment::Literal(literal));
        }
        Ok(Template { segments })
    }

    /// Substitutes placeholder values; every referenced placeholder must be present.
    pub fn render(&self, values: &[(&str, &str)]) -> Result<String, TemplateError> {
        let mut out = String::new();
        for segment in &self.segments {
            match segment {
                Segment::Literal(text) => out.push_str(text),
                Segment::Placeholder(name) => {
                    let value = values
                        .iter()
                        .find(|(k, _)| k == name)
                        .map(|(_, v)| *v)
                        .ok_or_else(|| TemplateError::MissingValue { name: name.clone() })?;
                    out.push_str(value);
                }
            }
        }
        Ok(out)
    }

    /// The distinct placeholder names this template references, in first-use order.
    pub fn placeholders(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for segment in &self.segments {
            if let Segment::Placeholder(name) = segment {
                if !seen.contains(&name.as_str()) {
                    seen.push(name.as_str());
                }
            }
        }
        seen
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("unknown placeholder {{{name}}}; allowed here: {allowed:?}")]
    UnknownPlaceholder { name: String, allowed: Vec<String> },
    #[error("malformed placeholder {{{name}}} at byte {position}: names are lowercase words")]
    MalformedPlaceholder { name: String, position: usize },
    #[error("unclosed '{{' at byte {position} (use '{{{{' for a literal brace)")]
    UnclosedPlaceholder { position: usize },
    #[error("stray '}}' at byte {position} (use '}}}}' for a literal brace)")]
    StrayBrace { position: usize },
    #[error("no value supplied for placeholder {{{name}}}")]
    MissingValue { name: String },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_placeholders_in_order() {
        let t = Template::compile("Q: {question}\n{choices}", &["question", "choices"]).unwrap();
        let out = t.render(&[("question", "why?"), ("choices", "(A) x")]).unwrap();
        assert_eq!(out, "Q: why?\n(A) x");
        assert_eq!(t.placeholders(), vec!["question", "choices"]);
    }

    #[test]
    fn unknown_placeholder_fails_at_compile_time() {
        let err = Template::compile("{question} {bogus}", &["question"]).unwrap_err();
        assert_eq!(
            err,
            TemplateError::UnknownPlaceholder {
                name: "bogus".into(),
                allowed: vec!["question".into()],
            }
        );
    }

    #[test]
    fn doubled_braces_escape_literals() {
        let t = Template::compile("set {{x}} to {value}", &["value"]).unwrap();
        assert_eq!(t.render(&[("value", "3")]).unwrap(), "set {x} to 3");
    }

    #[test]
    fn stray_and_unclosed_braces_are_errors() {
        assert!(matches!(
            Template::compile("oops }", &[]),
            Err(TemplateError::StrayBrace { .. })
        ));
        assert!(matches!(
            Template::compile("oops {question", &["question"]),
            Err(TemplateError::UnclosedPlaceholder { .. })
        ));
        assert!(matches!(
            Template::compile("{Question}", &["question"]),
            Err(TemplateError::MalformedPlaceholder { .. })
        ));
    }

    #[test]
    fn missing_value_is_a_render_error_naming_the_placeholder() {
        let t = Template::compile("{question}", &["question"]).unwrap();
        assert_eq!(
            t.render(&[]).unwrap_err(),
            TemplateError::MissingValue { name: "question".into() }
        );
    }
}
