//! Discovery and integrity checks for on-disk team presets.

use crate::datasets::{available_presets, load_team_preset};
use crate::domain::TeamConfig;
use std::path::{Path, PathBuf};

/// Preset names this project ships in its `presets/` tree.
pub fn shipped_preset_names() -> [&'static str; 4] {
    [
        "college_physics_few",
        "college_physics_zero",
        "moral_scenarios_few",
        "moral_scenarios_zero",
    ]
}

/// Environment variable that overrides preset discovery.
pub const PRESETS_DIR_ENV: &str = "COMM_PRESETS_DIR";

/// Locates the presets directory: `COMM_PRESETS_DIR`, then `./presets`,
/// then the copy that ships next to this crate's workspace.
pub fn default_presets_dir() -> Option<PathBuf> {
    if let Ok(dir) = std::env::var(PRESETS_DIR_ENV) {
        if !dir.is_empty() {
            return Some(PathBuf::from(dir));
        }
    }
    let cwd = PathBuf::from("presets");
    if cwd.is_dir() {
        return Some(cwd);
    }
    let shipped = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets");
    if shipped.is_dir() {
        return Some(shipped);
    }
    None
}

/// A named, loaded preset.
#[derive(Debug, Clone)]
pub struct PresetBundle {
    pub name: String,
    pub config: TeamConfig,
}

/// One integrity problem found in a preset tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub preset: String,
    pub detail: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.preset, self.detail)
    }
}

/// Loads one preset by name.
pub fn load_bundle(root: &Path, name: &str) -> Result<PresetBundle, crate::datasets::DataError> {
    let config = load_team_preset(root, name)?;
    Ok(PresetBundle { name: name.to_string(), config })
}

/// Checks a single preset: it must load, validate, and — when few-shot —
/// give every expert the same questions but a genuinely distinct reasoning
/// path (no two experts share reasoning text, and no expert's reasoning
/// appears verbatim inside another's).
pub fn validate_bundle(root: &Path, name: &str) -> Vec<Violation> {
    let mut violations = Vec::new();
    let config = match load_team_preset(root, name) {
        Ok(config) => config,
        Err(e) => {
            violations.push(Violation { preset: name.to_string(), detail: e.to_string() });
            return violations;
        }
    };
    let mut push = |detail: String| {
        violations.push(Violation { preset: name.to_string(), detail });
    };
    if let Err(e) = config.validate() {
        push(e.to_string());
    }
    if name.ends_with("_zero") && config.is_few_shot() {
        push("preset named *_zero carries exemplars".into());
    }
    if name.ends_with("_few") && !config.is_few_shot() {
        push("preset named *_few has no exemplars".into());
    }
    if config.is_few_shot() {
        let sets: Vec<_> = config
            .experts
            .iter()
            .filter_map(|e| e.exemplar_set.as_ref().map(|s| (e.name.as_str(), s)))
            .collect();
        for (i, (name_a, set_a)) in sets.iter().enumerate() {
            for (name_b, set_b) in sets.iter().skip(i + 1) {
                for (k, (ex_a, ex_b)) in
                    set_a.exemplars.iter().zip(set_b.exemplars.iter()).enumerate()
                {
                    if ex_a.question != ex_b.question {
                        push(format!(
                            "experts {name_a} and {name_b} disagree on exemplar {k}'s question"
                        ));
                    }
                    if ex_a.reasoning == ex_b.reasoning {
                        push(format!(
                            "experts {name_a} and {name_b} share reasoning for exemplar {k}; \
                             each expert needs its own reasoning path"
                        ));
                    } else if ex_a.reasoning.contains(ex_b.reasoning.as_str())
                        || ex_b.reasoning.contains(ex_a.reasoning.as_str())
                    {
                        push(format!(
                            "exemplar {k}: one expert's reasoning contains the other's verbatim \
                             ({name_a} vs {name_b})"
                        ));
                    }
                }
            }
        }
        for (agent_name, set) in &sets {
            if set.exemplars.iter().any(|e| e.reasoning.trim().is_empty()) {
                push(format!("expert {agent_name} has an exemplar with empty reasoning"));
            }
        }
    }
    violations
}

/// Validates every preset under `root`; an empty result means all pass.
pub fn validate_all(root: &Path) -> Vec<Violation> {
    let names = available_presets(root);
    if names.is_empty() {
        return vec![Violation {
            preset: root.display().to_string(),
            detail: "no presets found (expected subdirectories containing team.toml)".into(),
        }];
    }
    names.iter().flat_map(|name| validate_bundle(root, name)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Exemplar;
    use crate::testutil::team_config;
    use std::fs;

    fn write_preset(root: &Path, name: &str, config: &TeamConfig) {
        // Round-trips a config through the on-disk TOML shape.
        let dir = root.join(name);
        fs::create_dir_all(&dir).unwrap();
        let mut out = String::new();
        out.push_str(&format!(
            "system_template = {:?}\nexpert_user_template = {:?}\nsummarizer_user_template = {:?}\nturns = {}\nshared_questions = {}\n\n",
            config.system_template,
            config.expert_user_template,
            config.summarizer_user_template,
            config.turns,
            config.shared_questions,
        ));
        out.push_str(&format!(
            "[decoding]\nmodel_id = {:?}\ntemperature = {}\nmax_tokens = {}\n\n",
            config.decoding.model_id,
            config.decoding.temperature,
            config.decoding.max_tokens.unwrap_or(1024),
        ));
        for expert in &config.experts {
            out.push_str(&format!(
                "[[experts]]\nname = {:?}\npersona = {:?}\n",
                expert.name, expert.persona_template
            ));
            if let Some(set) = &expert.exemplar_set {
                let file = format!("exemplars/{}.toml", expert.name.replace(' ', "_"));
                out.push_str(&format!("exemplars_file = {file:?}\n"));
                let mut body = String::new();
                for ex in &set.exemplars {
                    body.push_str(&format!(
                        "[[exemplar]]\nquestion = {:?}\nchoices = [{}]\nanswer = {:?}\nreasoning = {:?}\n\n",
                        ex.question,
                        ex.choices
                            .iter()
                            .map(|c| format!("{:?}", c.text))
                            .collect::<Vec<_>>()
                            .join(", "),
                        ex.answer.to_string(),
                        ex.reasoning,
                    ));
                }
                let path = dir.join(&file);
                fs::create_dir_all(path.parent().unwrap()).unwrap();
                fs::write(path, body).unwrap();
            }
            out.push('\n');
        }
        out.push_str(&format!(
            "[summarizer]\nname = {:?}\npersona = {:?}\n",
            config.summarizer.name, config.summarizer.persona_template
        ));
        fs::write(dir.join("team.toml"), out).unwrap();
    }

    #[test]
    fn well_formed_presets_pass() {
        let dir = tempfile::tempdir().unwrap();
        write_preset(dir.path(), "demo_zero", &team_config(2, 1, false));
        write_preset(dir.path(), "demo_few", &team_config(2, 2, true));
        let violations = validate_all(dir.path());
        assert!(violations.is_empty(), "unexpected: {violations:?}");
    }

    #[test]
    fn shared_reasoning_across_experts_is_flagged() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = team_config(2, 1, true);
        // Give both experts identical reasoning for the first exemplar.
        let clone = config.experts[0].exemplar_set.as_ref().unwrap().exemplars[0].clone();
        config.experts[1].exemplar_set.as_mut().unwrap().exemplars[0] = clone;
        write_preset(dir.path(), "leaky_few", &config);
        let violations = validate_bundle(dir.path(), "leaky_few");
        assert!(
            violations.iter().any(|v| v.detail.contains("share reasoning")),
            "expected a shared-reasoning violation, got {violations:?}"
        );
    }

    #[test]
    fn contained_reasoning_is_flagged() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = team_config(2, 1, true);
        {
            let a = config.experts[0].exemplar_set.as_mut().unwrap();
            a.exemplars[0].reasoning = "shared nugget".into();
        }
        {
            let b = config.experts[1].exemplar_set.as_mut().unwrap();
            b.exemplars[0].reasoning = "prefix shared nugget suffix".into();
        }
        write_preset(dir.path(), "contained_few", &config);
        let violations = validate_bundle(dir.path(), "contained_few");
        assert!(
            violations.iter().any(|v| v.detail.contains("contains the other's")),
            "expected containment violation, got {violations:?}"
        );
    }

    #[test]
    fn misnamed_preset_is_flagged() {
        let dir = tempfile::tempdir().unwrap();
        write_preset(dir.path(), "demo_zero", &team_config(2, 1, true));
        let violations = validate_bundle(dir.path(), "demo_zero");
        assert!(violations.iter().any(|v| v.detail.contains("carries exemplars")));
    }

    #[test]
    fn unloadable_preset_reports_load_error() {
        let dir = tempfile::tempdir().unwrap();
        let violations = validate_bundle(dir.path(), "missing");
        assert_eq!(violations.len(), 1);
        assert!(violations[0].detail.contains("missing"));
    }

    #[test]
    fn question_mismatch_is_flagged() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = team_config(2, 1, true);
        config.shared_questions = false; // loader accepts, bundle check still applies
        let set = config.experts[1].exemplar_set.as_mut().unwrap();
        set.exemplars[0] = Exemplar {
            question: "A different question?".into(),
            ..set.exemplars[0].clone()
        };
        write_preset(dir.path(), "skewed_few", &config);
        let violations = validate_bundle(dir.path(), "skewed_few");
        assert!(
            violations.iter().any(|v| v.detail.contains("disagree on exemplar")),
            "expected question mismatch, got {violations:?}"
        );
    }

    #[test]
    fn empty_root_reports_no_presets() {
        let dir = tempfile::tempdir().unwrap();
        let violations = validate_all(dir.path());
        assert_eq!(violations.len(), 1);
        assert!(violations[0].detail.contains("no presets found"));
    }

}
