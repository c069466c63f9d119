//! Turn scheduling: runs a team of agents (or one role-switching session) over
//! a problem and assembles the Transcript.

use crate::backend::{BackendError, ChatBackend, SessionId};
use crate::domain::{
    fingerprint, AgentSpec, AgentTurn, ChatMessage, DomainError, Problem, TeamConfig, Transcript,
    Verdict,
};
use crate::extraction::extract_choice;
use crate::prompt::{
    render_exemplar_block, render_expert_prompt, render_expert_user_text, render_summarizer_prompt,
    render_summarizer_user_text, render_system, BaselineFormat, RenderError, TemplateContext,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Whether a run uses one backend session per agent, or one session total.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    MultiAgent,
    SingleAgentRoleplay,
}

impl std::fmt::Display for RunMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RunMode::MultiAgent => "multi",
            RunMode::SingleAgentRoleplay => "single",
        })
    }
}

/// Runs one problem in the given mode.
pub fn run(
    mode: RunMode,
    config: &TeamConfig,
    problem: &Problem,
    backend: &dyn ChatBackend,
) -> Result<Transcript, RunError> {
    match mode {
        RunMode::MultiAgent => run_team(config, problem, backend),
        RunMode::SingleAgentRoleplay => run_single_agent(config, problem, backend),
    }
}

fn expert_exemplar_block(expert: &AgentSpec) -> Result<Option<String>, RenderError> {
    match &expert.exemplar_set {
        Some(set) if !set.is_empty() => {
            Ok(Some(render_exemplar_block(set, BaselineFormat::Cot)?))
        }
        _ => Ok(None),
    }
}

/// Runs the full team schedule: T rounds of every expert in list order, then
/// the summarizer once.
///
/// Each agent is an independent backend session; history travels between
/// agents only as rendered "{author} said:" text inside user messages, never
/// as shared assistant-role history.
pub fn run_team(
    config: &TeamConfig,
    problem: &Problem,
    backend: &dyn ChatBackend,
) -> Result<Transcript, RunError> {
    config.validate()?;
    problem.validate()?;
    let system_text = render_system(config, problem)?;
    let mut turns: Vec<AgentTurn> = Vec::with_capacity(config.expected_turn_count());
    let mut prior_outputs: Vec<(String, String)> = Vec::new();

    for round in 1..=config.turns {
        for expert in &config.experts {
            let ctx = TemplateContext {
                system_text: Some(system_text.clone()),
                prior_outputs: prior_outputs.clone(),
                exemplar_block: expert_exemplar_block(expert)?,
            };
            let prompt = render_expert_prompt(config, expert, problem, &ctx)?;
            let session = SessionId::new(format!("{}::{}", problem.id, expert.name));
            let completion = backend
                .complete(&session, &prompt, &config.decoding)
                .map_err(|source| RunError::Backend { source, partial: turns.clone() })?;
            turns.push(AgentTurn {
                agent_name: expert.name.clone(),
                turn_index: round,
                prompt,
                completion: completion.clone(),
            });
            prior_outputs.push((expert.name.clone(), completion));
        }
    }

    let ctx = TemplateContext {
        system_text: Some(system_text),
        prior_outputs,
        exemplar_block: None,
    };
    let prompt = render_summarizer_prompt(config, &config.summarizer, problem, &ctx)?;
    let session = SessionId::new(format!("{}::{}", problem.id, config.summarizer.name));
    let completion = backend
        .complete(&session, &prompt, &config.decoding)
        .map_err(|source| RunError::Backend { source, partial: turns.clone() })?;
    turns.push(AgentTurn {
        agent_name: config.summarizer.name.clone(),
        turn_index: config.turns + 1,
        prompt,
        completion,
    });

    let verdict = finalize(&turns, problem);
    Ok(Transcript {
        problem_id: problem.id.clone(),
        team_fingerprint: fingerprint(config),
        turns,
        verdict,
    })
}

fn roleplay_instruction(agent: &AgentSpec) -> Result<String, RenderError> {
    let persona = crate::template::Template::compile(
        &agent.persona_template,
        crate::prompt::PERSONA_PLACEHOLDERS,
    )?
    .render(&[("name", agent.name.as_str())])?;
    Ok(format!("Now act as the {}. {persona}", agent.name))
}

/// Runs the same logical schedule inside one continuous backend session.
///
/// Personas arrive as successive "Now act as the {role}..." user messages and
/// the assistant history accumulates, so one model instance plays every role.
pub fn run_single_agent(
    config: &TeamConfig,
    problem: &Problem,
    backend: &dyn ChatBackend,
) -> Result<Transcript, RunError> {
    config.validate()?;
    problem.validate()?;
    let system_text = render_system(config, problem)?;
    let session = SessionId::new(format!("{}::single-instance", problem.id));
    let mut history: Vec<ChatMessage> = vec![ChatMessage::system(system_text)];
    let mut turns: Vec<AgentTurn> = Vec::with_capacity(config.expected_turn_count());

    let speak = |agent: &AgentSpec,
                     body: String,
                     turn_index: u32,
                     history: &mut Vec<ChatMessage>,
                     turns: &mut Vec<AgentTurn>|
     -> Result<(), RunError> {
        let instruction = roleplay_instruction(agent)?;
        history.push(ChatMessage::user(format!("{instruction}\n\n{body}")));
        let prompt = history.clone();
        let completion = backend
            .complete(&session, &prompt, &config.decoding)
            .map_err(|source| RunError::Backend { source, partial: turns.clone() })?;
        history.push(ChatMessage::assistant(agent.name.clone(), completion.clone()));
        turns.push(AgentTurn {
            agent_name: agent.name.clone(),
            turn_index,
            prompt,
            completion,
        });
        Ok(())
    };

    for round in 1..=config.turns {
        for expert in &config.experts {
            // History lives in the session itself, so the rendered body
            // carries no "said:" blocks.
            let body = render_expert_user_text(
                config,
                problem,
                expert_exemplar_block(expert)?.as_deref(),
                "",
            )?;
            speak(expert, body, round, &mut history, &mut turns)?;
        }
    }
    let body = render_summarizer_user_text(config, problem, "")?;
    speak(&config.summarizer, body, config.turns + 1, &mut history, &mut turns)?;

    let verdict = finalize(&turns, problem);
    Ok(Transcript {
        problem_id: problem.id.clone(),
        team_fingerprint: fingerprint(config),
        turns,
        verdict,
    })
}

/// Scores a finished run: extracts a label from the last (summarizer) turn and
/// compares it with gold. Extraction failure scores incorrect, never skipped.
pub fn finalize(turns: &[AgentTurn], problem: &Problem) -> Verdict {
    let raw_final = turns.last().map(|t| t.completion.clone()).unwrap_or_default();
    let extracted = extract_choice(&raw_final, &problem.labels());
    Verdict { extracted, correct: extracted == Some(problem.gold), raw_final }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] DomainError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("backend failed after {} completed turns: {source}", partial.len())]
    Backend { source: BackendError, partial: Vec<AgentTurn> },
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::ScriptedBackend;
    use crate::testutil::{problem_abcd, team_config};

    fn scripted(n: usize) -> ScriptedBackend {
        ScriptedBackend::from_responses((0..n).map(|i| format!("output {i}. The answer is (B).")))
    }

    #[test]
    fn team_run_follows_the_length_law() {
        for (k, t) in [(1usize, 1u32), (2, 1), (2, 2), (3, 2), (4, 3)] {
            let config = team_config(k, t, false);
            let problem = problem_abcd("t:0", 'B');
            let backend = scripted(k * t as usize + 1);
            let transcript = run_team(&config, &problem, &backend).unwrap();
            assert_eq!(transcript.turns.len(), k * t as usize + 1);
            assert_eq!(backend.calls(), k * t as usize + 1);
            transcript.validate_against(&config).unwrap();
        }
    }

    #[test]
    fn turn_order_is_experts_in_list_order_then_summarizer() {
        let config = team_config(2, 2, false);
        let problem = problem_abcd("t:0", 'B');
        let backend = scripted(5);
        let transcript = run_team(&config, &problem, &backend).unwrap();
        let order: Vec<(String, u32)> =
            transcript.turns.iter().map(|t| (t.agent_name.clone(), t.turn_index)).collect();
        assert_eq!(
            order,
            vec![
                ("expert-1".into(), 1),
                ("expert-2".into(), 1),
                ("expert-1".into(), 2),
                ("expert-2".into(), 2),
                ("summarizer".into(), 3),
            ]
        );
    }

    #[test]
    fn team_sessions_are_one_per_agent() {
        let config = team_config(2, 2, false);
        let problem = problem_abcd("t:0", 'B');
        let backend = scripted(5);
        run_team(&config, &problem, &backend).unwrap();
        assert_eq!(backend.session_ids().len(), 3);
    }

    #[test]
    fn single_agent_run_uses_one_session_and_growing_history() {
        let config = team_config(2, 1, false);
        let problem = problem_abcd("t:0", 'B');
        let backend = scripted(3);
        let transcript = run_single_agent(&config, &problem, &backend).unwrap();
        assert_eq!(transcript.turns.len(), 3);
        assert_eq!(backend.session_ids().len(), 1);
        let log = backend.log();
        for pair in log.windows(2) {
            assert!(pair[1].messages.len() > pair[0].messages.len());
            // Earlier request is a strict prefix of the later one.
            assert_eq!(&pair[1].messages[..pair[0].messages.len()], &pair[0].messages[..]);
        }
    }

    #[test]
    fn multi_agent_prompts_carry_no_foreign_assistant_messages() {
        let config = team_config(3, 2, false);
        let problem = problem_abcd("t:0", 'B');
        let backend = scripted(7);
        run_team(&config, &problem, &backend).unwrap();
        for call in backend.log() {
            assert!(call.messages.iter().all(|m| m.role != crate::domain::Role::Assistant));
        }
    }

    #[test]
    fn backend_failure_preserves_partial_transcript() {
        let config = team_config(2, 1, false);
        let problem = problem_abcd("t:0", 'B');
        let backend = ScriptedBackend::from_responses(["only one response"]);
        match run_team(&config, &problem, &backend) {
            Err(RunError::Backend { partial, .. }) => {
                assert_eq!(partial.len(), 1);
                assert_eq!(partial[0].agent_name, "expert-1");
            }
            other => panic!("expected backend error, got {other:?}"),
        }
    }

    #[test]
    fn finalize_scores_extraction_against_gold() {
        let config = team_config(1, 1, false);
        let problem = problem_abcd("t:0", 'B');
        let backend = ScriptedBackend::from_responses([
            "thinking... The answer is (B).",
            "confirmed. The answer is (B).",
        ]);
        let transcript = run_team(&config, &problem, &backend).unwrap();
        assert!(transcript.verdict.correct);
        assert_eq!(transcript.verdict.extracted.unwrap().as_char(), 'B');

        let wrong = problem_abcd("t:1", 'A');
        let backend = ScriptedBackend::from_responses([
            "hmm. The answer is (B).",
            "final: The answer is (B).",
        ]);
        let transcript = run_team(&config, &wrong, &backend).unwrap();
        assert!(!transcript.verdict.correct);
    }

    #[test]
    fn unextractable_final_answer_scores_incorrect() {
        let config = team_config(1, 1, false);
        let problem = problem_abcd("t:0", 'B');
        let backend = ScriptedBackend::from_responses(["mumble", "no label here at all"]);
        let transcript = run_team(&config, &problem, &backend).unwrap();
        assert_eq!(transcript.verdict.extracted, None);
        assert!(!transcript.verdict.correct);
    }

    #[test]
    fn runs_are_deterministic_with_a_deterministic_backend() {
        let config = team_config(2, 2, true);
        let problem = problem_abcd("t:0", 'B');
        let a = run_team(&config, &problem, &scripted(5)).unwrap();
        let b = run_team(&config, &problem, &scripted(5)).unwrap();
        assert_eq!(a, b);
    }
}
