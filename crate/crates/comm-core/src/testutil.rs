//! Deterministic fixtures shared by unit tests, integration tests, and benches.

use crate::domain::{
    AgentPosition, AgentSpec, Choice, DecodingParams, Exemplar, ExemplarSet, Label, Problem,
    TeamConfig,
};

/// A four-choice problem whose options are the label letters spelled out.
pub fn problem_abcd(id: &str, gold: char) -> Problem {
    Problem::new(
        id,
        format!("Which option is labeled {gold}?"),
        vec!["alpha".into(), "bravo".into(), "charlie".into(), "delta".into()],
        Label::new(gold).expect("gold label"),
    )
    .expect("valid fixture problem")
}

/// An exemplar over two fixed choices with the given reasoning text.
pub fn exemplar(question: &str, reasoning: &str, answer: char) -> Exemplar {
    Exemplar {
        question: question.to_string(),
        choices: vec![
            Choice { label: Label::new('A').unwrap(), text: "yes".into() },
            Choice { label: Label::new('B').unwrap(), text: "no".into() },
        ],
        reasoning: reasoning.to_string(),
        answer: Label::new(answer).expect("exemplar answer label"),
    }
}

/// A `k`-expert team running `turns` discussion rounds.
///
/// With `few_shot` set, every expert carries the same two exemplar questions
/// with role-specific reasoning paths.
pub fn team_config(k: usize, turns: u32, few_shot: bool) -> TeamConfig {
    let experts = (0..k)
        .map(|i| {
            let name = format!("expert-{}", i + 1);
            AgentSpec {
                name: name.clone(),
                persona_template: format!(
                    "You are {name}, a careful specialist. Reason in your own style."
                ),
                exemplar_set: few_shot.then(|| ExemplarSet {
                    owner_role: name.clone(),
                    exemplars: vec![
                        exemplar("Is water wet?", &format!("Path {} says: clearly.", i + 1), 'A'),
                        exemplar("Is fire cold?", &format!("Path {} says: never.", i + 1), 'B'),
                    ],
                }),
                position: AgentPosition::Expert((i + 1) as u32),
            }
        })
        .collect();
    TeamConfig {
        system_template: "You are in a discussion group of {roles}, working together to solve this problem:\nQ: {question}\n{choices}".into(),
        expert_user_template: crate::prompt::DEFAULT_EXPERT_USER_TEMPLATE.to_string(),
        summarizer_user_template: crate::prompt::DEFAULT_SUMMARIZER_USER_TEMPLATE.to_string(),
        experts,
        summarizer: AgentSpec {
            name: "summarizer".into(),
            persona_template:
                "You are a summarizer. Weigh the discussion and state the final answer.".into(),
            exemplar_set: None,
            position: AgentPosition::Summarizer,
        },
        turns,
        decoding: DecodingParams::greedy("test-model"),
        shared_questions: few_shot,
    }
}
