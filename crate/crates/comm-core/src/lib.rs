//! Collaborative multi-agent prompting: a team of role-played expert agents
//! discusses a multiple-choice problem over one or more turns, a summarizer
//! issues the final answer, and an evaluation harness scores the result.
//!
//! Module map:
//! - [`domain`]: core data types (problems, agents, team configs, transcripts)
//! - [`template`]: placeholder substitution for prompt templates
//! - [`prompt`]: prompt rendering for experts, summarizer, and baselines
//! - [`extraction`]: choice-label extraction from free-form model output
//! - [`backend`]: chat backend contract, HTTP client, retry, cache, test doubles
//! - [`orchestrator`]: multi-agent and single-agent run loops
//! - [`datasets`]: CSV/TOML loaders for problems, exemplars, and team presets
//! - [`evaluation`]: method evaluation, ablation suites, report emission
//! - [`presets`]: preset bundle discovery and validation

pub mod backend;
pub mod datasets;
pub mod domain;
pub mod evaluation;
pub mod extraction;
pub mod orchestrator;
pub mod presets;
pub mod prompt;
pub mod template;

pub mod testutil;

pub use domain::{
    fingerprint, AgentPosition, AgentSpec, AgentTurn, ChatMessage, Choice, DecodingParams,
    DomainError, Exemplar, ExemplarSet, Label, Problem, Role, TeamConfig, Transcript, Verdict,
};
