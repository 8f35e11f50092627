//! The three agent roles: ambiguity detection, configuration and candidate
//! validation. [`RuleBased`] is a deterministic offline engine;
//! [`RemoteBackend`] forwards rendered prompts to a chat-completions endpoint.

mod corpus;
mod remote;
mod rules;
mod text;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{OptimizationSpec, SpecViolation};
use crate::objectives::ConstraintVector;
use crate::scene::{Layout, Scene};

pub use corpus::{classify_corpus, load_corpus, packaged_corpus, Classification, FewShotExample, Label};
pub use remote::{ChatClient, ClientSettings, RemoteBackend};
pub use rules::{RuleBased, ANCHOR_PROXIMITY_DEGREES, PROTECTED_SUITABILITY, QUESTION_TEMPLATES};

/// Rounds of clarification before the pipeline proceeds with defaults.
pub const MAX_CLARIFICATION_ROUNDS: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("agent request timed out")]
    Timeout,
    #[error("agent endpoint returned HTTP {status}")]
    Http { status: u16, body: String },
    #[error("agent transport error: {0}")]
    Transport(String),
    #[error("could not parse agent reply: {0}")]
    Parse(String),
    #[error("agent produced an invalid spec: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidSpec(Vec<SpecViolation>),
    #[error("agent choice {index} is out of range for {count} candidates")]
    OutOfRange { index: usize, count: usize },
    #[error("no candidates to validate")]
    NoCandidates,
    #[error("remote backend is not configured: {0}")]
    NotConfigured(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Facet {
    Widgets,
    Interaction,
    Preference,
}

impl Facet {
    pub const ALL: [Facet; 3] = [Facet::Widgets, Facet::Interaction, Facet::Preference];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum AmbiguityOutcome {
    Clear { instruction: String },
    Ambiguous { question: String, facet: Facet },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationChoice {
    pub index: usize,
    pub rationale: String,
}

/// A candidate as shown to the validator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateLayout {
    pub layout: Layout,
    pub objectives: Vec<f64>,
    pub constraints: ConstraintVector,
}

impl CandidateLayout {
    pub fn feasible(&self) -> bool {
        self.constraints.total() <= 0.0
    }
}

/// What every agent sees: the scene and the instruction history.
#[derive(Debug, Clone, Copy)]
pub struct AgentContext<'a> {
    pub scene: &'a Scene,
    pub history: &'a [String],
    /// Ambiguous rounds answered so far in this episode.
    pub round: usize,
}

impl<'a> AgentContext<'a> {
    pub fn new(scene: &'a Scene, history: &'a [String]) -> Self {
        Self {
            scene,
            history,
            round: 0,
        }
    }

    pub fn combined(&self) -> String {
        aggregate(self.history)
    }
}

/// Joins instructions in arrival order, each terminated as a sentence.
pub fn aggregate(history: &[String]) -> String {
    history
        .iter()
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| {
            if s.ends_with(['.', '!', '?']) {
                s.to_owned()
            } else {
                format!("{s}.")
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub trait AgentBackend: Send + Sync {
    fn name(&self) -> &'static str;

    fn detect_ambiguity(&self, ctx: &AgentContext<'_>) -> Result<AmbiguityOutcome, AgentError>;

    /// Produces a spec that passes `validate_spec` against `ctx.scene`.
    fn configure(&self, ctx: &AgentContext<'_>) -> Result<OptimizationSpec, AgentError>;

    fn validate_candidates(
        &self,
        ctx: &AgentContext<'_>,
        spec: &OptimizationSpec,
        candidates: &[CandidateLayout],
    ) -> Result<ValidationChoice, AgentError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    #[default]
    Stub,
    Remote,
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AgentKind::Stub => "stub",
            AgentKind::Remote => "remote",
        })
    }
}

impl FromStr for AgentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "stub" | "rules" | "rule-based" => Ok(AgentKind::Stub),
            "remote" => Ok(AgentKind::Remote),
            other => Err(format!("unknown agent backend '{other}' (expected stub or remote)")),
        }
    }
}

/// Builds a backend; the remote one reads its settings from the environment.
pub fn backend(kind: AgentKind) -> Result<Box<dyn AgentBackend>, AgentError> {
    match kind {
        AgentKind::Stub => Ok(Box::new(RuleBased)),
        AgentKind::Remote => Ok(Box::new(RemoteBackend::from_env()?)),
    }
}

/// Plain-text scene summary with positions relative to the user.
pub fn describe_scene(scene: &Scene) -> String {
    let mut out = String::new();
    out.push_str("Physical areas:\n");
    for o in &scene.objects {
        out.push_str(&format!(
            "- {} ({}): {}\n",
            o.name,
            o.label,
            text::relative_position(scene, o.bounds.center())
        ));
    }
    out.push_str("Virtual widgets:\n");
    for w in &scene.widgets {
        out.push_str(&format!(
            "- {} ({:.2} m x {:.2} m): {}\n",
            w.name, w.width, w.height, w.description
        ));
    }
    out
}

/// One sentence per widget placement.
pub fn describe_layout(scene: &Scene, layout: &Layout) -> String {
    layout
        .iter()
        .map(|(name, p)| format!("{name} is {}.", text::relative_position(scene, p)))
        .collect::<Vec<_>>()
        .join(" ")
}
