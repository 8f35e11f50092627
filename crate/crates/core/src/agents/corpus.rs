//! Labelled instruction corpora: line-delimited `{"instruction", "label"}`
//! records used as few-shot examples and for classifier accuracy checks.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{AgentBackend, AgentContext, AgentError, AmbiguityOutcome, Facet};
use crate::scene::Scene;

pub const PACKAGED_CORPUS: &str = include_str!("../../assets/corpus/office_instructions.jsonl");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "well-formed")]
    WellFormed,
    #[serde(rename = "ambiguous")]
    Ambiguous,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::WellFormed => "well-formed",
            Label::Ambiguous => "ambiguous",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub instruction: String,
    pub label: Label,
    /// Facets the author marked as missing; informational.
    #[serde(default)]
    pub missing: Vec<Facet>,
}

/// Parses a JSONL corpus. Blank lines and `#` comments are skipped.
pub fn load_corpus(text: &str) -> Result<Vec<FewShotExample>, AgentError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| AgentError::Parse(format!("line {}: {e}", i + 1)))
        })
        .collect()
}

pub fn packaged_corpus() -> Vec<FewShotExample> {
    load_corpus(PACKAGED_CORPUS).expect("packaged corpus parses")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
    /// `confusion[truth][predicted]`, index 0 well-formed, 1 ambiguous.
    pub confusion: [[usize; 2]; 2],
    /// Indices of misclassified examples.
    pub errors: Vec<usize>,
}

/// Runs the detector on each instruction in isolation.
pub fn classify_corpus(
    examples: &[FewShotExample],
    backend: &dyn AgentBackend,
    scene: &Scene,
) -> Result<Classification, AgentError> {
    if examples.is_empty() {
        return Err(AgentError::Parse("corpus is empty".into()));
    }
    let idx = |l: Label| match l {
        Label::WellFormed => 0,
        Label::Ambiguous => 1,
    };
    let mut confusion = [[0usize; 2]; 2];
    let mut errors = Vec::new();
    for (i, ex) in examples.iter().enumerate() {
        let history = vec![ex.instruction.clone()];
        let predicted = match backend.detect_ambiguity(&AgentContext::new(scene, &history))? {
            AmbiguityOutcome::Clear { .. } => Label::WellFormed,
            AmbiguityOutcome::Ambiguous { .. } => Label::Ambiguous,
        };
        confusion[idx(ex.label)][idx(predicted)] += 1;
        if predicted != ex.label {
            errors.push(i);
        }
    }
    let total = examples.len();
    let correct = total - errors.len();
    Ok(Classification {
        total,
        correct,
        accuracy: correct as f64 / total as f64,
        confusion,
        errors,
    })
}
