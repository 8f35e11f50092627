//! Constrained many-objective optimization: NSGA-III with reference
//! directions, and AASF-based reduction of the resulting front.

mod aasf;
mod dominance;
mod export;
mod nsga3;
mod operators;
mod refdirs;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use aasf::{aasf_score, aasf_select, Candidate, CandidateSet, AASF_RHO, WEIGHT_FLOOR};
pub use dominance::{dominates, nondominated_sort};
pub use export::{ExportedIndividual, ParetoDocument, RunMetadata};
pub use nsga3::{nsga3_run, GenerationStats, ParetoSet, SolverParams};
pub use operators::{polynomial_mutation, sbx_crossover};
pub use refdirs::{
    das_dennis_refdirs, riesz_energy, riesz_exponent, riesz_initial, riesz_refdirs, RefDirMethod,
    ReferenceDirections,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MooError {
    #[error("{0}")]
    Domain(String),
    #[error("evaluation failed in generation {generation}: {message}")]
    Evaluation { generation: usize, message: String },
}

pub(crate) fn domain(msg: impl Into<String>) -> MooError {
    MooError::Domain(msg.into())
}

/// Objective and violation images of one genome.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub objectives: Vec<f64>,
    /// Non-negative violation magnitudes; zero means satisfied.
    pub violations: Vec<f64>,
}

/// A box-bounded problem with `n_obj` minimized objectives.
pub trait Problem: Sync {
    fn n_obj(&self) -> usize;
    fn lower_bounds(&self) -> &[f64];
    fn upper_bounds(&self) -> &[f64];
    fn evaluate(&self, genome: &[f64]) -> Result<Evaluation, String>;

    fn n_var(&self) -> usize {
        self.lower_bounds().len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub genome: Vec<f64>,
    pub objectives: Vec<f64>,
    pub violations: Vec<f64>,
    /// Total constraint violation.
    pub cv: f64,
}

impl Individual {
    pub fn new(genome: Vec<f64>, eval: Evaluation) -> Self {
        let cv = eval.violations.iter().map(|v| v.max(0.0)).sum();
        Self {
            genome,
            objectives: eval.objectives,
            violations: eval.violations,
            cv,
        }
    }

    /// Builds an individual straight from an objective vector. Used by
    /// tests and by callers that already hold evaluated points.
    pub fn from_objectives(objectives: Vec<f64>, cv: f64) -> Self {
        Self {
            genome: Vec::new(),
            objectives,
            violations: vec![cv],
            cv,
        }
    }

    pub fn feasible(&self) -> bool {
        self.cv <= 0.0
    }
}
