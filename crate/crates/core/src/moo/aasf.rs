//! Reduction of a front to a few representatives by augmented achievement
//! scalarization over evenly spread weight vectors.

use serde::{Deserialize, Serialize};

use super::refdirs::riesz_refdirs;
use super::{domain, Individual, MooError};

pub const AASF_RHO: f64 = 1e-4;
pub const WEIGHT_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// Position of this member in the input front.
    pub front_index: usize,
    /// Weight that selected it; `None` for backfilled members.
    pub weight_index: Option<usize>,
    pub individual: Individual,
    /// Score under the selecting weight, or the best score over all
    /// weights for backfilled members.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub members: Vec<Candidate>,
    pub weights_used: Vec<Vec<f64>>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// `max_i(f_i / w_i) + rho * Σ_i f_i / w_i`, weights floored at
/// [`WEIGHT_FLOOR`].
pub fn aasf_score(normalized: &[f64], weight: &[f64], rho: f64) -> f64 {
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for (f, w) in normalized.iter().zip(weight) {
        let r = f / w.max(WEIGHT_FLOOR);
        max = max.max(r);
        sum += r;
    }
    max + rho * sum
}

fn normalize(front: &[Individual]) -> Vec<Vec<f64>> {
    let m = front[0].objectives.len();
    let (mut lo, mut hi) = (vec![f64::INFINITY; m], vec![f64::NEG_INFINITY; m]);
    for ind in front {
        for (k, &v) in ind.objectives.iter().enumerate() {
            lo[k] = lo[k].min(v);
            hi[k] = hi[k].max(v);
        }
    }
    front
        .iter()
        .map(|ind| {
            ind.objectives
                .iter()
                .enumerate()
                .map(|(k, &v)| {
                    let span = hi[k] - lo[k];
                    if span > 0.0 {
                        (v - lo[k]) / span
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Picks up to `k` distinct members of `front`, one per weight vector, then
/// backfills from the unselected members with the lowest best-case score.
pub fn aasf_select(
    front: &[Individual],
    k: usize,
    rho: f64,
    seed: u64,
) -> Result<CandidateSet, MooError> {
    if front.is_empty() {
        return Err(domain("cannot select candidates from an empty front"));
    }
    if k == 0 {
        return Err(domain("candidate count must be at least 1"));
    }
    let m = front[0].objectives.len();
    if m == 0 || front.iter().any(|i| i.objectives.len() != m) {
        return Err(domain("front members must share a nonzero objective arity"));
    }
    let weights: Vec<Vec<f64>> = if k == 1 || m == 1 {
        vec![vec![1.0 / m as f64; m]]
    } else {
        riesz_refdirs(m, k, seed)?.dirs
    };
    let norm = normalize(front);
    let scores: Vec<Vec<f64>> = weights
        .iter()
        .map(|w| norm.iter().map(|f| aasf_score(f, w, rho)).collect())
        .collect();

    let mut members: Vec<Candidate> = Vec::new();
    let taken = |members: &[Candidate], i: usize| {
        members.iter().any(|c| c.individual.objectives == front[i].objectives)
    };
    for (wi, row) in scores.iter().enumerate() {
        let best = (0..front.len())
            .min_by(|&a, &b| row[a].total_cmp(&row[b]))
            .expect("front is nonempty");
        if !taken(&members, best) {
            members.push(Candidate {
                front_index: best,
                weight_index: Some(wi),
                individual: front[best].clone(),
                score: row[best],
            });
        }
    }

    if members.len() < k {
        let mut rest: Vec<(usize, f64)> = (0..front.len())
            .map(|i| {
                let best = scores.iter().map(|r| r[i]).fold(f64::INFINITY, f64::min);
                (i, best)
            })
            .collect();
        rest.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        for (i, score) in rest {
            if members.len() == k {
                break;
            }
            if !taken(&members, i) {
                members.push(Candidate {
                    front_index: i,
                    weight_index: None,
                    individual: front[i].clone(),
                    score,
                });
            }
        }
    }

    Ok(CandidateSet {
        members,
        weights_used: weights,
    })
}
