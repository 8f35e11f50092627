//! Reference directions on the unit simplex.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{domain, MooError};

const RIESZ_ITERATIONS: usize = 1000;
const RIESZ_INITIAL_STEP: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceDirections {
    pub m: usize,
    pub dirs: Vec<Vec<f64>>,
}

impl ReferenceDirections {
    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    /// Checks every direction is non-negative and sums to one.
    pub fn check_simplex(&self, tol: f64) -> Result<(), MooError> {
        for (i, d) in self.dirs.iter().enumerate() {
            if d.len() != self.m {
                return Err(domain(format!("direction {i} has {} components, expected {}", d.len(), self.m)));
            }
            if d.iter().any(|&c| c < 0.0 || !c.is_finite()) {
                return Err(domain(format!("direction {i} has a negative component")));
            }
            let s: f64 = d.iter().sum();
            if (s - 1.0).abs() > tol {
                return Err(domain(format!("direction {i} sums to {s}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefDirMethod {
    #[default]
    Riesz,
    DasDennis,
}

impl RefDirMethod {
    /// About `n` directions for `m` objectives. Das-Dennis picks the
    /// largest lattice not exceeding `n` points.
    pub fn generate(self, m: usize, n: usize, seed: u64) -> Result<ReferenceDirections, MooError> {
        match self {
            RefDirMethod::Riesz => riesz_refdirs(m, n, seed),
            RefDirMethod::DasDennis => {
                let mut p = 1;
                while binomial(p + 1 + m - 1, m - 1) <= n {
                    p += 1;
                }
                das_dennis_refdirs(m, p)
            }
        }
    }
}

impl fmt::Display for RefDirMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RefDirMethod::Riesz => "riesz",
            RefDirMethod::DasDennis => "das-dennis",
        })
    }
}

impl FromStr for RefDirMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "riesz" => Ok(RefDirMethod::Riesz),
            "das-dennis" | "das_dennis" => Ok(RefDirMethod::DasDennis),
            other => Err(format!("unknown reference direction method '{other}'")),
        }
    }
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// All simplex lattice points with denominator `partitions`, in descending
/// lexicographic order.
pub fn das_dennis_refdirs(m: usize, partitions: usize) -> Result<ReferenceDirections, MooError> {
    if m < 1 {
        return Err(domain("need at least one objective"));
    }
    if partitions < 1 {
        return Err(domain("partitions must be at least 1"));
    }
    fn rec(m: usize, left: usize, p: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if prefix.len() == m - 1 {
            prefix.push(left);
            out.push(prefix.iter().map(|&k| k as f64 / p as f64).collect());
            prefix.pop();
            return;
        }
        for k in (0..=left).rev() {
            prefix.push(k);
            rec(m, left - k, p, prefix, out);
            prefix.pop();
        }
    }
    let mut dirs = Vec::with_capacity(binomial(partitions + m - 1, m - 1));
    rec(m, partitions, partitions, &mut Vec::with_capacity(m), &mut dirs);
    Ok(ReferenceDirections { m, dirs })
}

/// Riesz s-energy `Σ_{i<j} |v_i − v_j|^{−s}`.
pub fn riesz_energy(dirs: &[Vec<f64>], s: f64) -> f64 {
    log_energy(dirs, s).exp()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `ln Σ d_ij^{-s}` via log-sum-exp; infinite when two points coincide.
fn log_energy(dirs: &[Vec<f64>], s: f64) -> f64 {
    let mut terms = Vec::with_capacity(dirs.len() * dirs.len() / 2);
    for i in 0..dirs.len() {
        for j in (i + 1)..dirs.len() {
            let d2 = sq_dist(&dirs[i], &dirs[j]);
            if d2 <= 0.0 {
                return f64::INFINITY;
            }
            terms.push(-0.5 * s * d2.ln());
        }
    }
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Gradient of the log energy with respect to every point.
fn log_energy_grad(dirs: &[Vec<f64>], s: f64, log_e: f64) -> Vec<Vec<f64>> {
    let m = dirs[0].len();
    let mut grad = vec![vec![0.0; m]; dirs.len()];
    for i in 0..dirs.len() {
        for j in (i + 1)..dirs.len() {
            let d2 = sq_dist(&dirs[i], &dirs[j]);
            // d/dv_i of d^{-s} = -s d^{-s-2} (v_i - v_j), scaled by 1/E
            let coef = -s * (-0.5 * (s + 2.0) * d2.ln() - log_e).exp();
            for k in 0..m {
                let diff = dirs[i][k] - dirs[j][k];
                grad[i][k] += coef * diff;
                grad[j][k] -= coef * diff;
            }
        }
    }
    grad
}

/// Euclidean projection onto the probability simplex.
pub(crate) fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    let mut w: Vec<f64> = v.iter().map(|&x| (x - theta).max(0.0)).collect();
    let s: f64 = w.iter().sum();
    if s > 0.0 {
        w.iter_mut().for_each(|x| *x /= s);
    }
    w
}

fn random_simplex_point(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..m).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Random uniform points on the simplex, the starting set of
/// [`riesz_refdirs`] for the same `(m, n, seed)`.
pub fn riesz_initial(m: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| random_simplex_point(&mut rng, m)).collect()
}

pub fn riesz_exponent(m: usize) -> f64 {
    (m * m) as f64
}

/// `n` well-spread directions minimizing the Riesz s-energy (`s = m²`) by
/// projected gradient descent from a seeded uniform start. Output is in
/// descending lexicographic order.
pub fn riesz_refdirs(m: usize, n: usize, seed: u64) -> Result<ReferenceDirections, MooError> {
    if m < 2 {
        return Err(domain("Riesz directions need m >= 2"));
    }
    if n < 2 {
        return Err(domain("Riesz directions need n >= 2"));
    }
    let s = riesz_exponent(m);
    let mut dirs = riesz_initial(m, n, seed);
    let mut log_e = log_energy(&dirs, s);
    let mut step = RIESZ_INITIAL_STEP;
    for _ in 0..RIESZ_ITERATIONS {
        if step < 1e-12 {
            break;
        }
        let mut grad = log_energy_grad(&dirs, s, log_e);
        // keep moves tangent to the simplex
        for g in grad.iter_mut() {
            let mean = g.iter().sum::<f64>() / m as f64;
            g.iter_mut().for_each(|x| *x -= mean);
        }
        let scale = grad
            .iter()
            .map(|g| g.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        if !(scale > 0.0) || !scale.is_finite() {
            break;
        }
        let trial: Vec<Vec<f64>> = dirs
            .iter()
            .zip(&grad)
            .map(|(p, g)| {
                let moved: Vec<f64> = p.iter().zip(g).map(|(x, gx)| x - step * gx / scale).collect();
                project_to_simplex(&moved)
            })
            .collect();
        let trial_e = log_energy(&trial, s);
        if trial_e.is_finite() && trial_e < log_e {
            dirs = trial;
            log_e = trial_e;
            step = (step * 1.2).min(RIESZ_INITIAL_STEP);
        } else {
            step *= 0.5;
        }
    }
    dirs.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    Ok(ReferenceDirections { m, dirs })
}
