//! NSGA-III with constraint domination.
//!
//! Per generation: binary tournament on feasibility and violation, SBX and
//! polynomial mutation, then environmental selection over parents and
//! offspring by non-dominated fronts and reference-direction niching on the
//! last front that only partly fits.
//!
//! All random draws come from one ChaCha stream consumed on the calling
//! thread. Evaluation fans out over rayon but results are gathered in input
//! order, so a run is bit-identical for any thread count.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dominance::nondominated_sort;
use super::operators::{polynomial_mutation, sbx_crossover};
use super::{domain, Individual, MooError, Problem, ReferenceDirections};

const EXTREME_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    pub population: usize,
    pub generations: usize,
    pub seed: u64,
    pub crossover_probability: f64,
    pub crossover_eta: f64,
    pub mutation_eta: f64,
    /// Per-variable mutation probability; `None` means `1 / n_var`.
    pub mutation_probability: Option<f64>,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            population: 100,
            generations: 40,
            seed: 42,
            crossover_probability: 1.0,
            crossover_eta: 30.0,
            mutation_eta: 20.0,
            mutation_probability: None,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<(), MooError> {
        if self.population < 4 || !self.population.is_multiple_of(4) {
            return Err(domain(format!(
                "population must be a multiple of 4 and at least 4, got {}",
                self.population
            )));
        }
        if self.generations < 1 {
            return Err(domain("generations must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.crossover_probability) {
            return Err(domain("crossover probability must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_cv: f64,
    pub mean_cv: f64,
    pub feasible_fraction: f64,
    /// Mean box volume `Π(1 − f̂)` of first-front members, objectives
    /// normalized to the population's ideal and nadir. Zero while no
    /// member is feasible.
    pub hv_proxy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoSet {
    pub individuals: Vec<Individual>,
    pub generation_log: Vec<GenerationStats>,
}

/// Runs NSGA-III and returns the first front of the final population.
pub fn nsga3_run<P: Problem + ?Sized>(
    problem: &P,
    params: &SolverParams,
    refdirs: &ReferenceDirections,
) -> Result<ParetoSet, MooError> {
    params.validate()?;
    let m = problem.n_obj();
    if m < 2 {
        return Err(domain("NSGA-III needs at least two objectives"));
    }
    if refdirs.m != m || refdirs.is_empty() {
        return Err(domain(format!(
            "reference directions have {} objectives, problem has {m}",
            refdirs.m
        )));
    }
    let lower = problem.lower_bounds();
    let upper = problem.upper_bounds();
    if lower.len() != upper.len() || lower.iter().zip(upper).any(|(l, u)| !(l <= u)) {
        return Err(domain("invalid variable bounds"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.population;
    let genomes: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            lower
                .iter()
                .zip(upper)
                .map(|(&l, &u)| if u > l { rng.random_range(l..=u) } else { l })
                .collect()
        })
        .collect();
    let mut pop = evaluate_all(problem, genomes, 0)?;
    let mut log = vec![stats(0, &pop)];

    for generation in 1..=params.generations {
        let offspring = make_offspring(&mut rng, &pop, lower, upper, params);
        let offspring = evaluate_all(problem, offspring, generation)?;
        pop.extend(offspring);
        pop = survival(&mut rng, pop, n, refdirs);
        log.push(stats(generation, &pop));
    }

    let fronts = nondominated_sort(&pop);
    let individuals = fronts
        .into_iter()
        .next()
        .unwrap_or_default()
        .into_iter()
        .map(|i| pop[i].clone())
        .collect();
    Ok(ParetoSet {
        individuals,
        generation_log: log,
    })
}

fn evaluate_all<P: Problem + ?Sized>(
    problem: &P,
    genomes: Vec<Vec<f64>>,
    generation: usize,
) -> Result<Vec<Individual>, MooError> {
    let m = problem.n_obj();
    genomes
        .into_par_iter()
        .map(|g| {
            let eval = problem
                .evaluate(&g)
                .map_err(|message| MooError::Evaluation { generation, message })?;
            if eval.objectives.len() != m {
                return Err(MooError::Evaluation {
                    generation,
                    message: format!("expected {m} objectives, got {}", eval.objectives.len()),
                });
            }
            if eval.objectives.iter().chain(&eval.violations).any(|v| !v.is_finite()) {
                return Err(MooError::Evaluation {
                    generation,
                    message: "non-finite objective or violation".into(),
                });
            }
            Ok(Individual::new(g, eval))
        })
        .collect()
}

fn tournament<'a>(rng: &mut ChaCha8Rng, pop: &'a [Individual]) -> &'a Individual {
    let a = &pop[rng.random_range(0..pop.len())];
    let b = &pop[rng.random_range(0..pop.len())];
    match (a.feasible(), b.feasible()) {
        (true, false) => a,
        (false, true) => b,
        (false, false) if a.cv != b.cv => {
            if a.cv < b.cv {
                a
            } else {
                b
            }
        }
        _ => {
            if rng.random::<bool>() {
                a
            } else {
                b
            }
        }
    }
}

fn make_offspring(
    rng: &mut ChaCha8Rng,
    pop: &[Individual],
    lower: &[f64],
    upper: &[f64],
    params: &SolverParams,
) -> Vec<Vec<f64>> {
    let n_var = lower.len();
    let pm = params
        .mutation_probability
        .unwrap_or(if n_var > 0 { 1.0 / n_var as f64 } else { 0.0 });
    let mut out = Vec::with_capacity(params.population);
    while out.len() < params.population {
        let p1 = tournament(rng, pop).genome.clone();
        let p2 = tournament(rng, pop).genome.clone();
        let (mut c1, mut c2) = if rng.random::<f64>() < params.crossover_probability {
            sbx_crossover(rng, &p1, &p2, lower, upper, params.crossover_eta)
        } else {
            (p1, p2)
        };
        polynomial_mutation(rng, &mut c1, lower, upper, params.mutation_eta, pm);
        polynomial_mutation(rng, &mut c2, lower, upper, params.mutation_eta, pm);
        out.push(c1);
        out.push(c2);
    }
    out.truncate(params.population);
    out
}

fn survival(
    rng: &mut ChaCha8Rng,
    merged: Vec<Individual>,
    n: usize,
    refdirs: &ReferenceDirections,
) -> Vec<Individual> {
    let fronts = nondominated_sort(&merged);
    let mut selected: Vec<usize> = Vec::with_capacity(n);
    let mut last: Vec<usize> = Vec::new();
    for front in fronts {
        if selected.len() + front.len() <= n {
            selected.extend(front);
            if selected.len() == n {
                break;
            }
        } else {
            last = front;
            break;
        }
    }
    if selected.len() < n && !last.is_empty() {
        let chosen = niching(rng, &merged, &selected, &last, n - selected.len(), refdirs);
        selected.extend(chosen);
    }
    let mut keep = vec![false; merged.len()];
    for i in selected {
        keep[i] = true;
    }
    merged
        .into_iter()
        .zip(keep)
        .filter_map(|(ind, k)| k.then_some(ind))
        .collect()
}

/// Ideal point and per-axis intercepts of the hyperplane through the
/// extreme points of `members`.
fn normalization(pop: &[Individual], members: &[usize], m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut ideal = vec![f64::INFINITY; m];
    for ind in pop {
        for (k, &v) in ind.objectives.iter().enumerate() {
            ideal[k] = ideal[k].min(v);
        }
    }
    let translated = |i: usize| -> Vec<f64> {
        pop[i].objectives.iter().zip(&ideal).map(|(v, z)| v - z).collect()
    };
    let extremes: Vec<Vec<f64>> = (0..m)
        .map(|axis| {
            let best = members
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    let asf = |i: usize| {
                        translated(i)
                            .iter()
                            .enumerate()
                            .map(|(k, &v)| v / if k == axis { 1.0 } else { EXTREME_EPS })
                            .fold(f64::NEG_INFINITY, f64::max)
                    };
                    asf(a).total_cmp(&asf(b))
                })
                .expect("members is nonempty");
            translated(best)
        })
        .collect();

    let fallback = || -> Vec<f64> {
        (0..m)
            .map(|k| {
                let max = members
                    .iter()
                    .map(|&i| pop[i].objectives[k] - ideal[k])
                    .fold(0.0, f64::max);
                if max > 1e-10 {
                    max
                } else {
                    1.0
                }
            })
            .collect()
    };
    let intercepts = match solve_linear(extremes, vec![1.0; m]) {
        Some(plane) => {
            let icp: Vec<f64> = plane.iter().map(|&b| 1.0 / b).collect();
            if icp.iter().all(|&a| a.is_finite() && a > 1e-6) {
                icp
            } else {
                fallback()
            }
        }
        None => fallback(),
    };
    (ideal, intercepts)
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = ((row + 1)..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn perpendicular_distance(point: &[f64], dir: &[f64]) -> f64 {
    let norm2: f64 = dir.iter().map(|d| d * d).sum();
    let proj = point.iter().zip(dir).map(|(p, d)| p * d).sum::<f64>() / norm2;
    point
        .iter()
        .zip(dir)
        .map(|(p, d)| (p - proj * d).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn niching(
    rng: &mut ChaCha8Rng,
    pop: &[Individual],
    selected: &[usize],
    last: &[usize],
    remaining: usize,
    refdirs: &ReferenceDirections,
) -> Vec<usize> {
    let m = refdirs.m;
    let members: Vec<usize> = selected.iter().chain(last).copied().collect();
    let (ideal, intercepts) = normalization(pop, &members, m);
    let associate = |i: usize| -> (usize, f64) {
        let p: Vec<f64> = pop[i]
            .objectives
            .iter()
            .zip(&ideal)
            .zip(&intercepts)
            .map(|((v, z), a)| (v - z) / a)
            .collect();
        refdirs
            .dirs
            .iter()
            .enumerate()
            .map(|(j, d)| (j, perpendicular_distance(&p, d)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("reference directions are nonempty")
    };

    let mut niche_count = vec![0usize; refdirs.len()];
    for &i in selected {
        niche_count[associate(i).0] += 1;
    }
    let mut pools: Vec<Vec<(usize, f64)>> = vec![Vec::new(); refdirs.len()];
    for &i in last {
        let (j, d) = associate(i);
        pools[j].push((i, d));
    }

    let mut chosen = Vec::with_capacity(remaining);
    while chosen.len() < remaining {
        let min_count = (0..refdirs.len())
            .filter(|&j| !pools[j].is_empty())
            .map(|j| niche_count[j])
            .min()
            .expect("last front holds enough members");
        let ties: Vec<usize> = (0..refdirs.len())
            .filter(|&j| !pools[j].is_empty() && niche_count[j] == min_count)
            .collect();
        let j = *ties.choose(rng).expect("nonempty");
        let pick = if niche_count[j] == 0 {
            pools[j]
                .iter()
                .enumerate()
                .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
                .map(|(k, _)| k)
                .expect("nonempty")
        } else {
            rng.random_range(0..pools[j].len())
        };
        let (idx, _) = pools[j].swap_remove(pick);
        chosen.push(idx);
        niche_count[j] += 1;
    }
    chosen
}

fn stats(generation: usize, pop: &[Individual]) -> GenerationStats {
    let n = pop.len().max(1) as f64;
    let best_cv = pop.iter().map(|i| i.cv).fold(f64::INFINITY, f64::min);
    let mean_cv = pop.iter().map(|i| i.cv).sum::<f64>() / n;
    let feasible: Vec<&Individual> = pop.iter().filter(|i| i.feasible()).collect();
    let feasible_fraction = feasible.len() as f64 / n;
    let hv_proxy = if feasible.is_empty() {
        0.0
    } else {
        let m = feasible[0].objectives.len();
        let lo: Vec<f64> = (0..m)
            .map(|k| feasible.iter().map(|i| i.objectives[k]).fold(f64::INFINITY, f64::min))
            .collect();
        let hi: Vec<f64> = (0..m)
            .map(|k| feasible.iter().map(|i| i.objectives[k]).fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let front0 = &nondominated_sort(pop)[0];
        front0
            .iter()
            .map(|&i| {
                pop[i]
                    .objectives
                    .iter()
                    .enumerate()
                    .map(|(k, &v)| {
                        let span = hi[k] - lo[k];
                        if span > 0.0 {
                            1.0 - (v - lo[k]) / span
                        } else {
                            1.0
                        }
                    })
                    .product::<f64>()
            })
            .sum::<f64>()
            / front0.len() as f64
    };
    GenerationStats {
        generation,
        best_cv,
        mean_cv,
        feasible_fraction,
        hv_proxy,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moo::{dominates, riesz_refdirs, Evaluation};

    struct Schaffer;
    impl Problem for Schaffer {
        fn n_obj(&self) -> usize {
            2
        }
        fn lower_bounds(&self) -> &[f64] {
            &[-2.0]
        }
        fn upper_bounds(&self) -> &[f64] {
            &[4.0]
        }
        fn evaluate(&self, g: &[f64]) -> Result<Evaluation, String> {
            let x = g[0];
            Ok(Evaluation {
                objectives: vec![x * x, (x - 2.0) * (x - 2.0)],
                violations: vec![],
            })
        }
    }

    /// Same objectives, but `x` must exceed the upper bound: never feasible.
    struct Impossible;
    impl Problem for Impossible {
        fn n_obj(&self) -> usize {
            2
        }
        fn lower_bounds(&self) -> &[f64] {
            &[-2.0]
        }
        fn upper_bounds(&self) -> &[f64] {
            &[4.0]
        }
        fn evaluate(&self, g: &[f64]) -> Result<Evaluation, String> {
            let x = g[0];
            Ok(Evaluation {
                objectives: vec![x * x, (x - 2.0) * (x - 2.0)],
                violations: vec![5.0 - x],
            })
        }
    }

    struct Single;
    impl Problem for Single {
        fn n_obj(&self) -> usize {
            1
        }
        fn lower_bounds(&self) -> &[f64] {
            &[0.0]
        }
        fn upper_bounds(&self) -> &[f64] {
            &[1.0]
        }
        fn evaluate(&self, g: &[f64]) -> Result<Evaluation, String> {
            Ok(Evaluation { objectives: vec![g[0]], violations: vec![] })
        }
    }

    struct Failing;
    impl Problem for Failing {
        fn n_obj(&self) -> usize {
            2
        }
        fn lower_bounds(&self) -> &[f64] {
            &[0.0]
        }
        fn upper_bounds(&self) -> &[f64] {
            &[1.0]
        }
        fn evaluate(&self, g: &[f64]) -> Result<Evaluation, String> {
            if g[0] > 0.999 {
                return Err("boom".into());
            }
            Ok(Evaluation { objectives: vec![g[0], 1.0 - g[0]], violations: vec![] })
        }
    }

    fn small() -> SolverParams {
        SolverParams { population: 20, generations: 10, ..SolverParams::default() }
    }

    #[test]
    fn output_is_mutually_nondominated() {
        let dirs = riesz_refdirs(2, 20, 1).unwrap();
        let front = nsga3_run(&Schaffer, &small(), &dirs).unwrap();
        assert!(!front.individuals.is_empty());
        for a in &front.individuals {
            for b in &front.individuals {
                assert!(!dominates(a, b).unwrap());
            }
        }
        assert_eq!(front.generation_log.len(), 11);
    }

    #[test]
    fn infeasible_problem_returns_min_cv() {
        let dirs = riesz_refdirs(2, 20, 1).unwrap();
        let front = nsga3_run(&Impossible, &small(), &dirs).unwrap();
        assert!(front.individuals.iter().all(|i| !i.feasible()));
        let cv = front.individuals[0].cv;
        assert!(front.individuals.iter().all(|i| i.cv == cv));
        assert!((cv - 1.0).abs() < 0.05, "cv {cv}");
    }

    #[test]
    fn single_objective_rejected() {
        let dirs = riesz_refdirs(2, 4, 1).unwrap();
        assert!(matches!(nsga3_run(&Single, &small(), &dirs), Err(MooError::Domain(_))));
    }

    #[test]
    fn arity_mismatch_rejected() {
        let dirs = riesz_refdirs(3, 4, 1).unwrap();
        assert!(nsga3_run(&Schaffer, &small(), &dirs).is_err());
    }

    #[test]
    fn bad_population_rejected() {
        let dirs = riesz_refdirs(2, 4, 1).unwrap();
        let p = SolverParams { population: 10, ..small() };
        assert!(nsga3_run(&Schaffer, &p, &dirs).is_err());
    }

    #[test]
    fn evaluation_failure_reports_generation() {
        let dirs = riesz_refdirs(2, 20, 1).unwrap();
        let p = SolverParams { population: 100, generations: 40, ..SolverParams::default() };
        match nsga3_run(&Failing, &p, &dirs) {
            Err(MooError::Evaluation { message, .. }) => assert_eq!(message, "boom"),
            other => panic!("expected evaluation error, got {other:?}"),
        }
    }

    #[test]
    fn thread_count_does_not_change_result() {
        let dirs = riesz_refdirs(2, 20, 1).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| nsga3_run(&Schaffer, &small(), &dirs).unwrap());
        let b = four.install(|| nsga3_run(&Schaffer, &small(), &dirs).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn linear_solver() {
        let x = solve_linear(vec![vec![2.0, 0.0], vec![0.0, 4.0]], vec![1.0, 1.0]).unwrap();
        assert_eq!(x, vec![0.5, 0.25]);
        assert!(solve_linear(vec![vec![1.0, 1.0], vec![1.0, 1.0]], vec![1.0, 1.0]).is_none());
    }
}
