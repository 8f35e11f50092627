use super::{domain, Individual, MooError};

/// Constraint domination: feasibility first, then total violation, then
/// Pareto dominance on the objectives.
pub fn dominates(a: &Individual, b: &Individual) -> Result<bool, MooError> {
    if a.objectives.len() != b.objectives.len() {
        return Err(domain(format!(
            "objective arity mismatch: {} vs {}",
            a.objectives.len(),
            b.objectives.len()
        )));
    }
    Ok(dominates_unchecked(a, b))
}

pub(crate) fn dominates_unchecked(a: &Individual, b: &Individual) -> bool {
    match (a.feasible(), b.feasible()) {
        (true, false) => true,
        (false, true) => false,
        (false, false) => a.cv < b.cv,
        (true, true) => pareto_dominates(&a.objectives, &b.objectives),
    }
}

fn pareto_dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strict = true;
        }
    }
    strict
}

/// Fast non-dominated sorting. Returns fronts as index lists, best first;
/// indices within a front are ascending.
pub fn nondominated_sort(pop: &[Individual]) -> Vec<Vec<usize>> {
    let n = pop.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut counts = vec![0usize; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dominates_unchecked(&pop[i], &pop[j]) {
                dominated_by[i].push(j);
                counts[j] += 1;
            } else if dominates_unchecked(&pop[j], &pop[i]) {
                dominated_by[j].push(i);
                counts[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| counts[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by[i] {
                counts[j] -= 1;
                if counts[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ind(obj: &[f64], cv: f64) -> Individual {
        Individual::from_objectives(obj.to_vec(), cv)
    }

    #[test]
    fn dominance_examples() {
        assert!(dominates(&ind(&[1.0, 1.0], 0.0), &ind(&[2.0, 2.0], 0.0)).unwrap());
        assert!(dominates(&ind(&[5.0, 5.0], 0.0), &ind(&[0.0, 0.0], 0.3)).unwrap());
        let a = ind(&[1.0, 2.0], 0.0);
        let b = ind(&[2.0, 1.0], 0.0);
        assert!(!dominates(&a, &b).unwrap());
        assert!(!dominates(&b, &a).unwrap());
        assert!(dominates(&ind(&[9.0, 9.0], 0.1), &ind(&[0.0, 0.0], 0.2)).unwrap());
        assert!(dominates(&ind(&[1.0], 0.0), &ind(&[1.0, 2.0], 0.0)).is_err());
    }

    #[test]
    fn sort_examples() {
        let pop = vec![ind(&[0.0, 1.0], 0.0), ind(&[1.0, 0.0], 0.0), ind(&[2.0, 2.0], 0.0)];
        assert_eq!(nondominated_sort(&pop), vec![vec![0, 1], vec![2]]);
        let same = vec![ind(&[1.0, 1.0], 0.0); 4];
        assert_eq!(nondominated_sort(&same), vec![vec![0, 1, 2, 3]]);
        let chain = vec![ind(&[2.0, 2.0], 0.0), ind(&[0.0, 0.0], 0.0), ind(&[1.0, 1.0], 0.0)];
        assert_eq!(nondominated_sort(&chain), vec![vec![1], vec![2], vec![0]]);
    }

    fn arb_ind(m: usize) -> impl Strategy<Value = Individual> {
        (prop::collection::vec(0u8..5, m), prop_oneof![Just(0.0), 0.0f64..1.0])
            .prop_map(|(o, cv)| ind(&o.iter().map(|&v| v as f64).collect::<Vec<_>>(), cv))
    }

    proptest! {
        #[test]
        fn irreflexive_and_transitive(a in arb_ind(3), b in arb_ind(3), c in arb_ind(3)) {
            prop_assert!(!dominates(&a, &a).unwrap());
            if dominates(&a, &b).unwrap() && dominates(&b, &c).unwrap() {
                prop_assert!(dominates(&a, &c).unwrap());
            }
        }

        #[test]
        fn feasible_fronts_precede_infeasible(pop in prop::collection::vec(arb_ind(2), 1..30)) {
            let fronts = nondominated_sort(&pop);
            let mut seen_infeasible = false;
            for f in &fronts {
                let any_inf = f.iter().any(|&i| !pop[i].feasible());
                let any_feas = f.iter().any(|&i| pop[i].feasible());
                prop_assert!(!(any_inf && any_feas));
                if any_feas {
                    prop_assert!(!seen_infeasible);
                }
                seen_infeasible |= any_inf;
            }
            let total: usize = fronts.iter().map(Vec::len).sum();
            prop_assert_eq!(total, pop.len());
        }
    }
}
