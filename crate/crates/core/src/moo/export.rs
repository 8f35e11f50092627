use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Individual, RefDirMethod};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub generations: usize,
    pub population: usize,
    pub refdir_method: RefDirMethod,
    pub n_obj: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportedIndividual {
    pub genome: Vec<f64>,
    pub objectives: Vec<f64>,
    pub violations: Vec<f64>,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoDocument {
    pub metadata: RunMetadata,
    pub individuals: Vec<ExportedIndividual>,
}

impl ParetoDocument {
    pub fn new<'a>(metadata: RunMetadata, individuals: impl IntoIterator<Item = &'a Individual>) -> Self {
        let individuals = individuals
            .into_iter()
            .map(|i| ExportedIndividual {
                genome: i.genome.clone(),
                objectives: i.objectives.clone(),
                violations: i.violations.clone(),
                feasible: i.feasible(),
            })
            .collect();
        Self { metadata, individuals }
    }

    /// One row per individual: `f1..fm, g1..gk, cv`.
    pub fn to_csv(&self) -> String {
        let m = self.individuals.iter().map(|i| i.objectives.len()).max().unwrap_or(self.metadata.n_obj);
        let g = self.individuals.iter().map(|i| i.violations.len()).max().unwrap_or(0);
        let mut header: Vec<String> = (1..=m).map(|i| format!("f{i}")).collect();
        header.extend((1..=g).map(|i| format!("g{i}")));
        header.push("cv".into());
        let mut out = header.join(",");
        out.push('\n');
        for ind in &self.individuals {
            let mut cells: Vec<String> = ind.objectives.iter().map(f64::to_string).collect();
            cells.resize(m, String::new());
            let mut gs: Vec<String> = ind.violations.iter().map(f64::to_string).collect();
            gs.resize(g, String::new());
            cells.extend(gs);
            let cv: f64 = ind.violations.iter().map(|v| v.max(0.0)).sum();
            cells.push(cv.to_string());
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moo::Evaluation;

    #[test]
    fn csv_layout() {
        let a = Individual::new(
            vec![0.1],
            Evaluation { objectives: vec![1.0, 2.0], violations: vec![0.0, 0.5, 0.0] },
        );
        let doc = ParetoDocument::new(
            RunMetadata { seed: 42, generations: 40, population: 100, refdir_method: RefDirMethod::Riesz, n_obj: 2 },
            [&a],
        );
        assert_eq!(doc.to_csv(), "f1,f2,g1,g2,g3,cv\n1,2,0,0.5,0,0.5\n");
        assert!(!doc.individuals[0].feasible);
        let json = serde_json::to_string(&doc).unwrap();
        let back: ParetoDocument = serde_json::from_str(&json).unwrap();
        assert_eq!(back, doc);
    }
}
