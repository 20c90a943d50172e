//! JSON solution documents.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IoError;
use crate::model::{total_cost, validate, CostBreakdown, Instance, Solution, ViolationReport};
use crate::solve::SolveOutcome;

pub const SOLUTION_FORMAT: &str = "lrp2e-solution/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Feasible,
    NoFeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionDocument {
    pub format: String,
    pub instance: String,
    pub status: Status,
    pub seed: Option<u64>,
    pub total_cost: Option<f64>,
    pub cost: Option<CostBreakdown>,
    /// The feasible solution, or the closest candidate when none was found.
    pub solution: Option<Solution>,
    pub violations: ViolationReport,
    #[serde(default)]
    pub diagnostics: Vec<String>,
}

impl SolutionDocument {
    /// Document for `solution`, validated against `inst`.
    pub fn of_solution(inst: &Instance, solution: &Solution, seed: Option<u64>) -> Self {
        let violations = validate(inst, solution);
        let feasible = violations.is_empty();
        Self {
            format: SOLUTION_FORMAT.into(),
            instance: inst.id.clone(),
            status: if feasible { Status::Feasible } else { Status::NoFeasible },
            seed,
            total_cost: feasible.then(|| solution.cost.total()),
            cost: Some(solution.cost),
            solution: Some(solution.clone()),
            violations,
            diagnostics: Vec::new(),
        }
    }

    pub fn from_outcome(inst: &Instance, out: &SolveOutcome) -> Self {
        match &out.solution {
            Some(sol) => {
                let mut doc = Self::of_solution(inst, sol, Some(out.seed));
                doc.diagnostics = out.diagnostics.clone();
                doc
            }
            None => Self {
                format: SOLUTION_FORMAT.into(),
                instance: inst.id.clone(),
                status: Status::NoFeasible,
                seed: Some(out.seed),
                total_cost: None,
                cost: out.closest.as_ref().map(|s| s.cost),
                solution: out.closest.clone(),
                violations: out.report.clone(),
                diagnostics: out.diagnostics.clone(),
            },
        }
    }

    /// Recomputes the total cost of the carried solution from `inst`.
    pub fn recomputed_cost(&self, inst: &Instance) -> Option<f64> {
        self.solution.as_ref().and_then(|s| total_cost(inst, s).ok())
    }
}

pub fn solution_to_string(doc: &SolutionDocument) -> Result<String, IoError> {
    let mut s = serde_json::to_string_pretty(doc).map_err(|e| IoError::Parse(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn parse_solution_str(text: &str) -> Result<SolutionDocument, IoError> {
    let doc: SolutionDocument = serde_json::from_str(text).map_err(|e| IoError::Parse(e.to_string()))?;
    if doc.format != SOLUTION_FORMAT {
        return Err(IoError::Schema(format!("unsupported solution format '{}'", doc.format)));
    }
    Ok(doc)
}

pub fn write_solution(doc: &SolutionDocument, path: &Path) -> Result<(), IoError> {
    std::fs::write(path, solution_to_string(doc)?).map_err(|e| IoError::io(path, e))
}

pub fn read_solution(path: &Path) -> Result<SolutionDocument, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    parse_solution_str(&text).map_err(|e| e.in_file(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::two_customer_feasible;

    #[test]
    fn feasible_document_round_trips_to_equal_cost() {
        let (inst, sol) = two_customer_feasible();
        let doc = SolutionDocument::of_solution(&inst, &sol, Some(7));
        assert_eq!(doc.status, Status::Feasible);
        let back = parse_solution_str(&solution_to_string(&doc).unwrap()).unwrap();
        assert_eq!(back, doc);
        assert_eq!(back.recomputed_cost(&inst), Some(sol.cost.total()));
    }

    #[test]
    fn infeasible_document_carries_violations() {
        let (mut inst, sol) = two_customer_feasible();
        inst.levs[0].capacity = 0.2;
        let doc = SolutionDocument::of_solution(&inst, &sol, None);
        assert_eq!(doc.status, Status::NoFeasible);
        assert!(!doc.violations.is_empty());
        let back = parse_solution_str(&solution_to_string(&doc).unwrap()).unwrap();
        assert_eq!(back.violations, doc.violations);
    }

    #[test]
    fn wrong_format_is_rejected() {
        let (inst, sol) = two_customer_feasible();
        let mut doc = SolutionDocument::of_solution(&inst, &sol, None);
        doc.format = "other".into();
        let text = solution_to_string(&doc).unwrap();
        assert!(matches!(parse_solution_str(&text), Err(IoError::Schema(_))));
    }
}
