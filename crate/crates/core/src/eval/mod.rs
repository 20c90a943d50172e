//! Generalized (penalized) cost and adaptive penalty weights.

mod plan;
mod seg;

pub use plan::{eval_sequence, jack_start, Ctx, Delta, Loc, Plan, Route, RouteEval, UNSERVED_PENALTY};
pub use seg::{Arcs, Seg};

use serde::{Deserialize, Serialize};

use crate::model::{validate, Family, Instance, Solution};

/// Penalized constraint families, in weight order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Term {
    VehicleCapacity = 0,
    TpCapacity = 1,
    TimeWindow = 2,
    Distance = 3,
}

/// Violation magnitudes of the four penalized families.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Violations(pub [f64; 4]);

impl Violations {
    pub fn flags(&self) -> [bool; 4] {
        self.0.map(|v| v > crate::model::TOL)
    }

    pub fn any(&self) -> bool {
        self.flags().iter().any(|&f| f)
    }

    pub fn weighted(&self, weights: &[f64; 4]) -> f64 {
        self.0.iter().zip(weights).map(|(v, w)| v * w).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PenaltyParams {
    pub initial: f64,
    pub min: f64,
    pub max: f64,
    pub omega: f64,
    pub period: usize,
    /// Share of the period that counts as "violated often".
    pub threshold_ratio: f64,
}

impl Default for PenaltyParams {
    fn default() -> Self {
        Self { initial: 10.0, min: 0.1, max: 5000.0, omega: 1.2, period: 10, threshold_ratio: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyState {
    pub weights: [f64; 4],
    pub params: PenaltyParams,
    history: Vec<[bool; 4]>,
}

impl PenaltyState {
    pub fn new(params: PenaltyParams) -> Self {
        let w = params.initial.clamp(params.min, params.max);
        Self { weights: [w; 4], params, history: Vec::with_capacity(params.period) }
    }

    pub fn weight(&self, term: Term) -> f64 {
        self.weights[term as usize]
    }

    /// Records which families the current solution violates.
    pub fn record(&mut self, flags: [bool; 4]) {
        if self.history.len() == self.params.period.max(1) {
            self.history.remove(0);
        }
        self.history.push(flags);
    }

    pub fn history_len(&self) -> usize {
        self.history.len()
    }

    /// Multiplies a weight by omega when its family was violated in at least
    /// `ceil(ratio * period)` recorded iterations, divides it otherwise, clamps,
    /// and clears the history.
    pub fn update(&mut self) {
        let p = self.params;
        let threshold = (p.threshold_ratio * p.period as f64).ceil() as usize;
        for i in 0..4 {
            let violated = self.history.iter().filter(|h| h[i]).count();
            let w = if violated >= threshold { self.weights[i] * p.omega } else { self.weights[i] / p.omega };
            self.weights[i] = w.clamp(p.min, p.max);
        }
        self.history.clear();
    }
}

/// Penalized family magnitudes of a complete solution, read off the validator.
pub fn solution_violations(instance: &Instance, solution: &Solution) -> Violations {
    let rep = validate(instance, solution);
    Violations([
        rep.magnitude(Family::VesselCapacity) + rep.magnitude(Family::LevCapacity),
        rep.magnitude(Family::TpCapacity),
        rep.magnitude(Family::TimeWindow),
        rep.magnitude(Family::LevRange),
    ])
}

/// obj + sum of weighted violation magnitudes.
pub fn generalized_cost(instance: &Instance, solution: &Solution, penalties: &PenaltyState) -> f64 {
    let obj = crate::model::total_cost(instance, solution).unwrap_or(f64::INFINITY);
    obj + solution_violations(instance, solution).weighted(&penalties.weights)
}
