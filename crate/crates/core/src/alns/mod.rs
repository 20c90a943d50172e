//! Adaptive large neighborhood search over the second echelon.

mod destroy;
mod local_search;
mod repair;

pub use destroy::{destroy, shaw_relatedness, DestroyKind, ShawScale};
pub use local_search::{local_search, neighbor_lists, Neighborhood};
pub use repair::{repair, RepairKind};

use std::collections::HashSet;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::eval::{Ctx, PenaltyParams, PenaltyState, Plan, Violations};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchParams {
    pub max_iterations: usize,
    pub max_non_improving: usize,
    pub restart_period: usize,
    pub weight_period: usize,
    pub destroy_min: f64,
    pub destroy_max: f64,
    pub rcl_size: usize,
    pub ls_sample: usize,
    pub smoothing: f64,
    pub scores: [f64; 3],
    pub shaw_weights: [f64; 3],
    pub sa_p0: f64,
    pub sa_w0: f64,
    pub sa_cooling: f64,
    pub regret_k: usize,
    /// Open TPs (nearest first) a pooled point may be inserted at.
    pub insertion_tps: usize,
    /// Neighbor list length for inter-route moves.
    pub granular: usize,
    pub local_search: bool,
    pub penalties: PenaltyParams,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            max_non_improving: 250,
            restart_period: 200,
            weight_period: 50,
            destroy_min: 0.05,
            destroy_max: 0.15,
            rcl_size: 5,
            ls_sample: 50,
            smoothing: 0.6,
            scores: [10.0, 5.0, 2.0],
            shaw_weights: [6.0, 4.0, 5.0],
            sa_p0: 0.5,
            sa_w0: 0.05,
            sa_cooling: 0.9975,
            regret_k: 2,
            insertion_tps: 3,
            granular: 12,
            local_search: true,
            penalties: PenaltyParams::default(),
        }
    }
}

impl SearchParams {
    pub fn check(&self) -> Result<(), String> {
        if !(0.0 < self.destroy_min && self.destroy_min <= self.destroy_max && self.destroy_max < 1.0) {
            return Err("destroy fraction range must satisfy 0 < min <= max < 1".into());
        }
        if self.max_non_improving > self.max_iterations {
            return Err("max_non_improving must not exceed max_iterations".into());
        }
        if !(0.0 < self.sa_cooling && self.sa_cooling < 1.0) {
            return Err("sa_cooling must lie in (0, 1)".into());
        }
        if self.rcl_size == 0 || self.restart_period == 0 || self.weight_period == 0 || self.penalties.period == 0 {
            return Err("periods and RCL size must be positive".into());
        }
        Ok(())
    }
}

/// Adaptive roulette weights of a family of operators.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorBook {
    pub weights: Vec<f64>,
    pub scores: Vec<f64>,
    pub uses: Vec<usize>,
}

impl OperatorBook {
    pub fn new(n: usize) -> Self {
        Self { weights: vec![1.0; n], scores: vec![0.0; n], uses: vec![0; n] }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let total: f64 = self.weights.iter().sum();
        self.weights.iter().map(|w| w / total).collect()
    }

    /// Roulette draw restricted to `allowed` operators.
    pub fn select<R: Rng>(&self, allowed: &[bool], rng: &mut R) -> usize {
        let total: f64 = self.weights.iter().zip(allowed).filter(|(_, &a)| a).map(|(w, _)| w).sum();
        let mut x = rng.gen::<f64>() * total;
        let mut last = 0;
        for (i, (&w, &a)) in self.weights.iter().zip(allowed).enumerate() {
            if !a {
                continue;
            }
            last = i;
            if x < w {
                return i;
            }
            x -= w;
        }
        last
    }

    pub fn record(&mut self, op: usize, score: f64) {
        self.uses[op] += 1;
        self.scores[op] += score;
    }

    /// W = theta * score / uses + (1 - theta) * W for used operators; resets counters.
    pub fn update(&mut self, theta: f64) {
        for i in 0..self.weights.len() {
            if self.uses[i] > 0 {
                self.weights[i] = theta * self.scores[i] / self.uses[i] as f64 + (1.0 - theta) * self.weights[i];
                self.weights[i] = self.weights[i].max(1e-6);
            }
            self.scores[i] = 0.0;
            self.uses[i] = 0;
        }
    }
}

/// Simulated annealing acceptance of a cost change `delta` at temperature `t`.
pub fn accept<R: Rng>(delta: f64, t: f64, rng: &mut R) -> bool {
    if delta <= 0.0 {
        return true;
    }
    if t <= 0.0 || !delta.is_finite() {
        return false;
    }
    rng.gen::<f64>() < (-delta / t).exp()
}

/// Temperature at which a deterioration of `w0 * f0` is accepted with probability `p0`.
pub fn initial_temperature(f0: f64, w0: f64, p0: f64) -> f64 {
    let t = w0 * f0.abs() / (1.0 / p0).ln();
    if t.is_finite() && t > 0.0 {
        t
    } else {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub current: f64,
    pub best_feasible: f64,
    pub temperature: f64,
    pub destroy: &'static str,
    pub repair: &'static str,
}

#[derive(Debug, Clone)]
pub struct AlnsOutcome {
    /// Best feasible plan, if any was met.
    pub best_feasible: Option<Plan>,
    /// Best plan by generalized cost at the end of the search.
    pub best: Plan,
    pub best_violations: Violations,
    pub iterations: usize,
    pub restarts: Vec<usize>,
    pub trace: Vec<TraceRow>,
    pub penalties: PenaltyState,
}

/// Options that are not search parameters.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub deadline: Option<Instant>,
    pub trace: bool,
}

fn allowed_destroy(ctx: &Ctx) -> Vec<bool> {
    DestroyKind::ALL.iter().map(|k| !(ctx.inst.relaxed && k.is_tp_operator())).collect()
}

/// Runs the search from `initial` and returns the best plans met.
pub fn alns_run<R: Rng>(
    ctx: &Ctx,
    initial: Plan,
    params: &SearchParams,
    opts: &RunOptions,
    rng: &mut R,
) -> AlnsOutcome {
    let mut pen = PenaltyState::new(params.penalties);
    let scale = ShawScale::new(ctx.inst);
    let knn = local_search::neighbor_lists(ctx.inst, params.granular);
    let mut dbook = OperatorBook::new(DestroyKind::ALL.len());
    let mut rbook = OperatorBook::new(RepairKind::ALL.len());
    let dallowed = allowed_destroy(ctx);
    let rallowed = vec![true; RepairKind::ALL.len()];
    let n = ctx.inst.customers.len();

    let mut current = initial;
    let mut best = current.clone();
    let mut best_feasible = current.is_feasible(ctx).then(|| current.clone());
    let t0 = initial_temperature(current.cost(ctx, &pen.weights), params.sa_w0, params.sa_p0);
    let mut temp = t0;
    let mut seen: HashSet<u64> = HashSet::new();
    seen.insert(current.fingerprint());
    let mut restarts = Vec::new();
    let mut trace = Vec::new();
    let mut last_improvement = 1usize;
    let mut i = 1usize;
    while i <= params.max_iterations && i - last_improvement < params.max_non_improving {
        if opts.deadline.is_some_and(|d| Instant::now() >= d) {
            break;
        }
        let w = pen.weights;
        let d = dbook.select(&dallowed, rng);
        let r = rbook.select(&rallowed, rng);
        let lambda = rng.gen_range(params.destroy_min..=params.destroy_max);
        let g = ((lambda * n as f64).round() as usize).max(1);
        let mut cand = current.clone();
        destroy(DestroyKind::ALL[d], ctx, &mut cand, g, params, &scale, &w, rng);
        repair(RepairKind::ALL[r], ctx, &mut cand, params, &w, rng);
        cand.close_unused(ctx);
        cand.redepot(ctx, &w);
        if params.local_search {
            local_search(ctx, &mut cand, &knn, params.ls_sample, &w, rng);
        }
        let f_cand = cand.cost(ctx, &w);
        let f_cur = current.cost(ctx, &w);
        let fp = cand.fingerprint();
        let fresh = !seen.contains(&fp);
        let mut score = 0.0;
        if f_cand < best.cost(ctx, &w) - 1e-9 {
            score = params.scores[0];
            best = cand.clone();
        } else if fresh && f_cand < f_cur - 1e-9 {
            score = params.scores[1];
        }
        let accepted = accept(f_cand - f_cur, temp, rng);
        if accepted && score == 0.0 && fresh {
            score = params.scores[2];
        }
        if cand.is_feasible(ctx)
            && best_feasible.as_ref().is_none_or(|b| cand.objective(ctx) < b.objective(ctx) - 1e-9)
        {
            best_feasible = Some(cand.clone());
            last_improvement = i;
        }
        pen.record(cand.violations(ctx).flags());
        seen.insert(fp);
        dbook.record(d, score);
        rbook.record(r, score);
        if accepted {
            current = cand;
        }
        if opts.trace {
            trace.push(TraceRow {
                iteration: i,
                current: current.cost(ctx, &pen.weights),
                best_feasible: best_feasible.as_ref().map_or(f64::INFINITY, |b| b.objective(ctx)),
                temperature: temp,
                destroy: DestroyKind::ALL[d].name(),
                repair: RepairKind::ALL[r].name(),
            });
        }
        if i % params.penalties.period == 0 {
            pen.update();
            if let Some(bf) = &best_feasible {
                if !best.is_feasible(ctx) && best.cost(ctx, &pen.weights) > bf.objective(ctx) {
                    best = bf.clone();
                }
            }
        }
        if (i + 1 - last_improvement) % params.restart_period == 0 {
            current = best.clone();
            temp = t0;
            restarts.push(i);
        }
        if i % params.weight_period == 0 {
            dbook.update(params.smoothing);
            rbook.update(params.smoothing);
        }
        temp *= params.sa_cooling;
        i += 1;
    }
    let best_violations = best.violations(ctx);
    AlnsOutcome { best_feasible, best, best_violations, iterations: i - 1, restarts, trace, penalties: pen }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn smoothing_update() {
        let mut b = OperatorBook::new(2);
        b.record(0, 0.5);
        b.update(0.6);
        assert!((b.weights[0] - 0.7).abs() < 1e-12);
        assert_eq!(b.weights[1], 1.0);
        assert_eq!(b.uses, vec![0, 0]);
    }

    #[test]
    fn acceptance_rules() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        assert!(accept(-1.0, 1.0, &mut rng));
        assert!(accept(0.0, 1.0, &mut rng));
        let hits = (0..100_000).filter(|_| accept(2.0, 2.0, &mut rng)).count();
        let rate = hits as f64 / 1e5;
        assert!((rate - (-1.0f64).exp()).abs() < 0.02, "{rate}");
    }

    #[test]
    fn temperature_calibration() {
        let t = initial_temperature(1000.0, 0.05, 0.5);
        assert!(((-50.0 / t).exp() - 0.5).abs() < 1e-12);
    }
}
