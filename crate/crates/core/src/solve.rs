//! Outer loop: ALNS on the second echelon, branch-and-price on the first,
//! combination into a full solution and best tracking.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use log::{debug, info};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alns::{alns_run, RunOptions, SearchParams, TraceRow};
use crate::construct::{initial_plan, random_plan, ConstructError};
use crate::eval::{Ctx, Plan};
use crate::firstech::{simulate, solve_first_echelon, FirstEchelon, FirstechError, FirstechParams, Origin};
use crate::model::{validate, Instance, Solution, VehicleRef, VesselRoute, VesselVisit, ViolationReport};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Construct(#[from] ConstructError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveConfig {
    /// Outer iterations (ALNS + first echelon) per run.
    pub outer_iterations: usize,
    /// Outer iterations without improvement before stopping.
    pub stall_limit: usize,
    /// Clustering for the initial plan and local search inside ALNS.
    pub hybrid: bool,
    /// Wall-clock budget of one run (s).
    pub time_limit: Option<f64>,
    pub search: SearchParams,
    pub firstech: FirstechParams,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            outer_iterations: 50,
            stall_limit: 10,
            hybrid: true,
            time_limit: None,
            search: SearchParams::default(),
            firstech: FirstechParams::default(),
        }
    }
}

impl SolveConfig {
    pub fn check(&self) -> Result<(), SolveError> {
        if self.outer_iterations == 0 || self.stall_limit == 0 {
            return Err(SolveError::Config("outer_iterations and stall_limit must be at least 1".into()));
        }
        if self.time_limit.is_some_and(|t| !(t > 0.0)) {
            return Err(SolveError::Config("time_limit must be positive".into()));
        }
        self.search.check().map_err(SolveError::Config)
    }

    /// Plain variant: random TP opening instead of clustering, no local search.
    pub fn plain(mut self) -> Self {
        self.hybrid = false;
        self.search.local_search = false;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OuterRow {
    pub iteration: usize,
    pub alns_iterations: usize,
    pub second_echelon: Option<f64>,
    pub first_echelon: Option<f64>,
    pub total: Option<f64>,
    pub best: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    /// Best full solution with an empty violation report.
    pub solution: Option<Solution>,
    /// Validator report of `solution`, or of the closest candidate when none was feasible.
    pub report: ViolationReport,
    /// Candidate reported when no feasible solution was found.
    pub closest: Option<Solution>,
    pub diagnostics: Vec<String>,
    pub outer: Vec<OuterRow>,
    /// ALNS trace with iterations numbered across outer iterations.
    pub trace: Vec<TraceRow>,
    pub seed: u64,
    pub elapsed: Duration,
}

impl SolveOutcome {
    pub fn cost(&self) -> Option<f64> {
        self.solution.as_ref().map(|s| s.cost.total())
    }

    pub fn feasible(&self) -> bool {
        self.solution.is_some()
    }
}

/// Joins second echelon `sol` with vessel tours: units, visits, served
/// points and the vessel links of LEVs and jacks.
pub fn combine(inst: &Instance, mut sol: Solution, fe: &FirstEchelon) -> Solution {
    let mut unit = vec![0usize; inst.vessels.len()];
    sol.vessel_routes.clear();
    for tour in &fe.tours {
        let (_, visits, departure) =
            simulate(inst, &fe.groups, tour.class, &tour.groups).expect("first echelon returned an infeasible tour");
        let vessel = VehicleRef { class: tour.class, unit: unit[tour.class] };
        unit[tour.class] += 1;
        let mut out = Vec::with_capacity(visits.len());
        for v in visits {
            let mut served = Vec::new();
            for &g in &v.groups {
                for &m in &fe.members[g] {
                    match fe.copies[m].origin {
                        Origin::Lev(r) => {
                            sol.lev_routes[r].vessel = Some(vessel);
                            served.extend_from_slice(&sol.lev_routes[r].customers);
                        }
                        Origin::Jack(j) => {
                            sol.jacks[j].vessel = Some(vessel);
                            served.push(sol.jacks[j].customer);
                        }
                    }
                }
            }
            served.sort_unstable();
            let quantity = served.iter().map(|&c| inst.customers[c].demand).sum();
            out.push(VesselVisit { tp: v.tp, quantity, arrival: v.arrival, start: v.start, served });
        }
        sol.vessel_routes.push(VesselRoute { vessel, departure, visits: out });
    }
    sol.cost.first_travel = fe.tours.iter().map(|t| t.cost).sum();
    sol
}

/// One run of the outer loop from `seed`.
pub fn solve(inst: &Instance, config: &SolveConfig, seed: u64) -> Result<SolveOutcome, SolveError> {
    solve_until(inst, config, seed, None)
}

fn solve_until(
    inst: &Instance,
    config: &SolveConfig,
    seed: u64,
    deadline: Option<Instant>,
) -> Result<SolveOutcome, SolveError> {
    config.check()?;
    let started = Instant::now();
    let own = config.time_limit.map(|t| started + Duration::from_secs_f64(t));
    let deadline = match (deadline, own) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    let ctx = Ctx::new(inst);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w0 = [config.search.penalties.initial; 4];
    let mut current: Plan = if config.hybrid {
        initial_plan(&ctx, config.search.rcl_size, &w0, &mut rng)?
    } else {
        random_plan(&ctx, config.search.rcl_size, &w0, &mut rng)?
    };

    let mut best: Option<Solution> = None;
    let mut closest: Option<(f64, Solution, ViolationReport)> = None;
    let mut diagnostics = Vec::new();
    let mut outer = Vec::new();
    let mut trace = Vec::new();
    let mut offset = 0usize;
    let mut stall = 0usize;
    let mut evaluated: Vec<(Solution, Option<f64>, Option<f64>)> = Vec::new();
    for it in 1..=config.outer_iterations {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            diagnostics.push(format!("time limit reached after {} outer iterations", it - 1));
            break;
        }
        let opts = RunOptions { deadline, trace: true };
        let out = alns_run(&ctx, current.clone(), &config.search, &opts, &mut rng);
        trace.extend(out.trace.into_iter().map(|mut r| {
            r.iteration += offset;
            r
        }));
        offset += out.iterations;
        let mut row = OuterRow {
            iteration: it,
            alns_iterations: out.iterations,
            second_echelon: None,
            first_echelon: None,
            total: None,
            best: best.as_ref().map(|b| b.cost.total()),
        };
        let Some(plan) = out.best_feasible else {
            diagnostics.push(format!(
                "outer iteration {it}: no feasible second echelon, violations {:?}",
                out.best_violations.0
            ));
            if closest.is_none() {
                let sol = out.best.to_solution(&ctx);
                let rep = validate(inst, &sol);
                closest = Some((f64::INFINITY, sol, rep));
            }
            current = out.best;
            outer.push(row);
            stall += 1;
            if stall >= config.stall_limit {
                break;
            }
            continue;
        };
        let second = plan.to_solution(&ctx);
        row.second_echelon = Some(second.cost.second_travel + second.cost.establishment);
        // an already evaluated second echelon yields the same vessel plan
        if let Some((_, first, total)) = evaluated.iter().find(|(s, _, _)| *s == second) {
            row.first_echelon = *first;
            row.total = *total;
            outer.push(row);
            current = plan;
            stall += 1;
            if stall >= config.stall_limit {
                break;
            }
            continue;
        }
        let key = second.clone();
        let mut fp = config.firstech.clone();
        if let Some(d) = deadline {
            let left = d.saturating_duration_since(Instant::now()).as_secs_f64();
            fp.time_limit = Some(fp.time_limit.map_or(left, |t| t.min(left)));
        }
        let improved = match solve_first_echelon(inst, &second, &fp) {
            Ok(fe) => {
                row.first_echelon = Some(fe.cost);
                let full = combine(inst, second, &fe);
                let total = full.cost.total();
                row.total = Some(total);
                let rep = validate(inst, &full);
                if rep.is_empty() {
                    if best.as_ref().is_none_or(|b| total < b.cost.total() - 1e-9) {
                        debug!("outer iteration {it}: new best {total:.4}");
                        best = Some(full);
                        true
                    } else {
                        false
                    }
                } else {
                    diagnostics.push(format!("outer iteration {it}: combined solution fails {:?}", rep.families()));
                    if closest.as_ref().is_none_or(|(c, _, _)| total < *c) {
                        closest = Some((total, full, rep));
                    }
                    false
                }
            }
            Err(e) => {
                diagnostics.push(format!("outer iteration {it}: {e}"));
                if !matches!(e, FirstechError::Infeasible(_)) || closest.is_none() {
                    let rep = validate(inst, &second);
                    closest = Some((f64::INFINITY, second, rep));
                }
                false
            }
        };
        row.best = best.as_ref().map(|b| b.cost.total());
        evaluated.push((key, row.first_echelon, row.total));
        outer.push(row);
        current = plan;
        if improved {
            stall = 0;
        } else {
            stall += 1;
            if stall >= config.stall_limit {
                break;
            }
        }
    }
    let elapsed = started.elapsed();
    info!(
        "seed {seed}: {} outer iterations, best {:?}, {:.2}s",
        outer.len(),
        best.as_ref().map(|b| b.cost.total()),
        elapsed.as_secs_f64()
    );
    Ok(match best {
        Some(mut s) => {
            s.refresh_cost(inst).expect("combined solution references valid ids");
            let report = validate(inst, &s);
            SolveOutcome { solution: Some(s), report, closest: None, diagnostics, outer, trace, seed, elapsed }
        }
        None => {
            let (closest, report) = match closest {
                Some((_, s, r)) => (Some(s), r),
                None => (None, ViolationReport::default()),
            };
            diagnostics.push("no feasible solution found".into());
            SolveOutcome { solution: None, report, closest, diagnostics, outer, trace, seed, elapsed }
        }
    })
}

/// Independent runs with seeds `seed..seed + runs`, spread over `threads`
/// workers; results come back in seed order. `budget` is shared by all runs.
pub fn solve_runs(
    inst: &Instance,
    config: &SolveConfig,
    seed: u64,
    runs: usize,
    threads: usize,
    budget: Option<f64>,
) -> Result<Vec<SolveOutcome>, SolveError> {
    config.check()?;
    let deadline = budget.map(|b| Instant::now() + Duration::from_secs_f64(b));
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<SolveOutcome, SolveError>>>> =
        Mutex::new((0..runs).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads.clamp(1, runs.max(1)) {
            s.spawn(|| loop {
                let r = next.fetch_add(1, Ordering::SeqCst);
                if r >= runs {
                    break;
                }
                let out = solve_until(inst, config, seed + r as u64, deadline);
                results.lock().unwrap()[r] = Some(out);
            });
        }
    });
    results.into_inner().unwrap().into_iter().map(|r| r.expect("every run finishes")).collect()
}

/// Lowest-cost feasible outcome, ties to the earliest seed.
pub fn best_of(outcomes: &[SolveOutcome]) -> Option<&SolveOutcome> {
    outcomes.iter().filter(|o| o.feasible()).min_by(|a, b| a.cost().unwrap().total_cmp(&b.cost().unwrap()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::generate::{generate_seeded, GenSpec};

    fn quick() -> SolveConfig {
        let mut c = SolveConfig { outer_iterations: 3, stall_limit: 2, ..Default::default() };
        c.search.max_iterations = 150;
        c.search.max_non_improving = 100;
        c
    }

    #[test]
    fn full_mode_solution_is_valid() {
        let inst = generate_seeded(&GenSpec::new(1, 10, 3).unwrap(), 5);
        let out = solve(&inst, &quick(), 1).unwrap();
        let sol = out.solution.expect("feasible");
        assert!(validate(&inst, &sol).is_empty());
        let recomputed = crate::model::total_cost(&inst, &sol).unwrap();
        assert!((recomputed - sol.cost.total()).abs() < 1e-6);
    }

    #[test]
    fn reported_cost_is_best_over_outer_iterations() {
        let inst = generate_seeded(&GenSpec::new(1, 15, 3).unwrap(), 8);
        let out = solve(&inst, &quick(), 3).unwrap();
        let min = out.outer.iter().filter_map(|r| r.total).fold(f64::INFINITY, f64::min);
        assert!((out.cost().unwrap() - min).abs() < 1e-6);
    }

    #[test]
    fn runs_are_seed_ordered_and_repeatable() {
        let inst = generate_seeded(&GenSpec::new(1, 5, 2).unwrap(), 2);
        let a = solve_runs(&inst, &quick(), 10, 3, 2, None).unwrap();
        let b = solve_runs(&inst, &quick(), 10, 3, 1, None).unwrap();
        assert_eq!(a.iter().map(|o| o.seed).collect::<Vec<_>>(), vec![10, 11, 12]);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.solution, y.solution);
        }
    }
}
