//! First echelon: demand copies per LEV route and jack, merging per TP, and
//! vessel routing by branch-and-price with a greedy fallback.

pub mod bnp;
pub mod lp;
pub mod merge;
pub mod pricing;

pub use bnp::{branch_and_price, BnpParams, BnpResult};
pub use merge::{merge, Grouping, MergeError, MergeProblem};
pub use pricing::{price, simulate, Group, Restrictions, Tour, Visit};

use std::time::Instant;

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Instance, Solution};

#[derive(Debug, Error)]
pub enum FirstechError {
    #[error("first echelon infeasible: {0}")]
    Infeasible(String),
    #[error("LP failure: {0}")]
    Lp(#[from] lp::LpError),
    #[error("search budget exhausted without a vessel plan")]
    Budget,
    #[error(transparent)]
    Merge(#[from] MergeError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FirstechParams {
    /// Merge bin size as a share of the smallest vessel capacity.
    pub bin_fraction: f64,
    /// Largest window difference inside one merged group (h).
    pub window_tolerance: f64,
    pub merge_budget: usize,
    pub node_limit: usize,
    pub columns_per_round: usize,
    pub label_budget: usize,
    /// Wall-clock budget of one branch-and-price call (s); results then
    /// depend on machine speed.
    pub time_limit: Option<f64>,
}

impl Default for FirstechParams {
    fn default() -> Self {
        Self {
            bin_fraction: 0.25,
            window_tolerance: 2.0,
            merge_budget: 100_000,
            node_limit: 200,
            columns_per_round: 20,
            label_budget: 200_000,
            time_limit: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    /// Index into `Solution::lev_routes`.
    Lev(usize),
    /// Index into `Solution::jacks`.
    Jack(usize),
}

/// Goods one LEV or jack picks up at a TP.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandCopy {
    pub tp: usize,
    pub quantity: f64,
    pub open: f64,
    /// Latest vessel service start that finishes unloading before pick-up.
    pub deadline: f64,
    pub origin: Origin,
}

/// One copy per LEV route and per jack-served point of a second echelon solution.
pub fn aggregate(inst: &Instance, sol: &Solution) -> Vec<DemandCopy> {
    let mut out = Vec::new();
    for (i, r) in sol.lev_routes.iter().enumerate() {
        out.push(DemandCopy {
            tp: r.tp,
            quantity: r.customers.iter().map(|&c| inst.customers[c].demand).sum(),
            open: 0.0,
            deadline: r.tp_start - inst.tps[r.tp].unload_service_time,
            origin: Origin::Lev(i),
        });
    }
    for (i, j) in sol.jacks.iter().enumerate() {
        out.push(DemandCopy {
            tp: j.tp,
            quantity: inst.customers[j.customer].demand,
            open: 0.0,
            deadline: j.tp_start - inst.tps[j.tp].unload_service_time,
            origin: Origin::Jack(i),
        });
    }
    out
}

/// Merged groups plus the copies each one carries.
pub fn merge_copies(
    inst: &Instance,
    copies: &[DemandCopy],
    params: &FirstechParams,
) -> Result<(Vec<Group>, Vec<Vec<usize>>), FirstechError> {
    let min_cap =
        inst.vessels.iter().filter(|v| v.count > 0).map(|v| v.capacity).fold(f64::INFINITY, f64::min);
    let mut groups = Vec::new();
    let mut members = Vec::new();
    let mut tps: Vec<usize> = copies.iter().map(|c| c.tp).collect();
    tps.sort_unstable();
    tps.dedup();
    for t in tps {
        let idx: Vec<usize> = (0..copies.len()).filter(|&i| copies[i].tp == t).collect();
        let largest = idx.iter().map(|&i| copies[i].quantity).fold(0.0, f64::max);
        let p = MergeProblem {
            demands: idx.iter().map(|&i| copies[i].quantity).collect(),
            windows: idx.iter().map(|&i| (copies[i].open, copies[i].deadline)).collect(),
            cap: (params.bin_fraction * min_cap).max(largest),
            tolerance: params.window_tolerance,
        };
        let g = merge(&p, params.merge_budget)?;
        let base = groups.len();
        for b in 0..g.count {
            let inside: Vec<usize> = (0..idx.len()).filter(|&j| g.group[j] == b).map(|j| idx[j]).collect();
            groups.push(Group {
                tp: t,
                quantity: inside.iter().map(|&i| copies[i].quantity).sum(),
                open: inside.iter().map(|&i| copies[i].open).fold(0.0, f64::max),
                deadline: inside.iter().map(|&i| copies[i].deadline).fold(f64::INFINITY, f64::min),
            });
            members.push(inside);
        }
        debug_assert_eq!(groups.len() - base, g.count);
    }
    Ok((groups, members))
}

enum Choice {
    Extend { tour: usize, seq: Vec<usize>, cost: f64 },
    Open { class: usize, cost: f64 },
}

/// Cheapest feasible insertion of groups, tightest deadline first.
pub fn greedy_tours(inst: &Instance, groups: &[Group]) -> Result<Vec<Tour>, FirstechError> {
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.sort_by(|&a, &b| groups[a].deadline.total_cmp(&groups[b].deadline).then(a.cmp(&b)));
    let mut tours: Vec<Tour> = Vec::new();
    let mut used = vec![0usize; inst.vessels.len()];
    for g in order {
        let mut best: Option<(f64, Choice)> = None;
        for (ti, t) in tours.iter().enumerate() {
            for pos in 0..=t.groups.len() {
                let mut seq = t.groups.clone();
                seq.insert(pos, g);
                canonicalize(groups, &mut seq);
                if let Some((c, _, _)) = simulate(inst, groups, t.class, &seq) {
                    if best.as_ref().is_none_or(|b| c - t.cost < b.0) {
                        best = Some((c - t.cost, Choice::Extend { tour: ti, seq, cost: c }));
                    }
                }
            }
        }
        for k in 0..inst.vessels.len() {
            if used[k] >= inst.vessels[k].count {
                continue;
            }
            if let Some((c, _, _)) = simulate(inst, groups, k, &[g]) {
                if best.as_ref().is_none_or(|b| c < b.0) {
                    best = Some((c, Choice::Open { class: k, cost: c }));
                }
            }
        }
        match best {
            Some((_, Choice::Extend { tour, seq, cost })) => {
                tours[tour].groups = seq;
                tours[tour].cost = cost;
            }
            Some((_, Choice::Open { class, cost })) => {
                used[class] += 1;
                tours.push(Tour { class, groups: vec![g], cost });
            }
            None => return Err(FirstechError::Infeasible(format!("no vessel can deliver group at TP {}", groups[g].tp))),
        }
    }
    Ok(tours)
}

/// Sorts runs of co-located groups by index, keeping TP order.
fn canonicalize(groups: &[Group], seq: &mut [usize]) {
    let mut i = 0;
    while i < seq.len() {
        let mut j = i + 1;
        while j < seq.len() && groups[seq[j]].tp == groups[seq[i]].tp {
            j += 1;
        }
        seq[i..j].sort_unstable();
        i = j;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FirstEchelon {
    pub copies: Vec<DemandCopy>,
    pub groups: Vec<Group>,
    /// Copies carried by each group.
    pub members: Vec<Vec<usize>>,
    pub tours: Vec<Tour>,
    pub cost: f64,
    pub lower_bound: Option<f64>,
    pub optimal: bool,
}

fn covers_once(groups: &[Group], tours: &[Tour]) -> bool {
    let mut seen = vec![0usize; groups.len()];
    for t in tours {
        for &g in &t.groups {
            seen[g] += 1;
        }
    }
    seen.iter().all(|&s| s == 1)
}

/// Routes vessels for the second echelon solution `sol`.
pub fn solve_first_echelon(inst: &Instance, sol: &Solution, params: &FirstechParams) -> Result<FirstEchelon, FirstechError> {
    let copies = aggregate(inst, sol);
    let (groups, members) = merge_copies(inst, &copies, params)?;
    let bp = BnpParams {
        node_limit: params.node_limit,
        deadline: params.time_limit.map(|t| Instant::now() + std::time::Duration::from_secs_f64(t.max(0.0))),
        columns_per_round: params.columns_per_round,
        label_budget: params.label_budget,
    };
    let (tours, lower_bound, optimal) = match branch_and_price(inst, &groups, &bp) {
        Ok(r) if covers_once(&groups, &r.tours) => {
            debug!("branch-and-price: {} nodes, cost {:.4}, root bound {:.4}", r.nodes, r.cost, r.root_bound);
            (r.tours, Some(r.root_bound), r.optimal)
        }
        Ok(_) => {
            warn!("branch-and-price returned an inconsistent cover; using greedy vessel routes");
            (greedy_tours(inst, &groups)?, None, false)
        }
        Err(FirstechError::Infeasible(m)) => return Err(FirstechError::Infeasible(m)),
        Err(e) => {
            warn!("branch-and-price failed ({e}); using greedy vessel routes");
            (greedy_tours(inst, &groups)?, None, false)
        }
    };
    let cost = tours.iter().map(|t| t.cost).sum();
    Ok(FirstEchelon { copies, groups, members, tours, cost, lower_bound, optimal })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{Ctx, Plan};
    use crate::model::fixtures::line_instance;

    #[test]
    fn copies_conserve_demand() {
        let inst = line_instance(&[(1.0, 0.3), (2.0, 0.4), (0.01, 0.2), (-1.0, 0.5)]);
        let ctx = Ctx::new(&inst);
        let mut plan = Plan::new(&ctx, vec![true]);
        plan.add_route(&ctx, 0, 0, vec![0, 1]);
        plan.add_route(&ctx, 0, 0, vec![3]);
        let sol = plan.to_solution(&ctx);
        let copies = aggregate(&inst, &sol);
        assert_eq!(copies.len(), 3);
        assert!((copies[0].quantity - 0.7).abs() < 1e-12);
        let total: f64 = copies.iter().map(|c| c.quantity).sum();
        assert!((total - inst.total_demand()).abs() < 1e-12);
    }

    #[test]
    fn single_group_single_tour() {
        let inst = line_instance(&[(1.0, 0.3)]);
        let groups = vec![Group { tp: 0, quantity: 0.3, open: 0.0, deadline: 10.0 }];
        let r = branch_and_price(&inst, &groups, &BnpParams::default()).unwrap();
        assert_eq!(r.tours.len(), 1);
        assert!((r.cost - inst.vessel_round_trip(0)).abs() < 1e-9);
        assert!(r.optimal);
    }
}
