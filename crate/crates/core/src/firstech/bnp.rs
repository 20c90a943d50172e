//! Branch-and-price over vessel tours: set partitioning master solved by
//! column generation, arc-flow branching first, then class-group branching.

use std::collections::HashSet;
use std::time::Instant;

use super::lp::{self, Lp, Sense};
use super::pricing::{price, simulate, Group, Restrictions, Tour};
use super::FirstechError;
use crate::model::Instance;

#[derive(Debug, Clone, PartialEq)]
pub struct BnpParams {
    pub node_limit: usize,
    pub deadline: Option<Instant>,
    pub columns_per_round: usize,
    pub label_budget: usize,
}

impl Default for BnpParams {
    fn default() -> Self {
        Self { node_limit: 200, deadline: None, columns_per_round: 20, label_budget: 200_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BnpResult {
    pub tours: Vec<Tour>,
    pub cost: f64,
    pub root_bound: f64,
    /// True when the tree was explored completely with exact pricing.
    pub optimal: bool,
    pub nodes: usize,
}

struct Master<'a> {
    inst: &'a Instance,
    groups: &'a [Group],
    pool: Vec<Tour>,
    keys: HashSet<(usize, Vec<usize>)>,
    big_m: f64,
}

struct NodeLp {
    value: f64,
    /// (pool index, value) of positive columns.
    support: Vec<(usize, f64)>,
    exact: bool,
}

impl Master<'_> {
    fn add(&mut self, tour: Tour) -> bool {
        if self.keys.insert((tour.class, tour.groups.clone())) {
            self.pool.push(tour);
            true
        } else {
            false
        }
    }

    /// Column generation under `restr`; `None` when the node is infeasible.
    fn solve_node(&mut self, restr: &Restrictions, params: &BnpParams) -> Result<Option<NodeLp>, FirstechError> {
        let ng = self.groups.len();
        let nk = self.inst.vessels.len();
        let mut exact = true;
        let mut last = f64::INFINITY;
        loop {
            let mut lp = Lp::new();
            for _ in 0..ng {
                lp.add_row(Sense::Eq, 1.0);
            }
            for k in 0..nk {
                lp.add_row(Sense::Le, self.inst.vessels[k].count as f64);
            }
            for g in 0..ng {
                lp.add_col(self.big_m, vec![(g, 1.0)]);
            }
            let active: Vec<usize> = (0..self.pool.len()).filter(|&i| restr.admits(&self.pool[i])).collect();
            for &i in &active {
                let t = &self.pool[i];
                let mut e: Vec<(usize, f64)> = t.groups.iter().map(|&g| (g, 1.0)).collect();
                e.push((ng + t.class, 1.0));
                lp.add_col(t.cost, e);
            }
            let sol = lp::solve(&lp)?;
            debug_assert!(sol.objective <= last + 1e-6);
            last = sol.objective;
            let mut added = false;
            for k in 0..nk {
                if self.inst.vessels[k].count == 0 {
                    continue;
                }
                let res = price(
                    self.inst,
                    self.groups,
                    k,
                    &sol.duals[..ng],
                    sol.duals[ng + k],
                    restr,
                    params.columns_per_round,
                    params.label_budget,
                );
                exact &= res.exact;
                for p in res.columns {
                    added |= self.add(p.tour);
                }
            }
            if !added {
                let art: f64 = sol.x[..ng].iter().sum();
                if art > 1e-6 {
                    return Ok(None);
                }
                let support =
                    active.iter().enumerate().map(|(c, &i)| (i, sol.x[ng + c])).filter(|(_, v)| *v > 1e-9).collect();
                return Ok(Some(NodeLp { value: sol.objective, support, exact }));
            }
            if params.deadline.is_some_and(|d| Instant::now() >= d) {
                let art: f64 = sol.x[..ng].iter().sum();
                if art > 1e-6 {
                    return Ok(None);
                }
                let support =
                    active.iter().enumerate().map(|(c, &i)| (i, sol.x[ng + c])).filter(|(_, v)| *v > 1e-9).collect();
                return Ok(Some(NodeLp { value: sol.objective, support, exact: false }));
            }
        }
    }

    fn arcs(&self, tour: &Tour) -> Vec<(usize, usize)> {
        let nodes: Vec<usize> =
            std::iter::once(0).chain(tour.groups.iter().map(|g| g + 1)).chain(std::iter::once(0)).collect();
        nodes.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

fn fractionality(v: f64) -> f64 {
    (v - v.round()).abs()
}

/// Solves the vessel routing problem over `groups` exactly when the budgets allow.
pub fn branch_and_price(inst: &Instance, groups: &[Group], params: &BnpParams) -> Result<BnpResult, FirstechError> {
    let ng = groups.len();
    if ng == 0 {
        return Ok(BnpResult { tours: vec![], cost: 0.0, root_bound: 0.0, optimal: true, nodes: 0 });
    }
    let max_arc: f64 = inst.cost_first.iter().flat_map(|m| m.to_rows().into_iter().flatten()).filter(|c| c.is_finite()).fold(0.0, f64::max);
    let mut master =
        Master { inst, groups, pool: Vec::new(), keys: HashSet::new(), big_m: 10.0 * (2.0 * max_arc + 1.0) * (ng as f64 + 1.0) };
    // single-group tours seed the pool
    for g in 0..ng {
        for k in 0..inst.vessels.len() {
            if inst.vessels[k].count > 0 {
                if let Some((cost, _, _)) = simulate(inst, groups, k, &[g]) {
                    master.add(Tour { class: k, groups: vec![g], cost });
                }
            }
        }
    }
    let mut incumbent: Option<(f64, Vec<Tour>)> = super::greedy_tours(inst, groups)
        .ok()
        .map(|tours| (tours.iter().map(|t| t.cost).sum(), tours));
    let mut stack = vec![Restrictions::default()];
    let mut nodes = 0usize;
    let mut root_bound = f64::NEG_INFINITY;
    let mut complete = true;
    while let Some(restr) = stack.pop() {
        if nodes >= params.node_limit || params.deadline.is_some_and(|d| Instant::now() >= d) {
            complete = false;
            break;
        }
        nodes += 1;
        let Some(node) = master.solve_node(&restr, params)? else {
            if nodes == 1 {
                return Err(FirstechError::Infeasible("no vessel plan covers every delivery".into()));
            }
            continue;
        };
        complete &= node.exact;
        if nodes == 1 {
            root_bound = node.value;
        }
        if incumbent.as_ref().is_some_and(|(c, _)| node.value >= c - 1e-6) {
            continue;
        }
        // arc flows over all classes
        let mut flow: std::collections::BTreeMap<(usize, usize), f64> = Default::default();
        let mut class_flow: std::collections::BTreeMap<(usize, usize), f64> = Default::default();
        for &(i, v) in &node.support {
            let t = &master.pool[i];
            for a in master.arcs(t) {
                *flow.entry(a).or_default() += v;
            }
            for &g in &t.groups {
                *class_flow.entry((g, t.class)).or_default() += v;
            }
        }
        let arc = flow
            .iter()
            .filter(|(_, &f)| fractionality(f) > 1e-6)
            .max_by(|a, b| fractionality(*a.1).total_cmp(&fractionality(*b.1)).then(b.0.cmp(a.0)));
        if let Some((&a, _)) = arc {
            let mut forbid = restr.clone();
            forbid.forbidden.push(a);
            let mut force = restr;
            force.forced.push(a);
            stack.push(forbid);
            stack.push(force);
            continue;
        }
        let gc = class_flow
            .iter()
            .filter(|(_, &f)| fractionality(f) > 1e-6)
            .max_by(|a, b| fractionality(*a.1).total_cmp(&fractionality(*b.1)).then(b.0.cmp(a.0)));
        if let Some((&(g, k), _)) = gc {
            let mut not = restr.clone();
            not.class_not.push((g, k));
            let mut only = restr;
            only.class_only.push((g, k));
            stack.push(not);
            stack.push(only);
            continue;
        }
        let tours: Vec<Tour> =
            node.support.iter().filter(|(_, v)| *v > 0.5).map(|&(i, _)| master.pool[i].clone()).collect();
        let cost: f64 = tours.iter().map(|t| t.cost).sum();
        if incumbent.as_ref().is_none_or(|(c, _)| cost < c - 1e-9) {
            incumbent = Some((cost, tours));
        }
    }
    let Some((cost, tours)) = incumbent else {
        return Err(FirstechError::Budget);
    };
    Ok(BnpResult { tours, cost, root_bound, optimal: complete && stack.is_empty(), nodes })
}
