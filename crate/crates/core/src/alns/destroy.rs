//! Removal operators.

use rand::seq::SliceRandom;
use rand::Rng;

use super::SearchParams;
use crate::construct::{acut, rank_roulette};
use crate::eval::{Ctx, Loc, Plan};
use crate::model::Instance;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DestroyKind {
    Random,
    Worst,
    Shaw,
    RandomRoute,
    InefficientRoute,
    TpRemoval,
    TpOpening,
    TpSwap,
}

impl DestroyKind {
    pub const ALL: [DestroyKind; 8] = [
        DestroyKind::Random,
        DestroyKind::Worst,
        DestroyKind::Shaw,
        DestroyKind::RandomRoute,
        DestroyKind::InefficientRoute,
        DestroyKind::TpRemoval,
        DestroyKind::TpOpening,
        DestroyKind::TpSwap,
    ];

    pub fn is_tp_operator(self) -> bool {
        matches!(self, DestroyKind::TpRemoval | DestroyKind::TpOpening | DestroyKind::TpSwap)
    }

    pub fn name(self) -> &'static str {
        match self {
            DestroyKind::Random => "random",
            DestroyKind::Worst => "worst",
            DestroyKind::Shaw => "shaw",
            DestroyKind::RandomRoute => "random-route",
            DestroyKind::InefficientRoute => "inefficient-route",
            DestroyKind::TpRemoval => "tp-removal",
            DestroyKind::TpOpening => "tp-opening",
            DestroyKind::TpSwap => "tp-swap",
        }
    }
}

/// Normalizers of the relatedness measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShawScale {
    pub max_dist: f64,
    pub demand_range: f64,
    pub open_range: f64,
}

impl ShawScale {
    pub fn new(inst: &Instance) -> Self {
        let n = inst.customers.len();
        let mut max_dist: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                max_dist = max_dist.max(inst.dist_second.get(inst.v2_customer(i), inst.v2_customer(j)));
            }
        }
        let range = |f: &dyn Fn(usize) -> f64| {
            let (lo, hi) = (0..n).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| (lo.min(f(c)), hi.max(f(c))));
            if n == 0 {
                0.0
            } else {
                hi - lo
            }
        };
        Self {
            max_dist,
            demand_range: range(&|c| inst.customers[c].demand),
            open_range: range(&|c| inst.customers[c].window.open),
        }
    }
}

/// Weighted distance, demand and opening-time dissimilarity; degenerate ranges contribute 0.
pub fn shaw_relatedness(inst: &Instance, scale: &ShawScale, i: usize, j: usize, w: &[f64; 3]) -> f64 {
    let term = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    let (a, b) = (&inst.customers[i], &inst.customers[j]);
    w[0] * term(inst.dist_second.get(inst.v2_customer(i), inst.v2_customer(j)), scale.max_dist)
        + w[1] * term((a.demand - b.demand).abs(), scale.demand_range)
        + w[2] * term((a.window.open - b.window.open).abs(), scale.open_range)
}

fn routed(plan: &Plan) -> Vec<usize> {
    (0..plan.loc.len()).filter(|&c| matches!(plan.loc[c], Loc::Route(..))).collect()
}

fn remove_random<R: Rng>(ctx: &Ctx, plan: &mut Plan, g: usize, rng: &mut R) {
    let mut cands = routed(plan);
    cands.shuffle(rng);
    for c in cands.into_iter().take(g) {
        plan.remove(ctx, c);
    }
}

/// Cost saved by pooling `c`, penalties and TP terms included.
fn removal_gain(ctx: &Ctx, plan: &Plan, c: usize, w: &[f64; 4]) -> f64 {
    let Loc::Route(r, i) = plan.loc[c] else { return 0.0 };
    let route = &plan.routes[r];
    let dem = ctx.inst.customers[c].demand;
    let tp = plan.load_delta(ctx, &[(route.tp, -dem)], w);
    -(route.remove_delta(ctx, i).penalized(w) + tp)
}

fn remove_worst<R: Rng>(ctx: &Ctx, plan: &mut Plan, g: usize, rcl: usize, w: &[f64; 4], rng: &mut R) {
    for _ in 0..g {
        let mut cands: Vec<(f64, usize)> = routed(plan).into_iter().map(|c| (removal_gain(ctx, plan, c, w), c)).collect();
        if cands.is_empty() {
            return;
        }
        cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        cands.truncate(rcl.max(1));
        let c = cands[rank_roulette(cands.len(), rng)].1;
        plan.remove(ctx, c);
    }
}

fn remove_shaw<R: Rng>(
    ctx: &Ctx,
    plan: &mut Plan,
    g: usize,
    params: &SearchParams,
    scale: &ShawScale,
    rng: &mut R,
) {
    let mut left = routed(plan);
    if left.is_empty() {
        return;
    }
    let seed = left.swap_remove(rng.gen_range(0..left.len()));
    let mut removed = vec![seed];
    plan.remove(ctx, seed);
    while removed.len() < g && !left.is_empty() {
        let r = removed[rng.gen_range(0..removed.len())];
        let mut ranked: Vec<(f64, usize)> = left
            .iter()
            .map(|&c| (shaw_relatedness(ctx.inst, scale, r, c, &params.shaw_weights), c))
            .collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        ranked.truncate(params.rcl_size.max(1));
        let c = ranked[rank_roulette(ranked.len(), rng)].1;
        left.retain(|&x| x != c);
        plan.remove(ctx, c);
        removed.push(c);
    }
}

fn removed_count(plan: &Plan, before: usize) -> usize {
    plan.pool().len().saturating_sub(before)
}

fn remove_routes<R: Rng>(ctx: &Ctx, plan: &mut Plan, g: usize, inefficient: bool, rng: &mut R) {
    let before = plan.pool().len();
    while removed_count(plan, before) < g && !plan.routes.is_empty() {
        let r = if inefficient {
            (0..plan.routes.len())
                .max_by(|&a, &b| {
                    let fa = acut(plan.routes[a].eval.cost, plan.routes[a].eval.load);
                    let fb = acut(plan.routes[b].eval.cost, plan.routes[b].eval.load);
                    fa.total_cmp(&fb).then(b.cmp(&a))
                })
                .unwrap()
        } else {
            rng.gen_range(0..plan.routes.len())
        };
        plan.remove_route(r);
    }
    let _ = ctx;
}

fn closed_reachable(ctx: &Ctx, plan: &Plan) -> Vec<usize> {
    (0..plan.open.len()).filter(|&t| !plan.open[t] && ctx.inst.tp_reachable(t)).collect()
}

fn tp_dist(inst: &Instance, a: usize, b: usize) -> f64 {
    inst.dist_second.get(inst.v2_tp(a), inst.v2_tp(b))
}

/// Closes `t` and opens one of the `rcl` closed TPs nearest to it.
fn swap_tp<R: Rng>(ctx: &Ctx, plan: &mut Plan, t: usize, rcl: usize, rng: &mut R) {
    let mut cands = closed_reachable(ctx, plan);
    if cands.is_empty() {
        return;
    }
    cands.sort_by(|&a, &b| tp_dist(ctx.inst, t, a).total_cmp(&tp_dist(ctx.inst, t, b)).then(a.cmp(&b)));
    cands.truncate(rcl.max(1));
    let open = cands[rank_roulette(cands.len(), rng)];
    plan.set_open(ctx, open, true);
    plan.set_open(ctx, t, false);
}

fn random_open<R: Rng>(plan: &Plan, rng: &mut R) -> Option<usize> {
    let open: Vec<usize> = plan.open_tps().collect();
    (!open.is_empty()).then(|| open[rng.gen_range(0..open.len())])
}

/// Applies a removal operator; at least `g` LEV-served points end up pooled
/// unless fewer are routed.
#[allow(clippy::too_many_arguments)]
pub fn destroy<R: Rng>(
    kind: DestroyKind,
    ctx: &Ctx,
    plan: &mut Plan,
    g: usize,
    params: &SearchParams,
    scale: &ShawScale,
    w: &[f64; 4],
    rng: &mut R,
) {
    let before = plan.pool().len();
    match kind {
        DestroyKind::Random => remove_random(ctx, plan, g, rng),
        DestroyKind::Worst => remove_worst(ctx, plan, g, params.rcl_size, w, rng),
        DestroyKind::Shaw => remove_shaw(ctx, plan, g, params, scale, rng),
        DestroyKind::RandomRoute => remove_routes(ctx, plan, g, false, rng),
        DestroyKind::InefficientRoute => remove_routes(ctx, plan, g, true, rng),
        DestroyKind::TpRemoval => {
            if let Some(t) = random_open(plan, rng) {
                if plan.n_open() <= 1 {
                    swap_tp(ctx, plan, t, params.rcl_size, rng);
                } else {
                    plan.set_open(ctx, t, false);
                    let others: Vec<usize> =
                        (0..plan.open.len()).filter(|&o| o != t && ctx.inst.tp_reachable(o)).collect();
                    let o = others[rng.gen_range(0..others.len())];
                    if !plan.open[o] {
                        plan.set_open(ctx, o, true);
                    }
                }
            }
        }
        DestroyKind::TpOpening => {
            let closed = closed_reachable(ctx, plan);
            if !closed.is_empty() {
                let t = closed[rng.gen_range(0..closed.len())];
                plan.set_open(ctx, t, true);
                let mut near = routed(plan);
                near.sort_by(|&a, &b| {
                    ctx.inst.tp_customer_dist(t, a).total_cmp(&ctx.inst.tp_customer_dist(t, b)).then(a.cmp(&b))
                });
                for c in near.into_iter().take(g) {
                    plan.remove(ctx, c);
                }
            }
        }
        DestroyKind::TpSwap => {
            if let Some(t) = random_open(plan, rng) {
                swap_tp(ctx, plan, t, params.rcl_size, rng);
            }
        }
    }
    let done = removed_count(plan, before);
    if done < g {
        remove_random(ctx, plan, g - done, rng);
    }
    plan.drop_empty_routes();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::line_instance;

    #[test]
    fn identical_points_are_fully_related() {
        let inst = line_instance(&[(1.0, 0.5), (1.0, 0.5), (3.0, 0.9)]);
        let scale = ShawScale::new(&inst);
        assert_eq!(shaw_relatedness(&inst, &scale, 0, 1, &[6.0, 4.0, 5.0]), 0.0);
    }

    #[test]
    fn extreme_pair_scores_weight_sum() {
        let mut inst = line_instance(&[(0.5, 0.2), (2.5, 0.9)]);
        inst.customers[1].window.open = 3.0;
        let scale = ShawScale::new(&inst);
        assert!((shaw_relatedness(&inst, &scale, 0, 1, &[6.0, 4.0, 5.0]) - 15.0).abs() < 1e-12);
    }
}
