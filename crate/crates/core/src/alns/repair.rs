//! Insertion operators.

use rand::Rng;

use super::SearchParams;
use crate::construct::{acut, apply_slot, grow_route, Slot};
use crate::eval::{eval_sequence, Ctx, Plan};
use crate::model::TOL;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepairKind {
    Greedy,
    Regret,
    Spc,
}

impl RepairKind {
    pub const ALL: [RepairKind; 3] = [RepairKind::Greedy, RepairKind::Regret, RepairKind::Spc];

    pub fn name(self) -> &'static str {
        match self {
            RepairKind::Greedy => "greedy",
            RepairKind::Regret => "regret",
            RepairKind::Spc => "spc",
        }
    }
}

/// The `k` open TPs nearest to `c`.
fn candidate_tps(ctx: &Ctx, plan: &Plan, c: usize, k: usize) -> Vec<usize> {
    let mut open: Vec<usize> = plan.open_tps().collect();
    open.sort_by(|&a, &b| ctx.inst.tp_customer_dist(a, c).total_cmp(&ctx.inst.tp_customer_dist(b, c)).then(a.cmp(&b)));
    open.truncate(k.max(1));
    open
}

/// Best slot per candidate route and per new-route TP, cheapest first.
fn options(
    ctx: &Ctx,
    plan: &Plan,
    c: usize,
    tps: &[usize],
    hard_capacity: bool,
    allow_new: bool,
    w: &[f64; 4],
) -> Vec<(f64, Slot)> {
    let dem = ctx.inst.customers[c].demand;
    let tp_delta = |tp: usize| plan.load_delta(ctx, &[(tp, dem)], w);
    let mut out = Vec::new();
    for (r, route) in plan.routes.iter().enumerate() {
        if !tps.contains(&route.tp) {
            continue;
        }
        if hard_capacity && route.eval.load + dem > ctx.inst.levs[route.class].capacity + TOL {
            continue;
        }
        let extra = tp_delta(route.tp);
        let mut best: Option<(f64, usize)> = None;
        for pos in 0..=route.len() {
            let d = route.insert_delta(ctx, pos, c).penalized(w) + extra;
            if d.is_finite() && best.is_none_or(|(b, _)| d < b) {
                best = Some((d, pos));
            }
        }
        if let Some((d, pos)) = best {
            out.push((d, Slot::Existing { route: r, pos }));
        }
    }
    if allow_new {
        if let Some(class) = plan.new_route_class(ctx) {
            for &tp in tps {
                let e = eval_sequence(ctx, class, ctx.inst.nearest_depot(tp), tp, &[c]);
                let d = e.penalized(w) + tp_delta(tp);
                if d.is_finite() {
                    out.push((d, Slot::New { class, tp }));
                }
            }
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

fn slot_tp(plan: &Plan, slot: Slot) -> usize {
    match slot {
        Slot::Existing { route, .. } => plan.routes[route].tp,
        Slot::New { tp, .. } => tp,
    }
}

fn regret_of(opts: &[(f64, Slot)], k: usize) -> f64 {
    const MISSING: f64 = 1e12;
    let best = opts[0].0;
    (1..k.max(2)).map(|i| opts.get(i).map_or(MISSING, |o| o.0) - best).sum()
}

/// Sequential cheapest (`regret_k == None`) or regret insertion of the pool.
/// Options are cached and refreshed only for points whose candidate TPs saw a change.
fn insert_pool(
    ctx: &Ctx,
    plan: &mut Plan,
    params: &SearchParams,
    regret_k: Option<usize>,
    hard_capacity: bool,
    allow_new: bool,
    w: &[f64; 4],
) {
    let mut pool = plan.pool();
    let mut tps: Vec<Vec<usize>> = pool.iter().map(|&c| candidate_tps(ctx, plan, c, params.insertion_tps)).collect();
    let mut opts: Vec<Vec<(f64, Slot)>> =
        pool.iter().zip(&tps).map(|(&c, t)| options(ctx, plan, c, t, hard_capacity, allow_new, w)).collect();
    while !pool.is_empty() {
        for i in 0..pool.len() {
            // widen to every open TP before giving up on a point
            if opts[i].is_empty() && tps[i].len() < plan.n_open() {
                tps[i] = plan.open_tps().collect();
                opts[i] = options(ctx, plan, pool[i], &tps[i], hard_capacity, allow_new, w);
            }
        }
        let pick = (0..pool.len()).filter(|&i| !opts[i].is_empty()).min_by(|&a, &b| match regret_k {
            None => opts[a][0].0.total_cmp(&opts[b][0].0).then(pool[a].cmp(&pool[b])),
            Some(k) => regret_of(&opts[b], k)
                .total_cmp(&regret_of(&opts[a], k))
                .then(opts[a][0].0.total_cmp(&opts[b][0].0))
                .then(pool[a].cmp(&pool[b])),
        });
        let Some(i) = pick else { return };
        let (c, slot) = (pool.swap_remove(i), opts.swap_remove(i)[0].1);
        tps.swap_remove(i);
        let tp = slot_tp(plan, slot);
        let was_new = matches!(slot, Slot::New { .. });
        apply_slot(ctx, plan, c, slot);
        for j in 0..pool.len() {
            let stale = tps[j].contains(&tp)
                || (was_new && opts[j].iter().any(|(_, s)| matches!(s, Slot::New { .. })));
            if stale {
                opts[j] = options(ctx, plan, pool[j], &tps[j], hard_capacity, allow_new, w);
            }
        }
    }
}

/// Capacity-respecting insertion into existing routes, then semi-parallel
/// route building for what is left, then unrestricted cheapest insertion.
fn spc_repair<R: Rng>(ctx: &Ctx, plan: &mut Plan, params: &SearchParams, w: &[f64; 4], rng: &mut R) {
    insert_pool(ctx, plan, params, None, true, false, w);
    loop {
        let pool = plan.pool();
        let Some(class) = plan.new_route_class(ctx) else { break };
        if pool.is_empty() {
            break;
        }
        let mut best: Option<(f64, usize, Vec<usize>)> = None;
        for tp in plan.open_tps().collect::<Vec<_>>() {
            let allowed: Vec<usize> = pool
                .iter()
                .copied()
                .filter(|&c| candidate_tps(ctx, plan, c, params.insertion_tps).contains(&tp))
                .collect();
            if allowed.is_empty() {
                continue;
            }
            let seq = grow_route(ctx, class, tp, &allowed, params.rcl_size, w, rng);
            if seq.is_empty() {
                continue;
            }
            let e = eval_sequence(ctx, class, ctx.inst.nearest_depot(tp), tp, &seq);
            let score = acut(e.penalized(w), e.load);
            if best.as_ref().is_none_or(|(b, _, _)| score < *b) {
                best = Some((score, tp, seq));
            }
        }
        let Some((_, tp, seq)) = best else { break };
        plan.add_route(ctx, class, tp, seq);
    }
    insert_pool(ctx, plan, params, None, false, true, w);
}

/// Re-inserts every pooled point; points within jack range of an open TP
/// become jack-served first.
pub fn repair<R: Rng>(kind: RepairKind, ctx: &Ctx, plan: &mut Plan, params: &SearchParams, w: &[f64; 4], rng: &mut R) {
    plan.refresh_jacks(ctx);
    match kind {
        RepairKind::Greedy => insert_pool(ctx, plan, params, None, false, true, w),
        RepairKind::Regret => insert_pool(ctx, plan, params, Some(params.regret_k), false, true, w),
        RepairKind::Spc => spc_repair(ctx, plan, params, w, rng),
    }
    // last resort when no vehicle is left for a new route
    if !plan.is_complete() {
        for c in plan.pool() {
            crate::construct::insert_cheapest(ctx, plan, c, w);
        }
    }
}
