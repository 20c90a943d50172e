//! Search-side invariant suites: delta evaluation against straight
//! recomputation, plan bookkeeping after operators, formula replays.

use lrp2e::alns::{
    accept, destroy, local_search, neighbor_lists, repair, shaw_relatedness, DestroyKind, OperatorBook, RepairKind,
    SearchParams, ShawScale,
};
use lrp2e::construct::{acut, initial_plan, random_plan};
use lrp2e::eval::{Ctx, Loc, PenaltyParams, PenaltyState, Plan, Route};
use lrp2e::io::generate::{generate_seeded, GenSpec};
use lrp2e::model::{lev_route_cost, lev_route_distance};
use lrp2e::Instance;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn close(a: f64, b: f64, rel: f64) -> bool {
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    (a - b).abs() <= rel * b.abs().max(1.0)
}

/// Cost, distance, load and time warp of a route by plain forward simulation:
/// leave the TP as early as possible, wait for opening times, and travel
/// back to the closing time when late.
pub fn route_oracle(ctx: &Ctx, class: usize, depot: usize, tp: usize, seq: &[usize]) -> (f64, f64, f64, f64) {
    let inst = ctx.inst;
    let tt = &inst.travel_time_second[class];
    let arcs = ctx.arcs(class);
    let mut cost = lev_route_cost(inst, class, depot, tp, seq);
    let nodes: Vec<usize> = std::iter::once(inst.v2_tp(tp)).chain(seq.iter().map(|&c| inst.v2_customer(c))).collect();
    if nodes.windows(2).any(|w| arcs.masked(w[0], w[1])) {
        cost = f64::INFINITY;
    }
    let reach = tt.get(inst.v2_depot(depot), inst.v2_tp(tp));
    let mut time = ctx.release[tp].max(reach) + inst.tps[tp].load_service_time;
    let mut warp = 0.0;
    let mut prev = inst.v2_tp(tp);
    for &c in seq {
        let p = &inst.customers[c];
        let v = inst.v2_customer(c);
        let mut start = (time + tt.get(prev, v)).max(p.window.open);
        if start > p.window.close {
            warp += start - p.window.close;
            start = p.window.close;
        }
        time = start + p.service_time;
        prev = v;
    }
    let load = seq.iter().map(|&c| inst.customers[c].demand).sum();
    (cost, lev_route_distance(inst, depot, tp, seq), load, warp)
}

pub fn fuzz_instances() -> Vec<Instance> {
    [(1, 25, 3, 1u64), (2, 20, 4, 2), (3, 50, 6, 3)]
        .iter()
        .map(|&(d, c, t, s)| generate_seeded(&GenSpec::new(d, c, t).unwrap(), s))
        .collect()
}

fn starting_plan(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Plan {
    let w = [10.0; 4];
    if rng.gen_bool(0.5) {
        initial_plan(ctx, 3, &w, rng).unwrap()
    } else {
        random_plan(ctx, 3, &w, rng).unwrap()
    }
}

/// `moves` random insertions and removals; each predicted route delta must
/// match the forward simulation of the changed route to relative `1e-9`.
/// Returns the number of moves checked.
pub fn delta_fuzz(moves: usize, seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let insts = fuzz_instances();
    let mut done = 0;
    'outer: loop {
        for inst in &insts {
            let ctx = Ctx::new(inst);
            let mut plan = starting_plan(&ctx, &mut rng);
            for _ in 0..2000 {
                if done >= moves {
                    break 'outer;
                }
                if plan.routes.is_empty() {
                    break;
                }
                let r = rng.gen_range(0..plan.routes.len());
                let route = plan.routes[r].clone();
                let insert = route.len() < 2 || rng.gen_bool(0.5);
                let (delta, seq, moved) = if insert {
                    let pool = plan.pool();
                    let c = if !pool.is_empty() && rng.gen_bool(0.5) {
                        pool[rng.gen_range(0..pool.len())]
                    } else {
                        rng.gen_range(0..inst.customers.len())
                    };
                    if route.seq.contains(&c) {
                        continue;
                    }
                    let pos = rng.gen_range(0..=route.len());
                    let mut seq = route.seq.clone();
                    seq.insert(pos, c);
                    (route.insert_delta(&ctx, pos, c), seq, (c, pos))
                } else {
                    let pos = rng.gen_range(0..route.len());
                    let mut seq = route.seq.clone();
                    let c = seq.remove(pos);
                    (route.remove_delta(&ctx, pos), seq, (c, pos))
                };
                let (cost, dist, load, warp) = route_oracle(&ctx, route.class, route.depot, route.tp, &seq);
                let (c0, d0, _, w0) = route_oracle(&ctx, route.class, route.depot, route.tp, &route.seq);
                let lev = &inst.levs[route.class];
                // from an infinite base only the sign of the cost change is defined
                let cost_ok = match (route.eval.cost.is_finite(), cost.is_finite()) {
                    (true, true) => close(route.eval.cost + delta.obj, cost, 1e-9),
                    (_, false) => delta.obj == f64::INFINITY,
                    (false, true) => delta.obj == f64::NEG_INFINITY,
                };
                let ok = cost_ok
                    && close(c0, route.eval.cost, 1e-9)
                    && close(d0, route.eval.dist, 1e-9)
                    && close(w0, route.eval.warp, 1e-9)
                    && (cost.is_infinite()
                        || close(route.eval.warp + delta.warp, warp, 1e-9)
                            && close(route.eval.dist_excess + delta.dist, (dist - lev.driving_range).max(0.0), 1e-9)
                            && close(route.eval.cap_excess + delta.cap, (load - lev.capacity).max(0.0), 1e-9));
                if !ok {
                    return Err(format!(
                        "{}: route {:?} -> {seq:?}: predicted cost {} warp {}, recomputed cost {cost} warp {warp}",
                        inst.id,
                        route.seq,
                        route.eval.cost + delta.obj,
                        route.eval.warp + delta.warp
                    ));
                }
                done += 1;
                // apply the move so later deltas start from varied routes
                let (c, pos) = moved;
                if !insert {
                    plan.remove(&ctx, c);
                    plan.drop_empty_routes();
                } else if plan.loc[c] == Loc::Pool && cost.is_finite() {
                    plan.insert(&ctx, r, pos, c);
                }
            }
        }
    }
    Ok(done)
}

/// Every cache of `plan` agrees with its routes and jack assignment. With
/// `settled`, a point is jack-served exactly when an open TP lies within
/// jack range; otherwise only the jack TPs are checked.
pub fn check_partition(ctx: &Ctx, plan: &Plan, settled: bool) -> Result<(), String> {
    let inst = ctx.inst;
    let n = inst.customers.len();
    let mut seen = vec![0usize; n];
    for (r, route) in plan.routes.iter().enumerate() {
        if !plan.open[route.tp] {
            return Err(format!("route {r} uses closed TP {}", route.tp));
        }
        for (i, &c) in route.seq.iter().enumerate() {
            seen[c] += 1;
            if plan.loc[c] != Loc::Route(r, i) {
                return Err(format!("point {c} at route {r} pos {i} has loc {:?}", plan.loc[c]));
            }
        }
    }
    let mut load = vec![0.0; inst.tps.len()];
    for c in 0..n {
        match plan.loc[c] {
            Loc::Route(..) => {}
            Loc::Jack(t) => {
                seen[c] += 1;
                load[t] += inst.customers[c].demand;
            }
            Loc::Pool => seen[c] += 1,
        }
        if seen[c] != 1 {
            return Err(format!("point {c} appears {} times", seen[c]));
        }
        let want = ctx.jack_tp(&plan.open, c);
        let is_jack = matches!(plan.loc[c], Loc::Jack(_));
        if is_jack && want.is_none_or(|t| plan.loc[c] != Loc::Jack(t)) || settled && want.is_some() && !is_jack {
            return Err(format!("point {c}: loc {:?} but jack TP {want:?}", plan.loc[c]));
        }
    }
    for route in &plan.routes {
        load[route.tp] += route.seq.iter().map(|&c| inst.customers[c].demand).sum::<f64>();
    }
    for t in 0..load.len() {
        if (load[t] - plan.tp_load[t]).abs() > 1e-9 {
            return Err(format!("TP {t} load cache {} vs {}", plan.tp_load[t], load[t]));
        }
    }
    for k in 0..inst.levs.len() {
        let used = plan.routes.iter().filter(|r| r.class == k).count();
        if used != plan.class_used[k] {
            return Err(format!("class {k} count cache {} vs {used}", plan.class_used[k]));
        }
    }
    for (r, route) in plan.routes.iter().enumerate() {
        let fresh = Route::new(ctx, route.class, route.depot, route.tp, route.seq.clone());
        if !close(fresh.eval.cost, route.eval.cost, 1e-9) || !close(fresh.eval.warp, route.eval.warp, 1e-9) {
            return Err(format!("route {r} evaluation cache is stale"));
        }
    }
    Ok(())
}

/// Applies `ops` random destroy, repair and local search steps and checks the
/// plan bookkeeping after every one. Returns the operator count.
pub fn partition_trials(ops: usize, seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let insts = fuzz_instances();
    let params = SearchParams::default();
    let w = [10.0; 4];
    let mut done = 0;
    while done < ops {
        for inst in &insts {
            let ctx = Ctx::new(inst);
            let scale = ShawScale::new(inst);
            let knn = neighbor_lists(inst, params.granular);
            let mut plan = starting_plan(&ctx, &mut rng);
            check_partition(&ctx, &plan, true).map_err(|e| format!("{}: initial plan: {e}", inst.id))?;
            for _ in 0..100 {
                if done >= ops {
                    return Ok(done);
                }
                let d = *DestroyKind::ALL.choose(&mut rng).unwrap();
                let g = rng.gen_range(1..=inst.customers.len().div_ceil(3));
                destroy(d, &ctx, &mut plan, g, &params, &scale, &w, &mut rng);
                check_partition(&ctx, &plan, false).map_err(|e| format!("{}: after {}: {e}", inst.id, d.name()))?;
                let r = *RepairKind::ALL.choose(&mut rng).unwrap();
                repair(r, &ctx, &mut plan, &params, &w, &mut rng);
                check_partition(&ctx, &plan, true).map_err(|e| format!("{}: after {}: {e}", inst.id, r.name()))?;
                if !plan.is_complete() {
                    return Err(format!("{}: {} left points pooled", inst.id, r.name()));
                }
                done += 2;
                if rng.gen_bool(0.2) {
                    local_search(&ctx, &mut plan, &knn, params.ls_sample, &w, &mut rng);
                    check_partition(&ctx, &plan, true).map_err(|e| format!("{}: after local search: {e}", inst.id))?;
                    done += 1;
                }
            }
        }
    }
    Ok(done)
}

/// Weights stay in `[min, max]` under random violation histories.
pub fn penalty_trials(trials: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = PenaltyParams::default();
    for trial in 0..trials {
        let mut pen = PenaltyState::new(params);
        let bias: f64 = rng.gen();
        for _ in 0..rng.gen_range(1..400) {
            for _ in 0..params.period {
                pen.record([rng.gen_bool(bias), rng.gen_bool(bias), rng.gen_bool(1.0 - bias), rng.gen_bool(0.5)]);
            }
            pen.update();
            if pen.weights.iter().any(|&w| !(params.min..=params.max).contains(&w)) {
                return Err(format!("trial {trial}: weights {:?}", pen.weights));
            }
        }
    }
    Ok(())
}

/// Relatedness against a recomputation from raw coordinates.
pub fn shaw_trials(seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    for inst in fuzz_instances() {
        let n = inst.customers.len();
        let pos = |c: usize| inst.customers[c].pos;
        let dist = |a: usize, b: usize| ((pos(a).x - pos(b).x).powi(2) + (pos(a).y - pos(b).y).powi(2)).sqrt();
        let max_d = (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).map(|(a, b)| dist(a, b)).fold(0.0, f64::max);
        let spread = |f: &dyn Fn(usize) -> f64| {
            let v: Vec<f64> = (0..n).map(f).collect();
            v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min)
        };
        let dq = spread(&|c| inst.customers[c].demand);
        let dt = spread(&|c| inst.customers[c].window.open);
        let scale = ShawScale::new(&inst);
        for _ in 0..500 {
            let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
            let w = [rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0)];
            let (a, b) = (&inst.customers[i], &inst.customers[j]);
            let term = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
            let want = w[0] * term(dist(i, j), max_d)
                + w[1] * term((a.demand - b.demand).abs(), dq)
                + w[2] * term((a.window.open - b.window.open).abs(), dt);
            let got = shaw_relatedness(&inst, &scale, i, j, &w);
            if !close(got, want, 1e-12) {
                return Err(format!("{}: relatedness({i},{j}) = {got}, recomputed {want}", inst.id));
            }
            checked += 1;
        }
    }
    Ok(checked)
}

/// Cost per unit transferred of every route of random plans.
pub fn acut_trials(seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    for inst in fuzz_instances() {
        let ctx = Ctx::new(&inst);
        let plan = starting_plan(&ctx, &mut rng);
        for r in &plan.routes {
            let cost = lev_route_cost(&inst, r.class, r.depot, r.tp, &r.seq);
            let demand: f64 = r.seq.iter().map(|&c| inst.customers[c].demand).sum();
            let got = acut(r.eval.cost, r.eval.load);
            if !close(got, cost / demand, 1e-12) {
                return Err(format!("{}: ACUT {got} vs {}", inst.id, cost / demand));
            }
            checked += 1;
        }
    }
    Ok(checked)
}

/// Adaptive weights against a replay of the smoothing recurrence.
pub fn weight_trials(trials: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scores = [33.0, 9.0, 13.0];
    for trial in 0..trials {
        let n = rng.gen_range(1..9);
        let theta: f64 = rng.gen_range(0.0..1.0);
        let mut book = OperatorBook::new(n);
        let mut w = vec![1.0f64; n];
        for _ in 0..rng.gen_range(1..30) {
            let mut s = vec![0.0; n];
            let mut u = vec![0usize; n];
            for _ in 0..rng.gen_range(0..50) {
                let op = rng.gen_range(0..n);
                let sc = if rng.gen_bool(0.3) { 0.0 } else { scores[rng.gen_range(0..3)] };
                book.record(op, sc);
                s[op] += sc;
                u[op] += 1;
            }
            book.update(theta);
            for i in 0..n {
                if u[i] > 0 {
                    w[i] = (theta * s[i] / u[i] as f64 + (1.0 - theta) * w[i]).max(1e-6);
                }
            }
            if book.weights.iter().zip(&w).any(|(a, b)| !close(*a, *b, 1e-12)) {
                return Err(format!("trial {trial}: weights {:?}, replay {w:?}", book.weights));
            }
        }
    }
    Ok(())
}

/// Empirical acceptance rate at `delta == t`.
pub fn sa_rate(trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0;
    for i in 0..trials {
        let t = 1.0 + (i % 97) as f64;
        if accept(t, t, &mut rng) {
            hits += 1;
        }
    }
    hits as f64 / trials as f64
}
