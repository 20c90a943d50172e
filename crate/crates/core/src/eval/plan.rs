//! Second echelon search state with cached segment data per route.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use super::seg::{Arcs, Seg};
use super::Violations;
use crate::model::{
    preprocess, ArcMask, Instance, JackAssignment, LevRoute, Solution, VehicleRef, TOL,
};

pub const UNSERVED_PENALTY: f64 = 1e7;

/// Instance-derived data shared by every search component.
pub struct Ctx<'a> {
    pub inst: &'a Instance,
    pub mask: ArcMask,
    /// Earliest LEV/jack loading start per TP.
    pub release: Vec<f64>,
    /// Cheapest vessel round trip per TP.
    pub round_trip: Vec<f64>,
    /// Largest vessel reaching each TP.
    pub vessel_capacity: Vec<f64>,
    /// TP capacity as seen by the search, see [`Instance::effective_capacity`].
    pub tp_capacity: Vec<f64>,
    /// TPs reachable only by a subset of vessel classes, with that subset's
    /// fleet capacity; only sets that can bind are kept.
    pub fleet_sets: Vec<(Vec<usize>, f64)>,
    /// Whether the vessel round trip estimate enters the search objective.
    pub use_access: bool,
}

impl<'a> Ctx<'a> {
    pub fn new(inst: &'a Instance) -> Self {
        let nt = inst.tps.len();
        let release = (0..nt).map(|t| inst.vessel_release(t)).collect();
        let round_trip = (0..nt).map(|t| inst.vessel_round_trip(t)).collect();
        let vessel_capacity = (0..nt).map(|t| inst.access_capacity(t)).collect();
        let tp_capacity: Vec<f64> = (0..nt).map(|t| inst.effective_capacity(t)).collect();
        let fleet_sets = fleet_sets(inst, &tp_capacity);
        Self { inst, mask: preprocess(inst), release, round_trip, vessel_capacity, tp_capacity, fleet_sets, use_access: true }
    }

    pub fn arcs(&self, class: usize) -> Arcs<'_> {
        Arcs::new(self.inst, &self.mask, class)
    }

    pub fn customer_seg(&self, c: usize) -> Seg {
        let p = &self.inst.customers[c];
        Seg::node(self.inst.v2_customer(c), p.demand, p.service_time, p.window.open, p.window.close)
    }

    /// Depot-to-TP leg followed by loading at the TP.
    pub fn start_seg(&self, class: usize, depot: usize, tp: usize) -> Seg {
        let inst = self.inst;
        let (d, t) = (inst.v2_depot(depot), inst.v2_tp(tp));
        let reach = inst.travel_time_second[class].get(d, t);
        Seg {
            first: t,
            last: t,
            cost: inst.cost_second[class].get(d, t),
            dist: inst.dist_second.get(d, t),
            load: 0.0,
            dur: inst.tps[tp].load_service_time,
            warp: 0.0,
            earliest: self.release[tp].max(reach),
            latest: f64::INFINITY,
        }
    }

    pub fn end_seg(&self, depot: usize) -> Seg {
        Seg::node(self.inst.v2_depot(depot), 0.0, 0.0, 0.0, f64::INFINITY)
    }

    /// Lateness of a jack delivery from TP `t` to `c` when leaving at the earliest moment.
    pub fn jack_lateness(&self, t: usize, c: usize) -> f64 {
        let inst = self.inst;
        let arrive = self.release[t] + inst.tps[t].load_service_time + inst.travel_time_jack.get(t, c);
        (arrive - inst.customers[c].window.close).max(0.0)
    }

    /// Vessel access estimate for a TP handling `load`.
    pub fn access(&self, t: usize, load: f64) -> f64 {
        if !self.use_access || load <= TOL {
            return 0.0;
        }
        let cap = self.vessel_capacity[t];
        let trips = if cap.is_finite() && cap > 0.0 {
            (load / cap - 1e-9).ceil().max(1.0)
        } else {
            1.0
        };
        trips * self.round_trip[t]
    }

    /// Load dependent cost of an open TP: access estimate plus weighted capacity excess.
    pub fn tp_term(&self, t: usize, load: f64, w: &[f64; 4]) -> f64 {
        self.access(t, load) + w[1] * (load - self.tp_capacity[t]).max(0.0)
    }

    /// Load beyond the fleet capacity of every class subset.
    pub fn fleet_excess(&self, load: impl Fn(usize) -> f64) -> f64 {
        self.fleet_sets.iter().map(|(tps, cap)| (tps.iter().map(|&t| load(t)).sum::<f64>() - cap).max(0.0)).sum()
    }

    /// Nearest open TP strictly within DTr of `c`, ties to the lowest id.
    pub fn jack_tp(&self, open: &[bool], c: usize) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for (t, _) in open.iter().enumerate().filter(|(_, &o)| o) {
            if self.inst.within_jack_range(t, c) {
                let d = self.inst.tp_customer_dist(t, c);
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, t));
                }
            }
        }
        best.map(|(_, t)| t)
    }
}

fn fleet_sets(inst: &Instance, tp_capacity: &[f64]) -> Vec<(Vec<usize>, f64)> {
    let nk = inst.vessels.len();
    if nk > 16 {
        return Vec::new();
    }
    let reach: Vec<u32> = (0..inst.tps.len())
        .map(|t| {
            let v = inst.v1_tp(t);
            (0..nk)
                .filter(|&k| inst.vessels[k].count > 0 && inst.cost_first[k].get(0, v).is_finite())
                .fold(0u32, |m, k| m | 1 << k)
        })
        .collect();
    let mut out: Vec<(Vec<usize>, f64)> = Vec::new();
    for set in 1u32..1 << nk {
        let tps: Vec<usize> = (0..inst.tps.len()).filter(|&t| reach[t] != 0 && reach[t] & !set == 0).collect();
        let cap: f64 = (0..nk).filter(|k| set >> k & 1 == 1).map(|k| inst.vessels[k].count as f64 * inst.vessels[k].capacity).sum();
        let room: f64 = tps.iter().map(|&t| tp_capacity[t]).sum();
        if tps.is_empty() || cap >= room - TOL {
            continue;
        }
        match out.iter_mut().find(|(o, _)| *o == tps) {
            Some(e) => e.1 = e.1.min(cap),
            None => out.push((tps, cap)),
        }
    }
    out
}

/// Raw route evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RouteEval {
    pub cost: f64,
    pub dist: f64,
    pub load: f64,
    pub warp: f64,
    pub cap_excess: f64,
    pub dist_excess: f64,
}

impl RouteEval {
    fn of(ctx: &Ctx, class: usize, s: &Seg) -> Self {
        let lev = &ctx.inst.levs[class];
        Self {
            cost: s.cost,
            dist: s.dist,
            load: s.load,
            warp: s.warp,
            cap_excess: (s.load - lev.capacity).max(0.0),
            dist_excess: (s.dist - lev.driving_range).max(0.0),
        }
    }

    pub fn penalized(&self, w: &[f64; 4]) -> f64 {
        self.cost + w[0] * self.cap_excess + w[2] * self.warp + w[3] * self.dist_excess
    }

    pub fn feasible(&self) -> bool {
        self.cap_excess <= TOL && self.warp <= TOL && self.dist_excess <= TOL && self.cost.is_finite()
    }
}

/// Change of the route-level terms caused by a move.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Delta {
    pub obj: f64,
    pub warp: f64,
    pub cap: f64,
    pub dist: f64,
}

impl Delta {
    pub fn between(before: &RouteEval, after: &RouteEval) -> Self {
        if !after.cost.is_finite() {
            return Self { obj: f64::INFINITY, ..Default::default() };
        }
        Self {
            obj: after.cost - before.cost,
            warp: after.warp - before.warp,
            cap: after.cap_excess - before.cap_excess,
            dist: after.dist_excess - before.dist_excess,
        }
    }

    pub fn penalized(&self, w: &[f64; 4]) -> f64 {
        if !self.obj.is_finite() {
            return f64::INFINITY;
        }
        self.obj + w[0] * self.cap + w[2] * self.warp + w[3] * self.dist
    }
}

#[derive(Debug, Clone)]
pub struct Route {
    pub class: usize,
    pub depot: usize,
    pub tp: usize,
    pub seq: Vec<usize>,
    fwd: Vec<Seg>,
    bwd: Vec<Seg>,
    pub eval: RouteEval,
}

impl Route {
    pub fn new(ctx: &Ctx, class: usize, depot: usize, tp: usize, seq: Vec<usize>) -> Self {
        let mut r = Self { class, depot, tp, seq, fwd: Vec::new(), bwd: Vec::new(), eval: RouteEval::default() };
        r.rebuild(ctx);
        r
    }

    pub fn len(&self) -> usize {
        self.seq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seq.is_empty()
    }

    pub fn rebuild(&mut self, ctx: &Ctx) {
        let arcs = ctx.arcs(self.class);
        let n = self.seq.len();
        self.fwd.clear();
        self.fwd.push(ctx.start_seg(self.class, self.depot, self.tp));
        for i in 0..n {
            let s = arcs.join(&self.fwd[i], &ctx.customer_seg(self.seq[i]));
            self.fwd.push(s);
        }
        self.bwd.clear();
        self.bwd.resize(n, Seg::node(0, 0.0, 0.0, 0.0, 0.0));
        for i in (0..n).rev() {
            let c = ctx.customer_seg(self.seq[i]);
            self.bwd[i] = if i + 1 < n { arcs.join(&c, &self.bwd[i + 1]) } else { c };
        }
        let whole = arcs.join(&self.fwd[n], &ctx.end_seg(self.depot));
        self.eval = RouteEval::of(ctx, self.class, &whole);
    }

    /// Start segment followed by the first `i` customers.
    pub fn prefix(&self, i: usize) -> Seg {
        self.fwd[i]
    }

    /// Customers from position `i` on.
    pub fn suffix(&self, i: usize) -> Option<Seg> {
        self.bwd.get(i).copied()
    }

    /// Evaluates `prefix ⊕ middle... ⊕ suffix ⊕ end` for this route's class and depot.
    pub fn eval_parts(&self, ctx: &Ctx, parts: &[Seg]) -> RouteEval {
        let arcs = ctx.arcs(self.class);
        let mut acc = parts[0];
        for p in &parts[1..] {
            acc = arcs.join(&acc, p);
        }
        let whole = arcs.join(&acc, &ctx.end_seg(self.depot));
        RouteEval::of(ctx, self.class, &whole)
    }

    /// Evaluates this route's frame around an explicit customer sequence.
    pub fn eval_seq(&self, ctx: &Ctx, seq: &[usize]) -> RouteEval {
        eval_sequence(ctx, self.class, self.depot, self.tp, seq)
    }

    /// Inserting `c` before position `pos` (0..=len).
    pub fn insert_delta(&self, ctx: &Ctx, pos: usize, c: usize) -> Delta {
        let node = ctx.customer_seg(c);
        let after = match self.suffix(pos) {
            Some(s) => self.eval_parts(ctx, &[self.prefix(pos), node, s]),
            None => self.eval_parts(ctx, &[self.prefix(pos), node]),
        };
        Delta::between(&self.eval, &after)
    }

    /// Removing the customer at `pos`.
    pub fn remove_delta(&self, ctx: &Ctx, pos: usize) -> Delta {
        let after = match self.suffix(pos + 1) {
            Some(s) => self.eval_parts(ctx, &[self.prefix(pos), s]),
            None => self.eval_parts(ctx, &[self.prefix(pos)]),
        };
        Delta::between(&self.eval, &after)
    }

    /// Latest TP loading start that adds no lateness, and the customer service
    /// starts that follow from it.
    pub fn schedule(&self, ctx: &Ctx) -> (f64, Vec<f64>) {
        let arcs = ctx.arcs(self.class);
        let whole = arcs.join(&self.fwd[self.seq.len()], &ctx.end_seg(self.depot));
        let tp_start = if whole.latest.is_finite() { whole.latest.max(whole.earliest) } else { whole.earliest };
        let inst = ctx.inst;
        let tt = &inst.travel_time_second[self.class];
        let mut prev = inst.v2_tp(self.tp);
        let mut ready = tp_start + inst.tps[self.tp].load_service_time;
        let mut starts = Vec::with_capacity(self.seq.len());
        for &c in &self.seq {
            let v = inst.v2_customer(c);
            let st = (ready + tt.get(prev, v)).max(inst.customers[c].window.open);
            starts.push(st);
            ready = st + inst.customers[c].service_time;
            prev = v;
        }
        (tp_start, starts)
    }
}

pub fn eval_sequence(ctx: &Ctx, class: usize, depot: usize, tp: usize, seq: &[usize]) -> RouteEval {
    let arcs = ctx.arcs(class);
    let mut acc = ctx.start_seg(class, depot, tp);
    for &c in seq {
        acc = arcs.join(&acc, &ctx.customer_seg(c));
    }
    let whole = arcs.join(&acc, &ctx.end_seg(depot));
    RouteEval::of(ctx, class, &whole)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loc {
    Pool,
    Jack(usize),
    Route(usize, usize),
}

/// TP decisions, LEV routes and jack assignments of the second echelon.
#[derive(Debug, Clone)]
pub struct Plan {
    pub open: Vec<bool>,
    pub routes: Vec<Route>,
    pub loc: Vec<Loc>,
    pub tp_load: Vec<f64>,
    pub class_used: Vec<usize>,
}

impl Plan {
    /// Every customer pooled, except those that must be jack-served.
    pub fn new(ctx: &Ctx, open: Vec<bool>) -> Self {
        let inst = ctx.inst;
        let mut p = Self {
            open,
            routes: Vec::new(),
            loc: vec![Loc::Pool; inst.customers.len()],
            tp_load: vec![0.0; inst.tps.len()],
            class_used: vec![0; inst.levs.len()],
        };
        p.refresh_jacks(ctx);
        p
    }

    pub fn open_tps(&self) -> impl Iterator<Item = usize> + '_ {
        self.open.iter().enumerate().filter(|(_, &o)| o).map(|(t, _)| t)
    }

    pub fn n_open(&self) -> usize {
        self.open.iter().filter(|&&o| o).count()
    }

    pub fn pool(&self) -> Vec<usize> {
        (0..self.loc.len()).filter(|&c| self.loc[c] == Loc::Pool).collect()
    }

    pub fn jacks(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.loc.iter().enumerate().filter_map(|(c, l)| match l {
            Loc::Jack(t) => Some((c, *t)),
            _ => None,
        })
    }

    pub fn class_available(&self, ctx: &Ctx, class: usize) -> bool {
        self.class_used[class] < ctx.inst.levs[class].count
    }

    /// Class used for a new route: the largest available capacity, ties to the lowest id.
    pub fn new_route_class(&self, ctx: &Ctx) -> Option<usize> {
        let levs = &ctx.inst.levs;
        (0..levs.len())
            .filter(|&k| self.class_available(ctx, k))
            .max_by(|&a, &b| levs[a].capacity.total_cmp(&levs[b].capacity).then(b.cmp(&a)))
    }

    fn reindex(&mut self, r: usize) {
        for (i, &c) in self.routes[r].seq.iter().enumerate() {
            self.loc[c] = Loc::Route(r, i);
        }
    }

    /// Re-derives jack assignments from the open set. Customers that become
    /// jack-served leave their routes; customers that lose their jack are pooled.
    pub fn refresh_jacks(&mut self, ctx: &Ctx) {
        let demand = |c: usize| ctx.inst.customers[c].demand;
        for c in 0..self.loc.len() {
            let want = ctx.jack_tp(&self.open, c);
            match (self.loc[c], want) {
                (Loc::Jack(t), Some(w)) if t == w => {}
                (Loc::Jack(t), _) => {
                    self.tp_load[t] -= demand(c);
                    self.loc[c] = Loc::Pool;
                    if let Some(w) = want {
                        self.loc[c] = Loc::Jack(w);
                        self.tp_load[w] += demand(c);
                    }
                }
                (Loc::Route(..), Some(w)) => {
                    self.remove(ctx, c);
                    self.loc[c] = Loc::Jack(w);
                    self.tp_load[w] += demand(c);
                }
                (Loc::Pool, Some(w)) => {
                    self.loc[c] = Loc::Jack(w);
                    self.tp_load[w] += demand(c);
                }
                _ => {}
            }
        }
        self.drop_empty_routes();
    }

    pub fn set_open(&mut self, ctx: &Ctx, t: usize, open: bool) {
        if self.open[t] == open {
            return;
        }
        self.open[t] = open;
        if !open {
            let doomed: Vec<usize> = (0..self.routes.len()).filter(|&r| self.routes[r].tp == t).collect();
            for r in doomed.into_iter().rev() {
                self.remove_route(r);
            }
        }
        self.refresh_jacks(ctx);
    }

    /// Removes route `r` and pools its customers.
    pub fn remove_route(&mut self, r: usize) -> Vec<usize> {
        let route = self.routes.swap_remove(r);
        self.tp_load[route.tp] -= route.eval.load;
        self.class_used[route.class] -= 1;
        for &c in &route.seq {
            self.loc[c] = Loc::Pool;
        }
        if r < self.routes.len() {
            self.reindex(r);
        }
        route.seq
    }

    /// Pools `c`; empty routes are kept until [`Plan::drop_empty_routes`].
    pub fn remove(&mut self, ctx: &Ctx, c: usize) {
        match self.loc[c] {
            Loc::Route(r, i) => {
                let route = &mut self.routes[r];
                route.seq.remove(i);
                let before = route.eval.load;
                route.rebuild(ctx);
                self.tp_load[route.tp] += route.eval.load - before;
                self.loc[c] = Loc::Pool;
                self.reindex(r);
            }
            Loc::Jack(t) => {
                self.tp_load[t] -= ctx.inst.customers[c].demand;
                self.loc[c] = Loc::Pool;
            }
            Loc::Pool => {}
        }
    }

    pub fn insert(&mut self, ctx: &Ctx, r: usize, pos: usize, c: usize) {
        debug_assert_eq!(self.loc[c], Loc::Pool);
        let route = &mut self.routes[r];
        route.seq.insert(pos, c);
        let before = route.eval.load;
        route.rebuild(ctx);
        self.tp_load[route.tp] += route.eval.load - before;
        self.reindex(r);
    }

    /// Opens a new route serving `seq` from TP `tp`; returns its index.
    pub fn add_route(&mut self, ctx: &Ctx, class: usize, tp: usize, seq: Vec<usize>) -> usize {
        let depot = ctx.inst.nearest_depot(tp);
        let route = Route::new(ctx, class, depot, tp, seq);
        self.tp_load[tp] += route.eval.load;
        self.class_used[class] += 1;
        self.routes.push(route);
        let r = self.routes.len() - 1;
        self.reindex(r);
        r
    }

    /// Replaces the customer sequence of route `r`.
    pub fn set_seq(&mut self, ctx: &Ctx, r: usize, seq: Vec<usize>) {
        let route = &mut self.routes[r];
        let before = route.eval.load;
        route.seq = seq;
        route.rebuild(ctx);
        self.tp_load[route.tp] += route.eval.load - before;
        self.reindex(r);
    }

    pub fn drop_empty_routes(&mut self) {
        let mut r = 0;
        while r < self.routes.len() {
            if self.routes[r].is_empty() {
                self.remove_route(r);
            } else {
                r += 1;
            }
        }
    }

    /// Closes open TPs that serve nobody. Never closes the last open TP.
    pub fn close_unused(&mut self, ctx: &Ctx) {
        if ctx.inst.relaxed {
            return;
        }
        for t in 0..self.open.len() {
            if self.open[t] && self.tp_load[t] <= TOL && self.n_open() > 1 {
                self.open[t] = false;
            }
        }
    }

    /// Moves each route to the depot giving its cheapest penalized cost.
    pub fn redepot(&mut self, ctx: &Ctx, w: &[f64; 4]) {
        let nd = ctx.inst.depots.len();
        if nd < 2 {
            return;
        }
        for route in &mut self.routes {
            let mut best = (route.eval.penalized(w), route.depot);
            for d in (0..nd).filter(|&d| d != route.depot) {
                let cand = Route::new(ctx, route.class, d, route.tp, route.seq.clone());
                let p = cand.eval.penalized(w);
                if p < best.0 - TOL {
                    best = (p, d);
                }
            }
            if best.1 != route.depot {
                route.depot = best.1;
                route.rebuild(ctx);
            }
        }
    }

    /// Change of the load dependent terms when TP loads move by `changes`.
    pub fn load_delta(&self, ctx: &Ctx, changes: &[(usize, f64)], w: &[f64; 4]) -> f64 {
        let mut d = 0.0;
        for (i, &(t, dl)) in changes.iter().enumerate() {
            if changes[..i].iter().any(|&(u, _)| u == t) {
                continue;
            }
            let dl: f64 = dl + changes[i + 1..].iter().filter(|&&(u, _)| u == t).map(|&(_, x)| x).sum::<f64>();
            let l = self.tp_load[t];
            d += ctx.tp_term(t, l + dl, w) - ctx.tp_term(t, l, w);
        }
        if !ctx.fleet_sets.is_empty() {
            let moved = |t: usize| self.tp_load[t] + changes.iter().filter(|&&(u, _)| u == t).map(|&(_, x)| x).sum::<f64>();
            d += w[1] * (ctx.fleet_excess(moved) - ctx.fleet_excess(|t| self.tp_load[t]));
        }
        d
    }

    pub fn violations(&self, ctx: &Ctx) -> Violations {
        let mut v = [0.0; 4];
        for r in &self.routes {
            v[0] += r.eval.cap_excess;
            v[2] += r.eval.warp;
            v[3] += r.eval.dist_excess;
        }
        for t in self.open_tps() {
            v[1] += (self.tp_load[t] - ctx.tp_capacity[t]).max(0.0);
        }
        v[1] += ctx.fleet_excess(|t| self.tp_load[t]);
        for (c, t) in self.jacks() {
            v[2] += ctx.jack_lateness(t, c);
        }
        Violations(v)
    }

    /// Search objective: LEV travel, establishment and vessel access estimate.
    pub fn objective(&self, ctx: &Ctx) -> f64 {
        let travel: f64 = self.routes.iter().map(|r| r.eval.cost).sum();
        let tp: f64 = self.open_tps().map(|t| ctx.inst.tps[t].establish_cost + ctx.access(t, self.tp_load[t])).sum();
        travel + tp
    }

    /// LEV travel plus establishment, without the access estimate.
    pub fn second_echelon_cost(&self, ctx: &Ctx) -> f64 {
        let travel: f64 = self.routes.iter().map(|r| r.eval.cost).sum();
        travel + self.open_tps().map(|t| ctx.inst.tps[t].establish_cost).sum::<f64>()
    }

    /// Generalized cost; every pooled point adds [`UNSERVED_PENALTY`].
    pub fn cost(&self, ctx: &Ctx, w: &[f64; 4]) -> f64 {
        let unserved = self.loc.iter().filter(|l| **l == Loc::Pool).count() as f64;
        self.objective(ctx) + self.violations(ctx).weighted(w) + unserved * UNSERVED_PENALTY
    }

    pub fn is_complete(&self) -> bool {
        self.loc.iter().all(|l| *l != Loc::Pool)
    }

    pub fn is_feasible(&self, ctx: &Ctx) -> bool {
        self.is_complete() && !self.violations(ctx).any() && self.routes.iter().all(|r| r.eval.cost.is_finite())
    }

    /// Hash of the open set and the multiset of routes.
    pub fn fingerprint(&self) -> u64 {
        let mut routes: Vec<(usize, usize, &[usize])> =
            self.routes.iter().map(|r| (r.tp, r.class, r.seq.as_slice())).collect();
        routes.sort();
        let mut h = DefaultHasher::new();
        self.open.hash(&mut h);
        routes.hash(&mut h);
        h.finish()
    }

    /// Recomputes every cache from scratch; used by consistency checks.
    pub fn rebuilt(&self, ctx: &Ctx) -> Plan {
        let mut p = Plan::new(ctx, self.open.clone());
        for r in &self.routes {
            for &c in &r.seq {
                p.loc[c] = Loc::Pool;
            }
        }
        let mut routes = Vec::new();
        for r in &self.routes {
            routes.push(Route::new(ctx, r.class, r.depot, r.tp, r.seq.clone()));
        }
        for (i, r) in routes.iter().enumerate() {
            for (j, &c) in r.seq.iter().enumerate() {
                p.loc[c] = Loc::Route(i, j);
            }
            p.tp_load[r.tp] += r.eval.load;
            p.class_used[r.class] += 1;
        }
        p.routes = routes;
        p
    }

    /// Second echelon part of a [`Solution`]; vessel links are left empty.
    pub fn to_solution(&self, ctx: &Ctx) -> Solution {
        let inst = ctx.inst;
        let mut unit = vec![0usize; inst.levs.len()];
        let mut lev_routes = Vec::new();
        let mut order: Vec<usize> = (0..self.routes.len()).collect();
        order.sort_by_key(|&r| (self.routes[r].tp, self.routes[r].seq.first().copied()));
        for r in order {
            let route = &self.routes[r];
            let (tp_start, starts) = route.schedule(ctx);
            lev_routes.push(LevRoute {
                lev: VehicleRef { class: route.class, unit: unit[route.class] },
                depot: route.depot,
                tp: route.tp,
                customers: route.seq.clone(),
                tp_start,
                starts,
                vessel: None,
            });
            unit[route.class] += 1;
        }
        let jacks = self
            .jacks()
            .map(|(c, t)| JackAssignment { tp: t, customer: c, tp_start: jack_start(ctx, t, c), vessel: None })
            .collect();
        let mut sol = Solution { open_tps: self.open_tps().collect(), vessel_routes: Vec::new(), lev_routes, jacks, ..Default::default() };
        sol.cost.second_travel = self.routes.iter().map(|r| r.eval.cost).sum();
        sol.cost.establishment = sol.open_tps.iter().map(|&t| inst.tps[t].establish_cost).sum();
        sol
    }
}

/// Latest jack departure from TP `t` that still reaches `c` in time.
pub fn jack_start(ctx: &Ctx, t: usize, c: usize) -> f64 {
    let inst = ctx.inst;
    let lead = inst.tps[t].load_service_time + inst.travel_time_jack.get(t, c);
    let w = inst.customers[c].window;
    if w.close.is_finite() {
        (w.close - lead).max(ctx.release[t])
    } else {
        (w.open - lead).max(ctx.release[t])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::line_instance;

    #[test]
    fn insert_then_remove_is_neutral() {
        let inst = line_instance(&[(1.0, 0.5), (2.0, 0.5), (3.0, 0.4)]);
        let ctx = Ctx::new(&inst);
        let mut plan = Plan::new(&ctx, vec![true]);
        plan.add_route(&ctx, 0, 0, vec![0, 2]);
        let before = plan.cost(&ctx, &[10.0; 4]);
        let d = plan.routes[0].insert_delta(&ctx, 1, 1);
        plan.insert(&ctx, 0, 1, 1);
        let mid = plan.cost(&ctx, &[10.0; 4]);
        assert!((mid - before + UNSERVED_PENALTY - d.penalized(&[10.0; 4])).abs() < 1e-6);
        plan.remove(&ctx, 1);
        assert!((plan.cost(&ctx, &[10.0; 4]) - before).abs() < 1e-9);
    }

    #[test]
    fn singleton_insert_equals_full_evaluation() {
        let inst = line_instance(&[(1.0, 0.5)]);
        let ctx = Ctx::new(&inst);
        let route = Route::new(&ctx, 0, 0, 0, vec![]);
        let d = route.insert_delta(&ctx, 0, 0);
        let full = eval_sequence(&ctx, 0, 0, 0, &[0]);
        assert!((route.eval.cost + d.obj - full.cost).abs() < 1e-12);
    }

    #[test]
    fn closing_tp_pools_its_customers() {
        let inst = line_instance(&[(1.0, 0.5), (0.01, 0.5)]);
        let ctx = Ctx::new(&inst);
        let mut plan = Plan::new(&ctx, vec![true]);
        assert_eq!(plan.loc[1], Loc::Jack(0));
        plan.add_route(&ctx, 0, 0, vec![0]);
        plan.set_open(&ctx, 0, false);
        assert_eq!(plan.pool(), vec![0, 1]);
        assert!(plan.routes.is_empty());
        assert!(plan.tp_load[0].abs() < 1e-12);
    }
}
