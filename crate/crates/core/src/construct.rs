//! Initial second echelon solutions: capacity-aware clustering of demand
//! points around TP candidates, jack pre-assignment and semi-parallel
//! construction of LEV routes.

use rand::Rng;
use thiserror::Error;

use crate::eval::{eval_sequence, Ctx, Plan};
use crate::model::{Instance, TOL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstructError {
    #[error("cluster count {k} outside 1..={max}")]
    BadK { k: usize, max: usize },
    #[error("demand point {0} exceeds every LEV capacity")]
    Unservable(usize),
    #[error("no TP candidate is reachable by any vessel")]
    NoReachableTp,
}

/// Load above which a cluster forces another center.
pub const OVERLOAD: f64 = 1.25;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPlan {
    pub k: usize,
    /// TP candidate per cluster.
    pub centers: Vec<usize>,
    /// Cluster per demand point.
    pub membership: Vec<usize>,
    pub load: Vec<f64>,
    /// Largest member distance per cluster.
    pub radius: Vec<f64>,
    pub neighbors: Vec<Vec<usize>>,
}

impl ClusterPlan {
    /// Assigns every point to its nearest center and derives loads and neighborhoods.
    pub fn from_centers(instance: &Instance, centers: Vec<usize>) -> Self {
        let n = instance.customers.len();
        let k = centers.len();
        let mut membership = vec![0; n];
        let mut load = vec![0.0; k];
        let mut radius = vec![0.0f64; k];
        for c in 0..n {
            let a = nearest(instance, &centers, c);
            membership[c] = a;
            load[a] += instance.customers[c].demand;
            radius[a] = radius[a].max(instance.tp_customer_dist(centers[a], c));
        }
        let mut neighbors = vec![Vec::new(); k];
        for a in 0..k {
            for b in 0..k {
                if a != b
                    && (0..n).any(|c| {
                        membership[c] == b && instance.tp_customer_dist(centers[a], c) <= 2.0 * radius[a] + TOL
                    })
                {
                    neighbors[a].push(b);
                }
            }
        }
        Self { k, centers, membership, load, radius, neighbors }
    }

    pub fn within_cluster_distance(&self, instance: &Instance) -> f64 {
        self.membership.iter().enumerate().map(|(c, &a)| instance.tp_customer_dist(self.centers[a], c)).sum()
    }

    pub fn overloaded(&self, instance: &Instance) -> bool {
        (0..self.k).any(|a| self.load[a] > OVERLOAD * instance.effective_capacity(self.centers[a]) + TOL)
    }

    /// Points admissible for a route of cluster `a`: its members plus any
    /// point within twice its radius.
    pub fn admissible(&self, instance: &Instance, a: usize, c: usize) -> bool {
        self.membership[c] == a || instance.tp_customer_dist(self.centers[a], c) <= 2.0 * self.radius[a] + TOL
    }
}

fn nearest(instance: &Instance, centers: &[usize], c: usize) -> usize {
    (0..centers.len())
        .min_by(|&a, &b| {
            instance
                .tp_customer_dist(centers[a], c)
                .total_cmp(&instance.tp_customer_dist(centers[b], c))
                .then(a.cmp(&b))
        })
        .expect("at least one center")
}

fn candidates(instance: &Instance) -> Vec<usize> {
    (0..instance.tps.len()).filter(|&t| instance.tp_reachable(t)).collect()
}

/// ceil(total demand / mean TP capacity), clamped to 1..=|TP|.
pub fn initial_k(instance: &Instance) -> usize {
    let nt = candidates(instance).len().max(1);
    let caps: Vec<f64> = (0..instance.tps.len()).map(|t| instance.effective_capacity(t)).collect();
    let mean = caps.iter().sum::<f64>() / caps.len() as f64;
    let k = if mean.is_finite() && mean > 0.0 { (instance.total_demand() / mean - 1e-9).ceil() as usize } else { 1 };
    k.clamp(1, nt)
}

fn tp_dist(instance: &Instance, a: usize, b: usize) -> f64 {
    instance.dist_second.get(instance.v2_tp(a), instance.v2_tp(b))
}

/// One K-medoids run with exactly `k` centers drawn from the candidates.
fn kmedoids(instance: &Instance, cands: &[usize], k: usize) -> ClusterPlan {
    let n = instance.customers.len();
    let (cx, cy) = instance.customers.iter().fold((0.0, 0.0), |(x, y), c| (x + c.pos.x, y + c.pos.y));
    let centroid = crate::model::Point::new(cx / n.max(1) as f64, cy / n.max(1) as f64);
    let snap = |p: crate::model::Point, taken: &[usize]| -> Option<usize> {
        cands
            .iter()
            .copied()
            .filter(|t| !taken.contains(t))
            .min_by(|&a, &b| instance.tps[a].pos.dist(&p).total_cmp(&instance.tps[b].pos.dist(&p)).then(a.cmp(&b)))
    };
    let mut centers = vec![snap(centroid, &[]).expect("candidates")];
    while centers.len() < k {
        let next = cands
            .iter()
            .copied()
            .filter(|t| !centers.contains(t))
            .max_by(|&a, &b| {
                let da = centers.iter().map(|&c| tp_dist(instance, a, c)).fold(f64::INFINITY, f64::min);
                let db = centers.iter().map(|&c| tp_dist(instance, b, c)).fold(f64::INFINITY, f64::min);
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .expect("k <= candidates");
        centers.push(next);
    }
    for _ in 0..100 {
        let plan = ClusterPlan::from_centers(instance, centers.clone());
        let mut next = Vec::with_capacity(k);
        for a in 0..k {
            let members: Vec<usize> = (0..n).filter(|&c| plan.membership[c] == a).collect();
            if members.is_empty() {
                next.push(centers[a]);
                continue;
            }
            let m = members.len() as f64;
            let (sx, sy) = members.iter().fold((0.0, 0.0), |(x, y), &c| {
                (x + instance.customers[c].pos.x, y + instance.customers[c].pos.y)
            });
            let mut taken: Vec<usize> = next.clone();
            taken.extend(centers[a + 1..].iter().copied());
            next.push(snap(crate::model::Point::new(sx / m, sy / m), &taken).unwrap_or(centers[a]));
        }
        if next == centers {
            break;
        }
        centers = next;
    }
    // Swap refinement on the within-cluster distance.
    let mut best = ClusterPlan::from_centers(instance, centers.clone());
    let mut best_d = best.within_cluster_distance(instance);
    let mut improved = true;
    let mut rounds = 0;
    while improved && rounds < 50 {
        improved = false;
        rounds += 1;
        for a in 0..k {
            for &t in cands {
                if centers.contains(&t) {
                    continue;
                }
                let mut trial = centers.clone();
                trial[a] = t;
                let p = ClusterPlan::from_centers(instance, trial.clone());
                let d = p.within_cluster_distance(instance);
                if d < best_d - 1e-9 {
                    best = p;
                    best_d = d;
                    centers = trial;
                    improved = true;
                }
            }
        }
    }
    best
}

/// Clusters with `k` centers, adding centers while some cluster exceeds its
/// TP capacity by more than a quarter.
pub fn cluster(instance: &Instance, k: usize) -> Result<ClusterPlan, ConstructError> {
    let cands = candidates(instance);
    if cands.is_empty() {
        return Err(ConstructError::NoReachableTp);
    }
    if k == 0 || k > cands.len() {
        return Err(ConstructError::BadK { k, max: cands.len() });
    }
    let mut k = k;
    loop {
        let plan = kmedoids(instance, &cands, k);
        if !plan.overloaded(instance) || k == cands.len() {
            return Ok(plan);
        }
        k += 1;
    }
}

/// Nearest open TP strictly within DTr for every point, ties to the lowest id.
pub fn assign_jacks(instance: &Instance, open_tps: &[usize]) -> Vec<Option<usize>> {
    (0..instance.customers.len())
        .map(|c| {
            let mut best: Option<(f64, usize)> = None;
            let mut tps = open_tps.to_vec();
            tps.sort_unstable();
            for t in tps {
                let d = instance.tp_customer_dist(t, c);
                if d < instance.jack_threshold && best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, t));
                }
            }
            best.map(|(_, t)| t)
        })
        .collect()
}

/// Average cost per unit transferred.
pub fn acut(cost: f64, demand: f64) -> f64 {
    if demand > 0.0 {
        cost / demand
    } else {
        f64::INFINITY
    }
}

/// Rank based roulette over a list sorted best first: weight n for the best,
/// 1 for the last.
pub fn rank_roulette<R: Rng>(len: usize, rng: &mut R) -> usize {
    let total = len * (len + 1) / 2;
    let mut x = rng.gen_range(0..total);
    for i in 0..len {
        let w = len - i;
        if x < w {
            return i;
        }
        x -= w;
    }
    len - 1
}

/// Grows one route at TP `tp` over `allowed` points, capacity hard.
pub(crate) fn grow_route<R: Rng>(
    ctx: &Ctx,
    class: usize,
    tp: usize,
    allowed: &[usize],
    rcl: usize,
    w: &[f64; 4],
    rng: &mut R,
) -> Vec<usize> {
    let inst = ctx.inst;
    let depot = inst.nearest_depot(tp);
    let cap = inst.levs[class].capacity;
    let mut route = crate::eval::Route::new(ctx, class, depot, tp, Vec::new());
    let mut left: Vec<usize> = allowed.to_vec();
    loop {
        let mut scored: Vec<(f64, usize, usize)> = Vec::new();
        for &c in &left {
            let d = inst.customers[c].demand;
            if route.eval.load + d > cap + TOL {
                continue;
            }
            let mut best: Option<(f64, usize)> = None;
            for pos in 0..=route.len() {
                let delta = route.insert_delta(ctx, pos, c).penalized(w);
                if delta.is_finite() && best.is_none_or(|(b, _)| delta < b) {
                    best = Some((delta, pos));
                }
            }
            if let Some((delta, pos)) = best {
                scored.push((delta / d, c, pos));
            }
        }
        if scored.is_empty() {
            return route.seq;
        }
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        scored.truncate(rcl.max(1));
        let (_, c, pos) = scored[rank_roulette(scored.len(), rng)];
        let mut seq = route.seq.clone();
        seq.insert(pos, c);
        route = crate::eval::Route::new(ctx, class, depot, tp, seq);
        left.retain(|&x| x != c);
    }
}

/// Where a pooled point goes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Slot {
    Existing { route: usize, pos: usize },
    New { class: usize, tp: usize },
}

/// Cheapest soft insertion slot of `c` over `routes` (all when `None`) plus a
/// new route at each TP in `new_tps` when vehicles remain.
pub fn best_slot(
    ctx: &Ctx,
    plan: &Plan,
    c: usize,
    routes: Option<&[usize]>,
    new_tps: &[usize],
    w: &[f64; 4],
) -> Option<(f64, Slot)> {
    let dem = ctx.inst.customers[c].demand;
    let tp_delta = |tp: usize| plan.load_delta(ctx, &[(tp, dem)], w);
    let mut best: Option<(f64, Slot)> = None;
    let all: Vec<usize>;
    let routes = match routes {
        Some(r) => r,
        None => {
            all = (0..plan.routes.len()).collect();
            &all
        }
    };
    for &r in routes {
        let route = &plan.routes[r];
        let extra = tp_delta(route.tp);
        for pos in 0..=route.len() {
            let delta = route.insert_delta(ctx, pos, c).penalized(w) + extra;
            if delta.is_finite() && best.is_none_or(|(b, _)| delta < b) {
                best = Some((delta, Slot::Existing { route: r, pos }));
            }
        }
    }
    if let Some(class) = plan.new_route_class(ctx) {
        for &tp in new_tps {
            let depot = ctx.inst.nearest_depot(tp);
            let e = eval_sequence(ctx, class, depot, tp, &[c]);
            let delta = e.penalized(w) + tp_delta(tp);
            if delta.is_finite() && best.is_none_or(|(b, _)| delta < b) {
                best = Some((delta, Slot::New { class, tp }));
            }
        }
    }
    best
}

pub fn apply_slot(ctx: &Ctx, plan: &mut Plan, c: usize, slot: Slot) {
    match slot {
        Slot::Existing { route, pos } => plan.insert(ctx, route, pos, c),
        Slot::New { class, tp } => {
            plan.add_route(ctx, class, tp, vec![c]);
        }
    }
}

/// Cheapest soft insertion of `c` anywhere, new routes allowed at open TPs.
pub fn insert_cheapest(ctx: &Ctx, plan: &mut Plan, c: usize, w: &[f64; 4]) -> bool {
    let open: Vec<usize> = plan.open_tps().collect();
    match best_slot(ctx, plan, c, None, &open, w) {
        Some((_, slot)) => {
            apply_slot(ctx, plan, c, slot);
            true
        }
        None => false,
    }
}

/// Semi-parallel construction: repeatedly builds one candidate route per
/// cluster around a random seed cluster and commits the one with the lowest
/// ACUT.
pub fn spc_construct<R: Rng>(
    ctx: &Ctx,
    clusters: &ClusterPlan,
    rcl: usize,
    w: &[f64; 4],
    rng: &mut R,
) -> Result<Plan, ConstructError> {
    let inst = ctx.inst;
    let max_cap = inst.max_lev_capacity();
    if let Some(c) = (0..inst.customers.len()).find(|&c| inst.customers[c].demand > max_cap + TOL) {
        return Err(ConstructError::Unservable(c));
    }
    let mut open = vec![false; inst.tps.len()];
    for &t in &clusters.centers {
        open[t] = true;
    }
    let mut plan = Plan::new(ctx, open);
    loop {
        let pool = plan.pool();
        if pool.is_empty() {
            break;
        }
        let Some(class) = plan.new_route_class(ctx) else {
            // Points no route can take stay pooled and carry the unserved charge.
            for c in pool {
                insert_cheapest(ctx, &mut plan, c, w);
            }
            break;
        };
        let seeds: Vec<usize> = {
            let mut s: Vec<usize> = pool.iter().map(|&c| clusters.membership[c]).collect();
            s.sort_unstable();
            s.dedup();
            s
        };
        let seed = seeds[rng.gen_range(0..seeds.len())];
        let mut cands = vec![seed];
        cands.extend(clusters.neighbors[seed].iter().copied());
        let mut best: Option<(f64, usize, Vec<usize>)> = None;
        for a in cands {
            let allowed: Vec<usize> = pool.iter().copied().filter(|&c| clusters.admissible(inst, a, c)).collect();
            if allowed.is_empty() {
                continue;
            }
            let tp = clusters.centers[a];
            let seq = grow_route(ctx, class, tp, &allowed, rcl, w, rng);
            if seq.is_empty() {
                continue;
            }
            let depot = inst.nearest_depot(tp);
            let cost = crate::model::lev_route_cost(inst, class, depot, tp, &seq);
            let load: f64 = seq.iter().map(|&c| inst.customers[c].demand).sum();
            let score = acut(cost, load);
            if best.as_ref().is_none_or(|(b, _, _)| score < *b) {
                best = Some((score, tp, seq));
            }
        }
        match best {
            Some((_, tp, seq)) => {
                plan.add_route(ctx, class, tp, seq);
            }
            None => {
                // Every remaining point is outside the seed's neighborhood reach.
                // Inserting any one of them makes progress; none fitting ends construction.
                if !pool.iter().any(|&c| insert_cheapest(ctx, &mut plan, c, w)) {
                    break;
                }
            }
        }
    }
    plan.close_unused(ctx);
    Ok(plan)
}

/// Initial plan of the hybrid method: clustering then construction. Relaxed
/// instances keep every satellite open.
pub fn initial_plan<R: Rng>(ctx: &Ctx, rcl: usize, w: &[f64; 4], rng: &mut R) -> Result<Plan, ConstructError> {
    let inst = ctx.inst;
    let clusters = if inst.relaxed {
        ClusterPlan::from_centers(inst, (0..inst.tps.len()).collect())
    } else {
        cluster(inst, initial_k(inst))?
    };
    spc_construct(ctx, &clusters, rcl, w, rng)
}

/// Initial plan without clustering: `initial_k` random reachable TPs.
pub fn random_plan<R: Rng>(ctx: &Ctx, rcl: usize, w: &[f64; 4], rng: &mut R) -> Result<Plan, ConstructError> {
    let inst = ctx.inst;
    let centers = if inst.relaxed {
        (0..inst.tps.len()).collect()
    } else {
        let mut cands = candidates(inst);
        if cands.is_empty() {
            return Err(ConstructError::NoReachableTp);
        }
        let k = initial_k(inst);
        let mut chosen = Vec::new();
        while chosen.len() < k {
            chosen.push(cands.swap_remove(rng.gen_range(0..cands.len())));
        }
        chosen.sort_unstable();
        chosen
    };
    spc_construct(ctx, &ClusterPlan::from_centers(inst, centers), rcl, w, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::line_instance;
    use rand::SeedableRng;

    #[test]
    fn initial_k_rounds_up() {
        let mut inst = line_instance(&[(1.0, 0.5)]);
        inst.tps[0].capacity = 40.0;
        inst.customers[0].demand = 100.0;
        inst.tps.push(inst.tps[0].clone());
        inst.tps.push(inst.tps[0].clone());
        // three TPs need consistent matrices for reachability; only the count matters here
        inst.travel_time_first = vec![crate::model::Matrix::filled(4, 4, 1.0)];
        inst.cost_first = inst.travel_time_first.clone();
        inst.vessels[0].capacity = 1000.0;
        assert_eq!(initial_k(&inst), 3);
        inst.customers[0].demand = 40.0;
        assert_eq!(initial_k(&inst), 1);
    }

    #[test]
    fn rank_roulette_covers_list() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut hits = [0usize; 5];
        for _ in 0..15000 {
            hits[rank_roulette(5, &mut rng)] += 1;
        }
        assert!(hits.windows(2).all(|w| w[0] > w[1]), "{hits:?}");
    }

    #[test]
    fn acut_prefers_cheaper_per_unit() {
        assert!(acut(12.0, 10.0) < acut(10.0, 5.0));
    }
}
