//! Segment-based local search on LEV routes.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::eval::{Ctx, Loc, Plan, RouteEval, Seg};
use crate::model::Instance;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Neighborhood {
    TwoOpt,
    TwoOptStar,
    Reinsertion,
    /// Exchange of `n` consecutive points against `n - 1` of another route.
    Swap(usize),
}

impl Neighborhood {
    pub const ALL: [Neighborhood; 7] = [
        Neighborhood::TwoOpt,
        Neighborhood::TwoOptStar,
        Neighborhood::Reinsertion,
        Neighborhood::Swap(1),
        Neighborhood::Swap(2),
        Neighborhood::Swap(3),
        Neighborhood::Swap(4),
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Move {
    /// Reverse positions `i..=j`.
    TwoOpt { r: usize, i: usize, j: usize },
    /// `r1` keeps `..i` and takes `r2[j..]`; `r2` keeps `..j` and takes `r1[i..]`.
    TwoOptStar { r1: usize, i: usize, r2: usize, j: usize },
    /// Move the point at `from` so that it lands at index `to`.
    Reinsert { r: usize, from: usize, to: usize },
    /// Swap `r1[i..i+n1]` with `r2[j..j+n2]`.
    Exchange { r1: usize, i: usize, n1: usize, r2: usize, j: usize, n2: usize },
}

/// `k` nearest other customers of every customer.
pub fn neighbor_lists(inst: &Instance, k: usize) -> Vec<Vec<usize>> {
    let n = inst.customers.len();
    (0..n)
        .map(|c| {
            let mut others: Vec<usize> = (0..n).filter(|&o| o != c).collect();
            let d = |o: usize| inst.dist_second.get(inst.v2_customer(c), inst.v2_customer(o));
            others.sort_by(|&a, &b| d(a).total_cmp(&d(b)).then(a.cmp(&b)));
            others.truncate(k);
            others
        })
        .collect()
}

struct Search<'a, 'b> {
    ctx: &'a Ctx<'b>,
    w: [f64; 4],
    /// Classes sharing one arc group have identical LEV matrices.
    arc_group: Vec<usize>,
}

impl Search<'_, '_> {
    fn chain(&self, class: usize, seq: &[usize]) -> Option<Seg> {
        let arcs = self.ctx.arcs(class);
        let mut it = seq.iter().map(|&c| self.ctx.customer_seg(c));
        let first = it.next()?;
        Some(it.fold(first, |acc, s| arcs.join(&acc, &s)))
    }

    fn eval_parts(&self, plan: &Plan, r: usize, parts: &[Option<Seg>]) -> RouteEval {
        let parts: Vec<Seg> = parts.iter().flatten().copied().collect();
        plan.routes[r].eval_parts(self.ctx, &parts)
    }

    fn tp_change(&self, plan: &Plan, t: usize, dl: f64) -> f64 {
        if dl.abs() < 1e-12 {
            return 0.0;
        }
        plan.load_delta(self.ctx, &[(t, dl)], &self.w)
    }

    fn two_route_delta(&self, plan: &Plan, r1: usize, a1: &RouteEval, r2: usize, a2: &RouteEval) -> f64 {
        let (b1, b2) = (&plan.routes[r1], &plan.routes[r2]);
        let mut d = a1.penalized(&self.w) - b1.eval.penalized(&self.w) + a2.penalized(&self.w)
            - b2.eval.penalized(&self.w);
        if b1.tp != b2.tp {
            d += plan.load_delta(self.ctx, &[(b1.tp, a1.load - b1.eval.load), (b2.tp, a2.load - b2.eval.load)], &self.w);
        }
        if a1.cost.is_finite() && a2.cost.is_finite() {
            d
        } else {
            f64::INFINITY
        }
    }

    fn sequences(&self, plan: &Plan, mv: Move) -> Vec<(usize, Vec<usize>)> {
        let seq = |r: usize| &plan.routes[r].seq;
        match mv {
            Move::TwoOpt { r, i, j } => {
                let mut s = seq(r).clone();
                s[i..=j].reverse();
                vec![(r, s)]
            }
            Move::TwoOptStar { r1, i, r2, j } => {
                let s1 = [&seq(r1)[..i], &seq(r2)[j..]].concat();
                let s2 = [&seq(r2)[..j], &seq(r1)[i..]].concat();
                vec![(r1, s1), (r2, s2)]
            }
            Move::Reinsert { r, from, to } => {
                let mut s = seq(r).clone();
                let c = s.remove(from);
                s.insert(to, c);
                vec![(r, s)]
            }
            Move::Exchange { r1, i, n1, r2, j, n2 } => {
                let (a, b) = (seq(r1), seq(r2));
                let s1 = [&a[..i], &b[j..j + n2], &a[i + n1..]].concat();
                let s2 = [&b[..j], &a[i..i + n1], &b[j + n2..]].concat();
                vec![(r1, s1), (r2, s2)]
            }
        }
    }

    /// Exact delta from full re-evaluation; used when the two routes have
    /// different arc data.
    fn exact_delta(&self, plan: &Plan, mv: Move) -> f64 {
        let seqs = self.sequences(plan, mv);
        let evals: Vec<RouteEval> = seqs.iter().map(|(r, s)| plan.routes[*r].eval_seq(self.ctx, s)).collect();
        if seqs.len() == 2 {
            self.two_route_delta(plan, seqs[0].0, &evals[0], seqs[1].0, &evals[1])
        } else {
            let b = &plan.routes[seqs[0].0];
            let a = &evals[0];
            a.penalized(&self.w) - b.eval.penalized(&self.w) + self.tp_change(plan, b.tp, a.load - b.eval.load)
        }
    }

    fn same_arcs(&self, plan: &Plan, r1: usize, r2: usize) -> bool {
        self.arc_group[plan.routes[r1].class] == self.arc_group[plan.routes[r2].class]
    }

    fn two_opt(&self, plan: &Plan, r: usize, visit: &mut dyn FnMut(f64, Move) -> bool) -> bool {
        let route = &plan.routes[r];
        let n = route.len();
        let arcs = self.ctx.arcs(route.class);
        let before = route.eval.penalized(&self.w);
        for i in 0..n {
            let mut rev = self.ctx.customer_seg(route.seq[i]);
            for j in i + 1..n {
                rev = arcs.join(&self.ctx.customer_seg(route.seq[j]), &rev);
                let after = self.eval_parts(plan, r, &[Some(route.prefix(i)), Some(rev), route.suffix(j + 1)]);
                let d = if after.cost.is_finite() { after.penalized(&self.w) - before } else { f64::INFINITY };
                if visit(d, Move::TwoOpt { r, i, j }) {
                    return true;
                }
            }
        }
        false
    }

    fn reinsertion(&self, plan: &Plan, r: usize, visit: &mut dyn FnMut(f64, Move) -> bool) -> bool {
        let route = &plan.routes[r];
        let n = route.len();
        let arcs = self.ctx.arcs(route.class);
        let before = route.eval.penalized(&self.w);
        let mut emit = |after: RouteEval, mv: Move| {
            let d = if after.cost.is_finite() { after.penalized(&self.w) - before } else { f64::INFINITY };
            visit(d, mv)
        };
        for from in 0..n {
            let u = self.ctx.customer_seg(route.seq[from]);
            // earlier positions: prefix(to) + u + seq[to..from] + suffix(from+1)
            let mut mid: Option<Seg> = None;
            for to in (0..from).rev() {
                let s = self.ctx.customer_seg(route.seq[to]);
                mid = Some(match mid {
                    Some(m) => arcs.join(&s, &m),
                    None => s,
                });
                let after = self.eval_parts(plan, r, &[Some(route.prefix(to)), Some(u), mid, route.suffix(from + 1)]);
                if emit(after, Move::Reinsert { r, from, to }) {
                    return true;
                }
            }
            // later positions: prefix(from) + seq[from+1..=to] + u + suffix(to+1)
            let mut mid: Option<Seg> = None;
            for to in from + 1..n {
                let s = self.ctx.customer_seg(route.seq[to]);
                mid = Some(match mid {
                    Some(m) => arcs.join(&m, &s),
                    None => s,
                });
                let after = self.eval_parts(plan, r, &[Some(route.prefix(from)), mid, Some(u), route.suffix(to + 1)]);
                if emit(after, Move::Reinsert { r, from, to }) {
                    return true;
                }
            }
        }
        false
    }

    fn two_opt_star(&self, plan: &Plan, u: usize, knn: &[usize], visit: &mut dyn FnMut(f64, Move) -> bool) -> bool {
        let Loc::Route(r1, pu) = plan.loc[u] else { return false };
        for &v in knn {
            let Loc::Route(r2, pv) = plan.loc[v] else { continue };
            if r1 == r2 {
                continue;
            }
            // u -> v: r1 keeps ..=pu then v.., r2 keeps ..pv then r1 after pu
            let mv = Move::TwoOptStar { r1, i: pu + 1, r2, j: pv };
            let d = if self.same_arcs(plan, r1, r2) {
                let (a, b) = (&plan.routes[r1], &plan.routes[r2]);
                let a1 = self.eval_parts(plan, r1, &[Some(a.prefix(pu + 1)), b.suffix(pv)]);
                let a2 = self.eval_parts(plan, r2, &[Some(b.prefix(pv)), a.suffix(pu + 1)]);
                self.two_route_delta(plan, r1, &a1, r2, &a2)
            } else {
                self.exact_delta(plan, mv)
            };
            if visit(d, mv) {
                return true;
            }
        }
        false
    }

    fn exchange(
        &self,
        plan: &Plan,
        u: usize,
        knn: &[usize],
        n1: usize,
        visit: &mut dyn FnMut(f64, Move) -> bool,
    ) -> bool {
        let n2 = n1 - 1;
        let Loc::Route(r1, i) = plan.loc[u] else { return false };
        let (a, len1) = (&plan.routes[r1], plan.routes[r1].len());
        if i + n1 > len1 {
            return false;
        }
        for &v in knn {
            let Loc::Route(r2, pv) = plan.loc[v] else { continue };
            if r1 == r2 {
                continue;
            }
            let b = &plan.routes[r2];
            // a relocation may land before or after v
            let starts: &[usize] = if n2 == 0 { &[pv, pv + 1] } else { &[pv] };
            for &j in starts {
                if j + n2 > b.len() {
                    continue;
                }
                let mv = Move::Exchange { r1, i, n1, r2, j, n2 };
                let d = if self.same_arcs(plan, r1, r2) {
                    let sa = self.chain(a.class, &a.seq[i..i + n1]);
                    let sb = self.chain(a.class, &b.seq[j..j + n2]);
                    let a1 = self.eval_parts(plan, r1, &[Some(a.prefix(i)), sb, a.suffix(i + n1)]);
                    let a2 = self.eval_parts(plan, r2, &[Some(b.prefix(j)), sa, b.suffix(j + n2)]);
                    self.two_route_delta(plan, r1, &a1, r2, &a2)
                } else {
                    self.exact_delta(plan, mv)
                };
                if visit(d, mv) {
                    return true;
                }
            }
        }
        false
    }

    /// Enumerates the neighborhood: the best improving move among the first
    /// `sample` evaluated, or else the first improving one after that.
    fn find(&self, plan: &Plan, nb: Neighborhood, order: &[usize], knn: &[Vec<usize>], sample: usize) -> Option<Move> {
        let mut count = 0usize;
        let mut best: Option<(f64, Move)> = None;
        let mut visit = |d: f64, mv: Move| {
            count += 1;
            if d < -1e-9 && best.is_none_or(|(b, _)| d < b) {
                best = Some((d, mv));
            }
            count >= sample && best.is_some()
        };
        match nb {
            Neighborhood::TwoOpt | Neighborhood::Reinsertion => {
                let mut routes: Vec<usize> = Vec::new();
                for &c in order {
                    if let Loc::Route(r, _) = plan.loc[c] {
                        if !routes.contains(&r) {
                            routes.push(r);
                        }
                    }
                }
                for r in routes {
                    let stop = if nb == Neighborhood::TwoOpt {
                        self.two_opt(plan, r, &mut visit)
                    } else {
                        self.reinsertion(plan, r, &mut visit)
                    };
                    if stop {
                        break;
                    }
                }
            }
            Neighborhood::TwoOptStar => {
                for &u in order {
                    if self.two_opt_star(plan, u, &knn[u], &mut visit) {
                        break;
                    }
                }
            }
            Neighborhood::Swap(n) => {
                for &u in order {
                    if self.exchange(plan, u, &knn[u], n, &mut visit) {
                        break;
                    }
                }
            }
        }
        best.map(|(_, mv)| mv)
    }
}

fn arc_groups(inst: &Instance) -> Vec<usize> {
    let k = inst.levs.len();
    let mut group = vec![0; k];
    for a in 0..k {
        group[a] = (0..a)
            .find(|&b| {
                inst.travel_time_second[a] == inst.travel_time_second[b] && inst.cost_second[a] == inst.cost_second[b]
            })
            .map_or(a, |b| group[b]);
    }
    group
}

/// Applies improving moves, cycling through the neighborhoods in random order,
/// until none of them improves. Returns the number of moves applied.
pub fn local_search<R: Rng>(
    ctx: &Ctx,
    plan: &mut Plan,
    knn: &[Vec<usize>],
    sample: usize,
    w: &[f64; 4],
    rng: &mut R,
) -> usize {
    const MAX_MOVES: usize = 100_000;
    let search = Search { ctx, w: *w, arc_group: arc_groups(ctx.inst) };
    let mut nbs = Neighborhood::ALL.to_vec();
    nbs.shuffle(rng);
    let mut order: Vec<usize> = (0..plan.loc.len()).collect();
    order.shuffle(rng);
    let (mut k, mut idle, mut applied) = (0, 0, 0);
    while idle < nbs.len() && applied < MAX_MOVES {
        match search.find(plan, nbs[k], &order, knn, sample.max(1)) {
            Some(mv) => {
                for (r, s) in search.sequences(plan, mv) {
                    plan.set_seq(ctx, r, s);
                }
                plan.drop_empty_routes();
                applied += 1;
                idle = 0;
            }
            None => {
                idle += 1;
                k = (k + 1) % nbs.len();
            }
        }
    }
    applied
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::line_instance;
    use rand::SeedableRng;

    #[test]
    fn predicted_deltas_match_full_evaluation() {
        let inst = line_instance(&[(1.0, 0.3), (2.0, 0.4), (-1.5, 0.4), (-2.5, 0.2), (3.0, 0.5), (-0.7, 0.3)]);
        let ctx = Ctx::new(&inst);
        let w = [10.0; 4];
        let mut plan = Plan::new(&ctx, vec![true]);
        plan.add_route(&ctx, 0, 0, vec![0, 2, 4]);
        plan.add_route(&ctx, 0, 0, vec![3, 1, 5]);
        let search = Search { ctx: &ctx, w, arc_group: arc_groups(&inst) };
        let knn = neighbor_lists(&inst, 5);
        let order: Vec<usize> = (0..6).collect();
        let base = plan.cost(&ctx, &w);
        let mut checked = 0;
        let mut check = |d: f64, mv: Move| {
            let mut p = plan.clone();
            for (r, s) in search.sequences(&plan, mv) {
                p.set_seq(&ctx, r, s);
            }
            assert!((p.cost(&ctx, &w) - base - d).abs() < 1e-9, "{mv:?}");
            assert!((search.exact_delta(&plan, mv) - d).abs() < 1e-9, "{mv:?}");
            checked += 1;
            false
        };
        for r in 0..2 {
            search.two_opt(&plan, r, &mut check);
            search.reinsertion(&plan, r, &mut check);
        }
        for &u in &order {
            search.two_opt_star(&plan, u, &knn[u], &mut check);
            for n in 1..=4 {
                search.exchange(&plan, u, &knn[u], n, &mut check);
            }
        }
        assert!(checked > 50);
    }

    #[test]
    fn reaches_a_local_minimum() {
        let inst = line_instance(&[(1.0, 0.3), (2.0, 0.4), (-1.5, 0.4), (-2.5, 0.2), (3.0, 0.5), (-0.7, 0.3)]);
        let ctx = Ctx::new(&inst);
        let w = [10.0; 4];
        let mut plan = Plan::new(&ctx, vec![true]);
        plan.add_route(&ctx, 0, 0, vec![4, 2, 0]);
        plan.add_route(&ctx, 0, 0, vec![1, 3, 5]);
        let before = plan.cost(&ctx, &w);
        let knn = neighbor_lists(&inst, 5);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        assert!(local_search(&ctx, &mut plan, &knn, 50, &w, &mut rng) > 0);
        assert!(plan.cost(&ctx, &w) < before);
        let search = Search { ctx: &ctx, w, arc_group: arc_groups(&inst) };
        for nb in Neighborhood::ALL {
            assert!(search.find(&plan, nb, &(0..6).collect::<Vec<_>>(), &knn, 1).is_none(), "{nb:?}");
        }
    }
}
