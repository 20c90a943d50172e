//! Vessel routes over merged demands and the elementary shortest path
//! pricing problem of the route master.
//!
//! Consecutive groups at the same TP form one visit: the vessel unloads once,
//! so the visit start must meet every member's window. Within a visit groups
//! appear in increasing index order, and a TP that was left is never revisited.

use crate::model::Instance;

/// A merged vessel delivery.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub tp: usize,
    pub quantity: f64,
    /// Earliest and latest vessel service start.
    pub open: f64,
    pub deadline: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Visit {
    pub tp: usize,
    pub arrival: f64,
    pub start: f64,
    pub groups: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tour {
    pub class: usize,
    pub groups: Vec<usize>,
    pub cost: f64,
}

/// Simulates `seq` for vessel `class`: departure, visits and travel cost;
/// `None` when the sequence breaks capacity, windows, laying limits,
/// navigability or the visit structure.
pub fn simulate(inst: &Instance, groups: &[Group], class: usize, seq: &[usize]) -> Option<(f64, Vec<Visit>, f64)> {
    let tt = &inst.travel_time_first[class];
    let cc = &inst.cost_first[class];
    let load: f64 = seq.iter().map(|&g| groups[g].quantity).sum();
    if load > inst.vessels[class].capacity + 1e-9 || seq.is_empty() {
        return None;
    }
    let mut visits: Vec<Visit> = Vec::new();
    for &g in seq {
        let grp = &groups[g];
        match visits.last_mut() {
            Some(v) if v.tp == grp.tp => {
                if *v.groups.last().unwrap() >= g || grp.open > v.start + 1e-9 || v.start > grp.deadline + 1e-9 {
                    return None;
                }
                v.groups.push(g);
            }
            _ => {
                if visits.iter().any(|v| v.tp == grp.tp) {
                    return None;
                }
                visits.push(Visit { tp: grp.tp, arrival: 0.0, start: 0.0, groups: vec![g] });
            }
        }
    }
    let mut cost = 0.0;
    let mut prev = 0usize;
    let mut ready = 0.0;
    let mut departure = 0.0;
    for (i, v) in visits.iter_mut().enumerate() {
        let node = inst.v1_tp(v.tp);
        let t = tt.get(prev, node);
        if !cc.get(prev, node).is_finite() {
            return None;
        }
        cost += cc.get(prev, node);
        let open = v.groups.iter().map(|&g| groups[g].open).fold(0.0, f64::max);
        let deadline = v.groups.iter().map(|&g| groups[g].deadline).fold(f64::INFINITY, f64::min);
        if i == 0 {
            // leave the hub late enough to arrive without waiting
            departure = (open - t).max(0.0);
            ready = departure;
        }
        v.arrival = ready + t;
        v.start = v.arrival.max(open);
        let tp = &inst.tps[v.tp];
        if v.start > deadline + 1e-9 || v.start - v.arrival + tp.unload_service_time > tp.laying_limit + 1e-9 {
            return None;
        }
        ready = v.start + tp.unload_service_time;
        prev = node;
    }
    if !cc.get(prev, 0).is_finite() {
        return None;
    }
    cost += cc.get(prev, 0);
    Some((cost, visits, departure))
}

/// Branching decisions applied inside pricing. Node 0 is the hub, node
/// `g + 1` is group `g`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Restrictions {
    pub forbidden: Vec<(usize, usize)>,
    pub forced: Vec<(usize, usize)>,
    /// (group, class): the group may only be served by that class.
    pub class_only: Vec<(usize, usize)>,
    /// (group, class): the group may not be served by that class.
    pub class_not: Vec<(usize, usize)>,
}

impl Restrictions {
    pub fn arc_allowed(&self, i: usize, j: usize) -> bool {
        if self.forbidden.contains(&(i, j)) {
            return false;
        }
        for &(a, b) in &self.forced {
            if a == i && a != 0 && b != j {
                return false;
            }
            if b == j && b != 0 && a != i {
                return false;
            }
        }
        true
    }

    pub fn class_allowed(&self, g: usize, k: usize) -> bool {
        !self.class_not.contains(&(g, k)) && self.class_only.iter().all(|&(h, c)| h != g || c == k)
    }

    pub fn admits(&self, tour: &Tour) -> bool {
        if !tour.groups.iter().all(|&g| self.class_allowed(g, tour.class)) {
            return false;
        }
        let nodes: Vec<usize> =
            std::iter::once(0).chain(tour.groups.iter().map(|g| g + 1)).chain(std::iter::once(0)).collect();
        nodes.windows(2).all(|w| self.arc_allowed(w[0], w[1]))
    }
}

fn set(bits: &mut [u64], i: usize) {
    bits[i / 64] |= 1 << (i % 64);
}

fn has(bits: &[u64], i: usize) -> bool {
    bits[i / 64] >> (i % 64) & 1 == 1
}

/// Labels in flat arrays; `bits` holds `words` entries per label.
struct Labels {
    words: usize,
    group: Vec<usize>,
    cost: Vec<f64>,
    start: Vec<f64>,
    load: Vec<f64>,
    bits: Vec<u64>,
    parent: Vec<Option<usize>>,
    dominated: Vec<bool>,
}

impl Labels {
    fn len(&self) -> usize {
        self.group.len()
    }

    fn bits(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }

    /// Whether label `a` dominates the candidate (`cost`, `start`, `load`, `bits`).
    fn dominates(&self, a: usize, cost: f64, start: f64, load: f64, bits: &[u64]) -> bool {
        self.cost[a] <= cost + 1e-9
            && self.start[a] <= start + 1e-9
            && self.load[a] <= load + 1e-9
            && self.bits(a).iter().zip(bits).all(|(x, y)| x & !y == 0)
    }

    fn dominated_by(&self, cost: f64, start: f64, load: f64, bits: &[u64], a: usize) -> bool {
        cost <= self.cost[a] + 1e-9
            && start <= self.start[a] + 1e-9
            && load <= self.load[a] + 1e-9
            && bits.iter().zip(self.bits(a)).all(|(x, y)| x & !y == 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Priced {
    pub reduced_cost: f64,
    pub tour: Tour,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PricingResult {
    /// Most negative first.
    pub columns: Vec<Priced>,
    /// False when the label budget cut the search short.
    pub exact: bool,
}

/// Labeling for vessel `class`: tours with reduced cost
/// `cost - Σ group_duals - class_dual` below -1e-6, at most `max_cols`.
#[allow(clippy::too_many_arguments)]
pub fn price(
    inst: &Instance,
    groups: &[Group],
    class: usize,
    group_duals: &[f64],
    class_dual: f64,
    restr: &Restrictions,
    max_cols: usize,
    label_budget: usize,
) -> PricingResult {
    let n = groups.len();
    let words = n.div_ceil(64).max(1);
    let tt = &inst.travel_time_first[class];
    let cc = &inst.cost_first[class];
    let cap = inst.vessels[class].capacity;
    let node = |g: usize| inst.v1_tp(groups[g].tp);
    let usable: Vec<bool> = (0..n)
        .map(|g| {
            restr.class_allowed(g, class)
                && cc.get(0, node(g)).is_finite()
                && cc.get(node(g), 0).is_finite()
                && groups[g].quantity <= cap + 1e-9
        })
        .collect();

    // shortest path cost back to the hub bounds the travel of any completion
    let nv = inst.tps.len() + 1;
    let mut sp = vec![f64::INFINITY; nv];
    sp[0] = 0.0;
    for _ in 0..nv {
        for u in 0..nv {
            for v in 0..nv {
                sp[u] = sp[u].min(cc.get(u, v) + sp[v]);
            }
        }
    }
    let min_return: Vec<f64> = (0..n).map(|g| sp[node(g)]).collect();
    let mut labels = Labels {
        words,
        group: Vec::new(),
        cost: Vec::new(),
        start: Vec::new(),
        load: Vec::new(),
        bits: Vec::new(),
        parent: Vec::new(),
        dominated: Vec::new(),
    };
    let mut at: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut queue = std::collections::VecDeque::new();
    let mut exact = true;

    // groups that can no longer be reached in time from a visit starting at `start` at `tp`
    let late = |bits: &mut [u64], tp: usize, start: f64| {
        let ready = start + inst.tps[tp].unload_service_time;
        for h in 0..n {
            if groups[h].tp != tp && ready + tt.get(inst.v1_tp(tp), node(h)) > groups[h].deadline + 1e-9 {
                set(bits, h);
            }
        }
    };
    #[allow(clippy::too_many_arguments)]
    let push = |labels: &mut Labels,
                at: &mut Vec<Vec<usize>>,
                queue: &mut std::collections::VecDeque<usize>,
                g: usize,
                cost: f64,
                start: f64,
                load: f64,
                bits: &[u64],
                parent: Option<usize>| {
        let gain: f64 = (0..n).filter(|&h| usable[h] && !has(bits, h)).map(|h| group_duals[h].max(0.0)).sum();
        if cost + min_return[g] - gain - class_dual >= -1e-6 {
            return;
        }
        if at[g].iter().any(|&o| labels.dominates(o, cost, start, load, bits)) {
            return;
        }
        let id = labels.len();
        at[g].retain(|&o| {
            if labels.dominated_by(cost, start, load, bits, o) {
                labels.dominated[o] = true;
                false
            } else {
                true
            }
        });
        labels.group.push(g);
        labels.cost.push(cost);
        labels.start.push(start);
        labels.load.push(load);
        labels.bits.extend_from_slice(bits);
        labels.parent.push(parent);
        labels.dominated.push(false);
        at[g].push(id);
        queue.push_back(id);
    };

    let mut bits = vec![0u64; words];
    for h in 0..n {
        if !usable[h] || !restr.arc_allowed(0, h + 1) {
            continue;
        }
        let grp = &groups[h];
        let t = tt.get(0, node(h));
        let start = t.max(grp.open);
        if start > grp.deadline + 1e-9 || inst.tps[grp.tp].unload_service_time > inst.tps[grp.tp].laying_limit + 1e-9 {
            continue;
        }
        bits.fill(0);
        for o in 0..=h {
            if groups[o].tp == grp.tp {
                set(&mut bits, o);
            }
        }
        late(&mut bits, grp.tp, start);
        push(&mut labels, &mut at, &mut queue, h, cc.get(0, node(h)) - group_duals[h], start, grp.quantity, &bits, None);
    }

    let mut done: Vec<(f64, usize)> = Vec::new();
    let mut cur_bits = vec![0u64; words];
    while let Some(id) = queue.pop_front() {
        if labels.dominated[id] {
            continue;
        }
        if labels.len() > label_budget {
            exact = false;
            break;
        }
        cur_bits.copy_from_slice(labels.bits(id));
        let (g, cur_cost, cur_start, cur_load) = (labels.group[id], labels.cost[id], labels.start[id], labels.load[id]);
        let tp = groups[g].tp;
        if restr.arc_allowed(g + 1, 0) {
            let rc = cur_cost + cc.get(node(g), 0) - class_dual;
            if rc < -1e-6 {
                done.push((rc, id));
            }
        }
        for h in 0..n {
            if !usable[h] || has(&cur_bits, h) || !restr.arc_allowed(g + 1, h + 1) {
                continue;
            }
            let grp = &groups[h];
            if cur_load + grp.quantity > cap + 1e-9 {
                continue;
            }
            bits.copy_from_slice(&cur_bits);
            for o in 0..=h {
                if groups[o].tp == grp.tp {
                    set(&mut bits, o);
                }
            }
            let (start, cost) = if grp.tp == tp {
                if h < g || grp.open > cur_start + 1e-9 || cur_start > grp.deadline + 1e-9 {
                    continue;
                }
                (cur_start, cur_cost - group_duals[h])
            } else {
                let arrival = cur_start + inst.tps[tp].unload_service_time + tt.get(node(g), node(h));
                let start = arrival.max(grp.open);
                let site = &inst.tps[grp.tp];
                if start > grp.deadline + 1e-9
                    || start - arrival + site.unload_service_time > site.laying_limit + 1e-9
                    || !cc.get(node(g), node(h)).is_finite()
                {
                    continue;
                }
                // the TP being left can not be visited again
                for o in 0..n {
                    if groups[o].tp == tp {
                        set(&mut bits, o);
                    }
                }
                late(&mut bits, grp.tp, start);
                (start, cur_cost + cc.get(node(g), node(h)) - group_duals[h])
            };
            push(&mut labels, &mut at, &mut queue, h, cost, start, cur_load + grp.quantity, &bits, Some(id));
        }
    }

    done.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut columns: Vec<Priced> = Vec::new();
    for (rc, id) in done {
        if columns.len() >= max_cols {
            break;
        }
        let mut seq = Vec::new();
        let mut cur = Some(id);
        while let Some(i) = cur {
            seq.push(labels.group[i]);
            cur = labels.parent[i];
        }
        seq.reverse();
        if columns.iter().any(|c| c.tour.groups == seq) {
            continue;
        }
        let Some((cost, _, _)) = simulate(inst, groups, class, &seq) else { continue };
        columns.push(Priced { reduced_cost: rc, tour: Tour { class, groups: seq, cost } });
    }
    PricingResult { columns, exact }
}
