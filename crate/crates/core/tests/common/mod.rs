//! Independent brute-force oracles for the first echelon and randomized trial drivers.
#![allow(dead_code)]

pub mod search;

use lrp2e::firstech::lp::{self, Lp, LpError, Sense};
use lrp2e::firstech::{branch_and_price, merge, price, simulate, BnpParams, FirstechError, Group, MergeProblem, Restrictions};
use lrp2e::io::generate::{generate_seeded, GenSpec};
use lrp2e::Instance;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every set partition of `0..n` as block labels (restricted growth strings).
pub fn partitions(n: usize) -> Vec<Vec<usize>> {
    fn rec(i: usize, n: usize, cur: &mut Vec<usize>, max: usize, out: &mut Vec<Vec<usize>>) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        for b in 0..=max + 1 {
            cur.push(b);
            rec(i + 1, n, cur, max.max(b), out);
            cur.pop();
        }
    }
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    let mut cur = vec![0];
    rec(1, n, &mut cur, 0, &mut out);
    out
}

fn blocks(labels: &[usize]) -> Vec<Vec<usize>> {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    (0..k).map(|b| (0..labels.len()).filter(|&i| labels[i] == b).collect()).collect()
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let x = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, x);
            out.push(p);
        }
    }
    out
}

// ---------------------------------------------------------------- merge

pub fn merge_brute(p: &MergeProblem) -> usize {
    let n = p.demands.len();
    partitions(n)
        .into_iter()
        .filter(|lab| {
            blocks(lab).iter().all(|b| {
                b.iter().map(|&i| p.demands[i]).sum::<f64>() <= p.cap + 1e-9
                    && b.iter().all(|&i| b.iter().all(|&j| pair_ok(p, i, j)))
            })
        })
        .map(|lab| lab.iter().max().map_or(0, |m| m + 1))
        .min()
        .unwrap_or(0)
}

fn pair_ok(p: &MergeProblem, i: usize, j: usize) -> bool {
    let (a, b) = (p.windows[i], p.windows[j]);
    (a.0 - b.0).abs() <= p.tolerance + 1e-12 && (a.1 - b.1).abs() <= p.tolerance + 1e-12
}

pub fn random_merge(rng: &mut ChaCha8Rng) -> MergeProblem {
    let n = rng.gen_range(1..=8);
    let cap = rng.gen_range(2.0..6.0);
    let demands = (0..n).map(|_| rng.gen_range(0.1..cap)).collect();
    let windows = (0..n)
        .map(|_| {
            let a: f64 = rng.gen_range(0.0..4.0);
            (a, a + rng.gen_range(0.5..6.0))
        })
        .collect();
    MergeProblem { demands, windows, cap, tolerance: rng.gen_range(0.5..3.0) }
}

/// Runs `trials` random merge problems against the partition oracle.
pub fn merge_trials(trials: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in 0..trials {
        let p = random_merge(&mut rng);
        let g = merge(&p, 10_000_000).map_err(|e| format!("trial {t}: {e}"))?;
        let want = merge_brute(&p);
        if g.count != want || !g.optimal {
            return Err(format!("trial {t}: merge gives {} (optimal {}), brute force {want}: {p:?}", g.count, g.optimal));
        }
        for b in blocks(&g.group) {
            let load: f64 = b.iter().map(|&i| p.demands[i]).sum();
            if load > p.cap + 1e-9 || !b.iter().all(|&i| b.iter().all(|&j| pair_ok(&p, i, j))) {
                return Err(format!("trial {t}: invalid group {b:?}"));
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- LP

/// Minimum over all basic feasible solutions of the standard form; `None` when infeasible.
pub fn lp_vertex_min(lp: &Lp) -> Option<f64> {
    let m = lp.rhs.len();
    let mut cols: Vec<(f64, Vec<f64>)> = lp
        .cols
        .iter()
        .map(|c| {
            let mut a = vec![0.0; m];
            for &(i, v) in &c.entries {
                a[i] += v;
            }
            (c.cost, a)
        })
        .collect();
    for (i, s) in lp.sense.iter().enumerate() {
        let sign = match s {
            Sense::Le => 1.0,
            Sense::Ge => -1.0,
            Sense::Eq => continue,
        };
        let mut a = vec![0.0; m];
        a[i] = sign;
        cols.push((0.0, a));
    }
    let n = cols.len();
    let mut best: Option<f64> = None;
    let mut pick = Vec::new();
    fn choose(start: usize, n: usize, k: usize, pick: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if pick.len() == k {
            f(pick);
            return;
        }
        for j in start..n {
            pick.push(j);
            choose(j + 1, n, k, pick, f);
            pick.pop();
        }
    }
    choose(0, n, m, &mut pick, &mut |basis| {
        // Gaussian elimination with partial pivoting on [B | b]
        let mut a: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                let mut row: Vec<f64> = basis.iter().map(|&j| cols[j].1[i]).collect();
                row.push(lp.rhs[i]);
                row
            })
            .collect();
        for c in 0..m {
            let p = (c..m).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).unwrap();
            if a[p][c].abs() < 1e-10 {
                return;
            }
            a.swap(c, p);
            for r in 0..m {
                if r != c {
                    let f = a[r][c] / a[c][c];
                    for k in c..=m {
                        a[r][k] -= f * a[c][k];
                    }
                }
            }
        }
        let x: Vec<f64> = (0..m).map(|i| a[i][m] / a[i][i]).collect();
        if x.iter().all(|&v| v >= -1e-9) {
            let obj: f64 = basis.iter().zip(&x).map(|(&j, v)| cols[j].0 * v).sum();
            best = Some(best.map_or(obj, |b: f64| b.min(obj)));
        }
    });
    best
}

/// Small bounded LP: a row bounding the sum of all variables keeps it bounded.
pub fn random_lp(rng: &mut ChaCha8Rng) -> Lp {
    let mut lp = Lp::new();
    let m = rng.gen_range(1..=3);
    let n = rng.gen_range(1..=5);
    for _ in 0..m {
        let sense = [Sense::Le, Sense::Eq, Sense::Ge][rng.gen_range(0..3)];
        lp.add_row(sense, rng.gen_range(0.0..5.0_f64).round());
    }
    lp.add_row(Sense::Le, 10.0);
    for _ in 0..n {
        let mut e: Vec<(usize, f64)> = Vec::new();
        for i in 0..m {
            let v = rng.gen_range(-2.0..3.0_f64).round();
            if rng.gen_bool(0.7) && v != 0.0 {
                e.push((i, v));
            }
        }
        e.push((m, 1.0));
        lp.add_col(rng.gen_range(-3.0..5.0_f64).round(), e);
    }
    lp
}

pub fn lp_trials(trials: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in 0..trials {
        let lp = random_lp(&mut rng);
        let want = lp_vertex_min(&lp);
        match (lp::solve(&lp), want) {
            (Ok(sol), Some(w)) => {
                if (sol.objective - w).abs() > 1e-6 {
                    return Err(format!("trial {t}: objective {} vs oracle {w}", sol.objective));
                }
                check_duals(&lp, &sol.duals, sol.objective).map_err(|e| format!("trial {t}: {e}"))?;
            }
            (Err(LpError::Infeasible), None) => {}
            (got, want) => return Err(format!("trial {t}: solver {got:?}, oracle {want:?}")),
        }
    }
    Ok(())
}

fn check_duals(lp: &Lp, y: &[f64], obj: f64) -> Result<(), String> {
    for (j, c) in lp.cols.iter().enumerate() {
        let rc = c.cost - c.entries.iter().map(|&(i, v)| y[i] * v).sum::<f64>();
        if rc < -1e-6 {
            return Err(format!("column {j} has reduced cost {rc}"));
        }
    }
    for (i, s) in lp.sense.iter().enumerate() {
        let ok = match s {
            Sense::Le => y[i] <= 1e-7,
            Sense::Ge => y[i] >= -1e-7,
            Sense::Eq => true,
        };
        if !ok {
            return Err(format!("dual {i} has the wrong sign: {}", y[i]));
        }
    }
    let dual_obj: f64 = y.iter().zip(&lp.rhs).map(|(a, b)| a * b).sum();
    if (dual_obj - obj).abs() > 1e-6 {
        return Err(format!("dual objective {dual_obj} differs from primal {obj}"));
    }
    Ok(())
}

// ---------------------------------------------------------------- vessel routing

pub fn vessel_instance(seed: u64) -> Instance {
    let mut inst = generate_seeded(&GenSpec::new(1, 5, 3).unwrap(), seed);
    for v in &mut inst.vessels {
        v.count = 1 + (seed as usize + v.capacity as usize) % 2;
    }
    inst
}

pub fn random_groups(inst: &Instance, n: usize, rng: &mut ChaCha8Rng) -> Vec<Group> {
    let tps: Vec<usize> = (0..inst.tps.len()).filter(|&t| inst.tp_reachable(t)).collect();
    (0..n)
        .map(|_| {
            let open: f64 = if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.0..2.0) };
            Group {
                tp: tps[rng.gen_range(0..tps.len())],
                quantity: rng.gen_range(0.5..6.0),
                open,
                deadline: open + rng.gen_range(0.3..4.0),
            }
        })
        .collect()
}

/// Minimum reduced cost over every elementary sequence `simulate` accepts.
pub fn espprc_brute(
    inst: &Instance,
    groups: &[Group],
    class: usize,
    duals: &[f64],
    class_dual: f64,
    restr: &Restrictions,
) -> Option<f64> {
    fn rec(
        inst: &Instance,
        groups: &[Group],
        class: usize,
        duals: &[f64],
        class_dual: f64,
        restr: &Restrictions,
        seq: &mut Vec<usize>,
        best: &mut Option<f64>,
    ) {
        if !seq.is_empty() {
            if let Some((cost, _, _)) = simulate(inst, groups, class, seq) {
                let tour = lrp2e::firstech::Tour { class, groups: seq.clone(), cost };
                if restr.admits(&tour) {
                    let rc = cost - seq.iter().map(|&g| duals[g]).sum::<f64>() - class_dual;
                    *best = Some(best.map_or(rc, |b: f64| b.min(rc)));
                }
            }
        }
        for g in 0..groups.len() {
            if !seq.contains(&g) {
                seq.push(g);
                rec(inst, groups, class, duals, class_dual, restr, seq, best);
                seq.pop();
            }
        }
    }
    let mut best = None;
    rec(inst, groups, class, duals, class_dual, restr, &mut Vec::new(), &mut best);
    best
}

pub fn espprc_trials(trials: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in 0..trials {
        let inst = vessel_instance(seed + t as u64);
        let n = rng.gen_range(1..=8);
        let groups = random_groups(&inst, n, &mut rng);
        let duals: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..8.0)).collect();
        let class_dual = -rng.gen_range(0.0..2.0);
        let mut restr = Restrictions::default();
        if rng.gen_bool(0.3) {
            restr.forbidden.push((rng.gen_range(0..=n), rng.gen_range(1..=n)));
        }
        if rng.gen_bool(0.2) {
            restr.forced.push((rng.gen_range(0..=n), rng.gen_range(1..=n)));
        }
        for class in 0..inst.vessels.len() {
            let want = espprc_brute(&inst, &groups, class, &duals, class_dual, &restr).filter(|&rc| rc < -1e-6);
            let got = price(&inst, &groups, class, &duals, class_dual, &restr, usize::MAX, 10_000_000);
            if !got.exact {
                return Err(format!("trial {t}: label budget hit"));
            }
            let best = got.columns.first().map(|c| c.reduced_cost);
            let agree = match (best, want) {
                (Some(a), Some(b)) => (a - b).abs() < 1e-9,
                (None, None) => true,
                _ => false,
            };
            if !agree {
                return Err(format!("trial {t} class {class}: labeling {best:?}, enumeration {want:?}"));
            }
            for c in &got.columns {
                let rc = c.tour.cost - c.tour.groups.iter().map(|&g| duals[g]).sum::<f64>() - class_dual;
                if (rc - c.reduced_cost).abs() > 1e-9 || !restr.admits(&c.tour) {
                    return Err(format!("trial {t}: column {:?} inconsistent", c.tour));
                }
            }
        }
    }
    Ok(())
}

/// Optimal vessel plan cost by enumerating partitions, orders and class assignments.
pub fn routing_brute(inst: &Instance, groups: &[Group]) -> Option<f64> {
    let nk = inst.vessels.len();
    let mut best: Option<f64> = None;
    for lab in partitions(groups.len()) {
        let bl = blocks(&lab);
        let costs: Vec<Vec<Option<f64>>> = bl
            .iter()
            .map(|b| {
                (0..nk)
                    .map(|k| {
                        permutations(b)
                            .iter()
                            .filter_map(|p| simulate(inst, groups, k, p).map(|r| r.0))
                            .fold(None, |m: Option<f64>, c| Some(m.map_or(c, |m| m.min(c))))
                    })
                    .collect()
            })
            .collect();
        // class assignment respecting fleet sizes
        fn assign(i: usize, costs: &[Vec<Option<f64>>], left: &mut [usize], acc: f64, best: &mut Option<f64>) {
            if i == costs.len() {
                *best = Some(best.map_or(acc, |b: f64| b.min(acc)));
                return;
            }
            for k in 0..left.len() {
                if let (Some(c), true) = (costs[i][k], left[k] > 0) {
                    left[k] -= 1;
                    assign(i + 1, costs, left, acc + c, best);
                    left[k] += 1;
                }
            }
        }
        let mut left: Vec<usize> = inst.vessels.iter().map(|v| v.count).collect();
        assign(0, &costs, &mut left, 0.0, &mut best);
    }
    best
}

pub fn routing_trials(trials: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in 0..trials {
        let inst = vessel_instance(seed + 1000 + t as u64);
        let n = rng.gen_range(1..=6);
        let groups = random_groups(&inst, n, &mut rng);
        let want = routing_brute(&inst, &groups);
        let got = branch_and_price(&inst, &groups, &BnpParams { node_limit: 100_000, ..Default::default() });
        match (got, want) {
            (Ok(r), Some(w)) => {
                if r.cost < w - 1e-6 || (r.optimal && (r.cost - w).abs() > 1e-6) {
                    return Err(format!("trial {t}: branch-and-price {} (optimal {}), brute force {w}", r.cost, r.optimal));
                }
                if !r.optimal {
                    return Err(format!("trial {t}: tree not closed within the node limit"));
                }
                if r.root_bound > w + 1e-6 {
                    return Err(format!("trial {t}: root bound {} above optimum {w}", r.root_bound));
                }
            }
            (Err(FirstechError::Infeasible(_) | FirstechError::Budget), None) => {}
            (got, want) => return Err(format!("trial {t}: branch-and-price {got:?}, brute force {want:?}")),
        }
    }
    Ok(())
}
