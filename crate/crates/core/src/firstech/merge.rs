//! Groups demand copies of one TP into as few vessel deliveries as possible:
//! bin packing with a pairwise window-compatibility condition.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct MergeProblem {
    pub demands: Vec<f64>,
    /// (TA, TB) per point.
    pub windows: Vec<(f64, f64)>,
    pub cap: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MergeError {
    #[error("point {point} with demand {demand} exceeds the bin size {cap}")]
    Oversized { point: usize, demand: f64, cap: f64 },
    #[error("bin size must be positive")]
    BadCap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grouping {
    /// Group index of every point.
    pub group: Vec<usize>,
    pub count: usize,
    /// False when the node budget ran out before optimality was proven.
    pub optimal: bool,
}

fn diff(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs()
    }
}

impl MergeProblem {
    pub fn compatible(&self, i: usize, j: usize) -> bool {
        let (a, b) = (self.windows[i], self.windows[j]);
        diff(a.0, b.0) <= self.tolerance + 1e-12 && diff(a.1, b.1) <= self.tolerance + 1e-12
    }

    /// ceil(ΣD / CAP).
    pub fn lower_bound(&self) -> usize {
        let total: f64 = self.demands.iter().sum();
        if self.demands.is_empty() {
            0
        } else {
            ((total / self.cap) - 1e-9).ceil().max(1.0) as usize
        }
    }
}

struct Search<'a> {
    p: &'a MergeProblem,
    order: Vec<usize>,
    bins: Vec<(f64, Vec<usize>)>,
    assign: Vec<usize>,
    best: Vec<usize>,
    best_count: usize,
    bound: usize,
    nodes: usize,
    budget: usize,
}

impl Search<'_> {
    fn dfs(&mut self, k: usize) {
        if self.best_count == self.bound || self.nodes >= self.budget {
            return;
        }
        self.nodes += 1;
        if self.bins.len() >= self.best_count {
            return;
        }
        if k == self.order.len() {
            self.best_count = self.bins.len();
            self.best = self.assign.clone();
            return;
        }
        let j = self.order[k];
        let d = self.p.demands[j];
        for b in 0..self.bins.len() {
            let (load, ref members) = self.bins[b];
            if load + d > self.p.cap + 1e-9 || !members.iter().all(|&i| self.p.compatible(i, j)) {
                continue;
            }
            self.bins[b].0 += d;
            self.bins[b].1.push(j);
            self.assign[j] = b;
            self.dfs(k + 1);
            self.bins[b].1.pop();
            self.bins[b].0 -= d;
        }
        // opening a new bin is tried once: empty bins are interchangeable
        if self.bins.len() + 1 < self.best_count {
            self.bins.push((d, vec![j]));
            self.assign[j] = self.bins.len() - 1;
            self.dfs(k + 1);
            self.bins.pop();
        }
    }
}

/// First fit on points sorted by decreasing demand.
fn first_fit(p: &MergeProblem, order: &[usize]) -> Vec<usize> {
    let mut bins: Vec<(f64, Vec<usize>)> = Vec::new();
    let mut group = vec![0; p.demands.len()];
    for &j in order {
        let d = p.demands[j];
        let slot = bins.iter().position(|(l, m)| *l + d <= p.cap + 1e-9 && m.iter().all(|&i| p.compatible(i, j)));
        match slot {
            Some(b) => {
                bins[b].0 += d;
                bins[b].1.push(j);
                group[j] = b;
            }
            None => {
                bins.push((d, vec![j]));
                group[j] = bins.len() - 1;
            }
        }
    }
    group
}

/// Minimum number of groups, by depth-first branch and bound seeded with
/// first fit. `budget` bounds the number of search nodes.
pub fn merge(p: &MergeProblem, budget: usize) -> Result<Grouping, MergeError> {
    if !(p.cap > 0.0) {
        return Err(MergeError::BadCap);
    }
    if let Some(j) = (0..p.demands.len()).find(|&j| p.demands[j] > p.cap + 1e-9) {
        return Err(MergeError::Oversized { point: j, demand: p.demands[j], cap: p.cap });
    }
    let n = p.demands.len();
    if n == 0 {
        return Ok(Grouping { group: vec![], count: 0, optimal: true });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| p.demands[b].total_cmp(&p.demands[a]).then(a.cmp(&b)));
    let ff = first_fit(p, &order);
    let ff_count = ff.iter().max().unwrap() + 1;
    let bound = p.lower_bound();
    let mut s = Search {
        p,
        order,
        bins: Vec::new(),
        assign: vec![0; n],
        best: ff,
        best_count: ff_count,
        bound,
        nodes: 0,
        budget,
    };
    if ff_count > bound {
        s.dfs(0);
    }
    let optimal = s.best_count == bound || s.nodes < budget;
    Ok(Grouping { group: s.best, count: s.best_count, optimal })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn same_window(demands: &[f64], cap: f64) -> MergeProblem {
        MergeProblem { demands: demands.to_vec(), windows: vec![(0.0, 5.0); demands.len()], cap, tolerance: 2.0 }
    }

    #[test]
    fn everything_fits_one_bin() {
        assert_eq!(merge(&same_window(&[3.0, 4.0, 5.0], 12.0), 1000).unwrap().count, 1);
    }

    #[test]
    fn no_pair_fits() {
        assert_eq!(merge(&same_window(&[3.0, 4.0, 5.0], 5.0), 1000).unwrap().count, 3);
    }

    #[test]
    fn tight_packing_is_proven_optimal() {
        let p = same_window(&[6.0, 5.0, 5.0, 4.0, 4.0, 3.0, 3.0], 10.0);
        let g = merge(&p, 100_000).unwrap();
        assert_eq!(g.count, 3);
        assert!(g.optimal);
    }

    #[test]
    fn windows_split_groups() {
        let mut p = same_window(&[1.0, 1.0], 10.0);
        p.windows[1] = (0.0, 9.0);
        assert_eq!(merge(&p, 1000).unwrap().count, 2);
    }

    #[test]
    fn oversized_is_an_error() {
        assert!(matches!(merge(&same_window(&[3.0, 7.0], 5.0), 10), Err(MergeError::Oversized { point: 1, .. })));
    }
}
