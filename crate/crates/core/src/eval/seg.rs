//! Route segments with time-travel window accounting.
//!
//! A late arrival at a node is charged as time warp (arrival minus closing
//! time) and service then starts at the closing time, so lateness never
//! propagates down the route. Segments concatenate in constant time, which
//! gives O(1) evaluation of any move expressible as a few joined segments.

use crate::model::{ArcMask, Instance, Matrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Seg {
    /// Second echelon node ids of the segment ends.
    pub first: usize,
    pub last: usize,
    pub cost: f64,
    pub dist: f64,
    pub load: f64,
    /// Duration including service and waiting, excluding warp.
    pub dur: f64,
    pub warp: f64,
    /// Earliest service start at `first`.
    pub earliest: f64,
    /// Latest service start at `first` that adds no warp.
    pub latest: f64,
}

impl Seg {
    pub fn node(v: usize, load: f64, service: f64, open: f64, close: f64) -> Self {
        Self { first: v, last: v, cost: 0.0, dist: 0.0, load, dur: service, warp: 0.0, earliest: open, latest: close }
    }
}

/// Arc data of one LEV class.
#[derive(Clone, Copy)]
pub struct Arcs<'a> {
    pub time: &'a Matrix,
    pub cost: &'a Matrix,
    pub dist: &'a Matrix,
    pub mask: &'a ArcMask,
    /// First customer node id; customer arcs below are never masked.
    pub first_customer: usize,
}

impl<'a> Arcs<'a> {
    pub fn new(instance: &'a Instance, mask: &'a ArcMask, class: usize) -> Self {
        Self {
            time: &instance.travel_time_second[class],
            cost: &instance.cost_second[class],
            dist: &instance.dist_second,
            mask,
            first_customer: instance.v2_customer(0),
        }
    }

    #[inline]
    pub fn masked(&self, i: usize, j: usize) -> bool {
        let f = self.first_customer;
        i >= f && j >= f && self.mask.is_masked(i - f, j - f)
    }

    #[inline]
    pub fn join(&self, a: &Seg, b: &Seg) -> Seg {
        let t = self.time.get(a.last, b.first);
        let mut cost = a.cost + b.cost + self.cost.get(a.last, b.first);
        if self.masked(a.last, b.first) {
            cost = f64::INFINITY;
        }
        let delta = a.dur - a.warp + t;
        let wait = (b.earliest - delta - a.latest).max(0.0);
        let warp = (a.earliest + delta - b.latest).max(0.0);
        Seg {
            first: a.first,
            last: b.last,
            cost,
            dist: a.dist + b.dist + self.dist.get(a.last, b.first),
            load: a.load + b.load,
            dur: a.dur + b.dur + t + wait,
            warp: a.warp + b.warp + warp,
            earliest: (b.earliest - delta).max(a.earliest) - wait,
            latest: (b.latest - delta).min(a.latest) + warp,
        }
    }

    pub fn chain(&self, parts: &[Seg]) -> Seg {
        let mut acc = parts[0];
        for p in &parts[1..] {
            acc = self.join(&acc, p);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Straight forward simulation with time travel: late arrivals are charged
    /// and service restarts at the closing time.
    fn simulate(nodes: &[(f64, f64, f64)], travel: f64, start: f64) -> (f64, f64) {
        let mut t = start.max(nodes[0].1);
        let mut warp = 0.0;
        if t > nodes[0].2 {
            warp += t - nodes[0].2;
            t = nodes[0].2;
        }
        for w in nodes.windows(2) {
            let (prev, cur) = (w[0], w[1]);
            let mut a = t + prev.0 + travel;
            if a < cur.1 {
                a = cur.1;
            }
            if a > cur.2 {
                warp += a - cur.2;
                a = cur.2;
            }
            t = a;
        }
        (t, warp)
    }

    #[test]
    fn chain_matches_simulation() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let n = rng.gen_range(1..7);
            let travel = 0.5;
            let time = Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { travel });
            let zero = Matrix::filled(n, n, 0.0);
            let mask = ArcMask::none(0);
            let arcs = Arcs { time: &time, cost: &zero, dist: &zero, mask: &mask, first_customer: n };
            let nodes: Vec<(f64, f64, f64)> = (0..n)
                .map(|_| {
                    let a = rng.gen_range(0.0..8.0);
                    (rng.gen_range(0.0..0.5), a, a + rng.gen_range(0.0..2.0))
                })
                .collect();
            let segs: Vec<Seg> = nodes.iter().enumerate().map(|(i, &(s, a, b))| Seg::node(i, 1.0, s, a, b)).collect();
            let whole = arcs.chain(&segs);
            // Starting at the earliest start reproduces the minimal warp.
            let (_, warp) = simulate(&nodes, travel, whole.earliest);
            assert!((whole.warp - warp).abs() < 1e-9, "{} vs {}", whole.warp, warp);
            // Any split point gives the same aggregate.
            let k = rng.gen_range(1..=n);
            let left = arcs.chain(&segs[..k]);
            let joined = if k < n { arcs.join(&left, &arcs.chain(&segs[k..])) } else { left };
            assert!((joined.warp - whole.warp).abs() < 1e-9);
            assert!((joined.dur - whole.dur).abs() < 1e-9);
        }
    }
}
