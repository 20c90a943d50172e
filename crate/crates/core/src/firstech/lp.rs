//! Two-phase revised simplex on column-oriented LPs: min c·x, rows with
//! `<=`, `=` or `>=` senses, x >= 0.

use thiserror::Error;

const EPS: f64 = 1e-9;
const REINVERT: usize = 64;
/// Consecutive degenerate pivots before switching to Bland's rule.
const DEGENERATE_STREAK: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub cost: f64,
    /// (row, coefficient) pairs.
    pub entries: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Lp {
    pub rhs: Vec<f64>,
    pub sense: Vec<Sense>,
    pub cols: Vec<Column>,
}

impl Lp {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_row(&mut self, sense: Sense, rhs: f64) -> usize {
        self.rhs.push(rhs);
        self.sense.push(sense);
        self.rhs.len() - 1
    }

    pub fn add_col(&mut self, cost: f64, entries: Vec<(usize, f64)>) -> usize {
        self.cols.push(Column { cost, entries });
        self.cols.len() - 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    /// Row duals: reduced cost of column j is c_j - duals·A_j.
    pub duals: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LpError {
    #[error("LP is infeasible")]
    Infeasible,
    #[error("LP is unbounded")]
    Unbounded,
    #[error("simplex stalled after {0} iterations")]
    IterationLimit(usize),
    #[error("singular basis")]
    Singular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Structural,
    Slack,
    Artificial,
}

struct Tableau {
    m: usize,
    /// Standard-form columns (rows already sign-normalized).
    cols: Vec<Vec<(usize, f64)>>,
    kinds: Vec<Kind>,
    b: Vec<f64>,
    basis: Vec<usize>,
    /// Row-major inverse of the basis matrix.
    binv: Vec<f64>,
    xb: Vec<f64>,
    iterations: usize,
    limit: usize,
}

impl Tableau {
    fn col_times_binv(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut u = vec![0.0; m];
        for &(r, a) in &self.cols[j] {
            for (i, ui) in u.iter_mut().enumerate() {
                *ui += self.binv[i * m + r] * a;
            }
        }
        u
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (i, &bj) in self.basis.iter().enumerate() {
            let cb = cost[bj];
            if cb != 0.0 {
                for (r, yr) in y.iter_mut().enumerate() {
                    *yr += cb * self.binv[i * m + r];
                }
            }
        }
        y
    }

    /// Gauss-Jordan inversion of the current basis with partial pivoting.
    fn reinvert(&mut self) -> Result<(), LpError> {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (i, &bj) in self.basis.iter().enumerate() {
            for &(r, v) in &self.cols[bj] {
                a[r * m + i] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let piv = (col..m).max_by(|&p, &q| a[p * m + col].abs().total_cmp(&a[q * m + col].abs())).unwrap();
            if a[piv * m + col].abs() < 1e-12 {
                return Err(LpError::Singular);
            }
            if piv != col {
                for k in 0..m {
                    a.swap(piv * m + k, col * m + k);
                    inv.swap(piv * m + k, col * m + k);
                }
            }
            let d = a[col * m + col];
            for k in 0..m {
                a[col * m + k] /= d;
                inv[col * m + k] /= d;
            }
            for r in 0..m {
                if r != col {
                    let f = a[r * m + col];
                    if f != 0.0 {
                        for k in 0..m {
                            a[r * m + k] -= f * a[col * m + k];
                            inv[r * m + k] -= f * inv[col * m + k];
                        }
                    }
                }
            }
        }
        self.binv = inv;
        for i in 0..m {
            self.xb[i] = (0..m).map(|r| self.binv[i * m + r] * self.b[r]).sum::<f64>().max(0.0);
        }
        Ok(())
    }

    fn pivot(&mut self, row: usize, enter: usize, u: &[f64]) {
        let m = self.m;
        let p = u[row];
        let theta = self.xb[row] / p;
        for i in 0..m {
            if i != row {
                self.xb[i] = (self.xb[i] - theta * u[i]).max(0.0);
            }
        }
        self.xb[row] = theta;
        for k in 0..m {
            self.binv[row * m + k] /= p;
        }
        for i in 0..m {
            if i != row && u[i] != 0.0 {
                let f = u[i];
                for k in 0..m {
                    self.binv[i * m + k] -= f * self.binv[row * m + k];
                }
            }
        }
        self.basis[row] = enter;
    }

    /// Primal simplex for `cost`; columns with `enterable[j] == false` never enter.
    fn run(&mut self, cost: &[f64], enterable: &[bool]) -> Result<(), LpError> {
        let mut degenerate = 0usize;
        let mut since_inv = 0usize;
        loop {
            if self.iterations >= self.limit {
                return Err(LpError::IterationLimit(self.iterations));
            }
            if since_inv >= REINVERT {
                self.reinvert()?;
                since_inv = 0;
            }
            let y = self.duals(cost);
            let bland = degenerate >= DEGENERATE_STREAK;
            let mut in_basis = vec![false; self.cols.len()];
            for &bj in &self.basis {
                in_basis[bj] = true;
            }
            let mut enter: Option<(usize, f64)> = None;
            for j in 0..self.cols.len() {
                if in_basis[j] || !enterable[j] {
                    continue;
                }
                let d = cost[j] - self.cols[j].iter().map(|&(r, a)| y[r] * a).sum::<f64>();
                if d < -EPS {
                    if bland {
                        enter = Some((j, d));
                        break;
                    }
                    if enter.is_none_or(|(_, best)| d < best) {
                        enter = Some((j, d));
                    }
                }
            }
            let Some((j, _)) = enter else { return Ok(()) };
            let u = self.col_times_binv(j);
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let basic_art = self.kinds[self.basis[i]] == Kind::Artificial && !enterable[self.basis[i]];
                // artificials kept in the basis at zero block any movement
                let ratio = if basic_art && u[i].abs() > EPS && self.xb[i] <= EPS {
                    0.0
                } else if u[i] > EPS {
                    self.xb[i] / u[i]
                } else {
                    continue;
                };
                let better = match leave {
                    None => true,
                    Some((l, best)) => {
                        if ratio < best - EPS {
                            true
                        } else if ratio <= best + EPS {
                            if bland {
                                self.basis[i] < self.basis[l]
                            } else {
                                u[i].abs() > u[l].abs()
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            let Some((row, ratio)) = leave else { return Err(LpError::Unbounded) };
            if ratio <= EPS {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(row, j, &u);
            self.iterations += 1;
            since_inv += 1;
        }
    }
}

/// Solves `lp`; returns the optimal primal point and row duals.
pub fn solve(lp: &Lp) -> Result<LpSolution, LpError> {
    let m = lp.rhs.len();
    let n = lp.cols.len();
    if m == 0 {
        if lp.cols.iter().any(|c| c.cost < -EPS) {
            return Err(LpError::Unbounded);
        }
        return Ok(LpSolution { x: vec![0.0; n], duals: vec![], objective: 0.0, iterations: 0 });
    }
    // normalize to b >= 0
    let flip: Vec<f64> = lp.rhs.iter().map(|&b| if b < 0.0 { -1.0 } else { 1.0 }).collect();
    let sense: Vec<Sense> = lp
        .sense
        .iter()
        .zip(&flip)
        .map(|(&s, &f)| match (s, f < 0.0) {
            (Sense::Le, true) => Sense::Ge,
            (Sense::Ge, true) => Sense::Le,
            (s, _) => s,
        })
        .collect();
    let b: Vec<f64> = lp.rhs.iter().zip(&flip).map(|(b, f)| b * f).collect();
    let mut cols: Vec<Vec<(usize, f64)>> = lp
        .cols
        .iter()
        .map(|c| {
            let mut dense = vec![0.0; m];
            for &(r, a) in &c.entries {
                dense[r] += a * flip[r];
            }
            dense.into_iter().enumerate().filter(|(_, a)| *a != 0.0).collect()
        })
        .collect();
    let mut kinds = vec![Kind::Structural; n];
    let mut basis = vec![usize::MAX; m];
    for r in 0..m {
        match sense[r] {
            Sense::Le => {
                cols.push(vec![(r, 1.0)]);
                kinds.push(Kind::Slack);
                basis[r] = cols.len() - 1;
            }
            Sense::Ge => {
                cols.push(vec![(r, -1.0)]);
                kinds.push(Kind::Slack);
            }
            Sense::Eq => {}
        }
    }
    for r in 0..m {
        if basis[r] == usize::MAX {
            cols.push(vec![(r, 1.0)]);
            kinds.push(Kind::Artificial);
            basis[r] = cols.len() - 1;
        }
    }
    let total = cols.len();
    let mut binv = vec![0.0; m * m];
    for i in 0..m {
        binv[i * m + i] = 1.0;
    }
    let mut t = Tableau {
        m,
        cols,
        kinds,
        xb: b.clone(),
        b,
        basis,
        binv,
        iterations: 0,
        limit: 50 * (m + total) + 1000,
    };
    let has_art = t.kinds.contains(&Kind::Artificial);
    if has_art {
        let cost1: Vec<f64> = t.kinds.iter().map(|&k| if k == Kind::Artificial { 1.0 } else { 0.0 }).collect();
        let all = vec![true; total];
        t.run(&cost1, &all)?;
        let infeas: f64 = (0..m).filter(|&i| t.kinds[t.basis[i]] == Kind::Artificial).map(|i| t.xb[i]).sum();
        let scale = 1.0 + t.b.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        if infeas > 1e-7 * scale {
            return Err(LpError::Infeasible);
        }
        // drive zero-level artificials out where some other column can replace them
        for i in 0..m {
            if t.kinds[t.basis[i]] != Kind::Artificial {
                continue;
            }
            let in_basis: Vec<usize> = t.basis.clone();
            let cand = (0..total).find(|&j| {
                t.kinds[j] != Kind::Artificial && !in_basis.contains(&j) && t.col_times_binv(j)[i].abs() > 1e-7
            });
            if let Some(j) = cand {
                let u = t.col_times_binv(j);
                t.pivot(i, j, &u);
            }
        }
    }
    let mut cost2: Vec<f64> = lp.cols.iter().map(|c| c.cost).collect();
    cost2.resize(total, 0.0);
    let enterable: Vec<bool> = t.kinds.iter().map(|&k| k != Kind::Artificial).collect();
    t.run(&cost2, &enterable)?;
    t.reinvert()?;
    let mut x = vec![0.0; n];
    for (i, &bj) in t.basis.iter().enumerate() {
        if bj < n {
            x[bj] = t.xb[i];
        }
    }
    let y = t.duals(&cost2);
    let duals: Vec<f64> = y.iter().zip(&flip).map(|(v, f)| v * f).collect();
    let objective = x.iter().zip(&lp.cols).map(|(x, c)| x * c.cost).sum();
    Ok(LpSolution { x, duals, objective, iterations: t.iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_by_one() {
        let mut lp = Lp::new();
        let r = lp.add_row(Sense::Eq, 1.0);
        lp.add_col(3.5, vec![(r, 1.0)]);
        let s = solve(&lp).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-12);
        assert!((s.duals[0] - 3.5).abs() < 1e-12);
    }

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y st x <= 4, 2y <= 12, 3x + 2y <= 18 -> 36 at (2, 6)
        let mut lp = Lp::new();
        let a = lp.add_row(Sense::Le, 4.0);
        let b = lp.add_row(Sense::Le, 12.0);
        let c = lp.add_row(Sense::Le, 18.0);
        lp.add_col(-3.0, vec![(a, 1.0), (c, 3.0)]);
        lp.add_col(-5.0, vec![(b, 2.0), (c, 2.0)]);
        let s = solve(&lp).unwrap();
        assert!((s.objective + 36.0).abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = Lp::new();
        let r = lp.add_row(Sense::Ge, 2.0);
        lp.add_col(1.0, vec![(r, -1.0)]);
        assert_eq!(solve(&lp), Err(LpError::Infeasible));
        let mut lp = Lp::new();
        let r = lp.add_row(Sense::Ge, 1.0);
        lp.add_col(-1.0, vec![(r, 1.0)]);
        assert_eq!(solve(&lp), Err(LpError::Unbounded));
    }
}
