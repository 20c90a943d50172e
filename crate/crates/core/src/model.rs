//! Problem data, solutions, objective evaluation and the constraint validator.
//!
//! Node indexing follows two graphs. The first echelon graph holds the hub at
//! index 0 followed by every TP candidate (`1 + tp`). The second echelon graph
//! holds depots first, then TP candidates, then demand points; use
//! [`Instance::v2_depot`], [`Instance::v2_tp`] and [`Instance::v2_customer`]
//! to translate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance used in every time and quantity comparison.
pub const TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("structural error: {0}")]
    Structural(String),
    #[error("invalid instance: {0}")]
    Invalid(String),
}

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(ModelError::Invalid("ragged matrix".into()));
        }
        Ok(Self { rows: r, cols: c, data: rows.into_iter().flatten().collect() })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols.max(1)).map(<[f64]>::to_vec).take(self.rows).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, other: &Point) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub open: f64,
    pub close: f64,
}

impl TimeWindow {
    pub const UNBOUNDED: TimeWindow = TimeWindow { open: 0.0, close: f64::INFINITY };

    pub fn new(open: f64, close: f64) -> Self {
        Self { open, close }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceClass {
    Poor,
    Moderate,
    Spacious,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub name: String,
    pub pos: Point,
}

/// Candidate transshipment point on a quay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TpSite {
    pub name: String,
    pub pos: Point,
    pub establish_cost: f64,
    pub capacity: f64,
    pub laying_limit: f64,
    pub space_class: SpaceClass,
    /// Vessel unloading time at the TP (h).
    pub unload_service_time: f64,
    /// LEV / jack loading time at the TP (h).
    pub load_service_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandPoint {
    pub name: String,
    pub pos: Point,
    pub demand: f64,
    pub window: TimeWindow,
    pub service_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VesselClass {
    pub name: String,
    pub count: usize,
    pub capacity: f64,
    /// Generator draws, kept for reproducibility; matrices are authoritative.
    pub speed_kmh: Option<f64>,
    pub cost_per_km: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevClass {
    pub name: String,
    pub count: usize,
    pub capacity: f64,
    pub driving_range: f64,
    /// Only used when second echelon matrices are derived from coordinates.
    pub speed_kmh: Option<f64>,
    pub cost_per_km: Option<f64>,
}

/// How the second echelon matrices were obtained; kept so that writing an
/// instance reproduces the document it was read from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SecondEchelonSource {
    Euclidean { jack_speed_kmh: f64 },
    Explicit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub id: String,
    /// Classic 2E-VRP mode: TPs pre-established, no windows, jacks or range.
    pub relaxed: bool,
    pub hub: Site,
    pub depots: Vec<Site>,
    pub tps: Vec<TpSite>,
    pub customers: Vec<DemandPoint>,
    pub vessels: Vec<VesselClass>,
    pub levs: Vec<LevClass>,
    /// DIS over the second echelon graph (km).
    pub dist_second: Matrix,
    /// Per vessel class, over the first echelon graph. `inf` marks arcs the
    /// class cannot navigate.
    pub travel_time_first: Vec<Matrix>,
    pub cost_first: Vec<Matrix>,
    /// Per LEV class, over the second echelon graph.
    pub travel_time_second: Vec<Matrix>,
    pub cost_second: Vec<Matrix>,
    /// TP x customer.
    pub travel_time_jack: Matrix,
    pub jack_threshold: f64,
    pub horizon: f64,
    pub second_echelon: SecondEchelonSource,
}

impl Instance {
    #[inline]
    pub fn v2_depot(&self, d: usize) -> usize {
        d
    }

    #[inline]
    pub fn v2_tp(&self, t: usize) -> usize {
        self.depots.len() + t
    }

    #[inline]
    pub fn v2_customer(&self, c: usize) -> usize {
        self.depots.len() + self.tps.len() + c
    }

    pub fn v2_len(&self) -> usize {
        self.depots.len() + self.tps.len() + self.customers.len()
    }

    #[inline]
    pub fn v1_tp(&self, t: usize) -> usize {
        1 + t
    }

    pub fn total_demand(&self) -> f64 {
        self.customers.iter().map(|c| c.demand).sum()
    }

    /// DIS between TP `t` and customer `c`.
    #[inline]
    pub fn tp_customer_dist(&self, t: usize, c: usize) -> f64 {
        self.dist_second.get(self.v2_tp(t), self.v2_customer(c))
    }

    /// l_ij: customer `c` lies strictly closer than DTr to TP `t`.
    #[inline]
    pub fn within_jack_range(&self, t: usize, c: usize) -> bool {
        self.tp_customer_dist(t, c) < self.jack_threshold
    }

    /// Depot closest to TP `t` (ties to the lowest index).
    pub fn nearest_depot(&self, t: usize) -> usize {
        let v = self.v2_tp(t);
        (0..self.depots.len())
            .min_by(|&a, &b| {
                self.dist_second
                    .get(self.v2_depot(a), v)
                    .total_cmp(&self.dist_second.get(self.v2_depot(b), v))
                    .then(a.cmp(&b))
            })
            .expect("instance has at least one depot")
    }

    /// Earliest moment goods can be handed over at TP `t`: the fastest
    /// available vessel sails straight from the hub and unloads.
    pub fn vessel_release(&self, t: usize) -> f64 {
        let v = self.v1_tp(t);
        self.vessels
            .iter()
            .enumerate()
            .filter(|(_, k)| k.count > 0)
            .map(|(k, _)| self.travel_time_first[k].get(0, v))
            .fold(f64::INFINITY, f64::min)
            + self.tps[t].unload_service_time
    }

    /// Cheapest direct vessel round trip hub -> TP -> hub.
    pub fn vessel_round_trip(&self, t: usize) -> f64 {
        let v = self.v1_tp(t);
        self.vessels
            .iter()
            .enumerate()
            .filter(|(_, k)| k.count > 0)
            .map(|(k, _)| self.cost_first[k].get(0, v) + self.cost_first[k].get(v, 0))
            .fold(f64::INFINITY, f64::min)
    }

    /// Site capacity, capped by the total capacity of the vessel classes able
    /// to reach the TP.
    pub fn effective_capacity(&self, t: usize) -> f64 {
        let v = self.v1_tp(t);
        let fleet: f64 = self
            .vessels
            .iter()
            .enumerate()
            .filter(|(k, c)| c.count > 0 && self.cost_first[*k].get(0, v).is_finite() && self.cost_first[*k].get(v, 0).is_finite())
            .map(|(_, c)| c.count as f64 * c.capacity)
            .sum();
        self.tps[t].capacity.min(fleet)
    }

    /// Largest vessel able to reach TP `t`.
    pub fn access_capacity(&self, t: usize) -> f64 {
        let v = self.v1_tp(t);
        self.vessels
            .iter()
            .enumerate()
            .filter(|(k, c)| c.count > 0 && self.cost_first[*k].get(0, v).is_finite())
            .map(|(_, c)| c.capacity)
            .fold(0.0, f64::max)
    }

    /// A TP that no vessel class can reach is never usable.
    pub fn tp_reachable(&self, t: usize) -> bool {
        self.vessel_release(t).is_finite()
    }

    pub fn max_lev_capacity(&self) -> f64 {
        self.levs.iter().map(|l| l.capacity).fold(0.0, f64::max)
    }

    /// Checks the structural invariants of the data.
    pub fn check(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::Invalid(m));
        let n2 = self.v2_len();
        let n1 = 1 + self.tps.len();
        if self.depots.is_empty() {
            return bad("no depots".into());
        }
        if self.tps.is_empty() {
            return bad("no TP candidates".into());
        }
        if self.vessels.is_empty() || self.levs.is_empty() {
            return bad("empty fleet".into());
        }
        if self.dist_second.rows() != n2 || self.dist_second.cols() != n2 {
            return bad(format!("DIS must be {n2}x{n2}"));
        }
        for i in 0..n2 {
            if self.dist_second.get(i, i).abs() > TOL {
                return bad(format!("DIS[{i}][{i}] must be 0"));
            }
            for j in 0..n2 {
                let (a, b) = (self.dist_second.get(i, j), self.dist_second.get(j, i));
                if !a.is_finite() || a < 0.0 {
                    return bad(format!("DIS[{i}][{j}] must be finite and non-negative"));
                }
                if (a - b).abs() > TOL {
                    return bad(format!("DIS is not symmetric at ({i},{j}): {a} vs {b}"));
                }
            }
        }
        if self.travel_time_first.len() != self.vessels.len() || self.cost_first.len() != self.vessels.len() {
            return bad("one first echelon matrix pair per vessel class required".into());
        }
        for (k, (tt, cc)) in self.travel_time_first.iter().zip(&self.cost_first).enumerate() {
            if tt.rows() != n1 || tt.cols() != n1 || cc.rows() != n1 || cc.cols() != n1 {
                return bad(format!("first echelon matrices of vessel class {k} must be {n1}x{n1}"));
            }
            for i in 0..n1 {
                for j in 0..n1 {
                    let (t, c) = (tt.get(i, j), cc.get(i, j));
                    if t.is_nan() || c.is_nan() || t < 0.0 || c < 0.0 {
                        return bad(format!("vessel class {k}: arc ({i},{j}) must be non-negative"));
                    }
                    if t.is_infinite() != c.is_infinite() {
                        return bad(format!(
                            "vessel class {k}: arc ({i},{j}) unreachable in time but not in cost (or vice versa)"
                        ));
                    }
                }
            }
        }
        if self.travel_time_second.len() != self.levs.len() || self.cost_second.len() != self.levs.len() {
            return bad("one second echelon matrix pair per LEV class required".into());
        }
        for (k, (tt, cc)) in self.travel_time_second.iter().zip(&self.cost_second).enumerate() {
            if tt.rows() != n2 || tt.cols() != n2 || cc.rows() != n2 || cc.cols() != n2 {
                return bad(format!("second echelon matrices of LEV class {k} must be {n2}x{n2}"));
            }
        }
        if self.travel_time_jack.rows() != self.tps.len() || self.travel_time_jack.cols() != self.customers.len() {
            return bad("jack travel times must be |TP| x |HRC|".into());
        }
        if self.jack_threshold < 0.0 || (!self.relaxed && self.jack_threshold <= 0.0) {
            return bad("jack threshold must be positive".into());
        }
        for tp in &self.tps {
            if tp.capacity <= 0.0 || tp.establish_cost < 0.0 {
                return bad(format!("TP {}: capacity must be > 0 and establish cost >= 0", tp.name));
            }
            if tp.laying_limit + TOL < tp.unload_service_time {
                return bad(format!("TP {}: laying limit below unloading time", tp.name));
            }
        }
        for c in &self.customers {
            if c.demand <= 0.0 {
                return bad(format!("demand point {}: demand must be positive", c.name));
            }
            if c.window.open > c.window.close + TOL {
                return bad(format!("demand point {}: window opens after it closes", c.name));
            }
            if c.window.open < -TOL || (c.window.close.is_finite() && c.window.close > self.horizon + TOL) {
                return bad(format!("demand point {}: window outside the planning horizon", c.name));
            }
        }
        for v in &self.vessels {
            if v.capacity <= 0.0 {
                return bad(format!("vessel class {}: capacity must be positive", v.name));
            }
        }
        for l in &self.levs {
            if l.capacity <= 0.0 || l.driving_range <= 0.0 {
                return bad(format!("LEV class {}: capacity and range must be positive", l.name));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VehicleRef {
    pub class: usize,
    pub unit: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VesselVisit {
    pub tp: usize,
    pub quantity: f64,
    pub arrival: f64,
    pub start: f64,
    /// Demand points whose goods are unloaded during this visit (p_ijk).
    pub served: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VesselRoute {
    pub vessel: VehicleRef,
    pub departure: f64,
    pub visits: Vec<VesselVisit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevRoute {
    pub lev: VehicleRef,
    pub depot: usize,
    pub tp: usize,
    pub customers: Vec<usize>,
    /// Loading start at the TP (st^II at the TP).
    pub tp_start: f64,
    /// Service start at each customer, aligned with `customers`.
    pub starts: Vec<f64>,
    /// Vessel this LEV meets at its TP.
    pub vessel: Option<VehicleRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JackAssignment {
    pub tp: usize,
    pub customer: usize,
    /// Moment the jack starts loading at the TP (st^III_ij).
    pub tp_start: f64,
    pub vessel: Option<VehicleRef>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub first_travel: f64,
    pub second_travel: f64,
    pub establishment: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.first_travel + self.second_travel + self.establishment
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Solution {
    pub open_tps: Vec<usize>,
    pub vessel_routes: Vec<VesselRoute>,
    pub lev_routes: Vec<LevRoute>,
    pub jacks: Vec<JackAssignment>,
    pub cost: CostBreakdown,
}

impl Solution {
    pub fn is_open(&self, tp: usize) -> bool {
        self.open_tps.contains(&tp)
    }

    /// Recomputes and stores the cost breakdown.
    pub fn refresh_cost(&mut self, instance: &Instance) -> Result<(), ModelError> {
        self.cost = cost_breakdown(instance, self)?;
        Ok(())
    }
}

fn structural(msg: String) -> ModelError {
    ModelError::Structural(msg)
}

fn check_vessel_class(instance: &Instance, class: usize) -> Result<(), ModelError> {
    (class < instance.vessels.len())
        .then_some(())
        .ok_or_else(|| structural(format!("unknown vessel class {class}")))
}

/// Cost of the LEV arc sequence depot -> tp -> customers -> depot.
pub fn lev_route_cost(instance: &Instance, class: usize, depot: usize, tp: usize, customers: &[usize]) -> f64 {
    let m = &instance.cost_second[class];
    let mut prev = instance.v2_depot(depot);
    let mut total = m.get(prev, instance.v2_tp(tp));
    prev = instance.v2_tp(tp);
    for &c in customers {
        let v = instance.v2_customer(c);
        total += m.get(prev, v);
        prev = v;
    }
    total + m.get(prev, instance.v2_depot(depot))
}

pub fn lev_route_distance(instance: &Instance, depot: usize, tp: usize, customers: &[usize]) -> f64 {
    let m = &instance.dist_second;
    let mut prev = instance.v2_depot(depot);
    let mut total = m.get(prev, instance.v2_tp(tp));
    prev = instance.v2_tp(tp);
    for &c in customers {
        let v = instance.v2_customer(c);
        total += m.get(prev, v);
        prev = v;
    }
    total + m.get(prev, instance.v2_depot(depot))
}

pub fn vessel_route_cost(instance: &Instance, class: usize, tps: impl IntoIterator<Item = usize>) -> f64 {
    let m = &instance.cost_first[class];
    let mut prev = 0;
    let mut total = 0.0;
    for t in tps {
        let v = instance.v1_tp(t);
        total += m.get(prev, v);
        prev = v;
    }
    if prev == 0 {
        return 0.0;
    }
    total + m.get(prev, 0)
}

fn check_ids(instance: &Instance, solution: &Solution) -> Result<(), ModelError> {
    let nt = instance.tps.len();
    let nc = instance.customers.len();
    for &t in &solution.open_tps {
        if t >= nt {
            return Err(structural(format!("unknown TP {t}")));
        }
    }
    for r in &solution.vessel_routes {
        check_vessel_class(instance, r.vessel.class)?;
        for v in &r.visits {
            if v.tp >= nt {
                return Err(structural(format!("unknown TP {}", v.tp)));
            }
            if let Some(&c) = v.served.iter().find(|&&c| c >= nc) {
                return Err(structural(format!("unknown demand point {c}")));
            }
        }
    }
    for r in &solution.lev_routes {
        if r.lev.class >= instance.levs.len() {
            return Err(structural(format!("unknown LEV class {}", r.lev.class)));
        }
        if r.depot >= instance.depots.len() {
            return Err(structural(format!("unknown depot {}", r.depot)));
        }
        if r.tp >= nt {
            return Err(structural(format!("unknown TP {}", r.tp)));
        }
        if let Some(&c) = r.customers.iter().find(|&&c| c >= nc) {
            return Err(structural(format!("unknown demand point {c}")));
        }
        if let Some(v) = r.vessel {
            check_vessel_class(instance, v.class)?;
        }
    }
    for j in &solution.jacks {
        if j.tp >= nt || j.customer >= nc {
            return Err(structural(format!("jack assignment ({}, {}) out of range", j.tp, j.customer)));
        }
    }
    Ok(())
}

/// Cost terms of the objective, split per echelon.
pub fn cost_breakdown(instance: &Instance, solution: &Solution) -> Result<CostBreakdown, ModelError> {
    check_ids(instance, solution)?;
    let first_travel = solution
        .vessel_routes
        .iter()
        .map(|r| vessel_route_cost(instance, r.vessel.class, r.visits.iter().map(|v| v.tp)))
        .sum();
    let second_travel = solution
        .lev_routes
        .iter()
        .map(|r| lev_route_cost(instance, r.lev.class, r.depot, r.tp, &r.customers))
        .sum();
    let establishment = solution.open_tps.iter().map(|&t| instance.tps[t].establish_cost).sum();
    Ok(CostBreakdown { first_travel, second_travel, establishment })
}

/// Total cost: vessel arcs, LEV arcs and establishment of open TPs.
pub fn total_cost(instance: &Instance, solution: &Solution) -> Result<f64, ModelError> {
    cost_breakdown(instance, solution).map(|b| b.total())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Vessel capacity.
    VesselCapacity,
    /// TP capacity.
    TpCapacity,
    /// Vessel laying time.
    LayingTime,
    /// LEV capacity.
    LevCapacity,
    /// LEV driving range.
    LevRange,
    /// Service windows of LEVs and jacks.
    TimeWindow,
    /// Flow, assignment and schedule consistency.
    FlowAssignment,
    /// Vessel/LEV/jack synchronization.
    Synchronization,
    /// Moving-jack proximity rules.
    JackCoherence,
}

impl Family {
    pub const ALL: [Family; 9] = [
        Family::VesselCapacity,
        Family::TpCapacity,
        Family::LayingTime,
        Family::LevCapacity,
        Family::LevRange,
        Family::TimeWindow,
        Family::FlowAssignment,
        Family::Synchronization,
        Family::JackCoherence,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub family: Family,
    pub magnitude: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
}

impl ViolationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn magnitude(&self, family: Family) -> f64 {
        self.violations.iter().filter(|v| v.family == family).map(|v| v.magnitude).sum()
    }

    pub fn families(&self) -> Vec<Family> {
        let mut f: Vec<Family> = self.violations.iter().map(|v| v.family).collect();
        f.sort();
        f.dedup();
        f
    }

    fn push(&mut self, family: Family, magnitude: f64, detail: impl Into<String>) {
        if magnitude > TOL {
            self.violations.push(Violation { family, magnitude, detail: detail.into() });
        }
    }

    fn flag(&mut self, family: Family, detail: impl Into<String>) {
        self.push(family, 1.0, detail);
    }
}

/// Which parts of a solution the validator inspects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    /// Both echelons and their synchronization.
    Full,
    /// LEV routes, jacks and TP decisions only.
    SecondEchelon,
}

/// Checks every constraint family of the model; an empty report means feasible.
pub fn validate(instance: &Instance, solution: &Solution) -> ViolationReport {
    validate_scoped(instance, solution, Scope::Full)
}

pub fn validate_scoped(instance: &Instance, solution: &Solution, scope: Scope) -> ViolationReport {
    let mut rep = ViolationReport::default();
    if let Err(e) = check_ids(instance, solution) {
        rep.flag(Family::FlowAssignment, e.to_string());
        return rep;
    }
    let nt = instance.tps.len();
    let nc = instance.customers.len();
    let mut open = vec![false; nt];
    for &t in &solution.open_tps {
        if open[t] {
            rep.flag(Family::FlowAssignment, format!("TP {t} listed twice as open"));
        }
        open[t] = true;
    }

    // Every demand point served exactly once, by an LEV or a jack.
    let mut served_by: Vec<Vec<usize>> = vec![Vec::new(); nc]; 
    for r in &solution.lev_routes {
        for &c in &r.customers {
            served_by[c].push(r.tp);
        }
    }
    for j in &solution.jacks {
        served_by[j.customer].push(j.tp);
    }
    for (c, s) in served_by.iter().enumerate() {
        if s.len() != 1 {
            rep.flag(Family::FlowAssignment, format!("demand point {c} served {} times", s.len()));
        }
    }

    // Only established TPs are used.
    let mut tp_load = vec![0.0; nt];
    for r in &solution.lev_routes {
        if !open[r.tp] {
            rep.flag(Family::FlowAssignment, format!("LEV {:?} uses closed TP {}", r.lev, r.tp));
        }
        for &c in &r.customers {
            tp_load[r.tp] += instance.customers[c].demand;
        }
    }
    for j in &solution.jacks {
        if !open[j.tp] {
            rep.flag(Family::FlowAssignment, format!("jack at closed TP {}", j.tp));
        }
        tp_load[j.tp] += instance.customers[j.customer].demand;
    }
    for t in 0..nt {
        rep.push(
            Family::TpCapacity,
            tp_load[t] - instance.tps[t].capacity,
            format!("TP {t} load {:.4} exceeds capacity {:.4}", tp_load[t], instance.tps[t].capacity),
        );
    }

    // Jack iff the serving TP is within DTr; no LEV service for a
    // point lying within DTr of an established TP.
    for j in &solution.jacks {
        if !instance.within_jack_range(j.tp, j.customer) {
            rep.flag(
                Family::JackCoherence,
                format!("demand point {} jack-served from TP {} beyond DTr", j.customer, j.tp),
            );
        }
    }
    for r in &solution.lev_routes {
        for &c in &r.customers {
            if let Some(t) = (0..nt).find(|&t| open[t] && instance.within_jack_range(t, c)) {
                rep.flag(
                    Family::JackCoherence,
                    format!("demand point {c} LEV-served although TP {t} lies within DTr"),
                );
            }
        }
    }

    let mut lev_units = std::collections::BTreeSet::new();
    let mut lev_per_class = vec![0usize; instance.levs.len()];
    for r in &solution.lev_routes {
        if !lev_units.insert(r.lev) {
            rep.flag(Family::FlowAssignment, format!("LEV {:?} used by more than one route", r.lev));
        }
        lev_per_class[r.lev.class] += 1;
        if r.customers.is_empty() {
            rep.flag(Family::FlowAssignment, format!("LEV {:?} has an empty route", r.lev));
        }
        let class = &instance.levs[r.lev.class];
        let load: f64 = r.customers.iter().map(|&c| instance.customers[c].demand).sum();
        rep.push(
            Family::LevCapacity,
            load - class.capacity,
            format!("LEV {:?} load {load:.4} exceeds {:.4}", r.lev, class.capacity),
        );
        let dist = lev_route_distance(instance, r.depot, r.tp, &r.customers);
        rep.push(
            Family::LevRange,
            dist - class.driving_range,
            format!("LEV {:?} drives {dist:.4} km beyond range {:.4}", r.lev, class.driving_range),
        );
        if r.starts.len() != r.customers.len() {
            rep.flag(Family::FlowAssignment, format!("LEV {:?} schedule length mismatch", r.lev));
            continue;
        }
        let tt = &instance.travel_time_second[r.lev.class];
        let tp_v = instance.v2_tp(r.tp);
        let depot_v = instance.v2_depot(r.depot);
        if r.tp_start + TOL < tt.get(depot_v, tp_v) {
            rep.flag(Family::FlowAssignment, format!("LEV {:?} loads before reaching its TP", r.lev));
        }
        let mut prev_v = tp_v;
        let mut prev_ready = r.tp_start + instance.tps[r.tp].load_service_time;
        for (&c, &st) in r.customers.iter().zip(&r.starts) {
            let v = instance.v2_customer(c);
            let arrival = prev_ready + tt.get(prev_v, v);
            if st + TOL < arrival {
                rep.push(
                    Family::FlowAssignment,
                    (arrival - st).max(1.0),
                    format!("LEV {:?} starts service at {c} before arriving", r.lev),
                );
            }
            let w = instance.customers[c].window;
            rep.push(
                Family::TimeWindow,
                (w.open - st).max(0.0) + (st - w.close).max(0.0),
                format!("LEV {:?} serves {c} at {st:.4} outside [{:.4}, {:.4}]", r.lev, w.open, w.close),
            );
            prev_v = v;
            prev_ready = st + instance.customers[c].service_time;
        }
    }
    for (k, &used) in lev_per_class.iter().enumerate() {
        if used > instance.levs[k].count {
            rep.push(
                Family::FlowAssignment,
                (used - instance.levs[k].count) as f64,
                format!("LEV class {k} uses {used} vehicles of {}", instance.levs[k].count),
            );
        }
    }

    for j in &solution.jacks {
        let tp = &instance.tps[j.tp];
        let st = j.tp_start + tp.load_service_time + instance.travel_time_jack.get(j.tp, j.customer);
        let w = instance.customers[j.customer].window;
        rep.push(
            Family::TimeWindow,
            (w.open - st).max(0.0) + (st - w.close).max(0.0),
            format!("jack serves {} at {st:.4} outside [{:.4}, {:.4}]", j.customer, w.open, w.close),
        );
        if j.tp_start < -TOL {
            rep.flag(Family::FlowAssignment, format!("jack for {} starts before time zero", j.customer));
        }
    }

    if scope == Scope::SecondEchelon {
        return rep;
    }

    let mut vessel_units = std::collections::BTreeMap::new();
    let mut vessel_per_class = vec![0usize; instance.vessels.len()];
    let mut delivered: Vec<Option<(VehicleRef, usize, f64)>> = vec![None; nc]; // (vessel, tp, start)
    for (ri, r) in solution.vessel_routes.iter().enumerate() {
        if vessel_units.insert(r.vessel, ri).is_some() {
            rep.flag(Family::FlowAssignment, format!("vessel {:?} leaves the hub more than once", r.vessel));
        }
        vessel_per_class[r.vessel.class] += 1;
        let class = &instance.vessels[r.vessel.class];
        let tt = &instance.travel_time_first[r.vessel.class];
        let cc = &instance.cost_first[r.vessel.class];
        if r.departure < -TOL {
            rep.flag(Family::FlowAssignment, format!("vessel {:?} departs before time zero", r.vessel));
        }
        let mut seen = std::collections::BTreeSet::new();
        let mut prev = 0usize;
        let mut ready = r.departure;
        let mut load = 0.0;
        for visit in &r.visits {
            let v = instance.v1_tp(visit.tp);
            if !seen.insert(visit.tp) {
                rep.flag(Family::FlowAssignment, format!("vessel {:?} revisits TP {}", r.vessel, visit.tp));
            }
            if !open[visit.tp] {
                rep.flag(Family::FlowAssignment, format!("vessel {:?} visits closed TP {}", r.vessel, visit.tp));
            }
            if !cc.get(prev, v).is_finite() {
                rep.flag(Family::FlowAssignment, format!("vessel {:?} cannot navigate arc ({prev},{v})", r.vessel));
            }
            let arrival = ready + tt.get(prev, v);
            if (visit.arrival - arrival).abs() > TOL && arrival.is_finite() {
                rep.push(
                    Family::FlowAssignment,
                    (visit.arrival - arrival).abs().max(1.0),
                    format!("vessel {:?} arrival at TP {} inconsistent", r.vessel, visit.tp),
                );
            }
            if visit.start + TOL < visit.arrival {
                rep.flag(Family::FlowAssignment, format!("vessel {:?} starts before arriving at {}", r.vessel, visit.tp));
            }
            let tp = &instance.tps[visit.tp];
            rep.push(
                Family::LayingTime,
                visit.start + tp.unload_service_time - visit.arrival - tp.laying_limit,
                format!("vessel {:?} lays at TP {} beyond its limit", r.vessel, visit.tp),
            );
            let q: f64 = visit.served.iter().map(|&c| instance.customers[c].demand).sum();
            if (q - visit.quantity).abs() > TOL {
                rep.push(
                    Family::FlowAssignment,
                    (q - visit.quantity).abs(),
                    format!("vessel {:?} quantity at TP {} differs from served demand", r.vessel, visit.tp),
                );
            }
            load += visit.quantity;
            for &c in &visit.served {
                if delivered[c].is_some() {
                    rep.flag(Family::FlowAssignment, format!("goods of {c} delivered twice"));
                }
                delivered[c] = Some((r.vessel, visit.tp, visit.start));
            }
            ready = visit.start + tp.unload_service_time;
            prev = v;
        }
        rep.push(
            Family::VesselCapacity,
            load - class.capacity,
            format!("vessel {:?} load {load:.4} exceeds {:.4}", r.vessel, class.capacity),
        );
        if prev != 0 && !cc.get(prev, 0).is_finite() {
            rep.flag(Family::FlowAssignment, format!("vessel {:?} cannot return to the hub", r.vessel));
        }
    }
    for (k, &used) in vessel_per_class.iter().enumerate() {
        if used > instance.vessels[k].count {
            rep.push(
                Family::FlowAssignment,
                (used - instance.vessels[k].count) as f64,
                format!("vessel class {k} uses {used} vessels of {}", instance.vessels[k].count),
            );
        }
    }
    // Goods reach the TP the point is served from.
    for c in 0..nc {
        let tp = served_by[c].first().copied();
        match (delivered[c], tp) {
            (None, _) => rep.flag(Family::FlowAssignment, format!("goods of {c} never delivered")),
            (Some((_, t, _)), Some(tp)) if t != tp => {
                rep.flag(Family::FlowAssignment, format!("goods of {c} delivered to TP {t} but served from {tp}"))
            }
            _ => {}
        }
    }

    for r in &solution.lev_routes {
        let Some(vessel) = r.vessel else {
            rep.flag(Family::Synchronization, format!("LEV {:?} has no synchronized vessel", r.lev));
            continue;
        };
        let Some(&vi) = vessel_units.get(&vessel) else {
            rep.flag(Family::Synchronization, format!("LEV {:?} meets unknown vessel {vessel:?}", r.lev));
            continue;
        };
        let Some(visit) = solution.vessel_routes[vi].visits.iter().find(|v| v.tp == r.tp) else {
            rep.flag(Family::Synchronization, format!("vessel {vessel:?} never visits TP {} of LEV {:?}", r.tp, r.lev));
            continue;
        };
        let ready = visit.start + instance.tps[r.tp].unload_service_time;
        rep.push(
            Family::Synchronization,
            ready - r.tp_start,
            format!("LEV {:?} loads at {:.4} before vessel {vessel:?} finishes at {ready:.4}", r.lev, r.tp_start),
        );
        for &c in &r.customers {
            if let Some((v, _, _)) = delivered[c] {
                if v != vessel {
                    rep.flag(
                        Family::Synchronization,
                        format!("goods of {c} on LEV {:?} carried by {v:?} instead of {vessel:?}", r.lev),
                    );
                }
            }
        }
    }
    for j in &solution.jacks {
        let Some(vessel) = j.vessel else {
            rep.flag(Family::Synchronization, format!("jack for {} has no feeding vessel", j.customer));
            continue;
        };
        match delivered[j.customer] {
            Some((v, t, start)) if v == vessel && t == j.tp => {
                let ready = start + instance.tps[j.tp].unload_service_time;
                rep.push(
                    Family::Synchronization,
                    ready - j.tp_start,
                    format!("jack for {} leaves before vessel {vessel:?} unloads", j.customer),
                );
            }
            _ => rep.flag(
                Family::Synchronization,
                format!("jack for {} not fed by vessel {vessel:?} at TP {}", j.customer, j.tp),
            ),
        }
    }
    rep
}

/// Second echelon arcs between demand points that no LEV can ever use.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcMask {
    n: usize,
    masked: Vec<bool>,
}

impl ArcMask {
    pub fn none(n: usize) -> Self {
        Self { n, masked: vec![false; n * n] }
    }

    /// Arc from demand point `i` to demand point `j`.
    #[inline]
    pub fn is_masked(&self, i: usize, j: usize) -> bool {
        self.masked[i * self.n + j]
    }

    pub fn count(&self) -> usize {
        self.masked.iter().filter(|&&m| m).count()
    }
}

/// Removes customer-to-customer arcs that violate windows or capacity for every LEV class.
pub fn preprocess(instance: &Instance) -> ArcMask {
    let n = instance.customers.len();
    let max_q = instance.max_lev_capacity();
    let mut mask = ArcMask::none(n);
    for i in 0..n {
        let ci = &instance.customers[i];
        let vi = instance.v2_customer(i);
        for j in 0..n {
            if i == j {
                continue;
            }
            let cj = &instance.customers[j];
            let vj = instance.v2_customer(j);
            let min_t = instance
                .travel_time_second
                .iter()
                .map(|m| m.get(vi, vj))
                .fold(f64::INFINITY, f64::min);
            let late = ci.window.open + ci.service_time + min_t > cj.window.close + TOL;
            let heavy = ci.demand + cj.demand > max_q + TOL;
            mask.masked[i * n + j] = late || heavy;
        }
    }
    mask
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Hub, one depot, one TP, customers on a line; one vessel and one LEV class.
    pub fn line_instance(customers: &[(f64, f64)]) -> Instance {
        let hub = Site { name: "CH".into(), pos: Point::new(-2.0, 0.0) };
        let depots = vec![Site { name: "VD1".into(), pos: Point::new(0.0, -1.0) }];
        let tps = vec![TpSite {
            name: "TP1".into(),
            pos: Point::new(0.0, 0.0),
            establish_cost: 100.0,
            capacity: 50.0,
            laying_limit: 1.0,
            space_class: SpaceClass::Moderate,
            unload_service_time: 0.25,
            load_service_time: 0.1,
        }];
        let custs: Vec<DemandPoint> = customers
            .iter()
            .enumerate()
            .map(|(i, &(x, d))| DemandPoint {
                name: format!("C{}", i + 1),
                pos: Point::new(x, 0.0),
                demand: d,
                window: TimeWindow::new(0.0, 12.0),
                service_time: 0.1,
            })
            .collect();
        let levs = vec![LevClass {
            name: "LEV".into(),
            count: 5,
            capacity: 2.0,
            driving_range: 30.0,
            speed_kmh: Some(30.0),
            cost_per_km: Some(0.27),
        }];
        let vessels = vec![VesselClass {
            name: "V".into(),
            count: 2,
            capacity: 10.0,
            speed_kmh: Some(10.0),
            cost_per_km: Some(2.0),
        }];
        crate::io::native::assemble_euclidean(crate::io::native::Layout {
            id: "TEST".into(),
            hub,
            depots,
            tps,
            customers: custs,
            vessels,
            levs,
            blocked: vec![vec![]],
            jack_threshold: 0.05,
            jack_speed_kmh: 4.0,
            horizon: 12.0,
        })
    }

    /// Hand-built feasible solution for a two-customer line instance.
    pub fn two_customer_feasible() -> (Instance, Solution) {
        let inst = line_instance(&[(1.0, 0.5), (2.0, 0.7)]);
        let mut sol = Solution {
            open_tps: vec![0],
            vessel_routes: vec![VesselRoute {
                vessel: VehicleRef { class: 0, unit: 0 },
                departure: 0.0,
                visits: vec![VesselVisit { tp: 0, quantity: 1.2, arrival: 0.2, start: 0.2, served: vec![0, 1] }],
            }],
            lev_routes: vec![LevRoute {
                lev: VehicleRef { class: 0, unit: 0 },
                depot: 0,
                tp: 0,
                customers: vec![0, 1],
                tp_start: 1.0,
                starts: vec![1.0 + 0.1 + 1.0 / 30.0, 1.0 + 0.1 + 1.0 / 30.0 + 0.1 + 1.0 / 30.0],
                vessel: Some(VehicleRef { class: 0, unit: 0 }),
            }],
            jacks: vec![],
            cost: CostBreakdown::default(),
        };
        sol.refresh_cost(&inst).unwrap();
        (inst, sol)
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn empty_solution_costs_nothing() {
        let inst = line_instance(&[(1.0, 0.5)]);
        assert_eq!(total_cost(&inst, &Solution::default()).unwrap(), 0.0);
    }

    #[test]
    fn single_open_tp_costs_its_establishment() {
        let inst = line_instance(&[(1.0, 0.5)]);
        let sol = Solution { open_tps: vec![0], ..Default::default() };
        assert_eq!(total_cost(&inst, &sol).unwrap(), 100.0);
    }

    #[test]
    fn unknown_ids_are_structural_errors() {
        let inst = line_instance(&[(1.0, 0.5)]);
        let sol = Solution { open_tps: vec![3], ..Default::default() };
        assert!(matches!(total_cost(&inst, &sol), Err(ModelError::Structural(_))));
    }

    #[test]
    fn hand_built_solution_is_feasible() {
        let (inst, sol) = two_customer_feasible();
        let rep = validate(&inst, &sol);
        assert!(rep.is_empty(), "{rep:#?}");
    }

    #[test]
    fn lev_overload_reported_exactly() {
        let (mut inst, sol) = two_customer_feasible();
        // load is 1.2; capacity 0.2 gives an excess of exactly 1.0
        inst.levs[0].capacity = 0.2;
        let rep = validate(&inst, &sol);
        assert!((rep.magnitude(Family::LevCapacity) - 1.0).abs() < 1e-12);
        assert_eq!(rep.families(), vec![Family::LevCapacity]);
    }

    #[test]
    fn late_vessel_breaks_synchronization() {
        let (inst, mut sol) = two_customer_feasible();
        sol.vessel_routes[0].departure = 1.0;
        sol.vessel_routes[0].visits[0].arrival = 1.2;
        sol.vessel_routes[0].visits[0].start = 1.2;
        let rep = validate(&inst, &sol);
        assert!(rep.families().contains(&Family::Synchronization));
    }

    #[test]
    fn lev_service_near_open_tp_flags_jack_rule() {
        let inst = line_instance(&[(0.01, 0.5), (2.0, 0.7)]);
        let mut sol = two_customer_feasible().1;
        sol.lev_routes[0].starts = vec![1.0 + 0.1 + 0.01 / 30.0, 1.0 + 0.1 + 0.01 / 30.0 + 0.1 + 1.99 / 30.0];
        let rep = validate(&inst, &sol);
        assert!(rep.families().contains(&Family::JackCoherence));
    }

    #[test]
    fn mask_disjoint_windows() {
        let mut inst = line_instance(&[(1.0, 0.5), (2.0, 0.5)]);
        inst.customers[0].window = TimeWindow::new(5.0, 6.0);
        inst.customers[1].window = TimeWindow::new(1.0, 2.0);
        let mask = preprocess(&inst);
        assert!(mask.is_masked(0, 1));
        assert!(!mask.is_masked(1, 0));
    }

    #[test]
    fn mask_compatible_instance_is_empty() {
        let inst = line_instance(&[(1.0, 0.5), (2.0, 0.5), (3.0, 0.5)]);
        assert_eq!(preprocess(&inst).count(), 0);
    }

    #[test]
    fn mask_capacity_pairs() {
        let inst = line_instance(&[(1.0, 1.5), (2.0, 1.0)]);
        let mask = preprocess(&inst);
        assert!(mask.is_masked(0, 1) && mask.is_masked(1, 0));
    }
}
