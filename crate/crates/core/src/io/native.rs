//! Native instance documents (TOML, schema version 1).
//!
//! First echelon matrices are always explicit, one pair per vessel class,
//! with `inf` marking arcs a class cannot navigate. Second echelon data is
//! either derived from coordinates (`mode = "euclidean"`) or given explicitly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IoError;
use crate::model::{
    DemandPoint, Instance, LevClass, Matrix, Point, SecondEchelonSource, Site, SpaceClass, TimeWindow, TpSite,
    VesselClass,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Doc {
    version: u32,
    id: String,
    #[serde(default)]
    relaxed: bool,
    horizon: f64,
    jack_threshold: f64,
    hub: SiteDoc,
    depots: Vec<SiteDoc>,
    tps: Vec<TpDoc>,
    customers: Vec<CustomerDoc>,
    vessels: Vec<VesselDoc>,
    levs: Vec<LevDoc>,
    second_echelon: SecondDoc,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SiteDoc {
    name: String,
    x: f64,
    y: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TpDoc {
    name: String,
    x: f64,
    y: f64,
    establish_cost: f64,
    capacity: f64,
    laying_limit: f64,
    space_class: SpaceClass,
    unload_service_time: f64,
    load_service_time: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CustomerDoc {
    name: String,
    x: f64,
    y: f64,
    demand: f64,
    open: f64,
    close: f64,
    service_time: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VesselDoc {
    name: String,
    count: usize,
    capacity: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    speed_kmh: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cost_per_km: Option<f64>,
    /// Rows and columns: hub, then TPs in file order.
    travel_time: Vec<Vec<f64>>,
    cost: Vec<Vec<f64>>,
    /// TP names this class cannot reach; their arcs become `inf`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    unreachable: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LevDoc {
    name: String,
    count: usize,
    capacity: f64,
    driving_range: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    speed_kmh: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cost_per_km: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    travel_time: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cost: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
enum SecondDoc {
    Euclidean {
        jack_speed_kmh: f64,
    },
    /// Rows and columns: depots, TPs, customers.
    Explicit {
        distance: Vec<Vec<f64>>,
        jack_travel_time: Vec<Vec<f64>>,
    },
}

/// Everything needed to derive an instance from coordinates.
pub struct Layout {
    pub id: String,
    pub hub: Site,
    pub depots: Vec<Site>,
    pub tps: Vec<TpSite>,
    pub customers: Vec<DemandPoint>,
    /// Must carry `speed_kmh` and `cost_per_km`.
    pub vessels: Vec<VesselClass>,
    /// Must carry `speed_kmh` and `cost_per_km`.
    pub levs: Vec<LevClass>,
    /// Per vessel class, TPs it cannot reach.
    pub blocked: Vec<Vec<usize>>,
    pub jack_threshold: f64,
    pub jack_speed_kmh: f64,
    pub horizon: f64,
}

fn positions_second(depots: &[Site], tps: &[TpSite], customers: &[DemandPoint]) -> Vec<Point> {
    depots
        .iter()
        .map(|d| d.pos)
        .chain(tps.iter().map(|t| t.pos))
        .chain(customers.iter().map(|c| c.pos))
        .collect()
}

fn euclid(points: &[Point]) -> Matrix {
    Matrix::from_fn(points.len(), points.len(), |i, j| points[i].dist(&points[j]))
}

fn scaled(m: &Matrix, f: f64) -> Matrix {
    Matrix::from_fn(m.rows(), m.cols(), |i, j| m.get(i, j) * f)
}

fn lev_matrices(dist: &Matrix, levs: &[LevClass]) -> Option<(Vec<Matrix>, Vec<Matrix>)> {
    let mut tt = Vec::new();
    let mut cc = Vec::new();
    for l in levs {
        tt.push(scaled(dist, 1.0 / l.speed_kmh?));
        cc.push(scaled(dist, l.cost_per_km?));
    }
    Some((tt, cc))
}

fn jack_matrix(dist: &Matrix, n_depots: usize, n_tps: usize, n_customers: usize, speed: f64) -> Matrix {
    Matrix::from_fn(n_tps, n_customers, |t, c| dist.get(n_depots + t, n_depots + n_tps + c) / speed)
}

/// Builds an instance whose second echelon follows Euclidean distances and
/// whose vessel matrices follow straight hub/TP distances.
pub fn assemble_euclidean(layout: Layout) -> Instance {
    let Layout { id, hub, depots, tps, customers, vessels, levs, blocked, jack_threshold, jack_speed_kmh, horizon } =
        layout;
    let first: Vec<Point> = std::iter::once(hub.pos).chain(tps.iter().map(|t| t.pos)).collect();
    let d1 = euclid(&first);
    let mut travel_time_first = Vec::new();
    let mut cost_first = Vec::new();
    for (k, v) in vessels.iter().enumerate() {
        let speed = v.speed_kmh.expect("vessel speed");
        let per_km = v.cost_per_km.expect("vessel cost");
        let no = |i: usize| i > 0 && blocked.get(k).is_some_and(|b| b.contains(&(i - 1)));
        travel_time_first.push(Matrix::from_fn(d1.rows(), d1.cols(), |i, j| {
            if i != j && (no(i) || no(j)) {
                f64::INFINITY
            } else {
                d1.get(i, j) / speed
            }
        }));
        cost_first.push(Matrix::from_fn(d1.rows(), d1.cols(), |i, j| {
            if i != j && (no(i) || no(j)) {
                f64::INFINITY
            } else {
                d1.get(i, j) * per_km
            }
        }));
    }
    let dist_second = euclid(&positions_second(&depots, &tps, &customers));
    let (travel_time_second, cost_second) = lev_matrices(&dist_second, &levs).expect("LEV speed and cost");
    let travel_time_jack = jack_matrix(&dist_second, depots.len(), tps.len(), customers.len(), jack_speed_kmh);
    Instance {
        id,
        relaxed: false,
        hub,
        depots,
        tps,
        customers,
        vessels,
        levs,
        dist_second,
        travel_time_first,
        cost_first,
        travel_time_second,
        cost_second,
        travel_time_jack,
        jack_threshold,
        horizon,
        second_echelon: SecondEchelonSource::Euclidean { jack_speed_kmh },
    }
}

fn matrix(rows: Vec<Vec<f64>>, what: &str, n: usize, m: usize) -> Result<Matrix, IoError> {
    let mat = Matrix::from_rows(rows).map_err(|_| IoError::Schema(format!("{what}: ragged matrix")))?;
    if mat.rows() != n || mat.cols() != m {
        return Err(IoError::Schema(format!("{what}: expected {n}x{m}, found {}x{}", mat.rows(), mat.cols())));
    }
    Ok(mat)
}

fn unique_names<'a>(what: &str, names: impl Iterator<Item = &'a str>) -> Result<(), IoError> {
    let mut seen = std::collections::BTreeSet::new();
    for n in names {
        if !seen.insert(n) {
            return Err(IoError::Schema(format!("duplicate {what} name '{n}'")));
        }
    }
    Ok(())
}

fn from_doc(doc: Doc) -> Result<Instance, IoError> {
    if doc.version != SCHEMA_VERSION {
        return Err(IoError::Schema(format!("unsupported schema version {}", doc.version)));
    }
    unique_names("depot", doc.depots.iter().map(|d| d.name.as_str()))?;
    unique_names("tp", doc.tps.iter().map(|d| d.name.as_str()))?;
    unique_names("customer", doc.customers.iter().map(|d| d.name.as_str()))?;
    for c in &doc.customers {
        if c.demand <= 0.0 {
            return Err(IoError::Schema(format!("customers.{}: demand must be positive, found {}", c.name, c.demand)));
        }
    }
    let site = |s: SiteDoc| Site { name: s.name, pos: Point::new(s.x, s.y) };
    let hub = site(doc.hub);
    let depots: Vec<Site> = doc.depots.into_iter().map(site).collect();
    let tps: Vec<TpSite> = doc
        .tps
        .into_iter()
        .map(|t| TpSite {
            name: t.name,
            pos: Point::new(t.x, t.y),
            establish_cost: t.establish_cost,
            capacity: t.capacity,
            laying_limit: t.laying_limit,
            space_class: t.space_class,
            unload_service_time: t.unload_service_time,
            load_service_time: t.load_service_time,
        })
        .collect();
    let customers: Vec<DemandPoint> = doc
        .customers
        .into_iter()
        .map(|c| DemandPoint {
            name: c.name,
            pos: Point::new(c.x, c.y),
            demand: c.demand,
            window: TimeWindow::new(c.open, c.close),
            service_time: c.service_time,
        })
        .collect();
    let n1 = 1 + tps.len();
    let n2 = depots.len() + tps.len() + customers.len();
    let mut vessels = Vec::new();
    let mut travel_time_first = Vec::new();
    let mut cost_first = Vec::new();
    for v in doc.vessels {
        let mut tt = matrix(v.travel_time, &format!("vessels.{}.travel_time", v.name), n1, n1)?;
        let mut cc = matrix(v.cost, &format!("vessels.{}.cost", v.name), n1, n1)?;
        for name in &v.unreachable {
            let Some(t) = tps.iter().position(|t| &t.name == name) else {
                return Err(IoError::Schema(format!("vessels.{}.unreachable: unknown TP '{name}'", v.name)));
            };
            for o in 0..n1 {
                if o != 1 + t {
                    for (i, j) in [(o, 1 + t), (1 + t, o)] {
                        tt.set(i, j, f64::INFINITY);
                        cc.set(i, j, f64::INFINITY);
                    }
                }
            }
        }
        travel_time_first.push(tt);
        cost_first.push(cc);
        vessels.push(VesselClass {
            name: v.name,
            count: v.count,
            capacity: v.capacity,
            speed_kmh: v.speed_kmh,
            cost_per_km: v.cost_per_km,
        });
    }
    let mut levs = Vec::new();
    let mut explicit_lev = Vec::new();
    for l in doc.levs {
        explicit_lev.push((l.name.clone(), l.travel_time, l.cost));
        levs.push(LevClass {
            name: l.name,
            count: l.count,
            capacity: l.capacity,
            driving_range: l.driving_range,
            speed_kmh: l.speed_kmh,
            cost_per_km: l.cost_per_km,
        });
    }
    let (dist_second, travel_time_jack, second_echelon) = match doc.second_echelon {
        SecondDoc::Euclidean { jack_speed_kmh } => {
            let d = euclid(&positions_second(&depots, &tps, &customers));
            let j = jack_matrix(&d, depots.len(), tps.len(), customers.len(), jack_speed_kmh);
            (d, j, SecondEchelonSource::Euclidean { jack_speed_kmh })
        }
        SecondDoc::Explicit { distance, jack_travel_time } => (
            matrix(distance, "second_echelon.distance", n2, n2)?,
            matrix(jack_travel_time, "second_echelon.jack_travel_time", tps.len(), customers.len())?,
            SecondEchelonSource::Explicit,
        ),
    };
    let mut travel_time_second = Vec::new();
    let mut cost_second = Vec::new();
    for ((name, tt, cc), l) in explicit_lev.into_iter().zip(&levs) {
        match (tt, cc) {
            (Some(tt), Some(cc)) => {
                travel_time_second.push(matrix(tt, &format!("levs.{name}.travel_time"), n2, n2)?);
                cost_second.push(matrix(cc, &format!("levs.{name}.cost"), n2, n2)?);
            }
            (None, None) => {
                let (Some(speed), Some(per_km)) = (l.speed_kmh, l.cost_per_km) else {
                    return Err(IoError::Schema(format!(
                        "levs.{name}: give either speed_kmh and cost_per_km or explicit matrices"
                    )));
                };
                travel_time_second.push(scaled(&dist_second, 1.0 / speed));
                cost_second.push(scaled(&dist_second, per_km));
            }
            _ => {
                return Err(IoError::Schema(format!("levs.{name}: travel_time and cost must be given together")));
            }
        }
    }
    let inst = Instance {
        id: doc.id,
        relaxed: doc.relaxed,
        hub,
        depots,
        tps,
        customers,
        vessels,
        levs,
        dist_second,
        travel_time_first,
        cost_first,
        travel_time_second,
        cost_second,
        travel_time_jack,
        jack_threshold: doc.jack_threshold,
        horizon: doc.horizon,
        second_echelon,
    };
    inst.check().map_err(|e| IoError::Schema(e.to_string()))?;
    Ok(inst)
}

fn lev_matrices_derivable(inst: &Instance) -> bool {
    if inst.second_echelon == SecondEchelonSource::Explicit {
        return false;
    }
    match lev_matrices(&inst.dist_second, &inst.levs) {
        Some((tt, cc)) => tt == inst.travel_time_second && cc == inst.cost_second,
        None => false,
    }
}

fn to_doc(inst: &Instance) -> Doc {
    let site = |s: &Site| SiteDoc { name: s.name.clone(), x: s.pos.x, y: s.pos.y };
    let derive_lev = lev_matrices_derivable(inst);
    let second_echelon = match inst.second_echelon {
        SecondEchelonSource::Euclidean { jack_speed_kmh } => SecondDoc::Euclidean { jack_speed_kmh },
        SecondEchelonSource::Explicit => SecondDoc::Explicit {
            distance: inst.dist_second.to_rows(),
            jack_travel_time: inst.travel_time_jack.to_rows(),
        },
    };
    Doc {
        version: SCHEMA_VERSION,
        id: inst.id.clone(),
        relaxed: inst.relaxed,
        horizon: inst.horizon,
        jack_threshold: inst.jack_threshold,
        hub: site(&inst.hub),
        depots: inst.depots.iter().map(site).collect(),
        tps: inst
            .tps
            .iter()
            .map(|t| TpDoc {
                name: t.name.clone(),
                x: t.pos.x,
                y: t.pos.y,
                establish_cost: t.establish_cost,
                capacity: t.capacity,
                laying_limit: t.laying_limit,
                space_class: t.space_class,
                unload_service_time: t.unload_service_time,
                load_service_time: t.load_service_time,
            })
            .collect(),
        customers: inst
            .customers
            .iter()
            .map(|c| CustomerDoc {
                name: c.name.clone(),
                x: c.pos.x,
                y: c.pos.y,
                demand: c.demand,
                open: c.window.open,
                close: c.window.close,
                service_time: c.service_time,
            })
            .collect(),
        vessels: inst
            .vessels
            .iter()
            .enumerate()
            .map(|(k, v)| VesselDoc {
                name: v.name.clone(),
                count: v.count,
                capacity: v.capacity,
                speed_kmh: v.speed_kmh,
                cost_per_km: v.cost_per_km,
                travel_time: inst.travel_time_first[k].to_rows(),
                cost: inst.cost_first[k].to_rows(),
                unreachable: Vec::new(),
            })
            .collect(),
        levs: inst
            .levs
            .iter()
            .enumerate()
            .map(|(k, l)| LevDoc {
                name: l.name.clone(),
                count: l.count,
                capacity: l.capacity,
                driving_range: l.driving_range,
                speed_kmh: l.speed_kmh,
                cost_per_km: l.cost_per_km,
                travel_time: (!derive_lev).then(|| inst.travel_time_second[k].to_rows()),
                cost: (!derive_lev).then(|| inst.cost_second[k].to_rows()),
            })
            .collect(),
        second_echelon,
    }
}

pub fn parse_native_str(text: &str) -> Result<Instance, IoError> {
    let doc: Doc = toml::from_str(text).map_err(|e| IoError::Parse(e.to_string()))?;
    from_doc(doc)
}

pub fn write_native_string(inst: &Instance) -> Result<String, IoError> {
    toml::to_string(&to_doc(inst)).map_err(|e| IoError::Parse(e.to_string()))
}

pub fn parse_native(path: &Path) -> Result<Instance, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    parse_native_str(&text).map_err(|e| e.in_file(path))
}

pub fn write_native(inst: &Instance, path: &Path) -> Result<(), IoError> {
    std::fs::write(path, write_native_string(inst)?).map_err(|e| IoError::io(path, e))
}
