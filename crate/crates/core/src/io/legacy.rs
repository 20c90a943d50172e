//! Classic two-echelon benchmark files (Perboli set 2/3 layout).
//!
//! ```text
//! !Trucks
//! ! Number, Capacity, Cost per distance, Fixed cost
//! 3,15000,1,0
//! !City Freighters
//! ! Max per satellite, Number, Capacity, Cost per distance, Fixed cost
//! 2,4,6000,1,0
//! !Stores
//! ! x,y of the depot, then of every satellite
//! 145,215 142,239 146,208
//! !Customers
//! ! x,y,demand
//! 151,264,1100 159,261,700 ...
//! ```
//!
//! Lines starting with `!` either open a section (by keyword) or are
//! comments. Numbers may be separated by commas and/or whitespace.
//!
//! The result is a relaxed instance: satellites are pre-established TPs with
//! zero establishment cost and unbounded capacity, each satellite hosts its
//! own LEV depot, windows and driving range are unbounded, jacks are disabled
//! and every travel time is zero. Arc costs are Euclidean distances scaled by
//! the per-distance cost of the vehicle type.

use log::warn;

use super::IoError;
use crate::model::{
    DemandPoint, Instance, LevClass, Matrix, Point, SecondEchelonSource, Site, SpaceClass, TimeWindow, TpSite,
    VesselClass,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Trucks,
    Freighters,
    Stores,
    Customers,
}

fn section_of(line: &str) -> Option<Section> {
    let l = line.trim_start_matches('!').trim().to_ascii_lowercase();
    let word = l.split(|c: char| !c.is_ascii_alphabetic()).find(|w| !w.is_empty())?;
    match word {
        "trucks" | "truck" => Some(Section::Trucks),
        "city" | "cityfreighters" | "freighters" => Some(Section::Freighters),
        "stores" | "satellites" => Some(Section::Stores),
        "customers" => Some(Section::Customers),
        _ => None,
    }
}

pub fn looks_legacy(text: &str) -> bool {
    text.lines().any(|l| l.trim_start().starts_with('!') && section_of(l).is_some())
}

/// Customer count implied by a name like `E-n22-k4-s6-17` (nodes minus the depot)
/// or `100-5-1`.
fn expected_customers(id: &str) -> Option<usize> {
    if let Some(rest) = id.split('-').find_map(|p| p.strip_prefix('n')) {
        return rest.parse::<usize>().ok().map(|n| n - 1);
    }
    id.split('-').next()?.parse().ok()
}

pub fn parse_legacy_str(id: &str, text: &str) -> Result<Instance, IoError> {
    let mut data: [Vec<f64>; 4] = Default::default();
    let mut current = None;
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('!') {
            if let Some(s) = section_of(line) {
                current = Some(s);
            }
            continue;
        }
        let Some(s) = current else {
            return Err(IoError::Parse(format!("line {}: data before any section", no + 1)));
        };
        for tok in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            let v: f64 = tok
                .parse()
                .map_err(|_| IoError::Parse(format!("line {}: '{tok}' is not a number", no + 1)))?;
            data[s as usize].push(v);
        }
    }
    let [trucks, freighters, stores, customers] = data;
    if trucks.len() < 2 {
        return Err(IoError::Parse("Trucks section needs count and capacity".into()));
    }
    if freighters.len() < 3 {
        return Err(IoError::Parse("City Freighters section needs max per satellite, count and capacity".into()));
    }
    if stores.len() < 4 || stores.len() % 2 != 0 {
        return Err(IoError::Parse("Stores section needs x,y pairs for the depot and at least one satellite".into()));
    }
    if customers.is_empty() || customers.len() % 3 != 0 {
        return Err(IoError::Parse("Customers section needs x,y,demand triples".into()));
    }
    let truck_count = trucks[0] as usize;
    let truck_cap = trucks[1];
    let truck_cost = trucks.get(2).copied().unwrap_or(1.0);
    let cf_count = freighters[1] as usize;
    let cf_cap = freighters[2];
    let cf_cost = freighters.get(3).copied().unwrap_or(1.0);

    let hub = Site { name: "D0".into(), pos: Point::new(stores[0], stores[1]) };
    let sats: Vec<Point> = stores[2..].chunks(2).map(|p| Point::new(p[0], p[1])).collect();
    let depots: Vec<Site> =
        sats.iter().enumerate().map(|(i, &pos)| Site { name: format!("VD{}", i + 1), pos }).collect();
    let tps: Vec<TpSite> = sats
        .iter()
        .enumerate()
        .map(|(i, &pos)| TpSite {
            name: format!("S{}", i + 1),
            pos,
            establish_cost: 0.0,
            capacity: f64::INFINITY,
            laying_limit: f64::INFINITY,
            space_class: SpaceClass::Moderate,
            unload_service_time: 0.0,
            load_service_time: 0.0,
        })
        .collect();
    let custs: Vec<DemandPoint> = customers
        .chunks(3)
        .enumerate()
        .map(|(i, c)| DemandPoint {
            name: format!("C{}", i + 1),
            pos: Point::new(c[0], c[1]),
            demand: c[2],
            window: TimeWindow::UNBOUNDED,
            service_time: 0.0,
        })
        .collect();
    if let Some(n) = expected_customers(id) {
        if n != custs.len() {
            warn!("{id}: name implies {n} customers, file holds {}", custs.len());
        }
    }
    if let Some(c) = custs.iter().find(|c| c.demand <= 0.0) {
        return Err(IoError::Schema(format!("customer {} has non-positive demand", c.name)));
    }

    let first: Vec<Point> = std::iter::once(hub.pos).chain(sats.iter().copied()).collect();
    let n1 = first.len();
    let d1 = Matrix::from_fn(n1, n1, |i, j| first[i].dist(&first[j]));
    let second: Vec<Point> =
        sats.iter().copied().chain(sats.iter().copied()).chain(custs.iter().map(|c| c.pos)).collect();
    let n2 = second.len();
    let d2 = Matrix::from_fn(n2, n2, |i, j| second[i].dist(&second[j]));
    let inst = Instance {
        id: id.to_string(),
        relaxed: true,
        hub,
        depots,
        vessels: vec![VesselClass {
            name: "truck".into(),
            count: truck_count,
            capacity: truck_cap,
            speed_kmh: None,
            cost_per_km: None,
        }],
        levs: vec![LevClass {
            name: "city-freighter".into(),
            count: cf_count,
            capacity: cf_cap,
            driving_range: f64::INFINITY,
            speed_kmh: None,
            cost_per_km: None,
        }],
        travel_time_first: vec![Matrix::filled(n1, n1, 0.0)],
        cost_first: vec![Matrix::from_fn(n1, n1, |i, j| d1.get(i, j) * truck_cost)],
        travel_time_second: vec![Matrix::filled(n2, n2, 0.0)],
        cost_second: vec![Matrix::from_fn(n2, n2, |i, j| d2.get(i, j) * cf_cost)],
        travel_time_jack: Matrix::filled(tps.len(), custs.len(), 0.0),
        tps,
        customers: custs,
        dist_second: d2,
        jack_threshold: 0.0,
        horizon: f64::INFINITY,
        second_echelon: SecondEchelonSource::Explicit,
    };
    inst.check().map_err(|e| IoError::Schema(e.to_string()))?;
    Ok(inst)
}

pub fn parse_legacy(path: &std::path::Path) -> Result<Instance, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("legacy");
    parse_legacy_str(stem, &text).map_err(|e| e.in_file(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = "!Trucks\n! n, cap, cost, fixed\n1,100,1,0\n!City Freighters\n! max, n, cap\n2,2,50,1,0\n\
                        !Stores\n0,0 3,4\n!Customers\n3,5,10 4,4,20\n";

    #[test]
    fn tiny_file_parses_relaxed() {
        let inst = parse_legacy_str("tiny", TINY).unwrap();
        assert!(inst.relaxed);
        assert_eq!(inst.customers.len(), 2);
        assert_eq!(inst.tps.len(), 1);
        assert_eq!(inst.jack_threshold, 0.0);
        assert!((inst.cost_first[0].get(0, 1) - 5.0).abs() < 1e-12);
        // depot co-located with its satellite
        assert_eq!(inst.dist_second.get(inst.v2_depot(0), inst.v2_tp(0)), 0.0);
    }

    #[test]
    fn naming_convention() {
        assert_eq!(expected_customers("E-n22-k4-s6-17"), Some(21));
        assert_eq!(expected_customers("100-5-1"), Some(100));
    }

    #[test]
    fn garbage_is_a_parse_error() {
        let err = parse_legacy_str("x", "!Trucks\n1,abc\n").unwrap_err();
        assert!(err.is_parse());
    }
}
