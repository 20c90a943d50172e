//! Random instances in the SI/MI/LI families.
//!
//! Customers, depots and TPs are drawn uniformly in a square zone whose area
//! depends on the customer count; the hub lies west of the zone.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::native::{assemble_euclidean, Layout};
use super::IoError;
use crate::model::{DemandPoint, Instance, LevClass, Point, Site, SpaceClass, TimeWindow, TpSite, VesselClass};

pub const HORIZON: f64 = 12.0;
pub const LEV_SPEED: f64 = 30.0;
pub const LEV_COST: f64 = 0.27;
pub const JACK_THRESHOLD: f64 = 0.1;
pub const JACK_SPEED: f64 = 4.0;
/// Earliest window center; leaves room for the vessel leg and loading.
pub const WINDOW_LEAD: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SizeFamily {
    Small,
    Medium,
    Large,
}

impl SizeFamily {
    pub fn of(customers: usize) -> Option<Self> {
        match customers {
            5 | 10 | 15 | 20 | 25 => Some(SizeFamily::Small),
            50 | 75 => Some(SizeFamily::Medium),
            100 | 150 | 200 => Some(SizeFamily::Large),
            _ => None,
        }
    }

    pub fn prefix(self) -> &'static str {
        match self {
            SizeFamily::Small => "SI",
            SizeFamily::Medium => "MI",
            SizeFamily::Large => "LI",
        }
    }

    fn depots(self) -> std::ops::RangeInclusive<usize> {
        match self {
            SizeFamily::Small => 1..=2,
            _ => 3..=4,
        }
    }

    fn tps(self) -> std::ops::RangeInclusive<usize> {
        match self {
            SizeFamily::Small => 2..=4,
            _ => 5..=10,
        }
    }
}

/// Zone area in km² per customer count.
pub fn zone_area(customers: usize) -> Option<f64> {
    Some(match customers {
        5 | 10 | 15 | 20 | 25 => 0.5,
        50 => 1.0,
        75 => 5.0,
        100 => 10.0,
        150 => 15.0,
        200 => 25.0,
        _ => return None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenSpec {
    pub depots: usize,
    pub customers: usize,
    pub tps: usize,
}

impl GenSpec {
    pub fn new(depots: usize, customers: usize, tps: usize) -> Result<Self, IoError> {
        let s = Self { depots, customers, tps };
        let family = SizeFamily::of(customers).ok_or_else(|| IoError::UnknownSize(s.label()))?;
        if !family.depots().contains(&depots) || !family.tps().contains(&tps) {
            return Err(IoError::UnknownSize(s.label()));
        }
        Ok(s)
    }

    fn label(&self) -> String {
        format!("D{}-C{}-T{}", self.depots, self.customers, self.tps)
    }

    pub fn family(&self) -> SizeFamily {
        SizeFamily::of(self.customers).expect("validated size")
    }

    pub fn id(&self) -> String {
        format!("{}-{}", self.family().prefix(), self.label())
    }

    /// Parses `SI-D1-C5-T2`, `MI-D3-C50-T6`, ... (the family prefix is optional).
    pub fn parse(id: &str) -> Result<Self, IoError> {
        let unknown = || IoError::UnknownSize(id.to_string());
        let mut d = None;
        let mut c = None;
        let mut t = None;
        for part in id.split('-') {
            let num = |p: &str| p[1..].parse::<usize>().ok();
            match part.chars().next() {
                Some('D') => d = num(part),
                Some('C') => c = num(part),
                Some('T') => t = num(part),
                _ if matches!(part, "SI" | "MI" | "LI") => {}
                _ => return Err(unknown()),
            }
        }
        let spec = Self::new(d.ok_or_else(unknown)?, c.ok_or_else(unknown)?, t.ok_or_else(unknown)?)?;
        if id.contains("I-") && !id.starts_with(spec.family().prefix()) {
            return Err(unknown());
        }
        Ok(spec)
    }
}

fn r4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

fn r2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn point<R: Rng>(side: f64, rng: &mut R) -> Point {
    Point::new(r4(rng.gen_range(0.0..side)), r4(rng.gen_range(0.0..side)))
}

fn capacity_of(class: SpaceClass) -> f64 {
    match class {
        SpaceClass::Poor => 10.0,
        SpaceClass::Moderate => 20.0,
        SpaceClass::Spacious => 40.0,
    }
}

/// Draws an instance for `spec`.
pub fn generate<R: Rng>(spec: &GenSpec, rng: &mut R) -> Instance {
    let side = zone_area(spec.customers).expect("validated size").sqrt();
    let hub = Site { name: "HUB".into(), pos: Point::new(r4(-0.5 * side), r4(rng.gen_range(0.0..side))) };
    let depots: Vec<Site> =
        (0..spec.depots).map(|i| Site { name: format!("VD{}", i + 1), pos: point(side, rng) }).collect();

    let customers: Vec<DemandPoint> = (0..spec.customers)
        .map(|i| {
            let pos = point(side, rng);
            let demand = r2(rng.gen_range(0.1..=1.0));
            let center = rng.gen_range(WINDOW_LEAD..HORIZON);
            let width = rng.gen_range(1.0..=3.0);
            let open = r2((center - width / 2.0).max(0.0));
            let close = r2((center + width / 2.0).min(HORIZON));
            DemandPoint {
                name: format!("C{}", i + 1),
                pos,
                demand,
                window: TimeWindow { open, close },
                service_time: 0.05,
            }
        })
        .collect();
    let total: f64 = customers.iter().map(|c| c.demand).sum();

    let classes = [SpaceClass::Poor, SpaceClass::Moderate, SpaceClass::Spacious];
    let mut tps: Vec<TpSite> = (0..spec.tps)
        .map(|i| {
            let space_class = *classes.choose(rng).unwrap();
            TpSite {
                name: format!("TP{}", i + 1),
                pos: point(side, rng),
                establish_cost: r2(rng.gen_range(100.0..=175.0)),
                capacity: capacity_of(space_class),
                laying_limit: 1.0,
                space_class,
                unload_service_time: 0.25,
                load_service_time: 0.1,
            }
        })
        .collect();
    // upgrade the tightest sites until the TPs can hold the demand with slack
    while tps.iter().map(|t| t.capacity).sum::<f64>() < 1.3 * total {
        let Some(t) = tps.iter_mut().filter(|t| t.space_class != SpaceClass::Spacious).min_by(|a, b| a.capacity.total_cmp(&b.capacity))
        else {
            break;
        };
        t.space_class = if t.space_class == SpaceClass::Poor { SpaceClass::Moderate } else { SpaceClass::Spacious };
        t.capacity = capacity_of(t.space_class);
    }

    // small vessels reach every TP; the large class is kept out of narrow canals
    let small_cap = 10.0;
    let large_cap = 25.0;
    let units = ((1.5 * total) / (small_cap + large_cap)).ceil().max(1.0) as usize;
    let vessels = vec![
        VesselClass {
            name: "small-vessel".into(),
            count: units,
            capacity: small_cap,
            speed_kmh: Some(r2(rng.gen_range(5.0..=15.0))),
            cost_per_km: Some(r2(rng.gen_range(1.8..=2.5))),
        },
        VesselClass {
            name: "large-vessel".into(),
            count: units,
            capacity: large_cap,
            speed_kmh: Some(r2(rng.gen_range(5.0..=15.0))),
            cost_per_km: Some(r2(rng.gen_range(1.8..=2.5))),
        },
    ];
    let mut narrow: Vec<usize> = (0..spec.tps).filter(|_| rng.gen_bool(0.3)).collect();
    if narrow.len() == spec.tps {
        narrow.pop();
    }

    let lev_cap = 2.0;
    let levs = vec![LevClass {
        name: "lev".into(),
        count: ((1.5 * total / lev_cap).ceil() as usize + 1).max(2),
        capacity: lev_cap,
        driving_range: 40.0,
        speed_kmh: Some(LEV_SPEED),
        cost_per_km: Some(LEV_COST),
    }];

    assemble_euclidean(Layout {
        id: spec.id(),
        hub,
        depots,
        tps,
        customers,
        vessels,
        levs,
        blocked: vec![Vec::new(), narrow],
        jack_threshold: JACK_THRESHOLD,
        jack_speed_kmh: JACK_SPEED,
        horizon: HORIZON,
    })
}

/// [`generate`] with a ChaCha8 stream seeded by `seed`.
pub fn generate_seeded(spec: &GenSpec, seed: u64) -> Instance {
    generate(spec, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_instance_layout() {
        let spec = GenSpec::new(1, 5, 2).unwrap();
        let inst = generate_seeded(&spec, 42);
        assert_eq!(inst.id, "SI-D1-C5-T2");
        assert_eq!(inst.customers.len(), 5);
        let side = 0.5f64.sqrt();
        for c in &inst.customers {
            assert!((0.0..=side).contains(&c.pos.x) && (0.0..=side).contains(&c.pos.y));
        }
        assert!(inst.levs.iter().all(|l| l.cost_per_km == Some(0.27)));
        inst.check().unwrap();
    }

    #[test]
    fn ids_round_trip() {
        for id in ["SI-D2-C25-T4", "MI-D3-C75-T10", "LI-D4-C200-T5"] {
            assert_eq!(GenSpec::parse(id).unwrap().id(), id);
        }
        assert!(GenSpec::parse("SI-D1-C7-T2").is_err());
        assert!(GenSpec::parse("SI-D3-C5-T2").is_err());
        assert!(GenSpec::parse("MI-D1-C5-T2").is_err());
    }

    #[test]
    fn tps_hold_the_demand() {
        let spec = GenSpec::new(3, 200, 5).unwrap();
        let inst = generate_seeded(&spec, 1);
        let cap: f64 = inst.tps.iter().map(|t| t.capacity).sum();
        assert!(cap >= 1.3 * inst.total_demand() || inst.tps.iter().all(|t| t.space_class == SpaceClass::Spacious));
        assert!((0..inst.tps.len()).all(|t| inst.tp_reachable(t)));
    }
}
