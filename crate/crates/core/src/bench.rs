//! Hybrid against plain comparison over a list of instances.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::io::report::{gap_percent, write_csv};
use crate::io::IoError;
use crate::model::Instance;
use crate::solve::{best_of, solve_runs, SolveConfig, SolveError, SolveOutcome};
use crate::svg::{bar_chart, line_chart, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Hybrid,
    Plain,
}

impl Variant {
    pub const BOTH: [Variant; 2] = [Variant::Hybrid, Variant::Plain];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Hybrid => "hybrid",
            Variant::Plain => "plain",
        }
    }

    pub fn config(self, base: &SolveConfig) -> SolveConfig {
        match self {
            Variant::Hybrid => SolveConfig { hybrid: true, ..base.clone() },
            Variant::Plain => base.clone().plain(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub solve: SolveConfig,
    pub runs: usize,
    pub seed: u64,
    pub threads: usize,
    /// Wall-clock budget per instance and variant (s).
    pub budget: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub instance: String,
    pub variant: Variant,
    pub best: Option<f64>,
    pub mean: Option<f64>,
    /// Percent above the best value of either variant.
    pub gap_to_reference: Option<f64>,
    pub time_s: f64,
    pub seed: u64,
    pub runs: usize,
    pub feasible_runs: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct BenchEntry {
    pub instance: String,
    pub variant: Variant,
    /// Empty when the runs could not start.
    pub outcomes: Vec<SolveOutcome>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct BenchResult {
    pub rows: Vec<BenchRow>,
    pub entries: Vec<BenchEntry>,
}

impl BenchResult {
    /// Best cost of `variant` on instance `id`.
    pub fn best(&self, id: &str, variant: Variant) -> Option<f64> {
        self.rows.iter().find(|r| r.instance == id && r.variant == variant).and_then(|r| r.best)
    }
}

/// Runs both variants on every instance, `runs` seeds each.
pub fn bench(instances: &[Instance], cfg: &BenchConfig) -> BenchResult {
    let mut entries = Vec::new();
    for inst in instances {
        for v in Variant::BOTH {
            let res: Result<Vec<SolveOutcome>, SolveError> =
                solve_runs(inst, &v.config(&cfg.solve), cfg.seed, cfg.runs, cfg.threads, cfg.budget);
            let (outcomes, error) = match res {
                Ok(o) => (o, None),
                Err(e) => (Vec::new(), Some(e.to_string())),
            };
            entries.push(BenchEntry { instance: inst.id.clone(), variant: v, outcomes, error });
        }
    }
    let mut rows = Vec::new();
    for e in &entries {
        let costs: Vec<f64> = e.outcomes.iter().filter_map(|o| o.cost()).collect();
        let best = costs.iter().copied().reduce(f64::min);
        let reference = entries
            .iter()
            .filter(|o| o.instance == e.instance)
            .flat_map(|o| o.outcomes.iter().filter_map(|x| x.cost()))
            .reduce(f64::min);
        rows.push(BenchRow {
            instance: e.instance.clone(),
            variant: e.variant,
            best,
            mean: (!costs.is_empty()).then(|| costs.iter().sum::<f64>() / costs.len() as f64),
            gap_to_reference: best.zip(reference).map(|(b, r)| gap_percent(b, r)),
            time_s: (e.outcomes.iter().map(|o| o.elapsed.as_secs_f64()).sum::<f64>() * 1000.0).round() / 1000.0,
            seed: cfg.seed,
            runs: cfg.runs,
            feasible_runs: costs.len(),
            error: e.error.clone(),
        });
    }
    BenchResult { rows, entries }
}

fn file_stem(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

/// Writes `bench.csv`, `gaps.svg` and one `cost_<instance>.svg` per instance;
/// returns the paths written.
pub fn write_bench(result: &BenchResult, dir: &Path) -> Result<Vec<PathBuf>, IoError> {
    std::fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
    let mut written = Vec::new();
    let csv_path = dir.join("bench.csv");
    write_csv(&result.rows, &csv_path)?;
    written.push(csv_path);

    let mut ids: Vec<&str> = Vec::new();
    for r in &result.rows {
        if !ids.contains(&r.instance.as_str()) {
            ids.push(&r.instance);
        }
    }
    let groups: Vec<(String, Vec<f64>)> = ids
        .iter()
        .map(|id| {
            let gaps = Variant::BOTH
                .iter()
                .map(|&v| {
                    result
                        .rows
                        .iter()
                        .find(|r| r.instance == *id && r.variant == v)
                        .and_then(|r| r.gap_to_reference)
                        .unwrap_or(f64::NAN)
                })
                .collect();
            (id.to_string(), gaps)
        })
        .collect();
    let names: Vec<&str> = Variant::BOTH.iter().map(|v| v.name()).collect();
    let gaps_path = dir.join("gaps.svg");
    let svg = bar_chart("Gap to best variant", "gap (%)", &names, &groups);
    std::fs::write(&gaps_path, svg).map_err(|e| IoError::io(&gaps_path, e))?;
    written.push(gaps_path);

    for id in ids {
        let series: Vec<Series> = result
            .entries
            .iter()
            .filter(|e| e.instance == id)
            .map(|e| Series {
                name: e.variant.name().into(),
                points: best_of(&e.outcomes)
                    .map(|o| o.trace.iter().map(|t| (t.iteration as f64, t.best_feasible)).collect())
                    .unwrap_or_default(),
            })
            .collect();
        let path = dir.join(format!("cost_{}.svg", file_stem(id)));
        let svg = line_chart(&format!("{id}: best feasible second echelon cost"), "ALNS iteration", "cost", &series);
        std::fs::write(&path, svg).map_err(|e| IoError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::generate::{generate_seeded, GenSpec};

    fn quick() -> SolveConfig {
        let mut c = SolveConfig { outer_iterations: 2, stall_limit: 1, ..Default::default() };
        c.search.max_iterations = 60;
        c
    }

    #[test]
    fn single_run_gives_one_row_per_variant_and_plots() {
        let inst = generate_seeded(&GenSpec::new(1, 5, 2).unwrap(), 3);
        let cfg = BenchConfig { solve: quick(), runs: 1, seed: 0, threads: 1, budget: None };
        let res = bench(std::slice::from_ref(&inst), &cfg);
        assert_eq!(res.rows.len(), 2);
        assert_eq!(res.rows[0].variant, Variant::Hybrid);
        assert_eq!(res.rows[1].variant, Variant::Plain);
        let dir = tempfile::tempdir().unwrap();
        let files = write_bench(&res, dir.path()).unwrap();
        assert_eq!(files.len(), 3);
        for f in files {
            assert!(std::fs::metadata(&f).unwrap().len() > 0, "{f:?}");
        }
        let text = std::fs::read_to_string(dir.path().join("bench.csv")).unwrap();
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn the_better_variant_has_zero_gap() {
        let inst = generate_seeded(&GenSpec::new(1, 10, 2).unwrap(), 5);
        let cfg = BenchConfig { solve: quick(), runs: 2, seed: 0, threads: 2, budget: None };
        let res = bench(std::slice::from_ref(&inst), &cfg);
        let gaps: Vec<f64> = res.rows.iter().filter_map(|r| r.gap_to_reference).collect();
        if gaps.len() == 2 {
            assert!(gaps.iter().any(|&g| g == 0.0));
            assert!(gaps.iter().all(|&g| g >= 0.0));
        }
    }
}
