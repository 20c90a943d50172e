use std::path::Path;
use std::process::{Command, Output};

use lrp2e::io::solution::{read_solution, Status};
use lrp2e::solve::SolveConfig;

fn lrp2e(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lrp2e"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("LRP2E_THREADS", "1")
        .output()
        .unwrap()
}

fn quick_config(dir: &Path) -> String {
    let path = dir.join("quick.toml");
    std::fs::write(&path, "outer_iterations = 2\nstall_limit = 1\n[search]\nmax_iterations = 100\nmax_non_improving = 50\n")
        .unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn shipped_config_equals_defaults() {
    let text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml")).unwrap();
    let cfg: SolveConfig = toml::from_str(&text).unwrap();
    assert_eq!(cfg, SolveConfig::default());
}

#[test]
fn tiny_round_trip_through_generate_oracle_and_solve() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let gen = lrp2e(&["generate", "--spec", "tiny", "--seed", "5"], d);
    assert!(gen.status.success());
    let inst = d.join("TINY-5.toml");
    let inst = inst.to_str().unwrap();

    let exact = lrp2e(&["oracle", "--instance", inst], &d.join("o"));
    assert_eq!(exact.status.code(), Some(0), "{}", String::from_utf8_lossy(&exact.stderr));
    let doc = read_solution(&d.join("o/oracle.json")).unwrap();
    assert_eq!(doc.status, Status::Feasible);

    let solved = lrp2e(&["solve", "--instance", inst, "--runs", "2", "--mode", "full"], &d.join("s"));
    assert_eq!(solved.status.code(), Some(0), "{}", String::from_utf8_lossy(&solved.stderr));
    for f in ["solution.json", "report.csv", "trace.csv", "outer.csv", "cost.svg"] {
        assert!(std::fs::metadata(d.join("s").join(f)).unwrap().len() > 0, "{f}");
    }
    let sol = read_solution(&d.join("s/solution.json")).unwrap();
    assert!(sol.total_cost.unwrap() >= doc.total_cost.unwrap() - 1e-6);
    let report = std::fs::read_to_string(d.join("s/report.csv")).unwrap();
    assert_eq!(report.lines().count(), 4);
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let bad = d.join("bad.toml");
    std::fs::write(&bad, "id = [").unwrap();
    let out = lrp2e(&["solve", "--instance", bad.to_str().unwrap()], d);
    assert_eq!(out.status.code(), Some(3));

    assert!(lrp2e(&["generate", "--spec", "SI-D1-C10-T2", "--seed", "1"], d).status.success());
    let big = d.join("SI-D1-C10-T2-s1.toml");
    let out = lrp2e(&["oracle", "--instance", big.to_str().unwrap()], d);
    assert_eq!(out.status.code(), Some(4));

    let missing = lrp2e(&["solve", "--instance", d.join("nope.toml").to_str().unwrap()], d);
    assert_eq!(missing.status.code(), Some(1));

    // every window closes before any LEV can arrive
    let text = std::fs::read_to_string(&big).unwrap();
    let late: String = text
        .lines()
        .map(|l| match l {
            _ if l.starts_with("open = ") => "open = 0.0".to_string(),
            _ if l.starts_with("close = ") => "close = 0.01".to_string(),
            _ => l.to_string(),
        })
        .collect::<Vec<_>>()
        .join("\n");
    let late_path = d.join("late.toml");
    std::fs::write(&late_path, late).unwrap();
    let cfg = quick_config(d);
    let out = lrp2e(&["solve", "--instance", late_path.to_str().unwrap(), "--runs", "1", "--config", &cfg], &d.join("late"));
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = read_solution(&d.join("late/solution.json")).unwrap();
    assert_eq!(doc.status, Status::NoFeasible);
}

#[test]
fn convert_writes_a_native_instance() {
    let dir = tempfile::tempdir().unwrap();
    let legacy = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/legacy/E-n22-k4-s6-17.dat");
    let out = lrp2e(&["convert", "--instance", legacy.to_str().unwrap()], dir.path());
    assert!(out.status.success());
    let back = lrp2e::io::read_instance(&dir.path().join("E-n22-k4-s6-17.toml")).unwrap();
    assert!(back.relaxed);
    assert_eq!(back.customers.len(), 21);
}

#[test]
fn bench_writes_csv_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(lrp2e(&["generate", "--spec", "tiny", "--seed", "1"], &d.join("in")).status.success());
    let cfg = quick_config(d);
    let out = lrp2e(&["bench", "--instance", d.join("in").to_str().unwrap(), "--runs", "1", "--config", &cfg], &d.join("b"));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(d.join("b/bench.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(std::fs::metadata(d.join("b/gaps.svg")).unwrap().len() > 0);
    assert!(std::fs::metadata(d.join("b/cost_TINY-1.svg")).unwrap().len() > 0);
}
