//! End-to-end checks of the harness: reproducibility, emitted files,
//! scenario echo and the command-line front end.

use std::fs;
use std::path::Path;
use std::process::Command;

use dlkcf::SensorPlan;
use harness::emit::{self, format_f64, METRICS_SCHEMA};
use harness::scenario::{MonitorSpec, PartitionSpec, TruthSpec};
use harness::{prepare, run_experiment, FilterKind, Scenario};
use proptest::prelude::*;

/// Three short sections on an 18-cell road, every estimator, monitors on.
fn small_scenario() -> Scenario {
    let partition = PartitionSpec { sections: 3, section_len: 8, overlap: 3 };
    Scenario {
        name: "small".to_string(),
        truth: TruthSpec::shock_and_fan(partition.n_total()),
        partition,
        sensors: SensorPlan { positions: vec![0, 3, 4, 7], heterogeneous: true, ..SensorPlan::default() },
        filters: vec![FilterKind::Lkf, FilterKind::Dlkcf0, FilterKind::Dlkcf, FilterKind::Central],
        monitors: MonitorSpec { enabled: true, samples: 50, ..MonitorSpec::default() },
        k_max: 30,
        runs: 3,
        ..Scenario::default()
    }
}

fn read_dir_sorted(dir: &Path, skip_timings: bool) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| !(skip_timings && p.to_string_lossy().ends_with("-timings.json")))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn emit_all(scenario: &Scenario, seed: u64, dir: &Path) {
    emit::emit_scenario(scenario, dir).unwrap();
    let inputs = prepare(scenario, seed).unwrap();
    emit::write_density_csv(&dir.join("truth-density.csv"), &inputs.truth).unwrap();
    for rec in run_experiment(scenario, seed).unwrap() {
        emit::emit(&rec, dir).unwrap();
    }
}

#[test]
fn records_are_reproducible() {
    let s = small_scenario();
    let a = run_experiment(&s, 5).unwrap();
    let b = run_experiment(&s, 5).unwrap();
    assert_eq!(a.len(), 4);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.without_timings(), y.without_timings());
    }
    let c = run_experiment(&s, 6).unwrap();
    assert_ne!(a[0].without_timings(), c[0].without_timings());
}

#[test]
fn emitted_files_are_byte_identical_except_timings() {
    let s = small_scenario();
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    emit_all(&s, 3, d1.path());
    emit_all(&s, 3, d2.path());
    let (f1, f2) = (read_dir_sorted(d1.path(), true), read_dir_sorted(d2.path(), true));
    assert_eq!(f1.len(), 2 + 4 * 2);
    assert_eq!(f1, f2);
    assert_eq!(read_dir_sorted(d1.path(), false).len(), 2 + 4 * 3);
}

#[test]
fn metrics_csv_carries_schema_and_full_precision() {
    let s = small_scenario();
    let dir = tempfile::tempdir().unwrap();
    let rec = run_experiment(&s, 2).unwrap().remove(2);
    assert_eq!(rec.filter, FilterKind::Dlkcf);
    let files = emit::emit(&rec, dir.path()).unwrap();
    let text = fs::read_to_string(&files.metrics).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("schema,k,disagreement,error,lyapunov,nees_0"));
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), s.k_max);
    for (k, row) in rows.iter().enumerate() {
        let cols: Vec<_> = row.split(',').collect();
        assert_eq!(cols[0], METRICS_SCHEMA);
        assert_eq!(cols[1], (k + 1).to_string());
        let err: f64 = cols[3].parse().unwrap();
        assert_eq!(err, rec.steps[k].error);
    }
    let bounds: serde_json::Value = serde_json::from_str(&fs::read_to_string(&files.bounds).unwrap()).unwrap();
    assert_eq!(bounds["reports"].as_array().unwrap().len(), 3);
    assert_eq!(bounds["scenario_hash"], rec.scenario_hash.as_str());
}

#[test]
fn scenario_echo_reproduces_the_run() {
    let s = small_scenario();
    let dir = tempfile::tempdir().unwrap();
    let path = emit::emit_scenario(&s, dir.path()).unwrap();
    let back = Scenario::load(&path).unwrap();
    assert_eq!(back, s);
    assert_eq!(back.hash(), s.hash());
    let a = run_experiment(&s, 9).unwrap();
    let b = run_experiment(&back, 9).unwrap();
    assert_eq!(a.iter().map(|r| r.without_timings()).collect::<Vec<_>>(), b.iter().map(|r| r.without_timings()).collect::<Vec<_>>());
}

#[test]
fn shipped_scenarios_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut count = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        Scenario::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        count += 1;
    }
    assert!(count >= 2);
}

#[test]
fn cli_estimate_writes_artifacts_and_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let scenario_path = dir.path().join("in.json");
    let mut s = small_scenario();
    s.filters = vec![FilterKind::Dlkcf];
    fs::write(&scenario_path, s.to_json()).unwrap();
    let out = dir.path().join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_dlkcf-harness"))
        .args(["estimate", "--scenario"])
        .arg(&scenario_path)
        .args(["--seed", "4"])
        .env("DLKCF_OUT_DIR", &out)
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0), "{}", String::from_utf8_lossy(&status.stderr));
    for name in ["scenario.json", "truth-seed4-density.csv", "dlkcf-seed4-metrics.csv", "dlkcf-seed4-bounds.json", "dlkcf-seed4-timings.json"] {
        assert!(out.join(name).exists(), "{name} missing");
    }
    let echoed = Scenario::load(&out.join("scenario.json")).unwrap();
    assert_eq!(echoed.seed, 4);

    let missing = Command::new(env!("CARGO_BIN_EXE_dlkcf-harness"))
        .args(["simulate", "--scenario"])
        .arg(dir.path().join("absent.json"))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn cli_warn_only_and_monitors_run_clean() {
    let dir = tempfile::tempdir().unwrap();
    let scenario_path = dir.path().join("in.json");
    let mut s = small_scenario();
    s.filters = vec![FilterKind::Dlkcf];
    fs::write(&scenario_path, s.to_json()).unwrap();
    for warn in [false, true] {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_dlkcf-harness"));
        cmd.args(["estimate", "--scenario"]).arg(&scenario_path).arg("--out").arg(dir.path().join("out"));
        if warn {
            cmd.arg("--warn-only");
        }
        let out = cmd.output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let bounds: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/dlkcf-seed1-bounds.json")).unwrap()).unwrap();
    assert_eq!(bounds["violations"].as_array().unwrap().len(), 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn floats_round_trip_through_text(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
        prop_assert_eq!(format_f64(x).parse::<f64>().unwrap(), x);
        let json = emit::to_json(&x).unwrap();
        prop_assert_eq!(serde_json::from_str::<f64>(&json).unwrap(), x);
    }

    #[test]
    fn scenario_json_round_trips(
        sections in 1usize..6,
        section_len in 8usize..30,
        overlap in 1usize..4,
        seed in any::<u64>(),
        k_max in 1usize..500,
        std in 1e-3f64..1.0,
    ) {
        let partition = PartitionSpec { sections, section_len, overlap };
        let mut s = Scenario {
            truth: TruthSpec::shock_and_fan(partition.n_total()),
            partition,
            sensors: SensorPlan { positions: vec![0, 3, 4, section_len - 1], std, ..SensorPlan::default() },
            seed,
            k_max,
            ..Scenario::default()
        };
        s.filter.process_std = std / 3.0;
        let back = Scenario::from_json(&s.to_json()).unwrap();
        prop_assert_eq!(&back, &s);
        prop_assert_eq!(back.hash(), s.hash());
    }
}
