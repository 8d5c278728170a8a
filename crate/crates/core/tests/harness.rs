use std::fs;
use std::path::{Path, PathBuf};

use transit_mp::control::ControllerKind;
use transit_mp::estimation::HistoricalStats;
use transit_mp::harness::{
    self, calibrate, calibrate_to_file, Overrides, PenetrationArg, RunDescriptor, SweepAxis,
    SweepDescriptor,
};
use transit_mp::network::{validate_network, ScenarioDoc};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn descriptor(out: &Path, kind: ControllerKind) -> RunDescriptor {
    RunDescriptor {
        scenario: fixture("minimal.toml"),
        overrides: Overrides {
            controller: Some(kind),
            ..Overrides::default()
        },
        seeds: vec![1, 2, 3],
        out: out.to_path_buf(),
        workers: Some(2),
        snapshots: false,
    }
}

fn read_tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((
                    p.strip_prefix(root).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn reruns_are_byte_identical() {
    for kind in [ControllerKind::TransitMp, ControllerKind::MTransitMp] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let mut da = descriptor(a.path(), kind);
        da.workers = Some(1);
        let db = descriptor(b.path(), kind);
        harness::run(&da).unwrap();
        harness::run(&db).unwrap();
        let ta = read_tree(a.path());
        let tb = read_tree(b.path());
        assert!(!ta.is_empty());
        assert_eq!(ta, tb, "{kind}: outputs differ between runs");
    }
}

#[test]
fn run_writes_metrics_and_summary_per_seed() {
    let out = tempfile::tempdir().unwrap();
    let (rows, failed) = harness::run(&descriptor(out.path(), ControllerKind::CvMp)).unwrap();
    assert!(failed.is_empty());
    assert_eq!(rows.len(), 3);
    let dir = out.path().join("minimal").join("cv-mp");
    for seed in 1..=3 {
        let text = fs::read_to_string(dir.join(format!("seed-{seed}.csv"))).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,vehicle_count,spillover_count,unserved_count,delay_cv,delay_nv,delay_transit,passenger_delay,lyapunov"
        );
        // Every decision instant over 900 s plus the closing frame.
        assert_eq!(lines.count(), 91);
    }
    let summary = fs::read_to_string(dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
    assert!(summary.starts_with("scenario,controller,seed,"));
}

#[test]
fn different_seeds_give_different_traffic() {
    let out = tempfile::tempdir().unwrap();
    let (rows, _) = harness::run(&descriptor(out.path(), ControllerKind::TransitMp)).unwrap();
    assert!(rows
        .windows(2)
        .any(|w| w[0].mean_vehicle_delay != w[1].mean_vehicle_delay));
}

#[test]
fn snapshots_are_written_on_request() {
    let out = tempfile::tempdir().unwrap();
    let mut d = descriptor(out.path(), ControllerKind::TransitMp);
    d.seeds = vec![4];
    d.snapshots = true;
    harness::run(&d).unwrap();
    let p = out.path().join("minimal/transit-mp/snapshots-4.csv");
    let text = fs::read_to_string(p).unwrap();
    assert!(text.starts_with("step,t,"));
    assert_eq!(text.lines().count(), 901);
}

#[test]
fn missing_scenario_is_a_config_error() {
    let out = tempfile::tempdir().unwrap();
    let mut d = descriptor(out.path(), ControllerKind::CvMp);
    d.scenario = fixture("does-not-exist.toml");
    assert!(harness::run(&d).unwrap_err().is_config());
}

#[test]
fn no_seeds_is_a_config_error() {
    let out = tempfile::tempdir().unwrap();
    let mut d = descriptor(out.path(), ControllerKind::CvMp);
    d.seeds.clear();
    assert!(harness::run(&d).unwrap_err().is_config());
}

#[test]
fn invalid_overrides_are_rejected() {
    let o = Overrides {
        penetration: Some(PenetrationArg::Global(1.5)),
        ..Overrides::default()
    };
    assert!(harness::prepare(&fixture("minimal.toml"), &o)
        .unwrap_err()
        .is_config());
    let o = Overrides {
        error_level: Some(0.25),
        ..Overrides::default()
    };
    assert!(harness::prepare(&fixture("minimal.toml"), &o)
        .unwrap_err()
        .is_config());
}

#[test]
fn historical_file_with_missing_movement_is_rejected() {
    let s = harness::prepare(&fixture("minimal.toml"), &Overrides::default()).unwrap();
    let full = calibrate(&s, 0).unwrap();
    let mut partial = HistoricalStats::default();
    for (id, periods) in full.periods.iter().skip(1) {
        for p in periods {
            partial.insert(id, *p);
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("partial.csv");
    partial.write(fs::File::create(&path).unwrap()).unwrap();
    let o = Overrides {
        controller: Some(ControllerKind::MTransitMp),
        historical: Some(path),
        ..Overrides::default()
    };
    let d = RunDescriptor {
        scenario: fixture("minimal.toml"),
        overrides: o,
        seeds: vec![1],
        out: dir.path().join("out"),
        workers: None,
        snapshots: false,
    };
    assert!(harness::run(&d).unwrap_err().is_config());
}

#[test]
fn calibration_round_trips_through_csv() {
    let s = harness::prepare(&fixture("minimal.toml"), &Overrides::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("hist.csv");
    let written = calibrate_to_file(&s, 0, &path).unwrap();
    let read = HistoricalStats::read(&path).unwrap();
    assert_eq!(written.periods.len(), 4);
    for (id, periods) in &written.periods {
        let back = &read.periods[id];
        assert_eq!(periods.len(), back.len());
        for (a, b) in periods.iter().zip(back) {
            assert!((a.lambda - b.lambda).abs() < 1e-9);
            assert!((a.depart - b.depart).abs() < 1e-9);
            assert!(a.psi > 0.0 && a.psi <= 1.0);
            assert!(a.p_hat >= 1.0);
        }
    }
    read.check_covers(&s.network).unwrap();
}

#[test]
fn error_sweep_reports_every_level_and_a_std_row() {
    let out = tempfile::tempdir().unwrap();
    let d = SweepDescriptor {
        base: RunDescriptor {
            seeds: vec![1, 2],
            ..descriptor(out.path(), ControllerKind::MTransitMp)
        },
        axis: SweepAxis::ErrorLevel,
        values: ["-50%", "-20%", "0", "20%", "50%"]
            .map(String::from)
            .to_vec(),
        controllers: vec![ControllerKind::MTransitMp],
    };
    let report = harness::sweep(&d).unwrap();
    assert!(report.failures.is_empty());
    assert_eq!(report.runs.len(), 10);
    for v in &d.values {
        assert!(report.group(v, ControllerKind::MTransitMp).is_some(), "{v}");
    }
    assert!(report.group("STD", ControllerKind::MTransitMp).is_some());
    let csv = fs::read_to_string(out.path().join("sweep-error-level/report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 5 + 1);
    assert!(out.path().join("sweep-error-level/runs.csv").exists());
}

#[test]
fn penetration_sweep_groups_by_value_and_controller() {
    let out = tempfile::tempdir().unwrap();
    let d = SweepDescriptor {
        base: RunDescriptor {
            seeds: vec![1],
            ..descriptor(out.path(), ControllerKind::TransitMp)
        },
        axis: SweepAxis::Penetration,
        values: vec!["0.1".into(), "0.5".into()],
        controllers: vec![ControllerKind::TransitMp, ControllerKind::OccMp],
    };
    let report = harness::sweep(&d).unwrap();
    assert_eq!(report.groups.len(), 4);
    let low = report.group("0.1", ControllerKind::OccMp).unwrap();
    assert_eq!(low.runs, 1);
}

#[test]
fn region_check_on_fixtures() {
    let s = harness::prepare(&fixture("boundary.toml"), &Overrides::default()).unwrap();
    let cert = harness::check_region(&s, false).unwrap();
    // 900 veh/h per approach sits exactly on the boundary.
    assert!(!cert.feasible);
    assert!(cert.epsilon.abs() < 1e-7);
    let s = harness::prepare(&fixture("minimal.toml"), &Overrides::default()).unwrap();
    let cert = harness::check_region(&s, false).unwrap();
    assert!(cert.feasible);
    let w = &cert.weights["N1"];
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    let zero = Overrides {
        penetration: Some("*=0.5,NS=0".parse().unwrap()),
        ..Overrides::default()
    };
    let s = harness::prepare(&fixture("minimal.toml"), &zero).unwrap();
    assert!(harness::check_region(&s, true).unwrap_err().is_config());
}

#[test]
fn every_fixture_validates() {
    for e in fs::read_dir(fixture("")).unwrap() {
        let p = e.unwrap().path();
        let doc: ScenarioDoc = toml::from_str(&fs::read_to_string(&p).unwrap()).unwrap();
        assert_eq!(
            validate_network(&doc),
            Vec::<String>::new(),
            "{}",
            p.display()
        );
    }
}
