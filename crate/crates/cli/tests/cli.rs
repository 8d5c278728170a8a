use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_transit-mp"));
    c.env_remove("TRANSIT_MP_OUT");
    c
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn validate_accepts_a_good_scenario() {
    let o = bin()
        .args(["validate", "--scenario"])
        .arg(fixture("corridor.toml"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains(": ok"));
}

#[test]
fn validate_lists_violations_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    let text = fs::read_to_string(fixture("minimal.toml"))
        .unwrap()
        .replace("penetration = 0.5", "penetration = 1.5");
    fs::write(&bad, text).unwrap();
    let o = bin()
        .args(["validate", "--scenario"])
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("penetration"));
}

#[test]
fn run_writes_outputs_under_out() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args([
            "run",
            "--controller",
            "cv-mp",
            "--seeds",
            "1-2",
            "--scenario",
        ])
        .arg(fixture("minimal.toml"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let run = dir.path().join("minimal/cv-mp");
    assert!(run.join("seed-1.csv").exists());
    assert!(run.join("seed-2.csv").exists());
    assert_eq!(
        fs::read_to_string(run.join("summary.csv"))
            .unwrap()
            .lines()
            .count(),
        3
    );
}

#[test]
fn out_dir_defaults_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .env("TRANSIT_MP_OUT", dir.path())
        .args([
            "run",
            "--seeds",
            "5",
            "--horizon",
            "300",
            "--warmup",
            "60",
            "--scenario",
        ])
        .arg(fixture("minimal.toml"))
        .output()
        .unwrap();
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(dir.path().join("minimal/transit-mp/seed-5.csv").exists());
}

#[test]
fn sweep_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args([
            "sweep",
            "--axis",
            "error-level",
            "--values",
            "-20%,0,20%",
            "--controllers",
            "mtransit-mp",
            "--seeds",
            "1",
            "--scenario",
        ])
        .arg(fixture("minimal.toml"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let report = fs::read_to_string(dir.path().join("sweep-error-level/report.csv")).unwrap();
    assert!(report.contains("STD"));
}

#[test]
fn calibrate_writes_historical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("hist.csv");
    let o = bin()
        .args(["calibrate", "--scenario"])
        .arg(fixture("minimal.toml"))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.lines().count() > 4);
    assert!(text.contains("WE>E"));
}

#[test]
fn check_region_prints_a_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("region.toml");
    let o = bin()
        .args(["check-region", "--scenario"])
        .arg(fixture("minimal.toml"))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = stdout(&o);
    assert!(text.contains("feasible = true"), "{text}");
    assert_eq!(fs::read_to_string(&out).unwrap(), text);
}

#[test]
fn reduced_region_with_a_dark_entry_is_a_config_error() {
    let o = bin()
        .args([
            "check-region",
            "--reduced",
            "--penetration",
            "*=0.5,NS=0",
            "--scenario",
        ])
        .arg(fixture("minimal.toml"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_flag_values_exit_2() {
    let cases: &[&[&str]] = &[
        &["run", "--controller", "fixed-time"],
        &["run", "--penetration", "1.2"],
        &["run", "--error-level", "-150%"],
        &["run", "--seeds", "3-1"],
        &["run", "--segmentation", "s9"],
    ];
    for args in cases {
        let o = bin()
            .args(*args)
            .arg("--scenario")
            .arg(fixture("minimal.toml"))
            .arg("--out")
            .arg(std::env::temp_dir())
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn missing_scenario_file_exits_2() {
    let o = bin()
        .args(["run", "--scenario", "/nonexistent/scenario.toml"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
