use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pdq_core::bundled;

fn pdq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdq"))
        .args(args)
        .env_remove("PDQ_THREADS")
        .output()
        .expect("run pdq")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_bundled(dir: &Path, name: &str) -> String {
    let path = dir.join(format!("{name}.scn"));
    fs::write(&path, bundled::text(name).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn every_bundled_scenario_validates() {
    let dir = tempfile::tempdir().unwrap();
    for (name, _) in bundled::ALL {
        let o = pdq(&["validate", &write_bundled(dir.path(), name)]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stderr(&o));
        assert!(stdout(&o).starts_with("ok:"));
    }
}

#[test]
fn bundled_names_resolve_without_files() {
    let o = pdq(&["steady-state", "threemode_pwa.scn"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 3);
    assert!(out.starts_with("p_1 = 0.333333333333333"));
}

#[test]
fn domain_errors_exit_one_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.scn");
    let text = bundled::TWOMODE_MODE_RESPONSIVE.replace("saturation = 0.2 0.7", "saturation = 0.2");
    fs::write(&path, text).unwrap();
    let o = pdq(&["validate", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("dimension mismatch"), "{err}");
    assert!(err.contains("saturation row 2"), "{err}");

    let o = pdq(&["check", dir.path().join("missing.scn").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(pdq(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(pdq(&["reproduce", "table9", "--out", "x"]).status.code(), Some(2));
    assert_eq!(pdq(&["simulate", "twomode_pwa"]).status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_pdq"))
        .args(["validate", "twomode_pwa"])
        .env("PDQ_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn check_prints_certificate() {
    let o = pdq(&["check", "twomode_mode_responsive", "--drift"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().next(), Some("Stable"));
    let b: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("certificate: b = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(b > 0.0 && b < 5.0 / 3.0);
    assert!(out.contains("drift check: 0 of 1000"), "{out}");
}

#[test]
fn reproduce_fig2_is_byte_identical_and_matches_band() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let o = Command::new(env!("CARGO_BIN_EXE_pdq"))
            .args(["reproduce", "fig2", "--out", dir.path().to_str().unwrap()])
            .env("PDQ_THREADS", "2")
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let ta = fs::read(a.path().join("fig2.csv")).unwrap();
    let tb = fs::read(b.path().join("fig2.csv")).unwrap();
    assert_eq!(ta, tb);

    let text = String::from_utf8(ta).unwrap();
    let mut rows = 0;
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let x: f64 = cols[0].parse().unwrap();
        let y: f64 = cols[1].parse().unwrap();
        let s = x / 3.0 + 2.0 * y / 3.0;
        if (s - 0.3).abs() < 1e-9 || (s - 0.7).abs() < 1e-9 {
            continue;
        }
        assert_eq!(cols[2] == "Unstable", !(0.3..=0.7).contains(&s), "{line}");
        rows += 1;
    }
    assert!(rows > 10_000);
}

#[test]
fn reproduce_tables_write_summaries() {
    let dir = tempfile::tempdir().unwrap();
    for t in ["table1", "table2", "table3", "table4"] {
        let o = pdq(&["reproduce", t, "--out", dir.path().to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let summary = fs::read_to_string(dir.path().join(format!("{t}.csv"))).unwrap();
        assert_eq!(summary.lines().count(), 5, "{summary}");
        for case in 1..=4 {
            assert!(dir.path().join(format!("{t}_case{case}.csv")).exists());
        }
    }
    let t1 = fs::read_to_string(dir.path().join("table1.csv")).unwrap();
    // α1 = 0, α2 > 0: necessary condition θ1 ≤ 0.7 over the whole scan below
    let row: Vec<&str> = t1.lines().nth(2).unwrap().split(',').collect();
    assert_eq!(&row[1..3], &["0", "1"]);
    assert_eq!(row[5], "-1");
    assert!((row[6].parse::<f64>().unwrap() - 0.7).abs() < 1e-9);
}

#[test]
fn scan_logit_boundary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("grid.csv");
    let o = pdq(&["scan", "twomode_logit", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(out).unwrap();
    assert_eq!(
        text.lines().next(),
        Some("param1,param2,class,margin_1,margin_2,cert_b")
    );
    let edge = (7.0f64 / 3.0).ln();
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let x: f64 = cols[0].parse().unwrap();
        assert_eq!(cols[1], "");
        assert_eq!(cols[2] == "Unstable", x.abs() > edge, "{line}");
    }
}

#[test]
fn simulate_and_ensemble_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("traj.csv");
    let o = pdq(&[
        "simulate",
        "twomode_pwa",
        "--horizon",
        "50",
        "--seed",
        "3",
        "--out",
        traj.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&traj).unwrap();
    assert_eq!(text.lines().next(), Some("time,event_kind,mode,q_1,q_2"));
    assert!(text.lines().last().unwrap().starts_with("50,Sample,"));

    let stats = dir.path().join("stats.csv");
    let o = pdq(&[
        "ensemble",
        "twomode_mode_responsive",
        "--seeds",
        "3",
        "--horizon",
        "200",
        "--out",
        stats.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&stats).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().last().unwrap().starts_with("summary,200,"));
}

#[test]
fn scan_without_section_is_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plain.scn");
    let text = bundled::TWOMODE_PWA;
    fs::write(&path, &text[..text.find("[scan]").unwrap()]).unwrap();
    let o = pdq(&["scan", path.to_str().unwrap(), "--out", dir.path().join("g.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no [scan] section"));
}
