use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pfdamage::io::{parse_controls, Snapshot};

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn pfdamage(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pfdamage"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out-dir")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn edited(name: &str, from: &str, to: &str, dir: &Path) -> PathBuf {
    let text = std::fs::read_to_string(configs().join(name)).unwrap();
    assert!(text.contains(from), "{from}");
    let path = dir.join(name);
    std::fs::write(&path, text.replacen(from, to, 1)).unwrap();
    path
}

#[test]
fn simulate_writes_headed_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = pfdamage(&["simulate"], &configs().join("standard.toml"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("audit_violations 0"));
    let header = std::fs::read_to_string(dir.path().join("energy.csv")).unwrap();
    let first = header.lines().next().unwrap();
    assert!(first.starts_with("# pfdamage ") && first.contains(" config="), "{first}");
    let snap_text = std::fs::read_to_string(dir.path().join("snapshots/snap_00050.csv")).unwrap();
    let snap = Snapshot::parse(&snap_text).unwrap();
    assert_eq!(snap.k, 50);
    assert_eq!(snap.chi.len(), 17 * 17);
    assert_eq!(snap.u.len(), 2 * 17 * 17);
    assert_eq!(snap_text.lines().next().unwrap(), first);
}

#[test]
fn thread_count_does_not_change_results() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = configs().join("healing.toml");
    let oa = pfdamage(&["simulate", "--threads", "1"], &cfg, a.path());
    let ob = pfdamage(&["simulate", "--threads", "3"], &cfg, b.path());
    assert!(oa.status.success() && ob.status.success());
    for f in ["energy.csv", "snapshots/snap_00020.csv"] {
        let x = std::fs::read_to_string(a.path().join(f)).unwrap();
        let y = std::fs::read_to_string(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
}

#[test]
fn unknown_key_exits_one_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = edited("standard.toml", "viscosity = 1.0", "viscosity = 1.0\nviscocity = 2.0", dir.path());
    let o = pfdamage(&["simulate"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 15"), "{}", stderr(&o));
}

#[test]
fn contdep_without_perturbation_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = pfdamage(&["verify", "contdep"], &configs().join("healing.toml"), dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn newton_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg =
        edited("standard.toml", "beta = 0.001", "beta = 0.001\nnewton_max_iter = 1\nnewton_tol = 1e-300", dir.path());
    let o = pfdamage(&["simulate"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2), "{}{}", stdout(&o), stderr(&o));
}

#[test]
fn failed_check_exits_three() {
    // value differences cannot decrease when the schedule jumps late
    let dir = tempfile::tempdir().unwrap();
    let cfg = edited(
        "control_1d.toml",
        "beta_schedule = [0.1, 0.01, 0.001, 0.0001]",
        "beta_schedule = [0.1, 0.09, 0.0001]",
        dir.path(),
    );
    let o = pfdamage(&["optimize"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(3), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("FAIL continuation"));
}

#[test]
fn optimize_recovers_reference_control() {
    let dir = tempfile::tempdir().unwrap();
    let o = pfdamage(&["optimize", "--seed", "7"], &configs().join("control_1d.toml"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let coeffs = parse_controls(&std::fs::read_to_string(dir.path().join("controls.csv")).unwrap()).unwrap();
    assert!((coeffs[0] - 0.8).abs() <= 0.2 && (coeffs[1] - 1.2).abs() <= 0.2, "{coeffs:?}");
    let written = std::fs::read_to_string(dir.path().join("config.toml")).unwrap();
    assert!(written.contains("seed = 7"));
}

#[test]
fn extend_coeff_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = pfdamage(
        &["extend-coeff", "--samples", "21", "--range", "-1", "3"],
        &configs().join("standard.toml"),
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = std::fs::read_to_string(dir.path().join("split_samples.csv")).unwrap();
    let rows: Vec<Vec<f64>> =
        table.lines().skip(2).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 21);
    for r in &rows {
        // c = c1 + c2, c1 convex, c2 concave
        assert!((r[1] - r[2] - r[3]).abs() < 1e-12);
        assert!(r[6] >= -1e-12 && r[7] <= 1e-12);
    }
    assert_eq!(rows[0][1], 0.0);
    assert_eq!(rows[20][1], 2.0);
}
