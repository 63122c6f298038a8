use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_adrflat"));
    c.env_remove("ADRFLAT_OUT");
    c
}

fn benchmark_file() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/benchmark.toml")
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

fn metric(dir: &Path, key: &str) -> f64 {
    let body = fs::read_to_string(dir.join("metrics.txt")).unwrap();
    body.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing"))
        .parse()
        .unwrap()
}

#[test]
fn run_writes_all_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = bin()
        .args(["run", benchmark_file().to_str().unwrap(), "--duration", "0.5", "--seed", "7", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", text(&o));
    assert!(text(&o).contains("seed: 7"));
    for f in ["log.csv", "metrics.txt", "fig_tracking.svg", "fig_disturbance.svg"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let csv = fs::read_to_string(out.join("log.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 5001);
    assert!(csv.starts_with("t,q1,dq1,q2,dq2,u,q2_ref,"));
    let svg = fs::read_to_string(out.join("fig_disturbance.svg")).unwrap();
    assert!(svg.contains(r#"width="800""#) && svg.matches("<polyline").count() == 12);
    assert_eq!(fs::read_to_string(out.join("metrics.txt")).unwrap().lines().find(|l| l.starts_with("seed=")), Some("seed=7"));
}

#[test]
fn conventional_override_degrades_tracking() {
    let tmp = tempfile::tempdir().unwrap();
    let mut rmse = Vec::new();
    for v in ["polymatrix", "conventional"] {
        let out = tmp.path().join(v);
        let o = bin()
            .args(["run", benchmark_file().to_str().unwrap(), "--duration", "4", "--controller", v, "--out"])
            .arg(&out)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", text(&o));
        rmse.push(metric(&out, "rmse_tracking"));
    }
    assert!(rmse[1] > 10.0 * rmse[0], "{rmse:?}");
}

#[test]
fn output_root_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin()
        .env("ADRFLAT_OUT", tmp.path())
        .args(["run", benchmark_file().to_str().unwrap(), "--duration", "0.05"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", text(&o));
    assert!(tmp.path().join("log.csv").is_file());
}

#[test]
fn config_errors_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "[plant]\nm1 = 0.1\nspring = 3.0\n").unwrap();
    let o = bin().arg("run").arg(&bad).arg("--out").arg(tmp.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).contains("line 3"), "{}", text(&o));

    let o = bin().arg("run").arg(tmp.path().join("missing.toml")).output().unwrap();
    assert_eq!(o.status.code(), Some(1));

    // Step guard of the observer.
    let o = bin()
        .args(["run", benchmark_file().to_str().unwrap(), "--dt", "1e-3", "--out"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1), "{}", text(&o));

    // Order 1 cannot supply the second derivative the feedforward needs.
    let o = bin()
        .args(["run", benchmark_file().to_str().unwrap(), "--dob-order", "1", "--controller", "brunovsky", "--out"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1), "{}", text(&o));
    assert!(text(&o).contains("derivative order"), "{}", text(&o));
}

#[test]
fn unstable_run_exits_2_with_partial_log() {
    let tmp = tempfile::tempdir().unwrap();
    let f = tmp.path().join("unstable.toml");
    fs::write(&f, "[controller]\nvariant = \"conventional\"\npoles = [5.0, 5.0, 6.0, 6.0]\n[sim]\nt_end = 3.0\n").unwrap();
    let out = tmp.path().join("out");
    let o = bin().arg("run").arg(&f).arg("--out").arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(2), "{}", text(&o));
    assert!(fs::read_to_string(out.join("log.csv")).unwrap().lines().count() > 10);
}

#[test]
fn verify_filter_and_fault_injection() {
    let o = bin().args(["verify", "--filter", "C1"]).output().unwrap();
    assert!(o.status.success(), "{}", text(&o));
    assert_eq!(text(&o).lines().filter(|l| l.starts_with('[')).count(), 1);

    let o = bin().args(["verify", "--filter", "C1", "--inject-fault", "corrupt-gain"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).contains("[FAIL] C1   dob_gain_tuning"), "{}", text(&o));

    let o = bin().args(["verify", "--filter", "csv_schema"]).output().unwrap();
    assert!(o.status.success(), "{}", text(&o));

    let o = bin().args(["verify", "--filter", "nothing-matches"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_writes_summary_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    let base = tmp.path().join("short.toml");
    fs::write(&base, "[sim]\nt_end = 0.2\n").unwrap();
    let out = tmp.path().join("sweep");
    let o = bin()
        .args(["sweep", base.to_str().unwrap(), "--param", "dob-bandwidth", "--values", "300,1000", "--jobs", "2", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", text(&o));
    let summary = fs::read_to_string(out.join("sweep_summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines[0], "value,rmse_tracking,est_rmse,status");
    assert!(lines[1].starts_with("300,") && lines[2].starts_with("1000,"));
    assert!(lines[1..].iter().all(|l| l.ends_with(",ok")));
    assert!(out.join("000_300/log.csv").is_file() && out.join("001_1000/metrics.txt").is_file());
    assert_eq!(metric(&out.join("000_300"), "dob_bandwidth"), 300.0);

    let o = bin()
        .args(["sweep", base.to_str().unwrap(), "--param", "plant.mass", "--values", "1", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).contains("unknown scenario key"));
}

#[test]
fn single_value_sweep_matches_run() {
    let tmp = tempfile::tempdir().unwrap();
    let base = tmp.path().join("short.toml");
    fs::write(&base, "[sim]\nt_end = 0.1\n").unwrap();
    let run_dir = tmp.path().join("run");
    let o = bin().arg("run").arg(&base).arg("--dt").arg("2e-5").arg("--out").arg(&run_dir).output().unwrap();
    assert!(o.status.success(), "{}", text(&o));
    let sweep_dir = tmp.path().join("sweep");
    let o = bin()
        .args(["sweep", base.to_str().unwrap(), "--param", "dt", "--values", "2e-5", "--out"])
        .arg(&sweep_dir)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", text(&o));
    assert_eq!(
        fs::read(run_dir.join("log.csv")).unwrap(),
        fs::read(sweep_dir.join("000_2e-5/log.csv")).unwrap()
    );
}
