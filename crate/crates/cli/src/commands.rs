use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use adrflat::acceptance::{run_checks, Faults};
use adrflat::plant::{compute_metrics, run_scenario, true_disturbance_derivatives, write_csv, write_metrics};
use adrflat::plant::{Metrics, SimLog};
use adrflat::Error;

use crate::config::{ConfigError, ScenarioFile};
use crate::svg::{figure, Panel, Series};

/// Why a command failed; decides the exit code.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Unstable(String),
    Io(String),
    Checks(usize),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Unstable(_) => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Unstable(m) => write!(f, "{m}"),
            Failure::Io(m) => write!(f, "i/o error: {m}"),
            Failure::Checks(n) => write!(f, "{n} check(s) failed"),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub controller: Option<String>,
    pub dob_order: Option<usize>,
    pub dob_bandwidth: Option<f64>,
    pub dt: Option<f64>,
    pub duration: Option<f64>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, file: &mut ScenarioFile) -> Result<(), Failure> {
        if let Some(v) = &self.controller {
            file.controller.variant = v.parse().map_err(|e: Error| Failure::Config(e.to_string()))?;
        }
        if let Some(k) = self.dob_order {
            file.observer.order = k;
        }
        if let Some(l) = self.dob_bandwidth {
            file.observer.bandwidth = l;
        }
        if let Some(dt) = self.dt {
            file.sim.dt = dt;
        }
        if let Some(t) = self.duration {
            file.sim.t_end = t;
        }
        if let Some(s) = self.seed {
            file.sim.seed = s;
        }
        Ok(())
    }
}

/// Steady-state window used for the summary metrics.
fn metric_window(log: &SimLog) -> (f64, f64) {
    let t_end = log.t.last().copied().unwrap_or(0.0);
    (0.4 * t_end, t_end)
}

fn sim_error(e: Error) -> Failure {
    match e {
        Error::UnstableRun { .. } => Failure::Unstable(e.to_string()),
        other => Failure::Config(other.to_string()),
    }
}

/// Runs one scenario into `out`; returns the summary metrics.
pub fn run_file(file: &ScenarioFile, out: &Path) -> Result<Metrics, Failure> {
    let scenario = file.to_scenario()?;
    fs::create_dir_all(out)?;
    let log = match run_scenario(&scenario) {
        Ok(log) => log,
        Err(Error::UnstableRun { t, partial }) => {
            write_csv(&partial, BufWriter::new(fs::File::create(out.join("log.csv"))?))?;
            return Err(Failure::Unstable(format!(
                "run became unstable at t = {t:.6} s; partial log written to {}",
                out.join("log.csv").display()
            )));
        }
        Err(e) => return Err(sim_error(e)),
    };
    write_csv(&log, BufWriter::new(fs::File::create(out.join("log.csv"))?))?;
    let (t0, t1) = metric_window(&log);
    let metrics = compute_metrics(&log, t0, t1).map_err(sim_error)?;
    let extra = vec![
        ("variant".to_string(), log.variant.to_string()),
        ("seed".to_string(), log.seed.to_string()),
        ("dt".to_string(), format!("{:e}", scenario.sim.dt)),
        ("t_end".to_string(), format!("{}", scenario.sim.t_end)),
        ("dob_order".to_string(), scenario.controller.dob_order.to_string()),
        ("dob_bandwidth".to_string(), format!("{}", scenario.controller.dob_bandwidth)),
        ("samples".to_string(), log.len().to_string()),
    ];
    write_metrics(&metrics, &extra, BufWriter::new(fs::File::create(out.join("metrics.txt"))?))?;
    fs::write(out.join("fig_tracking.svg"), tracking_figure(&log))?;
    fs::write(out.join("fig_disturbance.svg"), disturbance_figure(&log))?;
    Ok(metrics)
}

pub fn tracking_figure(log: &SimLog) -> String {
    let q2: Vec<f64> = log.x.iter().map(|x| x[2]).collect();
    let err: Vec<f64> = (0..log.len()).map(|i| log.tracking_error(i)).collect();
    let panels = [
        Panel {
            title: format!("position tracking ({})", log.variant),
            x_label: "t [s]",
            y_label: "q2 [m]",
            series: vec![
                Series { label: "q2_des", color: "#888", xs: &log.t, ys: log.q2_des.clone(), dashed: true },
                Series { label: "q2", color: "#1f77b4", xs: &log.t, ys: q2, dashed: false },
            ],
            robust_range: false,
        },
        Panel {
            title: "tracking error".into(),
            x_label: "t [s]",
            y_label: "q2 - q2_des [m]",
            series: vec![Series { label: "error", color: "#d62728", xs: &log.t, ys: err, dashed: false }],
            robust_range: false,
        },
    ];
    figure(&panels, 2, 1)
}

pub fn disturbance_figure(log: &SimLog) -> String {
    let k = log.observer_order();
    let truth = true_disturbance_derivatives(log, k);
    let mut panels = Vec::new();
    let ticks = ["", "'", "''", "'''", "''''"];
    for j in 0..=k {
        for (name, ch) in [("d1", 1), ("d2", 3)] {
            panels.push(Panel {
                title: format!("{name}{}", ticks.get(j).copied().unwrap_or("^(j)")),
                x_label: "t [s]",
                y_label: "",
                series: vec![
                    Series { label: "true", color: "#222", xs: &log.t, ys: truth[j].iter().map(|v| v[ch]).collect(), dashed: false },
                    Series { label: "estimate", color: "#d62728", xs: &log.t, ys: log.tau_hat.iter().map(|v| v[j][ch]).collect(), dashed: true },
                ],
                robust_range: true,
            });
        }
    }
    figure(&panels, k + 1, 2)
}

pub fn verify(filter: Option<&str>, faults: Faults) -> Result<(), Failure> {
    let outcomes = run_checks(filter, faults);
    if outcomes.is_empty() {
        return Err(Failure::Config(format!("no check matches filter '{}'", filter.unwrap_or(""))));
    }
    for o in &outcomes {
        println!("{}", o.line());
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{}/{} checks passed", outcomes.len() - failed, outcomes.len());
    if failed > 0 {
        Err(Failure::Checks(failed))
    } else {
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SweepRow {
    pub value: String,
    pub status: String,
    pub rmse_tracking: f64,
    pub est_rmse: f64,
}

/// Runs `base` once per value of `key` on at most `jobs` worker threads.
pub fn sweep(base: &ScenarioFile, key: &str, values: &[String], out: &Path, jobs: usize) -> Result<Vec<SweepRow>, Failure> {
    // Reject bad keys and values before starting any run.
    let files = values
        .iter()
        .map(|v| base.with_value(key, v))
        .collect::<Result<Vec<_>, _>>()?;
    for f in &files {
        f.to_scenario()?;
    }
    fs::create_dir_all(out)?;
    let dirs: Vec<PathBuf> = values
        .iter()
        .enumerate()
        .map(|(i, v)| out.join(format!("{i:03}_{}", v.replace(['/', '\\'], "_"))))
        .collect();
    let next = AtomicUsize::new(0);
    let rows: Mutex<Vec<Option<SweepRow>>> = Mutex::new(vec![None; values.len()]);
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, values.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= files.len() {
                    break;
                }
                let (status, rmse, est) = match run_file(&files[i], &dirs[i]) {
                    Ok(m) => {
                        let est = m.est_rmse.first().map_or(f64::NAN, |e| ((e[0] * e[0] + e[1] * e[1]) / 2.0).sqrt());
                        ("ok".to_string(), m.rmse_tracking, est)
                    }
                    Err(Failure::Unstable(_)) => ("unstable".to_string(), f64::NAN, f64::NAN),
                    Err(e) => (format!("error: {e}").replace(',', ";"), f64::NAN, f64::NAN),
                };
                rows.lock().unwrap()[i] = Some(SweepRow {
                    value: values[i].clone(),
                    status,
                    rmse_tracking: rmse,
                    est_rmse: est,
                });
            });
        }
    });
    let rows: Vec<SweepRow> = rows.into_inner().unwrap().into_iter().map(|r| r.expect("every value ran")).collect();
    let mut csv = String::from("value,rmse_tracking,est_rmse,status\n");
    for r in &rows {
        csv.push_str(&format!("{},{:.8e},{:.8e},{}\n", r.value, r.rmse_tracking, r.est_rmse, r.status));
    }
    fs::write(out.join("sweep_summary.csv"), csv)?;
    Ok(rows)
}
