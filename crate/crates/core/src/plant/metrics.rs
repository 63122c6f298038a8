use super::SimLog;
use crate::error::{Error, Result};

/// Tracking band used for the settle time, relative to the reference
/// amplitude.
pub const SETTLE_BAND: f64 = 0.02;

#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub t0: f64,
    pub t1: f64,
    /// RMSE of `q₂ − q₂_des` over the window.
    pub rmse_tracking: f64,
    pub max_abs_err: f64,
    /// `est_rmse[j] = [d₁, d₂]` error of the order-j estimate.
    pub est_rmse: Vec<[f64; 2]>,
    /// `est_rmse` divided by the RMS of the true signal over the window.
    pub est_nrmse: Vec<[f64; 2]>,
    /// First time after which the tracking error stays inside the band.
    pub settle_time: Option<f64>,
}

impl Metrics {
    pub fn pairs(&self) -> Vec<(String, f64)> {
        let mut out = vec![
            ("window_start".to_string(), self.t0),
            ("window_end".to_string(), self.t1),
            ("rmse_tracking".to_string(), self.rmse_tracking),
            ("max_abs_err".to_string(), self.max_abs_err),
        ];
        for (j, (e, n)) in self.est_rmse.iter().zip(&self.est_nrmse).enumerate() {
            for (c, name) in ["d1", "d2"].iter().enumerate() {
                out.push((format!("est_rmse_{name}_order{j}"), e[c]));
                out.push((format!("est_nrmse_{name}_order{j}"), n[c]));
            }
        }
        out.push(("settle_time".to_string(), self.settle_time.unwrap_or(f64::NAN)));
        out
    }
}

/// Derivatives of the logged true disturbance by central differences on the
/// log grid (one-sided at the ends); `out[order][sample]`.
pub fn true_disturbance_derivatives(log: &SimLog, max_order: usize) -> Vec<Vec<[f64; 4]>> {
    let mut out = vec![log.tau_true.clone()];
    let h = log.dt_log;
    for _ in 0..max_order {
        let prev = out.last().unwrap();
        let n = prev.len();
        let d: Vec<[f64; 4]> = (0..n)
            .map(|i| {
                let (a, b, span) = if n < 2 {
                    (0, 0, 1.0)
                } else if i == 0 {
                    (0, 1, h)
                } else if i == n - 1 {
                    (n - 2, n - 1, h)
                } else {
                    (i - 1, i + 1, 2.0 * h)
                };
                std::array::from_fn(|c| (prev[b][c] - prev[a][c]) / span)
            })
            .collect();
        out.push(d);
    }
    out
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    (sum / n.max(1) as f64).sqrt()
}

pub fn compute_metrics(log: &SimLog, t0: f64, t1: f64) -> Result<Metrics> {
    let idx: Vec<usize> = (0..log.len()).filter(|&i| log.t[i] >= t0 && log.t[i] <= t1).collect();
    if idx.is_empty() {
        return Err(Error::EmptyWindow { t0, t1 });
    }
    let rmse_tracking = rms(idx.iter().map(|&i| log.tracking_error(i)));
    let max_abs_err = idx.iter().map(|&i| log.tracking_error(i).abs()).fold(0.0, f64::max);

    let k = log.observer_order();
    let truth = true_disturbance_derivatives(log, k);
    let mut est_rmse = Vec::with_capacity(k + 1);
    let mut est_nrmse = Vec::with_capacity(k + 1);
    for (j, tr) in truth.iter().enumerate() {
        let mut e = [0.0; 2];
        let mut n = [0.0; 2];
        for (c, ch) in [1usize, 3].into_iter().enumerate() {
            e[c] = rms(idx.iter().map(|&i| log.tau_hat[i][j][ch] - tr[i][ch]));
            let scale = rms(idx.iter().map(|&i| tr[i][ch]));
            n[c] = if scale > 0.0 { e[c] / scale } else { f64::NAN };
        }
        est_rmse.push(e);
        est_nrmse.push(n);
    }

    let band = SETTLE_BAND * log.ref_amplitude;
    let settle_time = match (0..log.len()).rev().find(|&i| log.tracking_error(i).abs() > band) {
        None => log.t.first().copied(),
        Some(i) if i + 1 < log.len() => Some(log.t[i + 1]),
        Some(_) => None,
    };
    Ok(Metrics {
        t0,
        t1,
        rmse_tracking,
        max_abs_err,
        est_rmse,
        est_nrmse,
        settle_time,
    })
}
