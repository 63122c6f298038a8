use std::io::{self, Write};

use super::{Metrics, SimLog};

pub const CSV_HEADER: &str = "t,q1,dq1,q2,dq2,u,q2_ref,d1_true,d2_true,d1_hat,d2_hat,\
d1_hat_d1,d2_hat_d1,d1_hat_d2,d2_hat_d2,xi_norm";

/// One row per logged sample, 9 significant digits; orders the observer
/// does not provide are written as NaN.
pub fn write_csv<W: Write>(log: &SimLog, mut w: W) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for i in 0..log.len() {
        let est = |order: usize, ch: usize| log.tau_hat[i].get(order).map_or(f64::NAN, |v| v[ch]);
        let x = log.x[i];
        let row = [
            log.t[i],
            x[0],
            x[1],
            x[2],
            x[3],
            log.u[i],
            log.q2_des[i],
            log.tau_true[i][1],
            log.tau_true[i][3],
            est(0, 1),
            est(0, 3),
            est(1, 1),
            est(1, 3),
            est(2, 1),
            est(2, 3),
            log.xi_norm_sq(i).sqrt(),
        ];
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.8e}")).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()
}

/// Flat `key=value` lines.
pub fn write_metrics<W: Write>(metrics: &Metrics, extra: &[(String, String)], mut w: W) -> io::Result<()> {
    for (k, v) in extra {
        writeln!(w, "{k}={v}")?;
    }
    for (k, v) in metrics.pairs() {
        writeln!(w, "{k}={v:.8e}")?;
    }
    w.flush()
}
