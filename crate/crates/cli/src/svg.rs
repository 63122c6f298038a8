//! Static line plots as plain SVG polylines.

use std::fmt::Write;

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 500.0;

/// Above this many points a series is decimated by stride.
const MAX_POINTS: usize = 2000;

pub struct Series<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub xs: &'a [f64],
    pub ys: Vec<f64>,
    pub dashed: bool,
}

pub struct Panel<'a> {
    pub title: String,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub series: Vec<Series<'a>>,
    /// Fix the y-range to the central quantile band of the first series
    /// (keeps isolated spikes from flattening the rest).
    pub robust_range: bool,
}

/// Round tick positions covering `[lo, hi]`.
pub fn ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return vec![lo];
    }
    let raw = (hi - lo) / target.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e4).contains(&a) {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.1e}")
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    sorted[((sorted.len() - 1) as f64 * q).round() as usize]
}

fn y_range(panel: &Panel) -> (f64, f64) {
    let finite = |s: &Series| s.ys.iter().copied().filter(|v| v.is_finite()).collect::<Vec<_>>();
    let (lo, hi) = if panel.robust_range && !panel.series.is_empty() {
        let mut v = finite(&panel.series[0]);
        v.sort_by(f64::total_cmp);
        if v.is_empty() {
            (0.0, 1.0)
        } else {
            (quantile(&v, 0.005), quantile(&v, 0.995))
        }
    } else {
        panel
            .series
            .iter()
            .flat_map(|s| finite(s))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    let pad = if hi > lo { 0.08 * (hi - lo) } else { lo.abs().max(1.0) * 0.1 };
    (lo - pad, hi + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn render_panel(out: &mut String, panel: &Panel, x0: f64, y0: f64, w: f64, h: f64) {
    let (ml, mr, mt, mb) = (62.0, 12.0, 22.0, 38.0);
    let (px, py, pw, ph) = (x0 + ml, y0 + mt, w - ml - mr, h - mt - mb);
    let xs = panel.series.iter().flat_map(|s| s.xs.iter().copied());
    let (xlo, xhi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (xlo, xhi) = if xhi > xlo { (xlo, xhi) } else { (0.0, 1.0) };
    let (ylo, yhi) = y_range(panel);
    let sx = |x: f64| px + (x - xlo) / (xhi - xlo) * pw;
    let sy = |y: f64| py + ph - (y.clamp(ylo, yhi) - ylo) / (yhi - ylo) * ph;

    let _ = writeln!(
        out,
        r#"<rect x="{px:.1}" y="{py:.1}" width="{pw:.1}" height="{ph:.1}" fill="none" stroke="black" stroke-width="1"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">{}</text>"#,
        px + pw / 2.0,
        y0 + 15.0,
        escape(&panel.title)
    );
    for t in ticks(xlo, xhi, 6) {
        let x = sx(t);
        let _ = writeln!(
            out,
            r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/><text x="{x:.1}" y="{:.1}" font-size="10" text-anchor="middle">{}</text>"#,
            py + ph,
            py + ph + 4.0,
            py + ph + 15.0,
            fmt_tick(t)
        );
    }
    for t in ticks(ylo, yhi, 5) {
        let y = sy(t);
        let _ = writeln!(
            out,
            r#"<line x1="{:.1}" y1="{y:.1}" x2="{px:.1}" y2="{y:.1}" stroke="black"/><line x1="{px:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="gainsboro"/><text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{}</text>"#,
            px - 4.0,
            px + pw,
            px - 6.0,
            y + 3.5,
            fmt_tick(t)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"#,
        px + pw / 2.0,
        py + ph + 30.0,
        escape(panel.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle" transform="rotate(-90 {:.1} {:.1})">{}</text>"#,
        x0 + 12.0,
        py + ph / 2.0,
        x0 + 12.0,
        py + ph / 2.0,
        escape(panel.y_label)
    );

    for (n, s) in panel.series.iter().enumerate() {
        let len = s.xs.len().min(s.ys.len());
        let stride = len.div_ceil(MAX_POINTS).max(1);
        let mut pts = String::new();
        for i in (0..len).step_by(stride) {
            if s.ys[i].is_finite() {
                let _ = write!(pts, "{:.2},{:.2} ", sx(s.xs[i]), sy(s.ys[i]));
            }
        }
        let dash = if s.dashed { r#" stroke-dasharray="6,4""# } else { "" };
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.3"{dash} points="{}"/>"#,
            s.color,
            pts.trim_end()
        );
        let ly = py + 12.0 + 13.0 * n as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{}" stroke-width="2"{dash}/><text x="{:.1}" y="{:.1}" font-size="10">{}</text>"#,
            px + pw - 110.0,
            ly - 3.0,
            px + pw - 92.0,
            ly - 3.0,
            s.color,
            px + pw - 88.0,
            ly,
            escape(s.label)
        );
    }
}

/// Panels laid out on a `rows × cols` grid of the fixed canvas.
pub fn figure(panels: &[Panel], rows: usize, cols: usize) -> String {
    let mut out = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">
<rect width="100%" height="100%" fill="white"/>
"#
    );
    let (w, h) = (WIDTH / cols as f64, HEIGHT / rows as f64);
    for (i, p) in panels.iter().enumerate() {
        render_panel(&mut out, p, (i % cols) as f64 * w, (i / cols) as f64 * h, w, h);
    }
    out.push_str("</svg>\n");
    out
}
