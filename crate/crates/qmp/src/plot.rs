//! SVG views of metrics CSVs: learning curves (mean line, std band across
//! seeds) and per-task stacked selection proportions.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::metrics::MetricRow;

const PALETTE: [&str; 10] =
    ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

#[derive(Debug, Clone, PartialEq)]
pub struct CurveSeries {
    pub label: String,
    /// Mean per-task environment steps; strictly increasing.
    pub x: Vec<f64>,
    /// Mean over seeds of the task-averaged success rate.
    pub mean: Vec<f64>,
    /// Population std over seeds; zero for a single seed.
    pub std: Vec<f64>,
}

/// Per-epoch selection proportions for one task, averaged over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSeries {
    pub label: String,
    pub task: usize,
    pub epochs: Vec<usize>,
    /// `rows[e][j]`: fraction of steps acted by candidate `j`; rows sum to 1.
    pub rows: Vec<Vec<f64>>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt())
}

fn by_method(rows: &[MetricRow]) -> BTreeMap<&str, Vec<&MetricRow>> {
    let mut m: BTreeMap<&str, Vec<&MetricRow>> = BTreeMap::new();
    for r in rows {
        m.entry(r.method.as_str()).or_default().push(r);
    }
    m
}

/// One series per method over the epochs evaluated in every seed.
pub fn learning_curves(rows: &[MetricRow]) -> Vec<CurveSeries> {
    let mut out = Vec::new();
    for (label, rows) in by_method(rows) {
        // epoch -> seed -> (success values, step values)
        let mut cells: BTreeMap<usize, BTreeMap<u64, (Vec<f64>, Vec<f64>)>> = BTreeMap::new();
        for r in rows.iter().filter(|r| r.success_rate.is_some()) {
            let cell = cells.entry(r.epoch).or_default().entry(r.seed).or_default();
            cell.0.push(r.success_rate.unwrap_or(0.0));
            cell.1.push(r.cumulative_env_steps as f64);
        }
        let seeds: std::collections::BTreeSet<u64> = rows.iter().map(|r| r.seed).collect();
        let mut s = CurveSeries { label: label.to_string(), x: vec![], mean: vec![], std: vec![] };
        for per_seed in cells.values().filter(|c| c.len() == seeds.len()) {
            let succ: Vec<f64> = per_seed.values().map(|(v, _)| mean_std(v).0).collect();
            let steps: Vec<f64> = per_seed.values().map(|(_, x)| mean_std(x).0).collect();
            let x = mean_std(&steps).0;
            if s.x.last().is_some_and(|&last| x <= last) {
                continue;
            }
            let (m, sd) = mean_std(&succ);
            s.x.push(x);
            s.mean.push(m);
            s.std.push(sd);
        }
        out.push(s);
    }
    out
}

/// Selection proportions per task for every method that logged selections.
pub fn mixture_series(rows: &[MetricRow]) -> Vec<MixtureSeries> {
    let mut out = Vec::new();
    for (label, rows) in by_method(rows) {
        let tasks: std::collections::BTreeSet<usize> = rows.iter().map(|r| r.task).collect();
        for task in tasks {
            let mut per_epoch: BTreeMap<usize, Vec<Vec<f64>>> = BTreeMap::new();
            for r in rows.iter().filter(|r| r.task == task) {
                let total: u64 = r.selection.iter().sum();
                if total > 0 {
                    per_epoch
                        .entry(r.epoch)
                        .or_default()
                        .push(r.selection.iter().map(|&c| c as f64 / total as f64).collect());
                }
            }
            let mut s = MixtureSeries { label: label.to_string(), task, epochs: vec![], rows: vec![] };
            for (epoch, fr) in per_epoch {
                let k = fr[0].len();
                let row: Vec<f64> = (0..k).map(|j| fr.iter().map(|f| f[j]).sum::<f64>() / fr.len() as f64).collect();
                s.epochs.push(epoch);
                s.rows.push(row);
            }
            out.push(s);
        }
    }
    out
}

struct Frame {
    left: f64,
    top: f64,
    width: f64,
    height: f64,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        let span = if self.x1 > self.x0 { self.x1 - self.x0 } else { 1.0 };
        self.left + (x - self.x0) / span * self.width
    }

    fn py(&self, y: f64) -> f64 {
        let span = if self.y1 > self.y0 { self.y1 - self.y0 } else { 1.0 };
        self.top + self.height - (y - self.y0) / span * self.height
    }

    fn axes(&self, svg: &mut String, title: &str) {
        let _ = writeln!(
            svg,
            r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#333"/>"##,
            self.left, self.top, self.width, self.height
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{}</text>"#,
            self.left + self.width / 2.0,
            self.top - 6.0,
            escape(title)
        );
        for (v, anchor_y) in [(self.y0, self.py(self.y0)), (self.y1, self.py(self.y1))] {
            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{}</text>"#,
                self.left - 4.0,
                anchor_y + 3.0,
                fmt_tick(v)
            );
        }
        for v in [self.x0, self.x1] {
            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="middle">{}</text>"#,
                self.px(v),
                self.top + self.height + 14.0,
                fmt_tick(v)
            );
        }
    }
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 1000.0 {
        format!("{:.0}", v)
    } else {
        format!("{:.2}", v)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn points(pts: impl Iterator<Item = (f64, f64)>) -> String {
    pts.map(|(x, y)| format!("{x:.2},{y:.2}")).collect::<Vec<_>>().join(" ")
}

/// One SVG document: the learning-curve panel on top, one stacked selection
/// panel per (method, task) below it.
pub fn render(curves: &[CurveSeries], mixtures: &[MixtureSeries]) -> String {
    const PANEL_W: f64 = 220.0;
    const PANEL_H: f64 = 140.0;
    const COLS: usize = 4;
    let width = 80.0 + COLS as f64 * (PANEL_W + 50.0);
    let curve = Frame {
        left: 60.0,
        top: 30.0,
        width: width - 260.0,
        height: 300.0,
        x0: curves.iter().flat_map(|c| c.x.first()).copied().fold(f64::INFINITY, f64::min).min(0.0),
        x1: curves.iter().flat_map(|c| c.x.last()).copied().fold(1.0, f64::max),
        y0: 0.0,
        y1: 1.0,
    };
    let mix_rows = mixtures.len().div_ceil(COLS);
    let height = curve.top + curve.height + 60.0 + mix_rows as f64 * (PANEL_H + 50.0);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    curve.axes(&mut svg, "success rate vs environment steps per task");
    for (k, c) in curves.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let upper = c.x.iter().zip(c.mean.iter().zip(&c.std)).map(|(&x, (&m, &s))| (curve.px(x), curve.py((m + s).min(1.0))));
        let lower = c.x.iter().zip(c.mean.iter().zip(&c.std)).rev().map(|(&x, (&m, &s))| (curve.px(x), curve.py((m - s).max(0.0))));
        let band: Vec<(f64, f64)> = upper.chain(lower).collect();
        if !band.is_empty() {
            let _ = writeln!(svg, r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, points(band.into_iter()));
        }
        let line = c.x.iter().zip(&c.mean).map(|(&x, &m)| (curve.px(x), curve.py(m)));
        let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, points(line));
        let ly = curve.top + 14.0 + 16.0 * k as f64;
        let lx = curve.left + curve.width + 16.0;
        let _ = writeln!(svg, r#"<rect x="{lx:.1}" y="{:.1}" width="12" height="4" fill="{color}"/>"#, ly - 4.0);
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{ly:.1}" font-size="11">{}</text>"#, lx + 18.0, escape(&c.label));
    }
    let base = curve.top + curve.height + 60.0;
    for (k, m) in mixtures.iter().enumerate() {
        let (row, col) = (k / COLS, k % COLS);
        let f = Frame {
            left: 60.0 + col as f64 * (PANEL_W + 50.0),
            top: base + row as f64 * (PANEL_H + 50.0),
            width: PANEL_W,
            height: PANEL_H,
            x0: m.epochs.first().copied().unwrap_or(0) as f64,
            x1: m.epochs.last().copied().unwrap_or(1) as f64,
            y0: 0.0,
            y1: 1.0,
        };
        f.axes(&mut svg, &format!("{} task {}", m.label, m.task));
        let k_cands = m.rows.first().map_or(0, Vec::len);
        let mut below = vec![0.0; m.rows.len()];
        for j in 0..k_cands {
            let above: Vec<f64> = below.iter().zip(&m.rows).map(|(b, r)| b + r[j]).collect();
            let top = m.epochs.iter().zip(&above).map(|(&e, &y)| (f.px(e as f64), f.py(y.min(1.0))));
            let bottom = m.epochs.iter().zip(&below).rev().map(|(&e, &y)| (f.px(e as f64), f.py(y.min(1.0))));
            let _ = writeln!(
                svg,
                r#"<polygon points="{}" fill="{}" fill-opacity="0.8" stroke="none"><title>policy {j}</title></polygon>"#,
                points(top.chain(bottom)),
                PALETTE[j % PALETTE.len()]
            );
            below = above;
        }
    }
    svg.push_str("</svg>\n");
    svg
}
