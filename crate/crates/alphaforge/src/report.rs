//! Metrics tables (CSV) and figures (SVG).

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::str::FromStr;

use alphaforge_core::backtest::CorrelationMatrix;
use alphaforge_core::losses::LossKind;
use alphaforge_core::metrics::{MetricsReport, PnlSeries};
use alphaforge_core::sweep::SweepPoint;
use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::io::num;

pub const TABLE_HEADER: [&str; 5] = ["alpha", "turnover", "max_drawdown", "profit_pct", "sharpe"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortColumn {
    Turnover,
    MaxDrawdown,
    ProfitPct,
    #[default]
    Sharpe,
}

impl FromStr for SortColumn {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "turnover" => Ok(SortColumn::Turnover),
            "max_drawdown" => Ok(SortColumn::MaxDrawdown),
            "profit_pct" => Ok(SortColumn::ProfitPct),
            "sharpe" => Ok(SortColumn::Sharpe),
            _ => Err(format!("unknown column {s:?}")),
        }
    }
}

fn key(r: &MetricsReport, col: SortColumn) -> Option<f64> {
    match col {
        SortColumn::Turnover => Some(r.mean_daily_turnover),
        SortColumn::MaxDrawdown => Some(r.max_drawdown),
        SortColumn::ProfitPct => Some(r.profit_pct),
        SortColumn::Sharpe => r.sharpe,
    }
}

/// CSV with one row per strategy, sorted descending by `sort_by`; ties and
/// missing values (placed last) are ordered by name. A missing Sharpe is an
/// empty field.
pub fn metrics_table(rows: &[(String, MetricsReport)], sort_by: SortColumn) -> String {
    let mut sorted: Vec<&(String, MetricsReport)> = rows.iter().collect();
    sorted.sort_by(|a, b| {
        let ord = match (key(&a.1, sort_by), key(&b.1, sort_by)) {
            (Some(x), Some(y)) => y.total_cmp(&x),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        };
        ord.then_with(|| a.0.cmp(&b.0))
    });
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TABLE_HEADER).expect("in-memory write");
    for (name, r) in sorted {
        let sharpe = r.sharpe.map(num).unwrap_or_default();
        w.write_record([name.clone(), num(r.mean_daily_turnover), num(r.max_drawdown), num(r.profit_pct), sharpe])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

/// Correlation matrix as CSV: a `name` column, then one column per strategy.
pub fn correlation_table(corr: &CorrelationMatrix, names: &[String]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["name".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header).expect("in-memory write");
    for (i, name) in names.iter().enumerate() {
        let mut rec = vec![name.clone()];
        rec.extend((0..corr.n).map(|j| num(corr.get(i, j))));
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

const PALETTE: [&str; 10] =
    ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn open_svg(w: f64, h: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    s
}

/// Linear map of a data interval onto a pixel interval.
#[derive(Clone, Copy)]
struct Scale {
    lo: f64,
    hi: f64,
    from: f64,
    to: f64,
}

impl Scale {
    fn new(lo: f64, hi: f64, from: f64, to: f64) -> Self {
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        Self { lo, hi, from, to }
    }

    fn at(&self, v: f64) -> f64 {
        self.from + (v - self.lo) / (self.hi - self.lo) * (self.to - self.from)
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn polyline(points: impl Iterator<Item = (f64, f64)>, color: &str, extra: &str) -> String {
    let pts: Vec<String> = points.map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    format!(r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{extra} points="{}"/>"#, pts.join(" ")) + "\n"
}

fn y_axis(s: &mut String, y: &Scale, x0: f64, x1: f64) {
    for k in 0..=4 {
        let v = y.lo + (y.hi - y.lo) * k as f64 / 4.0;
        let py = y.at(v);
        let _ = writeln!(s, r##"<line x1="{x0}" y1="{py:.2}" x2="{x1}" y2="{py:.2}" stroke="#e0e0e0"/>"##);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 4.0, py + 4.0, tick(v));
    }
}

fn tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

/// Cumulative pnl, one polyline per strategy, with a dashed vertical marker at
/// `test_start` when it falls inside the plotted dates.
pub fn pnl_plot(series: &[(String, &PnlSeries)], test_start: Option<NaiveDate>) -> String {
    let (w, h) = (860.0, 440.0);
    let (left, right, top, bottom) = (70.0, 180.0, 30.0, 40.0);
    let day = |d: &NaiveDate| d.num_days_from_ce() as f64;
    let curves: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|(_, p)| {
            let mut acc = 0.0;
            p.dates
                .iter()
                .zip(&p.values)
                .map(|(d, v)| {
                    acc += v;
                    (day(d), acc)
                })
                .collect()
        })
        .collect();
    let (x_lo, x_hi) = bounds(curves.iter().flatten().map(|p| p.0));
    let (y_lo, y_hi) = bounds(curves.iter().flatten().map(|p| p.1).chain([0.0]));
    let (x_lo, x_hi) = if x_lo.is_finite() { (x_lo, x_hi) } else { (0.0, 1.0) };
    let x = Scale::new(x_lo, x_hi, left, w - right);
    let y = Scale::new(y_lo, y_hi, h - bottom, top);

    let mut s = open_svg(w, h);
    let _ = writeln!(s, r#"<text x="{left}" y="18" font-size="13">Cumulative pnl</text>"#);
    y_axis(&mut s, &y, left, w - right);
    let _ = writeln!(s, r#"<line x1="{left}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, h - bottom, w - right, h - bottom);
    let _ = writeln!(s, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{}" stroke="black"/>"#, h - bottom);
    for (d, anchor, px) in [(x_lo, "start", left), (x_hi, "end", w - right)] {
        if let Some(date) = NaiveDate::from_num_days_from_ce_opt(d as i32) {
            let _ = writeln!(s, r#"<text x="{px}" y="{}" text-anchor="{anchor}">{date}</text>"#, h - bottom + 16.0);
        }
    }
    if let Some(t) = test_start {
        let tx = day(&t);
        if tx >= x_lo && tx <= x_hi {
            let px = x.at(tx);
            let _ = writeln!(
                s,
                r#"<line class="test-start" x1="{px:.2}" y1="{top}" x2="{px:.2}" y2="{}" stroke="red" stroke-dasharray="4 3"/>"#,
                h - bottom
            );
        }
    }
    for (i, c) in curves.iter().enumerate() {
        s += &polyline(c.iter().map(|(a, b)| (x.at(*a), y.at(*b))), PALETTE[i % PALETTE.len()], "");
    }
    let lx = w - right + 12.0;
    for (i, (name, _)) in series.iter().enumerate() {
        let ly = top + 16.0 * i as f64;
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(s, r#"<rect x="{lx}" y="{ly}" width="10" height="10" fill="{color}"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 14.0, ly + 9.0, escape(name));
    }
    s + "</svg>\n"
}

/// Diverging color for a correlation: blue at −1, white at 0, red at 1,
/// linear on each side. Values outside `[-1, 1]` are clamped.
pub fn heat_color(v: f64) -> (u8, u8, u8) {
    const NEG: (f64, f64, f64) = (59.0, 76.0, 192.0);
    const MID: (f64, f64, f64) = (247.0, 247.0, 247.0);
    const POS: (f64, f64, f64) = (180.0, 4.0, 38.0);
    let v = if v.is_nan() { 0.0 } else { v.clamp(-1.0, 1.0) };
    let (end, t) = if v < 0.0 { (NEG, -v) } else { (POS, v) };
    let mix = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    (mix(MID.0, end.0), mix(MID.1, end.1), mix(MID.2, end.2))
}

fn hex_color((r, g, b): (u8, u8, u8)) -> String {
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Correlation heatmap with strategy names on both axes and a color bar.
pub fn heatmap(corr: &CorrelationMatrix, names: &[String]) -> String {
    let n = corr.n;
    let cell = 30.0;
    let label = 7.0 * names.iter().map(|s| s.chars().count()).max().unwrap_or(1) as f64 + 10.0;
    let (left, top) = (label, label + 10.0);
    let w = left + cell * n as f64 + 90.0;
    let h = top + cell * n as f64 + 20.0;
    let mut s = open_svg(w, h);
    for i in 0..n {
        for j in 0..n {
            let v = corr.get(i, j);
            let (px, py) = (left + cell * j as f64, top + cell * i as f64);
            let _ = writeln!(
                s,
                r#"<rect x="{px}" y="{py}" width="{cell}" height="{cell}" fill="{}"><title>{:.4}</title></rect>"#,
                hex_color(heat_color(v)),
                v
            );
            if n <= 20 {
                let _ = writeln!(
                    s,
                    r#"<text x="{}" y="{}" text-anchor="middle" font-size="9">{:.2}</text>"#,
                    px + cell / 2.0,
                    py + cell / 2.0 + 3.0,
                    v
                );
            }
        }
    }
    for (i, name) in names.iter().enumerate().take(n) {
        let c = cell * i as f64 + cell / 2.0;
        let _ = writeln!(s, r#"<text class="row-label" x="{}" y="{}" text-anchor="end">{}</text>"#, left - 4.0, top + c + 4.0, escape(name));
        let (cx, cy) = (left + c + 4.0, top - 4.0);
        let _ = writeln!(
            s,
            r#"<text class="col-label" x="{cx}" y="{cy}" transform="rotate(-90 {cx} {cy})">{}</text>"#,
            escape(name)
        );
    }
    let bx = left + cell * n as f64 + 20.0;
    let bh = cell * n as f64;
    for k in 0..20 {
        let v = 1.0 - 2.0 * (k as f64 + 0.5) / 20.0;
        let _ = writeln!(
            s,
            r#"<rect x="{bx}" y="{:.2}" width="14" height="{:.2}" fill="{}"/>"#,
            top + bh * k as f64 / 20.0,
            bh / 20.0 + 0.5,
            hex_color(heat_color(v))
        );
    }
    for (v, py) in [(1, top + 8.0), (0, top + bh / 2.0 + 4.0), (-1, top + bh)] {
        let _ = writeln!(s, r#"<text x="{}" y="{py}">{v}</text>"#, bx + 18.0);
    }
    s + "</svg>\n"
}

/// Sweep curves as CSV: `c,ln_c`, then one column per loss label.
pub fn sweep_table(curves: &[(LossKind, Vec<SweepPoint>)]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["c".to_string(), "ln_c".to_string()];
    header.extend(curves.iter().map(|(k, _)| k.label().to_string()));
    w.write_record(&header).expect("in-memory write");
    let rows = curves.first().map_or(0, |c| c.1.len());
    for i in 0..rows {
        let c = curves[0].1[i].scale;
        let mut rec = vec![num(c), num(c.ln())];
        rec.extend(curves.iter().map(|(_, pts)| num(pts[i].value)));
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

/// Loss value against `ln c`, one panel per loss so each keeps its own y range.
pub fn sweep_plot(curves: &[(LossKind, Vec<SweepPoint>)]) -> String {
    let (pw, ph) = (300.0, 220.0);
    let (left, top, gap) = (70.0, 40.0, 30.0);
    let w = left + (pw + gap + left) * curves.len().max(1) as f64;
    let h = top + ph + 50.0;
    let mut s = open_svg(w, h);
    for (i, (kind, pts)) in curves.iter().enumerate() {
        let x0 = left + (pw + gap + left) * i as f64;
        let (x_lo, x_hi) = bounds(pts.iter().map(|p| p.scale.ln()));
        let (y_lo, y_hi) = bounds(pts.iter().map(|p| p.value));
        let (x_lo, x_hi) = if x_lo.is_finite() { (x_lo, x_hi) } else { (0.0, 1.0) };
        let (y_lo, y_hi) = if y_lo.is_finite() { (y_lo, y_hi) } else { (0.0, 1.0) };
        let x = Scale::new(x_lo, x_hi, x0, x0 + pw);
        let y = Scale::new(y_lo, y_hi, top + ph, top);
        let _ = writeln!(s, r#"<text x="{x0}" y="{}" font-size="13">{}</text>"#, top - 14.0, kind.label());
        y_axis(&mut s, &y, x0, x0 + pw);
        let _ = writeln!(s, r#"<rect x="{x0}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
        for v in [x_lo, x_hi] {
            let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle">{:.2}</text>"#, x.at(v), top + ph + 16.0, v);
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">ln c</text>"#, x0 + pw / 2.0, top + ph + 34.0);
        s += &polyline(pts.iter().map(|p| (x.at(p.scale.ln()), y.at(p.value))), PALETTE[i % PALETTE.len()], "");
    }
    s + "</svg>\n"
}
