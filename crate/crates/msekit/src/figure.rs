//! Static SVG renderings of the harness CSV tables. Output depends only on
//! the input bytes and options.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FigureError {
    #[error("expected header `{expected}`, found `{found}`")]
    Schema { expected: String, found: String },
    #[error("row {row}: column {column} is not a number: `{value}`")]
    Value { row: usize, column: String, value: String },
    #[error("unknown figure kind {0}; expected sweep-band, trajectory, bias-curve or consistency-dots")]
    Kind(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureKind {
    SweepBand,
    Trajectory,
    BiasCurve,
    ConsistencyDots,
}

impl FigureKind {
    pub const ALL: [FigureKind; 4] =
        [FigureKind::SweepBand, FigureKind::Trajectory, FigureKind::BiasCurve, FigureKind::ConsistencyDots];

    pub fn as_str(self) -> &'static str {
        match self {
            FigureKind::SweepBand => "sweep-band",
            FigureKind::Trajectory => "trajectory",
            FigureKind::BiasCurve => "bias-curve",
            FigureKind::ConsistencyDots => "consistency-dots",
        }
    }

    /// CSV header the kind renders.
    pub fn header(self) -> &'static str {
        match self {
            FigureKind::SweepBand => "kind,value,point,lower,upper",
            FigureKind::Trajectory => "dataset,estimator,seed,m,point,lower,upper,ratio",
            FigureKind::BiasCurve => "L,precision,a,b,gamma,p0,relative_bias",
            FigureKind::ConsistencyDots => "dataset,reference,truth,estimator,point,lower,upper,logbias,covered,outlier",
        }
    }
}

impl fmt::Display for FigureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FigureKind {
    type Err = FigureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FigureKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| FigureError::Kind(s.into()))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FigureOptions {
    pub title: Option<String>,
    /// Horizontal reference line in data units.
    pub truth: Option<f64>,
    /// Vertical reference lines in data units.
    pub markers: Vec<f64>,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 450.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 130.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
    band: Vec<(f64, f64, f64)>,
}

struct Dot {
    x: f64,
    y: f64,
    range: Option<(f64, f64)>,
    colour: usize,
}

struct Plot {
    x_label: String,
    y_label: String,
    log_x: bool,
    series: Vec<Series>,
    dots: Vec<Dot>,
    legend: Vec<(String, usize)>,
    x_names: Vec<String>,
}

struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn parse(text: &str, kind: FigureKind) -> Result<Table, FigureError> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let columns: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        if columns.join(",") != kind.header() {
            return Err(FigureError::Schema { expected: kind.header().into(), found: columns.join(",") });
        }
        let rows = reader
            .records()
            .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<Result<_, _>>()?;
        Ok(Table { columns, rows })
    }

    fn text(&self, row: usize, column: &str) -> &str {
        let c = self.columns.iter().position(|n| n == column).expect("schema column");
        &self.rows[row][c]
    }

    /// Numeric cell; empty cells are gaps.
    fn number(&self, row: usize, column: &str) -> Result<Option<f64>, FigureError> {
        let v = self.text(row, column).trim();
        if v.is_empty() {
            return Ok(None);
        }
        v.parse::<f64>().map(Some).map_err(|_| FigureError::Value {
            row: row + 1,
            column: column.into(),
            value: v.into(),
        })
    }
}

pub fn render_figure(csv_text: &str, kind: FigureKind, options: &FigureOptions) -> Result<String, FigureError> {
    let table = Table::parse(csv_text, kind)?;
    let plot = match kind {
        FigureKind::SweepBand => sweep_band(&table)?,
        FigureKind::Trajectory => trajectory(&table)?,
        FigureKind::BiasCurve => bias_curve(&table)?,
        FigureKind::ConsistencyDots => consistency_dots(&table)?,
    };
    Ok(draw(&plot, kind, options))
}

fn grouped<K: Ord>(table: &Table, key: impl Fn(usize) -> K) -> BTreeMap<K, Vec<usize>> {
    let mut groups: BTreeMap<K, Vec<usize>> = BTreeMap::new();
    for r in 0..table.rows.len() {
        groups.entry(key(r)).or_default().push(r);
    }
    groups
}

fn sweep_band(t: &Table) -> Result<Plot, FigureError> {
    let mut series = Vec::new();
    for (label, rows) in grouped(t, |r| t.text(r, "kind").to_string()) {
        let mut s = Series { label, points: Vec::new(), band: Vec::new() };
        for r in rows {
            let Some(x) = t.number(r, "value")? else { continue };
            if let Some(y) = t.number(r, "point")? {
                s.points.push((x, y));
            }
            if let (Some(lo), Some(hi)) = (t.number(r, "lower")?, t.number(r, "upper")?) {
                s.band.push((x, lo, hi));
            }
        }
        series.push(s);
    }
    let legend = series.iter().enumerate().map(|(i, s)| (s.label.clone(), i)).collect();
    Ok(Plot {
        x_label: "value".into(),
        y_label: "point (band: lower to upper)".into(),
        log_x: false,
        series,
        dots: Vec::new(),
        legend,
        x_names: Vec::new(),
    })
}

fn trajectory(t: &Table) -> Result<Plot, FigureError> {
    let mut series = Vec::new();
    let groups = grouped(t, |r| {
        let seed: u64 = t.text(r, "seed").parse().unwrap_or(u64::MAX);
        (t.text(r, "dataset").to_string(), t.text(r, "estimator").to_string(), seed)
    });
    for ((dataset, estimator, seed), rows) in groups {
        let mut points = Vec::new();
        for r in rows {
            if let (Some(m), Some(ratio)) = (t.number(r, "m")?, t.number(r, "ratio")?) {
                points.push((m, ratio));
            }
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        series.push(Series { label: format!("{dataset} {estimator} {seed}"), points, band: Vec::new() });
    }
    let legend = if series.len() <= 8 {
        series.iter().enumerate().map(|(i, s)| (s.label.clone(), i)).collect()
    } else {
        Vec::new()
    };
    Ok(Plot {
        x_label: "m".into(),
        y_label: "ratio".into(),
        log_x: false,
        series,
        dots: Vec::new(),
        legend,
        x_names: Vec::new(),
    })
}

fn bias_curve(t: &Table) -> Result<Plot, FigureError> {
    let mut series = Vec::new();
    let groups = grouped(t, |r| t.text(r, "L").parse::<u32>().unwrap_or(u32::MAX));
    for (l, rows) in groups {
        let mut points = Vec::new();
        for r in rows {
            if let (Some(s), Some(b)) = (t.number(r, "precision")?, t.number(r, "relative_bias")?) {
                if s > 0.0 {
                    points.push((s, b));
                }
            }
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        series.push(Series { label: format!("L = {l}"), points, band: Vec::new() });
    }
    let legend = series.iter().enumerate().map(|(i, s)| (s.label.clone(), i)).collect();
    Ok(Plot {
        x_label: "precision".into(),
        y_label: "relative_bias".into(),
        log_x: true,
        series,
        dots: Vec::new(),
        legend,
        x_names: Vec::new(),
    })
}

fn consistency_dots(t: &Table) -> Result<Plot, FigureError> {
    let mut x_names: Vec<String> = Vec::new();
    let mut estimators: Vec<String> = Vec::new();
    for r in 0..t.rows.len() {
        let name = format!("{}|{}", t.text(r, "dataset"), t.text(r, "reference"));
        if !x_names.contains(&name) {
            x_names.push(name);
        }
        let e = t.text(r, "estimator").to_string();
        if !estimators.contains(&e) {
            estimators.push(e);
        }
    }
    let width = 0.6 / estimators.len().max(1) as f64;
    let mut dots = Vec::new();
    for r in 0..t.rows.len() {
        let name = format!("{}|{}", t.text(r, "dataset"), t.text(r, "reference"));
        let xi = x_names.iter().position(|n| *n == name).expect("collected") as f64;
        let ei = estimators.iter().position(|e| e == t.text(r, "estimator")).expect("collected");
        let Some(y) = t.number(r, "logbias")? else { continue };
        let range = match (t.number(r, "truth")?, t.number(r, "lower")?, t.number(r, "upper")?) {
            (Some(truth), Some(lo), Some(hi)) if truth > 0.0 && lo > 0.0 && hi > 0.0 => {
                Some(((lo / truth).ln(), (hi / truth).ln()))
            }
            _ => None,
        };
        dots.push(Dot { x: xi - 0.3 + width * (ei as f64 + 0.5), y, range, colour: ei });
    }
    Ok(Plot {
        x_label: "dataset|reference".into(),
        y_label: "logbias".into(),
        log_x: false,
        series: Vec::new(),
        dots,
        legend: estimators.into_iter().enumerate().map(|(i, e)| (e, i)).collect(),
        x_names,
    })
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e6).contains(&a) {
        return format!("{v:.2e}");
    }
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

struct Scale {
    lo: f64,
    hi: f64,
    from: f64,
    to: f64,
    log: bool,
}

impl Scale {
    fn new(mut lo: f64, mut hi: f64, from: f64, to: f64, log: bool) -> Scale {
        if log {
            lo = lo.ln();
            hi = hi.ln();
        }
        if hi - lo <= 0.0 {
            let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
            lo -= pad;
            hi += pad;
        }
        Scale { lo, hi, from, to, log }
    }

    fn map(&self, v: f64) -> f64 {
        let v = if self.log { v.ln() } else { v };
        self.from + (v - self.lo) / (self.hi - self.lo) * (self.to - self.from)
    }

    fn ticks(&self) -> Vec<f64> {
        (0..5)
            .map(|i| {
                let v = self.lo + (self.hi - self.lo) * i as f64 / 4.0;
                if self.log {
                    v.exp()
                } else {
                    v
                }
            })
            .collect()
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    values.filter(|v| v.is_finite()).fold(None, |acc, v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

fn draw(plot: &Plot, kind: FigureKind, options: &FigureOptions) -> String {
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for s in &plot.series {
        xs.extend(s.points.iter().map(|p| p.0));
        ys.extend(s.points.iter().map(|p| p.1));
        xs.extend(s.band.iter().map(|b| b.0));
        ys.extend(s.band.iter().flat_map(|b| [b.1, b.2]));
    }
    for d in &plot.dots {
        xs.push(d.x);
        ys.push(d.y);
        if let Some((lo, hi)) = d.range {
            ys.extend([lo, hi]);
        }
    }
    if !plot.x_names.is_empty() {
        xs.extend([-0.5, plot.x_names.len() as f64 - 0.5]);
    }
    let has_data = !xs.is_empty();
    if let Some(t) = options.truth {
        ys.push(t);
    }
    xs.extend(options.markers.iter().copied());
    let xs = xs.into_iter().filter(|&v| !plot.log_x || v > 0.0);
    let (x_lo, x_hi) = bounds(xs).unwrap_or((0.0, 1.0));
    let (y_lo, y_hi) = bounds(ys.into_iter()).unwrap_or((0.0, 1.0));
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
    let sx = Scale::new(x_lo, x_hi, x0, x1, plot.log_x);
    let sy = Scale::new(y_lo, y_hi, y0, y1, false);

    let mut svg = String::new();
    let w = &mut svg;
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(w, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let title = options.title.clone().unwrap_or_else(|| kind.as_str().to_string());
    let _ = writeln!(w, r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#, (x0 + x1) / 2.0, escape(&title));
    let _ = writeln!(w, r#"<g stroke="black" fill="none"><line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}"/><line x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{y1:.2}"/></g>"#);

    if plot.x_names.is_empty() {
        for v in sx.ticks() {
            let x = sx.map(v);
            let _ = writeln!(w, r#"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, y0 + 4.0);
            let _ = writeln!(w, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, y0 + 16.0, tick_label(v));
        }
    } else {
        for (i, name) in plot.x_names.iter().enumerate() {
            let x = sx.map(i as f64);
            let _ = writeln!(
                w,
                r#"<text x="{x:.2}" y="{:.2}" text-anchor="end" transform="rotate(-30 {x:.2} {:.2})">{}</text>"#,
                y0 + 14.0,
                y0 + 14.0,
                escape(name)
            );
        }
    }
    for v in sy.ticks() {
        let y = sy.map(v);
        let _ = writeln!(w, r#"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="black"/>"#, x0 - 4.0);
        let _ = writeln!(w, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 6.0, y + 4.0, tick_label(v));
    }
    let _ = writeln!(w, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, HEIGHT - 12.0, escape(&plot.x_label));
    let _ = writeln!(
        w,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(&plot.y_label)
    );

    if !has_data {
        let _ = writeln!(w, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" fill="gray">no data</text>"#, (x0 + x1) / 2.0, (y0 + y1) / 2.0);
    }

    for (i, s) in plot.series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        if s.band.len() >= 2 {
            let upper = s.band.iter().map(|b| format!("{:.2},{:.2}", sx.map(b.0), sy.map(b.2)));
            let lower = s.band.iter().rev().map(|b| format!("{:.2},{:.2}", sx.map(b.0), sy.map(b.1)));
            let pts: Vec<String> = upper.chain(lower).collect();
            let _ = writeln!(w, r#"<polygon points="{}" fill="{colour}" fill-opacity="0.2" stroke="none"/>"#, pts.join(" "));
        }
        if !s.points.is_empty() {
            let pts: Vec<String> = s.points.iter().map(|p| format!("{:.2},{:.2}", sx.map(p.0), sy.map(p.1))).collect();
            let width = if plot.series.len() > 8 { 0.8 } else { 1.5 };
            let _ = writeln!(w, r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="{width}"/>"#, pts.join(" "));
        }
    }
    for d in &plot.dots {
        let colour = PALETTE[d.colour % PALETTE.len()];
        let x = sx.map(d.x);
        if let Some((lo, hi)) = d.range {
            let _ = writeln!(w, r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{colour}"/>"#, sy.map(lo), sy.map(hi));
        }
        let _ = writeln!(w, r#"<circle cx="{x:.2}" cy="{:.2}" r="3" fill="{colour}"/>"#, sy.map(d.y));
    }
    let truth = options.truth.or((kind == FigureKind::ConsistencyDots).then_some(0.0));
    if let Some(t) = truth {
        let y = sy.map(t);
        let _ = writeln!(w, r#"<line x1="{x0:.2}" y1="{y:.2}" x2="{x1:.2}" y2="{y:.2}" stroke="black" stroke-dasharray="4 3"/>"#);
    }
    for &m in &options.markers {
        if plot.log_x && m <= 0.0 {
            continue;
        }
        let x = sx.map(m);
        let _ = writeln!(w, r#"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{y1:.2}" stroke="gray" stroke-width="0.5"/>"#);
    }
    for (row, (label, colour)) in plot.legend.iter().enumerate() {
        let y = y1 + 10.0 + 16.0 * row as f64;
        let colour = PALETTE[colour % PALETTE.len()];
        let _ = writeln!(w, r#"<rect x="{:.2}" y="{:.2}" width="10" height="10" fill="{colour}"/>"#, x1 + 10.0, y - 8.0);
        let _ = writeln!(w, r#"<text x="{:.2}" y="{y:.2}">{}</text>"#, x1 + 24.0, escape(label));
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    const SWEEP: &str = "kind,value,point,lower,upper\nsparsemse-threshold,0.01,12000,9000,30000\nsparsemse-threshold,0.02,11300,9500,15000\nsparsemse-threshold,0.05,,,\n";

    #[test]
    fn empty_tables_render_a_no_data_note() {
        for kind in FigureKind::ALL {
            let svg = render_figure(&format!("{}\n", kind.header()), kind, &FigureOptions::default()).unwrap();
            assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
            assert!(svg.contains("no data"), "{kind}");
        }
    }

    #[test]
    fn rendering_is_deterministic() {
        let opts = FigureOptions { title: Some("UK".into()), truth: Some(11_000.0), markers: vec![0.02] };
        let a = render_figure(SWEEP, FigureKind::SweepBand, &opts).unwrap();
        assert_eq!(a, render_figure(SWEEP, FigureKind::SweepBand, &opts).unwrap());
        assert!(a.contains("<polygon") && a.contains("<polyline") && !a.contains("no data"));
        assert!(a.contains(">value<"));
    }

    #[test]
    fn schema_mismatch_is_an_error() {
        let err = render_figure(SWEEP, FigureKind::Trajectory, &FigureOptions::default()).unwrap_err();
        assert!(matches!(err, FigureError::Schema { .. }));
        let bad = "kind,value,point,lower,upper\nx,abc,1,1,1\n";
        assert!(matches!(
            render_figure(bad, FigureKind::SweepBand, &FigureOptions::default()),
            Err(FigureError::Value { row: 1, .. })
        ));
    }

    #[test]
    fn trajectory_draws_one_line_per_seed() {
        let mut csv = format!("{}\n", FigureKind::Trajectory.header());
        for seed in 0..50 {
            for m in [50, 100, 150] {
                writeln!(csv, "uk,independence,{seed},{m},{},1,2,{}", m * 3, 3.0 + seed as f64 * 0.01).unwrap();
            }
        }
        let opts = FigureOptions { truth: Some(4.0), markers: vec![100.0], ..FigureOptions::default() };
        let svg = render_figure(&csv, FigureKind::Trajectory, &opts).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 50);
        assert_eq!(svg.matches("stroke-dasharray").count(), 1);
    }

    #[test]
    fn consistency_dots_and_bias_curve_render() {
        let csv = "dataset,reference,truth,estimator,point,lower,upper,logbias,covered,outlier\nuk,LA,94,dga,80,50,150,-0.16,true,false\nuk,LA,94,lcmcr,,,,,false,true\n";
        let svg = render_figure(csv, FigureKind::ConsistencyDots, &FigureOptions::default()).unwrap();
        assert_eq!(svg.matches("<circle").count(), 1);
        assert!(svg.contains("uk|LA"));
        let curve = crate::bias::bias_curve(0.75, &[2, 3], &[0.5, 5.0, 50.0]).unwrap().to_csv();
        let svg = render_figure(&curve, FigureKind::BiasCurve, &FigureOptions::default()).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("L = 3"));
    }

    #[test]
    fn kinds_parse() {
        for k in FigureKind::ALL {
            assert_eq!(k.as_str().parse::<FigureKind>().unwrap(), k);
        }
        assert!("pie".parse::<FigureKind>().is_err());
    }
}
