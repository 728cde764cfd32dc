//! CSV tables and standalone SVG plots. Output is a pure function of the
//! input: no timestamps, no random ids.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// CSV text from a header and rows of already formatted cells.
pub fn csv_table<S: AsRef<str>>(
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<S>>,
) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(header).map_err(io)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::ShapeMismatch {
                expected: header.len(),
                got: row.len(),
            });
        }
        w.write_record(row.iter().map(|c| c.as_ref())).map_err(io)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv cells are utf-8"))
}

/// Shortest text that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    if x == 0.0 || (1e-4..1e15).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series {
            name: name.into(),
            points,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Palette {
    /// one named color per integer value `0..n`
    Categorical(Vec<String>),
    /// white to dark blue over the data range
    Sequential,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Plot {
    Line {
        series: Vec<Series>,
        x_label: String,
        y_label: String,
        log_x: bool,
        log_y: bool,
    },
    /// Spike times per row; `groups` names consecutive row blocks.
    Raster {
        rows: Vec<Vec<f64>>,
        groups: Vec<(String, usize)>,
        t_max: f64,
    },
    /// `values[ix * y.len() + iy]` at grid vertex `(x[ix], y[iy])`.
    Heatmap {
        x: Vec<f64>,
        y: Vec<f64>,
        values: Vec<f64>,
        x_label: String,
        y_label: String,
        log_x: bool,
        palette: Palette,
        marker: Option<(String, f64, f64)>,
    },
    Histogram {
        labels: Vec<String>,
        values: Vec<f64>,
        x_label: String,
        y_label: String,
    },
}

const W: f64 = 720.0;
const H: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];
const CATEGORY_COLORS: [&str; 4] = ["#d9d9d9", "#4c9be8", "#f28e2b", "#59a14f"];

/// Linear or log axis mapping onto a pixel interval.
#[derive(Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
    p0: f64,
    p1: f64,
}

impl Axis {
    fn new(lo: f64, hi: f64, log: bool, p0: f64, p1: f64) -> Self {
        let (mut lo, mut hi) = if log {
            (lo.log10(), hi.log10())
        } else {
            (lo, hi)
        };
        if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            let pad = if lo == 0.0 { 1.0 } else { 0.05 * lo.abs() };
            lo -= pad;
            hi += pad;
        }
        Axis {
            lo,
            hi,
            log,
            p0,
            p1,
        }
    }

    fn map(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        self.p0 + (v - self.lo) / (self.hi - self.lo) * (self.p1 - self.p0)
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let (a, b) = (self.lo.floor() as i32, self.hi.ceil() as i32);
            return (a..=b)
                .map(|e| 10f64.powi(e))
                .filter(|&t| t.log10() >= self.lo - 1e-9 && t.log10() <= self.hi + 1e-9)
                .collect();
        }
        let span = self.hi - self.lo;
        let raw = span / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .into_iter()
            .map(|m| m * mag)
            .find(|s| span / s <= 6.0)
            .unwrap_or(10.0 * mag);
        let first = (self.lo / step).ceil() as i64;
        let last = (self.hi / step).floor() as i64;
        (first..=last).map(|k| k as f64 * step).collect()
    }
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 {
        "0".into()
    } else if !(1e-2..1e4).contains(&a) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

struct Doc(String);

impl Doc {
    fn new(title: &str) -> Self {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            (LEFT + W - RIGHT) / 2.0,
            escape(title)
        );
        Doc(s)
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) {
        let _ = writeln!(
            self.0,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}" stroke-width="{width}"/>"#
        );
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let _ = writeln!(
            self.0,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{fill}"/>"#
        );
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, s: &str) {
        let _ = writeln!(
            self.0,
            r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}">{}</text>"#,
            escape(s)
        );
    }

    fn axes(&mut self, xa: &Axis, ya: &Axis, x_label: &str, y_label: &str) {
        let (x0, x1, y0, y1) = (LEFT, W - RIGHT, H - BOTTOM, TOP);
        self.line(x0, y0, x1, y0, "black", 1.0);
        self.line(x0, y0, x0, y1, "black", 1.0);
        for t in xa.ticks() {
            let px = xa.map(t);
            self.line(px, y0, px, y0 + 5.0, "black", 1.0);
            self.text(px, y0 + 18.0, "middle", &tick_label(t));
        }
        for t in ya.ticks() {
            let py = ya.map(t);
            self.line(x0 - 5.0, py, x0, py, "black", 1.0);
            self.text(x0 - 8.0, py + 4.0, "end", &tick_label(t));
        }
        self.text((x0 + x1) / 2.0, H - 18.0, "middle", x_label);
        let _ = writeln!(
            self.0,
            r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(y_label)
        );
    }

    fn legend(&mut self, entries: &[(String, String)]) {
        let x = W - RIGHT + 15.0;
        for (i, (name, color)) in entries.iter().enumerate() {
            let y = TOP + 10.0 + 20.0 * i as f64;
            self.rect(x, y - 9.0, 12.0, 12.0, color);
            self.text(x + 18.0, y + 1.0, "start", name);
        }
    }

    fn finish(mut self) -> String {
        self.0.push_str("</svg>\n");
        self.0
    }
}

fn range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    values.filter(|v| v.is_finite()).fold(None, |acc, v| {
        Some(acc.map_or((v, v), |(a, b): (f64, f64)| (a.min(v), b.max(v))))
    })
}

fn positive_if(log: bool) -> impl Fn(&f64) -> bool {
    move |v| !log || *v > 0.0
}

fn sequential_color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let c = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        c(255.0, 8.0),
        c(255.0, 48.0),
        c(255.0, 107.0)
    )
}

/// Standalone SVG document with axes, labels and a legend.
pub fn emit_svg(title: &str, plot: &Plot) -> Result<String> {
    let mut doc = Doc::new(title);
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, H - BOTTOM, TOP);
    match plot {
        Plot::Line {
            series,
            x_label,
            y_label,
            log_x,
            log_y,
        } => {
            let pts = || {
                series
                    .iter()
                    .flat_map(|s| s.points.iter())
                    .filter(|(x, y)| positive_if(*log_x)(x) && positive_if(*log_y)(y))
            };
            let (Some((xl, xh)), Some((yl, yh))) =
                (range(pts().map(|p| p.0)), range(pts().map(|p| p.1)))
            else {
                return Err(Error::EmptyData);
            };
            let xa = Axis::new(xl, xh, *log_x, x0, x1);
            let ya = Axis::new(yl, yh, *log_y, y0, y1);
            doc.axes(&xa, &ya, x_label, y_label);
            let mut legend = Vec::new();
            for (i, s) in series.iter().enumerate() {
                let color = COLORS[i % COLORS.len()];
                let kept: Vec<(f64, f64)> = s
                    .points
                    .iter()
                    .copied()
                    .filter(|(x, y)| x.is_finite() && y.is_finite())
                    .filter(|(x, y)| positive_if(*log_x)(x) && positive_if(*log_y)(y))
                    .collect();
                if kept.len() == 1 {
                    let (x, y) = kept[0];
                    let _ = writeln!(
                        doc.0,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{color}"/>"#,
                        xa.map(x),
                        ya.map(y)
                    );
                } else if kept.len() > 1 {
                    let path: Vec<String> = kept
                        .iter()
                        .map(|&(x, y)| format!("{:.2},{:.2}", xa.map(x), ya.map(y)))
                        .collect();
                    let _ = writeln!(
                        doc.0,
                        r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                        path.join(" ")
                    );
                }
                legend.push((s.name.clone(), color.to_string()));
            }
            doc.legend(&legend);
        }
        Plot::Raster {
            rows,
            groups,
            t_max,
        } => {
            if rows.is_empty() || !(*t_max > 0.0) {
                return Err(Error::EmptyData);
            }
            let xa = Axis::new(0.0, *t_max, false, x0, x1);
            let ya = Axis::new(0.0, rows.len() as f64, false, y0, y1);
            doc.axes(&xa, &ya, "time (s)", "neuron");
            let row_h = (y0 - y1) / rows.len() as f64;
            let mut owner = Vec::with_capacity(rows.len());
            for (g, (_, n)) in groups.iter().enumerate() {
                owner.extend(std::iter::repeat_n(g, *n));
            }
            for (r, spikes) in rows.iter().enumerate() {
                let color = COLORS[owner.get(r).copied().unwrap_or(0) % COLORS.len()];
                let top = ya.map((r + 1) as f64);
                for &t in spikes {
                    let px = xa.map(t);
                    doc.line(px, top + 0.1 * row_h, px, top + 0.9 * row_h, color, 1.0);
                }
            }
            let mut start = 0;
            let mut legend = Vec::new();
            for (g, (name, n)) in groups.iter().enumerate() {
                if start > 0 {
                    let py = ya.map(start as f64);
                    doc.line(x0, py, x1, py, "#999999", 0.5);
                }
                start += n;
                legend.push((name.clone(), COLORS[g % COLORS.len()].to_string()));
            }
            doc.legend(&legend);
        }
        Plot::Heatmap {
            x,
            y,
            values,
            x_label,
            y_label,
            log_x,
            palette,
            marker,
        } => {
            if x.is_empty() || y.is_empty() || values.len() != x.len() * y.len() {
                return Err(Error::EmptyData);
            }
            // cell edges halfway between vertices
            let edges = |v: &[f64], log: bool| -> Vec<f64> {
                let f = |a: f64| if log { a.log10() } else { a };
                let g = |a: f64| if log { 10f64.powf(a) } else { a };
                let n = v.len();
                let d = if n > 1 { f(v[1]) - f(v[0]) } else { 1.0 };
                let mut e = vec![g(f(v[0]) - d / 2.0)];
                e.extend(v.windows(2).map(|w| g((f(w[0]) + f(w[1])) / 2.0)));
                e.push(g(f(v[n - 1])
                    + if n > 1 {
                        (f(v[n - 1]) - f(v[n - 2])) / 2.0
                    } else {
                        0.5
                    }));
                e
            };
            let (ex, ey) = (edges(x, *log_x), edges(y, false));
            let xa = Axis::new(ex[0], ex[ex.len() - 1], *log_x, x0, x1);
            let ya = Axis::new(ey[0], ey[ey.len() - 1], false, y0, y1);
            let (vl, vh) = range(values.iter().copied()).ok_or(Error::EmptyData)?;
            for ix in 0..x.len() {
                for iy in 0..y.len() {
                    let v = values[ix * y.len() + iy];
                    let color = match palette {
                        Palette::Categorical(_) => {
                            CATEGORY_COLORS[(v as usize) % CATEGORY_COLORS.len()].to_string()
                        }
                        Palette::Sequential => {
                            sequential_color(if vh > vl { (v - vl) / (vh - vl) } else { 0.0 })
                        }
                    };
                    let (px0, px1) = (xa.map(ex[ix]), xa.map(ex[ix + 1]));
                    let (py0, py1) = (ya.map(ey[iy + 1]), ya.map(ey[iy]));
                    doc.rect(px0, py0, px1 - px0, py1 - py0, &color);
                }
            }
            doc.axes(&xa, &ya, x_label, y_label);
            let mut legend: Vec<(String, String)> = match palette {
                Palette::Categorical(names) => names
                    .iter()
                    .enumerate()
                    .map(|(i, n)| {
                        (
                            n.clone(),
                            CATEGORY_COLORS[i % CATEGORY_COLORS.len()].to_string(),
                        )
                    })
                    .collect(),
                Palette::Sequential => vec![
                    (tick_label(vl), sequential_color(0.0)),
                    (tick_label(vh), sequential_color(1.0)),
                ],
            };
            if let Some((name, mx, my)) = marker {
                let (px, py) = (xa.map(*mx), ya.map(*my));
                let _ = writeln!(
                    doc.0,
                    r#"<circle cx="{px:.2}" cy="{py:.2}" r="6" fill="none" stroke="black" stroke-width="2"/>"#
                );
                legend.push((name.clone(), "black".into()));
            }
            doc.legend(&legend);
        }
        Plot::Histogram {
            labels,
            values,
            x_label,
            y_label,
        } => {
            if values.is_empty() || labels.len() != values.len() {
                return Err(Error::EmptyData);
            }
            let (_, vh) = range(values.iter().copied()).ok_or(Error::EmptyData)?;
            let ya = Axis::new(0.0, vh.max(0.0), false, y0, y1);
            let xa = Axis::new(0.0, values.len() as f64, false, x0, x1);
            let slot = (x1 - x0) / values.len() as f64;
            for (i, &v) in values.iter().enumerate() {
                let top = ya.map(v.max(0.0));
                doc.rect(
                    x0 + slot * (i as f64 + 0.15),
                    top,
                    0.7 * slot,
                    y0 - top,
                    COLORS[0],
                );
                doc.text(
                    x0 + slot * (i as f64 + 0.5),
                    y0 + 18.0,
                    "middle",
                    &labels[i],
                );
            }
            doc.line(x0, y0, x1, y0, "black", 1.0);
            doc.line(x0, y0, x0, y1, "black", 1.0);
            for t in ya.ticks() {
                let py = ya.map(t);
                doc.line(x0 - 5.0, py, x0, py, "black", 1.0);
                doc.text(x0 - 8.0, py + 4.0, "end", &tick_label(t));
            }
            let _ = xa;
            doc.text((x0 + x1) / 2.0, H - 18.0, "middle", x_label);
            let _ = writeln!(
                doc.0,
                r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
                (y0 + y1) / 2.0,
                (y0 + y1) / 2.0,
                escape(y_label)
            );
            doc.legend(&[(y_label.clone(), COLORS[0].to_string())]);
        }
    }
    Ok(doc.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: Vec<(f64, f64)>) -> Plot {
        Plot::Line {
            series: vec![Series::new("s", points)],
            x_label: "x".into(),
            y_label: "y".into(),
            log_x: false,
            log_y: false,
        }
    }

    #[test]
    fn single_point_gives_one_marker() {
        let svg = emit_svg("one", &line(vec![(1.0, 2.0)])).unwrap();
        assert_eq!(svg.matches("<circle").count(), 1);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
    }

    #[test]
    fn empty_inputs_are_rejected() {
        assert!(matches!(
            emit_svg("e", &line(vec![])),
            Err(Error::EmptyData)
        ));
        let raster = Plot::Raster {
            rows: vec![],
            groups: vec![],
            t_max: 1.0,
        };
        assert!(matches!(emit_svg("e", &raster), Err(Error::EmptyData)));
        let hist = Plot::Histogram {
            labels: vec![],
            values: vec![],
            x_label: String::new(),
            y_label: String::new(),
        };
        assert!(matches!(emit_svg("e", &hist), Err(Error::EmptyData)));
    }

    #[test]
    fn heatmap_draws_every_cell_and_the_marker() {
        let plot = Plot::Heatmap {
            x: vec![1.0, 10.0, 100.0],
            y: vec![0.0, 1.0],
            values: vec![0.0, 1.0, 2.0, 0.0, 1.0, 2.0],
            x_label: "r".into(),
            y_label: "v".into(),
            log_x: true,
            palette: Palette::Categorical(vec!["a".into(), "b".into(), "c".into()]),
            marker: Some(("triple".into(), 10.0, 0.5)),
        };
        let svg = emit_svg("h", &plot).unwrap();
        for c in &CATEGORY_COLORS[..3] {
            assert!(svg.contains(c));
        }
        assert_eq!(svg.matches("<circle").count(), 1);
        assert_eq!(emit_svg("h", &plot).unwrap(), svg);
    }

    #[test]
    fn csv_round_trips_numbers() {
        let text = csv_table(&["a", "b"], vec![vec![num(0.1), num(1e-300)]]).unwrap();
        assert_eq!(text, "a,b\n0.1,1e-300\n");
        assert!(csv_table(&["a"], vec![vec!["1", "2"]]).is_err());
        for x in [1.5e-9, 6.649e6, -3.0, 1e15, f64::MIN_POSITIVE] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn ticks_are_round_numbers() {
        let a = Axis::new(0.0, 7.3, false, 0.0, 1.0);
        assert_eq!(a.ticks(), vec![0.0, 2.0, 4.0, 6.0]);
        let l = Axis::new(150.0, 40_000.0, true, 0.0, 1.0);
        assert_eq!(l.ticks(), vec![1000.0, 10_000.0]);
    }
}
