//! Static SVG figures. Every figure is written next to a CSV holding the
//! plotted points, so the image is never the only record.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::Result;
use crate::freqresp::{fmt_num, Tf2x2};

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 240.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 16.0;
const MARGIN_T: f64 = 28.0;
const MARGIN_B: f64 = 40.0;
const TITLE_H: f64 = 28.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];
/// Log axes never span more than this many decades below their maximum.
const MAX_DECADES: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Style {
    Line,
    Dashed,
    Marker,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub style: Style,
}

impl Series {
    pub fn line(label: impl Into<String>, x: Vec<f64>, y: Vec<f64>) -> Self {
        Series {
            label: label.into(),
            x,
            y,
            style: Style::Line,
        }
    }

    pub fn dashed(label: impl Into<String>, x: Vec<f64>, y: Vec<f64>) -> Self {
        Series {
            style: Style::Dashed,
            ..Series::line(label, x, y)
        }
    }

    pub fn marker(label: impl Into<String>, x: f64, y: f64) -> Self {
        Series {
            style: Style::Marker,
            ..Series::line(label, vec![x], vec![y])
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_log: bool,
    pub y_log: bool,
    /// Fixed axis limits; autoscaled when `None`.
    pub x_range: Option<(f64, f64)>,
    pub y_range: Option<(f64, f64)>,
    pub series: Vec<Series>,
}

impl Panel {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Panel {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            x_log: false,
            y_log: false,
            x_range: None,
            y_range: None,
            series: Vec::new(),
        }
    }

    pub fn log_x(mut self) -> Self {
        self.x_log = true;
        self
    }

    pub fn log_y(mut self) -> Self {
        self.y_log = true;
        self
    }

    pub fn with(mut self, s: Series) -> Self {
        self.series.push(s);
        self
    }

    /// Horizontal reference line across the x extent of the data.
    pub fn hline(mut self, label: impl Into<String>, y: f64) -> Self {
        let (lo, hi) = self
            .series
            .iter()
            .flat_map(|s| s.x.iter().copied())
            .filter(|x| x.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
        if lo.is_finite() {
            self.series.push(Series::dashed(label, vec![lo, hi], vec![y, y]));
        }
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Figure {
    pub title: String,
    pub columns: usize,
    pub panels: Vec<Panel>,
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool, tight: bool, fixed: Option<(f64, f64)>) -> Axis {
        if let Some((lo, hi)) = fixed {
            let (lo, hi) = if log { (lo.log10(), hi.log10()) } else { (lo, hi) };
            return Axis { lo, hi, log };
        }
        let vals: Vec<f64> = values
            .filter(|v| v.is_finite() && (!log || *v > 0.0))
            .map(|v| if log { v.log10() } else { v })
            .collect();
        let (mut lo, mut hi) = vals
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            (lo, hi) = if log { (-20.0, 0.0) } else { (0.0, 1.0) };
        }
        if log && tight && hi > lo {
            return Axis { lo, hi, log };
        }
        if log {
            lo = lo.max(hi - MAX_DECADES).floor();
            hi = hi.ceil();
            if hi <= lo {
                hi = lo + 1.0;
            }
        } else {
            if hi - lo < 1e-12 * (1.0 + hi.abs()) {
                lo -= 0.5 * (1.0 + lo.abs());
                hi += 0.5 * (1.0 + hi.abs());
            }
            let step = nice_step((hi - lo) / 5.0);
            lo = (lo / step).floor() * step;
            hi = (hi / step).ceil() * step;
        }
        Axis { lo, hi, log }
    }

    /// Position in [0, 1], clamped.
    fn frac(&self, v: f64) -> f64 {
        let v = if self.log {
            if v > 0.0 {
                v.log10()
            } else {
                self.lo
            }
        } else {
            v
        };
        ((v - self.lo) / (self.hi - self.lo)).clamp(-0.02, 1.02)
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let (lo, hi) = (self.lo.ceil() as i32, self.hi.floor() as i32);
            let stride = ((hi - lo) / 6 + 1).max(1);
            (lo..=hi)
                .filter(|e| (e - lo) % stride == 0)
                .map(|e| (10f64.powi(e), format!("1e{e}")))
                .collect()
        } else {
            let step = nice_step((self.hi - self.lo) / 5.0);
            let first = (self.lo / step - 1e-9).ceil() as i64;
            let last = (self.hi / step + 1e-9).floor() as i64;
            (first..=last)
                .map(|k| {
                    let v = k as f64 * step;
                    (v, tick_label(v, step))
                })
                .collect()
        }
    }
}

fn nice_step(raw: f64) -> f64 {
    if !(raw.is_finite() && raw > 0.0) {
        return 1.0;
    }
    let mag = 10f64.powf(raw.log10().floor());
    let r = raw / mag;
    let m = if r <= 1.0 {
        1.0
    } else if r <= 2.0 {
        2.0
    } else if r <= 5.0 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn tick_label(v: f64, step: f64) -> String {
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let v = if v.abs() < step * 1e-9 { 0.0 } else { v };
    format!("{v:.decimals$}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn render_panel(svg: &mut String, p: &Panel, ox: f64, oy: f64, id: usize) {
    let pw = PANEL_W - MARGIN_L - MARGIN_R;
    let ph = PANEL_H - MARGIN_T - MARGIN_B;
    let (x0, y0) = (ox + MARGIN_L, oy + MARGIN_T);
    let xa = Axis::fit(p.series.iter().flat_map(|s| s.x.iter().copied()), p.x_log, true, p.x_range);
    let ya = Axis::fit(p.series.iter().flat_map(|s| s.y.iter().copied()), p.y_log, false, p.y_range);
    let px = |v: f64| x0 + xa.frac(v) * pw;
    let py = |v: f64| y0 + (1.0 - ya.frac(v)) * ph;

    let _ = writeln!(
        svg,
        r#"<clipPath id="c{id}"><rect x="{x0:.1}" y="{y0:.1}" width="{pw:.1}" height="{ph:.1}"/></clipPath>"#
    );
    let _ = writeln!(
        svg,
        r##"<rect x="{x0:.1}" y="{y0:.1}" width="{pw:.1}" height="{ph:.1}" fill="none" stroke="#444"/>"##
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="12">{}</text>"#,
        x0 + pw / 2.0,
        oy + 18.0,
        escape(&p.title)
    );
    for (v, label) in xa.ticks() {
        let x = px(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.1}" y1="{y0:.1}" x2="{x:.1}" y2="{:.1}" stroke="#ddd"/><text x="{x:.1}" y="{:.1}" text-anchor="middle" font-size="10">{label}</text>"##,
            y0 + ph,
            y0 + ph + 14.0
        );
    }
    for (v, label) in ya.ticks() {
        let y = py(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{x0:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end" font-size="10">{label}</text>"##,
            x0 + pw,
            x0 - 4.0,
            y + 3.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11">{}</text>"#,
        x0 + pw / 2.0,
        y0 + ph + 30.0,
        escape(&p.x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11" transform="rotate(-90 {:.1} {:.1})">{}</text>"#,
        ox + 14.0,
        y0 + ph / 2.0,
        ox + 14.0,
        y0 + ph / 2.0,
        escape(&p.y_label)
    );

    let _ = writeln!(svg, r#"<g clip-path="url(#c{id})">"#);
    for (k, s) in p.series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        match s.style {
            Style::Marker => {
                for (&x, &y) in s.x.iter().zip(&s.y) {
                    let _ = writeln!(
                        svg,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="none" stroke="{color}" stroke-width="2"/>"#,
                        px(x),
                        py(y)
                    );
                }
            }
            Style::Line | Style::Dashed => {
                let mut pts = String::new();
                for (&x, &y) in s.x.iter().zip(&s.y) {
                    if x.is_finite() && y.is_finite() {
                        let _ = write!(pts, "{:.2},{:.2} ", px(x), py(y));
                    }
                }
                let dash = if s.style == Style::Dashed { r#" stroke-dasharray="6 4""# } else { "" };
                let _ = writeln!(
                    svg,
                    r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
                    pts.trim_end()
                );
            }
        }
    }
    let _ = writeln!(svg, "</g>");

    for (k, s) in p.series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let y = y0 + 12.0 + 13.0 * k as f64;
        let x = x0 + pw - 110.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{y:.1}" font-size="10">{}</text>"#,
            y - 3.0,
            x + 14.0,
            y - 3.0,
            x + 18.0,
            escape(&s.label)
        );
    }
}

impl Figure {
    pub fn new(title: impl Into<String>, columns: usize) -> Self {
        Figure {
            title: title.into(),
            columns: columns.max(1),
            panels: Vec::new(),
        }
    }

    pub fn with(mut self, p: Panel) -> Self {
        self.panels.push(p);
        self
    }

    pub fn to_svg(&self) -> String {
        let cols = self.columns.min(self.panels.len().max(1));
        let rows = self.panels.len().div_ceil(cols).max(1);
        let w = PANEL_W * cols as f64;
        let h = TITLE_H + PANEL_H * rows as f64;
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}" font-family="sans-serif">"#
        );
        let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
            w / 2.0,
            escape(&self.title)
        );
        for (k, p) in self.panels.iter().enumerate() {
            let ox = PANEL_W * (k % cols) as f64;
            let oy = TITLE_H + PANEL_H * (k / cols) as f64;
            render_panel(&mut svg, p, ox, oy, k);
        }
        svg.push_str("</svg>\n");
        svg
    }

    /// Long-format table of every plotted point: `panel,series,x,y`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "panel,series,x,y")?;
        for p in &self.panels {
            for s in &p.series {
                for (&x, &y) in s.x.iter().zip(&s.y) {
                    writeln!(w, "{},{},{},{}", csv_text(&p.title), csv_text(&s.label), fmt_num(x), fmt_num(y))?;
                }
            }
        }
        Ok(())
    }

    /// Writes `<stem>.svg` and `<stem>.csv` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        let svg = dir.join(format!("{stem}.svg"));
        let csv = dir.join(format!("{stem}.csv"));
        std::fs::write(&svg, self.to_svg())?;
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        std::fs::write(&csv, buf)?;
        Ok(vec![svg, csv])
    }
}

fn csv_text(s: &str) -> String {
    s.replace(',', ";")
}

/// Magnitude and angle panels per matrix element, one series per response.
pub fn bode_figure(title: &str, responses: &[(&str, &Tf2x2)], magnitude_unit: &str) -> Figure {
    let mut fig = Figure::new(title, 2);
    let Some((_, first)) = responses.first() else {
        return fig;
    };
    let ch = first.domain().channels();
    for (r, c) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        let name = format!("{}{}", ch[r], ch[c]);
        let mut mag = Panel::new(format!("|Z_{name}|"), "f (Hz)", format!("magnitude ({magnitude_unit})"))
            .log_x()
            .log_y();
        let mut ang = Panel::new(format!("angle Z_{name}"), "f (Hz)", "angle (deg)").log_x();
        ang.y_range = Some((-180.0, 180.0));
        for (k, (label, tf)) in responses.iter().enumerate() {
            let hz = tf.grid().hz();
            let e = tf.element(r, c);
            let m: Vec<f64> = e.values().iter().map(|z| z.norm()).collect();
            let a: Vec<f64> = e.values().iter().map(|z| z.arg().to_degrees()).collect();
            let series = |x: Vec<f64>, y: Vec<f64>| {
                if k == 0 {
                    Series::line(*label, x, y)
                } else {
                    Series::dashed(*label, x, y)
                }
            };
            mag.series.push(series(hz.clone(), m));
            ang.series.push(series(hz, a));
        }
        fig.panels.push(mag);
        fig.panels.push(ang);
    }
    fig
}

/// Complex-plane plot of locus branches with the critical point marked.
pub fn nyquist_panel(title: &str, branches: &[(&str, &[Complex64])]) -> Panel {
    let mut p = Panel::new(title, "real", "imaginary");
    let extent = branches
        .iter()
        .flat_map(|(_, b)| b.iter())
        .map(|z| z.re.abs().max(z.im.abs()))
        .filter(|v| v.is_finite())
        .fold(1.5_f64, f64::max)
        .min(4.0);
    p.x_range = Some((-extent, extent));
    p.y_range = Some((-extent, extent));
    for (label, b) in branches {
        p.series.push(Series::line(
            *label,
            b.iter().map(|z| z.re).collect(),
            b.iter().map(|z| z.im).collect(),
        ));
    }
    p.series.push(Series::marker("-1", -1.0, 0.0));
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freqresp::{make_grid, Domain, GridKind, Mat2, Role};

    fn demo() -> Figure {
        let x: Vec<f64> = (1..=50).map(|k| k as f64 * 20.0).collect();
        let y: Vec<f64> = x.iter().map(|f| 1.0 / f).collect();
        Figure::new("demo", 1).with(
            Panel::new("p", "f (Hz)", "|e|")
                .log_x()
                .log_y()
                .with(Series::line("a & b", x, y))
                .hline("threshold", 0.01),
        )
    }

    #[test]
    fn svg_is_well_formed_and_escaped() {
        let svg = demo().to_svg();
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a &amp; b"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("stroke-dasharray"));
    }

    #[test]
    fn csv_holds_every_plotted_point() {
        let mut buf = Vec::new();
        demo().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "panel,series,x,y");
        assert_eq!(lines.len(), 1 + 50 + 2);
        assert_eq!(lines[51], "p,threshold,2e1,1e-2");
        assert_eq!(lines[52], "p,threshold,1e3,1e-2");
    }

    #[test]
    fn output_is_deterministic() {
        assert_eq!(demo().to_svg(), demo().to_svg());
    }

    #[test]
    fn log_axis_floors_numerical_zero() {
        let a = Axis::fit([1e-17, 0.5, 2.0].into_iter(), true, false, None);
        assert_eq!(a.hi, 1.0);
        assert_eq!(a.lo, -8.0);
        assert!(a.frac(1e-17) <= 0.0);
    }

    #[test]
    fn linear_ticks_are_round() {
        let a = Axis::fit([0.13, 0.87].into_iter(), false, false, None);
        let labels: Vec<String> = a.ticks().into_iter().map(|t| t.1).collect();
        assert_eq!(labels, ["0.0", "0.2", "0.4", "0.6", "0.8", "1.0"]);
    }

    #[test]
    fn bode_has_eight_panels() {
        let g = make_grid(1.0, 100.0, 5, GridKind::Logarithmic, 50.0).unwrap();
        let z = Tf2x2::constant(&g, Mat2::identity(), Domain::Pn, Role::Impedance).unwrap();
        let fig = bode_figure("z", &[("analytic", &z), ("extracted", &z)], "pu");
        assert_eq!(fig.panels.len(), 8);
        assert_eq!(fig.panels[0].title, "|Z_pp|");
        assert_eq!(fig.panels[2].title, "|Z_pn|");
        assert_eq!(fig.panels[1].series[1].style, Style::Dashed);
    }
}
