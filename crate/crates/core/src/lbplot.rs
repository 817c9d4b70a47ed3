//! Label-bias plots: per class, robust distance to the given class against
//! label bias, with the outlier and likelihood-ratio cutoffs.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::LabeledDataset;
use crate::output::{format_csv, format_sig, write_atomic};
use crate::qda::{classify, label_bias_of, QdaModel};

pub const CSV_HEADER: &str = "row,rd_own,lb,given,predicted,overall_outlier";

/// √(ln 2): label bias above this means the best class is more than twice
/// as likely as the given one.
pub fn lb_cutoff() -> f64 {
    std::f64::consts::LN_2.sqrt()
}

/// Marker colors by predicted class (1 = orange, 2 = blue, 3 = green, 4 = red, ...).
pub const PALETTE: [&str; 10] = [
    "#ff7f0e", "#1f77b4", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

fn color(label: u32) -> &'static str {
    match label {
        0 => "#000000",
        l => PALETTE[(l as usize - 1) % PALETTE.len()],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbPoint {
    pub row_index: usize,
    pub rd_own: f64,
    pub lb: f64,
    pub given: u32,
    /// Argmax class, kept even for overall outliers.
    pub predicted: u32,
    pub overall_outlier: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbPlotSpec {
    pub class_label: u32,
    pub points: Vec<LbPoint>,
    pub rd_cutoff: f64,
    pub lb_cutoff: f64,
}

impl LbPlotSpec {
    /// Points with `rd_own` beyond the outlier cutoff.
    pub fn flagged(&self) -> usize {
        self.points
            .iter()
            .filter(|p| p.rd_own > self.rd_cutoff)
            .count()
    }
}

/// One point per row of `data` labelled `g`.
pub fn lb_points(model: &QdaModel, data: &LabeledDataset, g: u32) -> Result<LbPlotSpec> {
    model.class(g)?;
    let rows = data.indices_of(g);
    if rows.is_empty() {
        return Err(Error::UnknownClass(g));
    }
    let points = rows
        .into_iter()
        .map(|i| {
            let pred = classify(data.data.row(i), model)?;
            Ok(LbPoint {
                row_index: i,
                rd_own: pred.rd_per_class[g as usize - 1],
                lb: label_bias_of(&pred, g)?,
                given: g,
                predicted: pred.argmax(),
                overall_outlier: pred.label == 0,
            })
        })
        .collect::<Result<_>>()?;
    Ok(LbPlotSpec {
        class_label: g,
        points,
        rd_cutoff: model.outlier_cutoff(),
        lb_cutoff: lb_cutoff(),
    })
}

pub fn lb_csv_string(spec: &LbPlotSpec) -> String {
    let mut s = String::with_capacity(32 * (spec.points.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for p in &spec.points {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            p.row_index,
            format_csv(p.rd_own),
            format_csv(p.lb),
            p.given,
            p.predicted,
            p.overall_outlier
        );
    }
    s
}

pub fn write_lb_csv(spec: &LbPlotSpec, path: &Path) -> Result<()> {
    write_atomic(path, lb_csv_string(spec).as_bytes())
}

/// Parses the CSV emitted by [`write_lb_csv`].
pub fn parse_lb_csv(text: &str) -> Result<Vec<LbPoint>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == CSV_HEADER => {}
        other => {
            return Err(Error::InvalidData(format!(
                "expected header '{CSV_HEADER}', found {other:?}"
            )))
        }
    }
    let bad = |line: usize, what: &str| Error::InvalidData(format!("line {line}: bad {what}"));
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            let line = k + 2;
            let f: Vec<&str> = l.trim_end().split(',').collect();
            if f.len() != 6 {
                return Err(Error::InvalidData(format!(
                    "line {line}: expected 6 fields, found {}",
                    f.len()
                )));
            }
            Ok(LbPoint {
                row_index: f[0].parse().map_err(|_| bad(line, "row"))?,
                rd_own: f[1].parse().map_err(|_| bad(line, "rd_own"))?,
                lb: f[2].parse().map_err(|_| bad(line, "lb"))?,
                given: f[3].parse().map_err(|_| bad(line, "given"))?,
                predicted: f[4].parse().map_err(|_| bad(line, "predicted"))?,
                overall_outlier: f[5].parse().map_err(|_| bad(line, "overall_outlier"))?,
            })
        })
        .collect()
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

/// Tick step from {1, 2, 5}·10^k giving about five intervals.
fn tick_step(max: f64) -> f64 {
    let raw = max / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let unit = raw / mag;
    let m = if unit <= 1.0 {
        1.0
    } else if unit <= 2.0 {
        2.0
    } else if unit <= 5.0 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn coord(v: f64) -> String {
    format!("{v:.2}")
}

/// SVG 1.1 document, 800×600 viewBox.
///
/// Overall outliers are hollow circles, other points filled dots; color is the
/// predicted class. Cutoffs are dashed lines, labelled to four decimals and
/// carried at full precision in `data-value` attributes.
pub fn lb_svg_string(spec: &LbPlotSpec) -> String {
    let x_max = spec
        .points
        .iter()
        .map(|p| p.rd_own)
        .fold(spec.rd_cutoff, f64::max)
        * 1.05;
    let y_max = spec
        .points
        .iter()
        .map(|p| p.lb)
        .fold(spec.lb_cutoff, f64::max)
        * 1.05;
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let sx = |v: f64| LEFT + v / x_max * pw;
    let sy = |v: f64| TOP + ph - v / y_max * ph;

    let mut s = String::new();
    let _ = writeln!(s, r##"<?xml version="1.0" encoding="UTF-8"?>"##);
    let _ = writeln!(
        s,
        r##"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="800" height="600" viewBox="0 0 800 600">"##
    );
    let _ = writeln!(
        s,
        r##"<rect x="0" y="0" width="800" height="600" fill="#ffffff"/>"##
    );
    let _ = writeln!(
        s,
        r##"<text x="400" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">Class {}</text>"##,
        spec.class_label
    );

    // axes and ticks
    let (x0, y0, x1, y1) = (sx(0.0), sy(0.0), sx(x_max), sy(y_max));
    let _ = writeln!(
        s,
        r##"<g id="axes" stroke="#000000" stroke-width="1"><line x1="{}" y1="{}" x2="{}" y2="{}"/><line x1="{}" y1="{}" x2="{}" y2="{}"/></g>"##,
        coord(x0),
        coord(y0),
        coord(x1),
        coord(y0),
        coord(x0),
        coord(y0),
        coord(x0),
        coord(y1)
    );
    let _ = writeln!(
        s,
        r##"<g id="ticks" font-family="sans-serif" font-size="11">"##
    );
    let step = tick_step(x_max);
    let mut k = 0;
    while (k as f64) * step <= x_max {
        let v = k as f64 * step;
        let _ = writeln!(
            s,
            r##"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="#000000"/><text x="{0}" y="{3}" text-anchor="middle">{4}</text>"##,
            coord(sx(v)),
            coord(y0),
            coord(y0 + 5.0),
            coord(y0 + 18.0),
            format_sig(v, 6)
        );
        k += 1;
    }
    let step = tick_step(y_max);
    let mut k = 0;
    while (k as f64) * step <= y_max {
        let v = k as f64 * step;
        let _ = writeln!(
            s,
            r##"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="#000000"/><text x="{3}" y="{4}" text-anchor="end">{5}</text>"##,
            coord(x0 - 5.0),
            coord(sy(v)),
            coord(x0),
            coord(x0 - 8.0),
            coord(sy(v) + 4.0),
            format_sig(v, 6)
        );
        k += 1;
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r##"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="14">RD</text>"##,
        coord(LEFT + pw / 2.0),
        coord(HEIGHT - 15.0)
    );
    let _ = writeln!(
        s,
        r##"<text x="20" y="{0}" text-anchor="middle" font-family="sans-serif" font-size="14" transform="rotate(-90 20 {0})">LB</text>"##,
        coord(TOP + ph / 2.0)
    );

    // cutoffs
    let _ = writeln!(
        s,
        r##"<line id="rd-cutoff" data-value="{0}" x1="{1}" y1="{2}" x2="{1}" y2="{3}" stroke="#555555" stroke-dasharray="6,4"/>"##,
        format_csv(spec.rd_cutoff),
        coord(sx(spec.rd_cutoff)),
        coord(y0),
        coord(y1)
    );
    let _ = writeln!(
        s,
        r##"<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="#555555">RD cutoff {:.4}</text>"##,
        coord(sx(spec.rd_cutoff) + 4.0),
        coord(y1 + 12.0),
        spec.rd_cutoff
    );
    let _ = writeln!(
        s,
        r##"<line id="lb-cutoff" data-value="{0}" x1="{1}" y1="{2}" x2="{3}" y2="{2}" stroke="#555555" stroke-dasharray="6,4"/>"##,
        format_csv(spec.lb_cutoff),
        coord(x0),
        coord(sy(spec.lb_cutoff)),
        coord(x1)
    );
    let _ = writeln!(
        s,
        r##"<text x="{}" y="{}" text-anchor="end" font-family="sans-serif" font-size="11" fill="#555555">LB cutoff {:.4}</text>"##,
        coord(x1),
        coord(sy(spec.lb_cutoff) - 4.0),
        spec.lb_cutoff
    );

    let _ = writeln!(s, r##"<g id="points">"##);
    for p in &spec.points {
        let c = color(p.predicted);
        if p.overall_outlier {
            let _ = writeln!(
                s,
                r##"<circle cx="{}" cy="{}" r="4" fill="none" stroke="{c}" stroke-width="1.2"/>"##,
                coord(sx(p.rd_own)),
                coord(sy(p.lb))
            );
        } else {
            let _ = writeln!(
                s,
                r##"<circle cx="{}" cy="{}" r="2" fill="{c}"/>"##,
                coord(sx(p.rd_own)),
                coord(sy(p.lb))
            );
        }
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}

pub fn render_lb_svg(spec: &LbPlotSpec, path: &Path) -> Result<()> {
    write_atomic(path, lb_svg_string(spec).as_bytes())
}
