//! Report artifacts: the JSON adequacy report, instance-space and histogram
//! CSVs, and the SVG scatter plot.
//!
//! JSON numbers carry 9 significant digits and CSV numbers 6 decimals, so
//! the files are byte-identical across runs and platforms.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{json, Value};

use crate::corpus::OutcomeLabel;
use crate::diversity::DiversityScore;
use crate::geometry::{InstanceSpace, Point, Polygon, SpaceMetrics};
use crate::projection::Projection;

/// Rounds to 9 significant digits; non-finite values become `null`.
pub fn sig9(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    if x == 0.0 {
        return json!(0.0);
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    json!(rounded)
}

fn sig9_vec(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| sig9(x)).collect())
}

/// Outcome-split histogram of one feature over the pooled min–max range.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureHistogram {
    pub feature: String,
    pub min: f64,
    pub max: f64,
    pub effective: Vec<usize>,
    pub ineffective: Vec<usize>,
}

impl FeatureHistogram {
    pub fn bins(&self) -> usize {
        self.effective.len()
    }

    pub fn edges(&self, bin: usize) -> (f64, f64) {
        let w = (self.max - self.min) / self.bins() as f64;
        (self.min + w * bin as f64, self.min + w * (bin + 1) as f64)
    }
}

pub const DEFAULT_BINS: usize = 20;

/// Histograms of `values` (one column per feature) split by outcome. Tests
/// with unknown outcome are left out. Bins are half-open except the last.
pub fn feature_histograms(
    names: &[String],
    columns: &[Vec<f64>],
    outcomes: &[OutcomeLabel],
    bins: usize,
) -> Vec<FeatureHistogram> {
    let bins = bins.max(1);
    names
        .iter()
        .zip(columns)
        .map(|(name, col)| {
            let min = col.iter().copied().fold(f64::INFINITY, f64::min);
            let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            // constant columns are dropped during standardization
            debug_assert!(max > min, "constant feature `{name}` reached histogramming");
            let width = (max - min) / bins as f64;
            let mut effective = vec![0; bins];
            let mut ineffective = vec![0; bins];
            for (&v, &o) in col.iter().zip(outcomes) {
                let b = if width > 0.0 {
                    (((v - min) / width).floor() as usize).min(bins - 1)
                } else {
                    0
                };
                match o {
                    OutcomeLabel::Effective => effective[b] += 1,
                    OutcomeLabel::Ineffective => ineffective[b] += 1,
                    OutcomeLabel::Unknown => {}
                }
            }
            FeatureHistogram {
                feature: name.clone(),
                min,
                max,
                effective,
                ineffective,
            }
        })
        .collect()
}

/// Everything one adequacy analysis produces.
#[derive(Debug, Clone)]
pub struct TisaReport {
    pub metrics: SpaceMetrics,
    pub diversity: DiversityScore,
    pub selected_features: Vec<String>,
    pub projection: Projection,
    pub per_feature_distributions: Vec<FeatureHistogram>,
    pub warnings: Vec<String>,
}

impl TisaReport {
    pub fn instance_space_area(&self) -> f64 {
        self.metrics.instance_space_area
    }

    pub fn buggy_region_area(&self) -> f64 {
        self.metrics.buggy_region_area
    }

    pub fn boundary_area(&self) -> f64 {
        self.metrics.boundary_area
    }

    pub fn coverage(&self) -> f64 {
        self.metrics.coverage
    }

    pub fn to_json(&self) -> Value {
        let p = &self.projection;
        let a_rows: Vec<Value> = (0..2)
            .map(|i| sig9_vec(&p.a_matrix.row(i).iter().copied().collect::<Vec<_>>()))
            .collect();
        let b_rows: Vec<Value> = (0..p.b_matrix.nrows())
            .map(|j| sig9_vec(&[p.b_matrix[(j, 0)], p.b_matrix[(j, 1)]]))
            .collect();
        json!({
            "instance_space_area": sig9(self.metrics.instance_space_area),
            "buggy_region_area": sig9(self.metrics.buggy_region_area),
            "boundary_area": sig9(self.metrics.boundary_area),
            "coverage": sig9(self.metrics.coverage),
            "grid": {
                "G": self.metrics.grid_cells_per_axis,
                "total": self.metrics.grid_cells_total,
                "occupied": self.metrics.grid_cells_occupied,
            },
            "diversity": {
                "shannon_h": sig9(self.diversity.shannon_h),
                "richness": self.diversity.richness_s,
                "evenness": sig9(self.diversity.evenness_j),
                "geometric_logdet": sig9(self.diversity.geometric_logdet.value()),
            },
            "selected_features": self.selected_features,
            "projection": {
                "A": a_rows,
                "B": b_rows,
                "c": sig9_vec(&p.c_vector),
                "objective": sig9(p.objective()),
                "trend_r2_outcome": sig9(p.trend_r2_outcome),
                "topo_spearman": sig9(p.topo_spearman),
            },
            "warnings": self.warnings,
        })
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("report serializes");
        s.push('\n');
        s
    }
}

/// `id,x,y,outcome` with 6-decimal coordinates.
pub fn instance_space_csv(space: &InstanceSpace) -> String {
    let mut out = String::from("id,x,y,outcome\n");
    for ((id, p), o) in space.ids.iter().zip(&space.points).zip(&space.outcomes) {
        writeln!(out, "{},{:.6},{:.6},{}", csv_field(id), p.x, p.y, o.token()).unwrap();
    }
    out
}

/// `feature,bin,lower,upper,effective,ineffective`.
pub fn histograms_csv(hists: &[FeatureHistogram]) -> String {
    let mut out = String::from("feature,bin,lower,upper,effective,ineffective\n");
    for h in hists {
        for b in 0..h.bins() {
            let (lo, hi) = h.edges(b);
            writeln!(
                out,
                "{},{},{:.6},{:.6},{},{}",
                csv_field(&h.feature),
                b,
                lo,
                hi,
                h.effective[b],
                h.ineffective[b]
            )
            .unwrap();
        }
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub const CANVAS_WIDTH: f64 = 800.0;
pub const CANVAS_HEIGHT: f64 = 600.0;
pub const EFFECTIVE_FILL: &str = "#d62728";
pub const INEFFECTIVE_FILL: &str = "#1f77b4";
pub const UNKNOWN_FILL: &str = "#7f7f7f";
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 20.0;
const MARGIN_BOTTOM: f64 = 50.0;
const TICK_DIVISIONS: usize = 5;

struct Frame {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

impl Frame {
    fn around(points: impl Iterator<Item = Point>) -> Frame {
        let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x);
            y1 = y1.max(p.y);
        }
        if !x0.is_finite() {
            (x0, y0, x1, y1) = (0.0, 0.0, 1.0, 1.0);
        }
        let pad = |lo: f64, hi: f64| {
            let span = if hi > lo { hi - lo } else { 1.0 };
            (lo - 0.05 * span, hi + 0.05 * span)
        };
        let (x0, x1) = pad(x0, x1);
        let (y0, y1) = pad(y0, y1);
        Frame { x0, y0, x1, y1 }
    }

    fn sx(&self, x: f64) -> f64 {
        MARGIN_LEFT + (x - self.x0) / (self.x1 - self.x0) * (CANVAS_WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn sy(&self, y: f64) -> f64 {
        CANVAS_HEIGHT - MARGIN_BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (CANVAS_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn polygon_path(frame: &Frame, poly: &Polygon) -> String {
    let mut d = String::new();
    for (i, v) in poly.vertices().iter().enumerate() {
        let cmd = if i == 0 { 'M' } else { 'L' };
        write!(d, "{cmd}{:.2},{:.2} ", frame.sx(v.x), frame.sy(v.y)).unwrap();
    }
    d.push('Z');
    d
}

/// Scatter plot of the instance space: one circle per instance (row
/// order), then the boundary and, when non-degenerate, the buggy region.
pub fn render_svg(space: &InstanceSpace, boundary: &Polygon, buggy: &Polygon) -> String {
    let frame = Frame::around(space.points.iter().chain(boundary.vertices()).copied());
    let mut s = String::new();
    writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{CANVAS_WIDTH}" height="{CANVAS_HEIGHT}" viewBox="0 0 {CANVAS_WIDTH} {CANVAS_HEIGHT}">"#
    )
    .unwrap();
    writeln!(s, r##"<rect x="0" y="0" width="{CANVAS_WIDTH}" height="{CANVAS_HEIGHT}" fill="#ffffff"/>"##).unwrap();

    let (left, right) = (MARGIN_LEFT, CANVAS_WIDTH - MARGIN_RIGHT);
    let (top, bottom) = (MARGIN_TOP, CANVAS_HEIGHT - MARGIN_BOTTOM);
    writeln!(s, r##"<g id="axes" stroke="#000000" stroke-width="1" font-family="sans-serif" font-size="11">"##).unwrap();
    writeln!(s, r#"<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}"/>"#).unwrap();
    writeln!(s, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}"/>"#).unwrap();
    for k in 0..=TICK_DIVISIONS {
        let t = k as f64 / TICK_DIVISIONS as f64;
        let xv = frame.x0 + t * (frame.x1 - frame.x0);
        let yv = frame.y0 + t * (frame.y1 - frame.y0);
        let (px, py) = (frame.sx(xv), frame.sy(yv));
        writeln!(s, r#"<line x1="{px:.2}" y1="{bottom}" x2="{px:.2}" y2="{:.2}"/>"#, bottom + 5.0).unwrap();
        writeln!(
            s,
            r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle" stroke="none">{xv:.2}</text>"#,
            bottom + 18.0
        )
        .unwrap();
        writeln!(s, r#"<line x1="{:.2}" y1="{py:.2}" x2="{left}" y2="{py:.2}"/>"#, left - 5.0).unwrap();
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" stroke="none">{yv:.2}</text>"#,
            left - 8.0,
            py + 4.0
        )
        .unwrap();
    }
    writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" stroke="none">z1</text>"#, (left + right) / 2.0, CANVAS_HEIGHT - 10.0).unwrap();
    writeln!(s, r#"<text x="15" y="{:.2}" text-anchor="middle" stroke="none">z2</text>"#, (top + bottom) / 2.0).unwrap();
    writeln!(s, "</g>").unwrap();

    writeln!(s, r#"<g id="instances" stroke="none">"#).unwrap();
    for (p, o) in space.points.iter().zip(&space.outcomes) {
        let fill = match o {
            OutcomeLabel::Effective => EFFECTIVE_FILL,
            OutcomeLabel::Ineffective => INEFFECTIVE_FILL,
            OutcomeLabel::Unknown => UNKNOWN_FILL,
        };
        writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{fill}"/>"#, frame.sx(p.x), frame.sy(p.y)).unwrap();
    }
    writeln!(s, "</g>").unwrap();
    if !boundary.vertices().is_empty() {
        writeln!(
            s,
            r##"<path id="boundary" d="{}" fill="none" stroke="#333333" stroke-width="1.5"/>"##,
            polygon_path(&frame, boundary)
        )
        .unwrap();
    }
    if !buggy.is_degenerate() {
        writeln!(
            s,
            r#"<path id="buggy-region" d="{}" fill="{EFFECTIVE_FILL}" fill-opacity="0.15" stroke="{EFFECTIVE_FILL}" stroke-width="1.5"/>"#,
            polygon_path(&frame, buggy)
        )
        .unwrap();
    }
    writeln!(s, "</svg>").unwrap();
    s
}
