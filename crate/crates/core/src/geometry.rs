//! Planar geometry of the instance space: convex hulls, shoelace areas, the
//! projected feature-box boundary, the buggy region and grid coverage.

use nalgebra::DMatrix;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::corpus::OutcomeLabel;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("no points given")]
    EmptyInput,
    #[error("boundary polygon has zero area")]
    DegenerateBoundary,
    #[error("grid needs at least one cell per axis")]
    EmptyGrid,
    #[error("polygon vertices are not a convex counter-clockwise chain")]
    NotConvex,
    #[error("{0} feature ranges for a projection of {1} features")]
    RangeMismatch(usize, usize),
}

pub type Result<T, E = GeometryError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

/// Twice the signed area of triangle `(o, a, b)`; positive for a left turn.
pub fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// A convex polygon with counter-clockwise vertices. Fewer than three
/// vertices make a degenerate polygon (a point or a segment) of area 0.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl Polygon {
    /// Validates convexity and counter-clockwise orientation after removing
    /// consecutive duplicate vertices.
    pub fn new(mut vertices: Vec<Point>) -> Result<Self> {
        vertices.dedup();
        while vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        let n = vertices.len();
        if n >= 3 {
            for i in 0..n {
                let (a, b, c) = (vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]);
                if cross(a, b, c) <= 0.0 {
                    return Err(GeometryError::NotConvex);
                }
            }
        }
        Ok(Polygon { vertices })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn is_degenerate(&self) -> bool {
        self.vertices.len() < 3
    }

    pub fn area(&self) -> f64 {
        polygon_area(self)
    }

    /// `(min_x, min_y, max_x, max_y)`, or `None` for an empty polygon.
    pub fn bounding_box(&self) -> Option<(f64, f64, f64, f64)> {
        let first = self.vertices.first()?;
        Some(self.vertices.iter().fold(
            (first.x, first.y, first.x, first.y),
            |(x0, y0, x1, y1), p| (x0.min(p.x), y0.min(p.y), x1.max(p.x), y1.max(p.y)),
        ))
    }

    /// Point containment, boundary inclusive, with `tol` slack measured as
    /// distance outside the polygon.
    pub fn contains(&self, p: Point, tol: f64) -> bool {
        match self.vertices.as_slice() {
            [] => false,
            [a] => dist(*a, p) <= tol,
            [a, b] => segment_distance(*a, *b, p) <= tol,
            vs => {
                let n = vs.len();
                (0..n).all(|i| {
                    let (a, b) = (vs[i], vs[(i + 1) % n]);
                    let len = dist(a, b);
                    cross(a, b, p) >= -tol * len
                })
            }
        }
    }
}

fn dist(a: Point, b: Point) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

fn segment_distance(a: Point, b: Point, p: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return dist(a, p);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    dist(Point::new(a.x + t * dx, a.y + t * dy), p)
}

/// Andrew's monotone chain. Collinear boundary points are dropped.
pub fn convex_hull(points: &[Point]) -> Result<Polygon> {
    if points.is_empty() {
        return Err(GeometryError::EmptyInput);
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return Ok(Polygon { vertices: pts });
    }
    let mut lower: Vec<Point> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    Ok(Polygon { vertices: lower })
}

/// Shoelace area.
pub fn polygon_area(poly: &Polygon) -> f64 {
    let vs = &poly.vertices;
    if vs.len() < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for i in 0..vs.len() {
        let (a, b) = (vs[i], vs[(i + 1) % vs.len()]);
        twice += a.x * b.y - b.x * a.y;
    }
    (twice / 2.0).abs()
}

/// Above this dimension the box corners are sampled instead of enumerated.
pub const MAX_ENUMERATED_DIMS: usize = 16;
pub const SAMPLED_CORNERS: usize = 1 << 16;

/// Convex hull of the images of the feature bounding-box corners under the
/// `2 × d` map `a`.
pub fn estimate_boundary(a: &DMatrix<f64>, ranges: &[(f64, f64)], seed: u64) -> Result<Polygon> {
    let d = a.ncols();
    if ranges.len() != d {
        return Err(GeometryError::RangeMismatch(ranges.len(), d));
    }
    let image = |pick: &dyn Fn(usize) -> bool| {
        let (mut x, mut y) = (0.0, 0.0);
        for (j, &(lo, hi)) in ranges.iter().enumerate() {
            let v = if pick(j) { hi } else { lo };
            x += a[(0, j)] * v;
            y += a[(1, j)] * v;
        }
        Point::new(x, y)
    };
    let corners: Vec<Point> = if d <= MAX_ENUMERATED_DIMS {
        (0u64..1 << d).map(|mask| image(&|j| mask >> j & 1 == 1)).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..SAMPLED_CORNERS)
            .map(|_| {
                let bits: Vec<bool> = (0..d).map(|_| rng.random::<bool>()).collect();
                image(&|j| bits[j])
            })
            .collect()
    };
    convex_hull(&corners)
}

/// Test instances placed in the plane.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSpace {
    pub ids: Vec<String>,
    pub points: Vec<Point>,
    pub outcomes: Vec<OutcomeLabel>,
}

impl InstanceSpace {
    pub fn effective_points(&self) -> Vec<Point> {
        self.points
            .iter()
            .zip(&self.outcomes)
            .filter(|(_, o)| o.is_effective())
            .map(|(p, _)| *p)
            .collect()
    }
}

pub const DEFAULT_PRUNE_NEIGHBOURS: usize = 5;

/// Hull of the Effective instances. With `prune`, instances whose distance
/// to their `k`-th nearest Effective neighbour exceeds the mean plus two
/// population standard deviations of that statistic are removed first.
/// No Effective instances gives an empty polygon.
pub fn buggy_region(space: &InstanceSpace, prune: bool, k: usize) -> Polygon {
    let pts = space.effective_points();
    if pts.is_empty() {
        return Polygon::default();
    }
    let kept = if prune { prune_outliers(&pts, k) } else { pts };
    convex_hull(&kept).unwrap_or_default()
}

/// Distance of every point to its `k`-th nearest other point (k clamped to
/// the number of other points).
pub fn kth_neighbour_distances(pts: &[Point], k: usize) -> Vec<f64> {
    let k = k.min(pts.len().saturating_sub(1));
    if k == 0 {
        return vec![0.0; pts.len()];
    }
    pts.iter()
        .enumerate()
        .map(|(i, &p)| {
            let mut ds: Vec<f64> = pts
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &q)| dist(p, q))
                .collect();
            ds.sort_by(f64::total_cmp);
            ds[k - 1]
        })
        .collect()
}

fn prune_outliers(pts: &[Point], k: usize) -> Vec<Point> {
    if pts.len() < 3 {
        return pts.to_vec();
    }
    let stat = kth_neighbour_distances(pts, k);
    let mean = crate::linalg::mean(&stat);
    let cutoff = mean + 2.0 * crate::linalg::pop_std(&stat);
    pts.iter()
        .zip(&stat)
        .filter(|(_, &s)| s <= cutoff)
        .map(|(p, _)| *p)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CellState {
    /// Cell centre lies outside the boundary; not counted.
    Outside,
    Empty,
    Occupied,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageGrid {
    pub cells_per_axis: usize,
    pub coverage: f64,
    pub total: usize,
    pub occupied: usize,
    /// Row-major by y then x: `cells[iy * G + ix]`.
    pub cells: Vec<CellState>,
    /// `(min_x, min_y, max_x, max_y)` of the grid.
    pub extent: (f64, f64, f64, f64),
}

pub const DEFAULT_GRID: usize = 20;

/// Fraction of in-boundary grid cells holding at least one instance.
///
/// The `G × G` grid spans the boundary's bounding box. A cell is in the
/// boundary when its centre is (boundary inclusive). Cells are half-open
/// `[x₀, x₁) × [y₀, y₁)` except the last row and column, which are closed.
/// Instances in cells outside the boundary are not counted.
pub fn coverage_grid(points: &[Point], boundary: &Polygon, cells_per_axis: usize) -> Result<CoverageGrid> {
    if cells_per_axis == 0 {
        return Err(GeometryError::EmptyGrid);
    }
    if boundary.is_degenerate() || boundary.area() <= 0.0 {
        return Err(GeometryError::DegenerateBoundary);
    }
    let g = cells_per_axis;
    let (x0, y0, x1, y1) = boundary.bounding_box().ok_or(GeometryError::DegenerateBoundary)?;
    let (w, h) = ((x1 - x0) / g as f64, (y1 - y0) / g as f64);
    let tol = 1e-12 * (x1 - x0).max(y1 - y0);
    let mut cells = vec![CellState::Outside; g * g];
    for iy in 0..g {
        for ix in 0..g {
            let centre = Point::new(x0 + (ix as f64 + 0.5) * w, y0 + (iy as f64 + 0.5) * h);
            if boundary.contains(centre, tol) {
                cells[iy * g + ix] = CellState::Empty;
            }
        }
    }
    let index = |v: f64, lo: f64, hi: f64, step: f64| -> Option<usize> {
        if v < lo || v > hi {
            return None;
        }
        let i = ((v - lo) / step).floor() as usize;
        Some(i.min(g - 1))
    };
    for p in points {
        if let (Some(ix), Some(iy)) = (index(p.x, x0, x1, w), index(p.y, y0, y1, h)) {
            let cell = &mut cells[iy * g + ix];
            if *cell == CellState::Empty {
                *cell = CellState::Occupied;
            }
        }
    }
    let total = cells.iter().filter(|c| **c != CellState::Outside).count();
    let occupied = cells.iter().filter(|c| **c == CellState::Occupied).count();
    let coverage = if total > 0 { occupied as f64 / total as f64 } else { 0.0 };
    Ok(CoverageGrid {
        cells_per_axis: g,
        coverage,
        total,
        occupied,
        cells,
        extent: (x0, y0, x1, y1),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryConfig {
    pub cells_per_axis: usize,
    pub prune_outliers: bool,
    pub prune_neighbours: usize,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            cells_per_axis: DEFAULT_GRID,
            prune_outliers: false,
            prune_neighbours: DEFAULT_PRUNE_NEIGHBOURS,
        }
    }
}

/// The three adequacy measures of an instance space against its boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceMetrics {
    pub instance_space_area: f64,
    pub buggy_region_area: f64,
    pub boundary_area: f64,
    pub coverage: f64,
    pub grid_cells_per_axis: usize,
    pub grid_cells_total: usize,
    pub grid_cells_occupied: usize,
    pub instance_hull: Polygon,
    pub buggy_hull: Polygon,
    pub grid: CoverageGrid,
    pub warnings: Vec<String>,
}

pub const WARN_NO_EFFECTIVE: &str = "no effective (failing) tests: buggy region is empty";

pub fn space_metrics(space: &InstanceSpace, boundary: &Polygon, config: GeometryConfig) -> Result<SpaceMetrics> {
    let instance_hull = convex_hull(&space.points)?;
    let buggy_hull = buggy_region(space, config.prune_outliers, config.prune_neighbours);
    let grid = coverage_grid(&space.points, boundary, config.cells_per_axis)?;
    let mut warnings = Vec::new();
    if !space.outcomes.iter().any(|o| o.is_effective()) {
        warnings.push(WARN_NO_EFFECTIVE.to_string());
    }
    Ok(SpaceMetrics {
        instance_space_area: instance_hull.area(),
        buggy_region_area: buggy_hull.area(),
        boundary_area: boundary.area(),
        coverage: grid.coverage,
        grid_cells_per_axis: grid.cells_per_axis,
        grid_cells_total: grid.total,
        grid_cells_occupied: grid.occupied,
        instance_hull,
        buggy_hull,
        grid,
        warnings,
    })
}
