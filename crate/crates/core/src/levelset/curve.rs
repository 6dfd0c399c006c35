//! Explicit closed polylines with per-vertex frames.

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// A closed polyline traversed counter-clockwise (interior on the left),
/// with unit outward normal `N` and unit tangent `T = R N` at each vertex,
/// where `R` is the counter-clockwise quarter turn.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePolyline {
    pub vertices: Vec<Point>,
    pub normals: Vec<Point>,
    pub tangents: Vec<Point>,
    pub closed: bool,
}

#[inline]
pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub(crate) fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub(crate) fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

/// Counter-clockwise quarter turn.
#[inline]
pub(crate) fn rot_ccw(a: Point) -> Point {
    [-a[1], a[0]]
}

/// Outward normal of a counter-clockwise curve whose forward direction is `d`.
#[inline]
pub(crate) fn outward_of(d: Point) -> Point {
    [d[1], -d[0]]
}

/// Distance from `p` to the segment `[a, b]`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = sub(b, a);
    let ap = sub(p, a);
    let l2 = dot(ab, ab);
    let t = if l2 > 0.0 { (dot(ap, ab) / l2).clamp(0.0, 1.0) } else { 0.0 };
    norm([ap[0] - t * ab[0], ap[1] - t * ab[1]])
}

/// Distance from `p` to the closed polyline through `vertices`.
pub fn point_polyline_distance(p: Point, vertices: &[Point]) -> f64 {
    let n = vertices.len();
    match n {
        0 => f64::INFINITY,
        1 => norm(sub(p, vertices[0])),
        _ => (0..n)
            .map(|k| point_segment_distance(p, vertices[k], vertices[(k + 1) % n]))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Vertex normals from central differences of the neighbouring vertices.
pub(crate) fn polygon_frames(vertices: &[Point]) -> (Vec<Point>, Vec<Point>) {
    let n = vertices.len();
    let mut normals = Vec::with_capacity(n);
    let mut tangents = Vec::with_capacity(n);
    for k in 0..n {
        let d = sub(vertices[(k + 1) % n], vertices[(k + n - 1) % n]);
        let l = norm(d);
        let t = if l > 0.0 { [d[0] / l, d[1] / l] } else { [1.0, 0.0] };
        normals.push(outward_of(t));
        tangents.push(t);
    }
    (normals, tangents)
}

impl CurvePolyline {
    /// Build from vertices alone; frames come from neighbouring vertices.
    pub fn from_vertices(vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::arg(format!(
                "a closed curve needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        let (normals, tangents) = polygon_frames(&vertices);
        Ok(CurvePolyline { vertices, normals, tangents, closed: true })
    }

    /// Build with explicit outward normals; tangents are `R N`.
    pub fn with_normals(vertices: Vec<Point>, normals: Vec<Point>) -> Result<Self> {
        if vertices.len() != normals.len() {
            return Err(Error::arg("vertex and normal counts differ"));
        }
        let tangents = normals.iter().map(|&n| rot_ccw(n)).collect();
        Ok(CurvePolyline { vertices, normals, tangents, closed: true })
    }

    /// Regular polygon inscribed in a circle, counter-clockwise.
    pub fn circle(cx: f64, cy: f64, radius: f64, n: usize) -> Self {
        let vertices = (0..n)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                [cx + radius * a.cos(), cy + radius * a.sin()]
            })
            .collect();
        let normals = (0..n)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                [a.cos(), a.sin()]
            })
            .collect();
        CurvePolyline::with_normals(vertices, normals).expect("matching lengths")
    }

    /// Counter-clockwise ellipse with analytic normals.
    pub fn ellipse(cx: f64, cy: f64, a: f64, b: f64, n: usize) -> Self {
        let mut vertices = Vec::with_capacity(n);
        let mut normals = Vec::with_capacity(n);
        for k in 0..n {
            let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            vertices.push([cx + a * t.cos(), cy + b * t.sin()]);
            let nn = [b * t.cos(), a * t.sin()];
            let l = norm(nn);
            normals.push([nn[0] / l, nn[1] / l]);
        }
        CurvePolyline::with_normals(vertices, normals).expect("matching lengths")
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Length of segment `k -> k+1`.
    pub fn segment_length(&self, k: usize) -> f64 {
        let n = self.vertices.len();
        norm(sub(self.vertices[(k + 1) % n], self.vertices[k]))
    }

    /// Arc-length weight of each vertex: half of the two adjacent segments.
    pub fn arc_weights(&self) -> Vec<f64> {
        let n = self.vertices.len();
        (0..n)
            .map(|k| 0.5 * (self.segment_length(k) + self.segment_length((k + n - 1) % n)))
            .collect()
    }

    pub fn length(&self) -> Result<f64> {
        curve_length(self)
    }

    pub fn area(&self) -> Result<f64> {
        enclosed_area(self)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        let mut c = self.clone();
        for v in &mut c.vertices {
            v[0] += dx;
            v[1] += dy;
        }
        c
    }

    /// Smallest and largest segment lengths.
    pub fn spacing_range(&self) -> (f64, f64) {
        (0..self.vertices.len())
            .map(|k| self.segment_length(k))
            .fold((f64::INFINITY, 0.0), |(lo, hi), l| (lo.min(l), hi.max(l)))
    }

    pub fn centroid(&self) -> Point {
        let n = self.vertices.len() as f64;
        let s = self
            .vertices
            .iter()
            .fold([0.0, 0.0], |a, v| [a[0] + v[0], a[1] + v[1]]);
        [s[0] / n, s[1] / n]
    }

    /// Even-odd point-in-polygon test.
    pub fn contains(&self, p: Point) -> bool {
        let n = self.vertices.len();
        let mut inside = false;
        for k in 0..n {
            let a = self.vertices[k];
            let b = self.vertices[(k + 1) % n];
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                if p[0] < x {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

fn require_nondegenerate(c: &CurvePolyline) -> Result<()> {
    if c.vertices.len() < 3 {
        return Err(Error::arg(format!(
            "curve has {} vertices, at least 3 required",
            c.vertices.len()
        )));
    }
    Ok(())
}

/// Sum of segment lengths, including the closing segment.
pub fn curve_length(c: &CurvePolyline) -> Result<f64> {
    require_nondegenerate(c)?;
    Ok((0..c.vertices.len()).map(|k| c.segment_length(k)).sum())
}

/// Shoelace area; positive for counter-clockwise traversal.
pub fn enclosed_area(c: &CurvePolyline) -> Result<f64> {
    require_nondegenerate(c)?;
    let n = c.vertices.len();
    let twice: f64 = (0..n)
        .map(|k| {
            let a = c.vertices[k];
            let b = c.vertices[(k + 1) % n];
            a[0] * b[1] - b[0] * a[1]
        })
        .sum();
    Ok(0.5 * twice)
}

/// Directed Hausdorff distance from the vertices of `a` to the polyline `b`.
fn directed_hausdorff(a: &[Point], b: &[Point]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let n = b.len();
    let segs: Vec<(Point, Point)> = match n {
        0 => return f64::INFINITY,
        1 => vec![(b[0], b[0])],
        _ => (0..n).map(|k| (b[k], b[(k + 1) % n])).collect(),
    };
    directed_early_break(a, &segs)
}

/// Symmetric Hausdorff distance between two closed polylines, measuring
/// vertex-to-segment distances in both directions.
pub fn polyline_hausdorff(a: &[Point], b: &[Point]) -> f64 {
    directed_hausdorff(a, b).max(directed_hausdorff(b, a))
}

/// Hausdorff distance between two sets of closed curves, each set taken as
/// the union of its components.
pub fn curve_set_hausdorff(a: &[CurvePolyline], b: &[CurvePolyline]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    let (sa, sb) = (segments(a), segments(b));
    let pa: Vec<Point> = a.iter().flat_map(|c| c.vertices.iter().copied()).collect();
    let pb: Vec<Point> = b.iter().flat_map(|c| c.vertices.iter().copied()).collect();
    directed_early_break(&pa, &sb).max(directed_early_break(&pb, &sa))
}

fn segments(set: &[CurvePolyline]) -> Vec<(Point, Point)> {
    let mut out = Vec::new();
    for c in set {
        let n = c.vertices.len();
        match n {
            0 => {}
            1 => out.push((c.vertices[0], c.vertices[0])),
            _ => out.extend((0..n).map(|k| (c.vertices[k], c.vertices[(k + 1) % n]))),
        }
    }
    out
}

/// `max_p min_s dist(p, s)`. A point stops scanning once it is provably
/// closer than the running maximum; the scan starts at the previous
/// point's nearest segment, which is usually close by.
fn directed_early_break(points: &[Point], segs: &[(Point, Point)]) -> f64 {
    let m = segs.len();
    let mut cmax = 0.0f64;
    let mut start = 0;
    for &p in points {
        let mut dmin = f64::INFINITY;
        let mut best = start;
        for off in 0..m {
            let k = (start + off) % m;
            let d = point_segment_distance(p, segs[k].0, segs[k].1);
            if d < dmin {
                dmin = d;
                best = k;
                if dmin <= cmax {
                    break;
                }
            }
        }
        start = best;
        cmax = cmax.max(dmin);
    }
    cmax
}
