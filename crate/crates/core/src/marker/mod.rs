//! Explicit polygon evolution that tracks material points.
//!
//! Vertex `k` keeps its identity from step to step, so quantities attached
//! to a fixed parameter value can be followed. Resampling resets identity
//! and is counted.

use crate::error::{Error, Result, Terminal};
use crate::field::VectorField;
use crate::flows::{FlowSpec, PreparedField};
use crate::levelset::curve::{dot, norm, polygon_frames, sub};
use crate::levelset::{enclosed_area, polyline_hausdorff, CurvePolyline, Point};

/// Steps between self-intersection sweeps in [`evolve_markers`].
pub const INTERSECTION_CHECK_INTERVAL: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct MarkerCurve {
    curve: CurvePolyline,
    resample_events: usize,
}

impl MarkerCurve {
    /// Counter-clockwise simple polygon; a clockwise input is reversed.
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        let mut curve = CurvePolyline::from_vertices(vertices)?;
        if enclosed_area(&curve)? < 0.0 {
            curve.vertices.reverse();
            curve = CurvePolyline::from_vertices(curve.vertices)?;
        }
        Self::from_curve(curve)
    }

    /// Keep the frames already carried by `curve` (e.g. analytic normals).
    pub fn from_curve(curve: CurvePolyline) -> Result<Self> {
        if curve.vertices.len() < 3 {
            return Err(Error::arg("a marker curve needs at least 3 vertices"));
        }
        if find_self_intersection(&curve.vertices).is_some() {
            return Err(Error::arg("initial marker curve intersects itself"));
        }
        Ok(MarkerCurve { curve, resample_events: 0 })
    }

    pub fn circle(cx: f64, cy: f64, radius: f64, n: usize) -> Result<Self> {
        Self::from_curve(CurvePolyline::circle(cx, cy, radius, n))
    }

    pub fn curve(&self) -> &CurvePolyline {
        &self.curve
    }

    pub fn into_curve(self) -> CurvePolyline {
        self.curve
    }

    pub fn vertices(&self) -> &[Point] {
        &self.curve.vertices
    }

    pub fn normals(&self) -> &[Point] {
        &self.curve.normals
    }

    pub fn tangents(&self) -> &[Point] {
        &self.curve.tangents
    }

    pub fn len(&self) -> usize {
        self.curve.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curve.vertices.is_empty()
    }

    /// Number of times vertex identity has been reset by resampling.
    pub fn resample_events(&self) -> usize {
        self.resample_events
    }

    pub fn is_simple(&self) -> bool {
        find_self_intersection(&self.curve.vertices).is_none()
    }
}

fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn segments_cross(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = cross(sub(p2, p1), sub(q1, p1));
    let d2 = cross(sub(p2, p1), sub(q2, p1));
    let d3 = cross(sub(q2, q1), sub(p1, q1));
    let d4 = cross(sub(q2, q1), sub(p2, q1));
    (d1 > 0.0) != (d2 > 0.0) && (d3 > 0.0) != (d4 > 0.0) && d1 != 0.0 && d2 != 0.0 && d3 != 0.0 && d4 != 0.0
}

/// First pair of non-adjacent segments that cross, if any.
fn find_self_intersection(v: &[Point]) -> Option<(usize, usize)> {
    let n = v.len();
    let bbox: Vec<[f64; 4]> = (0..n)
        .map(|k| {
            let (a, b) = (v[k], v[(k + 1) % n]);
            [a[0].min(b[0]), a[0].max(b[0]), a[1].min(b[1]), a[1].max(b[1])]
        })
        .collect();
    for i in 0..n {
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (a, b) = (bbox[i], bbox[j]);
            if a[1] < b[0] || b[1] < a[0] || a[3] < b[2] || b[3] < a[2] {
                continue;
            }
            if segments_cross(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]) {
                return Some((i, j));
            }
        }
    }
    None
}

fn check_step(c: &MarkerCurve, alpha: &[f64], beta: &[f64], dt: f64) -> Result<()> {
    let n = c.len();
    if alpha.len() != n || beta.len() != n {
        return Err(Error::arg(format!(
            "velocity arrays have {} / {} entries, curve has {n}",
            alpha.len(),
            beta.len()
        )));
    }
    if !(dt >= 0.0) || !dt.is_finite() {
        return Err(Error::arg(format!("time step must be non-negative, got {dt}")));
    }
    let vmax = alpha
        .iter()
        .chain(beta)
        .try_fold(0.0f64, |m, &x| if x.is_finite() { Some(m.max(x.abs())) } else { None })
        .ok_or_else(|| Error::arg("non-finite marker velocity"))?;
    let (min_spacing, _) = c.curve.spacing_range();
    if dt * vmax > 0.5 * min_spacing * (1.0 + 1e-12) {
        return Err(Error::arg(format!(
            "marker step too large: dt {dt} * max speed {vmax} > half the minimum spacing {min_spacing}"
        )));
    }
    Ok(())
}

fn advance(c: &MarkerCurve, alpha: &[f64], beta: &[f64], dt: f64) -> MarkerCurve {
    let vertices: Vec<Point> = c
        .curve
        .vertices
        .iter()
        .zip(c.curve.normals.iter().zip(&c.curve.tangents))
        .zip(alpha.iter().zip(beta))
        .map(|((v, (nn, t)), (a, b))| {
            [v[0] + dt * (a * t[0] + b * nn[0]), v[1] + dt * (a * t[1] + b * nn[1])]
        })
        .collect();
    let (normals, tangents) = polygon_frames(&vertices);
    MarkerCurve {
        curve: CurvePolyline { vertices, normals, tangents, closed: true },
        resample_events: c.resample_events,
    }
}

/// Move each vertex by `dt (alpha T + beta N)` and recompute the frames.
pub fn marker_step(c: &MarkerCurve, alpha: &[f64], beta: &[f64], dt: f64) -> Result<MarkerCurve> {
    check_step(c, alpha, beta, dt)?;
    let next = advance(c, alpha, beta, dt);
    if !next.is_simple() {
        return Err(Error::Terminal(Terminal::SelfIntersection));
    }
    Ok(next)
}

/// Redistribute vertices uniformly in arc length, starting at vertex 0.
pub fn resample(c: &MarkerCurve, target_spacing: f64) -> Result<MarkerCurve> {
    if !(target_spacing > 0.0) {
        return Err(Error::arg(format!("target spacing must be positive, got {target_spacing}")));
    }
    let v = &c.curve.vertices;
    let n = v.len();
    if n < 3 {
        return Err(Error::arg("cannot resample a curve with fewer than 3 vertices"));
    }
    let seg: Vec<f64> = (0..n).map(|k| c.curve.segment_length(k)).collect();
    let total: f64 = seg.iter().sum();
    let m = ((total / target_spacing).round() as usize).max(3);
    let step = total / m as f64;
    let mut out = Vec::with_capacity(m);
    let (mut k, mut walked) = (0usize, 0.0);
    for i in 0..m {
        let s = i as f64 * step;
        while k < n - 1 && walked + seg[k] < s {
            walked += seg[k];
            k += 1;
        }
        let t = if seg[k] > 0.0 { ((s - walked) / seg[k]).clamp(0.0, 1.0) } else { 0.0 };
        let (a, b) = (v[k], v[(k + 1) % n]);
        out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
    }
    let (normals, tangents) = polygon_frames(&out);
    Ok(MarkerCurve {
        curve: CurvePolyline { vertices: out, normals, tangents, closed: true },
        resample_events: c.resample_events + 1,
    })
}

/// Marker curve for an arbitrary polyline, e.g. an extracted zero set with
/// sub-cell segments: resampled to spacing `h` when its spacing leaves
/// `[0.5 h, 2 h]`, otherwise kept with its frames.
pub fn regularize(c: &CurvePolyline, h: f64) -> Result<MarkerCurve> {
    let m = MarkerCurve::from_curve(c.clone())?;
    let (lo, hi) = c.spacing_range();
    if lo < 0.5 * h || hi > 2.0 * h {
        resample(&m, h)
    } else {
        Ok(m)
    }
}

/// Symmetric Hausdorff distance between the two polylines.
pub fn hausdorff(a: &MarkerCurve, b: &MarkerCurve) -> f64 {
    polyline_hausdorff(&a.curve.vertices, &b.curve.vertices)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkerOptions {
    /// Grid spacing; vertex spacing is kept within `[0.5 h, 2 h]`.
    pub h: f64,
    /// When false, vertex identity is never reset.
    pub resample: bool,
}

/// Per-vertex `(alpha, beta)` for the current curve at time `t`.
pub trait MarkerVelocity {
    fn velocity(&mut self, c: &MarkerCurve, t: f64) -> Result<(Vec<f64>, Vec<f64>)>;
}

impl<F> MarkerVelocity for F
where
    F: FnMut(&MarkerCurve, f64) -> Result<(Vec<f64>, Vec<f64>)>,
{
    fn velocity(&mut self, c: &MarkerCurve, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        self(c, t)
    }
}

/// Run `steps` explicit steps, resampling when the spacing leaves its band
/// and checking for self-intersection every few steps.
pub fn evolve_markers(
    c0: &MarkerCurve,
    steps: usize,
    dt: f64,
    mut velocity: impl MarkerVelocity,
    opts: MarkerOptions,
) -> Result<MarkerCurve> {
    let mut c = c0.clone();
    for step in 0..steps {
        if opts.resample {
            let (lo, hi) = c.curve.spacing_range();
            if lo < 0.5 * opts.h || hi > 2.0 * opts.h {
                c = resample(&c, opts.h)?;
            }
        }
        let (alpha, beta) = velocity.velocity(&c, step as f64 * dt)?;
        check_step(&c, &alpha, &beta, dt)?;
        c = advance(&c, &alpha, &beta, dt);
        if (step + 1) % INTERSECTION_CHECK_INTERVAL == 0 && !c.is_simple() {
            return Err(Error::Terminal(Terminal::SelfIntersection));
        }
    }
    if !c.is_simple() {
        return Err(Error::Terminal(Terminal::SelfIntersection));
    }
    Ok(c)
}

/// Normal speed of `spec` at each vertex, using the vertex normals.
pub fn curve_speed(spec: &FlowSpec, f: &VectorField, c: &CurvePolyline) -> Result<Vec<f64>> {
    PreparedField::new(*spec, f)?.curve_speed(c)
}

/// Evolve `c0` with `beta = <F, N>` twice, once without and once with the
/// tangential speed `alpha_fn(vertex, position, t)`, and return the
/// Hausdorff distance between the final curves.
pub fn check_tangential_invariance(
    f: &VectorField,
    c0: &MarkerCurve,
    alpha_fn: impl Fn(usize, Point, f64) -> f64,
    steps: usize,
    dt: f64,
) -> Result<f64> {
    let prepared = PreparedField::new(FlowSpec::gradient_descent(), f)?;
    let opts = MarkerOptions { h: f.grid().spacing, resample: true };
    let plain = evolve_markers(
        c0,
        steps,
        dt,
        |c: &MarkerCurve, _t: f64| Ok((vec![0.0; c.len()], prepared.curve_speed(c.curve())?)),
        opts,
    )?;
    let slid = evolve_markers(
        c0,
        steps,
        dt,
        |c: &MarkerCurve, t: f64| {
            let alpha = c.vertices().iter().enumerate().map(|(k, &p)| alpha_fn(k, p, t)).collect();
            Ok((alpha, prepared.curve_speed(c.curve())?))
        },
        opts,
    )?;
    Ok(hausdorff(&plain, &slid))
}

/// Evolve `c0` under the pure normal flow `beta = <F, N>` for total time
/// `tau` in steps no longer than `dt`, following each vertex. Returns the
/// per-vertex ratio of the displacement's tangential component (w.r.t. the
/// initial tangent) to its length.
pub fn check_normal_displacement(f: &VectorField, c0: &MarkerCurve, tau: f64, dt: f64) -> Result<Vec<f64>> {
    if !(tau > 0.0 && dt > 0.0) {
        return Err(Error::arg("tau and dt must be positive"));
    }
    let prepared = PreparedField::new(FlowSpec::gradient_descent(), f)?;
    let steps = (tau / dt - 1e-9).ceil().max(1.0) as usize;
    let sub_dt = tau / steps as f64;
    let end = evolve_markers(
        c0,
        steps,
        sub_dt,
        |c: &MarkerCurve, _t: f64| Ok((vec![0.0; c.len()], prepared.curve_speed(c.curve())?)),
        MarkerOptions { h: f.grid().spacing, resample: false },
    )?;
    Ok(c0
        .vertices()
        .iter()
        .zip(end.vertices())
        .zip(c0.tangents())
        .map(|((a, b), t)| {
            let d = sub(*b, *a);
            let l = norm(d);
            if l > 0.0 {
                dot(d, *t).abs() / l
            } else {
                0.0
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{gradient, make_ring_field, GridSpec};
    use proptest::prelude::*;

    fn radius_range(c: &MarkerCurve, cx: f64, cy: f64) -> (f64, f64) {
        c.vertices()
            .iter()
            .map(|v| (v[0] - cx).hypot(v[1] - cy))
            .fold((f64::INFINITY, 0.0), |(lo, hi), r| (lo.min(r), hi.max(r)))
    }

    #[test]
    fn zero_velocity_is_identity() {
        let c = MarkerCurve::circle(10.0, 10.0, 5.0, 40).unwrap();
        let z = vec![0.0; 40];
        let d = marker_step(&c, &z, &z, 0.3).unwrap();
        assert_eq!(d.vertices(), c.vertices());
    }

    #[test]
    fn unit_normal_speed_grows_circle() {
        let (r, dt) = (8.0, 0.1);
        let c = MarkerCurve::circle(0.0, 0.0, r, 64).unwrap();
        let d = marker_step(&c, &vec![0.0; 64], &vec![1.0; 64], dt).unwrap();
        let (lo, hi) = radius_range(&d, 0.0, 0.0);
        assert!((lo - (r + dt)).abs() <= 1e-6 * r && (hi - (r + dt)).abs() <= 1e-6 * r);
    }

    #[test]
    fn tangential_speed_slides_along_circle() {
        let r = 10.0;
        let mut c = MarkerCurve::circle(0.0, 0.0, r, 200).unwrap();
        let dt = 0.01 * r / 10.0;
        for _ in 0..10 {
            c = marker_step(&c, &vec![1.0; 200], &vec![0.0; 200], dt).unwrap();
        }
        let (lo, hi) = radius_range(&c, 0.0, 0.0);
        assert!((lo - r).abs() <= 1e-3 * r && (hi - r).abs() <= 1e-3 * r);
        // vertex 0 moved counter-clockwise
        assert!(c.vertices()[0][1] > 0.0);
    }

    #[test]
    fn oversized_step_rejected() {
        let c = MarkerCurve::circle(0.0, 0.0, 5.0, 20).unwrap();
        let spacing = c.curve().spacing_range().0;
        let err = marker_step(&c, &vec![0.0; 20], &vec![1.0; 20], spacing).unwrap_err();
        assert!(matches!(err, Error::Argument(_)));
    }

    #[test]
    fn crossing_motion_is_terminal() {
        // Thin band, gap 0.4, spacing >= 1: one legal step pushes a top
        // vertex through the bottom side.
        let v = vec![
            [0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0], [4.0, 0.0], [5.0, 0.2],
            [4.0, 0.4], [3.0, 0.4], [2.0, 0.4], [1.0, 0.4], [0.0, 0.4], [-1.0, 0.2],
        ];
        let c = MarkerCurve::new(v).unwrap();
        assert_eq!(c.normals()[8], [0.0, 1.0]);
        let mut beta = vec![0.0; 12];
        beta[8] = -1.0;
        let err = marker_step(&c, &vec![0.0; 12], &beta, 0.5).unwrap_err();
        assert_eq!(err.terminal(), Some(Terminal::SelfIntersection));
        let twisted = [[0.0, 0.0], [4.0, 1.0], [4.0, 0.0], [0.0, 1.0]];
        assert!(find_self_intersection(&twisted).is_some());
        assert!(MarkerCurve::from_curve(CurvePolyline::from_vertices(twisted.to_vec()).unwrap()).is_err());
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let c = MarkerCurve::new(vec![[0.0, 0.0], [0.0, 2.0], [2.0, 2.0], [2.0, 0.0]]).unwrap();
        assert!(enclosed_area(c.curve()).unwrap() > 0.0);
    }

    #[test]
    fn resample_uniform_is_unchanged() {
        let c = MarkerCurve::circle(3.0, 4.0, 10.0, 90).unwrap();
        let target = c.curve().segment_length(0);
        let r = resample(&c, target).unwrap();
        assert_eq!(r.len(), 90);
        for (a, b) in c.vertices().iter().zip(r.vertices()) {
            assert!((a[0] - b[0]).abs() < 1e-9 && (a[1] - b[1]).abs() < 1e-9);
        }
        assert_eq!(r.resample_events(), 1);
    }

    #[test]
    fn resample_coarsened_preserves_length() {
        let fine = MarkerCurve::circle(0.0, 0.0, 20.0, 200).unwrap();
        let l0 = fine.curve().length().unwrap();
        let coarse = MarkerCurve::new(fine.vertices().iter().step_by(2).copied().collect()).unwrap();
        let r = resample(&coarse, l0 / 200.0).unwrap();
        assert!((r.curve().length().unwrap() - l0).abs() <= 0.005 * l0);
    }

    #[test]
    fn resample_rejects_degenerate() {
        let c = MarkerCurve {
            curve: CurvePolyline {
                vertices: vec![[0.0, 0.0], [1.0, 0.0]],
                normals: vec![[0.0, 1.0]; 2],
                tangents: vec![[1.0, 0.0]; 2],
                closed: true,
            },
            resample_events: 0,
        };
        assert!(resample(&c, 0.5).is_err());
    }

    #[test]
    fn hausdorff_of_concentric_circles() {
        let a = MarkerCurve::circle(0.0, 0.0, 10.0, 720).unwrap();
        let b = MarkerCurve::circle(0.0, 0.0, 12.5, 720).unwrap();
        assert_eq!(hausdorff(&a, &a), 0.0);
        assert!((hausdorff(&a, &b) - 2.5).abs() <= 0.025);
        let mut rolled = b.vertices().to_vec();
        rolled.rotate_left(77);
        let b2 = MarkerCurve::new(rolled).unwrap();
        assert_eq!(hausdorff(&a, &b2), hausdorff(&a, &b));
    }

    #[test]
    fn zero_tangential_speed_gives_zero_distance() {
        let grid = GridSpec::square(64);
        let f = gradient(&make_ring_field(grid, 32.0, 32.0, 15.0, 3.0).unwrap());
        let c0 = MarkerCurve::circle(33.0, 31.0, 20.0, 120).unwrap();
        let d = check_tangential_invariance(&f, &c0, |_, _, _| 0.0, 50, 0.5).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn radial_field_tangential_invariance() {
        let grid = GridSpec::new(41, 41, 1.0).unwrap();
        let f = VectorField::from_fn(grid, |x, y| (-(x - 20.0), -(y - 20.0)));
        let c0 = MarkerCurve::circle(20.0, 20.0, 12.0, 75).unwrap();
        let h = grid.spacing;
        let plus = check_tangential_invariance(&f, &c0, |_, _, _| 0.3, 100, 0.01).unwrap();
        let minus = check_tangential_invariance(&f, &c0, |_, _, _| -0.3, 100, 0.01).unwrap();
        assert!(plus <= 2.0 * h && minus <= 2.0 * h, "{plus} {minus}");
        assert!((plus - minus).abs() <= 0.1 * h);
    }

    #[test]
    fn single_step_displacement_is_normal() {
        let grid = GridSpec::square(64);
        let f = gradient(&make_ring_field(grid, 32.0, 32.0, 15.0, 3.0).unwrap());
        let c0 = MarkerCurve::from_curve(CurvePolyline::ellipse(32.0, 32.0, 20.0, 12.0, 120)).unwrap();
        let c0 = MarkerCurve::new(c0.vertices().to_vec()).unwrap();
        let leak = check_normal_displacement(&f, &c0, 0.5, 0.5).unwrap();
        assert!(leak.iter().all(|&l| l <= 1e-6), "{:?}", leak.iter().cloned().fold(0.0, f64::max));
    }

    #[test]
    fn radial_symmetry_has_no_leakage() {
        let grid = GridSpec::new(41, 41, 1.0).unwrap();
        let f = VectorField::from_fn(grid, |x, y| (-(x - 20.0), -(y - 20.0)));
        let c0 = MarkerCurve::new(CurvePolyline::circle(20.0, 20.0, 10.0, 64).vertices).unwrap();
        let leak = check_normal_displacement(&f, &c0, 0.05, 0.01).unwrap();
        assert!(leak.iter().all(|&l| l <= 1e-6));
    }

    #[test]
    fn leakage_vanishes_to_first_order() {
        let grid = GridSpec::square(64);
        let f = gradient(&make_ring_field(grid, 32.0, 32.0, 15.0, 3.0).unwrap());
        let c0 = MarkerCurve::new(CurvePolyline::ellipse(32.0, 32.0, 20.0, 12.0, 120).vertices).unwrap();
        let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
        let full = mean(check_normal_displacement(&f, &c0, 4.0, 0.4).unwrap());
        let half = mean(check_normal_displacement(&f, &c0, 2.0, 0.4).unwrap());
        assert!(full / half >= 1.5, "{full} / {half}");
    }

    #[test]
    fn regularize_resamples_only_out_of_band_curves() {
        let grid = GridSpec::square(40);
        let ls = crate::levelset::init_circle(grid, 20.2, 19.7, 11.0);
        let c = &ls.curves()[0];
        let m = regularize(c, 1.0).unwrap();
        let (lo, hi) = m.curve().spacing_range();
        assert!(c.spacing_range().0 < 0.5);
        assert!(lo >= 0.9 && hi <= 1.1, "{lo} {hi}");
        let circle = CurvePolyline::circle(0.0, 0.0, 10.0, 63);
        assert_eq!(regularize(&circle, 1.0).unwrap().curve(), &circle);
    }

    proptest! {
        #[test]
        fn normal_offset_length_identity(r in 3.0f64..30.0, n in 24usize..200, b in -1.0f64..1.0) {
            let c = MarkerCurve::new(CurvePolyline::circle(0.0, 0.0, r, n).vertices).unwrap();
            let spacing = c.curve().spacing_range().0;
            let dt = 0.4 * spacing;
            let l0 = c.curve().length().unwrap();
            let d = marker_step(&c, &vec![0.0; n], &vec![b; n], dt).unwrap();
            let dl = d.curve().length().unwrap() - l0;
            let expect = 2.0 * std::f64::consts::PI * b * dt;
            prop_assert!((dl - expect).abs() <= 0.01 * expect.abs() + 1e-12);
        }

        #[test]
        fn hausdorff_is_symmetric(dx in -3.0f64..3.0, dy in -3.0f64..3.0, s in 0.5f64..2.0) {
            let a = MarkerCurve::circle(0.0, 0.0, 5.0, 50).unwrap();
            let b = MarkerCurve::new(CurvePolyline::ellipse(dx, dy, 5.0 * s, 5.0, 60).vertices).unwrap();
            prop_assert_eq!(hausdorff(&a, &b), hausdorff(&b, &a));
        }
    }
}
