//! Implicit curves: the zero set of a signed distance function `phi`
//! (negative inside, positive outside) evolved by normal speed.

mod contour;
pub mod curve;
mod evolve;
mod reinit;

pub use contour::extract_curves;
pub use curve::{
    curve_length, curve_set_hausdorff, enclosed_area, point_polyline_distance,
    point_segment_distance, polyline_hausdorff, CurvePolyline, Point,
};
pub use evolve::{evolve_step, MAX_CFL};
pub use reinit::{reinitialize, EXACT_BAND};

use crate::field::{GridSpec, ScalarField};

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetFunction {
    pub phi: ScalarField,
    pub steps_since_reinit: usize,
}

/// A circle given by centre and radius.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Circle {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
}

impl LevelSetFunction {
    pub fn new(phi: ScalarField) -> Self {
        LevelSetFunction { phi, steps_since_reinit: 0 }
    }

    pub fn grid(&self) -> &GridSpec {
        self.phi.grid()
    }

    /// Signed distance to a closed polygon (negative inside).
    pub fn from_polygon(grid: GridSpec, c: &CurvePolyline) -> Self {
        LevelSetFunction::new(ScalarField::from_fn(grid, |x, y| {
            let d = point_polyline_distance([x, y], &c.vertices);
            if c.contains([x, y]) {
                -d
            } else {
                d
            }
        }))
    }

    pub fn curves(&self) -> Vec<CurvePolyline> {
        extract_curves(&self.phi)
    }

    /// True when no node is inside the curve.
    pub fn is_empty(&self) -> bool {
        self.phi.values().iter().all(|&v| v >= 0.0)
    }
}

/// Exact signed distance to a circle.
pub fn init_circle(grid: GridSpec, cx: f64, cy: f64, radius: f64) -> LevelSetFunction {
    LevelSetFunction::new(ScalarField::from_fn(grid, |x, y| (x - cx).hypot(y - cy) - radius))
}

/// Union of circles: pointwise minimum of the individual distances.
pub fn init_multi_circle(grid: GridSpec, circles: &[Circle]) -> LevelSetFunction {
    LevelSetFunction::new(ScalarField::from_fn(grid, |x, y| {
        circles
            .iter()
            .map(|c| (x - c.cx).hypot(y - c.cy) - c.radius)
            .fold(f64::INFINITY, f64::min)
    }))
}
