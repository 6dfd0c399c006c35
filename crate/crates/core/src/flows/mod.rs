//! Velocity laws driving the curve and the alternating scheduler that
//! switches between them.
//!
//! Every law moves the curve along its outward normal `N` with speed
//! - gradient descent: `<F, N>`
//! - equilibrium flow: `<R F, N>`, `R` a quarter turn
//! - modified equilibrium flow: `<R F, N> + eps <F, N>`

mod run;

pub use run::{
    run_flow, run_flow_observed, run_geosnakes, run_geosnakes_observed, AlternationConfig, ConvergenceRecord, GeoSnakesRun, Outcome, Phase,
    StepRecord,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{bilerp, node_gradient, Mat2, VectorField};
use crate::levelset::{CurvePolyline, LevelSetFunction};

/// Gradient magnitude of `phi` below which a node has no defined normal.
pub const FLAT_GRADIENT: f64 = 1e-8;

/// Field magnitudes below this fraction of the maximum are zeroed when the
/// field is normalized.
pub const NORMALIZATION_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowKind {
    GradientDescent,
    Equilibrium,
    ModifiedEquilibrium,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RotationSign {
    #[default]
    Ccw,
    Cw,
}

impl RotationSign {
    pub fn matrix(self) -> Mat2 {
        match self {
            RotationSign::Ccw => Mat2::rotation_ccw(),
            RotationSign::Cw => Mat2::rotation_ccw().transpose(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    pub kind: FlowKind,
    #[serde(default)]
    pub rotation_sign: RotationSign,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub normalize_field: bool,
}

impl FlowSpec {
    pub fn gradient_descent() -> Self {
        FlowSpec {
            kind: FlowKind::GradientDescent,
            rotation_sign: RotationSign::Ccw,
            epsilon: 0.0,
            normalize_field: false,
        }
    }

    pub fn equilibrium() -> Self {
        FlowSpec { kind: FlowKind::Equilibrium, ..Self::gradient_descent() }
    }

    pub fn modified_equilibrium(epsilon: f64) -> Self {
        FlowSpec { kind: FlowKind::ModifiedEquilibrium, epsilon, ..Self::gradient_descent() }
    }

    pub fn normalized(mut self, on: bool) -> Self {
        self.normalize_field = on;
        self
    }

    pub fn with_rotation(mut self, sign: RotationSign) -> Self {
        self.rotation_sign = sign;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::arg(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        Ok(())
    }

    /// Field the inner products act on (after optional normalization).
    pub fn effective_field(&self, f: &VectorField) -> VectorField {
        if self.normalize_field {
            f.normalized(NORMALIZATION_FLOOR * f.max_norm())
        } else {
            f.clone()
        }
    }

    /// Speed from the two inner products `<F, N>` and `<R F, N>`.
    #[inline]
    pub fn combine(&self, f_n: f64, rf_n: f64) -> f64 {
        match self.kind {
            FlowKind::GradientDescent => f_n,
            FlowKind::Equilibrium => rf_n,
            FlowKind::ModifiedEquilibrium => {
                if self.epsilon == 0.0 {
                    rf_n
                } else {
                    rf_n + self.epsilon * f_n
                }
            }
        }
    }

    /// The vector field whose normal component is the speed: `F`, `R F`,
    /// or `R F + eps F`.
    pub fn velocity_field(&self, f: &VectorField) -> VectorField {
        let f = self.effective_field(f);
        let r = self.rotation_sign.matrix();
        let m = match self.kind {
            FlowKind::GradientDescent => Mat2::IDENTITY,
            FlowKind::Equilibrium => r,
            FlowKind::ModifiedEquilibrium => Mat2::new(
                r.a11 + self.epsilon,
                r.a12,
                r.a21,
                r.a22 + self.epsilon,
            ),
        };
        f.transformed(&m)
    }
}

/// `F` and `R F` ready for repeated speed evaluation.
#[derive(Debug, Clone)]
pub(crate) struct PreparedField {
    pub spec: FlowSpec,
    pub field: VectorField,
    pub rotated: VectorField,
}

impl PreparedField {
    pub fn new(spec: FlowSpec, f: &VectorField) -> Result<Self> {
        spec.validate()?;
        let field = spec.effective_field(f);
        let rotated = field.transformed(&spec.rotation_sign.matrix());
        Ok(PreparedField { spec, field, rotated })
    }

    pub fn speed(&self, ls: &LevelSetFunction) -> Result<SpeedField> {
        let grid = *ls.grid();
        if grid != *self.field.grid() {
            return Err(Error::arg("level set and field live on different grids"));
        }
        let phi = ls.phi.values();
        let (fu, fv) = (self.field.u(), self.field.v());
        let (ru, rv) = (self.rotated.u(), self.rotated.v());
        let mut values = Vec::with_capacity(grid.len());
        let mut flat_nodes = 0;
        for j in 0..grid.height {
            for i in 0..grid.width {
                let k = grid.index(i, j);
                let (gx, gy) = node_gradient(phi, &grid, i, j);
                let l = gx.hypot(gy);
                if l < FLAT_GRADIENT {
                    flat_nodes += 1;
                    values.push(0.0);
                    continue;
                }
                let (nx, ny) = (gx / l, gy / l);
                let f_n = fu[k] * nx + fv[k] * ny;
                let rf_n = ru[k] * nx + rv[k] * ny;
                values.push(self.spec.combine(f_n, rf_n));
            }
        }
        Ok(SpeedField { values, flat_nodes })
    }

    /// Speed at each vertex from the curve's own normals.
    pub fn curve_speed(&self, c: &CurvePolyline) -> Result<Vec<f64>> {
        c.vertices
            .iter()
            .zip(&c.normals)
            .map(|(v, n)| {
                let (a, b) = self.field.sample(v[0], v[1])?;
                let (ra, rb) = self.rotated.sample(v[0], v[1])?;
                Ok(self.spec.combine(a * n[0] + b * n[1], ra * n[0] + rb * n[1]))
            })
            .collect()
    }
}

/// Normal speed at every grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedField {
    pub values: Vec<f64>,
    /// Nodes where `|grad phi|` was too small to define a normal.
    pub flat_nodes: usize,
}

impl SpeedField {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, b| m.max(b.abs()))
    }

    /// Bilinear interpolation of the nodal speed at a world point.
    pub(crate) fn sample(&self, grid: &crate::field::GridSpec, x: f64, y: f64) -> f64 {
        let (xm, ym) = grid.extent();
        let (x, y) = (x.clamp(0.0, xm), y.clamp(0.0, ym));
        let (i, j, tx, ty) = grid.locate(x, y, (0, 0), (grid.width - 2, grid.height - 2));
        let k = grid.index(i, j);
        let w = grid.width;
        bilerp(
            self.values[k],
            self.values[k + 1],
            self.values[k + w],
            self.values[k + w + 1],
            tx,
            ty,
        )
    }
}

/// Normal speed of the chosen law at every node, with `N = grad phi / |grad phi|`.
pub fn speed_field(spec: &FlowSpec, f: &VectorField, ls: &LevelSetFunction) -> Result<SpeedField> {
    PreparedField::new(*spec, f)?.speed(ls)
}

/// Arc-length weighted mean of `|F|` over all vertices of `curves`.
/// Returns 0 for an empty or zero-length set.
pub fn mean_field_norm(f: &VectorField, curves: &[CurvePolyline]) -> Result<f64> {
    let (mut sum, mut total) = (0.0, 0.0);
    for c in curves {
        for (v, w) in c.vertices.iter().zip(c.arc_weights()) {
            let (u, v) = f.sample(v[0], v[1])?;
            sum += w * u.hypot(v);
            total += w;
        }
    }
    Ok(if total > 0.0 { sum / total } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GridSpec;
    use crate::levelset::init_circle;

    fn radial_setup() -> (GridSpec, VectorField, LevelSetFunction) {
        let grid = GridSpec::square(65);
        let f = VectorField::from_fn(grid, |x, y| (-(x - 32.0), -(y - 32.0)));
        let ls = init_circle(grid, 32.0, 32.0, 12.0);
        (grid, f, ls)
    }

    #[test]
    fn zero_field_gives_zero_speed() {
        let (grid, _, ls) = radial_setup();
        let f = VectorField::zeros(grid);
        for spec in [
            FlowSpec::gradient_descent(),
            FlowSpec::equilibrium(),
            FlowSpec::modified_equilibrium(0.1),
            FlowSpec::modified_equilibrium(0.1).normalized(true),
        ] {
            let s = speed_field(&spec, &f, &ls).unwrap();
            assert!(s.values.iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn radial_field_speeds() {
        let (grid, f, ls) = radial_setup();
        let gd = speed_field(&FlowSpec::gradient_descent(), &f, &ls).unwrap();
        let ef = speed_field(&FlowSpec::equilibrium(), &f, &ls).unwrap();
        let me = speed_field(&FlowSpec::modified_equilibrium(0.1), &f, &ls).unwrap();
        for &(i, j) in &[(44, 32), (32, 20), (40, 40), (25, 37)] {
            let k = grid.index(i, j);
            let (x, y) = grid.world(i, j);
            let r = (x - 32.0).hypot(y - 32.0);
            // central differences tilt the normal by at most ~0.1 (h/r)^2
            let theta = 0.1 / (r * r);
            assert!((gd.values[k] + r).abs() <= r * theta * theta, "{} vs {}", gd.values[k], -r);
            assert!(ef.values[k].abs() <= r * theta);
            assert!((me.values[k] + 0.1 * r).abs() <= r * (theta + 0.1 * theta * theta));
        }
    }

    #[test]
    fn modified_flow_is_linear_combination() {
        let grid = GridSpec::square(40);
        let f = VectorField::from_fn(grid, |x, y| ((0.3 * y).sin() + 0.01 * x, (0.2 * x).cos()));
        let ls = init_circle(grid, 18.0, 21.0, 9.0);
        for spec_norm in [false, true] {
            let gd = speed_field(&FlowSpec::gradient_descent().normalized(spec_norm), &f, &ls).unwrap();
            let ef = speed_field(&FlowSpec::equilibrium().normalized(spec_norm), &f, &ls).unwrap();
            for eps in [0.05, 0.1, 0.4] {
                let me = speed_field(&FlowSpec::modified_equilibrium(eps).normalized(spec_norm), &f, &ls)
                    .unwrap();
                for k in 0..grid.len() {
                    assert_eq!(me.values[k], ef.values[k] + eps * gd.values[k]);
                }
            }
            let me0 = speed_field(&FlowSpec::modified_equilibrium(0.0).normalized(spec_norm), &f, &ls)
                .unwrap();
            assert_eq!(me0, ef);
        }
    }

    #[test]
    fn normalized_field_has_unit_or_zero_magnitude() {
        let grid = GridSpec::square(30);
        let f = VectorField::from_fn(grid, |x, y| {
            if x < 5.0 { (0.0, 0.0) } else { (x * 1e-3, y - 15.0) }
        });
        let n = FlowSpec::gradient_descent().normalized(true).effective_field(&f);
        for m in n.magnitude().values() {
            assert!(*m == 0.0 || (m - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_matrices() {
        assert_eq!(RotationSign::Ccw.matrix(), Mat2::new(0.0, -1.0, 1.0, 0.0));
        assert_eq!(RotationSign::Cw.matrix().det(), 1.0);
        assert_eq!(RotationSign::Cw.matrix().mul(&RotationSign::Ccw.matrix()), Mat2::IDENTITY);
    }

    #[test]
    fn negative_epsilon_rejected() {
        let (_, f, ls) = radial_setup();
        assert!(speed_field(&FlowSpec::modified_equilibrium(-0.1), &f, &ls).is_err());
    }

    #[test]
    fn flat_phi_nodes_are_counted() {
        let grid = GridSpec::square(10);
        let ls = LevelSetFunction::new(crate::field::ScalarField::constant(grid, 1.0));
        let f = VectorField::constant(grid, 1.0, 0.0);
        let s = speed_field(&FlowSpec::gradient_descent(), &f, &ls).unwrap();
        assert_eq!(s.flat_nodes, grid.len());
        assert!(s.values.iter().all(|&b| b == 0.0));
    }
}
