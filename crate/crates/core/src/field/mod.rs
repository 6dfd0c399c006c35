//! Scalar and vector fields sampled on a uniform 2-D grid.
//!
//! Node `(i, j)` sits at world position `(i * h, j * h)`, values are stored
//! row-major (`values[j * width + i]`). All operations are pure: fields are
//! never mutated once built.

mod diff;
mod gvf;
mod pattern;
mod smooth;

pub use diff::{gradient, hessian_at, jacobian_at, node_gradient, node_hessian};
pub use gvf::{gvf_extend, GvfParams};
pub use pattern::{make_disk_pattern, make_ring_field, Disk};
pub use smooth::gaussian_smooth;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid: `width x height` nodes with spacing `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    pub spacing: f64,
}

impl GridSpec {
    pub fn new(width: usize, height: usize, spacing: f64) -> Result<Self> {
        if width < 3 || height < 3 {
            return Err(Error::arg(format!(
                "grid must be at least 3x3, got {width}x{height}"
            )));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::arg(format!("grid spacing must be positive, got {spacing}")));
        }
        Ok(GridSpec { width, height, spacing })
    }

    /// Unit-spacing square grid; panics on `n < 3`.
    pub fn square(n: usize) -> Self {
        GridSpec::new(n, n, 1.0).expect("square grid needs n >= 3")
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.width + i
    }

    #[inline]
    pub fn world(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 * self.spacing, j as f64 * self.spacing)
    }

    /// Largest world coordinates `(x_max, y_max)`.
    pub fn extent(&self) -> (f64, f64) {
        (
            (self.width - 1) as f64 * self.spacing,
            (self.height - 1) as f64 * self.spacing,
        )
    }

    /// World-space center of the grid.
    pub fn center(&self) -> (f64, f64) {
        let (xm, ym) = self.extent();
        (0.5 * xm, 0.5 * ym)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (xm, ym) = self.extent();
        let tol = 1e-9 * self.spacing;
        x >= -tol && y >= -tol && x <= xm + tol && y <= ym + tol
    }

    /// True when `(x, y)` lies at least `margin` cells inside the boundary.
    pub fn contains_inset(&self, x: f64, y: f64, margin: f64) -> bool {
        let (xm, ym) = self.extent();
        let m = margin * self.spacing;
        let tol = 1e-9 * self.spacing;
        x >= m - tol && y >= m - tol && x <= xm - m + tol && y <= ym - m + tol
    }

    /// Cell containing `(x, y)` and the local coordinates inside it.
    /// `lo`/`hi` bound the lower-left node index on each axis.
    pub(crate) fn locate(
        &self,
        x: f64,
        y: f64,
        lo: (usize, usize),
        hi: (usize, usize),
    ) -> (usize, usize, f64, f64) {
        let fx = x / self.spacing;
        let fy = y / self.spacing;
        let i0 = (fx.floor().max(0.0) as usize).clamp(lo.0, hi.0);
        let j0 = (fy.floor().max(0.0) as usize).clamp(lo.1, hi.1);
        (i0, j0, fx - i0 as f64, fy - j0 as f64)
    }
}

/// Bilinear blend of the four corner values.
#[inline]
pub(crate) fn bilerp(v00: f64, v10: f64, v01: f64, v11: f64, tx: f64, ty: f64) -> f64 {
    let a = v00 + (v10 - v00) * tx;
    let b = v01 + (v11 - v01) * tx;
    a + (b - a) * ty
}

/// A sampled scalar function `g` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::arg(format!(
                "expected {} values for a {}x{} grid, got {}",
                grid.len(),
                grid.width,
                grid.height,
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::arg(format!("non-finite value at node {k}")));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        ScalarField { grid, values: vec![value; grid.len()] }
    }

    /// Evaluate `f(x, y)` at every node's world position.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.height {
            for i in 0..grid.width {
                let (x, y) = grid.world(i, j);
                values.push(f(x, y));
            }
        }
        ScalarField { grid, values }
    }

    pub(crate) fn from_raw(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        ScalarField { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Bilinear interpolation at world position `(x, y)`.
    pub fn sample(&self, x: f64, y: f64) -> Result<f64> {
        if !self.grid.contains(x, y) {
            return Err(Error::Domain { x, y });
        }
        let g = &self.grid;
        let (i, j, tx, ty) = g.locate(x, y, (0, 0), (g.width - 2, g.height - 2));
        Ok(bilerp(
            self.at(i, j),
            self.at(i + 1, j),
            self.at(i, j + 1),
            self.at(i + 1, j + 1),
            tx,
            ty,
        ))
    }
}

/// Free-function form of [`ScalarField::sample`].
pub fn sample_scalar(f: &ScalarField, x: f64, y: f64) -> Result<f64> {
    f.sample(x, y)
}

/// A sampled planar vector field `F = (u, v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: GridSpec,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl VectorField {
    pub fn new(grid: GridSpec, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if u.len() != grid.len() || v.len() != grid.len() {
            return Err(Error::arg(format!(
                "component lengths ({}, {}) do not match grid size {}",
                u.len(),
                v.len(),
                grid.len()
            )));
        }
        if u.iter().chain(v.iter()).any(|x| !x.is_finite()) {
            return Err(Error::arg("vector field has non-finite components"));
        }
        Ok(VectorField { grid, u, v })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self::constant(grid, 0.0, 0.0)
    }

    pub fn constant(grid: GridSpec, u: f64, v: f64) -> Self {
        VectorField { grid, u: vec![u; grid.len()], v: vec![v; grid.len()] }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let mut u = Vec::with_capacity(grid.len());
        let mut v = Vec::with_capacity(grid.len());
        for j in 0..grid.height {
            for i in 0..grid.width {
                let (x, y) = grid.world(i, j);
                let (a, b) = f(x, y);
                u.push(a);
                v.push(b);
            }
        }
        VectorField { grid, u, v }
    }

    pub(crate) fn from_raw(grid: GridSpec, u: Vec<f64>, v: Vec<f64>) -> Self {
        debug_assert!(u.len() == grid.len() && v.len() == grid.len());
        VectorField { grid, u, v }
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    #[inline]
    pub fn u(&self) -> &[f64] {
        &self.u
    }

    #[inline]
    pub fn v(&self) -> &[f64] {
        &self.v
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> (f64, f64) {
        let k = self.grid.index(i, j);
        (self.u[k], self.v[k])
    }

    pub fn sample(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        if !self.grid.contains(x, y) {
            return Err(Error::Domain { x, y });
        }
        let g = &self.grid;
        let (i, j, tx, ty) = g.locate(x, y, (0, 0), (g.width - 2, g.height - 2));
        let k00 = g.index(i, j);
        let k10 = k00 + 1;
        let k01 = k00 + g.width;
        let k11 = k01 + 1;
        Ok((
            bilerp(self.u[k00], self.u[k10], self.u[k01], self.u[k11], tx, ty),
            bilerp(self.v[k00], self.v[k10], self.v[k01], self.v[k11], tx, ty),
        ))
    }

    /// Pointwise Euclidean norm.
    pub fn magnitude(&self) -> ScalarField {
        ScalarField::from_raw(
            self.grid,
            self.u.iter().zip(&self.v).map(|(a, b)| a.hypot(*b)).collect(),
        )
    }

    pub fn max_norm(&self) -> f64 {
        self.u
            .iter()
            .zip(&self.v)
            .map(|(a, b)| a.hypot(*b))
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, s: f64) -> Self {
        VectorField {
            grid: self.grid,
            u: self.u.iter().map(|a| a * s).collect(),
            v: self.v.iter().map(|b| b * s).collect(),
        }
    }

    /// `M * F` at every node.
    pub fn transformed(&self, m: &Mat2) -> Self {
        let (u, v) = self
            .u
            .iter()
            .zip(&self.v)
            .map(|(&a, &b)| m.apply(a, b))
            .unzip();
        VectorField { grid: self.grid, u, v }
    }

    /// Replace `F` by `F / |F|` where `|F| >= floor`, and by zero elsewhere.
    pub fn normalized(&self, floor: f64) -> Self {
        let (u, v) = self
            .u
            .iter()
            .zip(&self.v)
            .map(|(&a, &b)| {
                let n = a.hypot(b);
                if n >= floor && n > 0.0 {
                    (a / n, b / n)
                } else {
                    (0.0, 0.0)
                }
            })
            .unzip();
        VectorField { grid: self.grid, u, v }
    }
}

/// Free-function form of [`VectorField::sample`].
pub fn sample_vector(f: &VectorField, x: f64, y: f64) -> Result<(f64, f64)> {
    f.sample(x, y)
}

/// A 2x2 real matrix `[[a11, a12], [a21, a22]]`.
///
/// For a Jacobian, row `r` holds the derivatives of component `r`:
/// `a11 = du/dx`, `a12 = du/dy`, `a21 = dv/dx`, `a22 = dv/dy`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Mat2 {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

impl Mat2 {
    pub const ZERO: Mat2 = Mat2 { a11: 0.0, a12: 0.0, a21: 0.0, a22: 0.0 };
    pub const IDENTITY: Mat2 = Mat2 { a11: 1.0, a12: 0.0, a21: 0.0, a22: 1.0 };

    pub const fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Mat2 { a11, a12, a21, a22 }
    }

    /// Counter-clockwise quarter turn `[[0, -1], [1, 0]]`.
    pub const fn rotation_ccw() -> Self {
        Mat2::new(0.0, -1.0, 1.0, 0.0)
    }

    pub const fn transpose(&self) -> Self {
        Mat2::new(self.a11, self.a21, self.a12, self.a22)
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    #[inline]
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (self.a11 * x + self.a12 * y, self.a21 * x + self.a22 * y)
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        Mat2::new(
            self.a11 * o.a11 + self.a12 * o.a21,
            self.a11 * o.a12 + self.a12 * o.a22,
            self.a21 * o.a11 + self.a22 * o.a21,
            self.a21 * o.a12 + self.a22 * o.a22,
        )
    }

    /// `n^T M n`.
    #[inline]
    pub fn quad_form(&self, n: (f64, f64)) -> f64 {
        let (mx, my) = self.apply(n.0, n.1);
        n.0 * mx + n.1 * my
    }

    /// `a^T M b`.
    #[inline]
    pub fn bilinear(&self, a: (f64, f64), b: (f64, f64)) -> f64 {
        let (mx, my) = self.apply(b.0, b.1);
        a.0 * mx + a.1 * my
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (self.a11.abs() + self.a12.abs()).max(self.a21.abs() + self.a22.abs())
    }

    pub fn is_finite(&self) -> bool {
        self.a11.is_finite() && self.a12.is_finite() && self.a21.is_finite() && self.a22.is_finite()
    }
}
