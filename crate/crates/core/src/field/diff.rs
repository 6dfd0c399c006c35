//! Finite-difference operators: central differences in the interior,
//! one-sided at the boundary.

use super::{bilerp, GridSpec, Mat2, ScalarField, VectorField};
use crate::error::{Error, Result};

#[inline]
fn d_axis(values: &[f64], g: &GridSpec, i: usize, j: usize, along_x: bool) -> f64 {
    let h = g.spacing;
    let (n, pos) = if along_x { (g.width, i) } else { (g.height, j) };
    let at = |p: usize| {
        if along_x {
            values[g.index(p, j)]
        } else {
            values[g.index(i, p)]
        }
    };
    if pos == 0 {
        (at(1) - at(0)) / h
    } else if pos == n - 1 {
        (at(n - 1) - at(n - 2)) / h
    } else {
        (at(pos + 1) - at(pos - 1)) / (2.0 * h)
    }
}

/// Gradient of raw grid values at node `(i, j)`.
#[inline]
pub fn node_gradient(values: &[f64], g: &GridSpec, i: usize, j: usize) -> (f64, f64) {
    (d_axis(values, g, i, j, true), d_axis(values, g, i, j, false))
}

/// Second central differences at node `(i, j)`. Boundary nodes reuse the
/// stencil of the nearest interior node. The mixed term uses the four
/// diagonal neighbours, so the result is exactly symmetric.
pub fn node_hessian(values: &[f64], g: &GridSpec, i: usize, j: usize) -> Mat2 {
    let i = i.clamp(1, g.width - 2);
    let j = j.clamp(1, g.height - 2);
    let h2 = g.spacing * g.spacing;
    let v = |a: usize, b: usize| values[g.index(a, b)];
    let c = v(i, j);
    let gxx = (v(i + 1, j) - 2.0 * c + v(i - 1, j)) / h2;
    let gyy = (v(i, j + 1) - 2.0 * c + v(i, j - 1)) / h2;
    let gxy = (v(i + 1, j + 1) - v(i + 1, j - 1) - v(i - 1, j + 1) + v(i - 1, j - 1)) / (4.0 * h2);
    Mat2::new(gxx, gxy, gxy, gyy)
}

pub fn gradient(f: &ScalarField) -> VectorField {
    let g = *f.grid();
    let vals = f.values();
    let mut u = Vec::with_capacity(g.len());
    let mut v = Vec::with_capacity(g.len());
    for j in 0..g.height {
        for i in 0..g.width {
            let (a, b) = node_gradient(vals, &g, i, j);
            u.push(a);
            v.push(b);
        }
    }
    VectorField::from_raw(g, u, v)
}

/// Locate the interpolation cell for an operator that needs every corner
/// node to have a full central stencil.
fn interior_cell(g: &GridSpec, x: f64, y: f64) -> Result<(usize, usize, f64, f64)> {
    if !g.contains_inset(x, y, 1.0) {
        return Err(Error::Domain { x, y });
    }
    let hi = ((g.width - 3).max(1), (g.height - 3).max(1));
    Ok(g.locate(x, y, (1, 1), hi))
}

fn interp_mat(m: [Mat2; 4], tx: f64, ty: f64) -> Mat2 {
    let e = |f: fn(&Mat2) -> f64| bilerp(f(&m[0]), f(&m[1]), f(&m[2]), f(&m[3]), tx, ty);
    Mat2::new(e(|m| m.a11), e(|m| m.a12), e(|m| m.a21), e(|m| m.a22))
}

fn node_jacobian(f: &VectorField, i: usize, j: usize) -> Mat2 {
    let g = f.grid();
    let (ux, uy) = node_gradient(f.u(), g, i, j);
    let (vx, vy) = node_gradient(f.v(), g, i, j);
    Mat2::new(ux, uy, vx, vy)
}

/// Jacobian `J[F]` at an off-grid point, interpolated bilinearly from the
/// nodal central-difference Jacobians. The point must lie at least one cell
/// inside the boundary.
pub fn jacobian_at(f: &VectorField, x: f64, y: f64) -> Result<Mat2> {
    let (i, j, tx, ty) = interior_cell(f.grid(), x, y)?;
    Ok(interp_mat(
        [
            node_jacobian(f, i, j),
            node_jacobian(f, i + 1, j),
            node_jacobian(f, i, j + 1),
            node_jacobian(f, i + 1, j + 1),
        ],
        tx,
        ty,
    ))
}

/// Hessian of `g` at an off-grid point from second central differences.
pub fn hessian_at(f: &ScalarField, x: f64, y: f64) -> Result<Mat2> {
    let g = f.grid();
    let (i, j, tx, ty) = interior_cell(g, x, y)?;
    let v = f.values();
    Ok(interp_mat(
        [
            node_hessian(v, g, i, j),
            node_hessian(v, g, i + 1, j),
            node_hessian(v, g, i, j + 1),
            node_hessian(v, g, i + 1, j + 1),
        ],
        tx,
        ty,
    ))
}
