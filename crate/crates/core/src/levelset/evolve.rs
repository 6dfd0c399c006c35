use rayon::prelude::*;

use super::LevelSetFunction;
use crate::error::{Error, Result};
use crate::field::ScalarField;

/// Largest CFL number accepted by [`evolve_step`].
pub const MAX_CFL: f64 = 0.5;

/// One explicit step of `phi_t + beta |grad phi| = 0` with Godunov
/// upwinding chosen by the sign of `beta` at each node. Outside the grid
/// the one-sided differences are taken as zero.
pub fn evolve_step(ls: &LevelSetFunction, speed: &[f64], dt: f64) -> Result<LevelSetFunction> {
    let grid = *ls.phi.grid();
    if speed.len() != grid.len() {
        return Err(Error::arg(format!(
            "speed has {} entries, grid has {}",
            speed.len(),
            grid.len()
        )));
    }
    if speed.iter().any(|b| !b.is_finite()) {
        return Err(Error::arg("speed field has non-finite entries"));
    }
    if !(dt >= 0.0) {
        return Err(Error::arg(format!("time step must be non-negative, got {dt}")));
    }
    let max_speed = speed.iter().fold(0.0f64, |m, b| m.max(b.abs()));
    if dt * max_speed > MAX_CFL * grid.spacing * (1.0 + 1e-12) {
        return Err(Error::arg(format!(
            "CFL violated: dt {dt} * max|beta| {max_speed} > {MAX_CFL} h"
        )));
    }

    let (w, h) = (grid.width, grid.height);
    let inv_h = 1.0 / grid.spacing;
    let phi = ls.phi.values();
    let mut out = vec![0.0; grid.len()];
    out.par_chunks_mut(w).enumerate().for_each(|(j, row)| {
        for (i, o) in row.iter_mut().enumerate() {
            let k = j * w + i;
            let c = phi[k];
            let b = speed[k];
            if b == 0.0 {
                *o = c;
                continue;
            }
            let dxm = if i > 0 { (c - phi[k - 1]) * inv_h } else { 0.0 };
            let dxp = if i + 1 < w { (phi[k + 1] - c) * inv_h } else { 0.0 };
            let dym = if j > 0 { (c - phi[k - w]) * inv_h } else { 0.0 };
            let dyp = if j + 1 < h { (phi[k + w] - c) * inv_h } else { 0.0 };
            let grad = if b > 0.0 {
                (dxm.max(0.0).powi(2) + dxp.min(0.0).powi(2) + dym.max(0.0).powi(2) + dyp.min(0.0).powi(2))
                    .sqrt()
            } else {
                (dxm.min(0.0).powi(2) + dxp.max(0.0).powi(2) + dym.min(0.0).powi(2) + dyp.max(0.0).powi(2))
                    .sqrt()
            };
            *o = c - dt * b * grad;
        }
    });
    Ok(LevelSetFunction {
        phi: ScalarField::from_raw(grid, out),
        steps_since_reinit: ls.steps_since_reinit + 1,
    })
}
