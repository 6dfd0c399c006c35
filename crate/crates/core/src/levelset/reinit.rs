//! Redistancing: replace `phi` by the signed distance to its own zero set.
//!
//! Nodes within a band of the zero contour receive the exact distance to
//! the marching-squares polyline (so the zero set is pinned by the same
//! linear interpolation that extracts it). The remaining nodes are filled
//! by fast sweeping of the eikonal equation `|grad d| = 1`.

use super::contour::zero_chains;
use super::curve::point_segment_distance;
use super::LevelSetFunction;
use crate::error::{Error, Result, Terminal};
use crate::field::ScalarField;

/// Width of the exactly initialised band, in cells.
pub const EXACT_BAND: f64 = 4.0;

const MAX_SWEEP_ROUNDS: usize = 8;

pub fn reinitialize(ls: &LevelSetFunction) -> Result<LevelSetFunction> {
    let phi = &ls.phi;
    let grid = *phi.grid();
    let chains = zero_chains(phi);
    if chains.is_empty() {
        return Err(Error::Terminal(Terminal::Vanished));
    }
    let h = grid.spacing;
    let (w, ht) = (grid.width, grid.height);
    let band = EXACT_BAND * h;

    let mut dist = vec![f64::INFINITY; grid.len()];
    for chain in &chains {
        let n = chain.len();
        for k in 0..n {
            let a = chain[k];
            let b = chain[(k + 1) % n];
            let lo_x = ((a[0].min(b[0]) - band) / h).floor().max(0.0) as usize;
            let hi_x = (((a[0].max(b[0]) + band) / h).ceil().max(0.0) as usize).min(w - 1);
            let lo_y = ((a[1].min(b[1]) - band) / h).floor().max(0.0) as usize;
            let hi_y = (((a[1].max(b[1]) + band) / h).ceil().max(0.0) as usize).min(ht - 1);
            for j in lo_y..=hi_y {
                for i in lo_x..=hi_x {
                    let d = point_segment_distance(grid.world(i, j).into(), a, b);
                    let slot = &mut dist[grid.index(i, j)];
                    if d < *slot {
                        *slot = d;
                    }
                }
            }
        }
    }
    let fixed: Vec<bool> = dist.iter().map(|&d| d <= band).collect();
    for (d, &f) in dist.iter_mut().zip(&fixed) {
        if !f {
            *d = f64::INFINITY;
        }
    }

    fast_sweep(&mut dist, &fixed, w, ht, h);

    let signed = phi
        .values()
        .iter()
        .zip(&dist)
        .map(|(&p, &d)| if p < 0.0 { -d } else { d })
        .collect();
    Ok(LevelSetFunction { phi: ScalarField::from_raw(grid, signed), steps_since_reinit: 0 })
}

/// Godunov upwind update of the unsigned eikonal solution in the four
/// alternating sweep orders, repeated until nothing changes.
fn fast_sweep(d: &mut [f64], fixed: &[bool], w: usize, ht: usize, h: f64) {
    let orders: [(bool, bool); 4] = [(true, true), (false, true), (false, false), (true, false)];
    for _ in 0..MAX_SWEEP_ROUNDS {
        let mut changed = false;
        for &(fwd_x, fwd_y) in &orders {
            for jj in 0..ht {
                let j = if fwd_y { jj } else { ht - 1 - jj };
                for ii in 0..w {
                    let i = if fwd_x { ii } else { w - 1 - ii };
                    let k = j * w + i;
                    if fixed[k] {
                        continue;
                    }
                    let a = match (i > 0, i + 1 < w) {
                        (true, true) => d[k - 1].min(d[k + 1]),
                        (true, false) => d[k - 1],
                        (false, true) => d[k + 1],
                        _ => f64::INFINITY,
                    };
                    let b = match (j > 0, j + 1 < ht) {
                        (true, true) => d[k - w].min(d[k + w]),
                        (true, false) => d[k - w],
                        (false, true) => d[k + w],
                        _ => f64::INFINITY,
                    };
                    if !a.is_finite() && !b.is_finite() {
                        continue;
                    }
                    let cand = if (a - b).abs() >= h {
                        a.min(b) + h
                    } else {
                        0.5 * (a + b + (2.0 * h * h - (a - b) * (a - b)).sqrt())
                    };
                    if cand < d[k] {
                        d[k] = cand;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
}
