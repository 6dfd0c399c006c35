//! Marching squares over the zero level of a grid function.
//!
//! The grid is conceptually padded with a ring of "outside" ghost nodes so
//! every contour closes; a crossing between a real node and a ghost is
//! placed on the real node. Segments are oriented with the interior
//! (`phi < 0`) on the left, which makes every chain counter-clockwise.

use std::collections::HashMap;

use super::curve::{norm, rot_ccw, CurvePolyline, Point};
use crate::field::{bilerp, node_gradient, GridSpec, ScalarField};

struct Padded<'a> {
    grid: &'a GridSpec,
    phi: &'a [f64],
}

impl Padded<'_> {
    /// Padded dimensions.
    fn dims(&self) -> (usize, usize) {
        (self.grid.width + 2, self.grid.height + 2)
    }

    fn is_ghost(&self, pi: usize, pj: usize) -> bool {
        pi == 0 || pj == 0 || pi == self.grid.width + 1 || pj == self.grid.height + 1
    }

    fn value(&self, pi: usize, pj: usize) -> f64 {
        if self.is_ghost(pi, pj) {
            f64::INFINITY
        } else {
            self.phi[self.grid.index(pi - 1, pj - 1)]
        }
    }

    fn inside(&self, pi: usize, pj: usize) -> bool {
        self.value(pi, pj) < 0.0
    }

    fn position(&self, pi: usize, pj: usize) -> Point {
        let h = self.grid.spacing;
        [(pi as f64 - 1.0) * h, (pj as f64 - 1.0) * h]
    }

    /// Crossing point on the edge between padded nodes `a` and `b`, exactly
    /// one of which is inside.
    fn crossing(&self, a: (usize, usize), b: (usize, usize)) -> Point {
        let (inn, out) = if self.inside(a.0, a.1) { (a, b) } else { (b, a) };
        if self.is_ghost(out.0, out.1) {
            return self.position(inn.0, inn.1);
        }
        let vi = self.value(inn.0, inn.1);
        let vo = self.value(out.0, out.1);
        let t = vi / (vi - vo);
        let pa = self.position(inn.0, inn.1);
        let pb = self.position(out.0, out.1);
        [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]
    }
}

/// Edge identifier in padded coordinates: horizontal edges `(i,j)-(i+1,j)`
/// are even, vertical edges `(i,j)-(i,j+1)` odd.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct EdgeId(usize);

fn h_edge(pw: usize, i: usize, j: usize) -> EdgeId {
    EdgeId(2 * (j * pw + i))
}

fn v_edge(pw: usize, i: usize, j: usize) -> EdgeId {
    EdgeId(2 * (j * pw + i) + 1)
}

fn edge_nodes(pw: usize, e: EdgeId) -> ((usize, usize), (usize, usize)) {
    let base = e.0 / 2;
    let (i, j) = (base % pw, base / pw);
    if e.0 % 2 == 0 {
        ((i, j), (i + 1, j))
    } else {
        ((i, j), (i, j + 1))
    }
}

/// Directed zero-level segments as (from, to) edge pairs.
fn oriented_segments(p: &Padded) -> Vec<(EdgeId, EdgeId)> {
    let (pw, ph) = p.dims();
    let mut segs = Vec::new();
    for cj in 0..ph - 1 {
        for ci in 0..pw - 1 {
            // Corners counter-clockwise and the edge leaving each corner.
            let corners = [(ci, cj), (ci + 1, cj), (ci + 1, cj + 1), (ci, cj + 1)];
            let ins = corners.map(|(a, b)| p.inside(a, b));
            let count = ins.iter().filter(|&&b| b).count();
            if count == 0 || count == 4 {
                continue;
            }
            let edges = [
                h_edge(pw, ci, cj),
                v_edge(pw, ci + 1, cj),
                h_edge(pw, ci, cj + 1),
                v_edge(pw, ci, cj),
            ];
            // Edge k runs from corner k to corner k+1.
            let leaving: Vec<usize> = (0..4).filter(|&k| ins[k] && !ins[(k + 1) % 4]).collect();
            let entering: Vec<usize> = (0..4).filter(|&k| !ins[k] && ins[(k + 1) % 4]).collect();
            if leaving.len() == 1 {
                segs.push((edges[leaving[0]], edges[entering[0]]));
                continue;
            }
            // Saddle: the cell-centre sample decides the connectivity.
            let centre: f64 = corners.iter().map(|&(a, b)| p.value(a, b)).sum::<f64>() / 4.0;
            for &k in &leaving {
                let to = if centre < 0.0 { (k + 1) % 4 } else { (k + 3) % 4 };
                segs.push((edges[k], edges[to]));
            }
        }
    }
    segs
}

/// Closed vertex chains of the zero level set, counter-clockwise.
pub(crate) fn zero_chains(phi: &ScalarField) -> Vec<Vec<Point>> {
    let grid = phi.grid();
    let p = Padded { grid, phi: phi.values() };
    let (pw, _) = p.dims();
    let segs = oriented_segments(&p);
    let next: HashMap<EdgeId, EdgeId> = segs.iter().copied().collect();
    let mut used: HashMap<EdgeId, bool> = segs.iter().map(|&(a, _)| (a, false)).collect();

    let mut chains = Vec::new();
    for &(start, _) in &segs {
        if used[&start] {
            continue;
        }
        let mut chain = Vec::new();
        let mut e = start;
        loop {
            *used.get_mut(&e).expect("edge registered") = true;
            let (a, b) = edge_nodes(pw, e);
            let pt = p.crossing(a, b);
            if chain.last().map_or(true, |q: &Point| norm([q[0] - pt[0], q[1] - pt[1]]) > 1e-12) {
                chain.push(pt);
            }
            match next.get(&e) {
                Some(&n) if n != start => e = n,
                _ => break,
            }
        }
        while chain.len() > 1 && norm([chain[0][0] - chain[chain.len() - 1][0], chain[0][1] - chain[chain.len() - 1][1]]) <= 1e-12 {
            chain.pop();
        }
        if chain.len() >= 3 {
            chains.push(chain);
        }
    }
    chains
}

/// Gradient of `phi` at a world point, interpolated from nodal central
/// differences. Points are clamped into the grid.
pub(crate) fn phi_gradient_at(phi: &ScalarField, x: f64, y: f64) -> (f64, f64) {
    let g = phi.grid();
    let (xm, ym) = g.extent();
    let (x, y) = (x.clamp(0.0, xm), y.clamp(0.0, ym));
    let (i, j, tx, ty) = g.locate(x, y, (0, 0), (g.width - 2, g.height - 2));
    let v = phi.values();
    let g00 = node_gradient(v, g, i, j);
    let g10 = node_gradient(v, g, i + 1, j);
    let g01 = node_gradient(v, g, i, j + 1);
    let g11 = node_gradient(v, g, i + 1, j + 1);
    (
        bilerp(g00.0, g10.0, g01.0, g11.0, tx, ty),
        bilerp(g00.1, g10.1, g01.1, g11.1, tx, ty),
    )
}

/// Extract every closed zero contour with frames: `N = grad(phi)/|grad(phi)|`
/// sampled at the vertex and `T = R N`.
pub fn extract_curves(phi: &ScalarField) -> Vec<CurvePolyline> {
    zero_chains(phi)
        .into_iter()
        .map(|vertices| {
            let n = vertices.len();
            let normals: Vec<Point> = (0..n)
                .map(|k| {
                    let v = vertices[k];
                    let (gx, gy) = phi_gradient_at(phi, v[0], v[1]);
                    let l = gx.hypot(gy);
                    if l > 1e-12 {
                        [gx / l, gy / l]
                    } else {
                        // Flat gradient: fall back to the polygon normal.
                        let a = vertices[(k + n - 1) % n];
                        let b = vertices[(k + 1) % n];
                        let d = [b[0] - a[0], b[1] - a[1]];
                        let dl = norm(d).max(f64::MIN_POSITIVE);
                        [d[1] / dl, -d[0] / dl]
                    }
                })
                .collect();
            let tangents = normals.iter().map(|&nn| rot_ccw(nn)).collect();
            CurvePolyline { vertices, normals, tangents, closed: true }
        })
        .collect()
}
