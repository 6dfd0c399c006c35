//! Stability of converged curves: the normal-normal Jacobian criterion,
//! perturbation experiments, and the divergence bound for a perturbed flow.

mod bound;

pub use bound::{divergence_bound_check, gronwall_bound, BoundReport};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{gradient, hessian_at, jacobian_at, Mat2, ScalarField, VectorField};
use crate::levelset::{point_polyline_distance, CurvePolyline};
use crate::marker::{evolve_markers, regularize, MarkerCurve, MarkerOptions};

/// Default classification band, relative to the largest `|J|_inf` on the curve.
pub const MARGINAL_TOL_REL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Stable,
    MarginallyStable,
    Unstable,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Stable => "Stable",
            Classification::MarginallyStable => "MarginallyStable",
            Classification::Unstable => "Unstable",
        }
    }
}

/// Unstable if the mean exceeds `tol`; stable if the mean is below `-tol`
/// and no sample exceeds `tol`; marginal otherwise.
pub fn classify(mean: f64, _min: f64, max: f64, tol: f64) -> Classification {
    if mean > tol {
        Classification::Unstable
    } else if mean < -tol && max < tol {
        Classification::Stable
    } else {
        Classification::MarginallyStable
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// `N^T J N` at each vertex that could be evaluated.
    pub samples: Vec<f64>,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub classification: Classification,
    pub marginal_tol: f64,
    /// Vertices skipped for lying within one cell of the boundary.
    pub clipped: usize,
}

fn jnn_samples(f: &VectorField, c: &CurvePolyline) -> Result<(Vec<f64>, f64, usize)> {
    if c.vertices.is_empty() {
        return Err(Error::arg("empty curve"));
    }
    let mut samples = Vec::with_capacity(c.vertices.len());
    let mut jmax = 0.0f64;
    let mut clipped = 0;
    for (v, n) in c.vertices.iter().zip(&c.normals) {
        match jacobian_at(f, v[0], v[1]) {
            Ok(j) => {
                jmax = jmax.max(j.inf_norm());
                samples.push(j.quad_form((n[0], n[1])));
            }
            Err(Error::Domain { .. }) => clipped += 1,
            Err(e) => return Err(e),
        }
    }
    if samples.is_empty() {
        return Err(Error::arg("no curve vertex lies inside the grid interior"));
    }
    Ok((samples, jmax, clipped))
}

fn assemble(samples: Vec<f64>, marginal_tol: f64, clipped: usize) -> StabilityReport {
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let (min, max) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| (lo.min(s), hi.max(s)));
    StabilityReport {
        classification: classify(mean, min, max, marginal_tol),
        samples,
        mean,
        min,
        max,
        marginal_tol,
        clipped,
    }
}

/// `N^T J[F] N` along the curve with the default tolerance band.
pub fn jnn_along_curve(f: &VectorField, c: &CurvePolyline) -> Result<StabilityReport> {
    let (samples, jmax, clipped) = jnn_samples(f, c)?;
    Ok(assemble(samples, MARGINAL_TOL_REL * jmax, clipped))
}

/// As [`jnn_along_curve`] with an explicit classification band.
pub fn jnn_along_curve_with_tol(f: &VectorField, c: &CurvePolyline, marginal_tol: f64) -> Result<StabilityReport> {
    if !(marginal_tol >= 0.0) {
        return Err(Error::arg(format!("marginal_tol must be >= 0, got {marginal_tol}")));
    }
    let (samples, _, clipped) = jnn_samples(f, c)?;
    Ok(assemble(samples, marginal_tol, clipped))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalityReport {
    /// Mean `|N^T J N|` of the rotated field; `None` when no vertex qualified.
    pub mean_abs_jnn: Option<f64>,
    pub valid: usize,
    /// Vertices in zero-gradient zones or too close to the boundary.
    pub skipped: usize,
}

/// Mean `|J_nn|` of the rotated, normalized gradient `R grad g / |grad g|`
/// along `c_star`.
pub fn ef_marginality_check(g: &ScalarField, c_star: &CurvePolyline) -> Result<MarginalityReport> {
    ef_marginality(g, c_star, true)
}

/// As [`ef_marginality_check`], optionally without normalizing the gradient.
pub fn ef_marginality(g: &ScalarField, c_star: &CurvePolyline, normalize: bool) -> Result<MarginalityReport> {
    let grad = gradient(g);
    let floor = crate::flows::NORMALIZATION_FLOOR * grad.max_norm();
    let field = if normalize { grad.normalized(floor) } else { grad.clone() };
    let rotated = field.transformed(&Mat2::rotation_ccw());
    let (mut total, mut valid, mut skipped) = (0.0, 0usize, 0usize);
    for (v, n) in c_star.vertices.iter().zip(&c_star.normals) {
        let (gx, gy) = match grad.sample(v[0], v[1]) {
            Ok(s) => s,
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        if floor == 0.0 || gx.hypot(gy) <= floor {
            skipped += 1;
            continue;
        }
        match jacobian_at(&rotated, v[0], v[1]) {
            Ok(j) => {
                total += j.quad_form((n[0], n[1])).abs();
                valid += 1;
            }
            Err(Error::Domain { .. }) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(MarginalityReport {
        mean_abs_jnn: (valid > 0).then(|| total / valid as f64),
        valid,
        skipped,
    })
}

/// Largest `<H[g] N, N>` along a curve; non-positive at a converged
/// gradient-ascent curve.
pub fn hessian_sign_check(g: &ScalarField, c_star: &CurvePolyline) -> Result<f64> {
    if c_star.vertices.is_empty() {
        return Err(Error::arg("empty curve"));
    }
    let mut worst = f64::NEG_INFINITY;
    for (v, n) in c_star.vertices.iter().zip(&c_star.normals) {
        match hessian_at(g, v[0], v[1]) {
            Ok(hm) => worst = worst.max(hm.quad_form((n[0], n[1]))),
            Err(Error::Domain { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    if worst == f64::NEG_INFINITY {
        return Err(Error::arg("no curve vertex lies inside the grid interior"));
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationTrace {
    /// Mean vertex-to-polyline distance from iterate `k` to the reference.
    pub eta_norms: Vec<f64>,
    /// Mean distance of each vertex from its own reference position.
    pub eta_vertex: Vec<f64>,
    /// Least-squares geometric ratio of `eta_norms`.
    pub fitted_factor: f64,
    /// Same fit applied to `eta_vertex`.
    pub fitted_factor_vertex: f64,
    /// `|1 + dt J_nn|` with the mean `J_nn` of the reference curve.
    pub predicted_factor: f64,
    pub jnn_mean: f64,
    pub dt: f64,
}

/// Slope of `log eta_k` against `k` by least squares, exponentiated.
/// Only the leading run of positive values is used.
pub fn fit_geometric_factor(eta: &[f64]) -> f64 {
    let ys: Vec<f64> = eta.iter().take_while(|&&e| e > 0.0).map(|e| e.ln()).collect();
    let n = ys.len();
    if n < 2 {
        return f64::NAN;
    }
    let xm = (n - 1) as f64 / 2.0;
    let ym = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (k, y) in ys.iter().enumerate() {
        let dx = k as f64 - xm;
        sxy += dx * (y - ym);
        sxx += dx * dx;
    }
    (sxy / sxx).exp()
}

/// Push every vertex of `c_star` outward by `amplitude`, evolve with
/// `beta = <F, N>` and step `dt`, and measure how the offset evolves.
/// A curve with spacing outside `[0.5 h, 2 h]` is first resampled to `h`
/// (see [`regularize`]); the resampled curve is the reference.
pub fn perturbation_decay(
    f: &VectorField,
    c_star: &CurvePolyline,
    amplitude: f64,
    dt: f64,
    iters: usize,
) -> Result<PerturbationTrace> {
    let grid = f.grid();
    if !(amplitude > 0.0 && amplitude <= 2.0 * grid.spacing) {
        return Err(Error::arg(format!("amplitude must lie in (0, 2h], got {amplitude}")));
    }
    if !(dt > 0.0) || iters == 0 {
        return Err(Error::arg("dt and iteration count must be positive"));
    }
    let c_star = regularize(c_star, grid.spacing)?.into_curve();
    let c_star = &c_star;
    let report = jnn_along_curve(f, c_star)?;
    let displaced: Vec<_> = c_star
        .vertices
        .iter()
        .zip(&c_star.normals)
        .map(|(v, n)| [v[0] + amplitude * n[0], v[1] + amplitude * n[1]])
        .collect();
    if displaced.iter().any(|v| !grid.contains(v[0], v[1])) {
        return Err(Error::arg("perturbed curve leaves the domain"));
    }
    let reference = &c_star.vertices;
    let measure = |c: &MarkerCurve| -> (f64, f64) {
        let n = c.len() as f64;
        let to_curve = c.vertices().iter().map(|&p| point_polyline_distance(p, reference)).sum::<f64>() / n;
        let to_vertex = c
            .vertices()
            .iter()
            .zip(reference)
            .map(|(p, q)| (p[0] - q[0]).hypot(p[1] - q[1]))
            .sum::<f64>()
            / n;
        (to_curve, to_vertex)
    };

    let spec = crate::flows::FlowSpec::gradient_descent();
    let prepared = crate::flows::PreparedField::new(spec, f)?;
    let opts = MarkerOptions { h: grid.spacing, resample: false };
    let mut c = MarkerCurve::new(displaced)?;
    let (mut eta_norms, mut eta_vertex) = (Vec::with_capacity(iters + 1), Vec::with_capacity(iters + 1));
    let (a, b) = measure(&c);
    eta_norms.push(a);
    eta_vertex.push(b);
    for _ in 0..iters {
        c = evolve_markers(
            &c,
            1,
            dt,
            |m: &MarkerCurve, _t: f64| Ok((vec![0.0; m.len()], prepared.curve_speed(m.curve())?)),
            opts,
        )?;
        let (a, b) = measure(&c);
        eta_norms.push(a);
        eta_vertex.push(b);
    }
    Ok(PerturbationTrace {
        fitted_factor: fit_geometric_factor(&eta_norms),
        fitted_factor_vertex: fit_geometric_factor(&eta_vertex),
        predicted_factor: (1.0 + dt * report.mean).abs(),
        jnn_mean: report.mean,
        eta_norms,
        eta_vertex,
        dt,
    })
}
