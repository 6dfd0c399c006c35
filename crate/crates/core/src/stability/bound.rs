use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::flows::{FlowSpec, PreparedField};
use crate::levelset::Point;
use crate::marker::{marker_step, MarkerCurve};

/// Floor applied to the estimated Lipschitz constant.
pub const LIPSCHITZ_FLOOR: f64 = 1e-6;

/// `d0 e^{L t} + (mu / L)(e^{L t} - 1)`.
pub fn gronwall_bound(d0: f64, l: f64, mu: f64, t: f64) -> f64 {
    let e = (l * t).exp();
    d0 * e + mu / l * (e - 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub lipschitz_l: f64,
    pub mu: f64,
    pub epsilon: f64,
    pub dt: f64,
    pub times: Vec<f64>,
    /// `max_p |C(p, t) - S(p, t)|`.
    pub divergence: Vec<f64>,
    pub bound: Vec<f64>,
    /// Set when a step-size violation ended the run before `steps`.
    pub stopped_early: Option<String>,
}

impl BoundReport {
    pub fn holds(&self) -> bool {
        self.divergence.iter().zip(&self.bound).all(|(d, b)| d <= b)
    }
}

fn velocities(p: &PreparedField, c: &MarkerCurve) -> Result<Vec<Point>> {
    let beta = p.curve_speed(c.curve())?;
    Ok(beta.iter().zip(c.normals()).map(|(b, n)| [b * n[0], b * n[1]]).collect())
}

fn sup_distance(a: &[Point], b: &[Point]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p[0] - q[0]).hypot(p[1] - q[1]))
        .fold(0.0, f64::max)
}

/// Evolve `C` under the equilibrium flow `<R F, N> N` and `S` under the same
/// flow plus `G = eps <F, N> N`, both from `c0` with shared vertex
/// identity, and tabulate their divergence against the Gronwall bound.
///
/// `L` is the largest quotient `max_p |f(C)(p) - f(S)(p)| / max_p |C(p) - S(p)|`
/// seen during the run, where `f` is the unperturbed velocity; `mu` is the
/// largest `|G|` at any vertex of `S`.
pub fn divergence_bound_check(
    f: &VectorField,
    epsilon: f64,
    c0: &MarkerCurve,
    dt: f64,
    steps: usize,
) -> Result<BoundReport> {
    if !(dt > 0.0) {
        return Err(Error::arg(format!("dt must be positive, got {dt}")));
    }
    let base = PreparedField::new(FlowSpec::equilibrium(), f)?;
    let perturbed = PreparedField::new(FlowSpec::modified_equilibrium(epsilon), f)?;

    let (mut c, mut s) = (c0.clone(), c0.clone());
    let mut divergence = vec![0.0];
    let mut quotient_max = 0.0f64;
    let mut mu = 0.0f64;
    let mut stopped_early = None;
    for _ in 0..steps {
        let fc = velocities(&base, &c)?;
        let fs = velocities(&base, &s)?;
        let vs = velocities(&perturbed, &s)?;
        for (a, b) in vs.iter().zip(&fs) {
            mu = mu.max((a[0] - b[0]).hypot(a[1] - b[1]));
        }
        let d = sup_distance(c.vertices(), s.vertices());
        if d > 0.0 {
            quotient_max = quotient_max.max(sup_distance(&fc, &fs) / d);
        }
        let zeros = vec![0.0; c.len()];
        let bc = base.curve_speed(c.curve())?;
        let bs = perturbed.curve_speed(s.curve())?;
        let next = marker_step(&c, &zeros, &bc, dt).and_then(|nc| Ok((nc, marker_step(&s, &zeros, &bs, dt)?)));
        match next {
            Ok((nc, ns)) => {
                c = nc;
                s = ns;
            }
            Err(Error::Argument(msg)) => {
                stopped_early = Some(msg);
                break;
            }
            Err(e) => return Err(e),
        }
        divergence.push(sup_distance(c.vertices(), s.vertices()));
    }
    // the quotient at the final state also bounds the last step's growth
    let l = quotient_max.max(LIPSCHITZ_FLOOR);
    let d0 = divergence[0];
    let times: Vec<f64> = (0..divergence.len()).map(|k| k as f64 * dt).collect();
    let bound = times.iter().map(|&t| gronwall_bound(d0, l, mu, t)).collect();
    Ok(BoundReport { lipschitz_l: l, mu, epsilon, dt, times, divergence, bound, stopped_early })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{gradient, make_ring_field, GridSpec};

    #[test]
    fn formula_value() {
        assert!((gronwall_bound(0.0, 1.0, 0.1, 1.0) - 0.1 * (std::f64::consts::E - 1.0)).abs() < 1e-15);
        assert!((gronwall_bound(0.0, 1.0, 0.1, 1.0) - 0.1718).abs() < 1e-4);
        assert_eq!(gronwall_bound(2.0, 0.5, 0.0, 0.0), 2.0);
    }

    fn ring() -> (VectorField, MarkerCurve) {
        let g = make_ring_field(GridSpec::square(96), 48.0, 48.0, 20.0, 3.0).unwrap();
        let c0 = MarkerCurve::new(crate::levelset::CurvePolyline::ellipse(48.0, 47.0, 22.0, 17.0, 120).vertices).unwrap();
        (gradient(&g), c0)
    }

    #[test]
    fn zero_epsilon_control() {
        let (f, c0) = ring();
        let r = divergence_bound_check(&f, 0.0, &c0, 0.05, 100).unwrap();
        assert_eq!(r.divergence.len(), 101);
        assert!(r.divergence.iter().all(|&d| d == 0.0));
        assert!(r.bound.iter().all(|&b| b == 0.0));
        assert_eq!(r.mu, 0.0);
    }

    #[test]
    fn bound_dominates_divergence() {
        let (f, c0) = ring();
        let r = divergence_bound_check(&f, 0.1, &c0, 0.05, 200).unwrap();
        assert!(r.stopped_early.is_none());
        assert!(r.mu > 0.0 && r.lipschitz_l >= LIPSCHITZ_FLOOR);
        assert!(r.divergence.last().unwrap() > &0.0);
        assert!(r.holds());
    }
}
