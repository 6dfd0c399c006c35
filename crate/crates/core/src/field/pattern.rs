//! Synthetic test images.

use serde::{Deserialize, Serialize};

use super::{gaussian_smooth, GridSpec, ScalarField};
use crate::error::{Error, Result};

/// Gaussian ridge `exp(-(r - r0)^2 / (2 sigma^2))` around `(cx, cy)`.
pub fn make_ring_field(grid: GridSpec, cx: f64, cy: f64, r0: f64, sigma: f64) -> Result<ScalarField> {
    if !(r0 > 0.0) || !(sigma > 0.0) {
        return Err(Error::arg("ring field needs r0 > 0 and sigma > 0"));
    }
    Ok(ScalarField::from_fn(grid, |x, y| {
        let r = (x - cx).hypot(y - cy);
        let d = r - r0;
        (-d * d / (2.0 * sigma * sigma)).exp()
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disk {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
}

/// Sum of disk indicators plus the linear ramp `gx x + gy y`, then blurred.
pub fn make_disk_pattern(
    grid: GridSpec,
    disks: &[Disk],
    blur_sigma: f64,
    ramp: (f64, f64),
) -> Result<ScalarField> {
    for d in disks {
        if !(d.radius > 0.0) || !grid.contains(d.cx, d.cy) {
            return Err(Error::arg(format!("disk {d:?} is not inside the domain")));
        }
    }
    let raw = ScalarField::from_fn(grid, |x, y| {
        let inside = disks
            .iter()
            .filter(|d| (x - d.cx).hypot(y - d.cy) <= d.radius)
            .count() as f64;
        inside + ramp.0 * x + ramp.1 * y
    });
    gaussian_smooth(&raw, blur_sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::gradient;

    #[test]
    fn ring_field_values() {
        let grid = GridSpec::square(64);
        let g = make_ring_field(grid, 32.0, 32.0, 10.0, 3.0).unwrap();
        assert_eq!(g.sample(42.0, 32.0).unwrap(), 1.0);
        assert!((g.sample(45.0, 32.0).unwrap() - (-0.5f64).exp()).abs() < 1e-15);
        assert!((g.sample(32.0, 39.0).unwrap() - (-0.5f64).exp()).abs() < 1e-15);
        assert_eq!(g.sample(40.0, 32.0).unwrap(), g.sample(32.0, 40.0).unwrap());
        assert!(make_ring_field(grid, 1.0, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn empty_pattern_is_zero() {
        let p = make_disk_pattern(GridSpec::square(16), &[], 2.0, (0.0, 0.0)).unwrap();
        assert!(p.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unblurred_disk_is_binary() {
        let grid = GridSpec::square(32);
        let p = make_disk_pattern(grid, &[Disk { cx: 16.0, cy: 16.0, radius: 6.0 }], 0.0, (0.0, 0.0))
            .unwrap();
        assert!(p.values().iter().all(|&v| v == 0.0 || v == 1.0));
        assert_eq!(p.at(16, 16), 1.0);
        assert_eq!(p.at(2, 2), 0.0);
    }

    #[test]
    fn three_disk_edge_indicator_has_ring_ridges_and_ramp_background() {
        let grid = GridSpec::square(128);
        let disks = [
            Disk { cx: 32.0, cy: 32.0, radius: 15.0 },
            Disk { cx: 96.0, cy: 40.0, radius: 15.0 },
            Disk { cx: 64.0, cy: 96.0, radius: 15.0 },
        ];
        let img = make_disk_pattern(grid, &disks, 2.0, (0.002, 0.001)).unwrap();
        let g = gradient(&img).magnitude();
        let ramp = 0.002f64.hypot(0.001);
        // Far from every disk the indicator is the ramp slope.
        assert!((g.at(64, 40) - ramp).abs() < 1e-6);
        assert!((g.at(10, 120) - ramp).abs() < 1e-6);
        // Along the horizontal scanline through each center there are two
        // ridges, one on each side, at roughly one radius.
        for d in &disks {
            let j = d.cy as usize;
            let row: Vec<f64> = (0..128).map(|i| g.at(i, j)).collect();
            let peaks: Vec<usize> = (1..127)
                .filter(|&i| row[i] > 0.05 && row[i] >= row[i - 1] && row[i] > row[i + 1])
                .filter(|&i| (i as f64 - d.cx).abs() < 20.0)
                .collect();
            assert_eq!(peaks.len(), 2, "disk {d:?}: {peaks:?}");
            for p in peaks {
                assert!(((p as f64 - d.cx).abs() - d.radius).abs() <= 1.5);
            }
        }
    }
}
