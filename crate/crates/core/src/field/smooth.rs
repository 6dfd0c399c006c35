use super::ScalarField;
use crate::error::{Error, Result};

/// Normalized 1-D Gaussian taps for standard deviation `sigma` (in cells),
/// truncated at radius `ceil(3 sigma)`.
pub(crate) fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= s);
    k
}

fn convolve_line(src: &[f64], dst: &mut [f64], kernel: &[f64]) {
    let n = src.len() as i64;
    let r = (kernel.len() / 2) as i64;
    for (p, out) in dst.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (t, w) in kernel.iter().enumerate() {
            // Replicate the edge sample beyond the boundary.
            let q = (p as i64 + t as i64 - r).clamp(0, n - 1);
            acc += w * src[q as usize];
        }
        *out = acc;
    }
}

/// Separable Gaussian blur. `sigma` is in world units and converted to
/// cells with the grid spacing. `sigma == 0` returns the input unchanged.
pub fn gaussian_smooth(f: &ScalarField, sigma: f64) -> Result<ScalarField> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::arg(format!("sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(f.clone());
    }
    let g = *f.grid();
    let kernel = gaussian_kernel(sigma / g.spacing);

    let (w, h) = (g.width, g.height);
    let src = f.values();
    let mut tmp = vec![0.0; g.len()];
    for j in 0..h {
        convolve_line(&src[j * w..(j + 1) * w], &mut tmp[j * w..(j + 1) * w], &kernel);
    }
    let mut out = vec![0.0; g.len()];
    let mut col = vec![0.0; h];
    let mut col_out = vec![0.0; h];
    for i in 0..w {
        for j in 0..h {
            col[j] = tmp[j * w + i];
        }
        convolve_line(&col, &mut col_out, &kernel);
        for j in 0..h {
            out[j * w + i] = col_out[j];
        }
    }
    Ok(ScalarField::from_raw(g, out))
}
