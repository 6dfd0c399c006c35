use std::path::Path;

use std::fs::File;
use std::io::BufWriter;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder, ImageReader, Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::field::{GridSpec, ScalarField};
use crate::levelset::CurvePolyline;

/// Colour used for curves drawn by [`write_overlay_ppm`].
pub const OVERLAY_COLOR: [u8; 3] = [255, 0, 0];

fn image_err(e: image::ImageError) -> Error {
    match e {
        image::ImageError::IoError(io) => Error::Io(io),
        other => Error::Parse(other.to_string()),
    }
}

/// Linear map of `[min, max]` onto `0..=255`; a constant field maps to 0.
fn gray_levels(f: &ScalarField) -> Vec<u8> {
    let (lo, hi) = f.min_max();
    let span = hi - lo;
    f.values()
        .iter()
        .map(|&v| if span > 0.0 { ((v - lo) / span * 255.0).round() as u8 } else { 0 })
        .collect()
}

fn dims(g: &GridSpec) -> Result<(u32, u32)> {
    let w = u32::try_from(g.width).map_err(|_| Error::arg("grid too wide for an image"))?;
    let h = u32::try_from(g.height).map_err(|_| Error::arg("grid too tall for an image"))?;
    Ok((w, h))
}

/// Binary 8-bit PGM (P5), min..max stretched to 0..255. Image row `r` is
/// grid row `j = r`.
pub fn write_pgm(path: &Path, f: &ScalarField) -> Result<()> {
    let (w, h) = dims(f.grid())?;
    encode(path, PnmSubtype::Graymap(SampleEncoding::Binary), &gray_levels(f), w, h, ExtendedColorType::L8)
}

/// Read a plain (P2) or binary (P5) PGM; values are scaled to `[0, 1]` by
/// the file's maxval.
pub fn read_pgm(path: &Path, spacing: f64) -> Result<ScalarField> {
    let img = ImageReader::open(path)?
        .with_guessed_format()?
        .decode()
        .map_err(image_err)?;
    let grid = GridSpec::new(img.width() as usize, img.height() as usize, spacing)?;
    let values = match img {
        image::DynamicImage::ImageLuma8(g) => g.into_raw().into_iter().map(|v| f64::from(v) / 255.0).collect(),
        image::DynamicImage::ImageLuma16(g) => g.into_raw().into_iter().map(|v| f64::from(v) / 65535.0).collect(),
        other => return Err(Error::Parse(format!("expected a grayscale image, found {:?}", other.color()))),
    };
    ScalarField::new(grid, values)
}

/// Grayscale rendering of `background` with `curves` drawn on top.
pub fn write_overlay_ppm(path: &Path, background: &ScalarField, curves: &[CurvePolyline]) -> Result<()> {
    let g = *background.grid();
    let (w, h) = dims(&g)?;
    let mut img = RgbImage::new(w, h);
    for (k, v) in gray_levels(background).into_iter().enumerate() {
        img.put_pixel((k % g.width) as u32, (k / g.width) as u32, Rgb([v, v, v]));
    }
    let mut plot = |x: f64, y: f64| {
        let (i, j) = ((x / g.spacing).round(), (y / g.spacing).round());
        if i >= 0.0 && j >= 0.0 && (i as usize) < g.width && (j as usize) < g.height {
            img.put_pixel(i as u32, j as u32, Rgb(OVERLAY_COLOR));
        }
    };
    for c in curves {
        let n = c.vertices.len();
        for k in 0..n {
            let (a, b) = (c.vertices[k], c.vertices[(k + 1) % n]);
            let steps = ((b[0] - a[0]).hypot(b[1] - a[1]) / (0.25 * g.spacing)).ceil().max(1.0) as usize;
            for s in 0..=steps {
                let t = s as f64 / steps as f64;
                plot(a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]));
            }
        }
    }
    encode(path, PnmSubtype::Pixmap(SampleEncoding::Binary), img.as_raw(), w, h, ExtendedColorType::Rgb8)
}

fn encode(path: &Path, subtype: PnmSubtype, buf: &[u8], w: u32, h: u32, color: ExtendedColorType) -> Result<()> {
    let out = BufWriter::new(File::create(path)?);
    PnmEncoder::new(out).with_subtype(subtype).write_image(buf, w, h, color).map_err(image_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip_scales_to_unit_range() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pgm");
        let f = ScalarField::from_fn(GridSpec::new(6, 4, 1.0).unwrap(), |x, y| 2.0 + x + 6.0 * y);
        write_pgm(&p, &f).unwrap();
        assert!(std::fs::read(&p).unwrap().starts_with(b"P5"));
        let back = read_pgm(&p, 1.0).unwrap();
        assert_eq!(back.grid().width, 6);
        assert_eq!(back.grid().height, 4);
        assert_eq!(back.at(0, 0), 0.0);
        assert_eq!(back.at(5, 3), 1.0);
        // linear: every value within half a gray level of the exact ramp
        let (lo, hi) = f.min_max();
        for (a, b) in back.values().iter().zip(f.values()) {
            assert!((a - (b - lo) / (hi - lo)).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }

    #[test]
    fn plain_pgm_is_read() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p2.pgm");
        std::fs::write(&p, "P2\n# comment\n3 3\n10\n0 5 10\n10 5 0\n2 2 2\n").unwrap();
        let f = read_pgm(&p, 1.0).unwrap();
        assert_eq!(f.grid().width, 3);
        let expect = [0.0, 0.5, 1.0, 1.0, 0.5, 0.0, 0.2, 0.2, 0.2];
        for (a, b) in f.values().iter().zip(expect) {
            assert!((a - b).abs() < 1.0 / 255.0, "{a} vs {b}");
        }
    }

    #[test]
    fn constant_field_writes_black() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.pgm");
        write_pgm(&p, &ScalarField::constant(GridSpec::square(3), 4.0)).unwrap();
        assert!(read_pgm(&p, 1.0).unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn overlay_marks_curve_pixels() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("o.ppm");
        let bg = ScalarField::constant(GridSpec::square(32), 0.0);
        write_overlay_ppm(&p, &bg, &[CurvePolyline::circle(16.0, 16.0, 8.0, 40)]).unwrap();
        let img = ImageReader::open(&p).unwrap().with_guessed_format().unwrap().decode().unwrap().to_rgb8();
        assert_eq!(img.get_pixel(24, 16).0, OVERLAY_COLOR);
        assert_eq!(img.get_pixel(16, 16).0, [0, 0, 0]);
        let marked = img.pixels().filter(|p| p.0 == OVERLAY_COLOR).count();
        assert!(marked > 40 && marked < 120, "{marked}");
    }
}
