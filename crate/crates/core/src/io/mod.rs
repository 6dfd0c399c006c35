//! File formats: PGM/PPM images and CSV tables.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a
//! value read back is bit-identical to the value written and repeated runs
//! produce identical bytes.

mod pnm;
mod report;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter};
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{GridSpec, ScalarField, VectorField};
use crate::flows::ConvergenceRecord;
use crate::levelset::{CurvePolyline, Point};

pub use pnm::{read_pgm, write_overlay_ppm, write_pgm, OVERLAY_COLOR};
pub use report::{
    read_report_header, write_bound_report, write_perturbation_trace, write_stability_report,
};

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(File::create(path)?)))
}

fn csv_err(e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => unreachable!(),
        }
    } else {
        Error::Parse(e.to_string())
    }
}

fn num(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("not a number: {s:?}")))
}

fn reader(path: &Path, headers: bool) -> Result<csv::Reader<File>> {
    csv::ReaderBuilder::new()
        .has_headers(headers)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)
}

fn expect_header(r: &mut csv::Reader<File>, want: &[&str]) -> Result<()> {
    let got = r.headers().map_err(csv_err)?;
    if got.iter().ne(want.iter().copied()) {
        return Err(Error::Parse(format!("expected columns {want:?}, found {:?}", got.iter().collect::<Vec<_>>())));
    }
    Ok(())
}

/// One CSV line per grid row `j`, `width` values each.
pub fn write_scalar_csv(path: &Path, f: &ScalarField) -> Result<()> {
    let mut w = writer(path)?;
    let width = f.grid().width;
    for row in f.values().chunks(width) {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scalar_csv(path: &Path, spacing: f64) -> Result<ScalarField> {
    let mut r = reader(path, false)?;
    let mut values = Vec::new();
    let mut width = None;
    let mut height = 0;
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        match width {
            None => width = Some(rec.len()),
            Some(w) if w != rec.len() => {
                return Err(Error::Parse(format!("row {height} has {} values, expected {w}", rec.len())))
            }
            _ => {}
        }
        for s in rec.iter() {
            values.push(num(s)?);
        }
        height += 1;
    }
    let width = width.ok_or_else(|| Error::Parse("empty scalar CSV".into()))?;
    ScalarField::new(GridSpec::new(width, height, spacing)?, values)
}

/// Columns `x,y,u,v`, one line per node in row-major order.
pub fn write_vector_csv(path: &Path, f: &VectorField) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["x", "y", "u", "v"]).map_err(csv_err)?;
    let g = *f.grid();
    for j in 0..g.height {
        for i in 0..g.width {
            let (x, y) = g.world(i, j);
            let (u, v) = f.at(i, j);
            w.write_record([x.to_string(), y.to_string(), u.to_string(), v.to_string()]).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Inverse of [`write_vector_csv`]; the grid is recovered from the node
/// coordinates.
pub fn read_vector_csv(path: &Path) -> Result<VectorField> {
    let mut r = reader(path, true)?;
    expect_header(&mut r, &["x", "y", "u", "v"])?;
    let (mut xs, mut ys, mut u, mut v) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != 4 {
            return Err(Error::Parse(format!("expected 4 columns, found {}", rec.len())));
        }
        xs.push(num(&rec[0])?);
        ys.push(num(&rec[1])?);
        u.push(num(&rec[2])?);
        v.push(num(&rec[3])?);
    }
    if xs.is_empty() {
        return Err(Error::Parse("empty vector CSV".into()));
    }
    let width = ys.iter().take_while(|&&y| y == ys[0]).count();
    if xs.len() % width != 0 {
        return Err(Error::Parse(format!("{} nodes do not fill rows of {width}", xs.len())));
    }
    let height = xs.len() / width;
    let spacing = if width > 1 {
        xs[1] - xs[0]
    } else if height > 1 {
        ys[width] - ys[0]
    } else {
        1.0
    };
    let grid = GridSpec::new(width, height, spacing)?;
    for j in 0..height {
        for i in 0..width {
            let (x, y) = grid.world(i, j);
            let k = grid.index(i, j);
            if (xs[k] - x).abs() > 1e-9 * spacing || (ys[k] - y).abs() > 1e-9 * spacing {
                return Err(Error::Parse(format!("node {k} at ({}, {}) is off the grid", xs[k], ys[k])));
            }
        }
    }
    VectorField::new(grid, u, v)
}

pub const CURVE_COLUMNS: [&str; 7] = ["index", "x", "y", "nx", "ny", "tx", "ty"];

/// Columns `index,x,y,nx,ny,tx,ty`. Several curves go into one file one
/// after the other; `index` restarts at 0 for each.
pub fn write_curves_csv(path: &Path, curves: &[CurvePolyline]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(CURVE_COLUMNS).map_err(csv_err)?;
    for c in curves {
        for k in 0..c.len() {
            let (p, n, t) = (c.vertices[k], c.normals[k], c.tangents[k]);
            w.write_record([
                k.to_string(),
                p[0].to_string(),
                p[1].to_string(),
                n[0].to_string(),
                n[1].to_string(),
                t[0].to_string(),
                t[1].to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_curves_csv(path: &Path) -> Result<Vec<CurvePolyline>> {
    let mut r = reader(path, true)?;
    expect_header(&mut r, &CURVE_COLUMNS)?;
    let mut groups: Vec<(Vec<Point>, Vec<Point>)> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != 7 {
            return Err(Error::Parse(format!("expected 7 columns, found {}", rec.len())));
        }
        let index: usize = rec[0].parse().map_err(|_| Error::Parse(format!("bad index {:?}", &rec[0])))?;
        let p = [num(&rec[1])?, num(&rec[2])?];
        let n = [num(&rec[3])?, num(&rec[4])?];
        if index == 0 {
            groups.push((Vec::new(), Vec::new()));
        }
        let g = groups.last_mut().ok_or_else(|| Error::Parse("first row must have index 0".into()))?;
        if index != g.0.len() {
            return Err(Error::Parse(format!("index {index} out of sequence")));
        }
        g.0.push(p);
        g.1.push(n);
    }
    groups.into_iter().map(|(v, n)| CurvePolyline::with_normals(v, n)).collect()
}

pub const CONVERGENCE_COLUMNS: [&str; 6] = ["step", "length", "area", "max_speed", "phase", "outcome"];

/// Every step of every phase in order. `step` counts across phases, so a
/// phase's first row repeats the state of the previous phase's last row.
/// `outcome` is the outcome of the phase the row belongs to.
pub fn write_convergence_csv(path: &Path, records: &[ConvergenceRecord]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(CONVERGENCE_COLUMNS).map_err(csv_err)?;
    let mut step = 0usize;
    for rec in records {
        for (k, s) in rec.steps.iter().enumerate() {
            if k > 0 {
                step += 1;
            }
            w.write_record([
                step.to_string(),
                s.length.to_string(),
                s.area.to_string(),
                s.max_speed.to_string(),
                rec.phase.as_str().to_string(),
                rec.outcome.as_str().to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// First line of a text file, for callers that want to peek at a header.
pub(crate) fn first_line(path: &Path) -> Result<String> {
    let mut line = String::new();
    BufReader::new(File::open(path)?).read_line(&mut line)?;
    Ok(line.trim_end().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::{Outcome, Phase, StepRecord};

    #[test]
    fn scalar_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let f = ScalarField::from_fn(GridSpec::new(5, 3, 0.5).unwrap(), |x, y| (x * 1.1).sin() / 3.0 + y * 1e-17);
        write_scalar_csv(&p, &f).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert_eq!(text.lines().next().unwrap().split(',').count(), 5);
        let back = read_scalar_csv(&p, 0.5).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn ragged_scalar_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        std::fs::write(&p, "1,2,3\n4,5\n").unwrap();
        assert!(matches!(read_scalar_csv(&p, 1.0), Err(Error::Parse(_))));
        std::fs::write(&p, "1,x\n").unwrap();
        assert!(matches!(read_scalar_csv(&p, 1.0), Err(Error::Parse(_))));
    }

    #[test]
    fn vector_round_trip_recovers_grid() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.csv");
        let f = VectorField::from_fn(GridSpec::new(4, 6, 0.25).unwrap(), |x, y| (x - y, x * y / 7.0));
        write_vector_csv(&p, &f).unwrap();
        let back = read_vector_csv(&p).unwrap();
        assert_eq!(back.grid(), f.grid());
        assert_eq!(back, f);
    }

    #[test]
    fn missing_file_is_io_error() {
        let r = read_vector_csv(Path::new("/nonexistent/dir/v.csv"));
        assert!(matches!(r, Err(Error::Io(_))), "{r:?}");
    }

    #[test]
    fn curves_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        let curves = vec![CurvePolyline::circle(10.0, 12.0, 5.0, 16), CurvePolyline::ellipse(30.0, 30.0, 6.0, 3.0, 9)];
        write_curves_csv(&p, &curves).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().next().unwrap(), "index,x,y,nx,ny,tx,ty");
        let back = read_curves_csv(&p).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in back.iter().zip(&curves) {
            assert_eq!(a.vertices, b.vertices);
            assert_eq!(a.normals, b.normals);
            assert_eq!(a.tangents, b.tangents);
        }
    }

    #[test]
    fn convergence_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("conv.csv");
        let step = |k, l| StepRecord { step: k, time: k as f64, length: l, area: 1.0, max_speed: 0.5, components: 1 };
        let recs = vec![
            ConvergenceRecord { phase: Phase::GradientDescent, steps: vec![step(0, 3.0), step(1, 2.0)], outcome: Outcome::Stalled, speed_tol: 0.0, flat_nodes: 0 },
            ConvergenceRecord { phase: Phase::Equilibrium, steps: vec![step(0, 2.0), step(1, 2.5)], outcome: Outcome::Vanished, speed_tol: 0.0, flat_nodes: 0 },
        ];
        write_convergence_csv(&p, &recs).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "step,length,area,max_speed,phase,outcome");
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[2], "1,2,1,0.5,gradient_descent,stalled");
        assert_eq!(lines[3], "1,2,1,0.5,equilibrium,vanished");
        assert_eq!(lines[4], "2,2.5,1,0.5,equilibrium,vanished");
    }
}
