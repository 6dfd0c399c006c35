//! Report tables: a `# {json}` summary line followed by CSV rows.

use std::path::Path;

use serde_json::{json, Value};

use super::{csv_err, first_line, writer};
use crate::error::{Error, Result};
use crate::stability::{BoundReport, PerturbationTrace, StabilityReport};

fn with_header(path: &Path, summary: &Value, columns: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    use std::io::Write;
    let mut w = writer(path)?;
    w.flush()?;
    let mut inner = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    writeln!(inner, "# {summary}")?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(inner);
    w.write_record(columns).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// The JSON summary on the first line of a report file.
pub fn read_report_header(path: &Path) -> Result<Value> {
    let line = first_line(path)?;
    let body = line
        .strip_prefix("# ")
        .ok_or_else(|| Error::Parse("report must start with '# {json}'".into()))?;
    Ok(serde_json::from_str(body)?)
}

pub fn write_stability_report(path: &Path, r: &StabilityReport) -> Result<()> {
    let summary = json!({
        "classification": r.classification.as_str(),
        "mean": r.mean,
        "min": r.min,
        "max": r.max,
        "marginal_tol": r.marginal_tol,
        "clipped": r.clipped,
        "samples": r.samples.len(),
    });
    let rows = r.samples.iter().enumerate().map(|(k, s)| vec![k.to_string(), s.to_string()]).collect();
    with_header(path, &summary, &["index", "jnn"], rows)
}

pub fn write_perturbation_trace(path: &Path, t: &PerturbationTrace) -> Result<()> {
    let summary = json!({
        "fitted_factor": t.fitted_factor,
        "fitted_factor_vertex": t.fitted_factor_vertex,
        "predicted_factor": t.predicted_factor,
        "jnn_mean": t.jnn_mean,
        "dt": t.dt,
    });
    let rows = t
        .eta_norms
        .iter()
        .zip(&t.eta_vertex)
        .enumerate()
        .map(|(k, (a, b))| vec![k.to_string(), a.to_string(), b.to_string()])
        .collect();
    with_header(path, &summary, &["iteration", "eta", "eta_vertex"], rows)
}

pub fn write_bound_report(path: &Path, r: &BoundReport) -> Result<()> {
    let summary = json!({
        "holds": r.holds(),
        "lipschitz_l": r.lipschitz_l,
        "mu": r.mu,
        "epsilon": r.epsilon,
        "dt": r.dt,
        "stopped_early": r.stopped_early,
    });
    let rows = r
        .times
        .iter()
        .zip(&r.divergence)
        .zip(&r.bound)
        .enumerate()
        .map(|(k, ((t, d), b))| vec![k.to_string(), t.to_string(), d.to_string(), b.to_string()])
        .collect();
    with_header(path, &summary, &["step", "time", "divergence", "bound"], rows)
}
