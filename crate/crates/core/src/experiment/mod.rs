//! Experiment harness: configuration, field preparation and the commands
//! behind the `curvestab` binary.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{gaussian_smooth, gradient, make_disk_pattern, GridSpec, ScalarField, VectorField};
use crate::flows::{mean_field_norm, run_flow_observed, run_geosnakes_observed, FlowKind, Outcome, Phase};
use crate::io;
use crate::levelset::{init_multi_circle, CurvePolyline, LevelSetFunction};
use crate::marker::regularize;
use crate::stability::{
    classify, divergence_bound_check, jnn_along_curve, jnn_along_curve_with_tol, perturbation_decay, BoundReport,
    PerturbationTrace, StabilityReport,
};

pub use config::{default_disks, default_disks_for, ExperimentConfig, Input, BLOB_NOTE};

/// Everything a run needs, derived from a resolved config.
#[derive(Debug, Clone)]
pub struct Prepared {
    /// Input intensity image.
    pub image: ScalarField,
    /// Edge indicator `g = |grad I|`.
    pub g: ScalarField,
    /// `grad g` before extension.
    pub grad_g: VectorField,
    /// The extended field the curves move in.
    pub field: VectorField,
    pub gvf_iterations: usize,
    pub initial: LevelSetFunction,
}

/// Build the image, edge map, extended field and initial level set.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let image = match &cfg.input {
        Input::Pattern { size, disks, ramp } => {
            make_disk_pattern(GridSpec::square(*size), disks, cfg.blur_sigma, (ramp[0], ramp[1]))?
        }
        Input::Blob { size } => config::make_blob_image(*size, cfg.blur_sigma)?,
        Input::Image { path, spacing } => gaussian_smooth(&io::read_pgm(path, *spacing)?, cfg.blur_sigma)?,
    };
    let g = gradient(&image).magnitude();
    let grad_g = gradient(&g);
    let (field, gvf_iterations) = cfg.gvf.run(&grad_g)?;
    let circles = cfg.init_circles(image.grid())?;
    let initial = init_multi_circle(*image.grid(), &circles);
    Ok(Prepared { image, g, grad_g, field, gvf_iterations, initial })
}

fn write_resolved(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(cfg)? + "\n";
    fs::write(dir.join("resolved_config.json"), text)?;
    Ok(())
}

fn out_dir(cfg: &ExperimentConfig) -> Result<PathBuf> {
    fs::create_dir_all(&cfg.output_dir)?;
    Ok(cfg.output_dir.clone())
}

/// Write the pattern image, its edge map and the extended field.
pub fn cmd_gen_pattern(cfg: &ExperimentConfig) -> Result<Prepared> {
    let mut cfg = cfg.resolved()?;
    let p = prepare(&cfg)?;
    cfg.gvf.dt = Some(cfg.gvf.resolved_dt(&p.grad_g));
    let dir = out_dir(&cfg)?;
    write_resolved(&cfg, &dir)?;
    io::write_pgm(&dir.join("image.pgm"), &p.image)?;
    io::write_scalar_csv(&dir.join("g.csv"), &p.g)?;
    io::write_pgm(&dir.join("g.pgm"), &p.g)?;
    io::write_vector_csv(&dir.join("gvf.csv"), &p.field)?;
    Ok(p)
}

/// One-line result of [`cmd_run`], also written to `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub outcome: Outcome,
    /// Final zero-set components at least one cell long.
    pub components: usize,
    pub initial_components: usize,
    /// `initial_components - components`, floored at 0.
    pub vanished_components: usize,
    /// Arc-length mean of `|grad g|` over the final curves (0 if none).
    pub mean_grad_g: f64,
    pub cycles: usize,
    pub phases: usize,
    pub total_steps: usize,
    pub gvf_iterations: usize,
    pub wall_clock_s: f64,
    pub version: String,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Write an overlay PPM every this many steps into `frames/`.
    pub frames: Option<usize>,
}

pub const SNAPSHOTS: [&str; 4] = ["snapshot_0_init", "snapshot_1_descent", "snapshot_2_equilibrium", "snapshot_3_final"];

fn surviving(curves: &[CurvePolyline], h: f64) -> usize {
    curves.iter().filter(|c| c.length().map_or(false, |l| l >= h)).count()
}

/// Run the configured flow, write snapshots, the convergence table and a
/// summary. Vanishing is reported in the summary, not as an error.
pub fn cmd_run(cfg: &ExperimentConfig, opts: RunOptions) -> Result<RunSummary> {
    let clock = Instant::now();
    let mut cfg = cfg.resolved()?;
    let p = prepare(&cfg)?;
    let dir = out_dir(&cfg)?;
    let h = p.image.grid().spacing;
    let spec = cfg.flow;
    let speed_tol = cfg.alternation.resolved_speed_tol(&spec.effective_field(&p.field));
    // a zero field has no relative tolerance; leave it unset
    if speed_tol > 0.0 {
        cfg.alternation.speed_tol = Some(speed_tol);
    }
    cfg.gvf.dt = Some(cfg.gvf.resolved_dt(&p.grad_g));
    write_resolved(&cfg, &dir)?;

    let frames_dir = dir.join("frames");
    if opts.frames.is_some() {
        fs::create_dir_all(&frames_dir)?;
    }
    let every = opts.frames.unwrap_or(0);
    let mut global = 0usize;
    let mut frame_err = None;
    let mut on_step = |_: Phase, step: usize, curves: &[CurvePolyline]| {
        if step > 0 {
            global += 1;
        }
        if every > 0 && global % every == 0 && frame_err.is_none() {
            let path = frames_dir.join(format!("frame_{global:06}.ppm"));
            if let Err(e) = io::write_overlay_ppm(&path, &p.image, curves) {
                frame_err = Some(e);
            }
        }
    };

    let init = p.initial.curves();
    let (records, descent, equilibrium, final_ls, outcome, cycles) = if spec.kind == FlowKind::GradientDescent {
        let (ls, rec) = run_flow_observed(&spec, &p.field, &p.initial, &cfg.alternation, &mut on_step)?;
        let out = rec.outcome;
        let curves = ls.curves();
        (vec![rec], curves, Vec::new(), ls, out, 0)
    } else {
        let run = run_geosnakes_observed(&p.field, &p.initial, &spec, &cfg.alternation, &mut on_step)?;
        (run.records, run.after_first_descent, run.after_first_equilibrium, run.level_set, run.outcome, run.cycles)
    };
    if let Some(e) = frame_err {
        return Err(e);
    }
    let final_curves = if outcome == Outcome::Vanished { Vec::new() } else { final_ls.curves() };

    for (name, curves) in SNAPSHOTS.iter().zip([&init, &descent, &equilibrium, &final_curves]) {
        io::write_curves_csv(&dir.join(format!("{name}.csv")), curves)?;
        io::write_overlay_ppm(&dir.join(format!("{name}.ppm")), &p.image, curves)?;
    }
    io::write_convergence_csv(&dir.join("convergence.csv"), &records)?;

    let components = surviving(&final_curves, h);
    let initial_components = surviving(&init, h);
    let summary = RunSummary {
        outcome,
        components,
        initial_components,
        vanished_components: initial_components.saturating_sub(components),
        mean_grad_g: mean_field_norm(&p.grad_g, &final_curves)?,
        cycles,
        phases: records.len(),
        total_steps: records.iter().map(|r| r.step_count()).sum(),
        gvf_iterations: p.gvf_iterations,
        wall_clock_s: clock.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    fs::write(dir.join("summary.json"), serde_json::to_string(&summary)? + "\n")?;
    Ok(summary)
}

fn load_curves(path: &Path) -> Result<Vec<CurvePolyline>> {
    let curves = io::read_curves_csv(path)?;
    if curves.is_empty() {
        return Err(Error::Parse(format!("{} holds no curve", path.display())));
    }
    Ok(curves)
}

/// Stability report of stored curves in a stored field. Several curves are
/// pooled into one report.
pub fn cmd_analyze(curve: &Path, field: &Path, out: &Path, marginal_tol: Option<f64>) -> Result<StabilityReport> {
    let f = io::read_vector_csv(field)?;
    let curves = load_curves(curve)?;
    let mut reports = Vec::with_capacity(curves.len());
    for c in &curves {
        reports.push(match marginal_tol {
            Some(t) => jnn_along_curve_with_tol(&f, c, t)?,
            None => jnn_along_curve(&f, c)?,
        });
    }
    let report = if reports.len() == 1 {
        reports.pop().expect("one report")
    } else {
        let samples: Vec<f64> = reports.iter().flat_map(|r| r.samples.iter().copied()).collect();
        if samples.is_empty() {
            return Err(Error::arg("no vertex could be evaluated"));
        }
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tol = reports.iter().map(|r| r.marginal_tol).fold(0.0, f64::max);
        StabilityReport {
            classification: classify(mean, min, max, tol),
            mean,
            min,
            max,
            marginal_tol: tol,
            clipped: reports.iter().map(|r| r.clipped).sum(),
            samples,
        }
    };
    io::write_stability_report(out, &report)?;
    Ok(report)
}

/// Perturbation decay around the first stored curve.
pub fn cmd_perturb(
    curve: &Path,
    field: &Path,
    out: &Path,
    amplitude: f64,
    dt: f64,
    iters: usize,
) -> Result<PerturbationTrace> {
    let f = io::read_vector_csv(field)?;
    let c = load_curves(curve)?.swap_remove(0);
    let trace = perturbation_decay(&f, &c, amplitude, dt, iters)?;
    io::write_perturbation_trace(out, &trace)?;
    Ok(trace)
}

/// Divergence of the equilibrium and modified flows from the first stored
/// curve, against the Gronwall bound. An extracted zero set is resampled to
/// the grid spacing first.
pub fn cmd_bound(curve: &Path, field: &Path, out: &Path, epsilon: f64, dt: f64, steps: usize) -> Result<BoundReport> {
    let f = io::read_vector_csv(field)?;
    let c = regularize(&load_curves(curve)?.swap_remove(0), f.grid().spacing)?;
    let report = divergence_bound_check(&f, epsilon, &c, dt, steps)?;
    io::write_bound_report(out, &report)?;
    Ok(report)
}
