use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use curvestab::experiment::{self, ExperimentConfig, Input, RunOptions};
use curvestab::flows::{FlowKind, RotationSign};
use curvestab::levelset::Circle;
use curvestab::Error;

#[derive(Parser)]
#[command(name = "curvestab", version, about = "Curve evolution experiments and stability analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the input image, edge map g = |grad I| and the extended field.
    GenPattern(ExperimentArgs),
    /// Run the configured flow and write snapshots, convergence table and summary.
    Run {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Also write an overlay frame every N steps into <output-dir>/frames.
        #[arg(long, value_name = "N")]
        frames: Option<usize>,
    },
    /// Classify stored curves in a stored vector field.
    Analyze {
        #[command(flatten)]
        io: AnalysisIo,
        /// Override the marginal band (default 5% of the largest Jacobian norm).
        #[arg(long)]
        marginal_tol: Option<f64>,
    },
    /// Perturb a converged curve and measure how fast the perturbation decays.
    Perturb {
        #[command(flatten)]
        io: AnalysisIo,
        #[arg(long, default_value_t = 1.0)]
        amplitude: f64,
        #[arg(long, default_value_t = 0.2)]
        dt: f64,
        #[arg(long, default_value_t = 40)]
        iters: usize,
    },
    /// Compare the equilibrium and modified flows against the Gronwall bound.
    Bound {
        #[command(flatten)]
        io: AnalysisIo,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.05)]
        dt: f64,
        #[arg(long, default_value_t = 200)]
        steps: usize,
    },
}

#[derive(Args)]
struct AnalysisIo {
    /// Curve CSV (index,x,y,nx,ny,tx,ty).
    #[arg(long)]
    curve: PathBuf,
    /// Vector field CSV (x,y,u,v).
    #[arg(long)]
    field: PathBuf,
    /// Report CSV to write.
    #[arg(long, default_value = "report.csv")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum InputKind {
    Pattern,
    Blob,
    Image,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    GradientDescent,
    Equilibrium,
    ModifiedEquilibrium,
}

#[derive(Clone, Copy, ValueEnum)]
enum RotationArg {
    Ccw,
    Cw,
}

/// Every flag overrides the matching field of the `--config` file.
#[derive(Args)]
struct ExperimentArgs {
    /// JSON config; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    input: Option<InputKind>,
    /// PGM path for `--input image`.
    #[arg(long)]
    image: Option<PathBuf>,
    /// Grid size for pattern and blob inputs.
    #[arg(long)]
    size: Option<usize>,
    #[arg(long)]
    blur_sigma: Option<f64>,
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, value_enum)]
    rotation_sign: Option<RotationArg>,
    #[arg(long)]
    normalize_field: Option<bool>,
    #[arg(long)]
    length_window: Option<usize>,
    #[arg(long)]
    length_rel_tol: Option<f64>,
    #[arg(long)]
    max_outer_cycles: Option<usize>,
    #[arg(long)]
    max_steps_per_phase: Option<usize>,
    #[arg(long)]
    speed_tol: Option<f64>,
    #[arg(long)]
    cfl: Option<f64>,
    #[arg(long)]
    reinit_interval: Option<usize>,
    #[arg(long)]
    gvf_mu: Option<f64>,
    #[arg(long)]
    gvf_iterations: Option<usize>,
    /// Initial circle `cx,cy,radius`; repeat for several.
    #[arg(long = "init", value_name = "CX,CY,R", value_parser = parse_circle)]
    init: Vec<Circle>,
    #[arg(long)]
    init_jitter: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_circle(s: &str) -> Result<Circle, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad number in {s:?}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [cx, cy, radius] => Ok(Circle { cx, cy, radius }),
        _ => Err(format!("expected cx,cy,radius, got {s:?}")),
    }
}

impl ExperimentArgs {
    fn config(&self) -> curvestab::Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(kind) = self.input {
            let size = match &c.input {
                Input::Pattern { size, .. } | Input::Blob { size } => *size,
                Input::Image { .. } => 128,
            };
            c.input = match kind {
                InputKind::Pattern => match &c.input {
                    Input::Pattern { .. } => c.input.clone(),
                    _ => Input::Pattern { size, disks: experiment::default_disks_for(size), ramp: [0.002, 0.001] },
                },
                InputKind::Blob => Input::Blob { size },
                InputKind::Image => {
                    let path = self
                        .image
                        .clone()
                        .ok_or_else(|| Error::Argument("--input image needs --image <path>".into()))?;
                    Input::Image { path, spacing: 1.0 }
                }
            };
        } else if let Some(path) = &self.image {
            c.input = Input::Image { path: path.clone(), spacing: 1.0 };
        }
        if let Some(s) = self.size {
            match &mut c.input {
                Input::Pattern { size, disks, .. } => {
                    // default disks follow the grid; explicit ones are kept
                    if *disks == experiment::default_disks_for(*size) {
                        *disks = experiment::default_disks_for(s);
                    }
                    *size = s;
                }
                Input::Blob { size } => *size = s,
                Input::Image { .. } => return Err(Error::Argument("--size does not apply to image input".into())),
            }
        }
        macro_rules! set {
            ($flag:expr => $field:expr) => {
                if let Some(v) = $flag {
                    $field = v;
                }
            };
        }
        set!(self.output_dir.clone() => c.output_dir);
        set!(self.blur_sigma => c.blur_sigma);
        set!(self.kind.map(|k| match k {
            KindArg::GradientDescent => FlowKind::GradientDescent,
            KindArg::Equilibrium => FlowKind::Equilibrium,
            KindArg::ModifiedEquilibrium => FlowKind::ModifiedEquilibrium,
        }) => c.flow.kind);
        set!(self.epsilon => c.flow.epsilon);
        set!(self.rotation_sign.map(|r| match r {
            RotationArg::Ccw => RotationSign::Ccw,
            RotationArg::Cw => RotationSign::Cw,
        }) => c.flow.rotation_sign);
        set!(self.normalize_field => c.flow.normalize_field);
        set!(self.length_window => c.alternation.length_window);
        set!(self.length_rel_tol => c.alternation.length_rel_tol);
        set!(self.max_outer_cycles => c.alternation.max_outer_cycles);
        set!(self.max_steps_per_phase => c.alternation.max_steps_per_phase);
        set!(self.speed_tol.map(Some) => c.alternation.speed_tol);
        set!(self.cfl => c.alternation.cfl);
        set!(self.reinit_interval => c.alternation.reinit_interval);
        set!(self.gvf_mu => c.gvf.mu);
        set!(self.gvf_iterations => c.gvf.max_iterations);
        set!(self.init_jitter => c.init_jitter);
        set!(self.seed => c.seed);
        if !self.init.is_empty() {
            c.init = Some(self.init.clone());
        }
        c.validate()?;
        Ok(c)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => 3,
        Error::Argument(_) | Error::Parse(_) | Error::Json(_) | Error::Domain { .. } => 2,
        Error::Terminal(_) => 0,
    }
}

fn show(path: &Path) -> String {
    path.display().to_string()
}

fn run(cli: Cli) -> curvestab::Result<()> {
    match cli.command {
        Command::GenPattern(exp) => {
            let cfg = exp.config()?;
            let p = experiment::cmd_gen_pattern(&cfg)?;
            println!(
                "wrote image.pgm, g.csv, g.pgm, gvf.csv to {} ({} GVF iterations)",
                show(&cfg.output_dir),
                p.gvf_iterations
            );
        }
        Command::Run { exp, frames } => {
            if frames == Some(0) {
                return Err(Error::Argument("--frames must be at least 1".into()));
            }
            let summary = experiment::cmd_run(&exp.config()?, RunOptions { frames })?;
            println!("{}", serde_json::to_string(&summary)?);
        }
        Command::Analyze { io, marginal_tol } => {
            let r = experiment::cmd_analyze(&io.curve, &io.field, &io.out, marginal_tol)?;
            println!("{}", r.classification.as_str());
        }
        Command::Perturb { io, amplitude, dt, iters } => {
            let t = experiment::cmd_perturb(&io.curve, &io.field, &io.out, amplitude, dt, iters)?;
            println!("fitted_factor={} predicted_factor={}", t.fitted_factor, t.predicted_factor);
        }
        Command::Bound { io, epsilon, dt, steps } => {
            let r = experiment::cmd_bound(&io.curve, &io.field, &io.out, epsilon, dt, steps)?;
            println!("holds={} lipschitz_l={} mu={}", r.holds(), r.lipschitz_l, r.mu);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("curvestab: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
