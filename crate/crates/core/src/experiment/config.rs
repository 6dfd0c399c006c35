use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{gaussian_smooth, Disk, GridSpec, GvfParams, ScalarField};
use crate::flows::{AlternationConfig, FlowSpec};
use crate::levelset::Circle;

/// Description of the blob input, for docs and run logs.
pub const BLOB_NOTE: &str = "synthetic stand-in for a real photograph: three overlapping lobes \
forming a non-convex object whose interior brightens from left to right, on a background with a \
weak vertical ramp, blurred";

fn default_size() -> usize {
    128
}

/// Three radius-15 disks on a 128 grid.
pub fn default_disks() -> Vec<Disk> {
    vec![
        Disk { cx: 32.0, cy: 32.0, radius: 15.0 },
        Disk { cx: 96.0, cy: 40.0, radius: 15.0 },
        Disk { cx: 64.0, cy: 96.0, radius: 15.0 },
    ]
}

/// [`default_disks`] scaled from the 128 grid to `size`.
pub fn default_disks_for(size: usize) -> Vec<Disk> {
    let k = size as f64 / 128.0;
    default_disks()
        .into_iter()
        .map(|d| Disk { cx: d.cx * k, cy: d.cy * k, radius: d.radius * k })
        .collect()
}

fn default_ramp() -> [f64; 2] {
    [0.002, 0.001]
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Input {
    /// Blurred disks on a linear ramp.
    Pattern {
        #[serde(default = "default_size")]
        size: usize,
        #[serde(default = "default_disks")]
        disks: Vec<Disk>,
        #[serde(default = "default_ramp")]
        ramp: [f64; 2],
    },
    /// See [`BLOB_NOTE`].
    Blob {
        #[serde(default = "default_size")]
        size: usize,
    },
    /// A PGM file, blurred by `blur_sigma`.
    Image {
        path: PathBuf,
        #[serde(default = "unit")]
        spacing: f64,
    },
}

impl Default for Input {
    fn default() -> Self {
        Input::Pattern { size: default_size(), disks: default_disks(), ramp: default_ramp() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub input: Input,
    /// Blur of the pattern or of the loaded image.
    pub blur_sigma: f64,
    pub gvf: GvfParams,
    pub flow: FlowSpec,
    pub alternation: AlternationConfig,
    /// Initial circles; `None` picks one per disk (pattern) or one central
    /// circle (blob, image).
    pub init: Option<Vec<Circle>>,
    /// Each initial centre is shifted by up to this many cells in x and y.
    pub init_jitter: f64,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            input: Input::default(),
            blur_sigma: 2.0,
            gvf: GvfParams::default(),
            flow: FlowSpec::modified_equilibrium(0.1).normalized(true),
            alternation: AlternationConfig::default(),
            init: None,
            init_jitter: 0.0,
            output_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

/// Gap between a disk's edge and its default initial circle.
const INIT_MARGIN: f64 = 7.0;

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let size = match &self.input {
            Input::Pattern { size, .. } | Input::Blob { size } => Some(*size),
            Input::Image { spacing, .. } => {
                if !(*spacing > 0.0) {
                    return Err(Error::arg("image spacing must be positive"));
                }
                None
            }
        };
        if let Some(s) = size {
            if !(3..=4096).contains(&s) {
                return Err(Error::arg(format!("grid size must lie in 3..=4096, got {s}")));
            }
        }
        if !(self.blur_sigma >= 0.0 && self.blur_sigma.is_finite()) {
            return Err(Error::arg(format!("blur_sigma must be >= 0, got {}", self.blur_sigma)));
        }
        let g = &self.gvf;
        if !(g.mu > 0.0) || !(g.tol > 0.0) || g.max_iterations == 0 || g.dt.map_or(false, |d| !(d > 0.0)) {
            return Err(Error::arg("gvf needs mu > 0, tol > 0, max_iterations > 0 and a positive dt if given"));
        }
        self.flow.validate()?;
        self.alternation.validate()?;
        if !(self.init_jitter >= 0.0 && self.init_jitter.is_finite()) {
            return Err(Error::arg("init_jitter must be >= 0"));
        }
        if let Some(init) = &self.init {
            if init.is_empty() {
                return Err(Error::arg("init needs at least one circle"));
            }
            if init.iter().any(|c| !(c.radius > 0.0) || !c.cx.is_finite() || !c.cy.is_finite()) {
                return Err(Error::arg("init circles need finite centres and positive radii"));
            }
        }
        Ok(())
    }

    /// Default initial circles for the configured input.
    fn default_init(&self, grid: &GridSpec) -> Vec<Circle> {
        match &self.input {
            Input::Pattern { disks, .. } if !disks.is_empty() => disks
                .iter()
                .map(|d| Circle { cx: d.cx, cy: d.cy, radius: d.radius + INIT_MARGIN })
                .collect(),
            _ => {
                let (cx, cy) = grid.center();
                let (w, h) = grid.extent();
                vec![Circle { cx, cy, radius: 0.4 * w.min(h) }]
            }
        }
    }

    /// Initial circles after defaults and jitter.
    pub fn init_circles(&self, grid: &GridSpec) -> Result<Vec<Circle>> {
        let mut circles = self.init.clone().unwrap_or_else(|| self.default_init(grid));
        if self.init_jitter > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            for c in &mut circles {
                c.cx += rng.gen_range(-self.init_jitter..=self.init_jitter);
                c.cy += rng.gen_range(-self.init_jitter..=self.init_jitter);
            }
        }
        for c in &circles {
            if !grid.contains(c.cx, c.cy) {
                return Err(Error::arg(format!("initial circle centre ({}, {}) is outside the grid", c.cx, c.cy)));
            }
        }
        Ok(circles)
    }

    /// Copy with every default spelled out. The jitter is applied to the
    /// circles and then set to 0, so running the resolved config reproduces
    /// the run exactly.
    pub fn resolved(&self) -> Result<Self> {
        self.validate()?;
        let grid = match &self.input {
            Input::Pattern { size, .. } | Input::Blob { size } => GridSpec::square(*size),
            Input::Image { path, spacing } => {
                let img = crate::io::read_pgm(path, *spacing)?;
                *img.grid()
            }
        };
        let mut out = self.clone();
        out.init = Some(self.init_circles(&grid)?);
        out.init_jitter = 0.0;
        Ok(out)
    }
}

/// Image for [`Input::Blob`].
pub(crate) fn make_blob_image(size: usize, blur: f64) -> Result<ScalarField> {
    let grid = GridSpec::square(size);
    let s = (size - 1) as f64 * grid.spacing;
    let lobes = [(0.40, 0.50, 0.20), (0.60, 0.40, 0.14), (0.62, 0.64, 0.12)];
    let raw = ScalarField::from_fn(grid, |x, y| {
        let inside = lobes.iter().any(|&(cx, cy, r)| (x - cx * s).hypot(y - cy * s) <= r * s);
        if inside {
            0.6 + 0.4 * x / s
        } else {
            0.15 * y / s
        }
    });
    gaussian_smooth(&raw, blur)
}
