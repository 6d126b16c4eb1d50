//! Run configuration read from a TOML file.

use std::path::{Path, PathBuf};

use equideform::continuation::ContinuationConfig;
use equideform::equivariance::Tolerances;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: Option<ProblemSection>,
    pub path: Option<PathSection>,
    #[serde(default)]
    pub tolerances: TolerancesSection,
    #[serde(default)]
    pub bundle: BundleSection,
    #[serde(default)]
    pub congruence: CongruenceSection,
    #[serde(default)]
    pub fixture: FixtureSection,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    CmcCircle,
    CmcProfile,
    HarmonicTorus,
    HarmonicSphere,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub instance: InstanceKind,
    /// Prescribed curvature for the CMC instances.
    pub h: Option<f64>,
    #[serde(default = "default_n")]
    pub n: usize,
    /// `"2"`, `"4"` or `"spectral"`.
    pub order: Option<String>,
    /// Parameter at which `analyze` and `congruence` run.
    pub lambda: Option<f64>,
    pub class: Option<[i64; 2]>,
    pub q0: Option<[[f64; 2]; 2]>,
    pub q1: Option<[[f64; 2]; 2]>,
    pub interval: Option<[f64; 2]>,
    pub radii: Option<[f64; 2]>,
    /// JSON file `{"values": [...]}` replacing the built-in seed.
    pub state_file: Option<PathBuf>,
}

fn default_n() -> usize {
    128
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PathSection {
    pub start: f64,
    pub end: f64,
    pub step: f64,
    pub min_step: Option<f64>,
    pub max_step: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct TolerancesSection {
    pub corrector: f64,
    pub max_newton: usize,
    pub retries: usize,
    pub basin_guard: f64,
    pub kernel_rel: Option<f64>,
    pub gap_min: f64,
    pub angle: f64,
    pub critical: f64,
    pub min_margin: f64,
    pub diagnostics_every: usize,
}

impl Default for TolerancesSection {
    fn default() -> Self {
        let t = Tolerances::default();
        let c = ContinuationConfig::new(0.0, 0.0, 1.0);
        Self {
            corrector: c.tolerance,
            max_newton: c.max_newton,
            retries: c.retries,
            basin_guard: c.basin_guard,
            kernel_rel: t.kernel_rel,
            gap_min: t.gap_min,
            angle: t.angle,
            critical: t.critical,
            min_margin: c.min_margin,
            diagnostics_every: c.diagnostics_every,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct BundleSection {
    pub lambdas: Vec<f64>,
    pub dims: Vec<usize>,
    pub samples: usize,
    pub section_points: usize,
    pub section_range: [f64; 2],
    pub bracket_lambdas: Vec<f64>,
    pub triples: usize,
}

impl Default for BundleSection {
    fn default() -> Self {
        Self {
            lambdas: vec![-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0],
            dims: vec![2, 3],
            samples: 200,
            section_points: 21,
            section_range: [-1.0, 1.0],
            bracket_lambdas: vec![-1.0, 0.0, 0.5, 1.0],
            triples: 100,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct CongruenceSection {
    /// Largest norm of the random motion applied to the seed.
    pub max_norm: f64,
    pub tol: f64,
    pub param_tol: f64,
    /// Compare against the seed of a problem with this curvature instead.
    pub compare_h: Option<f64>,
}

impl Default for CongruenceSection {
    fn default() -> Self {
        Self {
            max_norm: 0.05,
            tol: 1e-8,
            param_tol: 1e-6,
            compare_h: None,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct FixtureSection {
    /// Replace one algebra basis element by a symmetric matrix.
    pub break_basis: bool,
    /// Remove the smallest nonzero Jacobi eigenvalue before the analysis.
    pub inject_degenerate_mode: bool,
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|e| CliError::Config(format!("config is not UTF-8: {e}")))?;
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok((cfg, bytes))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let t = &self.tolerances;
        for (name, v) in [
            ("tolerances.corrector", t.corrector),
            ("tolerances.basin_guard", t.basin_guard),
            ("tolerances.gap_min", t.gap_min),
            ("tolerances.angle", t.angle),
            ("tolerances.critical", t.critical),
            ("tolerances.min_margin", t.min_margin),
            ("congruence.max_norm", self.congruence.max_norm),
            ("congruence.tol", self.congruence.tol),
            ("congruence.param_tol", self.congruence.param_tol),
        ] {
            positive(name, v)?;
        }
        if let Some(k) = t.kernel_rel {
            if !(k > 0.0 && k <= 1e-2) {
                return Err(CliError::Config("tolerances.kernel_rel must be in (0, 1e-2]".into()));
            }
        }
        if t.max_newton == 0 || t.diagnostics_every == 0 {
            return Err(CliError::Config("iteration counts must be positive".into()));
        }
        if let Some(p) = &self.problem {
            if !(8..=4096).contains(&p.n) {
                return Err(CliError::Config(format!("problem.n = {} outside [8, 4096]", p.n)));
            }
        }
        if let Some(p) = &self.path {
            positive("path.step", p.step)?;
            if let Some(m) = p.min_step {
                positive("path.min_step", m)?;
            }
            if let Some(m) = p.max_step {
                positive("path.max_step", m)?;
            }
        }
        if self.bundle.dims.iter().any(|&n| n < 2) {
            return Err(CliError::Config("bundle.dims entries must be >= 2".into()));
        }
        if self.bundle.samples == 0 || self.bundle.section_points < 2 {
            return Err(CliError::Config("bundle sample counts too small".into()));
        }
        Ok(())
    }

    pub fn problem(&self) -> Result<&ProblemSection, CliError> {
        self.problem
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [problem] section".into()))
    }

    pub fn nondegeneracy(&self) -> Tolerances {
        let t = &self.tolerances;
        Tolerances {
            kernel_rel: t.kernel_rel,
            gap_min: t.gap_min,
            angle: t.angle,
            critical: t.critical,
            ..Tolerances::default()
        }
    }

    /// Continuation settings; `start`/`end`/steps come from `[path]` when present.
    pub fn continuation(&self, seed: u64) -> ContinuationConfig {
        let t = &self.tolerances;
        let mut c = match &self.path {
            Some(p) => {
                let mut c = ContinuationConfig::new(p.start, p.end, p.step);
                c.max_step = p.max_step.unwrap_or(p.step);
                c.min_step = p.min_step.unwrap_or(p.step * 1e-3);
                c
            }
            None => ContinuationConfig::new(0.0, 0.0, 1.0),
        };
        c.tolerance = t.corrector;
        c.max_newton = t.max_newton;
        c.retries = t.retries;
        c.basin_guard = t.basin_guard;
        c.min_margin = t.min_margin;
        c.diagnostics_every = t.diagnostics_every;
        c.nondegeneracy = self.nondegeneracy();
        c.seed = seed;
        c
    }
}
