//! Run configuration: defaults, an optional JSON file, then command-line
//! overrides, resolved into validated model objects.

use std::fmt;
use std::path::{Path, PathBuf};

use mangle_core::born::{BornOutcome, Engine, Experiment, McSetup};
use mangle_core::mc::{BoundaryRule, Tilt, WalkSpec};
use mangle_core::pde::Grid;
use mangle_core::{DecoherenceParams, DiffusionParams, MeasureFraction};
use serde::{Deserialize, Serialize};

/// Environment variable that replaces the output root from the file.
pub const OUT_ENV: &str = "MANGLE_OUT";

/// A bad flag, file or value. The CLI exits with status 2 on these.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(field: &str, detail: impl fmt::Display) -> UsageError {
    UsageError(format!("{field}: {detail}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Weight of the heavier branch.
    pub p: f64,
    /// Decoherence events per unit time.
    pub r: f64,
    /// Boundary offset below the median measure.
    pub eps: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            p: 0.55,
            r: 1.0,
            eps: 0.2,
        }
    }
}

/// Explicit drift and diffusion; when absent both follow from the model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContinuumConfig {
    pub v: Option<f64>,
    pub w: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimesConfig {
    pub t1: f64,
    pub t2: f64,
}

impl Default for TimesConfig {
    fn default() -> Self {
        Self {
            t1: 400.0,
            t2: 3200.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    CrankNicolson,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub y_max: f64,
    pub n_cells: usize,
    /// Time step; defaults to `0.0025 / w`.
    pub dt: Option<f64>,
    pub scheme: SchemeName,
    /// Density snapshots written during the first stage.
    pub snapshots: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            y_max: 40.0,
            n_cells: 2048,
            dt: None,
            scheme: SchemeName::CrankNicolson,
            snapshots: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TiltName {
    Auto,
    None,
    Measure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryName {
    Continuum,
    DiffusionDrift,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McConfig {
    pub n_paths: u64,
    /// Required by the `mc` subcommand.
    pub seed: Option<u64>,
    pub tilt: TiltName,
    pub boundary_rule: BoundaryName,
    /// Stage-one events; defaults to `round(r t1)`.
    pub n_events: Option<u64>,
    /// Upper edge of the survivor histogram.
    pub y_hi: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_paths: 1_000_000,
            seed: None,
            tilt: TiltName::Auto,
            boundary_rule: BoundaryName::Continuum,
            n_events: None,
            y_hi: 12.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyticConfig {
    /// Heights at which densities are tabulated.
    pub y_max: f64,
    pub n_points: usize,
    /// Times at which `W` is tabulated, spread over `(0, t1 + t2]`.
    pub n_times: usize,
}

impl Default for AnalyticConfig {
    fn default() -> Self {
        Self {
            y_max: 10.0,
            n_points: 101,
            n_times: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeConfig {
    pub label: String,
    pub f: f64,
    pub g: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    pub p: Vec<f64>,
    pub r: Vec<f64>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            p: vec![0.5, 0.55, 0.6, 0.7, 0.8, 0.9, 0.99],
            r: vec![1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

/// Everything a run needs; written back out in full as `config.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Subdirectory of the output root; defaults to the subcommand.
    pub name: Option<String>,
    pub model: ModelConfig,
    pub continuum: ContinuumConfig,
    pub times: TimesConfig,
    pub grid: GridConfig,
    pub mc: McConfig,
    pub analytic: AnalyticConfig,
    /// `ln F` values for the `γ` tables.
    pub ln_fractions: Vec<f64>,
    pub outcomes: Vec<OutcomeConfig>,
    pub engines: Vec<String>,
    pub scan: ScanConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            name: None,
            model: ModelConfig::default(),
            continuum: ContinuumConfig::default(),
            times: TimesConfig::default(),
            grid: GridConfig::default(),
            mc: McConfig::default(),
            analytic: AnalyticConfig::default(),
            ln_fractions: vec![-1.0, -3.0, -6.0],
            outcomes: vec![
                OutcomeConfig {
                    label: "up".into(),
                    f: 0.5,
                    g: 1,
                },
                OutcomeConfig {
                    label: "down".into(),
                    f: 0.25,
                    g: 2,
                },
            ],
            engines: vec!["analytic".into(), "pde".into(), "mc".into()],
            scan: ScanConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    /// Reads a JSON file; unknown keys are rejected with their position.
    pub fn from_file(path: &Path) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| UsageError(format!("config {}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serialises");
        s.push('\n');
        s
    }

    /// Output root after the environment override.
    pub fn output_root(&self, flag: Option<&Path>) -> PathBuf {
        if let Some(p) = flag {
            return p.to_path_buf();
        }
        match std::env::var_os(OUT_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => self.output.dir.clone(),
        }
    }

    pub fn resolve(&self) -> Result<Resolved, UsageError> {
        Resolved::new(self)
    }
}

/// Validated model objects built from a [`RunConfig`].
#[derive(Debug, Clone)]
pub struct Resolved {
    pub model: DecoherenceParams,
    pub dp: DiffusionParams,
    pub t1: f64,
    pub t2: f64,
    pub grid: Grid,
    pub fractions: Vec<MeasureFraction>,
    pub outcomes: Vec<BornOutcome>,
    pub engines: Vec<Engine>,
    pub n1: u64,
    pub n2: u64,
    pub walk: WalkSpec,
}

fn positive(field: &str, x: f64) -> Result<f64, UsageError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(usage(field, format!("{x} must be positive and finite")))
    }
}

impl Resolved {
    fn new(c: &RunConfig) -> Result<Self, UsageError> {
        let model = DecoherenceParams::new(c.model.p, c.model.r)
            .map_err(|e| usage("model.p / model.r", e))?;
        positive("model.eps", c.model.eps)?;
        let dp = match (c.continuum.v, c.continuum.w) {
            (None, None) => model
                .to_diffusion(c.model.eps)
                .map_err(|e| usage("model", e))?,
            (Some(v), Some(w)) => {
                DiffusionParams::new(v, w, c.model.eps).map_err(|e| usage("continuum", e))?
            }
            _ => return Err(usage("continuum", "give both v and w, or neither")),
        };
        let t1 = positive("times.t1", c.times.t1)?;
        let t2 = positive("times.t2", c.times.t2)?;

        positive("grid.y_max", c.grid.y_max)?;
        let dt = match c.grid.dt {
            Some(dt) => positive("grid.dt", dt)?,
            None if dp.w() > 0.0 => 0.0025 / dp.w(),
            None => 0.01,
        };
        let grid = match c.grid.scheme {
            SchemeName::CrankNicolson => Grid::crank_nicolson(c.grid.y_max, c.grid.n_cells, dt),
            SchemeName::Explicit => Grid::explicit(c.grid.y_max, c.grid.n_cells, dt, dp.w()),
        }
        .map_err(|e| usage("grid", e))?;

        let fractions = c
            .ln_fractions
            .iter()
            .map(|&l| MeasureFraction::from_ln(l))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| usage("ln_fractions", e))?;
        let outcomes = c
            .outcomes
            .iter()
            .map(|o| BornOutcome::new(o.label.clone(), o.f, o.g))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| usage("outcomes", e))?;
        let engines = c
            .engines
            .iter()
            .map(|e| {
                e.parse::<Engine>()
                    .map_err(|_| usage("engines", format!("unknown engine {e:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;

        if c.mc.n_paths == 0 {
            return Err(usage("mc.n_paths", "must be at least 1"));
        }
        positive("mc.y_hi", c.mc.y_hi)?;
        let n1 =
            c.mc.n_events
                .unwrap_or_else(|| (c.model.r * t1).round() as u64);
        let n2 = (c.model.r * t2).round() as u64;
        if n1 == 0 {
            return Err(usage("mc.n_events", "stage one needs at least one event"));
        }
        let tilt = match c.mc.tilt {
            TiltName::Auto => Tilt::auto(&model, n1 + n2),
            TiltName::None => Tilt::Uniform,
            TiltName::Measure => Tilt::Measure,
        };
        let rule = match c.mc.boundary_rule {
            BoundaryName::Continuum => BoundaryRule::Continuum,
            BoundaryName::DiffusionDrift => BoundaryRule::DiffusionDrift,
        };
        let walk = WalkSpec::new(model, c.model.eps, n1)
            .map_err(|e| usage("mc", e))?
            .with_tilt(tilt)
            .with_boundary_rule(rule);
        if c.analytic.n_points < 2 || c.analytic.n_times < 1 {
            return Err(usage("analytic", "need n_points >= 2 and n_times >= 1"));
        }
        positive("analytic.y_max", c.analytic.y_max)?;
        for &p in &c.scan.p {
            DecoherenceParams::new(p, 1.0).map_err(|e| usage("scan.p", e))?;
        }
        for &r in &c.scan.r {
            positive("scan.r", r)?;
        }
        Ok(Self {
            model,
            dp,
            t1,
            t2,
            grid,
            fractions,
            outcomes,
            engines,
            n1,
            n2,
            walk,
        })
    }

    /// Stage-one walk for a single `N`-event estimate when the tilt is
    /// automatic.
    pub fn single_walk(&self, c: &RunConfig) -> WalkSpec {
        match c.mc.tilt {
            TiltName::Auto => self.walk.with_tilt(Tilt::auto(&self.model, self.n1)),
            _ => self.walk,
        }
    }

    pub fn experiment(&self, mc: Option<McSetup>) -> Experiment {
        Experiment {
            dp: self.dp,
            t1: self.t1,
            t2: self.t2,
            engines: self.engines.clone(),
            grid: Some(self.grid),
            mc,
        }
    }

    pub fn mc_setup(&self, n_paths: u64, seed: u64) -> McSetup {
        McSetup {
            walk: self.walk,
            n2: self.n2,
            n_paths,
            seed,
        }
    }
}
