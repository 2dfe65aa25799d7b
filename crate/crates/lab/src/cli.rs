//! Argument parsing and dispatch. Exit status: 0 success, 1 a failed check
//! or run, 2 a usage or configuration error.

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use crate::commands::{self, Report};
use crate::config::{BoundaryName, OutcomeConfig, RunConfig, SchemeName, TiltName, UsageError};
use crate::runner::Pool;

#[derive(Debug, Parser)]
#[command(
    name = "mangle",
    version,
    about = "Growth-drift-diffusion model of mangled worlds"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub run: RunFlags,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Closed-form densities, counts and Born corrections.
    Analytic,
    /// Finite-difference solution, survivor series and two-stage gamma.
    Pde,
    /// Monte Carlo survivors, histogram and two-stage gamma.
    Mc,
    /// Outcome shares against F*G across engines.
    Born,
    /// The wt1 = 1e10, F = e^-1e5 Born correction.
    Headline,
    /// Growth rates over a grid of (p, r).
    Scan,
    /// Fast cross-checks between independent methods.
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Analytic => "analytic",
            Command::Pde => "pde",
            Command::Mc => "mc",
            Command::Born => "born",
            Command::Headline => "headline",
            Command::Scan => "scan",
            Command::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunFlags {
    /// JSON configuration; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output root (else $MANGLE_OUT, else the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Run directory under the output root.
    #[arg(long, global = true)]
    pub name: Option<String>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub workers: Option<u64>,
    /// Only warnings and errors on stderr.
    #[arg(long, short, global = true)]
    pub quiet: bool,
}

/// One flag per configuration value.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Probability of the larger branch at each event.
    #[arg(long, global = true)]
    pub p: Option<f64>,
    /// Decoherence events per unit time.
    #[arg(long, global = true)]
    pub r: Option<f64>,
    /// Offset of the mangling boundary below the median measure.
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    /// Drift; give with --w to override the values implied by p and r.
    #[arg(long, global = true)]
    pub v: Option<f64>,
    /// Variance rate; give with --v.
    #[arg(long, global = true)]
    pub w: Option<f64>,
    /// Time of the outcome split.
    #[arg(long, global = true)]
    pub t1: Option<f64>,
    /// Follow-up time after the split.
    #[arg(long, global = true)]
    pub t2: Option<f64>,
    /// Height of the PDE domain.
    #[arg(long, global = true)]
    pub y_max: Option<f64>,
    /// PDE grid cells.
    #[arg(long, global = true)]
    pub n_cells: Option<usize>,
    /// PDE time step (default 0.0025 / w).
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// PDE time stepping.
    #[arg(long, global = true, value_enum)]
    pub scheme: Option<SchemeName>,
    /// Density snapshots written up to t1.
    #[arg(long, global = true)]
    pub snapshots: Option<usize>,
    /// Monte Carlo paths.
    #[arg(long, global = true)]
    pub n_paths: Option<u64>,
    /// Monte Carlo seed; required by mc and by born with the mc engine.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Sampling law for the walk.
    #[arg(long, global = true, value_enum)]
    pub tilt: Option<TiltName>,
    /// Where the walk places the boundary after each event.
    #[arg(long, global = true, value_enum)]
    pub boundary_rule: Option<BoundaryName>,
    /// Stage-one events (default r * t1).
    #[arg(long, global = true)]
    pub n_events: Option<u64>,
    /// Upper edge of the survivor histogram.
    #[arg(long, global = true)]
    pub y_hi: Option<f64>,
    /// Comma-separated `ln F` values.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub ln_fractions: Option<Vec<f64>>,
    /// `label:F:G`; repeat for each outcome.
    #[arg(long = "outcome", global = true)]
    pub outcomes: Vec<String>,
    /// Comma-separated subset of analytic, pde, mc.
    #[arg(long, global = true, value_delimiter = ',')]
    pub engines: Option<Vec<String>>,
}

fn parse_outcome(s: &str) -> Result<OutcomeConfig, UsageError> {
    let bad = || UsageError(format!("--outcome {s:?}: expected label:F:G"));
    let mut parts = s.rsplitn(3, ':');
    let g = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
    let f = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
    let label = parts.next().ok_or_else(bad)?.to_string();
    Ok(OutcomeConfig { label, f, g })
}

impl Overrides {
    pub fn apply(&self, c: &mut RunConfig) -> Result<(), UsageError> {
        macro_rules! set {
            ($($flag:ident => $($path:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$flag.clone() { c.$($path).+ = v; })*
            };
        }
        set!(
            p => model.p,
            r => model.r,
            eps => model.eps,
            t1 => times.t1,
            t2 => times.t2,
            y_max => grid.y_max,
            n_cells => grid.n_cells,
            scheme => grid.scheme,
            snapshots => grid.snapshots,
            n_paths => mc.n_paths,
            tilt => mc.tilt,
            boundary_rule => mc.boundary_rule,
            y_hi => mc.y_hi,
            ln_fractions => ln_fractions,
            engines => engines,
        );
        if self.v.is_some() {
            c.continuum.v = self.v;
        }
        if self.w.is_some() {
            c.continuum.w = self.w;
        }
        if self.dt.is_some() {
            c.grid.dt = self.dt;
        }
        if self.seed.is_some() {
            c.mc.seed = self.seed;
        }
        if self.n_events.is_some() {
            c.mc.n_events = self.n_events;
        }
        if !self.outcomes.is_empty() {
            c.outcomes = self
                .outcomes
                .iter()
                .map(|s| parse_outcome(s))
                .collect::<Result<_, _>>()?;
        }
        Ok(())
    }
}

/// Builds the configuration, runs the command and writes its directory.
/// Returns the run directory and whether every check passed.
pub fn execute(cli: &Cli) -> Result<(PathBuf, Report)> {
    let mut cfg = match &cli.run.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    cli.overrides.apply(&mut cfg)?;
    if let Some(name) = &cli.run.name {
        cfg.name = Some(name.clone());
    }
    let root = cfg.output_root(cli.run.out.as_deref());
    cfg.output.dir = root.clone();
    let resolved = cfg.resolve()?;
    cfg.grid.dt = Some(resolved.grid.dt());
    cfg.mc.n_events = Some(resolved.n1);
    let pool = Pool::new(cli.run.workers.map(|w| w as usize))?;
    let name = cfg
        .name
        .clone()
        .unwrap_or_else(|| cli.command.name().to_string());
    if name.is_empty() || name.contains(['/', '\\']) || name == ".." {
        return Err(UsageError(format!("name: {name:?} is not a plain directory name")).into());
    }
    log::info!("{}: {} worker(s)", cli.command.name(), pool.workers());

    let mut report = match cli.command {
        Command::Analytic => commands::analytic(&cfg, &resolved)?,
        Command::Pde => commands::pde(&cfg, &resolved)?,
        Command::Mc => commands::mc(&cfg, &resolved, &pool)?,
        Command::Born => commands::born(&cfg, &resolved, &pool)?,
        Command::Headline => commands::headline()?,
        Command::Scan => commands::scan(&cfg)?,
        Command::Validate => commands::validate(&pool)?,
    };
    report.files.text("config.json", cfg.to_json());
    report.files.text("summary.txt", report.summary.clone());
    let dir = report.files.commit(&root.join(&name))?;
    log::info!("wrote {}", dir.display());
    Ok((dir, report))
}

/// Parses `args`, runs and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = if cli.run.quiet {
        log::LevelFilter::Warn
    } else {
        log::LevelFilter::Info
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    match execute(&cli) {
        Ok((_, report)) => {
            print!("{}", report.summary);
            if report.passed {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                2
            } else {
                1
            }
        }
    }
}
