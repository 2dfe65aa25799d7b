//! Born-rule experiments across the three engines.
//!
//! An experiment has outcomes `k`, each sending the measure into `G_k` child
//! worlds a factor `F_k` smaller, with `Σ F_k G_k = 1`. After background
//! decoherence for `t₁` and `t₂` on either side of the split, the share of
//! unmangled worlds in outcome `k` is `λ_k / Σ λ_j`. The Born rule predicts
//! `F_k G_k`. The ratio of the two is the correction `γ`, up to the common
//! normalisation.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::LN_10;
use core::fmt;

use crate::analytic::{gamma_correction, lambda_count};
use crate::error::domain;
use crate::float::{abs, exp, ln, sqrt};
use crate::mc::{born_two_stage_mc, BlockRunner, WalkSpec};
use crate::pde::{born_two_stage_many, Grid};
use crate::special::{erfc, log_sum_exp};
use crate::{DecoherenceParams, DiffusionParams, Error, LogValue, MeasureFraction, Result};

/// Allowed deviation of `Σ F G` from 1.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// One outcome of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct BornOutcome {
    pub label: String,
    pub fraction: MeasureFraction,
    pub g: u64,
}

impl BornOutcome {
    pub fn new(label: impl Into<String>, f: f64, g: u64) -> Result<Self> {
        if g == 0 {
            return Err(domain("G", 0.0, "G >= 1"));
        }
        Ok(Self {
            label: label.into(),
            fraction: MeasureFraction::new(f)?,
            g,
        })
    }

    /// `F G`.
    pub fn born_probability(&self) -> f64 {
        self.fraction.value() * self.g as f64
    }
}

/// Fails unless `Σ F G = 1` to [`NORMALIZATION_TOLERANCE`].
pub fn check_normalized(outcomes: &[BornOutcome]) -> Result<()> {
    if outcomes.is_empty() {
        return Err(Error::Degenerate(
            "an experiment needs at least one outcome",
        ));
    }
    let total: f64 = outcomes.iter().map(BornOutcome::born_probability).sum();
    if abs(total - 1.0) > NORMALIZATION_TOLERANCE {
        return Err(Error::Unnormalized(total));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Engine {
    Analytic,
    Pde,
    Mc,
}

impl Engine {
    pub const ALL: [Engine; 3] = [Engine::Analytic, Engine::Pde, Engine::Mc];

    pub fn name(self) -> &'static str {
        match self {
            Engine::Analytic => "analytic",
            Engine::Pde => "pde",
            Engine::Mc => "mc",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Engine::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or(Error::Engine {
                engine: "unknown",
                reason: s.to_string(),
            })
    }
}

/// Discrete walk used by the Monte Carlo engine. Stage one is
/// `walk.n_events` long.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSetup {
    pub walk: WalkSpec,
    pub n2: u64,
    pub n_paths: u64,
    pub seed: u64,
}

/// Background decoherence around the split and the engines to run.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub dp: DiffusionParams,
    pub t1: f64,
    pub t2: f64,
    pub engines: Vec<Engine>,
    pub grid: Option<Grid>,
    pub mc: Option<McSetup>,
}

/// One outcome as seen by one engine.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeRow {
    pub engine: Engine,
    pub label: String,
    pub born_probability: f64,
    /// Unmangled count `λ_k`.
    pub lambda: LogValue,
    /// `λ_k / Σ λ_j`.
    pub share: f64,
    /// `share / (F G)`.
    pub share_over_born: f64,
    /// `λ(F, G) / (F G λ(1, 1))` from this engine.
    pub gamma: f64,
    /// Sampling error of `gamma`, for the Monte Carlo engine.
    pub gamma_std_error: Option<f64>,
    /// `erfc(−ln F / √(2wt₁))`.
    pub analytic_gamma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviationReport {
    pub rows: Vec<OutcomeRow>,
    /// Engines that failed, with the reason; their rows are absent.
    pub failures: Vec<(Engine, Error)>,
}

impl DeviationReport {
    pub fn rows_for(&self, engine: Engine) -> impl Iterator<Item = &OutcomeRow> {
        self.rows.iter().filter(move |r| r.engine == engine)
    }

    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Per-outcome `λ` and `γ` for one engine.
fn engine_counts<R: BlockRunner + ?Sized>(
    engine: Engine,
    outcomes: &[BornOutcome],
    ex: &Experiment,
    runner: &R,
) -> Result<Vec<(LogValue, f64, Option<f64>)>> {
    let fs: Vec<MeasureFraction> = outcomes.iter().map(|o| o.fraction).collect();
    let ln_g = |o: &BornOutcome| ln(o.g as f64);
    match engine {
        Engine::Analytic => outcomes
            .iter()
            .map(|o| {
                let lambda = lambda_count(o.fraction, o.g, ex.t1, ex.t2, &ex.dp)?;
                let gamma = gamma_correction(o.fraction, ex.t1, ex.dp.w())?;
                Ok((lambda, gamma, None))
            })
            .collect(),
        Engine::Pde => {
            let grid = ex.grid.ok_or(Error::Engine {
                engine: "pde",
                reason: "no grid configured".to_string(),
            })?;
            let mut all = Vec::with_capacity(fs.len() + 1);
            all.push(MeasureFraction::ONE);
            all.extend_from_slice(&fs);
            let lambdas = born_two_stage_many(&ex.dp, &grid, ex.t1, &all, 1, ex.t2)?;
            let plain = lambdas[0];
            Ok(outcomes
                .iter()
                .zip(&lambdas[1..])
                .map(|(o, l)| {
                    let gamma = exp(l.ln() - plain.ln() - o.fraction.ln());
                    (l.scale_ln(ln_g(o)), gamma, None)
                })
                .collect())
        }
        Engine::Mc => {
            let mc = ex.mc.ok_or(Error::Engine {
                engine: "mc",
                reason: "no walk configured".to_string(),
            })?;
            let est = born_two_stage_mc(&mc.walk, mc.n2, &fs, 1, mc.n_paths, mc.seed, runner)?;
            Ok(outcomes
                .iter()
                .zip(est)
                .map(|(o, e)| {
                    let (gamma, se) = e.gamma();
                    (e.lambda().scale_ln(ln_g(o)), gamma, Some(se))
                })
                .collect())
        }
    }
}

/// Runs each engine on the experiment and tabulates shares against `F G`.
/// A failing engine is recorded and the others still run.
pub fn deviation_table<R: BlockRunner + ?Sized>(
    outcomes: &[BornOutcome],
    experiment: &Experiment,
    runner: &R,
) -> Result<DeviationReport> {
    check_normalized(outcomes)?;
    if experiment.engines.is_empty() {
        return Err(Error::Degenerate("no engines selected"));
    }
    let mut report = DeviationReport {
        rows: Vec::new(),
        failures: Vec::new(),
    };
    for &engine in &experiment.engines {
        let counts = match engine_counts(engine, outcomes, experiment, runner) {
            Ok(c) => c,
            Err(e) => {
                log::warn!("engine {engine} failed: {e}");
                report.failures.push((engine, e));
                continue;
            }
        };
        let lambdas: Vec<LogValue> = counts.iter().map(|c| c.0).collect();
        let total = log_sum_exp(&lambdas);
        for (o, (lambda, gamma, se)) in outcomes.iter().zip(counts) {
            let share = if total.is_zero() {
                f64::NAN
            } else {
                (lambda / total).to_f64()
            };
            report.rows.push(OutcomeRow {
                engine,
                label: o.label.clone(),
                born_probability: o.born_probability(),
                lambda,
                share,
                share_over_born: share / o.born_probability(),
                gamma,
                gamma_std_error: se,
                analytic_gamma: gamma_correction(o.fraction, experiment.t1, experiment.dp.w())?,
            });
        }
    }
    Ok(report)
}

/// Walk matching an experiment with event rate `r`: `N₁ = r t₁`, `N₂ = r t₂`
/// rounded, tilt chosen from the whole run.
pub fn mc_setup(
    dp: DecoherenceParams,
    eps: f64,
    t1: f64,
    t2: f64,
    n_paths: u64,
    seed: u64,
) -> Result<McSetup> {
    let n1 = libm::round(dp.rate() * t1) as u64;
    let n2 = libm::round(dp.rate() * t2) as u64;
    let walk = WalkSpec::new(dp, eps, n1)?.with_tilt(crate::mc::Tilt::auto(&dp, n1 + n2));
    Ok(McSetup {
        walk,
        n2,
        n_paths,
        seed,
    })
}

/// `wt₁` and `−ln F` of the headline case.
pub const HEADLINE_WT1: f64 = 1e10;
pub const HEADLINE_DEPTH: f64 = 1e5;
/// The bound the measure fraction is compared against.
pub const HEADLINE_LOG10_BOUND: f64 = -43000.0;

/// The headline Born correction and its neighbours.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadlineReport {
    /// `γ(e^{−10⁵})` at `wt₁ = 10¹⁰`.
    pub gamma: f64,
    /// `erfc(1/√2)`.
    pub reference: f64,
    /// `log₁₀ F`.
    pub log10_f: f64,
    /// `F < 10^{−43000}`, decided on logs.
    pub below_bound: bool,
    /// `γ(e^{−2·10⁵})`.
    pub gamma_double_depth: f64,
    /// `γ(e^{−10⁴})`.
    pub gamma_tenth_depth: f64,
}

impl HeadlineReport {
    pub fn passes(&self) -> bool {
        abs(self.gamma - self.reference) <= 1e-9 && self.below_bound
    }
}

impl fmt::Display for HeadlineReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "wt1 = {:e}, F = e^-{:e}", HEADLINE_WT1, HEADLINE_DEPTH)?;
        writeln!(
            f,
            "gamma = {:.10} (erfc(1/sqrt2) = {:.10})",
            self.gamma, self.reference
        )?;
        writeln!(
            f,
            "log10 F = {:.2} {} {}",
            self.log10_f,
            if self.below_bound { "<" } else { ">=" },
            HEADLINE_LOG10_BOUND
        )?;
        writeln!(f, "gamma(F = e^-2e5) = {:.6}", self.gamma_double_depth)?;
        write!(f, "gamma(F = e^-1e4) = {:.6}", self.gamma_tenth_depth)
    }
}

pub fn headline_check() -> Result<HeadlineReport> {
    let gamma_at =
        |depth: f64| gamma_correction(MeasureFraction::from_ln(-depth)?, HEADLINE_WT1, 1.0);
    let log10_f = -HEADLINE_DEPTH / LN_10;
    Ok(HeadlineReport {
        gamma: gamma_at(HEADLINE_DEPTH)?,
        reference: erfc(1.0 / sqrt(2.0)),
        log10_f,
        below_bound: log10_f < HEADLINE_LOG10_BOUND,
        gamma_double_depth: gamma_at(2.0 * HEADLINE_DEPTH)?,
        gamma_tenth_depth: gamma_at(0.1 * HEADLINE_DEPTH)?,
    })
}

/// Growth rates at one `(p, r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow {
    pub p: f64,
    pub r: f64,
    pub v: f64,
    pub w: f64,
    /// Growth exponent of unmangled worlds.
    pub v_minus_w: f64,
    /// Growth exponent of all worlds, `v − w/2`.
    pub all_worlds: f64,
    /// `|(v − w) + r x̂₁|`, zero up to rounding.
    pub identity_residual: f64,
    /// `w = 0`: no diffusion.
    pub degenerate: bool,
    /// Unmangled worlds grow but become an exponentially smaller fraction.
    pub shrinking_fraction: bool,
}

/// Tabulates the growth rates over a grid of `(p, r)`.
pub fn survival_condition_scan(grid: &[(f64, f64)]) -> Result<Vec<ScanRow>> {
    grid.iter()
        .map(|&(p, r)| {
            let dp = DecoherenceParams::new(p, r)?;
            let s = dp.stats();
            let v = -r * s.xtilde1;
            let w = r * s.sigma1 * s.sigma1;
            Ok(ScanRow {
                p,
                r,
                v,
                w,
                v_minus_w: v - w,
                all_worlds: v - 0.5 * w,
                identity_residual: abs((v - w) + r * s.xhat1),
                degenerate: w == 0.0,
                shrinking_fraction: v > w && w > 0.0,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::Serial;
    use alloc::vec;
    use approx::assert_relative_eq;

    fn experiment(engines: Vec<Engine>) -> Experiment {
        Experiment {
            dp: DiffusionParams::new(1.0, 0.5, 0.5).unwrap(),
            t1: 20.0,
            t2: 40.0,
            engines,
            grid: Some(Grid::crank_nicolson(25.0, 512, 0.02).unwrap()),
            mc: Some(
                mc_setup(
                    DecoherenceParams::new(0.55, 1.0).unwrap(),
                    0.5,
                    200.0,
                    400.0,
                    20_000,
                    3,
                )
                .unwrap(),
            ),
        }
    }

    #[test]
    fn normalisation_is_enforced() {
        let ok = [
            BornOutcome::new("a", 0.25, 2).unwrap(),
            BornOutcome::new("b", 0.5, 1).unwrap(),
        ];
        assert!(check_normalized(&ok).is_ok());
        let bad = [
            BornOutcome::new("a", 0.25, 2).unwrap(),
            BornOutcome::new("b", 0.4, 1).unwrap(),
        ];
        assert!(matches!(
            check_normalized(&bad),
            Err(Error::Unnormalized(_))
        ));
        assert!(BornOutcome::new("z", 0.5, 0).is_err());
        assert!(BornOutcome::new("z", 1.5, 1).is_err());
    }

    #[test]
    fn single_outcome_is_trivial_for_every_engine() {
        let o = [BornOutcome::new("all", 1.0, 1).unwrap()];
        let r = deviation_table(&o, &experiment(Engine::ALL.to_vec()), &Serial).unwrap();
        assert!(r.is_complete());
        assert_eq!(r.rows.len(), 3);
        for row in &r.rows {
            assert_relative_eq!(row.share, 1.0, max_relative = 1e-12);
            assert_relative_eq!(row.gamma, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn analytic_shares_follow_gamma() {
        let o = [
            BornOutcome::new("half", 0.5, 1).unwrap(),
            BornOutcome::new("quarter", 0.25, 2).unwrap(),
        ];
        let e = experiment(vec![Engine::Analytic]);
        let r = deviation_table(&o, &e, &Serial).unwrap();
        let weights: Vec<f64> = r
            .rows
            .iter()
            .map(|row| row.born_probability * row.analytic_gamma)
            .collect();
        let total: f64 = weights.iter().sum();
        for (row, w) in r.rows.iter().zip(weights) {
            assert_relative_eq!(row.share, w / total, max_relative = 1e-12);
        }
        let shares: f64 = r.rows.iter().map(|row| row.share).sum();
        assert_relative_eq!(shares, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn large_wt1_is_nearly_born() {
        let o = [
            BornOutcome::new("a", 0.9, 1).unwrap(),
            BornOutcome::new("b", 0.1, 1).unwrap(),
        ];
        let e = Experiment {
            dp: DiffusionParams::new(1.0, 1.0, 0.1).unwrap(),
            t1: 1e10,
            t2: 1e3,
            engines: vec![Engine::Analytic],
            grid: None,
            mc: None,
        };
        let r = deviation_table(&o, &e, &Serial).unwrap();
        for row in &r.rows {
            assert!(
                abs(row.share_over_born - 1.0) < 1e-4,
                "{}",
                row.share_over_born
            );
        }
    }

    #[test]
    fn missing_engine_setup_is_a_marked_failure() {
        let o = [BornOutcome::new("all", 1.0, 1).unwrap()];
        let mut e = experiment(vec![Engine::Analytic, Engine::Pde]);
        e.grid = None;
        let r = deviation_table(&o, &e, &Serial).unwrap();
        assert_eq!(r.failures.len(), 1);
        assert_eq!(r.failures[0].0, Engine::Pde);
        assert_eq!(r.rows_for(Engine::Analytic).count(), 1);
    }

    #[test]
    fn gamma_does_not_depend_on_g_or_t2() {
        let f = MeasureFraction::new(0.125).unwrap();
        let dp = DiffusionParams::new(1.0, 0.5, 0.1).unwrap();
        let base = lambda_count(f, 1, 30.0, 100.0, &dp).unwrap();
        for g in [2u64, 8] {
            let l = lambda_count(f, g, 30.0, 100.0, &dp).unwrap();
            assert_relative_eq!(l.ln() - base.ln(), ln(g as f64), max_relative = 1e-13);
        }
        let a = gamma_correction(f, 30.0, 0.5).unwrap();
        let one = lambda_count(MeasureFraction::ONE, 1, 30.0, 200.0, &dp).unwrap();
        let two = lambda_count(f, 1, 30.0, 200.0, &dp).unwrap();
        assert_relative_eq!(exp(two.ln() - one.ln() - f.ln()), a, max_relative = 1e-13);
    }

    #[test]
    fn headline_numbers() {
        let h = headline_check().unwrap();
        assert!(h.passes());
        assert_relative_eq!(h.gamma, 0.317_310_507_862_914_1, max_relative = 1e-12);
        assert!(abs(h.log10_f + 43_429.448_190_325_18) < 1e-6);
        assert_relative_eq!(
            h.gamma_double_depth,
            0.045_500_263_896_358_42,
            max_relative = 1e-10
        );
        assert_relative_eq!(
            h.gamma_tenth_depth,
            0.920_344_325_445_942,
            max_relative = 1e-10
        );
    }

    #[test]
    fn scan_rows() {
        let rows = survival_condition_scan(&[(0.6, 1.0), (0.5, 1.0), (0.9, 3.0)]).unwrap();
        assert_relative_eq!(
            rows[0].v_minus_w,
            0.673_011_667_009_256,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            rows[0].all_worlds - rows[0].v_minus_w,
            0.019_728_234_467_179_85,
            max_relative = 1e-9
        );
        assert!(rows[0].shrinking_fraction);
        assert!(rows[1].degenerate && !rows[1].shrinking_fraction);
        assert_relative_eq!(
            rows[1].v_minus_w,
            core::f64::consts::LN_2,
            max_relative = 1e-15
        );
        assert!(rows.iter().all(|r| r.identity_residual < 1e-12));
    }
}
