//! A fast cross-oracle suite: each check pits one method against an
//! independent one on a small problem. Runs in a few seconds.

use std::fmt;

use mangle_core::analytic::{
    gamma_correction, lambda_count, pde_residual_mirrored_mean, pde_residual_mu0,
    survival_probability, unmangled_count_w,
};
use mangle_core::born::headline_check;
use mangle_core::mc::{
    born_two_stage_mc, enumerate_survivors, lattice_gamma, simulate_survivors, Serial, Tilt,
    WalkSpec,
};
use mangle_core::oracle::{continuum_gamma, lambda_quadrature, mu1_approx_integral, total_measure};
use mangle_core::pde::{gamma_estimates, solve, Grid};
use mangle_core::special::{bracket, erfcx, regimes, ERFCX_CF_START, ERFCX_TAIL_START};
use mangle_core::{DecoherenceParams, DiffusionParams, MeasureFraction};

use crate::runner::Pool;

/// `ln` of the bracket at `wt = 10¹⁰`, from a 50-digit evaluation.
const LN_BRACKET_1E10: f64 = -34.764_567_747_855_41;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "[PASS]" } else { "[FAIL]" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

fn check(name: &'static str, f: impl FnOnce() -> mangle_core::Result<(bool, String)>) -> Check {
    match f() {
        Ok((passed, detail)) => Check {
            name,
            passed,
            detail,
        },
        Err(e) => Check {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

pub fn run_suite(pool: &Pool) -> Vec<Check> {
    let d = DiffusionParams::new(1.0, 0.5, 0.1).expect("valid");
    vec![
        check("headline", || {
            let h = headline_check()?;
            Ok((
                h.passes(),
                format!("gamma = {:.10}, log10 F = {:.2}", h.gamma, h.log10_f),
            ))
        }),
        check("near-born at wt1 = 1e10", || {
            let mut worst: f64 = 0.0;
            for k in 0..50 {
                let ln_f = -100.0 * k as f64 / 49.0;
                let g = gamma_correction(MeasureFraction::from_ln(ln_f)?, 1e10, 1.0)?;
                worst = worst.max(1.0 - g);
            }
            Ok((worst <= 1e-3, format!("max 1 - gamma = {worst:.3e}")))
        }),
        check("all-worlds density solves its equation", || {
            let mut worst: f64 = 0.0;
            for t in [0.5f64, 1.0, 2.0, 4.0, 8.0] {
                for z in [-2.0, -1.0, 0.0, 1.0, 2.0] {
                    let x = -t + z * (0.5 * t).sqrt();
                    worst = worst.max(pde_residual_mu0(x, t, &d)?);
                }
            }
            let control = pde_residual_mirrored_mean(-1.0, 1.0, &d)?.abs();
            Ok((
                worst <= 1e-5 && control > 0.1,
                format!("max residual {worst:.2e}, wrong-sign control {control:.2e}"),
            ))
        }),
        check("splitting conserves measure", || {
            let mut worst: f64 = 0.0;
            for (v, w, t) in [(1.0, 0.5, 1.0), (2.0, 0.3, 10.0), (0.7, 0.04, 300.0)] {
                let m = total_measure(t, &DiffusionParams::new(v, w, 0.1)?)?;
                worst = worst.max((m - 1.0).abs());
            }
            Ok((worst <= 1e-8, format!("max |measure - 1| = {worst:.2e}")))
        }),
        check("W equals the integral of the approximate density", || {
            let mut worst: f64 = 0.0;
            for wt in [1.0, 4.0, 25.0] {
                let t = wt / d.w();
                worst = worst.max(mu1_approx_integral(t, &d)?.rel_diff(unmangled_count_w(t, &d)?));
            }
            Ok((
                worst <= 1e-6,
                format!("max relative difference {worst:.2e}"),
            ))
        }),
        check("lambda closed form equals its defining integral", || {
            let dl = DiffusionParams::new(1.0, 0.5, 0.05)?;
            let mut worst: f64 = 0.0;
            for f in [MeasureFraction::new(0.25)?, MeasureFraction::from_ln(-5.0)?] {
                let a = lambda_count(f, 1, 50.0, 800.0, &dl)?;
                let b = lambda_quadrature(f, 1, 50.0, 800.0, &dl)?;
                worst = worst.max(a.rel_diff(b));
            }
            Ok((
                worst <= 0.02,
                format!("max relative difference {worst:.2e}"),
            ))
        }),
        check("bracket and erfcx", || {
            let b = bracket(1e10)?.ln();
            let b_err = (b - LN_BRACKET_1E10).abs();
            let mut seam: f64 = 0.0;
            for a in [ERFCX_TAIL_START, ERFCX_CF_START] {
                let below = erfcx(a - 1e-12)?;
                let at = erfcx(a)?;
                seam = seam.max(((below - at) / at).abs());
            }
            let cf = regimes::continued_fraction(8.0);
            let rational = regimes::rational(8.0);
            seam = seam.max(((cf - rational) / cf).abs());
            Ok((
                b_err <= 1e-8 && seam <= 1e-12,
                format!("ln bracket(1e10) error {b_err:.1e}, seam {seam:.1e}"),
            ))
        }),
        check("pde survivors match the image solution", || {
            let dp = DiffusionParams::new(1.0, 0.5, 0.5)?;
            let grid = Grid::crank_nicolson(30.0, 2048, 0.01)?;
            let t = 8.0;
            let field = solve(&dp, &grid, t)?;
            let exact =
                (dp.v() - 0.5 * dp.w()) * t + survival_probability(dp.eps(), dp.w() * t)?.ln();
            let err = (field.survivors().ln() - exact).abs();
            Ok((err <= 5e-3, format!("ln ratio {err:.2e}")))
        }),
        check("pde gamma matches the continuum integral", || {
            let dp = DiffusionParams::new(1.0, 0.5, 0.5)?;
            let grid = Grid::crank_nicolson(30.0, 1024, 0.01)?;
            let f = MeasureFraction::from_ln(-2.0)?;
            let g = gamma_estimates(&dp, &grid, 10.0, &[f], 40.0)?[0];
            let c = continuum_gamma(f, 0.5, 5.0, 20.0)?;
            let rel = (g / c - 1.0).abs();
            Ok((rel <= 1e-2, format!("pde {g:.6}, quadrature {c:.6}")))
        }),
        check("monte carlo matches enumeration", || {
            let mut worst: f64 = 0.0;
            for (p, eps, n) in [(0.6, 0.3, 12), (0.55, 0.2, 16), (0.7, 0.1, 10)] {
                let dp = DecoherenceParams::new(p, 1.0)?;
                for tilt in [Tilt::Uniform, Tilt::Measure] {
                    let s = WalkSpec::new(dp, eps, n)?.with_tilt(tilt);
                    let exact = enumerate_survivors(&s)?.count as f64;
                    let e = simulate_survivors(&s, 100_000, 17, pool)?;
                    let z = (e.estimate().to_f64() - exact).abs() / e.std_error().to_f64();
                    worst = worst.max(z);
                }
            }
            Ok((worst <= 4.0, format!("max |z| = {worst:.2}")))
        }),
        check("two-stage monte carlo matches the lattice", || {
            let dp = DecoherenceParams::new(0.55, 1.0)?;
            let s = WalkSpec::new(dp, 0.2, 80)?.with_tilt(Tilt::Measure);
            let f = MeasureFraction::from_ln(-1.0)?;
            let est = born_two_stage_mc(&s, 160, &[f], 1, 200_000, 5, pool)?;
            let (g, se) = est[0].gamma();
            let exact = lattice_gamma(&s, 160, f)?;
            let z = (g - exact).abs() / se;
            Ok((z <= 4.0, format!("mc {g:.5} ± {se:.5}, exact {exact:.5}")))
        }),
        check("monte carlo is independent of workers", || {
            let dp = DecoherenceParams::new(0.55, 1.0)?;
            let s = WalkSpec::new(dp, 0.2, 100)?.with_tilt(Tilt::Measure);
            let a = simulate_survivors(&s, 50_000, 99, &Serial)?;
            let b = simulate_survivors(&s, 50_000, 99, pool)?;
            let same = a == b;
            Ok((
                same,
                format!(
                    "ln estimate {:.12} vs {:.12}",
                    a.estimate().ln(),
                    b.estimate().ln()
                ),
            ))
        }),
    ]
}
