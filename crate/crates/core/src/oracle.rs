//! Quadrature references for the closed forms.
//!
//! Each function integrates a density directly instead of using the algebra
//! that produced the closed form, so agreement checks that algebra. Integrals
//! run over `[0, ∞)` through a rational map, so there is no truncation tail.

use core::f64::consts::{LN_2, PI};

use crate::analytic::{ln_survival_probability, mu0, mu1_approx, unmangled_count_from};
use crate::error::domain;
use crate::float::{exp, ln, sqrt};
use crate::quadrature::{integrate_to_infinity, Tolerance};
use crate::special::{ln1m_exp, LogValue};
use crate::{DiffusionParams, MeasureFraction, Result};

const TOL: Tolerance = Tolerance {
    abs: 0.0,
    rel: 1e-12,
    max_segments: 4000,
};

/// `∫₀^∞ e^{ln_f(y)} dy` in log form. The integrand is divided by its
/// largest value on a probe grid before integrating.
pub fn integrate_log<F: Fn(f64) -> f64>(ln_f: F, scale: f64) -> Result<LogValue> {
    let reference = (0..=256)
        .map(|k| ln_f(scale * k as f64 / 16.0))
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if reference == f64::NEG_INFINITY {
        return Ok(LogValue::ZERO);
    }
    let q = integrate_to_infinity(|y| exp(ln_f(y) - reference), 0.0, TOL)?;
    Ok(LogValue::from_f64(q.value).scale_ln(reference))
}

/// `∫₀^∞ μ₁approx(y, t) dy`; equals `W(t; ε)`.
pub fn mu1_approx_integral(t: f64, dp: &DiffusionParams) -> Result<LogValue> {
    let scale = 1.0f64.max(sqrt(dp.w * t));
    integrate_log(|y| mu1_approx(y, t, dp).map_or(f64::NAN, |m| m.ln()), scale)
}

/// Mean height `∫ y μ₁approx dy / ∫ μ₁approx dy`.
pub fn mu1_approx_mean(t: f64, dp: &DiffusionParams) -> Result<f64> {
    let scale = 1.0f64.max(sqrt(dp.w * t));
    let m0 = mu1_approx_integral(t, dp)?;
    let m1 = integrate_log(
        |y| mu1_approx(y, t, dp).map_or(f64::NAN, |m| m.ln() + ln(y)),
        scale,
    )?;
    Ok((m1 / m0).to_f64())
}

/// `G ∫₀^∞ W(t₂; y) μ₁approx(y − ln F, t₁; ε) dy`, the definition of `λ`.
pub fn lambda_quadrature(
    f: MeasureFraction,
    g: u64,
    t1: f64,
    t2: f64,
    dp: &DiffusionParams,
) -> Result<LogValue> {
    if g == 0 {
        return Err(domain("G", 0.0, "G >= 1"));
    }
    let depth = f.depth();
    let scale = 1.0f64.max(sqrt(dp.w * t1));
    let integral = integrate_log(
        |y| {
            if y == 0.0 {
                return f64::NEG_INFINITY;
            }
            let w = unmangled_count_from(y, t2, dp).map_or(f64::NAN, |w| w.ln());
            let m = mu1_approx(y + depth, t1, dp).map_or(f64::NAN, |m| m.ln());
            w + m
        },
        scale,
    )?;
    Ok(integral.scale_ln(ln(g as f64)))
}

/// `ln` of the image-method density per unit `y` in the comoving frame
/// without growth: the law of a world started at `ε` after time `s/w`, killed
/// at 0.
pub fn ln_comoving_density(y: f64, eps: f64, s: f64) -> f64 {
    if y <= 0.0 {
        return f64::NEG_INFINITY;
    }
    -0.5 * ln(2.0 * PI * s) + eps - y - 0.5 * s - (y - eps) * (y - eps) / (2.0 * s)
        + ln1m_exp(-2.0 * y * eps / s)
}

/// Exact continuum `γ(F) = λ(F)/(F λ(1))` for the two-stage protocol, with
/// the true image density and the true survival probability, no small-`ε`
/// or long-`t₂` approximation.
///
/// Depends on `s₁ = wt₁`, `s₂ = wt₂`, `ε` and `F` only.
pub fn continuum_gamma(f: MeasureFraction, eps: f64, s1: f64, s2: f64) -> Result<f64> {
    let count = |depth: f64| {
        integrate_log(
            |y| {
                let p = ln_survival_probability(y, s2).unwrap_or(f64::NAN);
                ln_comoving_density(y + depth, eps, s1) + p
            },
            1.0f64.max(sqrt(s1)),
        )
    };
    let shifted = count(f.depth())?;
    let plain = count(0.0)?;
    Ok(exp(shifted.ln() - plain.ln() - f.ln()))
}

/// Survival probability of a world started at `ε` after `s = wt`, by
/// integrating the image density; cross-checks
/// [`survival_probability`](crate::analytic::survival_probability).
pub fn survival_by_quadrature(eps: f64, s: f64) -> Result<f64> {
    let m = integrate_log(|y| ln_comoving_density(y, eps, s), 1.0f64.max(sqrt(s)))?;
    Ok(m.to_f64())
}

/// Total measure `∫ e^x μ₀(x, t) dx` of all worlds, by quadrature on both
/// sides of the measure-weighted mean `(w − v)t`. Splitting conserves measure,
/// so this is 1.
pub fn total_measure(t: f64, dp: &DiffusionParams) -> Result<f64> {
    let centre = (dp.w - dp.v) * t;
    let f = |x: f64| mu0(x, t, dp).map_or(f64::NAN, |m| exp(x + m.ln()));
    let q = integrate_to_infinity(|u| f(centre + u) + f(centre - u), 0.0, TOL)?;
    Ok(q.value)
}

/// `ln 2`, the log of the `z = 2y` Jacobian.
pub const LN_JACOBIAN: f64 = LN_2;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{lambda_count, survival_probability, unmangled_count_w};
    use approx::assert_relative_eq;

    fn dp(eps: f64) -> DiffusionParams {
        DiffusionParams::new(1.0, 0.5, eps).unwrap()
    }

    #[test]
    fn w_matches_quadrature() {
        for wt in [1.0, 4.0, 25.0] {
            let t = wt / 0.5;
            let q = mu1_approx_integral(t, &dp(0.1)).unwrap();
            let w = unmangled_count_w(t, &dp(0.1)).unwrap();
            assert!(q.rel_diff(w) < 1e-9, "wt = {wt}: {}", q.rel_diff(w));
        }
    }

    #[test]
    fn lambda_matches_quadrature() {
        let d = dp(0.05);
        for f in [
            MeasureFraction::new(0.25).unwrap(),
            MeasureFraction::from_ln(-5.0).unwrap(),
        ] {
            let closed = lambda_count(f, 4, 50.0, 800.0, &d).unwrap();
            let quad = lambda_quadrature(f, 4, 50.0, 800.0, &d).unwrap();
            assert!(closed.rel_diff(quad) < 1e-8, "{}", closed.rel_diff(quad));
        }
    }

    #[test]
    fn measure_is_conserved() {
        for (v, w, t) in [(1.0, 0.5, 2.0), (0.7, 0.04, 300.0), (3.0, 2.0, 0.1)] {
            let d = DiffusionParams::new(v, w, 0.1).unwrap();
            assert_relative_eq!(total_measure(t, &d).unwrap(), 1.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn survival_two_ways() {
        for (eps, s) in [(0.1, 4.0), (0.5, 0.3), (2.0, 50.0), (0.05, 1e3)] {
            let a = survival_probability(eps, s).unwrap();
            let b = survival_by_quadrature(eps, s).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-8);
        }
    }

    #[test]
    fn continuum_gamma_reference_values() {
        let g = continuum_gamma(MeasureFraction::from_ln(-5.0).unwrap(), 0.1, 25.0, 200.0).unwrap();
        assert_relative_eq!(g, 0.347_531_926_074_432_46, max_relative = 1e-9);
        assert_eq!(
            continuum_gamma(MeasureFraction::ONE, 0.1, 25.0, 200.0).unwrap(),
            1.0
        );
    }

    #[test]
    fn continuum_gamma_tends_to_erfc_for_long_second_stage() {
        for depth in [2.0, 5.0, 10.0] {
            let f = MeasureFraction::from_ln(-depth).unwrap();
            let limit = crate::analytic::gamma_correction(f, 25.0, 1.0).unwrap();
            let near = continuum_gamma(f, 0.1, 25.0, 2e3).unwrap() / limit - 1.0;
            let far = continuum_gamma(f, 0.1, 25.0, 2e4).unwrap() / limit - 1.0;
            // the excess falls roughly like wt1/wt2
            assert!(near > 0.0 && near < 0.02);
            assert!(
                far > 0.0 && (7.0..11.0).contains(&(near / far)),
                "{near} {far}"
            );
        }
    }
}
