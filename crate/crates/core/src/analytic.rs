//! Closed forms for the world distributions, the unmangled count and the
//! two-stage Born statistic.
//!
//! Coordinates: `x` is log-size, `y = x − x_b(t)` is the height above the
//! mangling boundary `x_b(t) = −(v−w)t − ε`.
//!
//! The all-worlds density has mean `−vt`. That is the sign under which it
//! solves `μ̇ = v(∇μ + μ) + (w/2)(∇²μ − μ)`; the mirrored mean `+vt` leaves an
//! O(1) residual, which [`pde_residual_mu0`] exposes.
//!
//! The unmangled densities [`mu1_exact`] and [`mu1_approx`], the count
//! [`unmangled_count_w`] and [`lambda_count`] share one normalisation: they
//! count worlds per unit of `z = 2y`. Multiplying by [`COMOVING_JACOBIAN`]
//! turns them into counts per unit `y`, which is what the PDE solver and the
//! Monte Carlo measure. Ratios such as `γ` are unaffected.

use alloc::vec::Vec;
use core::f64::consts::{LN_2, PI};

use crate::error::domain;
use crate::float::{exp, ln, sqrt};
use crate::special::{bracket, erfc, erfcx, ln1m_exp, ln_erfc, LogValue};
use crate::{DiffusionParams, MeasureFraction, Result};

/// `dz/dy` for `z = 2y`: converts the closed-form densities to counts per
/// unit `y`.
pub const COMOVING_JACOBIAN: f64 = 2.0;

/// Finite-difference step of [`pde_residual_mu0`].
pub const RESIDUAL_STEP: f64 = 1e-4;

fn check_t(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(domain("t", t, "0 < t < inf"))
    }
}

fn check_y(y: f64) -> Result<()> {
    if y >= 0.0 {
        Ok(())
    } else {
        Err(domain("y", y, "y >= 0 (unmangled region)"))
    }
}

/// `ln μ₀(x, t)` for a mean `sign · vt`; the physical choice is `sign = −1`.
fn ln_mu0_signed(x: f64, t: f64, dp: &DiffusionParams, sign: f64) -> f64 {
    let var = dp.w * t;
    let u = x - sign * dp.v * t;
    (dp.v - 0.5 * dp.w) * t - 0.5 * ln(2.0 * PI * var) - u * u / (2.0 * var)
}

/// All-worlds density: a normal in `x` with mean `−vt` and variance `wt`,
/// times the total count `e^{(v−w/2)t}`.
pub fn mu0(x: f64, t: f64, dp: &DiffusionParams) -> Result<LogValue> {
    check_t(t)?;
    dp.require_diffusive()?;
    Ok(LogValue::from_ln(ln_mu0_signed(x, t, dp, -1.0)))
}

/// `(μ̇ − v(∇μ + μ) − (w/2)(∇²μ − μ)) / μ` at `(x, t)` by central differences
/// of step `h` in both `x` and `t`. `ln_mu` is the log-density.
pub fn pde_residual<F: Fn(f64, f64) -> f64>(
    ln_mu: F,
    x: f64,
    t: f64,
    dp: &DiffusionParams,
    h: f64,
) -> f64 {
    let centre = ln_mu(x, t);
    let rel = |xx: f64, tt: f64| exp(ln_mu(xx, tt) - centre);
    let dt = (rel(x, t + h) - rel(x, t - h)) / (2.0 * h);
    let dx = (rel(x + h, t) - rel(x - h, t)) / (2.0 * h);
    let dxx = (rel(x + h, t) - 2.0 + rel(x - h, t)) / (h * h);
    dt - dp.v * (dx + 1.0) - 0.5 * dp.w * (dxx - 1.0)
}

/// Normalised residual of [`mu0`] in the drift-diffusion equation.
pub fn pde_residual_mu0(x: f64, t: f64, dp: &DiffusionParams) -> Result<f64> {
    check_t(t)?;
    dp.require_diffusive()?;
    let h = RESIDUAL_STEP.min(0.5 * t);
    Ok(pde_residual(
        |x, t| ln_mu0_signed(x, t, dp, -1.0),
        x,
        t,
        dp,
        h,
    ))
}

/// The same residual for a density whose mean moves the wrong way (`+vt`).
pub fn pde_residual_mirrored_mean(x: f64, t: f64, dp: &DiffusionParams) -> Result<f64> {
    check_t(t)?;
    dp.require_diffusive()?;
    let h = RESIDUAL_STEP.min(0.5 * t);
    Ok(pde_residual(
        |x, t| ln_mu0_signed(x, t, dp, 1.0),
        x,
        t,
        dp,
        h,
    ))
}

/// Mangling boundary `x_b(t) = −(v−w)t − ε`.
pub fn boundary(t: f64, dp: &DiffusionParams) -> f64 {
    -(dp.v - dp.w) * t - dp.eps
}

/// Image-method unmangled density
/// `(1/√(8πwt)) e^{ε−y+(v−w)t} (e^{−(y−ε)²/2wt} − e^{−(y+ε)²/2wt})`.
pub fn mu1_exact(y: f64, t: f64, dp: &DiffusionParams) -> Result<LogValue> {
    check_y(y)?;
    check_t(t)?;
    dp.require_diffusive()?;
    let s = dp.w * t;
    let eps = dp.eps;
    // the two images differ by the factor e^{−2yε/s}
    let images = -(y - eps) * (y - eps) / (2.0 * s) + ln1m_exp(-2.0 * y * eps / s);
    Ok(LogValue::from_ln(
        -0.5 * ln(8.0 * PI * s) + eps - y + (dp.v - dp.w) * t + images,
    ))
}

/// Small-`ε` form `(εe^ε/√(2π)) e^{(v−w)t} (wt)^{−3/2} y e^{−y − y²/2wt}`,
/// meant for `ε ≪ √(wt)`.
pub fn mu1_approx(y: f64, t: f64, dp: &DiffusionParams) -> Result<LogValue> {
    check_y(y)?;
    check_t(t)?;
    dp.require_diffusive()?;
    if y == 0.0 {
        return Ok(LogValue::ZERO);
    }
    let s = dp.w * t;
    Ok(LogValue::from_ln(
        ln(dp.eps) + dp.eps - 0.5 * ln(2.0 * PI) + (dp.v - dp.w) * t - 1.5 * ln(s) + ln(y)
            - y
            - y * y / (2.0 * s),
    ))
}

/// Mode of [`mu1_approx`] in `y`: the root of `1/y = 1 + y/wt`.
pub fn mu1_approx_mode(wt: f64) -> f64 {
    // (−1 + √(1+4/s))·s/2 rewritten to avoid cancellation at large s
    2.0 / (1.0 + sqrt(1.0 + 4.0 / wt))
}

/// `W` with the start height `y0 ≥ 0` in place of `ε`.
pub fn unmangled_count_from(y0: f64, t: f64, dp: &DiffusionParams) -> Result<LogValue> {
    check_y(y0)?;
    check_t(t)?;
    dp.require_diffusive()?;
    if y0 == 0.0 {
        return Ok(LogValue::ZERO);
    }
    let b = bracket(dp.w * t)?;
    Ok(b.scale_ln(ln(y0) + y0 - LN_2 + (dp.v - dp.w) * t))
}

/// Unmangled count `W(t; ε) = (εe^ε/2) e^{(v−w)t} B(wt)`, the integral of
/// [`mu1_approx`] over `y`.
pub fn unmangled_count_w(t: f64, dp: &DiffusionParams) -> Result<LogValue> {
    unmangled_count_from(dp.eps, t, dp)
}

/// Probability that a world starting at height `y0` has not been mangled by
/// time `t` (drift `−w`, variance rate `w`, absorbing at 0). Depends on
/// `wt` only.
pub fn survival_probability(y0: f64, wt: f64) -> Result<f64> {
    Ok(exp(ln_survival_probability(y0, wt)?))
}

/// `ln` of [`survival_probability`], finite long after the probability
/// underflows.
pub fn ln_survival_probability(y0: f64, wt: f64) -> Result<f64> {
    check_y(y0)?;
    if !(wt > 0.0 && wt.is_finite()) {
        return Err(domain("wt", wt, "0 < wt < inf"));
    }
    if y0 == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let r = sqrt(2.0 * wt);
    let a1 = (wt - y0) / r;
    let a2 = (wt + y0) / r;
    // e^{2y0} erfc(a2) = e^{−a1²} erfcx(a2)
    Ok(if a1 >= 0.0 {
        -a1 * a1 - LN_2 + ln(erfcx(a1)? - erfcx(a2)?)
    } else {
        ln(0.5 * (erfc(a1) - exp(-a1 * a1) * erfcx(a2)?))
    })
}

fn check_two_stage(t1: f64, t2: f64, g: u64) -> Result<()> {
    check_t(t1)?;
    check_t(t2).map_err(|_| domain("t2", t2, "0 < t2 < inf"))?;
    if g == 0 {
        return Err(domain("G", 0.0, "G >= 1"));
    }
    Ok(())
}

/// Two-stage count
/// `λ = FG erfc(−ln F/√(2wt₁)) (εe^ε/4) e^{(v−w)(t₁+t₂)} B(wt₂)`.
pub fn lambda_count(
    f: MeasureFraction,
    g: u64,
    t1: f64,
    t2: f64,
    dp: &DiffusionParams,
) -> Result<LogValue> {
    check_two_stage(t1, t2, g)?;
    dp.require_diffusive()?;
    warn_regime(Some(dp.eps), dp.w * t1);
    let b = bracket(dp.w * t2)?;
    let a = f.depth() / sqrt(2.0 * dp.w * t1);
    Ok(b.scale_ln(
        f.ln() + ln(g as f64) + ln_erfc(a) + ln(dp.eps) + dp.eps - 2.0 * LN_2
            + (dp.v - dp.w) * (t1 + t2),
    ))
}

/// Born correction `γ(F) = erfc(−ln F / √(2wt₁))`, independent of `G` and `t₂`.
pub fn gamma_correction(f: MeasureFraction, t1: f64, w: f64) -> Result<f64> {
    let wt1 = w * t1;
    if !(wt1 > 0.0 && wt1.is_finite()) {
        return Err(domain("w*t1", wt1, "0 < w*t1 < inf"));
    }
    warn_regime(None, wt1);
    Ok(erfc(f.depth() / sqrt(2.0 * wt1)))
}

/// `ln γ(F)`, finite where `γ` itself underflows.
pub fn ln_gamma_correction(f: MeasureFraction, t1: f64, w: f64) -> Result<f64> {
    let wt1 = w * t1;
    if !(wt1 > 0.0 && wt1.is_finite()) {
        return Err(domain("w*t1", wt1, "0 < w*t1 < inf"));
    }
    Ok(ln_erfc(f.depth() / sqrt(2.0 * wt1)))
}

/// Ways a two-stage evaluation can leave the regime `1 ≪ wt₁`, `ε ≪ √(wt₁)`
/// where the closed forms are derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegimeWarning {
    WideBoundaryOffset { eps: f64, sqrt_wt1: f64 },
    ShortFirstStage { wt1: f64 },
}

pub fn regime_warnings(eps: Option<f64>, wt1: f64) -> Vec<RegimeWarning> {
    let mut out = Vec::new();
    if let Some(eps) = eps {
        if eps >= 0.3 * sqrt(wt1) {
            out.push(RegimeWarning::WideBoundaryOffset {
                eps,
                sqrt_wt1: sqrt(wt1),
            });
        }
    }
    if wt1 <= 1.0 {
        out.push(RegimeWarning::ShortFirstStage { wt1 });
    }
    out
}

fn warn_regime(eps: Option<f64>, wt1: f64) {
    for w in regime_warnings(eps, wt1) {
        match w {
            RegimeWarning::WideBoundaryOffset { eps, sqrt_wt1 } => {
                log::warn!("eps = {eps} is not small against sqrt(w t1) = {sqrt_wt1}")
            }
            RegimeWarning::ShortFirstStage { wt1 } => log::warn!("w t1 = {wt1} is not large"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorldKind {
    /// `μ₀` over `x`.
    AllWorlds,
    /// Image solution over `y`.
    UnmangledExact,
    /// Small-`ε` approximation over `y`.
    UnmangledApprox,
}

/// One of the closed-form densities frozen at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldDistribution {
    pub kind: WorldKind,
    pub params: DiffusionParams,
    pub t: f64,
}

impl WorldDistribution {
    pub fn new(kind: WorldKind, params: DiffusionParams, t: f64) -> Result<Self> {
        check_t(t)?;
        params.require_diffusive()?;
        Ok(Self { kind, params, t })
    }

    /// Density at `x` (all worlds) or `y` (unmangled kinds).
    pub fn density(&self, coord: f64) -> Result<LogValue> {
        match self.kind {
            WorldKind::AllWorlds => mu0(coord, self.t, &self.params),
            WorldKind::UnmangledExact => mu1_exact(coord, self.t, &self.params),
            WorldKind::UnmangledApprox => mu1_approx(coord, self.t, &self.params),
        }
    }

    /// Integral of the density over its domain, in the same normalisation.
    pub fn total(&self) -> Result<LogValue> {
        let dp = &self.params;
        match self.kind {
            WorldKind::AllWorlds => Ok(LogValue::from_ln((dp.v - 0.5 * dp.w) * self.t)),
            WorldKind::UnmangledApprox => unmangled_count_w(self.t, dp),
            WorldKind::UnmangledExact => {
                let p = survival_probability(dp.eps, dp.w * self.t)?;
                Ok(
                    LogValue::from_f64(p / COMOVING_JACOBIAN)
                        .scale_ln((dp.v - 0.5 * dp.w) * self.t),
                )
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, Tolerance};
    use approx::assert_relative_eq;

    fn dp(v: f64, w: f64, eps: f64) -> DiffusionParams {
        DiffusionParams::new(v, w, eps).unwrap()
    }

    #[test]
    fn mu0_rejects_t_zero() {
        assert!(mu0(0.0, 0.0, &dp(1.0, 0.5, 0.1)).is_err());
    }

    #[test]
    fn mu0_mode_is_at_minus_vt() {
        let d = dp(1.0, 0.5, 0.1);
        let at = mu0(-2.0, 2.0, &d).unwrap().ln();
        for dx in [-1e-3, 1e-3] {
            assert!(mu0(-2.0 + dx, 2.0, &d).unwrap().ln() < at);
        }
    }

    #[test]
    fn residual_pins_mean_sign() {
        let d = dp(1.0, 0.5, 0.1);
        assert!(pde_residual_mu0(-1.0, 1.0, &d).unwrap().abs() < 1e-5);
        assert!(pde_residual_mirrored_mean(-1.0, 1.0, &d).unwrap().abs() > 0.1);
    }

    #[test]
    fn residual_is_second_order() {
        let d = dp(1.0, 0.5, 0.1);
        let f = |x: f64, t: f64| ln_mu0_signed(x, t, &d, -1.0);
        let r1 = pde_residual(f, -0.3, 1.5, &d, 0.02).abs();
        let r2 = pde_residual(f, -0.3, 1.5, &d, 0.01).abs();
        assert_relative_eq!(r1 / r2, 4.0, max_relative = 0.05);
    }

    #[test]
    fn boundary_examples() {
        let d = dp(0.6, 0.1, 0.1);
        assert_eq!(boundary(0.0, &d), -0.1);
        assert_relative_eq!(boundary(2.0, &d), -1.1, max_relative = 1e-15);
        let flat = dp(0.5, 0.5, 0.3);
        assert_eq!(boundary(7.0, &flat), -0.3);
    }

    #[test]
    fn unmangled_densities_vanish_at_wall() {
        let d = dp(1.0, 0.5, 0.1);
        for t in [0.1, 4.0, 100.0] {
            assert!(mu1_exact(0.0, t, &d).unwrap().is_zero());
            assert!(mu1_approx(0.0, t, &d).unwrap().is_zero());
        }
        assert!(mu1_exact(-0.1, 1.0, &d).is_err());
    }

    #[test]
    fn exact_matches_approx_for_small_eps() {
        let d = dp(1.0, 0.5, 0.1);
        for i in 0..=35 {
            let y = 0.5 + 0.1 * i as f64;
            let r = (mu1_exact(y, 4.0, &d).unwrap() / mu1_approx(y, 4.0, &d).unwrap()).to_f64();
            assert!((0.99..=1.01).contains(&r), "y = {y}: ratio {r}");
        }
    }

    #[test]
    fn approx_mode() {
        assert_relative_eq!(
            mu1_approx_mode(2.0),
            3f64.sqrt() - 1.0,
            max_relative = 1e-15
        );
        let d = dp(1.0, 0.25, 0.1);
        let m = mu1_approx_mode(2.0);
        let at = mu1_approx(m, 8.0, &d).unwrap().ln();
        assert!(mu1_approx(m - 1e-3, 8.0, &d).unwrap().ln() < at);
        assert!(mu1_approx(m + 1e-3, 8.0, &d).unwrap().ln() < at);
    }

    #[test]
    fn w_is_integral_of_approx() {
        let d = dp(1.0, 0.5, 0.1);
        for t in [2.0, 8.0, 50.0] {
            let w = unmangled_count_w(t, &d).unwrap();
            let ymax = 10f64.max(8.0 * (0.5 * t).sqrt());
            let q = integrate(
                |y| (mu1_approx(y, t, &d).unwrap() / w).to_f64(),
                0.0,
                ymax,
                Tolerance::default(),
            )
            .unwrap();
            assert_relative_eq!(q.value, 1.0, max_relative = 1e-9);
        }
    }

    #[test]
    fn exact_total_integrates() {
        let d = dp(1.0, 0.5, 0.3);
        let dist = WorldDistribution::new(WorldKind::UnmangledExact, d, 3.0).unwrap();
        let total = dist.total().unwrap();
        let q = integrate(
            |y| (dist.density(y).unwrap() / total).to_f64(),
            0.0,
            40.0,
            Tolerance::default(),
        )
        .unwrap();
        assert_relative_eq!(q.value, 1.0, max_relative = 1e-9);
    }

    #[test]
    fn w_growth_sign_follows_v_minus_w() {
        for (v, sign) in [(1.0, 1.0), (0.4, -1.0)] {
            let d = dp(v, 0.5, 0.1);
            let t = 200.0;
            let h = 1e-3;
            let slope = (unmangled_count_w(t + h, &d).unwrap().ln()
                - unmangled_count_w(t - h, &d).unwrap().ln())
                / (2.0 * h);
            assert!(slope * sign > 0.0, "v = {v}: slope {slope}");
        }
    }

    #[test]
    fn huge_exponents_stay_finite() {
        let d = dp(1.0, 0.5, 0.1);
        let w = unmangled_count_w(2e10, &d).unwrap();
        assert!(w.is_positive() && w.ln().is_finite() && w.ln() > 9e9);
        let f = MeasureFraction::from_ln(-1e5).unwrap();
        let l = lambda_count(f, 3, 2e10, 2e10, &d).unwrap();
        assert!(l.is_positive() && l.ln().is_finite());
    }

    #[test]
    fn lambda_is_linear_in_g_and_reduces_to_gamma() {
        let d = dp(1.0, 0.5, 0.05);
        let f = MeasureFraction::new(0.25).unwrap();
        let base = lambda_count(MeasureFraction::ONE, 1, 50.0, 800.0, &d).unwrap();
        let l1 = lambda_count(f, 1, 50.0, 800.0, &d).unwrap();
        let l4 = lambda_count(f, 4, 50.0, 800.0, &d).unwrap();
        assert_relative_eq!((l4 / l1).to_f64(), 4.0, max_relative = 1e-14);
        let g = gamma_correction(f, 50.0, 0.5).unwrap();
        let ratio = (l4 / base).ln() - f.ln() - 4f64.ln();
        assert!((ratio - g.ln()).abs() < 1e-13);
    }

    #[test]
    fn lambda_domain() {
        let d = dp(1.0, 0.5, 0.05);
        assert!(lambda_count(MeasureFraction::ONE, 0, 1.0, 1.0, &d).is_err());
        assert!(lambda_count(MeasureFraction::ONE, 1, 1.0, 0.0, &d).is_err());
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(
            gamma_correction(MeasureFraction::ONE, 3.0, 0.2).unwrap(),
            1.0
        );
        let g = gamma_correction(MeasureFraction::new(0.5).unwrap(), 1e10, 1.0).unwrap();
        assert!(1.0 - g < 1e-5 && 1.0 - g > 5.5e-6);
        assert!(gamma_correction(MeasureFraction::ONE, 0.0, 1.0).is_err());
    }

    #[test]
    fn regime_flags() {
        assert!(regime_warnings(Some(0.1), 100.0).is_empty());
        assert_eq!(regime_warnings(Some(3.0), 100.0).len(), 1);
        assert_eq!(
            regime_warnings(None, 0.5),
            [RegimeWarning::ShortFirstStage { wt1: 0.5 }]
        );
    }

    #[test]
    fn survival_limits() {
        assert_eq!(survival_probability(0.0, 1.0).unwrap(), 0.0);
        assert!(survival_probability(50.0, 1e-3).unwrap() > 1.0 - 1e-12);
        assert_relative_eq!(
            survival_probability(0.1, 4.0).unwrap(),
            0.000_937_445_959_328_599,
            max_relative = 1e-10
        );
    }

    proptest::proptest! {
        #[test]
        fn exact_density_nonnegative(y in 0.0f64..50.0, t in 1e-3f64..1e3, eps in 1e-3f64..5.0) {
            let d = dp(1.0, 0.5, eps);
            let m = mu1_exact(y, t, &d).unwrap();
            proptest::prop_assert!(!m.to_f64().is_sign_negative() && m.sign() != crate::special::Sign::Negative);
        }

        #[test]
        fn gamma_monotone(l1 in 0.0f64..50.0, dl in 0.0f64..10.0, wt in 1e-2f64..1e6, k in 1.0f64..10.0) {
            let f_hi = MeasureFraction::from_ln(-l1).unwrap();
            let f_lo = MeasureFraction::from_ln(-l1 - dl).unwrap();
            let g = |f, wt| gamma_correction(f, wt, 1.0).unwrap();
            proptest::prop_assert!(g(f_lo, wt) <= g(f_hi, wt));
            proptest::prop_assert!(g(f_hi, wt) <= g(f_hi, k * wt));
            let gv = g(f_hi, wt);
            proptest::prop_assert!(gv > 0.0 && gv <= 1.0);
        }
    }
}
