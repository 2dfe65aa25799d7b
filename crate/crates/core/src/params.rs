//! Discrete and continuum parameterisations of the model.
//!
//! A binary decoherence event splits every world into two children with
//! measure fractions `p` and `1 − p`. Events arrive at rate `r`. In the
//! continuum limit the log-size `x` of a world drifts at `−v` and spreads with
//! variance rate `w`, where `v = −r x̃₁` and `w = r σ₁²`.

use crate::error::domain;
use crate::float::{abs, ln, ln1p, sqrt};
use crate::{Error, Result};

/// Per-event statistics of the measure-weighted log-size step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventStats {
    /// `p ln p + (1−p) ln(1−p)`, the mean step of the median measure.
    pub xhat1: f64,
    /// `√(p(1−p)) |ln(p/(1−p))|`.
    pub sigma1: f64,
    /// `xhat1 − sigma1²`, the mean step of the median world.
    pub xtilde1: f64,
}

/// Mean and variance of one step when both children are counted equally.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountWalkStats {
    pub mean: f64,
    pub var: f64,
}

fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(domain("p", p, "0 < p < 1"))
    }
}

/// `(ln p, ln(1−p))` with full precision near either end.
pub(crate) fn branch_logs(p: f64) -> (f64, f64) {
    (ln(p), ln1p(-p))
}

pub fn binary_event_stats(p: f64) -> Result<EventStats> {
    check_p(p)?;
    let (lp, lq) = branch_logs(p);
    let q = 1.0 - p;
    let xhat1 = p * lp + q * lq;
    let sigma1 = sqrt(p * q) * abs(lp - lq);
    Ok(EventStats {
        xhat1,
        sigma1,
        xtilde1: xhat1 - sigma1 * sigma1,
    })
}

pub fn count_walk_stats(p: f64) -> Result<CountWalkStats> {
    check_p(p)?;
    let (lp, lq) = branch_logs(p);
    let d = lp - lq;
    Ok(CountWalkStats {
        mean: 0.5 * (lp + lq),
        var: 0.25 * d * d,
    })
}

/// Binary-event model: branch weight `p`, event rate `r`, optional event count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoherenceParams {
    p: f64,
    rate: f64,
    events: Option<u64>,
}

impl DecoherenceParams {
    pub fn new(p: f64, rate: f64) -> Result<Self> {
        check_p(p)?;
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(domain("r", rate, "0 < r < inf"));
        }
        Ok(Self {
            p,
            rate,
            events: None,
        })
    }

    pub fn with_events(self, n: u64) -> Self {
        Self {
            events: Some(n),
            ..self
        }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn events(&self) -> Option<u64> {
        self.events
    }

    pub fn stats(&self) -> EventStats {
        binary_event_stats(self.p).expect("p validated at construction")
    }

    pub fn count_walk(&self) -> CountWalkStats {
        count_walk_stats(self.p).expect("p validated at construction")
    }

    /// Elapsed time after `n` events.
    pub fn time_of(&self, n: u64) -> f64 {
        n as f64 / self.rate
    }

    /// `v = −r x̃₁`, `w = r σ₁²`. At `p = 1/2` the result has `w = 0` and is
    /// flagged degenerate.
    pub fn to_diffusion(&self, eps: f64) -> Result<DiffusionParams> {
        let s = self.stats();
        DiffusionParams::build(
            -self.rate * s.xtilde1,
            self.rate * s.sigma1 * s.sigma1,
            eps,
            true,
        )
    }
}

/// Continuum model: drift `v`, diffusion `w`, boundary offset `ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionParams {
    pub(crate) v: f64,
    pub(crate) w: f64,
    pub(crate) eps: f64,
}

impl DiffusionParams {
    /// All of `v`, `w`, `ε` must be positive and finite.
    pub fn new(v: f64, w: f64, eps: f64) -> Result<Self> {
        Self::build(v, w, eps, false)
    }

    fn build(v: f64, w: f64, eps: f64, allow_zero_w: bool) -> Result<Self> {
        if !(v > 0.0 && v.is_finite()) {
            return Err(domain("v", v, "0 < v < inf"));
        }
        let w_ok = if allow_zero_w { w >= 0.0 } else { w > 0.0 };
        if !(w_ok && w.is_finite()) {
            return Err(domain("w", w, "0 < w < inf"));
        }
        if !(eps > 0.0) {
            return Err(domain("eps", eps, "eps > 0"));
        }
        Ok(Self { v, w, eps })
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn with_eps(self, eps: f64) -> Result<Self> {
        Self::build(self.v, self.w, eps, true)
    }

    /// `w = 0`: pure drift, rejected by the analytic and PDE engines.
    pub fn is_degenerate(&self) -> bool {
        self.w == 0.0
    }

    /// True iff the unmangled count grows, `v > w`.
    pub fn survival_regime(&self) -> bool {
        self.v > self.w
    }

    /// Error unless `w > 0`.
    pub fn require_diffusive(&self) -> Result<()> {
        if self.is_degenerate() {
            Err(Error::Degenerate(
                "w = 0 (p = 1/2): pure drift without diffusion",
            ))
        } else {
            Ok(())
        }
    }
}

/// A measure fraction `F ∈ (0, 1]`, stored as `ln F` so `F = e^{−10⁵}` is exact.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct MeasureFraction(f64);

impl MeasureFraction {
    pub const ONE: Self = Self(0.0);

    pub fn new(f: f64) -> Result<Self> {
        if f > 0.0 && f <= 1.0 {
            Ok(Self(ln(f)))
        } else {
            Err(domain("F", f, "0 < F <= 1"))
        }
    }

    pub fn from_ln(ln_f: f64) -> Result<Self> {
        if ln_f <= 0.0 && ln_f > f64::NEG_INFINITY {
            Ok(Self(ln_f))
        } else {
            Err(domain("ln F", ln_f, "-inf < ln F <= 0"))
        }
    }

    pub fn ln(self) -> f64 {
        self.0
    }

    /// `−ln F ≥ 0`, the downward shift of a world's log-size.
    pub fn depth(self) -> f64 {
        -self.0
    }

    pub fn value(self) -> f64 {
        crate::float::exp(self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use core::f64::consts::LN_2;
    use proptest::prelude::*;

    #[test]
    fn symmetric_split() {
        let s = binary_event_stats(0.5).unwrap();
        assert_relative_eq!(s.xhat1, -LN_2, max_relative = 1e-15);
        assert_eq!(s.sigma1, 0.0);
        assert_eq!(s.xtilde1, s.xhat1);
        let c = count_walk_stats(0.5).unwrap();
        assert_relative_eq!(c.mean, -LN_2, max_relative = 1e-15);
        assert_eq!(c.var, 0.0);
    }

    #[test]
    fn rejects_bad_p() {
        for p in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(binary_event_stats(p).is_err());
            assert!(count_walk_stats(p).is_err());
            assert!(DecoherenceParams::new(p, 1.0).is_err());
        }
        assert!(DecoherenceParams::new(0.6, 0.0).is_err());
    }

    #[test]
    fn near_one_limit() {
        let s = binary_event_stats(1.0 - 1e-12).unwrap();
        assert!(s.xhat1 < 0.0 && s.xhat1 > -1e-10);
        assert!(s.sigma1 < 1e-4);
    }

    #[test]
    fn half_is_degenerate() {
        let d = DecoherenceParams::new(0.5, 1.0)
            .unwrap()
            .to_diffusion(0.1)
            .unwrap();
        assert!(d.is_degenerate());
        assert!(d.require_diffusive().is_err());
        assert!(DiffusionParams::new(1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn p06_is_in_survival_regime() {
        let d = DecoherenceParams::new(0.6, 1.0)
            .unwrap()
            .to_diffusion(0.1)
            .unwrap();
        assert!(d.survival_regime());
        assert!(!d.is_degenerate());
    }

    #[test]
    fn count_variance_dominates_on_grid() {
        for k in 51..=99 {
            let p = k as f64 / 100.0;
            let s = binary_event_stats(p).unwrap();
            let c = count_walk_stats(p).unwrap();
            assert!(c.var > s.sigma1 * s.sigma1);
            assert_relative_eq!(
                c.var / (s.sigma1 * s.sigma1),
                1.0 / (4.0 * p * (1.0 - p)),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn measure_fraction_domain() {
        assert!(MeasureFraction::new(0.0).is_err());
        assert!(MeasureFraction::new(1.0 + 1e-12).is_err());
        assert_eq!(MeasureFraction::new(1.0).unwrap(), MeasureFraction::ONE);
        assert_eq!(MeasureFraction::from_ln(-1e5).unwrap().depth(), 1e5);
        assert!(MeasureFraction::from_ln(0.1).is_err());
    }

    proptest! {
        #[test]
        fn ordering_of_medians(p in 1e-6f64..(1.0 - 1e-6)) {
            let s = binary_event_stats(p).unwrap();
            prop_assert!(s.xtilde1 <= s.xhat1 && s.xhat1 < 0.0);
            prop_assert!(s.sigma1 >= 0.0);
        }

        #[test]
        fn relabel_invariant(p in 1e-6f64..(1.0 - 1e-6)) {
            let a = binary_event_stats(p).unwrap();
            let b = binary_event_stats(1.0 - p).unwrap();
            prop_assert!((a.xhat1 - b.xhat1).abs() <= 1e-12 * a.xhat1.abs());
            prop_assert!((a.sigma1 - b.sigma1).abs() <= 1e-9 * a.sigma1.max(1e-300));
            prop_assert!((a.xtilde1 - b.xtilde1).abs() <= 1e-12 * a.xtilde1.abs());
        }

        #[test]
        fn drift_minus_diffusion_identity(p in 0.01f64..0.99, r in 1e-3f64..1e3) {
            let dp = DecoherenceParams::new(p, r).unwrap();
            let d = dp.to_diffusion(0.1).unwrap();
            let lhs = d.v() - d.w();
            let rhs = -r * dp.stats().xhat1;
            prop_assert!(rhs > 0.0);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs);
        }

        #[test]
        fn homogeneous_in_rate(p in 0.01f64..0.99, r in 1e-3f64..1e3, c in 1e-2f64..1e2) {
            let a = DecoherenceParams::new(p, r).unwrap().to_diffusion(0.1).unwrap();
            let b = DecoherenceParams::new(p, c * r).unwrap().to_diffusion(0.1).unwrap();
            prop_assert!((b.v() - c * a.v()).abs() <= 1e-12 * b.v());
            prop_assert!((b.w() - c * a.w()).abs() <= 1e-12 * b.w().max(1e-300));
        }
    }
}
