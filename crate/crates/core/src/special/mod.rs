//! Error functions and log-space arithmetic.
//!
//! `erfc` underflows near `a ≈ 26.5` (the result leaves the normal range), so
//! every closed form goes through [`erfcx`]`(a) = e^{a²} erfc(a)` or
//! [`ln_erfc`].
//!
//! Regime cross-overs:
//!
//! | constant                 | value | below                          | above                        |
//! |--------------------------|-------|--------------------------------|------------------------------|
//! | [`ERFCX_TAIL_START`]     | 1.25  | `exp(a²)·erfc(a)`              | scaled rational `e^{R/S}/a`  |
//! | [`ERFCX_CF_START`]       | 6     | scaled rational                | Lentz continued fraction     |
//! | [`BRACKET_SERIES_START`] | 6     | `1/(a√π) − erfcx(a)` directly  | asymptotic series            |
//!
//! Each seam has a test checking that both sides agree to `1e−12` (erfcx) or
//! `1e−10` (bracket) relative.

#[allow(clippy::excessive_precision)]
mod fdlibm;
mod log_value;

pub use fdlibm::{erf, erfc};
pub use log_value::{ln1m_exp, log_diff_exp, log_sum_exp, LogValue, Sign};

use crate::error::domain;
use crate::float::{exp, ln, sqrt};
use crate::Result;

/// `1/√π`.
pub const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

pub const ERFCX_TAIL_START: f64 = 1.25;
pub const ERFCX_CF_START: f64 = 6.0;
pub const BRACKET_SERIES_START: f64 = 6.0;

/// The individual erfcx evaluation paths, exposed for seam tests.
pub mod regimes {
    use super::{fdlibm, FRAC_1_SQRT_PI};
    use crate::float::{abs, exp};

    /// `exp(a²)·erfc(a)`; accurate while `exp(a²)` is modest.
    pub fn direct(a: f64) -> f64 {
        exp(a * a) * fdlibm::erfc(a)
    }

    /// `exp(−0.5625 + R/S)/a` from the fdlibm tail fit, valid on `[1.25, 28)`.
    pub fn rational(a: f64) -> f64 {
        fdlibm::scaled_tail(a)
    }

    /// Laplace continued fraction
    /// `erfcx(a) = (1/√π) / (a + (1/2)/(a + 1/(a + (3/2)/(a + …))))`,
    /// evaluated with modified Lentz. Converges for every `a > 0`, fast for
    /// large `a`.
    pub fn continued_fraction(a: f64) -> f64 {
        const TINY: f64 = 1e-300;
        let mut f = if a == 0.0 { TINY } else { a };
        let mut c = f;
        let mut d = 0.0;
        for n in 1..20_000u32 {
            let an = 0.5 * n as f64;
            d = a + an * d;
            if d == 0.0 {
                d = TINY;
            }
            d = 1.0 / d;
            c = a + an / c;
            if c == 0.0 {
                c = TINY;
            }
            let delta = c * d;
            f *= delta;
            if abs(delta - 1.0) < 1e-16 {
                break;
            }
        }
        FRAC_1_SQRT_PI / f
    }
}

/// Scaled complementary error function `e^{a²} erfc(a)` for `a ≥ 0`.
pub fn erfcx(a: f64) -> Result<f64> {
    if a.is_nan() {
        return Ok(a);
    }
    if a < 0.0 {
        return Err(domain("a", a, "erfcx needs a >= 0"));
    }
    Ok(if a < ERFCX_TAIL_START {
        regimes::direct(a)
    } else if a < ERFCX_CF_START {
        regimes::rational(a)
    } else if a.is_infinite() {
        0.0
    } else {
        regimes::continued_fraction(a)
    })
}

/// `ln erfc(a)` for any real `a`, finite far beyond the underflow of `erfc`.
pub fn ln_erfc(a: f64) -> f64 {
    if a < 1.0 {
        ln(erfc(a))
    } else {
        // a >= 1 cannot fail
        -a * a + ln(erfcx(a).unwrap_or(f64::NAN))
    }
}

/// `B(wt) = √(2/(πwt)) − e^{wt/2} erfc(√(wt/2))`, always positive.
///
/// With `a = √(wt/2)`, `B = 1/(a√π) − erfcx(a)`. For large `a` the difference
/// cancels, so the tail uses
/// `B = (1/(a√π)) Σ_{n≥1} (−1)^{n+1} (2n−1)!!/(2a²)^n`, truncated at its
/// smallest term.
pub fn bracket(wt: f64) -> Result<LogValue> {
    if !(wt > 0.0) || wt.is_infinite() {
        return Err(domain("wt", wt, "bracket needs 0 < wt < inf"));
    }
    let a = sqrt(0.5 * wt);
    if a < BRACKET_SERIES_START {
        let b = FRAC_1_SQRT_PI / a - erfcx(a)?;
        return Ok(LogValue::from_f64(b));
    }
    Ok(LogValue::from_ln(
        ln(FRAC_1_SQRT_PI / a) + ln(bracket_series(a)),
    ))
}

/// `Σ (−1)^{n+1} (2n−1)!!/(2a²)^n`, stopped before the terms start growing.
fn bracket_series(a: f64) -> f64 {
    let x = 1.0 / (2.0 * a * a);
    let mut term = x;
    let mut sum = 0.0;
    let mut n = 1u32;
    loop {
        sum += term;
        let next = -term * (2 * n + 1) as f64 * x;
        if next.abs() >= term.abs() || next.abs() < 1e-18 * sum.abs() {
            break;
        }
        term = next;
        n += 1;
    }
    sum
}

/// Leading asymptotic term of `B`: `(1/√π)(2/wt)^{3/2}/2`.
pub fn bracket_leading(wt: f64) -> f64 {
    FRAC_1_SQRT_PI * exp(1.5 * ln(2.0 / wt)) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn erfc_small_examples() {
        assert_eq!(erfc(0.0), 1.0);
        assert_relative_eq!(
            erfc(core::f64::consts::FRAC_1_SQRT_2),
            0.317_310_507_862_914_05,
            max_relative = 1e-14
        );
        for a in [0.1, 0.7, 1.3, 3.0, 10.0] {
            assert_relative_eq!(erfc(-a), 2.0 - erfc(a), max_relative = 1e-15);
        }
        assert!(erfc(f64::NAN).is_nan());
        assert_eq!(erfc(30.0), 0.0);
    }

    #[test]
    fn erfcx_rejects_negative() {
        assert!(erfcx(-1e-9).is_err());
        assert_eq!(erfcx(0.0).unwrap(), 1.0);
    }

    #[test]
    fn erfcx_leading_asymptote() {
        for a in [1e3, 1e5, 1e8] {
            let v = erfcx(a).unwrap() * a / FRAC_1_SQRT_PI;
            assert_relative_eq!(v, 1.0, max_relative = 1.0 / (a * a));
        }
    }

    #[test]
    fn erfcx_seams_agree() {
        for a in [ERFCX_TAIL_START, ERFCX_CF_START] {
            for x in [a * (1.0 - 1e-12), a, a * (1.0 + 1e-12)] {
                let lo = if a == ERFCX_TAIL_START {
                    regimes::direct(x)
                } else {
                    regimes::rational(x)
                };
                let hi = if a == ERFCX_TAIL_START {
                    regimes::rational(x)
                } else {
                    regimes::continued_fraction(x)
                };
                assert_relative_eq!(lo, hi, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn bracket_examples() {
        let b = bracket(2.0).unwrap().to_f64();
        assert_relative_eq!(
            b,
            FRAC_1_SQRT_PI - erfcx(1.0).unwrap(),
            max_relative = 1e-15
        );
        assert_relative_eq!(b, 0.136_606, max_relative = 5e-6);
        assert!(bracket(0.0).is_err());
        assert!(bracket(-1.0).is_err());
        let small = bracket(1e-10).unwrap().to_f64();
        assert_relative_eq!(
            small,
            (2.0 / (core::f64::consts::PI * 1e-10)).sqrt() - 1.0,
            max_relative = 1e-6
        );
    }

    #[test]
    fn bracket_seam_agrees() {
        let a = BRACKET_SERIES_START;
        let direct = FRAC_1_SQRT_PI / a - erfcx(a).unwrap();
        let series = FRAC_1_SQRT_PI / a * bracket_series(a);
        assert_relative_eq!(direct, series, max_relative = 1e-10);
    }

    #[test]
    fn bracket_approaches_leading_term() {
        let r = bracket(1e6).unwrap().to_f64() / bracket_leading(1e6);
        assert!((r - 1.0).abs() < 0.01);
    }

    #[test]
    fn ln_erfc_is_continuous_at_switch() {
        let below = ln_erfc(1.0 - 1e-12);
        let above = ln_erfc(1.0);
        assert!((below - above).abs() < 1e-11);
        assert_relative_eq!(
            ln_erfc(100.0),
            -10_000.0 + erfcx(100.0).unwrap().ln(),
            max_relative = 1e-15
        );
    }

    proptest! {
        #[test]
        fn erfcx_identity(a in 0.0f64..26.0) {
            let lhs = erfcx(a).unwrap() * exp(-a * a);
            prop_assert!((lhs - erfc(a)).abs() <= 1e-12 * erfc(a));
        }

        #[test]
        fn erfc_decreasing(a in -30.0f64..30.0, da in 1e-3f64..1.0) {
            prop_assert!(erfc(a + da) <= erfc(a));
            if a > -5.0 && a + da < 26.0 {
                prop_assert!(erfc(a + da) < erfc(a));
            }
        }

        #[test]
        fn erfcx_decreasing(a in 0.0f64..1e4, da in 1e-3f64..1.0) {
            prop_assert!(erfcx(a + da).unwrap() < erfcx(a).unwrap());
        }

        #[test]
        fn bracket_positive(lg in -6.0f64..12.0) {
            let b = bracket(10f64.powf(lg)).unwrap();
            prop_assert!(b.is_positive() && b.ln().is_finite());
        }
    }
}
