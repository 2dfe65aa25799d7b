//! Checks against 50-digit reference values in `fixtures/values.txt`.

use mangle_core::analytic::{
    gamma_correction, lambda_count, survival_probability, unmangled_count_w,
};
use mangle_core::mc::{enumerate_survivors, lattice_survivors, Tilt, WalkSpec};
use mangle_core::oracle::continuum_gamma;
use mangle_core::params::{binary_event_stats, count_walk_stats};
use mangle_core::special::{bracket, erfc, erfcx};
use mangle_core::{DecoherenceParams, DiffusionParams, MeasureFraction};

const VALUES: &str = include_str!("fixtures/values.txt");

fn fixture(name: &str) -> f64 {
    VALUES
        .lines()
        .find_map(|line| {
            let (k, v) = line.rsplit_once(" = ")?;
            (k == name).then(|| v.parse().expect("numeric fixture"))
        })
        .unwrap_or_else(|| panic!("no fixture {name}"))
}

fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        ((a - b) / b).abs()
    }
}

#[test]
fn erfc_values() {
    for a in [
        "0",
        "0.5",
        "0.7071067811865476",
        "1",
        "2",
        "5",
        "10",
        "20",
        "26",
        "-1",
        "-3",
    ] {
        let x: f64 = a.parse().unwrap();
        let want = fixture(&format!("erfc({a})"));
        assert!(
            rel(erfc(x), want) < 1e-13,
            "erfc({a}) = {} vs {want}",
            erfc(x)
        );
    }
}

#[test]
fn erfcx_values() {
    for a in [
        "0", "0.5", "1", "2", "5", "6", "8", "10", "30", "100", "1e4",
    ] {
        let x: f64 = a.parse().unwrap();
        let want = fixture(&format!("erfcx({a})"));
        let got = erfcx(x).unwrap();
        assert!(rel(got, want) < 1e-13, "erfcx({a}) = {got} vs {want}");
    }
}

#[test]
fn bracket_values() {
    for wt in ["1e-3", "1", "2", "1e3", "1e6", "1e10"] {
        let x: f64 = wt.parse().unwrap();
        let want = fixture(&format!("ln bracket({wt})"));
        let got = bracket(x).unwrap().ln();
        // relative accuracy of the bracket itself
        assert!(
            (got - want).abs() < 1e-8,
            "ln bracket({wt}) = {got} vs {want}"
        );
    }
}

#[test]
fn event_statistics_at_six_tenths() {
    let s = binary_event_stats(0.6).unwrap();
    assert!(rel(s.xhat1, fixture("xhat1(0.6)")) < 1e-14);
    assert!(rel(s.sigma1 * s.sigma1, fixture("sigma1^2(0.6)")) < 1e-13);
    assert!(rel(s.xtilde1, fixture("xtilde1(0.6)")) < 1e-14);
    let c = count_walk_stats(0.6).unwrap();
    assert!(rel(c.mean, fixture("count mean(0.6)")) < 1e-14);
    assert!(rel(c.var, fixture("count var(0.6)")) < 1e-13);
}

#[test]
fn born_corrections() {
    let g = |depth: f64| {
        gamma_correction(MeasureFraction::from_ln(-depth).unwrap(), 1e10, 1.0).unwrap()
    };
    assert!(rel(g(1e5), fixture("gamma headline erfc(1/sqrt2)")) < 1e-13);
    assert!(rel(g(2e5), fixture("gamma F=e^-2e5")) < 1e-12);
    assert!(rel(g(1e4), fixture("gamma F=e^-1e4")) < 1e-13);
    let log10 = -1e5 / std::f64::consts::LN_10;
    assert!((log10 - fixture("log10 e^-1e5")).abs() < 1e-9);
}

#[test]
fn continuum_two_stage_gamma() {
    for depth in [2, 5, 10] {
        let want = fixture(&format!("continuum gamma L={depth} eps=0.1 s1=25 s2=200"));
        let f = MeasureFraction::from_ln(-(depth as f64)).unwrap();
        let got = continuum_gamma(f, 0.1, 25.0, 200.0).unwrap();
        assert!(rel(got, want) < 1e-8, "L = {depth}: {got} vs {want}");
    }
    let p = survival_probability(0.1, 4.0).unwrap();
    assert!(rel(p, fixture("continuum survival eps=0.1 s=4")) < 1e-10);
}

#[test]
fn enumeration_regressions() {
    let dp = DecoherenceParams::new(0.6, 1.0).unwrap();
    let small = enumerate_survivors(&WalkSpec::new(dp, 0.05, 2).unwrap()).unwrap();
    assert_eq!(small.count, 1);
    assert!(rel(small.measure, 0.36) < 1e-14);
    let spec = WalkSpec::new(dp, 0.3, 12).unwrap().with_tilt(Tilt::Uniform);
    let e = enumerate_survivors(&spec).unwrap();
    assert_eq!(e.count, 889);
    assert!(rel(e.measure, 0.428754456576) < 1e-12);
    assert!(
        rel(
            lattice_survivors(&spec).unwrap().measure.to_f64(),
            e.measure
        ) < 1e-12
    );
}

#[test]
fn counts_stay_finite_at_huge_times() {
    let dp = DiffusionParams::new(1.5, 0.5, 0.1).unwrap();
    for t in [1e2, 1e6, 1e10] {
        let w = unmangled_count_w(t, &dp).unwrap();
        assert!(w.is_finite() && w.is_positive());
        let l = lambda_count(MeasureFraction::new(0.5).unwrap(), 2, t, t, &dp).unwrap();
        assert!(l.is_finite() && l.is_positive(), "t = {t}: {l}");
    }
}
