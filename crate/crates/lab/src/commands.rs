//! The subcommands. Each builds its tables in memory and returns them with
//! a short text summary; nothing touches the disk here.

use std::fmt::Write as _;

use anyhow::Result;
use mangle_core::analytic::{
    boundary, gamma_correction, lambda_count, mu0, mu1_approx, mu1_exact, regime_warnings,
    survival_probability, unmangled_count_w, COMOVING_JACOBIAN,
};
use mangle_core::born::{deviation_table, headline_check, survival_condition_scan, Engine};
use mangle_core::mc::{
    born_two_stage_mc, empirical_distribution, lattice_gamma, lattice_survivors,
    simulate_survivors, HistogramBins, Tilt,
};
use mangle_core::oracle::continuum_gamma;
use mangle_core::pde::{gamma_estimates, gamma_series, init_delta, Stepper, Wall};
use mangle_core::{DiffusionParams, LogValue};
use serde_json::json;

use crate::config::{Resolved, RunConfig, UsageError};
use crate::output::{Cell, RunFiles, Table};
use crate::runner::Pool;
use crate::validate;

/// What a subcommand produced.
pub struct Report {
    pub files: RunFiles,
    pub summary: String,
    /// False when a check failed or an engine could not run.
    pub passed: bool,
}

fn ln_or_neg_inf(v: mangle_core::Result<LogValue>) -> f64 {
    v.map_or(f64::NAN, |x| x.ln())
}

fn describe(out: &mut String, dp: &DiffusionParams, r: &Resolved) {
    let _ = writeln!(
        out,
        "v = {:.6}, w = {:.6}, eps = {}, t1 = {}, t2 = {}, wt1 = {:.4}, wt2 = {:.4}",
        dp.v(),
        dp.w(),
        dp.eps(),
        r.t1,
        r.t2,
        dp.w() * r.t1,
        dp.w() * r.t2
    );
    for w in regime_warnings(Some(dp.eps()), dp.w() * r.t1) {
        let _ = writeln!(out, "warning: {w:?}");
    }
}

pub fn analytic(c: &RunConfig, r: &Resolved) -> Result<Report> {
    let dp = r.dp;
    dp.require_diffusive()?;
    let mut files = RunFiles::default();
    let mut summary = String::from("analytic\n");
    describe(&mut summary, &dp, r);

    let t = r.t1;
    let xb = boundary(t, &dp);
    let mut dens = Table::new(&["y", "x", "ln_mu0", "ln_mu1_exact", "ln_mu1_approx"]);
    let n = c.analytic.n_points;
    for i in 0..n {
        let y = c.analytic.y_max * i as f64 / (n - 1) as f64;
        let x = xb + y;
        dens.push(vec![
            y.into(),
            x.into(),
            ln_or_neg_inf(mu0(x, t, &dp)).into(),
            ln_or_neg_inf(mu1_exact(y, t, &dp)).into(),
            ln_or_neg_inf(mu1_approx(y, t, &dp)).into(),
        ]);
    }
    files.table("densities.csv", &dens);

    let mut counts = Table::new(&["t", "wt", "ln_w", "survival_probability"]);
    let total = r.t1 + r.t2;
    for k in 1..=c.analytic.n_times {
        let tk = total * k as f64 / c.analytic.n_times as f64;
        counts.push(vec![
            tk.into(),
            (dp.w() * tk).into(),
            ln_or_neg_inf(unmangled_count_w(tk, &dp)).into(),
            survival_probability(dp.eps(), dp.w() * tk)
                .map_or(f64::NAN, |p| p)
                .into(),
        ]);
    }
    files.table("counts.csv", &counts);

    let mut gam = Table::new(&["ln_f", "gamma", "ln_lambda"]);
    let _ = writeln!(summary, "ln F, gamma:");
    for f in &r.fractions {
        let g = gamma_correction(*f, r.t1, dp.w())?;
        let lam = lambda_count(*f, 1, r.t1, r.t2, &dp)?;
        gam.push(vec![f.ln().into(), g.into(), lam.into()]);
        let _ = writeln!(summary, "  {:>8.3}  {:.8}", f.ln(), g);
    }
    files.table("gamma.csv", &gam);
    let _ = writeln!(
        summary,
        "ln W(t1) = {:.10}",
        unmangled_count_w(t, &dp)?.ln()
    );
    Ok(Report {
        files,
        summary,
        passed: true,
    })
}

pub fn pde(c: &RunConfig, r: &Resolved) -> Result<Report> {
    let dp = r.dp;
    dp.require_diffusive()?;
    let grid = r.grid;
    let mut files = RunFiles::default();
    let mut summary = String::from("pde\n");
    describe(&mut summary, &dp, r);
    let _ = writeln!(
        summary,
        "grid: y_max = {}, n_cells = {}, dt = {}, scheme = {:?}",
        grid.y_max(),
        grid.n_cells(),
        grid.dt(),
        grid.scheme()
    );

    let mut field = init_delta(&grid, dp.eps())?;
    let mut stepper = Stepper::new(&grid, &dp, Wall::Absorbing)?;
    let snaps = c.grid.snapshots.max(1);
    let mut series = Table::new(&["t", "ln_survivors", "ln_analytic", "absorbed_share"]);
    let mut dens = Table::new(&["t", "y", "density", "approx_density"]);
    let mut shape = Vec::new();
    for _ in 0..snaps {
        stepper.advance(&mut field, r.t1 / snaps as f64)?;
        let t = field.t();
        let w = unmangled_count_w(t, &dp)?;
        series.push(vec![
            t.into(),
            field.survivors().into(),
            w.scale_ln(COMOVING_JACOBIAN.ln()).into(),
            (field.absorbed() / (field.absorbed() + field.mass()))
                .to_f64()
                .into(),
        ]);
        let approx = |y: f64| mu1_approx(y, t, &dp).map_or(0.0, |m| (m / w).to_f64());
        let mass = field.mass();
        for i in 0..=grid.n_cells() {
            let y = grid.node(i);
            dens.push(vec![
                t.into(),
                y.into(),
                (field.value(i) / mass).to_f64().into(),
                approx(y).into(),
            ]);
        }
        shape.push((t, field.shape_l1(approx)));
    }
    files.table("survivors.csv", &series);
    files.table("density.csv", &dens);
    let ratio =
        field.survivors().ln() - unmangled_count_w(r.t1, &dp)?.ln() - COMOVING_JACOBIAN.ln();
    let _ = writeln!(summary, "survivors / analytic at t1 = {:.6}", ratio.exp());
    if let Some((t, l1)) = shape.last() {
        let _ = writeln!(
            summary,
            "shape L1 vs approximate density at t = {t}: {l1:.5}"
        );
    }

    let estimates = gamma_estimates(&dp, &grid, r.t1, &r.fractions, r.t2)?;
    let mut gam = Table::new(&["ln_f", "gamma_pde", "gamma_continuum", "gamma_erfc"]);
    let _ = writeln!(summary, "ln F, gamma (pde, continuum, erfc):");
    for (f, g) in r.fractions.iter().zip(estimates) {
        let cont = continuum_gamma(*f, dp.eps(), dp.w() * r.t1, dp.w() * r.t2)?;
        let erfc = gamma_correction(*f, r.t1, dp.w())?;
        gam.push(vec![f.ln().into(), g.into(), cont.into(), erfc.into()]);
        let _ = writeln!(summary, "  {:>8.3}  {g:.6}  {cont:.6}  {erfc:.6}", f.ln());
    }
    files.table("gamma.csv", &gam);

    if let Some(&f) = r.fractions.first() {
        let every = (r.t2 / grid.dt() / 200.0).ceil().max(1.0) as usize;
        let mut ts = Table::new(&["t_after_split", "gamma"]);
        for (t, g) in gamma_series(&dp, &grid, r.t1, f, r.t2, every)? {
            ts.push(vec![t.into(), g.into()]);
        }
        files.table("gamma_series.csv", &ts);
    }
    Ok(Report {
        files,
        summary,
        passed: true,
    })
}

fn require_seed(c: &RunConfig) -> Result<u64, UsageError> {
    c.mc.seed
        .ok_or_else(|| UsageError("mc.seed: Monte Carlo runs need an explicit --seed".into()))
}

fn tilt_name(t: Tilt) -> &'static str {
    match t {
        Tilt::Uniform => "none",
        Tilt::Measure => "measure",
    }
}

pub fn mc(c: &RunConfig, r: &Resolved, pool: &Pool) -> Result<Report> {
    let seed = require_seed(c)?;
    let n_paths = c.mc.n_paths;
    let walk = r.single_walk(c);
    let cont = r.model.to_diffusion(walk.eps)?;
    let mut files = RunFiles::default();
    let mut summary = String::from("mc\n");
    let _ = writeln!(
        summary,
        "p = {}, r = {}, eps = {}, N1 = {}, N2 = {}, paths = {n_paths}, seed = {seed}",
        r.model.p(),
        r.model.rate(),
        walk.eps,
        r.n1,
        r.n2
    );

    log::info!("mc: survivors after {} events", walk.n_events);
    let est = simulate_survivors(&walk, n_paths, seed, pool)?;
    let exact = lattice_survivors(&walk)?;
    let rel_var = exact.relative_variance(walk.tilt);
    let mut t = Table::new(&[
        "tilt",
        "n_events",
        "n_paths",
        "seed",
        "survivors",
        "ln_estimate",
        "ln_std_error",
        "relative_error",
        "ln_exact",
        "exact_relative_error",
    ]);
    t.push(vec![
        tilt_name(walk.tilt).into(),
        walk.n_events.into(),
        n_paths.into(),
        seed.into(),
        est.survivor_count.into(),
        est.estimate().into(),
        est.std_error().into(),
        est.relative_error().into(),
        exact.count.into(),
        (rel_var / n_paths as f64).sqrt().into(),
    ]);
    files.table("estimates.csv", &t);
    let _ = writeln!(
        summary,
        "survivors: ln estimate = {:.6} ± {:.2e} (relative), exact ln = {:.6}",
        est.estimate().ln(),
        est.relative_error(),
        exact.count.ln()
    );

    log::info!("mc: survivor histogram");
    let bins = HistogramBins::lattice_aligned(&walk, c.mc.y_hi)?;
    let hist = empirical_distribution(&walk, n_paths, seed, bins, pool)?;
    let t_end = r.model.time_of(walk.n_events);
    let w = unmangled_count_w(t_end, &cont)?;
    let approx = |y: f64| mu1_approx(y, t_end, &cont).map_or(0.0, |m| (m / w).to_f64());
    let mut h = Table::new(&["y", "probability", "density", "approx_density"]);
    if hist.is_empty() {
        let _ = writeln!(summary, "histogram: no survivors");
    } else {
        for (i, (p, d)) in hist
            .probabilities()
            .into_iter()
            .zip(hist.density())
            .enumerate()
        {
            let y = bins.centre(i);
            h.push(vec![y.into(), p.into(), d.into(), approx(y).into()]);
        }
        let _ = writeln!(
            summary,
            "histogram: {} survivors, L1 to approximate density = {:.4}, mean height = {:.4}",
            hist.survivors,
            hist.l1_distance(approx)?,
            hist.mean()
        );
    }
    files.table("histogram.csv", &h);

    log::info!("mc: two-stage protocol");
    let two = born_two_stage_mc(&r.walk, r.n2, &r.fractions, 1, n_paths, seed, pool)?;
    let mut g = Table::new(&[
        "ln_f",
        "gamma",
        "std_error",
        "gamma_lattice",
        "gamma_erfc",
        "split_survivors",
        "plain_survivors",
    ]);
    let _ = writeln!(summary, "ln F, gamma ± se, exact discrete, erfc:");
    for (f, e) in r.fractions.iter().zip(&two) {
        let (gamma, se) = e.gamma();
        let exact = lattice_gamma(&r.walk, r.n2, *f)?;
        let erfc = gamma_correction(*f, r.model.time_of(r.n1), cont.w())?;
        g.push(vec![
            f.ln().into(),
            gamma.into(),
            se.into(),
            exact.into(),
            erfc.into(),
            e.split_survivors.into(),
            e.plain_survivors.into(),
        ]);
        let _ = writeln!(
            summary,
            "  {:>8.3}  {gamma:.5} ± {se:.5}  {exact:.5}  {erfc:.5}",
            f.ln()
        );
    }
    files.table("gamma.csv", &g);
    Ok(Report {
        files,
        summary,
        passed: true,
    })
}

pub fn born(c: &RunConfig, r: &Resolved, pool: &Pool) -> Result<Report> {
    let mc = if r.engines.contains(&Engine::Mc) {
        Some(r.mc_setup(c.mc.n_paths, require_seed(c)?))
    } else {
        None
    };
    let experiment = r.experiment(mc);
    let report = deviation_table(&r.outcomes, &experiment, pool)?;
    let mut t = Table::new(&[
        "engine",
        "label",
        "f",
        "g",
        "born_probability",
        "ln_lambda",
        "share",
        "share_over_born",
        "gamma",
        "gamma_std_error",
        "analytic_gamma",
    ]);
    let mut summary = String::from("born\n");
    describe(&mut summary, &r.dp, r);
    let _ = writeln!(
        summary,
        "engine    outcome        F*G      share   share/FG      gamma"
    );
    for row in &report.rows {
        let o = r
            .outcomes
            .iter()
            .find(|o| o.label == row.label)
            .expect("row from an outcome");
        t.push(vec![
            row.engine.name().into(),
            row.label.clone().into(),
            o.fraction.value().into(),
            o.g.into(),
            row.born_probability.into(),
            row.lambda.into(),
            row.share.into(),
            row.share_over_born.into(),
            row.gamma.into(),
            Cell::from(row.gamma_std_error),
            row.analytic_gamma.into(),
        ]);
        let _ = writeln!(
            summary,
            "{:<9} {:<10} {:>9.6} {:>10.6} {:>10.6} {:>10.6}",
            row.engine.name(),
            row.label,
            row.born_probability,
            row.share,
            row.share_over_born,
            row.gamma
        );
    }
    for (engine, err) in &report.failures {
        let _ = writeln!(summary, "engine {engine} failed: {err}");
    }
    let meta = json!({
        "v": r.dp.v(),
        "w": r.dp.w(),
        "eps": r.dp.eps(),
        "t1": r.t1,
        "t2": r.t2,
        "engines": r.engines.iter().map(|e| e.name()).collect::<Vec<_>>(),
        "grid": {
            "y_max": r.grid.y_max(),
            "n_cells": r.grid.n_cells(),
            "dt": r.grid.dt(),
        },
        "mc": experiment.mc.map(|m| json!({
            "p": r.model.p(),
            "r": r.model.rate(),
            "n1": m.walk.n_events,
            "n2": m.n2,
            "n_paths": m.n_paths,
            "seed": m.seed,
            "tilt": tilt_name(m.walk.tilt),
        })),
        "failures": report.failures.iter().map(|(e, err)| json!({"engine": e.name(), "error": err.to_string()})).collect::<Vec<_>>(),
    });
    let mut files = RunFiles::default();
    files.table("deviation.csv", &t);
    files.text(
        "deviation.json",
        serde_json::to_string_pretty(&meta)? + "\n",
    );
    Ok(Report {
        files,
        summary,
        passed: report.is_complete(),
    })
}

pub fn headline() -> Result<Report> {
    let h = headline_check()?;
    let mut t = Table::new(&["quantity", "value"]);
    t.push(vec!["gamma".into(), h.gamma.into()]);
    t.push(vec!["erfc_1_over_sqrt2".into(), h.reference.into()]);
    t.push(vec!["log10_f".into(), h.log10_f.into()]);
    t.push(vec!["below_bound".into(), h.below_bound.into()]);
    t.push(vec![
        "gamma_f_e_minus_2e5".into(),
        h.gamma_double_depth.into(),
    ]);
    t.push(vec![
        "gamma_f_e_minus_1e4".into(),
        h.gamma_tenth_depth.into(),
    ]);
    let mut files = RunFiles::default();
    files.table("headline.csv", &t);
    Ok(Report {
        files,
        summary: format!("headline\n{h}\n"),
        passed: h.passes(),
    })
}

pub fn scan(c: &RunConfig) -> Result<Report> {
    let grid: Vec<(f64, f64)> = c
        .scan
        .p
        .iter()
        .flat_map(|&p| c.scan.r.iter().map(move |&r| (p, r)))
        .collect();
    let rows = survival_condition_scan(&grid)?;
    let mut t = Table::new(&[
        "p",
        "r",
        "v",
        "w",
        "v_minus_w",
        "all_worlds_exponent",
        "identity_residual",
        "degenerate",
        "shrinking_fraction",
    ]);
    let mut summary =
        String::from("scan\n       p        r          v          w      v - w   flags\n");
    for row in &rows {
        t.push(vec![
            row.p.into(),
            row.r.into(),
            row.v.into(),
            row.w.into(),
            row.v_minus_w.into(),
            row.all_worlds.into(),
            row.identity_residual.into(),
            row.degenerate.into(),
            row.shrinking_fraction.into(),
        ]);
        let flag = if row.degenerate {
            "degenerate (w = 0)"
        } else if row.shrinking_fraction {
            "grows, shrinking fraction"
        } else {
            ""
        };
        let _ = writeln!(
            summary,
            "{:>8.4} {:>8.4} {:>10.6} {:>10.6} {:>10.6}   {flag}",
            row.p, row.r, row.v, row.w, row.v_minus_w
        );
    }
    let mut files = RunFiles::default();
    files.table("scan.csv", &t);
    Ok(Report {
        files,
        summary,
        passed: true,
    })
}

pub fn validate(pool: &Pool) -> Result<Report> {
    let checks = validate::run_suite(pool);
    let mut t = Table::new(&["check", "passed", "detail"]);
    let mut summary = String::from("validate\n");
    for ch in &checks {
        t.push(vec![
            ch.name.into(),
            ch.passed.into(),
            ch.detail.clone().into(),
        ]);
        let _ = writeln!(summary, "{ch}");
    }
    let passed = checks.iter().all(|c| c.passed);
    let _ = writeln!(
        summary,
        "{} of {} checks passed",
        checks.iter().filter(|c| c.passed).count(),
        checks.len()
    );
    let mut files = RunFiles::default();
    files.table("checks.csv", &t);
    Ok(Report {
        files,
        summary,
        passed,
    })
}
