//! Finite-difference solver for the comoving equation
//! `ν̇ = w ∂_y ν + (w/2) ∂²_y ν` on `0 ≤ y ≤ y_max`, absorbing at `y = 0`.
//!
//! The unmangled density is `μ = ν e^{(v−w/2)t}`; the growth factor is applied
//! analytically and kept in [`Field::growth_log`].
//!
//! Space is discretised in conservation form on nodes `y_i = i h`. The flux
//! between neighbouring nodes is the exponentially fitted (Scharfetter–Gummel)
//! upwind flux, which is positive for any `h`, reproduces the drift velocity
//! `w` exactly and reduces to central differences as `h → 0`. Node 0 is the
//! absorbing wall; the last node has a half control volume and zero flux. The
//! absorbed count is the exact discrete outflow, so
//! `mass + absorbed` is conserved to round-off.
//!
//! Time stepping is Crank–Nicolson with a few implicit-Euler half steps after
//! every non-smooth start (the mollified delta and the split shift), or forward
//! Euler under the usual stability bound.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::float::{abs, exp, expm1, ln, sqrt};
use crate::special::LogValue;
use crate::tridiag::Thomas;
use crate::{DiffusionParams, Error, MeasureFraction, Result};

pub const MIN_CELLS: usize = 16;
/// Fraction of the explicit stability bound actually used.
pub const EXPLICIT_SAFETY: f64 = 0.9;
/// Negative overshoot tolerated (and clamped) relative to the field maximum.
pub const NEGATIVE_TOLERANCE: f64 = 1e-12;
/// Standard deviation of the mollified delta, in cells.
pub const MOLLIFIER_CELLS: f64 = 2.0;
/// Closest allowed distance of the delta to either edge, in cells.
pub const MOLLIFIER_CLEARANCE_CELLS: f64 = 4.0;
/// Implicit-Euler half steps taken after each non-smooth start.
pub const DEFAULT_RANNACHER_HALF_STEPS: u32 = 2;

const RESCALE_BELOW: f64 = 1e-150;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    ExplicitUpwind,
    CrankNicolson,
}

/// Condition at `y = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wall {
    Absorbing,
    /// Zero flux; used to check conservation of the interior scheme.
    Mirror,
}

/// Uniform grid and time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    y_max: f64,
    n_cells: usize,
    dt: f64,
    scheme: Scheme,
    rannacher_half_steps: u32,
}

impl Grid {
    pub fn crank_nicolson(y_max: f64, n_cells: usize, dt: f64) -> Result<Self> {
        Self::check(y_max, n_cells, dt)?;
        Ok(Self {
            y_max,
            n_cells,
            dt,
            scheme: Scheme::CrankNicolson,
            rannacher_half_steps: DEFAULT_RANNACHER_HALF_STEPS,
        })
    }

    /// Forward Euler; requires `dt ≤ 0.9 min(h²/w, h/w)` and a nonnegative
    /// update on every row.
    pub fn explicit(y_max: f64, n_cells: usize, dt: f64, w: f64) -> Result<Self> {
        Self::check(y_max, n_cells, dt)?;
        if !(w > 0.0) {
            return Err(Error::Degenerate("explicit scheme needs w > 0"));
        }
        let g = Self {
            y_max,
            n_cells,
            dt,
            scheme: Scheme::ExplicitUpwind,
            rannacher_half_steps: 0,
        };
        let bound = g.explicit_dt_bound(w);
        if dt > bound {
            return Err(Error::Grid(format!(
                "explicit dt = {dt} exceeds the stability bound {bound} (h = {}, w = {w})",
                g.h()
            )));
        }
        Ok(g)
    }

    /// The largest stable explicit step, safety factor included.
    pub fn explicit_dt_bound(&self, w: f64) -> f64 {
        let h = self.h();
        let spec = EXPLICIT_SAFETY * (h * h / w).min(h / w);
        let (_, bp) = fitted_weights(h, 1.0);
        // the half cell at y_max has the largest outflow coefficient
        let row = (h * h) / (w * bp);
        spec.min(EXPLICIT_SAFETY * row)
    }

    fn check(y_max: f64, n_cells: usize, dt: f64) -> Result<()> {
        if !(y_max > 0.0 && y_max.is_finite()) {
            return Err(Error::Grid(format!("y_max = {y_max} must be positive")));
        }
        if n_cells < MIN_CELLS {
            return Err(Error::Grid(format!("n_cells = {n_cells} < {MIN_CELLS}")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Grid(format!("dt = {dt} must be positive")));
        }
        Ok(())
    }

    pub fn with_rannacher_half_steps(self, n: u32) -> Self {
        Self {
            rannacher_half_steps: n,
            ..self
        }
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn rannacher_half_steps(&self) -> u32 {
        self.rannacher_half_steps
    }

    pub fn h(&self) -> f64 {
        self.y_max / self.n_cells as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.h()
    }
}

/// Bernoulli function `x / (eˣ − 1)`.
fn bernoulli(x: f64) -> f64 {
    if x.abs() < 1e-10 {
        1.0 - 0.5 * x
    } else {
        x / expm1(x)
    }
}

/// Flux weights `(b_m, b_p)` for velocity `−direction · w` and diffusion `w/2`.
/// Their difference is exactly `2h · direction`.
fn fitted_weights(h: f64, direction: f64) -> (f64, f64) {
    (
        bernoulli(2.0 * h * direction),
        bernoulli(-2.0 * h * direction),
    )
}

/// Semi-discrete operator `dν/dt = A ν`.
#[derive(Debug, Clone)]
struct Operator {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    /// outflow rate through the wall per unit `ν₁`
    wall_rate: f64,
}

impl Operator {
    fn new(grid: &Grid, w: f64, wall: Wall, direction: f64) -> Self {
        let n = grid.n_cells;
        let h = grid.h();
        let k = 0.5 * w / (h * h);
        let (bm, bp) = fitted_weights(h, direction);
        let mut lower = vec![k * bm; n + 1];
        let mut diag = vec![-k * (bm + bp); n + 1];
        let mut upper = vec![k * bp; n + 1];
        match wall {
            Wall::Absorbing => {
                lower[0] = 0.0;
                diag[0] = 0.0;
                upper[0] = 0.0;
            }
            Wall::Mirror => {
                lower[0] = 0.0;
                diag[0] = -2.0 * k * bm;
                upper[0] = 2.0 * k * bp;
            }
        }
        lower[n] = 2.0 * k * bm;
        diag[n] = -2.0 * k * bp;
        upper[n] = 0.0;
        let wall_rate = match wall {
            Wall::Absorbing => 0.5 * w / h * bp,
            Wall::Mirror => 0.0,
        };
        Self {
            lower,
            diag,
            upper,
            wall_rate,
        }
    }

    /// `out = x + c A x`.
    fn axpy(&self, c: f64, x: &[f64], out: &mut [f64]) {
        let n = x.len() - 1;
        out[0] = x[0] + c * (self.diag[0] * x[0] + self.upper[0] * x[1]);
        for i in 1..n {
            out[i] = x[i]
                + c * (self.lower[i] * x[i - 1] + self.diag[i] * x[i] + self.upper[i] * x[i + 1]);
        }
        out[n] = x[n] + c * (self.lower[n] * x[n - 1] + self.diag[n] * x[n]);
    }

    /// Factor `I − c A`.
    fn implicit(&self, c: f64) -> Result<Thomas> {
        let lower: Vec<f64> = self.lower.iter().map(|a| -c * a).collect();
        let upper: Vec<f64> = self.upper.iter().map(|a| -c * a).collect();
        let diag: Vec<f64> = self.diag.iter().map(|a| 1.0 - c * a).collect();
        Thomas::factor(&lower, &diag, &upper)
    }
}

/// Discretised `ν` with its bookkeeping.
///
/// Stored values are `ν / e^{log_scale}`; the scale absorbs the exponential
/// decay of the surviving mass over long runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    values: Vec<f64>,
    h: f64,
    wall: Wall,
    t: f64,
    log_scale: f64,
    absorbed: LogValue,
    growth_log: f64,
    max_edge_fraction: f64,
}

impl Field {
    /// Unit-mass Gaussian of standard deviation `width` centred at `centre`.
    pub fn gaussian(grid: &Grid, centre: f64, width: f64, wall: Wall) -> Result<Self> {
        let h = grid.h();
        let clearance = MOLLIFIER_CLEARANCE_CELLS * h;
        if !(centre >= clearance && centre <= grid.y_max - clearance) {
            return Err(Error::Grid(format!(
                "initial position {centre} is within {clearance} of the domain edges [0, {}]",
                grid.y_max
            )));
        }
        let mut values: Vec<f64> = (0..=grid.n_cells)
            .map(|i| {
                let z = (grid.node(i) - centre) / width;
                exp(-0.5 * z * z)
            })
            .collect();
        if wall == Wall::Absorbing {
            values[0] = 0.0;
        }
        let mut f = Self {
            values,
            h,
            wall,
            t: 0.0,
            log_scale: 0.0,
            absorbed: LogValue::ZERO,
            growth_log: 0.0,
            max_edge_fraction: 0.0,
        };
        let m = f.raw_mass();
        f.values.iter_mut().for_each(|v| *v /= m);
        f.max_edge_fraction = f.edge_fraction();
        Ok(f)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn wall(&self) -> Wall {
        self.wall
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// `ln` of the factor applied to [`Field::scaled_values`].
    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    pub fn scaled_values(&self) -> &[f64] {
        &self.values
    }

    /// `ν` at node `i`.
    pub fn value(&self, i: usize) -> LogValue {
        LogValue::from_f64(self.values[i]).scale_ln(self.log_scale)
    }

    fn raw_mass(&self) -> f64 {
        let n = self.values.len() - 1;
        let inner: f64 = self.values[1..n].iter().sum();
        let ends = match self.wall {
            Wall::Absorbing => 0.5 * self.values[n],
            Wall::Mirror => 0.5 * (self.values[0] + self.values[n]),
        };
        self.h * (inner + ends)
    }

    /// `∫ν dy` on the grid.
    pub fn mass(&self) -> LogValue {
        LogValue::from_f64(self.raw_mass()).scale_ln(self.log_scale)
    }

    /// Cumulative count absorbed at the wall or lost in a split, in the `ν`
    /// frame.
    pub fn absorbed(&self) -> LogValue {
        self.absorbed
    }

    /// `(v − w/2)t + ln G`, the analytic growth carried alongside `ν`.
    pub fn growth_log(&self) -> f64 {
        self.growth_log
    }

    /// Unmangled world count `e^{growth_log} ∫ν dy`.
    pub fn survivors(&self) -> LogValue {
        self.mass().scale_ln(self.growth_log)
    }

    /// Unmangled density `μ` at node `i`.
    pub fn density(&self, i: usize) -> LogValue {
        self.value(i).scale_ln(self.growth_log)
    }

    /// Share of the mass sitting in the last half cell, a bound on what the
    /// far edge can distort.
    pub fn edge_fraction(&self) -> f64 {
        let n = self.values.len() - 1;
        let m = self.raw_mass();
        if m > 0.0 {
            0.5 * self.h * self.values[n] / m
        } else {
            0.0
        }
    }

    /// Largest [`Field::edge_fraction`] seen since the start.
    pub fn max_edge_fraction(&self) -> f64 {
        self.max_edge_fraction
    }

    /// `∫ y ν dy / ∫ ν dy`.
    pub fn mean_y(&self) -> f64 {
        let (m0, m1, _) = self.moments();
        m1 / m0
    }

    /// `Var(y)` under the normalised field.
    pub fn variance_y(&self) -> f64 {
        let (m0, m1, m2) = self.moments();
        m2 / m0 - (m1 / m0) * (m1 / m0)
    }

    /// L1 distance between the normalised field and `reference`, also
    /// normalised, both integrated by the trapezoid rule on the nodes.
    pub fn shape_l1<F: Fn(f64) -> f64>(&self, reference: F) -> f64 {
        let n = self.values.len() - 1;
        let wgt = |i: usize| {
            if i == 0 || i == n {
                0.5 * self.h
            } else {
                self.h
            }
        };
        let r: Vec<f64> = (0..=n).map(|i| reference(i as f64 * self.h)).collect();
        let rm: f64 = r.iter().enumerate().map(|(i, x)| wgt(i) * x).sum();
        let m = self.raw_mass();
        (0..=n)
            .map(|i| wgt(i) * abs(self.values[i] / m - r[i] / rm))
            .sum()
    }

    fn moments(&self) -> (f64, f64, f64) {
        let n = self.values.len() - 1;
        let mut acc = (0.0, 0.0, 0.0);
        for (i, v) in self.values.iter().enumerate() {
            let wgt = if i == 0 || i == n { 0.5 } else { 1.0 };
            let y = i as f64 * self.h;
            acc.0 += wgt * v;
            acc.1 += wgt * v * y;
            acc.2 += wgt * v * y * y;
        }
        acc
    }

    /// Multiply every world by `G`.
    pub fn replicate(&mut self, g: u64) {
        self.growth_log += ln(g as f64);
    }

    /// Move every world down by `depth ≥ 0` (a split by `F = e^{−depth}`),
    /// by linear interpolation. Mass pushed through the wall is absorbed.
    pub fn shift_down(&mut self, depth: f64) -> Result<()> {
        let n = self.values.len() - 1;
        let y_max = n as f64 * self.h;
        if !(depth >= 0.0) || depth >= 0.5 * y_max {
            return Err(Error::Grid(format!(
                "split depth |ln F| = {depth} must be below y_max/2 = {}",
                0.5 * y_max
            )));
        }
        if depth == 0.0 {
            return Ok(());
        }
        let before = self.raw_mass();
        let cells = depth / self.h;
        let whole = cells as usize;
        let frac = cells - whole as f64;
        let old = core::mem::take(&mut self.values);
        self.values = (0..=n)
            .map(|i| {
                let j = i + whole;
                let a = old.get(j).copied().unwrap_or(0.0);
                let b = old.get(j + 1).copied().unwrap_or(0.0);
                (1.0 - frac) * a + frac * b
            })
            .collect();
        if self.wall == Wall::Absorbing {
            self.values[0] = 0.0;
        }
        let lost = (before - self.raw_mass()).max(0.0);
        self.absorbed = self.absorbed + LogValue::from_f64(lost).scale_ln(self.log_scale);
        Ok(())
    }

    /// Split every world into `G` copies a factor `F` smaller.
    pub fn split(&mut self, f: MeasureFraction, g: u64) -> Result<()> {
        self.shift_down(f.depth())?;
        self.replicate(g);
        Ok(())
    }

    /// Clamp round-off negatives, fail on real ones, and rescale if the
    /// field has decayed far.
    fn tidy(&mut self) -> Result<()> {
        let mut max = 0.0f64;
        let mut min = 0.0f64;
        let mut argmin = 0;
        for (i, v) in self.values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Numerical {
                    t: self.t,
                    detail: format!("non-finite value {v} at y = {}", i as f64 * self.h),
                });
            }
            max = max.max(*v);
            if *v < min {
                min = *v;
                argmin = i;
            }
        }
        if min < -NEGATIVE_TOLERANCE * max {
            return Err(Error::Numerical {
                t: self.t,
                detail: format!(
                    "negative overshoot {min:e} at y = {} (max {max:e}); reduce dt or add startup steps",
                    argmin as f64 * self.h
                ),
            });
        }
        if min < 0.0 {
            self.values.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        if max > 0.0 && max < RESCALE_BELOW {
            let s = 1.0 / max;
            self.values.iter_mut().for_each(|v| *v *= s);
            self.log_scale -= ln(s);
        }
        self.max_edge_fraction = self.max_edge_fraction.max(self.edge_fraction());
        Ok(())
    }
}

/// `ν(y, 0) = δ(y − ε)`, mollified to a Gaussian of width `2h`.
pub fn init_delta(grid: &Grid, eps: f64) -> Result<Field> {
    Field::gaussian(grid, eps, MOLLIFIER_CELLS * grid.h(), Wall::Absorbing)
}

/// Time integrator bound to one grid, wall and `(v, w)`.
#[derive(Debug, Clone)]
pub struct Stepper {
    grid: Grid,
    op: Operator,
    growth_rate: f64,
    dt: f64,
    /// `I − (dt/2) A`: the Crank–Nicolson left side and the implicit-Euler
    /// half step
    half_implicit: Option<Thomas>,
    pending_half_steps: u32,
    scratch: Vec<f64>,
}

impl Stepper {
    pub fn new(grid: &Grid, dp: &DiffusionParams, wall: Wall) -> Result<Self> {
        Self::build(grid, dp, wall, 1.0)
    }

    /// Same, with the drift pointed away from the wall. Exists so tests can
    /// show the drift-rate check catches a wrong upwind direction.
    #[doc(hidden)]
    pub fn reversed_drift(grid: &Grid, dp: &DiffusionParams, wall: Wall) -> Result<Self> {
        Self::build(grid, dp, wall, -1.0)
    }

    fn build(grid: &Grid, dp: &DiffusionParams, wall: Wall, direction: f64) -> Result<Self> {
        dp.require_diffusive()?;
        if grid.scheme == Scheme::ExplicitUpwind && grid.dt > grid.explicit_dt_bound(dp.w) {
            return Err(Error::Grid(format!(
                "explicit dt = {} is unstable for w = {}",
                grid.dt, dp.w
            )));
        }
        let op = Operator::new(grid, dp.w, wall, direction);
        let mut s = Self {
            grid: *grid,
            op,
            growth_rate: dp.v - 0.5 * dp.w,
            dt: grid.dt,
            half_implicit: None,
            pending_half_steps: grid.rannacher_half_steps,
            scratch: vec![0.0; grid.n_cells + 1],
        };
        s.set_dt(grid.dt)?;
        Ok(s)
    }

    fn set_dt(&mut self, dt: f64) -> Result<()> {
        self.dt = dt;
        self.half_implicit = match self.grid.scheme {
            Scheme::CrankNicolson => Some(self.op.implicit(0.5 * dt)?),
            Scheme::ExplicitUpwind => None,
        };
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Schedule implicit-Euler half steps before Crank–Nicolson resumes.
    pub fn restart(&mut self) {
        self.pending_half_steps = self.grid.rannacher_half_steps;
    }

    /// Advance by one `dt`.
    pub fn step(&mut self, field: &mut Field) -> Result<()> {
        let dt = self.dt;
        let rate = self.op.wall_rate;
        let outflow;
        match (&self.half_implicit, self.grid.scheme) {
            (_, Scheme::ExplicitUpwind) => {
                outflow = dt * rate * field.values[1];
                self.op.axpy(dt, &field.values, &mut self.scratch);
                core::mem::swap(&mut field.values, &mut self.scratch);
            }
            (Some(lhs), Scheme::CrankNicolson) if self.pending_half_steps > 0 => {
                let mut out = 0.0;
                for _ in 0..2 {
                    lhs.solve_in_place(&mut field.values);
                    out += 0.5 * dt * rate * field.values[1];
                }
                outflow = out;
                self.pending_half_steps = self.pending_half_steps.saturating_sub(2);
            }
            (Some(lhs), Scheme::CrankNicolson) => {
                let before = field.values[1];
                self.op.axpy(0.5 * dt, &field.values, &mut self.scratch);
                lhs.solve_in_place(&mut self.scratch);
                core::mem::swap(&mut field.values, &mut self.scratch);
                outflow = 0.5 * dt * rate * (before + field.values[1]);
            }
            (None, Scheme::CrankNicolson) => unreachable!("factorisation built with the stepper"),
        }
        if outflow > 0.0 {
            field.absorbed = field.absorbed + LogValue::from_f64(outflow).scale_ln(field.log_scale);
        }
        field.t += dt;
        field.growth_log += self.growth_rate * dt;
        field.tidy()
    }

    /// Advance by `duration` in equal steps no longer than the grid `dt`.
    pub fn advance(&mut self, field: &mut Field, duration: f64) -> Result<()> {
        self.advance_observed(field, duration, |_| {})
    }

    /// As [`Stepper::advance`], calling `observe` after every step.
    pub fn advance_observed<F: FnMut(&Field)>(
        &mut self,
        field: &mut Field,
        duration: f64,
        mut observe: F,
    ) -> Result<()> {
        if !(duration >= 0.0 && duration.is_finite()) {
            return Err(crate::error::domain(
                "duration",
                duration,
                "0 <= duration < inf",
            ));
        }
        if duration == 0.0 {
            return Ok(());
        }
        let steps = libm::ceil(duration / self.grid.dt - 1e-9).max(1.0) as u64;
        let dt = duration / steps as f64;
        if dt != self.dt {
            self.set_dt(dt)?;
        }
        let t_end = field.t + duration;
        for k in 0..steps {
            self.step(field)?;
            if k + 1 == steps {
                field.t = t_end;
            }
            observe(field);
        }
        Ok(())
    }
}

/// One explicit or Crank–Nicolson step of a fresh stepper (no startup
/// smoothing); convenient for tests, slow in loops.
pub fn step(field: &Field, grid: &Grid, dp: &DiffusionParams) -> Result<Field> {
    let mut stepper = Stepper::new(&grid.with_rannacher_half_steps(0), dp, field.wall)?;
    let mut next = field.clone();
    stepper.step(&mut next)?;
    Ok(next)
}

/// `ν` at time `T` from the mollified delta at `ε`.
pub fn solve(dp: &DiffusionParams, grid: &Grid, t: f64) -> Result<Field> {
    if !(t > 0.0) {
        return Err(crate::error::domain("T", t, "T > 0"));
    }
    let mut field = init_delta(grid, dp.eps)?;
    Stepper::new(grid, dp, Wall::Absorbing)?.advance(&mut field, t)?;
    Ok(field)
}

/// `(t, survivors)` after every `every`-th step up to `T`.
pub fn survivor_series(
    dp: &DiffusionParams,
    grid: &Grid,
    t: f64,
    every: usize,
) -> Result<Vec<(f64, LogValue)>> {
    let mut field = init_delta(grid, dp.eps)?;
    let mut out = vec![(0.0, field.survivors())];
    let mut k = 0usize;
    Stepper::new(grid, dp, Wall::Absorbing)?.advance_observed(&mut field, t, |f| {
        k += 1;
        if k % every.max(1) == 0 {
            out.push((f.t(), f.survivors()));
        }
    })?;
    if out.last().map(|p| p.0) != Some(field.t()) {
        out.push((field.t(), field.survivors()));
    }
    Ok(out)
}

/// Two-stage protocol: evolve to `t₁`, split by `(F, G)`, evolve `t₂` more.
/// Returns the final unmangled count, the PDE estimate of `λ`.
pub fn born_two_stage(
    dp: &DiffusionParams,
    grid: &Grid,
    t1: f64,
    f: MeasureFraction,
    g: u64,
    t2: f64,
) -> Result<LogValue> {
    Ok(born_two_stage_many(dp, grid, t1, &[f], g, t2)?[0])
}

/// [`born_two_stage`] for several `F` sharing the first stage.
pub fn born_two_stage_many(
    dp: &DiffusionParams,
    grid: &Grid,
    t1: f64,
    fs: &[MeasureFraction],
    g: u64,
    t2: f64,
) -> Result<Vec<LogValue>> {
    if g == 0 {
        return Err(crate::error::domain("G", 0.0, "G >= 1"));
    }
    let stage_one = solve(dp, grid, t1)?;
    fs.iter()
        .map(|&f| {
            let mut field = stage_one.clone();
            field.split(f, g)?;
            let mut stepper = Stepper::new(grid, dp, Wall::Absorbing)?;
            if f.depth() == 0.0 {
                // a smooth field needs no restart
                stepper.pending_half_steps = 0;
            }
            stepper.advance(&mut field, t2)?;
            Ok(field.survivors())
        })
        .collect()
}

/// PDE estimate of `γ(F) = λ(F, G) / (F G λ(1, 1))` for each `F`.
pub fn gamma_estimates(
    dp: &DiffusionParams,
    grid: &Grid,
    t1: f64,
    fs: &[MeasureFraction],
    t2: f64,
) -> Result<Vec<f64>> {
    let mut all = Vec::with_capacity(fs.len() + 1);
    all.push(MeasureFraction::ONE);
    all.extend_from_slice(fs);
    let lambdas = born_two_stage_many(dp, grid, t1, &all, 1, t2)?;
    Ok(fs
        .iter()
        .zip(&lambdas[1..])
        .map(|(f, l)| exp(l.ln() - lambdas[0].ln() - f.ln()))
        .collect())
}

/// The ratio `λ(F)/(F λ(1))` as the second stage runs, sampled every
/// `every` steps.
pub fn gamma_series(
    dp: &DiffusionParams,
    grid: &Grid,
    t1: f64,
    f: MeasureFraction,
    t2: f64,
    every: usize,
) -> Result<Vec<(f64, f64)>> {
    let stage_one = solve(dp, grid, t1)?;
    let mut plain = stage_one.clone();
    let mut split = stage_one;
    split.split(f, 1)?;
    let mut a = Stepper::new(grid, dp, Wall::Absorbing)?;
    a.pending_half_steps = 0;
    let mut b = Stepper::new(grid, dp, Wall::Absorbing)?;
    let steps = libm::ceil(t2 / grid.dt - 1e-9).max(1.0) as u64;
    let dt = t2 / steps as f64;
    a.set_dt(dt)?;
    b.set_dt(dt)?;
    let ratio = |s: &Field, p: &Field| exp(s.survivors().ln() - p.survivors().ln() - f.ln());
    let mut out = vec![(0.0, ratio(&split, &plain))];
    for k in 1..=steps {
        a.step(&mut plain)?;
        b.step(&mut split)?;
        if k % every.max(1) as u64 == 0 || k == steps {
            out.push((k as f64 * dt, ratio(&split, &plain)));
        }
    }
    Ok(out)
}

/// Standard deviation of the initial mollifier on `grid`.
pub fn mollifier_width(grid: &Grid) -> f64 {
    MOLLIFIER_CELLS * grid.h()
}

/// Diffusive length `√(wT)`, for sizing grids.
pub fn diffusion_length(w: f64, t: f64) -> f64 {
    sqrt(w * t)
}
