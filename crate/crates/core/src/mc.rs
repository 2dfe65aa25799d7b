//! Branching random walk over the binary world tree.
//!
//! A world's log-size `x` takes one step per decoherence event: `ln p` into
//! the heavier child or `ln(1−p)` into the lighter one. After `k` events with
//! `a` heavy steps, its height above the boundary is
//!
//! ```text
//! y(a, k) = ε + a (ln p − ln(1−p)) + k c,    c = ln(1−p) − x̂₁,
//! ```
//!
//! and the world is mangled the first time `y ≤ 0`. Every routine here (the
//! sampler, the tree enumeration and the lattice recursion) evaluates `y`
//! through the same expression, so ties on the boundary fall the same way in
//! all three.
//!
//! Sampling follows one root-to-leaf path per draw. Under [`Tilt::Uniform`]
//! each child is taken with probability ½ and a surviving leaf is worth
//! `2^N`. Under [`Tilt::Measure`] the children are taken with probabilities
//! `p` and `1−p` and a survivor is worth `e^{−x_N}`. Both are unbiased for the
//! number of unmangled leaves. The second keeps relative variance bounded
//! because the sampled walk moves with the boundary.
//!
//! Path `i` draws from ChaCha8 stream `i` under a key derived from the seed.
//! Paths are grouped into fixed blocks of [`BLOCK_PATHS`] and block results
//! are merged along a fixed binary tree, so results are bit-identical for any
//! [`BlockRunner`].

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::LN_2;
use core::ops::Range;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::domain;
use crate::float::{abs, exp, ln, sqrt};
use crate::params::branch_logs;
use crate::quadrature::{integrate, integrate_to_infinity, Tolerance};
use crate::{DecoherenceParams, Error, LogValue, MeasureFraction, Result};

/// Paths per scheduling block.
pub const BLOCK_PATHS: u64 = 4096;

/// Largest tree [`enumerate_survivors`] will walk.
pub const MAX_ENUMERATION_EVENTS: u64 = 24;

/// `wt` above which [`Tilt::auto`] picks the measure tilt.
pub const AUTO_TILT_WT: f64 = 4.0;

/// How the boundary position after `n` events is computed. The two agree
/// to rounding since `v − w = −r x̂₁`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryRule {
    /// `x_b(n) = n x̂₁ − ε`.
    #[default]
    Continuum,
    /// `x_b(n) = −(v − w) n / r − ε`.
    DiffusionDrift,
}

/// Sampling law for the children.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tilt {
    /// Each child with probability ½.
    Uniform,
    /// Children with probabilities `p` and `1 − p`.
    Measure,
}

impl Tilt {
    /// Measure tilt once `wt = N σ₁²` exceeds [`AUTO_TILT_WT`].
    pub fn auto(dp: &DecoherenceParams, n_events: u64) -> Self {
        let s = dp.stats().sigma1;
        if s * s * n_events as f64 > AUTO_TILT_WT {
            Tilt::Measure
        } else {
            Tilt::Uniform
        }
    }
}

/// A walk: model, boundary offset, number of events and sampling law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkSpec {
    pub dp: DecoherenceParams,
    /// Boundary offset `ε`; `f64::INFINITY` disables mangling.
    pub eps: f64,
    pub n_events: u64,
    pub boundary_rule: BoundaryRule,
    pub tilt: Tilt,
}

impl WalkSpec {
    /// Continuum boundary and the automatic tilt.
    pub fn new(dp: DecoherenceParams, eps: f64, n_events: u64) -> Result<Self> {
        let spec = Self {
            dp,
            eps,
            n_events,
            boundary_rule: BoundaryRule::Continuum,
            tilt: Tilt::auto(&dp, n_events),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_tilt(self, tilt: Tilt) -> Self {
        Self { tilt, ..self }
    }

    pub fn with_boundary_rule(self, boundary_rule: BoundaryRule) -> Self {
        Self {
            boundary_rule,
            ..self
        }
    }

    pub fn with_events(self, n_events: u64) -> Self {
        Self { n_events, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_events == 0 {
            return Err(domain("N", 0.0, "N >= 1"));
        }
        if !(self.eps > 0.0) {
            return Err(domain("eps", self.eps, "eps > 0"));
        }
        Ok(())
    }

    /// `wt = N σ₁²`.
    pub fn wt(&self) -> f64 {
        let s = self.dp.stats().sigma1;
        s * s * self.n_events as f64
    }

    /// Height above the boundary after `k` events, `a` of them heavy.
    pub fn height(&self, a: u64, k: u64) -> f64 {
        Lattice::of(self).y(a, k)
    }
}

#[derive(Debug, Clone, Copy)]
struct Lattice {
    ln_p: f64,
    ln_q: f64,
    xhat1: f64,
    d: f64,
    c: f64,
    eps: f64,
}

impl Lattice {
    fn of(spec: &WalkSpec) -> Self {
        let (ln_p, ln_q) = branch_logs(spec.dp.p());
        let xhat1 = spec.dp.stats().xhat1;
        let drift = match spec.boundary_rule {
            BoundaryRule::Continuum => xhat1,
            BoundaryRule::DiffusionDrift => {
                let s = spec.dp.stats();
                let r = spec.dp.rate();
                let v = -r * s.xtilde1;
                let w = r * s.sigma1 * s.sigma1;
                -(v - w) / r
            }
        };
        Self {
            ln_p,
            ln_q,
            xhat1,
            d: ln_p - ln_q,
            c: ln_q - drift,
            eps: spec.eps,
        }
    }

    #[inline]
    fn y(&self, a: u64, k: u64) -> f64 {
        self.eps + a as f64 * self.d + k as f64 * self.c
    }

    fn ln_size(&self, a: u64, n: u64) -> f64 {
        a as f64 * self.ln_p + (n - a) as f64 * self.ln_q
    }
}

/// Runs independent blocks and returns their results in block order.
pub trait BlockRunner {
    fn map_blocks<T, F>(&self, n_blocks: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs blocks one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Serial;

impl BlockRunner for Serial {
    fn map_blocks<T, F>(&self, n_blocks: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n_blocks).map(f).collect()
    }
}

fn tree_merge<T, M: Fn(T, T) -> T + Copy>(mut items: Vec<T>, merge: M) -> Option<T> {
    if items.len() <= 1 {
        return items.pop();
    }
    let right = items.split_off(items.len() / 2);
    Some(merge(tree_merge(items, merge)?, tree_merge(right, merge)?))
}

fn run_blocks<T, R, F, M>(runner: &R, n_paths: u64, block: F, merge: M) -> T
where
    T: Send,
    R: BlockRunner + ?Sized,
    F: Fn(Range<u64>) -> T + Sync + Send,
    M: Fn(T, T) -> T + Copy,
{
    let n_blocks = n_paths.div_ceil(BLOCK_PATHS) as usize;
    let parts = runner.map_blocks(n_blocks, |b| {
        let start = b as u64 * BLOCK_PATHS;
        block(start..n_paths.min(start + BLOCK_PATHS))
    });
    tree_merge(parts, merge).expect("at least one block")
}

/// Streaming mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Combines two disjoint samples.
    pub fn merge(self, other: Self) -> Self {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let (na, nb) = (self.n as f64, other.n as f64);
        let delta = other.mean - self.mean;
        Self {
            n,
            mean: self.mean + delta * nb / n as f64,
            m2: self.m2 + other.m2 + delta * delta * na * nb / n as f64,
        }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        sqrt(self.variance() / self.n as f64)
    }
}

/// Joint moments of two paired samples.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CoMoments {
    pub n: u64,
    pub mean_a: f64,
    pub mean_b: f64,
    pub m2_a: f64,
    pub m2_b: f64,
    pub c_ab: f64,
}

impl CoMoments {
    pub fn push(&mut self, a: f64, b: f64) {
        self.n += 1;
        let n = self.n as f64;
        let da = a - self.mean_a;
        self.mean_a += da / n;
        let db = b - self.mean_b;
        self.mean_b += db / n;
        self.m2_a += da * (a - self.mean_a);
        self.m2_b += db * (b - self.mean_b);
        self.c_ab += da * (b - self.mean_b);
    }

    pub fn merge(self, other: Self) -> Self {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let (na, nb, nf) = (self.n as f64, other.n as f64, n as f64);
        let da = other.mean_a - self.mean_a;
        let db = other.mean_b - self.mean_b;
        let k = na * nb / nf;
        Self {
            n,
            mean_a: self.mean_a + da * nb / nf,
            mean_b: self.mean_b + db * nb / nf,
            m2_a: self.m2_a + other.m2_a + da * da * k,
            m2_b: self.m2_b + other.m2_b + db * db * k,
            c_ab: self.c_ab + other.c_ab + da * db * k,
        }
    }

    /// The ratio `mean_a / mean_b` and its delta-method standard error.
    pub fn ratio(&self) -> (f64, f64) {
        let r = self.mean_a / self.mean_b;
        if self.n < 2 {
            return (r, f64::INFINITY);
        }
        let n1 = (self.n - 1) as f64;
        let var = (self.m2_a - 2.0 * r * self.c_ab + r * r * self.m2_b) / n1;
        let se = sqrt(var.max(0.0) / self.n as f64) / abs(self.mean_b);
        (r, se)
    }
}

/// The sampler shared by all estimators.
struct Walker {
    lat: Lattice,
    heavy_below: u64,
    tilt: Tilt,
    key: ChaCha8Rng,
}

impl Walker {
    fn new(spec: &WalkSpec, seed: u64) -> Self {
        let heavy_below = match spec.tilt {
            Tilt::Uniform => 1 << 63,
            Tilt::Measure => (spec.dp.p() * 18_446_744_073_709_551_616.0) as u64,
        };
        Self {
            lat: Lattice::of(spec),
            heavy_below,
            tilt: spec.tilt,
            key: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn rng(&self, path: u64) -> ChaCha8Rng {
        let mut rng = self.key.clone();
        rng.set_stream(path);
        rng
    }

    /// Advances from `(a, from)` to event `to`, absorbing at `y ≤ floor`.
    /// Returns the final heavy count and the lowest height visited.
    #[inline]
    fn walk(
        &self,
        rng: &mut ChaCha8Rng,
        mut a: u64,
        from: u64,
        to: u64,
        floor: f64,
    ) -> Option<(u64, f64)> {
        let mut lowest = f64::INFINITY;
        for k in from + 1..=to {
            a += u64::from(rng.next_u64() < self.heavy_below);
            let y = self.lat.y(a, k);
            if y <= floor {
                return None;
            }
            lowest = lowest.min(y);
        }
        Some((a, lowest))
    }

    /// Log of the offset factored out of every path value.
    fn ln_offset(&self, n: u64) -> f64 {
        match self.tilt {
            Tilt::Uniform => n as f64 * LN_2,
            Tilt::Measure => -(n as f64) * self.lat.xhat1,
        }
    }

    /// Value of a surviving path relative to [`Self::ln_offset`].
    #[inline]
    fn value(&self, a: u64, n: u64) -> f64 {
        match self.tilt {
            Tilt::Uniform => 1.0,
            Tilt::Measure => exp(n as f64 * self.lat.xhat1 - self.lat.ln_size(a, n)),
        }
    }
}

fn check_paths(n_paths: u64) -> Result<()> {
    if n_paths == 0 {
        Err(domain("n_paths", 0.0, "n_paths >= 1"))
    } else {
        Ok(())
    }
}

/// Result of [`simulate_survivors`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathEnsemble {
    pub n_paths: u64,
    pub survivor_count: u64,
    pub seed: u64,
    pub tilt: Tilt,
    /// Per-path values, relative to `e^{ln_offset}`.
    pub moments: Moments,
    pub ln_offset: f64,
}

impl PathEnsemble {
    /// Estimated number of unmangled leaf worlds.
    pub fn estimate(&self) -> LogValue {
        LogValue::from_f64(self.moments.mean).scale_ln(self.ln_offset)
    }

    pub fn std_error(&self) -> LogValue {
        LogValue::from_f64(self.moments.std_error()).scale_ln(self.ln_offset)
    }

    /// Sum of survivor weights over all paths.
    pub fn survivor_weight_sum(&self) -> LogValue {
        self.estimate().scale_ln(ln(self.n_paths as f64))
    }

    /// `std_error / estimate`.
    pub fn relative_error(&self) -> f64 {
        self.moments.std_error() / self.moments.mean
    }
}

/// Estimates the number of unmangled worlds after `N` events.
pub fn simulate_survivors<R: BlockRunner + ?Sized>(
    spec: &WalkSpec,
    n_paths: u64,
    seed: u64,
    runner: &R,
) -> Result<PathEnsemble> {
    spec.validate()?;
    check_paths(n_paths)?;
    let walker = Walker::new(spec, seed);
    let n = spec.n_events;
    let (moments, survivors) = run_blocks(
        runner,
        n_paths,
        |paths| {
            let mut m = Moments::default();
            let mut alive = 0u64;
            for i in paths {
                let mut rng = walker.rng(i);
                match walker.walk(&mut rng, 0, 0, n, 0.0) {
                    Some((a, _)) => {
                        alive += 1;
                        m.push(walker.value(a, n));
                    }
                    None => m.push(0.0),
                }
            }
            (m, alive)
        },
        |(ma, sa), (mb, sb)| (ma.merge(mb), sa + sb),
    );
    Ok(PathEnsemble {
        n_paths,
        survivor_count: survivors,
        seed,
        tilt: spec.tilt,
        moments,
        ln_offset: walker.ln_offset(n),
    })
}

/// Heights `y_1 … y_k` of path `index`, stopping at absorption.
pub fn trace_path(spec: &WalkSpec, seed: u64, index: u64) -> Result<Vec<f64>> {
    spec.validate()?;
    let walker = Walker::new(spec, seed);
    let mut rng = walker.rng(index);
    let mut a = 0;
    let mut out = Vec::new();
    for k in 1..=spec.n_events {
        a += u64::from(rng.next_u64() < walker.heavy_below);
        let y = walker.lat.y(a, k);
        out.push(y);
        if y <= 0.0 {
            break;
        }
    }
    Ok(out)
}

/// Exact survivors of a small tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Enumeration {
    /// Unmangled leaves.
    pub count: u64,
    /// `Σ e^{x_N}` over unmangled leaves.
    pub measure: f64,
}

/// Walks all `2^N` leaves, pruning at the first absorption.
pub fn enumerate_survivors(spec: &WalkSpec) -> Result<Enumeration> {
    spec.validate()?;
    if spec.n_events > MAX_ENUMERATION_EVENTS {
        return Err(Error::TooLarge {
            what: "N for enumeration",
            requested: spec.n_events,
            limit: MAX_ENUMERATION_EVENTS,
        });
    }
    let lat = Lattice::of(spec);
    let n = spec.n_events;
    let mut count = 0;
    let mut measure = 0.0;
    let mut stack = vec![(0u64, 0u64)];
    while let Some((a, k)) = stack.pop() {
        if k == n {
            count += 1;
            measure += exp(lat.ln_size(a, n));
            continue;
        }
        for child in [a + 1, a] {
            if lat.y(child, k + 1) > 0.0 {
                stack.push((child, k + 1));
            }
        }
    }
    Ok(Enumeration { count, measure })
}

/// Exact sums over the unmangled leaves from the lattice recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeCount {
    /// Unmangled leaves (times `G` for a split).
    pub count: LogValue,
    /// `Σ e^{x_N}`.
    pub measure: LogValue,
    /// `Σ e^{−x_N}`, the second moment of the measure-tilt estimator.
    pub inverse_measure: LogValue,
    pub n_events: u64,
}

impl LatticeCount {
    /// Exact per-path relative variance `Var/mean²` of a sampler.
    pub fn relative_variance(&self, tilt: Tilt) -> f64 {
        let second = match tilt {
            Tilt::Uniform => self.count.scale_ln(self.n_events as f64 * LN_2),
            Tilt::Measure => self.inverse_measure,
        };
        exp(second.ln() - 2.0 * self.count.ln()) - 1.0
    }
}

struct Layer {
    v: Vec<f64>,
    ln_scale: f64,
    heavy: f64,
    light: f64,
}

impl Layer {
    fn new(heavy: f64, light: f64, capacity: usize) -> Self {
        let mut v = Vec::with_capacity(capacity);
        v.push(1.0);
        Self {
            v,
            ln_scale: 0.0,
            heavy,
            light,
        }
    }

    fn step(&mut self) {
        self.v.push(0.0);
        for a in (1..self.v.len()).rev() {
            self.v[a] = self.v[a] * self.light + self.v[a - 1] * self.heavy;
        }
        self.v[0] *= self.light;
    }

    fn rescale(&mut self) {
        let top = self.v.iter().copied().fold(0.0, f64::max);
        if top > 1e150 || (top > 0.0 && top < 1e-150) {
            let s = 1.0 / top;
            self.v.iter_mut().for_each(|x| *x *= s);
            self.ln_scale += ln(top);
        }
    }

    fn total(&self) -> LogValue {
        let sum: f64 = self.v.iter().sum();
        LogValue::from_f64(sum).scale_ln(self.ln_scale)
    }
}

fn lattice_sums(spec: &WalkSpec, n1: u64, n2: u64, depth: f64, ln_g: f64) -> Result<LatticeCount> {
    spec.validate()?;
    let lat = Lattice::of(spec);
    let (p, q) = (spec.dp.p(), 1.0 - spec.dp.p());
    let n = n1 + n2;
    let cap = n as usize + 1;
    let mut layers = [
        Layer::new(1.0, 1.0, cap),
        Layer::new(p, q, cap),
        Layer::new(1.0 / p, 1.0 / q, cap),
    ];
    for k in 1..=n {
        let floor = if k < n1 { 0.0 } else { depth };
        for layer in &mut layers {
            layer.step();
        }
        for a in 0..=k {
            if lat.y(a, k) <= floor {
                for layer in &mut layers {
                    layer.v[a as usize] = 0.0;
                }
            }
        }
        if k % 64 == 0 || k == n {
            layers.iter_mut().for_each(Layer::rescale);
        }
    }
    let [count, measure, inverse] = layers.map(|l| l.total());
    Ok(LatticeCount {
        count: count.scale_ln(ln_g),
        measure: measure.scale_ln(ln_g),
        inverse_measure: inverse.scale_ln(ln_g),
        n_events: n,
    })
}

/// Exact unmangled sums after `N` events, for any `N`, in `O(N²)`.
pub fn lattice_survivors(spec: &WalkSpec) -> Result<LatticeCount> {
    lattice_sums(spec, spec.n_events, 0, 0.0, 0.0)
}

/// Exact two-stage count `λ(F, G)`: `N₁ = spec.n_events` events, a split into
/// `G` worlds smaller by `F`, then `n2` more events.
pub fn lattice_two_stage(
    spec: &WalkSpec,
    n2: u64,
    f: MeasureFraction,
    g: u64,
) -> Result<LatticeCount> {
    if g == 0 {
        return Err(domain("G", 0.0, "G >= 1"));
    }
    lattice_sums(spec, spec.n_events, n2, f.depth(), ln(g as f64))
}

/// Exact discrete `γ(F) = λ(F, 1) / (F λ(1, 1))`.
pub fn lattice_gamma(spec: &WalkSpec, n2: u64, f: MeasureFraction) -> Result<f64> {
    let split = lattice_two_stage(spec, n2, f, 1)?;
    let plain = lattice_two_stage(spec, n2, MeasureFraction::ONE, 1)?;
    Ok(exp(split.count.ln() - plain.count.ln() - f.ln()))
}

/// Two-stage estimate for one `F`, paired with the unsplit run on the same
/// paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStage {
    pub fraction: MeasureFraction,
    pub g: u64,
    pub n_paths: u64,
    pub seed: u64,
    /// `a`: split-branch values, `b`: unsplit values, both relative to
    /// `e^{ln_offset}`.
    pub pair: CoMoments,
    pub ln_offset: f64,
    pub split_survivors: u64,
    pub plain_survivors: u64,
}

impl TwoStage {
    /// `λ(F, G)`.
    pub fn lambda(&self) -> LogValue {
        LogValue::from_f64(self.pair.mean_a).scale_ln(self.ln_offset + ln(self.g as f64))
    }

    pub fn lambda_std_error(&self) -> LogValue {
        let m = Moments {
            n: self.pair.n,
            mean: self.pair.mean_a,
            m2: self.pair.m2_a,
        };
        LogValue::from_f64(m.std_error()).scale_ln(self.ln_offset + ln(self.g as f64))
    }

    /// `λ(1, 1)` from the same paths.
    pub fn lambda_plain(&self) -> LogValue {
        LogValue::from_f64(self.pair.mean_b).scale_ln(self.ln_offset)
    }

    /// `γ = λ(F, G) / (F G λ(1, 1))` and its standard error.
    pub fn gamma(&self) -> (f64, f64) {
        let (r, se) = self.pair.ratio();
        let inv_f = exp(-self.fraction.ln());
        (r * inv_f, se * inv_f)
    }
}

/// Two-stage protocol for several `F` on shared paths. Stage one has
/// `spec.n_events` events; after the split a world sits `−ln F` lower, so its
/// branch survives exactly when the unsplit path stays above `−ln F`.
pub fn born_two_stage_mc<R: BlockRunner + ?Sized>(
    spec: &WalkSpec,
    n2: u64,
    fractions: &[MeasureFraction],
    g: u64,
    n_paths: u64,
    seed: u64,
    runner: &R,
) -> Result<Vec<TwoStage>> {
    spec.validate()?;
    check_paths(n_paths)?;
    if g == 0 {
        return Err(domain("G", 0.0, "G >= 1"));
    }
    let walker = Walker::new(spec, seed);
    let n1 = spec.n_events;
    let n = n1 + n2;
    let depths: Vec<f64> = fractions.iter().map(|f| f.depth()).collect();
    type Acc = (Vec<CoMoments>, Vec<u64>, u64);
    let (pairs, split_alive, plain_alive): Acc = run_blocks(
        runner,
        n_paths,
        |paths| {
            let mut pairs = vec![CoMoments::default(); depths.len()];
            let mut split = vec![0u64; depths.len()];
            let mut plain = 0u64;
            for i in paths {
                let mut rng = walker.rng(i);
                let end = walker.walk(&mut rng, 0, 0, n1, 0.0).and_then(|(a1, _)| {
                    let y1 = walker.lat.y(a1, n1);
                    walker
                        .walk(&mut rng, a1, n1, n, 0.0)
                        .map(|(a, low)| (a, low.min(y1)))
                });
                match end {
                    Some((a, low)) => {
                        plain += 1;
                        let v = walker.value(a, n);
                        for (j, &depth) in depths.iter().enumerate() {
                            let alive = low > depth;
                            split[j] += u64::from(alive);
                            pairs[j].push(if alive { v } else { 0.0 }, v);
                        }
                    }
                    None => pairs.iter_mut().for_each(|m| m.push(0.0, 0.0)),
                }
            }
            (pairs, split, plain)
        },
        |(pa, sa, na), (pb, sb, nb)| {
            let pairs = pa.into_iter().zip(pb).map(|(x, y)| x.merge(y)).collect();
            let split = sa.into_iter().zip(sb).map(|(x, y)| x + y).collect();
            (pairs, split, na + nb)
        },
    );
    let ln_offset = walker.ln_offset(n);
    Ok(fractions
        .iter()
        .zip(pairs)
        .zip(split_alive)
        .map(|((&fraction, pair), split_survivors)| TwoStage {
            fraction,
            g,
            n_paths,
            seed,
            pair,
            ln_offset,
            split_survivors,
            plain_survivors: plain_alive,
        })
        .collect())
}

/// Equal-width bins on the height axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBins {
    pub lo: f64,
    pub width: f64,
    pub n: usize,
}

impl HistogramBins {
    pub fn uniform(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(hi > lo) || n == 0 {
            return Err(domain("histogram range", hi - lo, "hi > lo and n >= 1"));
        }
        Ok(Self {
            lo,
            width: (hi - lo) / n as f64,
            n,
        })
    }

    /// One bin per reachable height at event `N`, centred on it, up to `hi`.
    pub fn lattice_aligned(spec: &WalkSpec, hi: f64) -> Result<Self> {
        spec.validate()?;
        let lat = Lattice::of(spec);
        let n = spec.n_events;
        let lowest = (0..=n)
            .map(|a| lat.y(a, n))
            .filter(|&y| y > 0.0)
            .fold(f64::INFINITY, f64::min);
        if !lowest.is_finite() || !(hi > lowest) {
            return Err(domain(
                "histogram upper edge",
                hi,
                "hi above the lowest reachable height",
            ));
        }
        let width = abs(lat.d);
        let lo = lowest - 0.5 * width;
        Ok(Self {
            lo,
            width,
            n: ((hi - lo) / width) as usize + 1,
        })
    }

    pub fn index(&self, y: f64) -> Option<usize> {
        let i = (y - self.lo) / self.width;
        (i >= 0.0 && i < self.n as f64).then_some(i as usize)
    }

    pub fn centre(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.width
    }

    pub fn edges(&self, i: usize) -> (f64, f64) {
        let a = self.lo + i as f64 * self.width;
        (a, a + self.width)
    }
}

/// Weighted histogram of survivor heights.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bins: HistogramBins,
    /// Bin weights relative to `e^{ln_offset}`.
    pub weights: Vec<f64>,
    /// Weight that fell outside the bins.
    pub outside: f64,
    pub ln_offset: f64,
    pub survivors: u64,
    pub n_paths: u64,
}

impl Histogram {
    /// No path survived.
    pub fn is_empty(&self) -> bool {
        self.survivors == 0
    }

    fn total(&self) -> f64 {
        self.weights.iter().sum::<f64>() + self.outside
    }

    /// Probability per bin among survivors.
    pub fn probabilities(&self) -> Vec<f64> {
        let t = self.total();
        self.weights.iter().map(|w| w / t).collect()
    }

    /// Density per unit height among survivors.
    pub fn density(&self) -> Vec<f64> {
        let s = self.total() * self.bins.width;
        self.weights.iter().map(|w| w / s).collect()
    }

    /// Mean height, with each bin at its centre.
    pub fn mean(&self) -> f64 {
        let inside: f64 = self.weights.iter().sum();
        self.weights
            .iter()
            .enumerate()
            .map(|(i, w)| w * self.bins.centre(i))
            .sum::<f64>()
            / inside
    }

    /// L1 distance to the normalised law of `density` on `(0, ∞)`. Mass
    /// outside the bins counts in full on both sides.
    pub fn l1_distance<F: Fn(f64) -> f64>(&self, density: F) -> Result<f64> {
        let tol = Tolerance {
            abs: 0.0,
            rel: 1e-10,
            max_segments: 2000,
        };
        let total = integrate_to_infinity(&density, 0.0, tol)?.value;
        let mut covered = 0.0;
        let mut l1 = self.outside / self.total();
        for (i, p) in self.probabilities().into_iter().enumerate() {
            let (a, b) = self.bins.edges(i);
            let a = a.max(0.0);
            let q = if b > a {
                integrate(&density, a, b, tol)?.value / total
            } else {
                0.0
            };
            covered += q;
            l1 += abs(p - q);
        }
        Ok(l1 + (1.0 - covered).max(0.0))
    }
}

/// Weighted histogram of heights of the unmangled leaves.
pub fn empirical_distribution<R: BlockRunner + ?Sized>(
    spec: &WalkSpec,
    n_paths: u64,
    seed: u64,
    bins: HistogramBins,
    runner: &R,
) -> Result<Histogram> {
    spec.validate()?;
    check_paths(n_paths)?;
    let walker = Walker::new(spec, seed);
    let n = spec.n_events;
    let (weights, outside, survivors) = run_blocks(
        runner,
        n_paths,
        |paths| {
            let mut w = vec![0.0; bins.n];
            let mut outside = 0.0;
            let mut alive = 0u64;
            for i in paths {
                let mut rng = walker.rng(i);
                if let Some((a, _)) = walker.walk(&mut rng, 0, 0, n, 0.0) {
                    alive += 1;
                    let v = walker.value(a, n);
                    match bins.index(walker.lat.y(a, n)) {
                        Some(j) => w[j] += v,
                        None => outside += v,
                    }
                }
            }
            (w, outside, alive)
        },
        |(wa, oa, sa), (wb, ob, sb)| {
            let w = wa.into_iter().zip(wb).map(|(x, y)| x + y).collect();
            (w, oa + ob, sa + sb)
        },
    );
    Ok(Histogram {
        bins,
        weights,
        outside,
        ln_offset: walker.ln_offset(n),
        survivors,
        n_paths,
    })
}
