//! Explicit Euler simulation of the slow-fast system, of the frozen-x fast
//! process (optionally tilted) and occupation histograms of fast paths.
//!
//! Every path is a pure function of `(seed, stream)`: the generator is a
//! ChaCha8 stream seeded with `seed` and positioned on stream `stream`, so
//! ensembles give the same paths whatever the number of worker threads.

use crate::error::{Error, Result};
use crate::model::{JumpKernel, LevyMeasureModel, RegimeParams, SlowFastModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::io::Write;

/// Seeded generator for path number `stream`.
pub fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform time grid `0, dt, ..., t_end`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TimeGrid {
    pub dt: f64,
    pub steps: usize,
    /// Allow `dt` above the fast time scale.
    pub allow_stiff: bool,
}

impl TimeGrid {
    /// `t_end` must be a multiple of `dt` (to 1e-9 relative).
    pub fn new(t_end: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dt", format!("{dt} must be positive")));
        }
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::invalid("t_end", format!("{t_end} must be positive")));
        }
        let n = (t_end / dt).round();
        if n < 1.0 || (n * dt - t_end).abs() > 1e-9 * t_end {
            return Err(Error::invalid("t_end", format!("{t_end} is not a multiple of dt = {dt}")));
        }
        Ok(TimeGrid {
            dt,
            steps: n as usize,
            allow_stiff: false,
        })
    }

    /// Finest grid with at least `t_end / max_dt` steps.
    pub fn covering(t_end: f64, max_dt: f64) -> Result<Self> {
        let n = (t_end / max_dt * (1.0 - 1e-12)).ceil().max(1.0);
        Self::new(t_end, t_end / n)
    }

    pub fn allow_stiff(mut self, yes: bool) -> Self {
        self.allow_stiff = yes;
        self
    }

    pub fn t_end(&self) -> f64 {
        self.dt * self.steps as f64
    }

    fn time(&self, j: usize) -> f64 {
        self.dt * j as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Slow,
    Fast,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JumpRecord {
    pub t: f64,
    pub component: Component,
    pub size: f64,
}

/// A simulated `(X, Y)` trajectory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathPair {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub jumps: Vec<JumpRecord>,
    pub seed: u64,
    pub stream: u64,
}

impl PathPair {
    /// Writes `t,X,Y` rows with a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,X,Y")?;
        for j in 0..self.t.len() {
            writeln!(w, "{},{},{}", self.t[j], self.x[j], self.y[j])?;
        }
        Ok(())
    }

    /// SHA-256 over the bit patterns of the grid and both components.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for v in self.t.iter().chain(&self.x).chain(&self.y) {
            h.update(v.to_bits().to_le_bytes());
        }
        for j in &self.jumps {
            h.update(j.t.to_bits().to_le_bytes());
            h.update(j.size.to_bits().to_le_bytes());
        }
        format!("{:x}", h.finalize())
    }
}

/// A frozen-x fast trajectory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FastPath {
    pub x: f64,
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    pub jumps: Vec<JumpRecord>,
}

/// Jump part of one equation with its compensator precomputed.
struct JumpPart<'a> {
    nu: &'a LevyMeasureModel,
    kernel: &'a JumpKernel,
    mass: f64,
    first_moment: f64,
    rule: Vec<(f64, f64)>,
}

impl<'a> JumpPart<'a> {
    fn new(nu: &'a LevyMeasureModel, kernel: &'a JumpKernel) -> Result<Self> {
        let active = !kernel.is_zero() && !nu.is_null();
        let mass = if active { nu.total_mass() } else { 0.0 };
        if !mass.is_finite() {
            return Err(Error::invalid("measure", "jump measure must have finite total mass"));
        }
        let first_moment = if active { nu.first_moment()? } else { 0.0 };
        let rule = match kernel {
            JumpKernel::General(_) if active => nu.quadrature_rule(),
            _ => Vec::new(),
        };
        Ok(JumpPart {
            nu,
            kernel,
            mass,
            first_moment,
            rule,
        })
    }

    fn active(&self) -> bool {
        self.mass > 0.0
    }

    /// `∫ k(x, y, z) ν(dz)`.
    fn compensator(&self, x: f64, y: f64) -> f64 {
        match self.kernel {
            JumpKernel::Zero => 0.0,
            JumpKernel::Linear(c) => c(x, y) * self.first_moment,
            JumpKernel::General(k) => self.rule.iter().map(|(z, w)| w * k(x, y, *z)).sum(),
        }
    }

    /// Compensated jump increment over one step, kernel frozen at `(x, y)`.
    /// Jump times are appended to `log` when given.
    fn increment<R: Rng>(
        &self,
        x: f64,
        y: f64,
        dt: f64,
        scale: f64,
        t0: f64,
        component: Component,
        rng: &mut R,
        log: Option<&mut Vec<JumpRecord>>,
    ) -> Result<f64> {
        if !self.active() {
            return Ok(0.0);
        }
        let lambda = self.mass * scale * dt;
        let count = Poisson::new(lambda)
            .map_err(|e| Error::invalid("intensity", e.to_string()))?
            .sample(rng) as usize;
        let mut sum = 0.0;
        let mut times = Vec::new();
        for _ in 0..count {
            let s = rng.gen::<f64>() * dt;
            let z = self.nu.sample_size(rng);
            sum += self.kernel.eval(x, y, z);
            times.push((s, z));
        }
        if let Some(log) = log {
            times.sort_by(|a, b| a.0.total_cmp(&b.0));
            log.extend(times.into_iter().map(|(s, z)| JumpRecord {
                t: t0 + s,
                component,
                size: z,
            }));
        }
        Ok(sum - scale * dt * self.compensator(x, y))
    }
}

fn check_stiffness(grid: &TimeGrid, regime: &RegimeParams) -> Result<()> {
    if !grid.allow_stiff && grid.dt > regime.delta() * (1.0 + 1e-12) {
        return Err(Error::Stiffness {
            dt: grid.dt,
            fast_scale: regime.delta(),
        });
    }
    Ok(())
}

struct SlowFastStepper<'a> {
    model: &'a SlowFastModel,
    eps: f64,
    fast_rate: f64,
    rho_bar: f64,
    slow_jumps: JumpPart<'a>,
    fast_jumps: JumpPart<'a>,
}

impl<'a> SlowFastStepper<'a> {
    fn new(model: &'a SlowFastModel, regime: &RegimeParams) -> Result<Self> {
        let rho = model.coeffs.rho();
        Ok(SlowFastStepper {
            model,
            eps: regime.epsilon(),
            fast_rate: regime.fast_rate(),
            rho_bar: (1.0 - rho * rho).sqrt(),
            slow_jumps: JumpPart::new(&model.nu1, &model.coeffs.k1)?,
            fast_jumps: JumpPart::new(&model.nu2, &model.coeffs.k2)?,
        })
    }

    #[inline]
    fn step<R: Rng>(
        &self,
        x: f64,
        y: f64,
        t0: f64,
        dt: f64,
        rng: &mut R,
        mut log: Option<&mut Vec<JumpRecord>>,
    ) -> Result<(f64, f64)> {
        let c = &self.model.coeffs;
        let shift = self.model.drift_shift;
        let sq = dt.sqrt();
        let w1: f64 = rng.sample(StandardNormal);
        let w2: f64 = rng.sample(StandardNormal);
        let dw1 = sq * w1;
        let dw2 = sq * w2;
        let eps = self.eps;
        let fr = self.fast_rate;

        let mut nx = x + (eps * (c.b1)(x, y) + shift.slow) * dt + (2.0 * eps).sqrt() * (c.sigma1)(x, y) * dw1;
        let mut ny = y
            + fr * ((c.b2)(x, y) + shift.fast) * dt
            + (2.0 * fr).sqrt() * (c.sigma2)(x, y) * (c.rho() * dw1 + self.rho_bar * dw2);
        nx += eps
            * self
                .slow_jumps
                .increment(x, y, dt, 1.0 / eps, t0, Component::Slow, rng, log.as_deref_mut())?;
        ny += self
            .fast_jumps
            .increment(x, y, dt, fr, t0, Component::Fast, rng, log.as_deref_mut())?;
        Ok((nx, ny))
    }
}

/// Simulates the slow-fast system on `grid` from `(x0, y0)`.
///
/// Slow step: `eps b1 dt + sqrt(2 eps) sigma1 dW1 + eps * (compensated k1
/// jumps at intensity 1/eps)`; fast step: `eps^(1-alpha) b2 dt +
/// sqrt(2 eps^(1-alpha)) sigma2 (rho dW1 + sqrt(1-rho^2) dW2) + compensated
/// k2 jumps at intensity eps^(1-alpha)`. All coefficients, kernels and
/// compensators are evaluated at the state at the start of the step.
pub fn simulate_slow_fast(
    model: &SlowFastModel,
    regime: &RegimeParams,
    grid: &TimeGrid,
    x0: f64,
    y0: f64,
    seed: u64,
    stream: u64,
) -> Result<PathPair> {
    check_stiffness(grid, regime)?;
    let stepper = SlowFastStepper::new(model, regime)?;
    let mut rng = path_rng(seed, stream);
    let n = grid.steps;
    let mut path = PathPair {
        t: Vec::with_capacity(n + 1),
        x: Vec::with_capacity(n + 1),
        y: Vec::with_capacity(n + 1),
        jumps: Vec::new(),
        seed,
        stream,
    };
    let (mut x, mut y) = (x0, y0);
    path.t.push(0.0);
    path.x.push(x);
    path.y.push(y);
    for j in 0..n {
        let t0 = grid.time(j);
        let (nx, ny) = stepper.step(x, y, t0, grid.dt, &mut rng, Some(&mut path.jumps))?;
        if !(nx.is_finite() && ny.is_finite()) {
            return Err(Error::BlowUp { last_valid_time: t0 });
        }
        x = nx;
        y = ny;
        path.t.push(grid.time(j + 1));
        path.x.push(x);
        path.y.push(y);
    }
    path.jumps.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(path)
}

/// Terminal state only; same draws as [`simulate_slow_fast`].
pub fn simulate_terminal(
    model: &SlowFastModel,
    regime: &RegimeParams,
    grid: &TimeGrid,
    x0: f64,
    y0: f64,
    seed: u64,
    stream: u64,
) -> Result<(f64, f64)> {
    check_stiffness(grid, regime)?;
    let stepper = SlowFastStepper::new(model, regime)?;
    terminal_with(&stepper, grid, x0, y0, seed, stream)
}

fn terminal_with(
    stepper: &SlowFastStepper<'_>,
    grid: &TimeGrid,
    x0: f64,
    y0: f64,
    seed: u64,
    stream: u64,
) -> Result<(f64, f64)> {
    let mut rng = path_rng(seed, stream);
    let (mut x, mut y) = (x0, y0);
    for j in 0..grid.steps {
        let t0 = grid.time(j);
        let (nx, ny) = stepper.step(x, y, t0, grid.dt, &mut rng, None)?;
        if !(nx.is_finite() && ny.is_finite()) {
            return Err(Error::BlowUp { last_valid_time: t0 });
        }
        x = nx;
        y = ny;
    }
    Ok((x, y))
}

/// Terminal states of paths `0..n` (stream = path index), in path order.
/// Failed paths are returned as errors in place.
pub fn terminal_ensemble(
    model: &SlowFastModel,
    regime: &RegimeParams,
    grid: &TimeGrid,
    x0: f64,
    y0: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<Result<(f64, f64)>>> {
    terminal_map(model, regime, grid, x0, y0, n, seed, |r| r)
}

/// Like [`terminal_ensemble`] but maps each outcome through `f` as soon as
/// the path finishes, so large ensembles can be reduced to small records.
#[allow(clippy::too_many_arguments)]
pub fn terminal_map<T: Send>(
    model: &SlowFastModel,
    regime: &RegimeParams,
    grid: &TimeGrid,
    x0: f64,
    y0: f64,
    n: usize,
    seed: u64,
    f: impl Fn(Result<(f64, f64)>) -> T + Sync,
) -> Result<Vec<T>> {
    check_stiffness(grid, regime)?;
    let stepper = SlowFastStepper::new(model, regime)?;
    Ok((0..n as u64)
        .into_par_iter()
        .map(|i| f(terminal_with(&stepper, grid, x0, y0, seed, i)))
        .collect())
}

/// Frozen-x fast process with drift `b2 + 2 rho sigma1 sigma2 p`, diffusion
/// `sqrt(2) sigma2` and unit-intensity compensated `k2` jumps. `p = 0` (or
/// `rho = 0`) gives the untilted process with identical draws.
pub fn simulate_tilted_fast(
    model: &SlowFastModel,
    x: f64,
    p: f64,
    grid: &TimeGrid,
    y0: f64,
    seed: u64,
    stream: u64,
) -> Result<FastPath> {
    let c = &model.coeffs;
    let jumps = JumpPart::new(&model.nu2, &c.k2)?;
    let mut rng = path_rng(seed, stream);
    let n = grid.steps;
    let dt = grid.dt;
    let sq = dt.sqrt();
    let mut path = FastPath {
        x,
        t: Vec::with_capacity(n + 1),
        y: Vec::with_capacity(n + 1),
        jumps: Vec::new(),
    };
    let mut y = y0;
    path.t.push(0.0);
    path.y.push(y);
    let two_rho_p = 2.0 * c.rho() * p;
    for j in 0..n {
        let t0 = grid.time(j);
        let s2 = (c.sigma2)(x, y);
        let tilt = if two_rho_p == 0.0 { 0.0 } else { two_rho_p * (c.sigma1)(x, y) * s2 };
        let drift = (c.b2)(x, y) + model.drift_shift.fast + tilt;
        let w: f64 = rng.sample(StandardNormal);
        let mut ny = y + drift * dt + std::f64::consts::SQRT_2 * s2 * sq * w;
        ny += jumps.increment(x, y, dt, 1.0, t0, Component::Fast, &mut rng, Some(&mut path.jumps))?;
        if !ny.is_finite() {
            return Err(Error::BlowUp { last_valid_time: t0 });
        }
        y = ny;
        path.t.push(grid.time(j + 1));
        path.y.push(y);
    }
    Ok(path)
}

/// The virtual fast process at frozen `x` (no tilt).
pub fn simulate_virtual_fast(
    model: &SlowFastModel,
    x: f64,
    grid: &TimeGrid,
    y0: f64,
    seed: u64,
    stream: u64,
) -> Result<FastPath> {
    simulate_tilted_fast(model, x, 0.0, grid, y0, seed, stream)
}

/// Time-weighted histogram of a path.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OccupationHistogram {
    pub edges: Vec<f64>,
    pub masses: Vec<f64>,
    /// Fraction of time spent below the first edge.
    pub underflow: f64,
    /// Fraction of time spent at or above the last edge.
    pub overflow: f64,
    pub horizon: f64,
}

impl OccupationHistogram {
    /// Sum of the in-range masses plus both overflow bins (1 up to rounding).
    pub fn total(&self) -> f64 {
        self.masses.iter().sum::<f64>() + self.underflow + self.overflow
    }

    /// Total variation distance to a reference vector of bin masses.
    pub fn tv_distance(&self, reference: &[f64]) -> f64 {
        let inner: f64 = self.masses.iter().zip(reference).map(|(a, b)| (a - b).abs()).sum();
        0.5 * (inner + self.underflow + self.overflow + (1.0 - reference.iter().sum::<f64>()).abs())
    }
}

/// Occupation measure of a piecewise-constant path: the value `y[j]` is held
/// on `[t[j], t[j+1])`. Bins are `[edges[i], edges[i+1])`.
pub fn occupation_histogram(t: &[f64], y: &[f64], edges: &[f64]) -> Result<OccupationHistogram> {
    if t.is_empty() || t.len() != y.len() {
        return Err(Error::invalid("path", "time and value arrays must be nonempty and equally long"));
    }
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("edges", "need at least two strictly increasing edges"));
    }
    let nb = edges.len() - 1;
    let mut masses = vec![0.0; nb];
    let (mut under, mut over) = (0.0, 0.0);
    let mut add = |v: f64, w: f64| {
        if v < edges[0] {
            under += w;
        } else if v >= edges[nb] {
            over += w;
        } else {
            let i = edges.partition_point(|&e| e <= v) - 1;
            masses[i.min(nb - 1)] += w;
        }
    };
    let horizon = t[t.len() - 1] - t[0];
    if t.len() == 1 || horizon == 0.0 {
        add(y[0], 1.0);
    } else {
        for j in 0..t.len() - 1 {
            add(y[j], t[j + 1] - t[j]);
        }
    }
    let total = masses.iter().sum::<f64>() + under + over;
    for m in masses.iter_mut() {
        *m /= total;
    }
    Ok(OccupationHistogram {
        edges: edges.to_vec(),
        masses,
        underflow: under / total,
        overflow: over / total,
        horizon,
    })
}
