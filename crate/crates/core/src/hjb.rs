//! Limit Cauchy problem `∂_t U = H0(x, ∂_x U)`, `U(0, ·) = h`, Legendre
//! transforms and rate functions.

use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianTable;
use crate::quad::{golden_max, interp_linear, linspace};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Bounded initial or terminal data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum TerminalFn {
    Constant { value: f64 },
    /// `slope * clamp(x, lo, hi)`.
    ClippedLinear { slope: f64, lo: f64, hi: f64 },
    /// `height * exp(-((x - center) / width)^2)`.
    Bump { center: f64, width: f64, height: f64 },
    /// `height * tanh((x - center) / width)`.
    TanhRamp { center: f64, width: f64, height: f64 },
}

impl TerminalFn {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            TerminalFn::Constant { value } => value.is_finite(),
            TerminalFn::ClippedLinear { slope, lo, hi } => slope.is_finite() && lo < hi && lo.is_finite() && hi.is_finite(),
            TerminalFn::Bump { center, width, height } | TerminalFn::TanhRamp { center, width, height } => {
                center.is_finite() && width > 0.0 && width.is_finite() && height.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("h", format!("bad terminal function {self:?}")))
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.derivs(x).0
    }

    /// `(h, h', h'')`; one-sided at the kinks of the clipped line.
    pub fn derivs(&self, x: f64) -> (f64, f64, f64) {
        match *self {
            TerminalFn::Constant { value } => (value, 0.0, 0.0),
            TerminalFn::ClippedLinear { slope, lo, hi } => {
                let inside = x > lo && x < hi;
                (slope * x.clamp(lo, hi), if inside { slope } else { 0.0 }, 0.0)
            }
            TerminalFn::Bump { center, width, height } => {
                let u = (x - center) / width;
                let g = height * (-u * u).exp();
                (g, -2.0 * u * g / width, (4.0 * u * u - 2.0) * g / (width * width))
            }
            TerminalFn::TanhRamp { center, width, height } => {
                let th = ((x - center) / width).tanh();
                let sech2 = 1.0 - th * th;
                (height * th, height * sech2 / width, -2.0 * height * th * sech2 / (width * width))
            }
        }
    }

    /// `(inf h, sup h)`.
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            TerminalFn::Constant { value } => (value, value),
            TerminalFn::ClippedLinear { slope, lo, hi } => {
                let (a, b) = (slope * lo, slope * hi);
                (a.min(b), a.max(b))
            }
            TerminalFn::Bump { height, .. } => (height.min(0.0), height.max(0.0)),
            TerminalFn::TanhRamp { height, .. } => (-height.abs(), height.abs()),
        }
    }
}

/// A Hamiltonian `H(x, p)` the solver can query.
pub trait HamiltonianSource: Sync {
    fn eval(&self, x: f64, p: f64) -> Result<f64>;

    /// Upper bound on `|∂_p H|` for `p` in `[p_lo, p_hi]`.
    fn max_slope(&self, p_lo: f64, p_hi: f64) -> f64;
}

impl HamiltonianSource for HamiltonianTable {
    fn eval(&self, x: f64, p: f64) -> Result<f64> {
        HamiltonianTable::eval(self, x, p)
    }

    fn max_slope(&self, _: f64, _: f64) -> f64 {
        HamiltonianTable::max_slope(self)
    }
}

/// x-independent Hamiltonian given by a closure.
pub struct FnHamiltonian<F: Fn(f64) -> f64 + Sync>(pub F);

impl<F: Fn(f64) -> f64 + Sync> HamiltonianSource for FnHamiltonian<F> {
    fn eval(&self, _: f64, p: f64) -> Result<f64> {
        Ok((self.0)(p))
    }

    fn max_slope(&self, p_lo: f64, p_hi: f64) -> f64 {
        let n = 400;
        let pad = 0.05 * (p_hi - p_lo).abs().max(1.0);
        let ps = linspace(p_lo - pad, p_hi + pad, n + 1);
        ps.windows(2)
            .map(|w| (((self.0)(w[1]) - (self.0)(w[0])) / (w[1] - w[0])).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Ghost node `U_{-1} = 2 U_0 - U_1` (gradient carried to the edge).
    #[default]
    ExtrapolateGradient,
    /// Ghost node `U_{-1} = U_0`; keeps the scheme monotone up to the edge.
    ZeroGradient,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    /// Courant number `dt max|H_p| / dx`, in (0, 1].
    pub cfl: f64,
    /// Stored time levels including `t = 0` and `t_end`; `None` keeps every step.
    pub snapshots: Option<usize>,
    pub boundary: Boundary,
    /// Bound on `|H_p|` to use instead of the estimate (so that paired solves
    /// share a time step).
    pub speed: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            cfl: 0.9,
            snapshots: Some(11),
            boundary: Boundary::ExtrapolateGradient,
            speed: None,
        }
    }
}

/// `U(t, x)` on a space-time grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolutionField {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    /// `values[k][i] = U(t[k], x[i])`.
    pub values: Vec<Vec<f64>>,
    pub dt: f64,
    /// Numerical viscosity coefficient actually used.
    pub theta: f64,
    pub cfl: f64,
    pub initial: Option<TerminalFn>,
}

impl SolutionField {
    pub fn terminal(&self) -> &[f64] {
        &self.values[self.values.len() - 1]
    }

    /// Long-format `t,x,U` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,x,U")?;
        for (k, t) in self.t.iter().enumerate() {
            for (i, x) in self.x.iter().enumerate() {
                writeln!(w, "{},{},{}", t, x, self.values[k][i])?;
            }
        }
        Ok(())
    }
}

/// Uniform grid on `[lo - pad, hi + pad]` with spacing `dx`, where `pad` is
/// five numerical domains of dependence (`t_end * speed / cfl`).
/// Returns the grid and the index range of `[lo, hi]`.
pub fn padded_grid(lo: f64, hi: f64, dx: f64, t_end: f64, speed: f64, cfl: f64) -> Result<(Vec<f64>, std::ops::Range<usize>)> {
    if !(lo < hi) || !(dx > 0.0) || !(cfl > 0.0 && cfl <= 1.0) {
        return Err(Error::invalid("x_grid", "need lo < hi, dx > 0 and cfl in (0, 1]"));
    }
    let pad_cells = (5.0 * t_end * speed / cfl / dx).ceil() as usize + 2;
    let inner = ((hi - lo) / dx).round() as usize;
    let start = lo - pad_cells as f64 * dx;
    let n = inner + 2 * pad_cells + 1;
    let x = (0..n).map(|i| start + i as f64 * dx).collect();
    Ok((x, pad_cells..pad_cells + inner + 1))
}

/// Explicit Lax-Friedrichs scheme
/// `U_i += dt H(x_i, (U_{i+1} - U_{i-1}) / 2dx) + theta/2 (U_{i+1} - 2 U_i + U_{i-1})`
/// with `theta = dt max|H_p| / dx`.
pub fn solve_hj(
    ham: &dyn HamiltonianSource,
    h: &dyn Fn(f64) -> f64,
    x: &[f64],
    t_end: f64,
    opts: &SolveOptions,
) -> Result<SolutionField> {
    let n = x.len();
    if n < 3 {
        return Err(Error::invalid("x_grid", "need at least three nodes"));
    }
    if !(opts.cfl > 0.0 && opts.cfl <= 1.0) {
        return Err(Error::invalid("cfl", format!("{} not in (0, 1]", opts.cfl)));
    }
    if !(t_end > 0.0) {
        return Err(Error::invalid("t_end", "must be positive"));
    }
    let dx = (x[n - 1] - x[0]) / (n - 1) as f64;
    if x.windows(2).any(|w| ((w[1] - w[0]) - dx).abs() > 1e-9 * dx) {
        return Err(Error::invalid("x_grid", "must be uniform"));
    }
    let mut u: Vec<f64> = x.iter().map(|&xi| h(xi)).collect();
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("h", "initial data must be finite"));
    }
    let grads: Vec<f64> = u.windows(2).map(|w| (w[1] - w[0]) / dx).collect();
    let p_lo = grads.iter().cloned().fold(f64::INFINITY, f64::min);
    let p_hi = grads.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let speed = opts.speed.unwrap_or_else(|| ham.max_slope(p_lo, p_hi));
    let mut steps = if speed > 0.0 { (t_end * speed / (opts.cfl * dx)).ceil() as usize } else { 1 };
    steps = steps.max(1);
    let dt = t_end / steps as f64;
    let theta = dt * speed / dx;

    let sup0 = u.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let h_scale = [p_lo, p_hi, 0.0]
        .iter()
        .filter_map(|&p| ham.eval(x[0], p).ok())
        .map(f64::abs)
        .fold(0.0, f64::max);
    let limit = 10.0 * (sup0 + t_end * h_scale + 1.0);

    let keep: Vec<usize> = match opts.snapshots {
        None => (0..=steps).collect(),
        Some(k) => {
            let k = k.max(2);
            let mut v: Vec<usize> = (0..k).map(|j| (j * steps + (k - 1) / 2) / (k - 1)).collect();
            v.dedup();
            v
        }
    };
    let mut t_out = Vec::with_capacity(keep.len());
    let mut values = Vec::with_capacity(keep.len());
    let mut next_keep = 0;
    if keep[0] == 0 {
        t_out.push(0.0);
        values.push(u.clone());
        next_keep = 1;
    }
    let mut new = vec![0.0; n];
    for step in 1..=steps {
        for i in 0..n {
            let left = if i > 0 {
                u[i - 1]
            } else {
                match opts.boundary {
                    Boundary::ExtrapolateGradient => 2.0 * u[0] - u[1],
                    Boundary::ZeroGradient => u[0],
                }
            };
            let right = if i + 1 < n {
                u[i + 1]
            } else {
                match opts.boundary {
                    Boundary::ExtrapolateGradient => 2.0 * u[n - 1] - u[n - 2],
                    Boundary::ZeroGradient => u[n - 1],
                }
            };
            let p = (right - left) / (2.0 * dx);
            new[i] = u[i] + dt * ham.eval(x[i], p)? + 0.5 * theta * (right - 2.0 * u[i] + left);
        }
        std::mem::swap(&mut u, &mut new);
        let sup = u.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if !sup.is_finite() || sup > limit {
            return Err(Error::Cfl {
                t: step as f64 * dt,
                cfl: opts.cfl,
            });
        }
        if next_keep < keep.len() && keep[next_keep] == step {
            t_out.push(step as f64 * dt);
            values.push(u.clone());
            next_keep += 1;
        }
    }
    Ok(SolutionField {
        t: t_out,
        x: x.to_vec(),
        values,
        dt,
        theta,
        cfl: opts.cfl,
        initial: None,
    })
}

/// Hopf-Lax value `sup_y [h(y) - t Q((y - x)/t)]` for `∂_t U = H(∂_x U)`
/// with x-independent convex `H` and conjugate `Q` (infinite where the
/// velocity is not admissible). Scans `window` with `points` nodes, then
/// refines around the best node.
pub fn hopf_lax(h: &dyn Fn(f64) -> f64, q: &dyn Fn(f64) -> f64, t: f64, x: f64, window: (f64, f64), points: usize) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::invalid("t", "must be positive"));
    }
    let (lo, hi) = window;
    if !(lo < hi) || points < 3 {
        return Err(Error::invalid("window", "need lo < hi and at least three points"));
    }
    let obj = |y: f64| {
        let c = q((y - x) / t);
        if c.is_finite() {
            h(y) - t * c
        } else {
            f64::NEG_INFINITY
        }
    };
    let ys = linspace(lo, hi, points);
    let vals: Vec<f64> = ys.iter().map(|&y| obj(y)).collect();
    let mut best = 0;
    for i in 1..points {
        if vals[i] > vals[best] {
            best = i;
        }
    }
    if !vals[best].is_finite() {
        return Err(Error::Window { lo, hi });
    }
    // an edge maximiser (of the window or of the admissible velocities) means
    // the sup was not captured
    let edge = best == 0 || best == points - 1 || !vals[best - 1].is_finite() || !vals[best + 1].is_finite();
    if edge && (best == 0 || best == points - 1 || vals.iter().filter(|v| v.is_finite()).count() > 1) {
        let neighbour = if best == 0 { vals.get(1) } else { vals.get(best - 1) };
        if neighbour.map_or(true, |&v| v < vals[best]) {
            return Err(Error::Window { lo, hi });
        }
    }
    let a = ys[best.saturating_sub(1)];
    let b = ys[(best + 1).min(points - 1)];
    let (_, refined) = golden_max(obj, a, b, 1e-12 * (hi - lo).max(1.0));
    Ok(refined.max(vals[best]))
}

/// Samples of a convex conjugate `Q(q) = max_p [p q - H(p)]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Conjugate {
    pub q: Vec<f64>,
    pub values: Vec<f64>,
    /// The maximiser sat on the edge of the `p` grid; the value is a lower bound.
    pub saturated: Vec<bool>,
}

impl Conjugate {
    /// Linear interpolation; `+inf` outside the grid or at saturated samples.
    pub fn eval(&self, q: f64) -> f64 {
        let n = self.q.len();
        if q < self.q[0] || q > self.q[n - 1] {
            return f64::INFINITY;
        }
        let j = self.q.partition_point(|&v| v <= q).saturating_sub(1).min(n - 2);
        let touches = |k: usize| self.saturated[k];
        let exact_node = q == self.q[j] || q == self.q[j + 1];
        if (exact_node && touches(if q == self.q[j] { j } else { j + 1 })) || (!exact_node && (touches(j) || touches(j + 1))) {
            return f64::INFINITY;
        }
        interp_linear(&self.q, &self.values, q)
    }

    /// Value and saturation flag, clamping `q` to the grid.
    pub fn eval_clamped(&self, q: f64) -> (f64, bool) {
        let n = self.q.len();
        let outside = q < self.q[0] || q > self.q[n - 1];
        let qc = q.clamp(self.q[0], self.q[n - 1]);
        let j = self.q.partition_point(|&v| v <= qc).saturating_sub(1).min(n - 2);
        let sat = outside || self.saturated[j] || self.saturated[j + 1];
        (interp_linear(&self.q, &self.values, qc), sat)
    }
}

/// Most negative normalised second difference, as the violating triple.
fn convexity_check(p: &[f64], h: &[f64]) -> Result<()> {
    let scale = h.iter().map(|v| v.abs()).fold(1.0, f64::max);
    for j in 1..p.len() - 1 {
        let t = (p[j] - p[j - 1]) / (p[j + 1] - p[j - 1]);
        let chord = (1.0 - t) * h[j - 1] + t * h[j + 1];
        let sd = chord - h[j];
        if sd < -1e-12 * scale {
            return Err(Error::NotConvex {
                p0: p[j - 1],
                p1: p[j],
                p2: p[j + 1],
                second_difference: sd,
            });
        }
    }
    Ok(())
}

/// Discrete max of `slope * s - f(s)` over samples, refined by the vertex of
/// the parabola through the best node and its neighbours. Returns
/// `(value, argmax, on_edge)`.
fn conjugate_at(s: &[f64], f: &[f64], slope: f64) -> (f64, f64, bool) {
    let n = s.len();
    let g = |j: usize| slope * s[j] - f[j];
    let mut best = 0;
    for j in 1..n {
        if g(j) > g(best) {
            best = j;
        }
    }
    let gb = g(best);
    if best == 0 || best == n - 1 {
        let inner = if best == 0 { g(1) } else { g(n - 2) };
        return (gb, s[best], inner < gb);
    }
    let (x0, x1, x2) = (s[best - 1], s[best], s[best + 1]);
    let (g0, g1, g2) = (g(best - 1), gb, g(best + 1));
    // divided differences
    let d01 = (g1 - g0) / (x1 - x0);
    let d12 = (g2 - g1) / (x2 - x1);
    let a = (d12 - d01) / (x2 - x0);
    if a < 0.0 {
        let b = d01 - a * (x0 + x1);
        let xv = -b / (2.0 * a);
        if xv >= x0 && xv <= x2 {
            let gv = g0 + d01 * (xv - x0) + a * (xv - x0) * (xv - x1);
            if gv > gb {
                return (gv, xv, false);
            }
        }
    }
    (gb, x1, false)
}

/// `Q(q) = max_p [p q - H(p)]` on the `q` grid. `H` must be convex on the
/// `p` grid (three-point test).
pub fn legendre_transform(p: &[f64], h: &[f64], q: &[f64]) -> Result<Conjugate> {
    if p.len() < 3 || p.len() != h.len() {
        return Err(Error::invalid("p_grid", "need at least three samples of matching length"));
    }
    if p.windows(2).any(|w| !(w[0] < w[1])) || q.windows(2).any(|w| !(w[0] < w[1])) || q.len() < 2 {
        return Err(Error::invalid("grid", "p and q grids must be strictly increasing"));
    }
    convexity_check(p, h)?;
    let mut values = Vec::with_capacity(q.len());
    let mut saturated = Vec::with_capacity(q.len());
    for &qq in q {
        let (v, _, edge) = conjugate_at(p, h, qq);
        values.push(v);
        saturated.push(edge);
    }
    Ok(Conjugate {
        q: q.to_vec(),
        values,
        saturated,
    })
}

/// A rate value and whether the conjugate grid was exceeded.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateValue {
    pub value: f64,
    pub saturated: bool,
}

/// `I(x, x0, t) = t Q((x0 - x) / t)`.
pub fn rate_function(x: f64, x0: f64, t: f64, q: &Conjugate) -> Result<RateValue> {
    if !(t > 0.0) {
        return Err(Error::invalid("t", "must be positive"));
    }
    let (v, saturated) = q.eval_clamped((x0 - x) / t);
    Ok(RateValue { value: t * v, saturated })
}

/// `sup_a [a (x - x0) - t H(a)]` over the slope grid, from the exact
/// solution `a x0 + t H(a)` of the Cauchy problem with linear data.
pub fn rate_from_linear_family(ham: &dyn Fn(f64) -> f64, x: f64, x0: f64, t: f64, slopes: &[f64]) -> Result<RateValue> {
    if !(t > 0.0) {
        return Err(Error::invalid("t", "must be positive"));
    }
    if slopes.len() < 3 || slopes.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("slopes", "need an increasing grid of at least three slopes"));
    }
    let th: Vec<f64> = slopes.iter().map(|&a| t * ham(a)).collect();
    let (v, _, edge) = conjugate_at(slopes, &th, x - x0);
    Ok(RateValue { value: v, saturated: edge })
}

/// Velocity cost with its convexity certificate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateFunction {
    pub conjugate: Conjugate,
    /// Largest chord-above-function defect of the input samples (<= 0 when convex).
    pub convexity_defect: f64,
}

impl RateFunction {
    pub fn from_samples(p: &[f64], h: &[f64], q: &[f64]) -> Result<Self> {
        let conjugate = legendre_transform(p, h, q)?;
        let mut defect = f64::NEG_INFINITY;
        for j in 1..p.len() - 1 {
            let t = (p[j] - p[j - 1]) / (p[j + 1] - p[j - 1]);
            defect = defect.max(h[j] - ((1.0 - t) * h[j - 1] + t * h[j + 1]));
        }
        Ok(RateFunction {
            conjugate,
            convexity_defect: defect,
        })
    }

    pub fn eval(&self, x: f64, x0: f64, t: f64) -> Result<RateValue> {
        rate_function(x, x0, t, &self.conjugate)
    }

    /// `q,Q,saturated` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "q,Q,saturated")?;
        let c = &self.conjugate;
        for i in 0..c.q.len() {
            writeln!(w, "{},{},{}", c.q[i], c.values[i], c.saturated[i])?;
        }
        Ok(())
    }
}
