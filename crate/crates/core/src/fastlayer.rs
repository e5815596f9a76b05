//! Frozen-x fast layer: scale and speed densities of the continuous fast
//! proxy `dY = b2 dt + sqrt(2) sigma2 dW`, its invariant density and the
//! potential `V(y) = sigma1^2 p^2 + ∫(e^{k1 p} - 1 - k1 p) dν1`.

use crate::error::{Error, Result};
use crate::levy::exp_moment_integral;
use crate::model::SlowFastModel;
use crate::quad::{cumulative_trapezoid, gauss_legendre, linspace, trapezoid};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Default number of grid points for invariant densities.
pub const DEFAULT_POINTS: usize = 2001;

/// Where the fast variable lives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum YDomain {
    /// One period `[0, L]` of a periodic model, `points` nodes including both ends.
    Periodic { points: usize },
    /// Truncated line with explicit bounds.
    Line { lo: f64, hi: f64, points: usize },
    /// Periodic cell when the model is periodic, otherwise a line whose
    /// bounds are mean ± 8 sd of a Gaussian fit to the speed density.
    Auto { points: usize },
}

impl Default for YDomain {
    fn default() -> Self {
        YDomain::Auto { points: DEFAULT_POINTS }
    }
}

/// Resolved domain of an invariant density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DomainKind {
    Periodic { period: f64 },
    Line { lo: f64, hi: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvariantMeasure {
    pub y: Vec<f64>,
    pub density: Vec<f64>,
    /// `ln ∫ m dy` over the domain (kept in log scale, `m` may overflow).
    pub log_normalizer: f64,
    pub domain: DomainKind,
    /// Estimated mass outside a truncated line (0 on a periodic cell).
    pub truncation_mass: f64,
}

impl InvariantMeasure {
    pub fn normalizer(&self) -> f64 {
        self.log_normalizer.exp()
    }

    /// Trapezoid integral of `f` against the density.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let vals: Vec<f64> = self.y.iter().zip(&self.density).map(|(&y, &d)| d * f(y)).collect();
        trapezoid(&self.y, &vals)
    }

    /// Like [`expect`](Self::expect) for fallible integrands.
    pub fn try_expect<F: Fn(f64) -> Result<f64>>(&self, f: F) -> Result<f64> {
        let mut vals = Vec::with_capacity(self.y.len());
        for (&y, &d) in self.y.iter().zip(&self.density) {
            vals.push(d * f(y)?);
        }
        Ok(trapezoid(&self.y, &vals))
    }

    /// Probability of each bin `[edges[i], edges[i+1])` by trapezoid on the
    /// density with linear interpolation at the edges.
    pub fn bin_masses(&self, edges: &[f64]) -> Vec<f64> {
        edges
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                let mut xs = vec![a];
                let mut ds = vec![crate::quad::interp_linear(&self.y, &self.density, a)];
                for (&y, &d) in self.y.iter().zip(&self.density) {
                    if y > a && y < b {
                        xs.push(y);
                        ds.push(d);
                    }
                }
                xs.push(b);
                ds.push(crate::quad::interp_linear(&self.y, &self.density, b));
                if a < self.y[0] || b > self.y[self.y.len() - 1] {
                    // outside the grid the density is taken as zero
                    for (x, d) in xs.iter().zip(ds.iter_mut()) {
                        if *x < self.y[0] || *x > self.y[self.y.len() - 1] {
                            *d = 0.0;
                        }
                    }
                }
                trapezoid(&xs, &ds)
            })
            .collect()
    }

    /// `y,density` rows with a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "y,density")?;
        for (y, d) in self.y.iter().zip(&self.density) {
            writeln!(w, "{y},{d}")?;
        }
        Ok(())
    }
}

/// Drift of the fast proxy, including any drift shift.
fn fast_drift(model: &SlowFastModel, x: f64, y: f64) -> f64 {
    (model.coeffs.b2)(x, y) + model.drift_shift.fast
}

fn sigma2_sq(model: &SlowFastModel, x: f64, y: f64) -> Result<f64> {
    let s = (model.coeffs.sigma2)(x, y);
    let s2 = s * s;
    if !(s2 > 1e-300) || !s2.is_finite() {
        return Err(Error::Degenerate { x, y });
    }
    Ok(s2)
}

/// `(ln s, ln m)` on the grid, anchored at the left endpoint.
fn log_scale_speed(model: &SlowFastModel, x: f64, y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let ratio = |t: f64| -> Result<f64> { Ok(-fast_drift(model, x, t) / sigma2_sq(model, x, t)?) };
    let (nodes, weights) = gauss_legendre(6);
    let mut var = Vec::with_capacity(y.len());
    let mut log_s = Vec::with_capacity(y.len());
    let mut acc = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        var.push(sigma2_sq(model, x, yi)?);
        if i > 0 {
            let (a, b) = (y[i - 1], yi);
            let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
            for (t, w) in nodes.iter().zip(&weights) {
                acc += half * w * ratio(mid + half * t)?;
            }
        }
        log_s.push(acc);
    }
    let log_m = log_s.iter().zip(&var).map(|(ls, v)| -v.ln() - ls).collect();
    Ok((log_s, log_m))
}

/// Scale density `s(y) = exp(-∫_{y_0}^y b2/sigma2^2)` and speed density
/// `m = 1 / (sigma2^2 s)` on the grid.
pub fn scale_speed_density(model: &SlowFastModel, x: f64, y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if y.len() < 2 {
        return Err(Error::invalid("y_grid", "need at least two points"));
    }
    let (ls, lm) = log_scale_speed(model, x, y)?;
    Ok((ls.into_iter().map(f64::exp).collect(), lm.into_iter().map(f64::exp).collect()))
}

fn normalize_log(y: &[f64], log_m: &[f64]) -> (Vec<f64>, f64) {
    let top = log_m.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_m.iter().map(|l| (l - top).exp()).collect();
    let z = trapezoid(y, &w);
    (w.iter().map(|v| v / z).collect(), top + z.ln())
}

/// Invariant density of the continuous fast proxy at frozen `x`.
///
/// On a periodic cell the stationary density is proportional to
/// `∫_y^{y+L} s / (sigma2^2 s(y))`, which reduces to the speed density when
/// the drift has zero mean over a period. On a line it is the normalised
/// speed density; the mass beyond the bounds is estimated on a window three
/// times as wide and reported in `truncation_mass`.
pub fn invariant_measure(model: &SlowFastModel, x: f64, domain: &YDomain) -> Result<InvariantMeasure> {
    let period = model.coeffs.period();
    match (domain, period) {
        (YDomain::Periodic { points }, Some(l)) | (YDomain::Auto { points }, Some(l)) => periodic_measure(model, x, l, *points),
        (YDomain::Periodic { .. }, None) => Err(Error::invalid(
            "y_domain",
            "periodic domain requested for a model without a declared period",
        )),
        (YDomain::Line { lo, hi, points }, _) => line_measure(model, x, *lo, *hi, *points),
        (YDomain::Auto { points }, None) => {
            let (lo, hi) = auto_bounds(model, x)?;
            line_measure(model, x, lo, hi, *points)
        }
    }
}

fn periodic_measure(model: &SlowFastModel, x: f64, l: f64, points: usize) -> Result<InvariantMeasure> {
    if points < 3 {
        return Err(Error::invalid("points", "need at least three points"));
    }
    let y = linspace(0.0, l, points);
    let (log_s, _) = log_scale_speed(model, x, &y)?;
    let d = log_s[points - 1];
    // C(y) = ∫_0^y s, scaled by e^{-top}
    let top = log_s.iter().cloned().fold(f64::NEG_INFINITY, f64::max).max(log_s[0] + d.max(0.0));
    let s_scaled: Vec<f64> = log_s.iter().map(|v| (v - top).exp()).collect();
    let c = cumulative_trapezoid(&y, &s_scaled);
    let c_l = c[points - 1];
    let mut log_dens = Vec::with_capacity(points);
    for i in 0..points {
        let wrap = (c_l - c[i]) + d.exp() * c[i];
        let s2 = sigma2_sq(model, x, y[i])?;
        log_dens.push(wrap.ln() + top - s2.ln() - log_s[i]);
    }
    let (density, log_norm) = normalize_log(&y, &log_dens);
    Ok(InvariantMeasure {
        y,
        density,
        log_normalizer: log_norm,
        domain: DomainKind::Periodic { period: l },
        truncation_mass: 0.0,
    })
}

fn line_measure(model: &SlowFastModel, x: f64, lo: f64, hi: f64, points: usize) -> Result<InvariantMeasure> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid("y_domain", format!("bad bounds [{lo}, {hi}]")));
    }
    if points < 3 {
        return Err(Error::invalid("points", "need at least three points"));
    }
    check_normalizable(model, x, 0.5 * (lo + hi), hi - lo)?;
    let y = linspace(lo, hi, points);
    let (_, log_m) = log_scale_speed(model, x, &y)?;
    let (density, log_norm) = normalize_log(&y, &log_m);

    let w = hi - lo;
    let wide = linspace(lo - w, hi + w, 3 * (points - 1) + 1);
    let (_, log_wide) = log_scale_speed(model, x, &wide)?;
    let top = log_wide.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let vals: Vec<f64> = log_wide.iter().map(|l| (l - top).exp()).collect();
    let total = trapezoid(&wide, &vals);
    let inner: Vec<f64> = wide
        .iter()
        .zip(&vals)
        .map(|(&yy, &v)| if yy >= lo && yy <= hi { v } else { 0.0 })
        .collect();
    let truncation_mass = ((total - trapezoid(&wide, &inner)) / total).max(0.0);

    Ok(InvariantMeasure {
        y,
        density,
        log_normalizer: log_norm,
        domain: DomainKind::Line { lo, hi },
        truncation_mass,
    })
}

/// Heuristic normalizability check: on a window 64 times wider than the
/// domain, the speed density must put less than 1 % of its mass in the
/// outer half.
fn check_normalizable(model: &SlowFastModel, x: f64, center: f64, width: f64) -> Result<()> {
    let r = 64.0 * width.max(1.0);
    let y = linspace(center - r, center + r, 8193);
    let (_, log_m) = log_scale_speed(model, x, &y)?;
    let top = log_m.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let vals: Vec<f64> = log_m.iter().map(|l| (l - top).exp()).collect();
    let total = trapezoid(&y, &vals);
    let inner: Vec<f64> = y
        .iter()
        .zip(&vals)
        .map(|(&yy, &v)| if (yy - center).abs() <= 0.5 * r { v } else { 0.0 })
        .collect();
    let outer = (total - trapezoid(&y, &inner)) / total;
    if !(outer < 1e-2) {
        return Err(Error::NonErgodic(format!(
            "speed density does not decay: {:.1}% of its mass on [{:.3e}, {:.3e}] lies beyond half that window",
            100.0 * outer,
            center - r,
            center + r
        )));
    }
    Ok(())
}

/// Mean ± 8 sd of the speed density, located by doubling a probe window
/// until the density at its edges is negligible.
fn auto_bounds(model: &SlowFastModel, x: f64) -> Result<(f64, f64)> {
    let mut r = 8.0;
    for _ in 0..12 {
        let y = linspace(-r, r, 4001);
        let (_, log_m) = log_scale_speed(model, x, &y)?;
        let top = log_m.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = log_m.iter().map(|l| (l - top).exp()).collect();
        let edge = w[0].max(w[w.len() - 1]);
        if edge < 1e-16 {
            let z = trapezoid(&y, &w);
            let mean = trapezoid(&y, &y.iter().zip(&w).map(|(a, b)| a * b).collect::<Vec<_>>()) / z;
            let var = trapezoid(&y, &y.iter().zip(&w).map(|(a, b)| (a - mean).powi(2) * b).collect::<Vec<_>>()) / z;
            let sd = var.sqrt();
            return Ok((mean - 8.0 * sd, mean + 8.0 * sd));
        }
        r *= 2.0;
    }
    check_normalizable(model, x, 0.0, r)?;
    Err(Error::NonErgodic(format!(
        "speed density still non-negligible at |y| = {r:e}; pass explicit bounds"
    )))
}

/// `∫ L f dπ` for the continuous proxy generator `L f = b2 f' + sigma2^2 f''`,
/// given `f'` and `f''`.
pub fn stationarity_residual(
    model: &SlowFastModel,
    x: f64,
    pi: &InvariantMeasure,
    df: impl Fn(f64) -> f64,
    d2f: impl Fn(f64) -> f64,
) -> f64 {
    pi.expect(|y| {
        let s = (model.coeffs.sigma2)(x, y);
        fast_drift(model, x, y) * df(y) + s * s * d2f(y)
    })
}

/// Largest stationarity residual over a fixed battery of test functions:
/// smooth bumps on a line, `sin`/`cos` harmonics on a periodic cell.
pub fn stationarity_battery(model: &SlowFastModel, x: f64, pi: &InvariantMeasure) -> f64 {
    let mut worst: f64 = 0.0;
    match pi.domain {
        DomainKind::Periodic { period } => {
            for j in 1..=3 {
                let k = std::f64::consts::TAU * j as f64 / period;
                let r1 = stationarity_residual(model, x, pi, |y| k * (k * y).cos(), |y| -k * k * (k * y).sin());
                let r2 = stationarity_residual(model, x, pi, |y| -k * (k * y).sin(), |y| -k * k * (k * y).cos());
                worst = worst.max(r1.abs()).max(r2.abs());
            }
        }
        DomainKind::Line { lo, hi } => {
            let w = hi - lo;
            for (c, r) in [(0.5, 0.25), (0.4, 0.15), (0.6, 0.2), (0.5, 0.1)] {
                let center = lo + c * w;
                let radius = r * w;
                let res = stationarity_residual(
                    model,
                    x,
                    pi,
                    |y| bump_derivs(y, center, radius).0,
                    |y| bump_derivs(y, center, radius).1,
                );
                worst = worst.max(res.abs());
            }
        }
    }
    worst
}

/// First and second derivative of `exp(-1 / (1 - u^2))`, `u = (y - c) / r`.
fn bump_derivs(y: f64, c: f64, r: f64) -> (f64, f64) {
    let u = (y - c) / r;
    if u.abs() >= 1.0 {
        return (0.0, 0.0);
    }
    let q = 1.0 - u * u;
    let f = (-1.0 / q).exp();
    let g1 = -2.0 * u / (q * q); // d/du of -1/q
    let g2 = -2.0 / (q * q) - 8.0 * u * u / (q * q * q);
    (f * g1 / r, f * (g1 * g1 + g2) / (r * r))
}

/// `V(y) = sigma1(x, y)^2 p^2 + ∫ (e^{k1(x,y,z) p} - 1 - k1 p) ν1(dz)`.
pub fn potential_v(model: &SlowFastModel, x: f64, p: f64, y: f64) -> Result<f64> {
    let s1 = (model.coeffs.sigma1)(x, y);
    let diff = s1 * s1 * p * p;
    if p == 0.0 || model.coeffs.k1.is_zero() || model.nu1.is_null() {
        return Ok(diff);
    }
    let k1 = &model.coeffs.k1;
    Ok(diff + exp_moment_integral(&model.nu1, |z| k1.eval(x, y, z), p)?)
}
