//! Quadrature against Lévy measures and sampling of compensated Poisson
//! increments.

use crate::error::{Error, Result};
use crate::model::LevyMeasureModel;
use crate::quad;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

const REL_TOL: f64 = 1e-13;
const MAX_TAIL_PANELS: usize = 1000;

/// Which part of the jump space to integrate over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    All,
    /// `|z| >= 1`.
    Large,
}

impl LevyMeasureModel {
    /// `∫ f(z) ν(dz)`; atoms are summed exactly, continuous parts use
    /// adaptive Gauss-Legendre panels split at `|z| = 1`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        self.integrate_over(f, Region::All)
    }

    pub fn integrate_over<F: Fn(f64) -> f64>(&self, f: F, region: Region) -> Result<f64> {
        match self {
            LevyMeasureModel::Null => Ok(0.0),
            LevyMeasureModel::Atomic { atoms } => {
                let mut s = 0.0;
                for a in atoms {
                    if region == Region::Large && a.at.abs() < 1.0 {
                        continue;
                    }
                    if a.mass == 0.0 {
                        continue;
                    }
                    let v = a.mass * f(a.at);
                    if !v.is_finite() {
                        return Err(Error::QuadratureFailure(format!(
                            "integrand not finite at atom z = {}",
                            a.at
                        )));
                    }
                    s += v;
                }
                Ok(s)
            }
            LevyMeasureModel::TruncatedStable {
                index,
                r_min,
                r_max,
                c_plus,
                c_minus,
            } => {
                let lo = if region == Region::Large { r_min.max(1.0) } else { *r_min };
                if lo >= *r_max {
                    return Ok(0.0);
                }
                let mut total = 0.0;
                if *c_plus > 0.0 {
                    total += stable_side(&|u| c_plus * f(u), *index, lo, *r_max, "positive tail")?;
                }
                if *c_minus > 0.0 {
                    total += stable_side(&|u| c_minus * f(-u), *index, lo, *r_max, "negative tail")?;
                }
                Ok(total)
            }
        }
    }

    /// Total mass `ν(R \ {0})` (finite after truncation).
    pub fn total_mass(&self) -> f64 {
        match self {
            LevyMeasureModel::Null => 0.0,
            LevyMeasureModel::Atomic { atoms } => atoms.iter().map(|a| a.mass).sum(),
            LevyMeasureModel::TruncatedStable {
                index,
                r_min,
                r_max,
                c_plus,
                c_minus,
            } => (c_plus + c_minus) / index * (r_min.powf(-index) - r_max.powf(-index)),
        }
    }

    /// `∫ z ν(dz)`.
    pub fn first_moment(&self) -> Result<f64> {
        self.integrate(|z| z)
    }

    /// Draws one jump size from the normalised measure `ν / ν(R)`.
    pub fn sample_size<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            LevyMeasureModel::Null => 0.0,
            LevyMeasureModel::Atomic { atoms } => {
                let total: f64 = atoms.iter().map(|a| a.mass).sum();
                let mut u = rng.gen::<f64>() * total;
                for a in atoms {
                    if u < a.mass {
                        return a.at;
                    }
                    u -= a.mass;
                }
                atoms.iter().rev().find(|a| a.mass > 0.0).map_or(0.0, |a| a.at)
            }
            LevyMeasureModel::TruncatedStable {
                index,
                r_min,
                r_max,
                c_plus,
                c_minus,
            } => {
                let positive = rng.gen::<f64>() * (c_plus + c_minus) < *c_plus;
                // inverse CDF of the power law on [r_min, r_max]
                let a = r_min.powf(-index);
                let b = r_max.powf(-index);
                let u: f64 = rng.gen();
                let r = (a - u * (a - b)).powf(-1.0 / index);
                if positive {
                    r
                } else {
                    -r
                }
            }
        }
    }

    /// Discrete quadrature rule `(z_q, w_q)` with `Σ w_q g(z_q) ≈ ∫ g dν`,
    /// used by the discretised fast generator. Weights are positive.
    pub fn quadrature_rule(&self) -> Vec<(f64, f64)> {
        match self {
            LevyMeasureModel::Null => Vec::new(),
            LevyMeasureModel::Atomic { atoms } => atoms
                .iter()
                .filter(|a| a.mass > 0.0)
                .map(|a| (a.at, a.mass))
                .collect(),
            LevyMeasureModel::TruncatedStable {
                index,
                r_min,
                r_max,
                c_plus,
                c_minus,
            } => {
                let mut hi = *r_max;
                if !hi.is_finite() {
                    // cut where the remaining tail mass is negligible
                    let mass = r_min.powf(-index);
                    hi = (1e-14 * mass).powf(-1.0 / index);
                }
                let mut seg = Vec::new();
                if *r_min < 1.0 && hi > 1.0 {
                    seg.extend(quad::geometric_rule(*r_min, 1.0, 8, 8));
                    seg.extend(quad::geometric_rule(1.0, hi, 8, 8));
                } else {
                    seg.extend(quad::geometric_rule(*r_min, hi, 12, 8));
                }
                let mut out = Vec::with_capacity(2 * seg.len());
                for (u, w) in seg {
                    let dens = w * u.powf(-1.0 - index);
                    if *c_plus > 0.0 {
                        out.push((u, c_plus * dens));
                    }
                    if *c_minus > 0.0 {
                        out.push((-u, c_minus * dens));
                    }
                }
                out
            }
        }
    }
}

/// `∫ c g(u) u^(-1-index) du` over `[lo, hi]`, `hi` possibly infinite.
fn stable_side(g: &dyn Fn(f64) -> f64, index: f64, lo: f64, hi: f64, tail: &str) -> Result<f64> {
    let dens = |u: f64| g(u) * u.powf(-1.0 - index);
    let mut total = 0.0;
    let split = 1.0f64.clamp(lo, hi);
    if lo < split {
        // decades below 1 first, the density varies over orders of magnitude there
        let decades = ((split / lo).log10().ceil() as usize).max(1);
        let ratio = (split / lo).powf(1.0 / decades as f64);
        let mut a = lo;
        for k in 0..decades {
            let b = if k + 1 == decades { split } else { a * ratio };
            total += panel(&dens, a, b)?;
            a = b;
        }
    }
    if split >= hi {
        return Ok(total);
    }
    if hi.is_finite() {
        let decades = ((hi / split).log10().ceil() as usize).max(1);
        let ratio = (hi / split).powf(1.0 / decades as f64);
        let mut a = split;
        for k in 0..decades {
            let b = if k + 1 == decades { hi } else { a * ratio };
            total += panel(&dens, a, b).map_err(|e| tail_error(e, tail))?;
            a = b;
        }
        return Ok(total);
    }
    Ok(total + infinite_tail(&dens, split, tail)?)
}

fn panel(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
    // scale the absolute floor by a coarse estimate of ∫|f|
    let coarse = quad::adaptive(&|z| f(z).abs(), a, b, 1e-3, 0.0).unwrap_or(0.0);
    quad::adaptive(&f, a, b, REL_TOL, 1e-15 * coarse + 1e-300)
}

fn tail_error(e: Error, tail: &str) -> Error {
    match e {
        Error::QuadratureFailure(detail) => Error::Divergence {
            tail: tail.to_string(),
            detail,
        },
        other => other,
    }
}

/// Sums doubling panels `[R, 2R]`; once the panel ratio settles below one
/// the remainder is closed with the geometric series.
fn infinite_tail(f: &dyn Fn(f64) -> f64, start: f64, tail: &str) -> Result<f64> {
    let mut total = 0.0;
    let mut a = start;
    let mut prev: Option<f64> = None;
    let mut prev_ratio: Option<f64> = None;
    let mut growing = 0;
    for k in 0..MAX_TAIL_PANELS {
        let c = panel(f, a, 2.0 * a).map_err(|e| tail_error(e, tail))?;
        total += c;
        if !total.is_finite() {
            return Err(Error::Divergence {
                tail: tail.to_string(),
                detail: format!("partial sum overflowed at |z| = {a:e}"),
            });
        }
        if c == 0.0 && k > 2 {
            return Ok(total);
        }
        if let Some(p) = prev {
            if p != 0.0 {
                let q = c / p;
                if q.abs() >= 1.0 {
                    growing += 1;
                    if growing >= 6 && k > 8 {
                        return Err(Error::Divergence {
                            tail: tail.to_string(),
                            detail: format!("panel contributions not decaying (ratio {q:.3}) at |z| = {a:e}"),
                        });
                    }
                } else {
                    growing = 0;
                    if let Some(pq) = prev_ratio {
                        let rest = c * q / (1.0 - q);
                        if (q - pq).abs() <= 1e-9 * q.abs() || rest.abs() <= 1e-16 * total.abs() {
                            return Ok(total + rest);
                        }
                    }
                }
                prev_ratio = Some(q);
            }
        }
        prev = Some(c);
        a *= 2.0;
    }
    Err(Error::Divergence {
        tail: tail.to_string(),
        detail: "tail sum did not settle".into(),
    })
}

/// `e^u - 1 - u`, accurate for small `|u|` and always `>= 0`.
#[inline]
pub fn exp_remainder(u: f64) -> f64 {
    if u.abs() < 1e-3 {
        let u2 = u * u;
        u2 * (0.5 + u * (1.0 / 6.0 + u * (1.0 / 24.0 + u * (1.0 / 120.0))))
    } else {
        u.exp_m1() - u
    }
}

/// `∫ (e^{k(z) p} - 1 - k(z) p) ν(dz)`; nonnegative and convex in `p`.
pub fn exp_moment_integral<K: Fn(f64) -> f64>(measure: &LevyMeasureModel, kernel: K, p: f64) -> Result<f64> {
    if p == 0.0 || measure.is_null() {
        return Ok(0.0);
    }
    let v = measure.integrate(|z| exp_remainder(kernel(z) * p))?;
    Ok(v.max(0.0))
}

/// `∫_{|z|>=1} z ν(dz)`, without any time-scale prefactor.
pub fn drift_correction(measure: &LevyMeasureModel) -> Result<f64> {
    measure.integrate_over(|z| z, Region::Large)
}

/// Jumps of a Poisson random measure with intensity `scale * ν(dz) dt`
/// over one step `[0, dt]`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct JumpBatch {
    pub times: Vec<f64>,
    pub sizes: Vec<f64>,
    pub intensity_scale: f64,
}

/// Samples the jump times (sorted) and sizes in `[0, dt]`.
pub fn sample_jumps<R: Rng + ?Sized>(
    measure: &LevyMeasureModel,
    dt: f64,
    intensity_scale: f64,
    rng: &mut R,
) -> Result<JumpBatch> {
    let mut batch = JumpBatch {
        intensity_scale,
        ..Default::default()
    };
    let rate = measure.total_mass() * intensity_scale * dt;
    if rate <= 0.0 {
        return Ok(batch);
    }
    let count = Poisson::new(rate)
        .map_err(|e| Error::invalid("intensity", e.to_string()))?
        .sample(rng) as usize;
    let mut times: Vec<f64> = (0..count).map(|_| rng.gen::<f64>() * dt).collect();
    times.sort_by(f64::total_cmp);
    batch.sizes = (0..count).map(|_| measure.sample_size(rng)).collect();
    batch.times = times;
    Ok(batch)
}

/// One compensated increment `Σ k(z_i) - scale * dt * ∫ k dν`.
pub fn sample_compensated_increment<K: Fn(f64) -> f64, R: Rng + ?Sized>(
    measure: &LevyMeasureModel,
    kernel: K,
    dt: f64,
    intensity_scale: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(dt > 0.0) || !(intensity_scale > 0.0) {
        return Err(Error::invalid("dt", "step and intensity scale must be positive"));
    }
    if measure.is_null() {
        return Ok(0.0);
    }
    let compensator = intensity_scale * dt * measure.integrate(&kernel)?;
    let batch = sample_jumps(measure, dt, intensity_scale, rng)?;
    Ok(batch.sizes.iter().map(|&z| kernel(z)).sum::<f64>() - compensator)
}
