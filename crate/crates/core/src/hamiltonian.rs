//! Limit Hamiltonians of the three regimes, the prelimit exponential
//! generator and Hamiltonian tables.
//!
//! The critical Hamiltonian is the principal eigenvalue of `L^{x,p} + V` on
//! a grid. The discretisation (upwind drift, central diffusion, jump
//! quadrature with linear interpolation of the landing point) produces a
//! Metzler matrix with zero row sums, so a positive Perron vector exists and
//! `min V <= lambda <= max V` holds exactly.

use crate::error::{Error, Result};
use crate::fastlayer::{self, potential_v, YDomain};
use crate::model::{JumpKernel, Regime, RegimeParams, SlowFastModel};
use crate::quad::{golden_max, linspace};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// `V^{x,p}(y)` plus the O(1) drift produced by a slow drift shift.
pub fn effective_potential(model: &SlowFastModel, x: f64, p: f64, y: f64) -> Result<f64> {
    Ok(potential_v(model, x, p, y)? + model.drift_shift.slow * p)
}

/// Grid of the fast variable for eigenproblems.
#[derive(Clone, Debug, PartialEq)]
pub struct FastGrid {
    pub y: Vec<f64>,
    pub h: f64,
    /// Period of a periodic cell (nodes `0, h, ..., L - h`).
    pub period: Option<f64>,
}

impl FastGrid {
    pub fn periodic(period: f64, points: usize) -> Result<Self> {
        if points < 3 || !(period > 0.0) {
            return Err(Error::invalid("points", "periodic grid needs >= 3 points and a positive period"));
        }
        let h = period / points as f64;
        Ok(FastGrid {
            y: (0..points).map(|i| i as f64 * h).collect(),
            h,
            period: Some(period),
        })
    }

    pub fn line(lo: f64, hi: f64, points: usize) -> Result<Self> {
        if points < 3 || !(lo < hi) {
            return Err(Error::invalid("points", "line grid needs >= 3 points and lo < hi"));
        }
        let y = linspace(lo, hi, points);
        Ok(FastGrid {
            h: (hi - lo) / (points - 1) as f64,
            y,
            period: None,
        })
    }

    /// Periodic cell for periodic models, otherwise `window` or the default
    /// window of the untilted invariant density at `x`.
    pub fn for_model(model: &SlowFastModel, x: f64, points: usize, window: Option<(f64, f64)>) -> Result<Self> {
        match (model.coeffs.period(), window) {
            (Some(l), _) => Self::periodic(l, points),
            (None, Some((lo, hi))) => Self::line(lo, hi, points),
            (None, None) => {
                let (lo, hi) = default_window(model, x)?;
                Self::line(lo, hi, points)
            }
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    fn lo(&self) -> f64 {
        self.y[0]
    }

    fn hi(&self) -> f64 {
        self.y[self.y.len() - 1]
    }

    /// Linear-interpolation stencil `(j0, j1, t)` for an arbitrary point:
    /// wrapped on a cell, clamped on a line.
    fn locate(&self, v: f64) -> (usize, usize, f64) {
        let n = self.y.len();
        match self.period {
            Some(l) => {
                let u = (v - self.y[0]).rem_euclid(l) / self.h;
                let j = (u.floor() as usize).min(n - 1);
                let t = (u - j as f64).clamp(0.0, 1.0);
                (j, (j + 1) % n, t)
            }
            None => {
                let v = v.clamp(self.lo(), self.hi());
                let u = (v - self.lo()) / self.h;
                let j = (u.floor() as usize).min(n - 2);
                (j, j + 1, (u - j as f64).clamp(0.0, 1.0))
            }
        }
    }
}

/// Window used for truncated-line problems: mean ± 8 sd of the untilted
/// invariant density at `x`.
pub fn default_window(model: &SlowFastModel, x: f64) -> Result<(f64, f64)> {
    let pi = fastlayer::invariant_measure(model, x, &YDomain::Auto { points: 401 })?;
    match pi.domain {
        fastlayer::DomainKind::Line { lo, hi } => Ok((lo, hi)),
        fastlayer::DomainKind::Periodic { period } => Ok((0.0, period)),
    }
}

/// Sparse Metzler matrix of the discretised tilted generator `L^{x,p}`.
#[derive(Clone, Debug)]
pub struct DiscreteGenerator {
    pub grid: FastGrid,
    /// Combined drift `b2 + shift + 2 rho sigma1 sigma2 p - ∫ k2 dν2` per node.
    pub drift: Vec<f64>,
    off: Vec<Vec<(usize, f64)>>,
    diag: Vec<f64>,
}

impl DiscreteGenerator {
    pub fn tilted(model: &SlowFastModel, x: f64, p: f64, grid: FastGrid) -> Result<Self> {
        let c = &model.coeffs;
        let n = grid.len();
        let h = grid.h;
        let rule = if c.k2.is_zero() { Vec::new() } else { model.nu2.quadrature_rule() };
        let mut off: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut diag = vec![0.0; n];
        let mut drift = vec![0.0; n];
        let two_rho_p = 2.0 * c.rho() * p;
        for i in 0..n {
            let y = grid.y[i];
            let s2 = (c.sigma2)(x, y);
            let var = s2 * s2;
            let mut beta = (c.b2)(x, y) + model.drift_shift.fast;
            if two_rho_p != 0.0 {
                beta += two_rho_p * (c.sigma1)(x, y) * s2;
            }
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(2 + 2 * rule.len());
            for &(z, w) in &rule {
                let k = c.k2.eval(x, y, z);
                beta -= w * k;
                let (j0, j1, t) = grid.locate(y + k);
                row.push((j0, w * (1.0 - t)));
                row.push((j1, w * t));
            }
            if !beta.is_finite() || !var.is_finite() {
                return Err(Error::invalid("coefficients", format!("non-finite drift or diffusion at y = {y}")));
            }
            drift[i] = beta;
            let (left, right) = match grid.period {
                Some(_) => (Some((i + n - 1) % n), Some((i + 1) % n)),
                None => ((i > 0).then(|| i - 1), (i + 1 < n).then_some(i + 1)),
            };
            let up = beta.max(0.0) / h;
            let down = (-beta).max(0.0) / h;
            if let Some(r) = right {
                row.push((r, var / (h * h) + up));
            }
            if let Some(l) = left {
                row.push((l, var / (h * h) + down));
            }
            // merge duplicates, drop self-loops (they cancel against the diagonal)
            row.retain(|&(j, w)| j != i && w != 0.0);
            row.sort_by_key(|&(j, _)| j);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for (j, w) in row {
                match merged.last_mut() {
                    Some((lj, lw)) if *lj == j => *lw += w,
                    _ => merged.push((j, w)),
                }
            }
            diag[i] = -merged.iter().map(|(_, w)| w).sum::<f64>();
            off[i] = merged;
        }
        Ok(DiscreteGenerator { grid, drift, off, diag })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `out = A f`.
    pub fn apply(&self, f: &[f64], out: &mut [f64]) {
        for i in 0..self.len() {
            let mut s = self.diag[i] * f[i];
            for &(j, w) in &self.off[i] {
                s += w * f[j];
            }
            out[i] = s;
        }
    }

    /// Largest absolute row sum (zero for a conservative generator).
    pub fn row_sum_defect(&self) -> f64 {
        (0..self.len())
            .map(|i| (self.diag[i] + self.off[i].iter().map(|(_, w)| w).sum::<f64>()).abs())
            .fold(0.0, f64::max)
    }

    /// Smallest off-diagonal entry (nonnegative for a Metzler matrix).
    pub fn min_off_diagonal(&self) -> f64 {
        self.off.iter().flatten().map(|&(_, w)| w).fold(f64::INFINITY, f64::min)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            for &(j, w) in &self.off[i] {
                m[(i, j)] += w;
            }
        }
        m
    }

    /// Discrete stationary distribution (`mu A = 0`, `Σ mu = 1`) by power
    /// iteration on the shifted transpose.
    pub fn stationary(&self, opts: &EigenOptions) -> Result<Vec<f64>> {
        let n = self.len();
        let shift = self.diag.iter().map(|d| d.abs()).fold(0.0, f64::max) + 1.0;
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for i in 0..n {
            for &(j, w) in &self.off[i] {
                cols[j].push((i, w));
            }
        }
        let mut mu = vec![1.0 / n as f64; n];
        let mut next = vec![0.0; n];
        for it in 0..opts.max_iter {
            for j in 0..n {
                let mut s = (self.diag[j] + shift) * mu[j];
                for &(i, w) in &cols[j] {
                    s += w * mu[i];
                }
                next[j] = s;
            }
            let (lo, hi) = ratio_bounds(&next, &mu);
            let total: f64 = next.iter().sum();
            for j in 0..n {
                mu[j] = next[j] / total;
            }
            if hi - lo <= opts.tol * shift && it > 0 {
                return Ok(mu);
            }
        }
        Err(Error::NoConvergence {
            iterations: opts.max_iter,
            residual: f64::NAN,
        })
    }
}

fn ratio_bounds(next: &[f64], cur: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (a, b) in next.iter().zip(cur) {
        let r = a / b;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    (lo, hi)
}

/// Power-iteration controls.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenOptions {
    /// Stop when the Collatz-Wielandt bracket is below `tol * max(1, |lambda|)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: 1e-10,
            max_iter: 100_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenSolveResult {
    pub eigenvalue: f64,
    pub y: Vec<f64>,
    /// Perron vector, normalised to sup = 1.
    pub eigenfunction: Vec<f64>,
    pub iterations: usize,
    /// Width of the final Collatz-Wielandt bracket.
    pub residual: f64,
    pub potential: Vec<f64>,
}

impl EigenSolveResult {
    /// `W = ln(eigenfunction)`.
    pub fn log_eigenfunction(&self) -> Vec<f64> {
        self.eigenfunction.iter().map(|v| v.ln()).collect()
    }
}

/// Principal eigenpair of `A + diag(v)` by power iteration on
/// `A + diag(v) + s I`, `s = max |diagonal| + 1`.
pub fn principal_eigen(gen: &DiscreteGenerator, v: &[f64], opts: &EigenOptions) -> Result<EigenSolveResult> {
    let n = gen.len();
    if v.len() != n {
        return Err(Error::invalid("potential", "length does not match the grid"));
    }
    let shift = (0..n).map(|i| (gen.diag[i] + v[i]).abs()).fold(0.0, f64::max) + 1.0;
    let mut f = vec![1.0; n];
    let mut g = vec![0.0; n];
    let mut bracket = (f64::NEG_INFINITY, f64::INFINITY);
    let apply = |f: &[f64], g: &mut [f64]| {
        gen.apply(f, g);
        for i in 0..n {
            g[i] += v[i] * f[i];
        }
    };
    let converged = |b: (f64, f64)| b.1 - b.0 <= opts.tol * (0.5 * (b.0 + b.1)).abs().max(1.0);
    let finish = |f: Vec<f64>, b: (f64, f64), it: usize| {
        if let Some(node) = f.iter().position(|&x| !(x > 0.0)) {
            return Err(Error::Monotonicity { node });
        }
        Ok(EigenSolveResult {
            eigenvalue: 0.5 * (b.0 + b.1),
            y: gen.grid.y.clone(),
            eigenfunction: f,
            iterations: it,
            residual: b.1 - b.0,
            potential: v.to_vec(),
        })
    };
    let power_budget = opts.max_iter.min(POWER_BUDGET);
    for it in 1..=power_budget {
        apply(&f, &mut g);
        bracket = ratio_bounds(&g, &f);
        let top = g.iter().zip(&f).map(|(a, b)| a + shift * b).fold(0.0, f64::max);
        for i in 0..n {
            f[i] = (g[i] + shift * f[i]) / top;
        }
        if converged(bracket) {
            return finish(f, bracket, it);
        }
    }
    // Slow mixing: refine with inverse iteration shifted just above the upper
    // bound, where sigma I - M is an M-matrix with a positive inverse.
    let mut m = gen.to_dense();
    for i in 0..n {
        m[(i, i)] += v[i];
    }
    let mut it = power_budget;
    while it < opts.max_iter {
        let scale = (0.5 * (bracket.0 + bracket.1)).abs().max(1.0);
        let sigma = bracket.1 + (bracket.1 - bracket.0).max(1e-6 * scale);
        let lu = (DMatrix::identity(n, n) * sigma - &m).lu();
        for _ in 0..INVERSE_SWEEPS {
            it += 1;
            let rhs = nalgebra::DVector::from_column_slice(&f);
            let Some(sol) = lu.solve(&rhs) else {
                break;
            };
            let top = sol.iter().cloned().fold(0.0, f64::max);
            if !(top > 0.0) {
                break;
            }
            f.iter_mut().zip(sol.iter()).for_each(|(a, b)| *a = b / top);
            apply(&f, &mut g);
            bracket = ratio_bounds(&g, &f);
            if converged(bracket) {
                return finish(f, bracket, it);
            }
            if it >= opts.max_iter {
                break;
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual: bracket.1 - bracket.0,
    })
}

const POWER_BUDGET: usize = 20_000;
const INVERSE_SWEEPS: usize = 50;

/// Largest real part among all eigenvalues of `A + diag(v)` from a dense
/// Schur decomposition. Meant for checking the power iteration on small grids.
pub fn dense_principal_eigenvalue(gen: &DiscreteGenerator, v: &[f64]) -> f64 {
    let mut m = gen.to_dense();
    for i in 0..gen.len() {
        m[(i, i)] += v[i];
    }
    m.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Effective potential on the grid nodes.
pub fn potential_on_grid(model: &SlowFastModel, x: f64, p: f64, grid: &FastGrid) -> Result<Vec<f64>> {
    grid.y.iter().map(|&y| effective_potential(model, x, p, y)).collect()
}

/// Critical Hamiltonian: principal eigenpair of `L^{x,p} + V` on `grid`.
pub fn h0_critical_eigen(
    model: &SlowFastModel,
    x: f64,
    p: f64,
    grid: &FastGrid,
    opts: &EigenOptions,
) -> Result<EigenSolveResult> {
    let gen = DiscreteGenerator::tilted(model, x, p, grid.clone())?;
    let v = potential_on_grid(model, x, p, grid)?;
    let res = principal_eigen(&gen, &v, opts)?;
    let (vmin, vmax) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &t| (a.min(t), b.max(t)));
    let slack = 1e-9 * res.eigenvalue.abs().max(1.0);
    debug_assert!(res.eigenvalue >= vmin - slack && res.eigenvalue <= vmax + slack);
    let _ = (vmin, vmax, slack);
    Ok(res)
}

/// Result of the Donsker-Varadhan bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DvBound {
    pub value: f64,
    /// Index of the candidate attaining the bound.
    pub best: usize,
    /// `∫ V dmu - J(mu)` for each candidate.
    pub per_candidate: Vec<f64>,
}

/// Donsker-Varadhan lower bound `max_mu [Σ mu_i V_i - J(mu)]` with
/// `J(mu) = -inf_g Σ_i mu_i (A e^g)_i / e^{g_i}`.
///
/// The infimum is started from the best member of `family` (constants are
/// always included) and then computed exactly by damped Newton on the
/// convex objective in `g = ln f`. A finite family alone would
/// underestimate `J` and could push the value above the eigenvalue.
/// Candidates must be strictly positive probability vectors on the grid.
pub fn h0_critical_dv_lower_bound(
    model: &SlowFastModel,
    x: f64,
    p: f64,
    grid: &FastGrid,
    candidates: &[Vec<f64>],
    family: &[&(dyn Fn(f64) -> f64 + Sync)],
) -> Result<DvBound> {
    let gen = DiscreteGenerator::tilted(model, x, p, grid.clone())?;
    let v = potential_on_grid(model, x, p, grid)?;
    dv_bound(&gen, &v, candidates, family)
}

pub fn dv_bound(
    gen: &DiscreteGenerator,
    v: &[f64],
    candidates: &[Vec<f64>],
    family: &[&(dyn Fn(f64) -> f64 + Sync)],
) -> Result<DvBound> {
    let n = gen.len();
    if candidates.is_empty() {
        return Err(Error::invalid("candidates", "need at least one candidate measure"));
    }
    let mut starts: Vec<Vec<f64>> = vec![vec![0.0; n]];
    for (k, f) in family.iter().enumerate() {
        let mut g = Vec::with_capacity(n);
        for &y in &gen.grid.y {
            let val = f(y);
            if !(val > 0.0) || !val.is_finite() {
                return Err(Error::invalid(
                    "test_functions",
                    format!("test function {k} is not strictly positive at y = {y}"),
                ));
            }
            g.push(val.ln());
        }
        starts.push(g);
    }
    let mut per = Vec::with_capacity(candidates.len());
    for (c, mu) in candidates.iter().enumerate() {
        if mu.len() != n {
            return Err(Error::invalid("candidates", format!("candidate {c} has the wrong length")));
        }
        if mu.iter().any(|&m| !(m > 0.0)) {
            return Err(Error::invalid("candidates", format!("candidate {c} is not strictly positive")));
        }
        let total: f64 = mu.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("candidates", format!("candidate {c} sums to {total}")));
        }
        let g0 = starts
            .iter()
            .min_by(|a, b| dv_objective(gen, mu, a).total_cmp(&dv_objective(gen, mu, b)))
            .unwrap();
        let inf = minimize_dv(gen, mu, g0.clone());
        let mean_v: f64 = mu.iter().zip(v).map(|(m, vi)| m * vi).sum();
        per.push(mean_v + inf);
    }
    let best = (0..per.len()).max_by(|&a, &b| per[a].total_cmp(&per[b])).unwrap();
    Ok(DvBound {
        value: per[best],
        best,
        per_candidate: per,
    })
}

/// `Σ_i mu_i (A e^g)_i / e^{g_i}`.
fn dv_objective(gen: &DiscreteGenerator, mu: &[f64], g: &[f64]) -> f64 {
    (0..gen.len())
        .map(|i| {
            let s: f64 = gen.off[i].iter().map(|&(j, w)| w * (g[j] - g[i]).exp()).sum();
            mu[i] * (gen.diag[i] + s)
        })
        .sum()
}

fn minimize_dv(gen: &DiscreteGenerator, mu: &[f64], mut g: Vec<f64>) -> f64 {
    let n = gen.len();
    let mut fval = dv_objective(gen, mu, &g);
    for _ in 0..200 {
        // T_ij = mu_i A_ij e^{g_j - g_i}; gradient and graph-Laplacian Hessian
        let mut grad = vec![0.0; n];
        let mut hess = DMatrix::<f64>::zeros(n - 1, n - 1);
        let mut scale = 0.0;
        for i in 0..n {
            for &(j, w) in &gen.off[i] {
                let t = mu[i] * w * (g[j] - g[i]).exp();
                scale += t;
                grad[j] += t;
                grad[i] -= t;
                // node 0 is pinned (the objective is invariant under constants)
                if i > 0 {
                    hess[(i - 1, i - 1)] += t;
                }
                if j > 0 {
                    hess[(j - 1, j - 1)] += t;
                }
                if i > 0 && j > 0 {
                    hess[(i - 1, j - 1)] -= t;
                    hess[(j - 1, i - 1)] -= t;
                }
            }
        }
        let gmax = grad.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if gmax <= 1e-14 * scale.max(1e-300) {
            break;
        }
        for k in 0..n - 1 {
            hess[(k, k)] += 1e-14 * scale;
        }
        let rhs = DMatrix::from_iterator(n - 1, 1, grad[1..].iter().map(|v| -v));
        let Some(chol) = hess.cholesky() else { break };
        let step = chol.solve(&rhs);
        let slope: f64 = (0..n - 1).map(|k| grad[k + 1] * step[(k, 0)]).sum();
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..60 {
            let trial: Vec<f64> = (0..n)
                .map(|k| if k == 0 { g[0] } else { g[k] + t * step[(k - 1, 0)] })
                .collect();
            let ft = dv_objective(gen, mu, &trial);
            if ft.is_finite() && ft <= fval + 1e-4 * t * slope {
                improved = ft < fval;
                g = trial;
                fval = ft;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    fval
}

/// Supercritical Hamiltonian `∫ V dpi` with a halved-grid error estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Averaged {
    pub value: f64,
    pub quad_error: f64,
}

pub fn h0_supercritical(model: &SlowFastModel, x: f64, p: f64, domain: &YDomain) -> Result<Averaged> {
    let pi = fastlayer::invariant_measure(model, x, domain)?;
    if p == 0.0 {
        return Ok(Averaged { value: 0.0, quad_error: 0.0 });
    }
    let vals: Vec<f64> = pi
        .y
        .iter()
        .zip(&pi.density)
        .map(|(&y, &d)| Ok(d * effective_potential(model, x, p, y)?))
        .collect::<Result<_>>()?;
    let value = crate::quad::trapezoid(&pi.y, &vals);
    let coarse_y: Vec<f64> = pi.y.iter().step_by(2).copied().collect();
    let coarse_v: Vec<f64> = vals.iter().step_by(2).copied().collect();
    let quad_error = if coarse_y.len() > 2 && (pi.y.len() - 1) % 2 == 0 {
        (crate::quad::trapezoid(&coarse_y, &coarse_v) - value).abs() / 3.0
    } else {
        f64::NAN
    };
    Ok(Averaged { value, quad_error })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Maximum {
    pub value: f64,
    pub argmax: f64,
}

/// Subcritical Hamiltonian `max_y V` over `[lo, hi]` (a full period for
/// periodic models): grid scan, then golden-section refinement around the
/// winning node. Ties go to the smallest `y`.
pub fn h0_subcritical(model: &SlowFastModel, x: f64, p: f64, lo: f64, hi: f64, points: usize) -> Result<Maximum> {
    if !(lo < hi) || points < 3 {
        return Err(Error::invalid("window", "need lo < hi and at least three scan points"));
    }
    let y = linspace(lo, hi, points);
    let mut best = (0usize, f64::NEG_INFINITY);
    for (i, &yi) in y.iter().enumerate() {
        let v = effective_potential(model, x, p, yi)?;
        if v > best.1 {
            best = (i, v);
        }
    }
    let i = best.0;
    let a = y[i.saturating_sub(1)];
    let b = y[(i + 1).min(points - 1)];
    // V is assumed finite on the window; failures inside the search map to -inf
    let (ya, va) = golden_max(|t| effective_potential(model, x, p, t).unwrap_or(f64::NEG_INFINITY), a, b, 1e-12);
    if va > best.1 {
        Ok(Maximum { value: va, argmax: ya })
    } else {
        Ok(Maximum {
            value: best.1,
            argmax: y[i],
        })
    }
}

/// `∂_y W` of the subcritical corrector:
/// `(sqrt(H0 - V + rho^2 s1^2 s2^2 p^2 / q) - rho s1 s2 p / sqrt(q)) / sqrt(q)`
/// with `q = sigma2^2 + ½ ∫ k2^2 dν2`.
pub fn subcritical_corrector_slope(model: &SlowFastModel, x: f64, p: f64, h0: f64, y: f64) -> Result<f64> {
    let c = &model.coeffs;
    let v = effective_potential(model, x, p, y)?;
    if h0 < v - 1e-12 * v.abs().max(1.0) {
        return Err(Error::Infeasible { y, h0, v });
    }
    let s1 = (c.sigma1)(x, y);
    let s2 = (c.sigma2)(x, y);
    let half_jump = if c.k2.is_zero() || model.nu2.is_null() {
        0.0
    } else {
        0.5 * model.nu2.integrate(|z| c.k2.eval(x, y, z).powi(2))?
    };
    let q = s2 * s2 + half_jump;
    if !(q > 0.0) {
        return Err(Error::Degenerate { x, y });
    }
    let cross = c.rho() * s1 * s2 * p;
    let radicand = ((h0 - v) + cross * cross / q).max(0.0);
    Ok((radicand.sqrt() - cross / q.sqrt()) / q.sqrt())
}

/// A test function `U(x, y)` with the derivatives the exponential generator needs.
pub trait TestFunction: Sync {
    fn value(&self, x: f64, y: f64) -> f64;
    fn dx(&self, x: f64, y: f64) -> f64;
    fn dxx(&self, x: f64, y: f64) -> f64;
    fn dy(&self, x: f64, y: f64) -> f64;
    fn dyy(&self, x: f64, y: f64) -> f64;
    fn dxy(&self, x: f64, y: f64) -> f64;
}

/// `U = a x + c`.
#[derive(Clone, Copy, Debug)]
pub struct Affine {
    pub slope: f64,
    pub offset: f64,
}

impl TestFunction for Affine {
    fn value(&self, x: f64, _: f64) -> f64 {
        self.slope * x + self.offset
    }
    fn dx(&self, _: f64, _: f64) -> f64 {
        self.slope
    }
    fn dxx(&self, _: f64, _: f64) -> f64 {
        0.0
    }
    fn dy(&self, _: f64, _: f64) -> f64 {
        0.0
    }
    fn dyy(&self, _: f64, _: f64) -> f64 {
        0.0
    }
    fn dxy(&self, _: f64, _: f64) -> f64 {
        0.0
    }
}

/// The prelimit exponential generator `H^{eps,delta} U` at `(x, y)`:
///
/// `eps (b1 U_x + s1^2 U_xx) + s1^2 U_x^2 + 2 rho s1 s2 (U_x U_y + eps U_xy) / sqrt(delta)
///  + ∫ (e^{(U(x + eps k1, y) - U) / eps} - 1 - k1 U_x) dν1
///  + (eps^2 / delta) [b2 U_y / eps + s2^2 (U_yy / eps + U_y^2 / eps^2)
///  + ∫ (e^{(U(x, y + k2) - U) / eps} - 1 - k2 U_y / eps) dν2]`.
pub fn eval_prelimit_h(model: &SlowFastModel, regime: &RegimeParams, u: &dyn TestFunction, x: f64, y: f64) -> Result<f64> {
    let c = &model.coeffs;
    let eps = regime.epsilon();
    let delta = regime.delta();
    let (ux, uxx, uy, uyy, uxy) = (u.dx(x, y), u.dxx(x, y), u.dy(x, y), u.dyy(x, y), u.dxy(x, y));
    let u0 = u.value(x, y);
    let s1 = (c.sigma1)(x, y);
    let s2 = (c.sigma2)(x, y);
    let b1 = (c.b1)(x, y) + model.drift_shift.slow / eps;
    let b2 = (c.b2)(x, y) + model.drift_shift.fast;

    let mut total = eps * (b1 * ux + s1 * s1 * uxx) + s1 * s1 * ux * ux;
    total += 2.0 * c.rho() * s1 * s2 * (ux * uy + eps * uxy) / delta.sqrt();
    if !c.k1.is_zero() && !model.nu1.is_null() {
        total += model.nu1.integrate(|z| {
            let k = c.k1.eval(x, y, z);
            let du = (u.value(x + eps * k, y) - u0) / eps;
            du.exp_m1() - k * ux
        })?;
    }
    let mut fast = b2 * uy / eps + s2 * s2 * (uyy / eps + uy * uy / (eps * eps));
    if !c.k2.is_zero() && !model.nu2.is_null() {
        fast += model.nu2.integrate(|z| {
            let k = c.k2.eval(x, y, z);
            let du = (u.value(x, y + k) - u0) / eps;
            du.exp_m1() - k * uy / eps
        })?;
    }
    Ok(total + eps * eps / delta * fast)
}

/// `U(x, y) = h(x) + eps W(y)` built from a computed critical
/// eigenfunction. At grid nodes `W'` and `W''` are the one-sided and central
/// exponential differences that make `b W' + s2^2 (W'' + W'^2)` reproduce the
/// discrete operator exactly; between nodes `W` is linearly interpolated.
pub struct CorrectorTestFn<'a> {
    pub h: &'a (dyn Fn(f64) -> (f64, f64, f64) + Sync),
    pub eps: f64,
    grid: FastGrid,
    w: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

impl<'a> CorrectorTestFn<'a> {
    /// `h` returns `(h, h', h'')`.
    pub fn new(
        gen: &DiscreteGenerator,
        eigen: &EigenSolveResult,
        h: &'a (dyn Fn(f64) -> (f64, f64, f64) + Sync),
        eps: f64,
    ) -> Self {
        let grid = gen.grid.clone();
        let n = grid.len();
        let w = eigen.log_eigenfunction();
        let hh = grid.h;
        let mut d1 = vec![0.0; n];
        let mut d2 = vec![0.0; n];
        for i in 0..n {
            let (l, r) = match grid.period {
                Some(_) => (Some((i + n - 1) % n), Some((i + 1) % n)),
                None => ((i > 0).then(|| i - 1), (i + 1 < n).then_some(i + 1)),
            };
            let a = r.map_or(0.0, |r| (w[r] - w[i]).exp_m1());
            let c = l.map_or(0.0, |l| (w[l] - w[i]).exp_m1());
            d1[i] = if gen.drift[i] > 0.0 { a / hh } else { -c / hh };
            d2[i] = (a + c) / (hh * hh) - d1[i] * d1[i];
        }
        CorrectorTestFn { h, eps, grid, w, d1, d2 }
    }

    fn node(&self, y: f64) -> usize {
        let (j0, j1, t) = self.grid.locate(y);
        if t < 0.5 {
            j0
        } else {
            j1
        }
    }

    fn w_at(&self, y: f64) -> f64 {
        let (j0, j1, t) = self.grid.locate(y);
        self.w[j0] * (1.0 - t) + self.w[j1] * t
    }
}

impl TestFunction for CorrectorTestFn<'_> {
    fn value(&self, x: f64, y: f64) -> f64 {
        (self.h)(x).0 + self.eps * self.w_at(y)
    }
    fn dx(&self, x: f64, _: f64) -> f64 {
        (self.h)(x).1
    }
    fn dxx(&self, x: f64, _: f64) -> f64 {
        (self.h)(x).2
    }
    fn dy(&self, _: f64, y: f64) -> f64 {
        self.eps * self.d1[self.node(y)]
    }
    fn dyy(&self, _: f64, y: f64) -> f64 {
        self.eps * self.d2[self.node(y)]
    }
    fn dxy(&self, _: f64, _: f64) -> f64 {
        0.0
    }
}

/// Controls for Hamiltonian evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct H0Settings {
    /// Nodes of the eigenproblem grid.
    pub eigen_points: usize,
    /// Nodes of the subcritical scan and of the invariant density.
    pub scan_points: usize,
    /// Truncated-line window; defaults to mean ± 8 sd of the invariant density.
    pub window: Option<(f64, f64)>,
    pub eigen: EigenOptions,
}

impl Default for H0Settings {
    fn default() -> Self {
        H0Settings {
            eigen_points: 200,
            scan_points: 2001,
            window: None,
            eigen: EigenOptions::default(),
        }
    }
}

/// `H0(x, p)` in the given regime with a diagnostic: quadrature error
/// (supercritical), power iterations (critical) or the maximiser
/// (subcritical).
pub fn h0(model: &SlowFastModel, regime: Regime, x: f64, p: f64, s: &H0Settings) -> Result<(f64, f64)> {
    let window = match (model.coeffs.period(), s.window) {
        (Some(l), _) => (0.0, l),
        (None, Some(w)) => w,
        (None, None) => default_window(model, x)?,
    };
    match regime {
        Regime::Supercritical => {
            let domain = match model.coeffs.period() {
                Some(_) => YDomain::Periodic { points: s.scan_points },
                None => YDomain::Line {
                    lo: window.0,
                    hi: window.1,
                    points: s.scan_points,
                },
            };
            let r = h0_supercritical(model, x, p, &domain)?;
            Ok((r.value, r.quad_error))
        }
        Regime::Critical => {
            let grid = FastGrid::for_model(model, x, s.eigen_points, Some(window))?;
            let r = h0_critical_eigen(model, x, p, &grid, &s.eigen)?;
            Ok((r.eigenvalue, r.iterations as f64))
        }
        Regime::Subcritical => {
            let r = h0_subcritical(model, x, p, window.0, window.1, s.scan_points)?;
            Ok((r.value, r.argmax))
        }
    }
}

/// `H0` sampled on an `(x, p)` grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HamiltonianTable {
    pub regime: Regime,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    /// `values[i][j] = H0(x[i], p[j])`.
    pub values: Vec<Vec<f64>>,
    pub diag: Vec<Vec<f64>>,
}

impl HamiltonianTable {
    /// Evaluates every entry (in parallel) and checks that all are finite.
    pub fn build(model: &SlowFastModel, regime: Regime, x: &[f64], p: &[f64], s: &H0Settings) -> Result<Self> {
        if x.is_empty() || p.is_empty() {
            return Err(Error::invalid("grid", "x and p grids must be nonempty"));
        }
        if p.windows(2).any(|w| !(w[0] < w[1])) || x.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("grid", "x and p grids must be strictly increasing"));
        }
        let entries: Vec<(usize, usize)> = (0..x.len()).flat_map(|i| (0..p.len()).map(move |j| (i, j))).collect();
        let out: Vec<Result<(f64, f64)>> = entries.par_iter().map(|&(i, j)| h0(model, regime, x[i], p[j], s)).collect();
        let mut values = vec![vec![0.0; p.len()]; x.len()];
        let mut diag = vec![vec![0.0; p.len()]; x.len()];
        for (&(i, j), r) in entries.iter().zip(out) {
            let (v, d) = r?;
            if !v.is_finite() {
                return Err(Error::invalid("H0", format!("non-finite value at x = {}, p = {}", x[i], p[j])));
            }
            values[i][j] = v;
            diag[i][j] = d;
        }
        Ok(HamiltonianTable {
            regime,
            x: x.to_vec(),
            p: p.to_vec(),
            values,
            diag,
        })
    }

    /// Tabulates an x-independent callable on a single dummy `x = 0` row.
    pub fn from_fn(regime: Regime, p: &[f64], f: impl Fn(f64) -> f64) -> Self {
        HamiltonianTable {
            regime,
            x: vec![0.0],
            p: p.to_vec(),
            values: vec![p.iter().map(|&q| f(q)).collect()],
            diag: vec![vec![0.0; p.len()]],
        }
    }

    /// Most negative second difference in `p` over all rows (0 when convex).
    pub fn convexity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for row in &self.values {
            for j in 1..self.p.len().saturating_sub(1) {
                let (a, b, c) = (self.p[j - 1], self.p[j], self.p[j + 1]);
                let t = (b - a) / (c - a);
                let chord = (1.0 - t) * row[j - 1] + t * row[j + 1];
                worst = worst.max(row[j] - chord);
            }
        }
        worst
    }

    /// Bilinear interpolation; `p` outside the table is a range error, `x`
    /// is clamped (single-row tables are x-independent).
    pub fn eval(&self, x: f64, p: f64) -> Result<f64> {
        let (plo, phi) = (self.p[0], self.p[self.p.len() - 1]);
        if p < plo - 1e-12 || p > phi + 1e-12 {
            return Err(Error::Range { needed: p, lo: plo, hi: phi });
        }
        let row = |i: usize| crate::quad::interp_linear(&self.p, &self.values[i], p);
        if self.x.len() == 1 {
            return Ok(row(0));
        }
        let xc = x.clamp(self.x[0], self.x[self.x.len() - 1]);
        let i = self.x.partition_point(|&v| v <= xc).saturating_sub(1).min(self.x.len() - 2);
        let t = (xc - self.x[i]) / (self.x[i + 1] - self.x[i]);
        Ok((1.0 - t) * row(i) + t * row(i + 1))
    }

    /// `max |dH/dp|` from table differences.
    pub fn max_slope(&self) -> f64 {
        let mut m: f64 = 0.0;
        for row in &self.values {
            for j in 0..self.p.len().saturating_sub(1) {
                m = m.max(((row[j + 1] - row[j]) / (self.p[j + 1] - self.p[j])).abs());
            }
        }
        m
    }

    /// `regime,x,p,H0,diag` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "regime,x,p,H0,diag")?;
        for (i, x) in self.x.iter().enumerate() {
            for (j, p) in self.p.iter().enumerate() {
                writeln!(w, "{},{},{},{},{}", self.regime, x, p, self.values[i][j], self.diag[i][j])?;
            }
        }
        Ok(())
    }
}

/// True when the model has Brownian correlation or fast jumps, neither of
/// which enters the supercritical Hamiltonian.
pub fn supercritical_drops_coupling(model: &SlowFastModel) -> bool {
    model.coeffs.rho() != 0.0 || !matches!(model.coeffs.k2, JumpKernel::Zero)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CoefficientSet, LevyMeasureModel};
    use std::f64::consts::{E, FRAC_PI_2, TAU};

    fn ou_quadratic(rho: f64) -> SlowFastModel {
        SlowFastModel::diffusion(
            CoefficientSet::zero()
                .with_sigma1(|_, y| (1.0 + y * y).sqrt())
                .with_b2(|_, y| -y)
                .with_sigma2(|_, _| 1.0)
                .with_rho(rho)
                .unwrap(),
        )
    }

    #[test]
    fn generator_is_conservative_and_metzler() {
        let c = CoefficientSet::zero()
            .with_sigma1(|_, _| 1.0)
            .with_b2(|_, y| -y.sin())
            .with_sigma2(|_, y| 1.0 + 0.3 * y.cos())
            .with_k2(JumpKernel::linear(|_, y| 0.5 + 0.2 * y.sin()))
            .with_rho(0.4)
            .unwrap()
            .with_period(TAU)
            .unwrap();
        let m = SlowFastModel::new(c, LevyMeasureModel::Null, LevyMeasureModel::symmetric_stable(1.5, 0.05, 2.0).unwrap());
        let g = DiscreteGenerator::tilted(&m, 0.0, 1.3, FastGrid::periodic(TAU, 100).unwrap()).unwrap();
        assert!(g.row_sum_defect() < 1e-10);
        assert!(g.min_off_diagonal() >= 0.0);
    }

    #[test]
    fn constant_potential_gives_exact_eigenvalue() {
        let c = CoefficientSet::zero()
            .with_sigma1(|_, _| 1.5)
            .with_b2(|_, y| -y)
            .with_sigma2(|_, _| 1.0);
        let m = SlowFastModel::diffusion(c);
        let grid = FastGrid::line(-6.0, 6.0, 150).unwrap();
        let r = h0_critical_eigen(&m, 0.0, 0.8, &grid, &EigenOptions::default()).unwrap();
        let v = 1.5f64.powi(2) * 0.64;
        assert!((r.eigenvalue - v).abs() < 1e-10);
        assert!(r.eigenfunction.iter().all(|&e| (e - 1.0).abs() < 1e-8));
    }

    #[test]
    fn shift_covariance() {
        let m = ou_quadratic(0.0);
        let grid = FastGrid::line(-6.0, 6.0, 120).unwrap();
        let gen = DiscreteGenerator::tilted(&m, 0.0, 0.7, grid.clone()).unwrap();
        let v = potential_on_grid(&m, 0.0, 0.7, &grid).unwrap();
        let opts = EigenOptions { tol: 1e-13, ..Default::default() };
        let a = principal_eigen(&gen, &v, &opts).unwrap();
        let shifted: Vec<f64> = v.iter().map(|x| x + 2.5).collect();
        let b = principal_eigen(&gen, &shifted, &opts).unwrap();
        assert!((b.eigenvalue - a.eigenvalue - 2.5).abs() < 1e-10);
        for (x, y) in a.eigenfunction.iter().zip(&b.eigenfunction) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn power_iteration_matches_dense_solver() {
        let m = ou_quadratic(0.0);
        let grid = FastGrid::line(-8.0, 8.0, 200).unwrap();
        let gen = DiscreteGenerator::tilted(&m, 0.0, 1.0, grid.clone()).unwrap();
        let v = potential_on_grid(&m, 0.0, 1.0, &grid).unwrap();
        let r = principal_eigen(&gen, &v, &EigenOptions::default()).unwrap();
        let dense = dense_principal_eigenvalue(&gen, &v);
        assert!((r.eigenvalue - dense).abs() < 1e-8 * dense.abs().max(1.0), "{} vs {}", r.eigenvalue, dense);
        assert!(r.eigenvalue >= 2.0);
    }

    #[test]
    fn dv_bound_with_stationary_candidate_is_the_average() {
        let m = ou_quadratic(0.0);
        let grid = FastGrid::line(-6.0, 6.0, 80).unwrap();
        let gen = DiscreteGenerator::tilted(&m, 0.0, 0.5, grid.clone()).unwrap();
        let v = potential_on_grid(&m, 0.0, 0.5, &grid).unwrap();
        let mu = gen.stationary(&EigenOptions { tol: 1e-14, max_iter: 1_000_000 }).unwrap();
        let b = dv_bound(&gen, &v, &[mu.clone()], &[]).unwrap();
        let avg: f64 = mu.iter().zip(&v).map(|(a, b)| a * b).sum();
        assert!((b.value - avg).abs() < 1e-9, "{} vs {}", b.value, avg);
        let lam = principal_eigen(&gen, &v, &EigenOptions::default()).unwrap().eigenvalue;
        assert!(b.value <= lam + 1e-8);
    }

    #[test]
    fn dv_bound_with_perron_measure_reaches_eigenvalue() {
        // the optimal mu is proportional to left * right Perron vectors
        let m = ou_quadratic(0.3);
        let grid = FastGrid::line(-5.0, 5.0, 60).unwrap();
        let gen = DiscreteGenerator::tilted(&m, 0.0, 0.4, grid.clone()).unwrap();
        let v = potential_on_grid(&m, 0.0, 0.4, &grid).unwrap();
        let mut dense = gen.to_dense();
        for i in 0..v.len() {
            dense[(i, i)] += v[i];
        }
        let right = principal_eigen(&gen, &v, &EigenOptions { tol: 1e-12, ..Default::default() }).unwrap();
        // left vector from the transpose by plain power iteration
        let t = dense.transpose();
        let shift = 1.0 + (0..v.len()).map(|i| t[(i, i)].abs()).fold(0.0, f64::max);
        let mut l = nalgebra::DVector::from_element(v.len(), 1.0);
        for _ in 0..200_000 {
            l = &t * &l + &l * shift;
            l /= l.max();
        }
        let mut mu: Vec<f64> = (0..v.len()).map(|i| l[i] * right.eigenfunction[i]).collect();
        let s: f64 = mu.iter().sum();
        mu.iter_mut().for_each(|x| *x /= s);
        let b = dv_bound(&gen, &v, &[mu], &[]).unwrap();
        assert!((b.value - right.eigenvalue).abs() < 1e-7, "{} vs {}", b.value, right.eigenvalue);
    }

    #[test]
    fn dv_rejects_non_positive_test_functions() {
        let m = ou_quadratic(0.0);
        let grid = FastGrid::line(-3.0, 3.0, 20).unwrap();
        let mu = vec![1.0 / 20.0; 20];
        let bad = |y: f64| y;
        assert!(h0_critical_dv_lower_bound(&m, 0.0, 1.0, &grid, &[mu], &[&bad]).is_err());
    }

    #[test]
    fn supercritical_gaussian_second_moment() {
        let r = h0_supercritical(&ou_quadratic(0.0), 0.0, 1.0, &YDomain::Line { lo: -8.0, hi: 8.0, points: 2001 }).unwrap();
        assert!((r.value - 2.0).abs() < 1e-8, "{}", r.value);
        assert_eq!(h0_supercritical(&ou_quadratic(0.0), 0.0, 0.0, &YDomain::default()).unwrap().value, 0.0);
    }

    #[test]
    fn subcritical_sine_maximum() {
        let c = CoefficientSet::zero()
            .with_sigma1(|_, y| (1.0 + y.sin()).sqrt())
            .with_sigma2(|_, _| 1.0)
            .with_period(TAU)
            .unwrap();
        let r = h0_subcritical(&SlowFastModel::diffusion(c), 0.0, 1.0, 0.0, TAU, 101).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12);
        assert!((r.argmax - FRAC_PI_2).abs() < 1e-5);
    }

    #[test]
    fn subcritical_ties_go_left_and_match_dense_scan() {
        let c = CoefficientSet::zero().with_sigma1(|_, y: f64| (1.0 + y * y * (-y * y).exp()).sqrt());
        let m = SlowFastModel::diffusion(c);
        let r = h0_subcritical(&m, 0.0, 1.0, -4.0, 4.0, 2001).unwrap();
        let brute = (0..1_000_000)
            .map(|i| {
                let y = -4.0 + 8.0 * i as f64 / 999_999.0;
                1.0 + y * y * (-y * y).exp()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((r.value - brute).abs() < 1e-8);
        assert!((r.value - (1.0 + 1.0 / E)).abs() < 1e-12);
        assert!(r.argmax < 0.0, "tie should resolve to the left maximiser");
    }

    #[test]
    fn corrector_slope_examples() {
        let base = |rho: f64| {
            SlowFastModel::diffusion(
                CoefficientSet::zero()
                    .with_sigma1(|_, _| 1.0)
                    .with_sigma2(|_, _| 1.0)
                    .with_rho(rho)
                    .unwrap(),
            )
        };
        // V = p^2 = 1 everywhere
        assert!((subcritical_corrector_slope(&base(0.0), 0.0, 1.0, 2.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((subcritical_corrector_slope(&base(0.5), 0.0, 1.0, 1.75, 0.0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(subcritical_corrector_slope(&base(0.0), 0.0, 1.0, 1.0, 0.0).unwrap(), 0.0);
        assert!(matches!(
            subcritical_corrector_slope(&base(0.0), 0.0, 1.0, 0.5, 0.0),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn prelimit_generator_examples() {
        let c = CoefficientSet::zero()
            .with_b1(|_, _| 0.7)
            .with_sigma1(|_, _| 1.2)
            .with_b2(|_, _| -0.3)
            .with_sigma2(|_, _| 0.9);
        let m = SlowFastModel::diffusion(c);
        let r = RegimeParams::new(0.05, 2.0).unwrap();
        let k = Affine { slope: 0.0, offset: 3.0 };
        assert_eq!(eval_prelimit_h(&m, &r, &k, 0.2, 0.1).unwrap(), 0.0);
        let a = Affine { slope: 1.3, offset: 0.0 };
        let v = eval_prelimit_h(&m, &r, &a, 0.2, 0.1).unwrap();
        assert!((v - (0.05 * 0.7 * 1.3 + 1.44 * 1.69)).abs() < 1e-12);

        let j = SlowFastModel::new(
            CoefficientSet::zero().with_sigma1(|_, _| 1.0).with_k1(JumpKernel::linear(|_, _| 1.0)),
            LevyMeasureModel::atomic(&[(1.0, 1.0)]).unwrap(),
            LevyMeasureModel::Null,
        );
        let r = RegimeParams::new(0.01, 2.0).unwrap();
        let a = 0.8;
        let v = eval_prelimit_h(&j, &r, &Affine { slope: a, offset: 0.0 }, 0.0, 0.0).unwrap();
        // linear data: the jump term is exact, e^{a k} - 1 - a k
        assert!((v - (a * a + (a.exp() - 1.0 - a))).abs() < 1e-6);
    }

    #[test]
    fn regime_sandwich_on_ou_family() {
        let s = H0Settings {
            eigen_points: 160,
            scan_points: 1601,
            window: Some((-8.0, 8.0)),
            ..Default::default()
        };
        let m = ou_quadratic(0.0);
        for p in [-1.0, -0.3, 0.0, 0.2, 0.5, 1.0] {
            let sup = h0(&m, Regime::Supercritical, 0.0, p, &s).unwrap().0;
            let cri = h0(&m, Regime::Critical, 0.0, p, &s).unwrap().0;
            let sub = h0(&m, Regime::Subcritical, 0.0, p, &s).unwrap().0;
            assert!(sup <= cri + 1e-9 && cri <= sub + 1e-9, "p = {p}: {sup} {cri} {sub}");
        }
    }

    #[test]
    fn table_is_convex_and_vanishes_at_zero_momentum() {
        let p: Vec<f64> = (-4..=4).map(|i| 0.25 * i as f64).collect();
        let s = H0Settings {
            eigen_points: 100,
            scan_points: 801,
            window: Some((-6.0, 6.0)),
            ..Default::default()
        };
        for regime in [Regime::Supercritical, Regime::Critical, Regime::Subcritical] {
            let t = HamiltonianTable::build(&ou_quadratic(0.0), regime, &[0.0, 1.0], &p, &s).unwrap();
            assert!(t.convexity_defect() < 1e-9, "{regime}");
            for row in &t.values {
                assert!(row[4].abs() < 1e-10);
            }
            let mut buf = Vec::new();
            t.write_csv(&mut buf).unwrap();
            assert!(String::from_utf8(buf).unwrap().starts_with("regime,x,p,H0,diag\n"));
        }
    }
}
