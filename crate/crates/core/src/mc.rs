//! Monte Carlo estimates of `U^eps = eps ln E[exp(h(X_t)/eps)]` and of
//! empirical tail rates.

use crate::error::{Error, Result};
use crate::hjb::TerminalFn;
use crate::model::{RegimeParams, SlowFastModel};
use crate::simulate::{terminal_map, TimeGrid};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Path count, seed and time-step cap shared by the estimators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McSettings {
    pub paths: usize,
    pub seed: u64,
    /// Upper bound on the Euler step; the fast time scale caps it further.
    pub max_dt: f64,
}

impl McSettings {
    /// Grid for horizon `t` under `regime`: at most `max_dt` and at most
    /// the fast time scale.
    pub fn grid(&self, regime: &RegimeParams, t: f64) -> Result<TimeGrid> {
        TimeGrid::covering(t, self.max_dt.min(regime.delta()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogFunctionalEstimate {
    pub epsilon: f64,
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub estimate: f64,
    /// Delta-method standard error of `estimate`.
    pub std_error: f64,
    /// Plain average of `h(X_t)`; never above `estimate`.
    pub mean_h: f64,
    pub paths: usize,
    /// Paths that finished without blowing up.
    pub survivors: usize,
    pub seed: u64,
}

/// `eps (logsumexp(h/eps) - ln N)` with a delta-method standard error
/// computed from weights centred at the largest log weight.
pub fn log_mean_exp(values: &[f64], eps: f64) -> Result<(f64, f64)> {
    let k = values.len();
    if k == 0 {
        return Err(Error::Estimation("no surviving paths".into()));
    }
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = values.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = w.iter().sum();
    let mean = s / k as f64;
    let est = eps * (m + mean.ln());
    let se = if k > 1 {
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
        eps * (var / k as f64).sqrt() / mean
    } else {
        f64::INFINITY
    };
    Ok((est, se))
}

/// Estimates `U^eps(t, x, y)` from `settings.paths` simulated paths.
pub fn estimate_u_eps(
    model: &SlowFastModel,
    regime: &RegimeParams,
    h: &TerminalFn,
    t: f64,
    x: f64,
    y: f64,
    settings: &McSettings,
) -> Result<LogFunctionalEstimate> {
    h.validate()?;
    if settings.paths < 100 {
        return Err(Error::invalid("paths", format!("{} < 100", settings.paths)));
    }
    let eps = regime.epsilon();
    let grid = settings.grid(regime, t)?;
    let hx = terminal_map(model, regime, &grid, x, y, settings.paths, settings.seed, |r| match r {
        Ok((xt, _)) => h.eval(xt),
        Err(_) => f64::NAN,
    })?;
    let ok: Vec<f64> = hx.iter().copied().filter(|v| v.is_finite()).collect();
    if ok.is_empty() {
        return Err(Error::Estimation(format!("all {} paths failed", settings.paths)));
    }
    let scaled: Vec<f64> = ok.iter().map(|v| v / eps).collect();
    let (estimate, std_error) = log_mean_exp(&scaled, eps)?;
    Ok(LogFunctionalEstimate {
        epsilon: eps,
        t,
        x,
        y,
        estimate,
        std_error,
        mean_h: ok.iter().sum::<f64>() / ok.len() as f64,
        paths: settings.paths,
        survivors: ok.len(),
        seed: settings.seed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub epsilon: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub reference: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub estimates: Vec<LogFunctionalEstimate>,
}

impl ConvergenceTable {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "epsilon,estimate,std_error,reference,gap")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{},{}", r.epsilon, r.estimate, r.std_error, r.reference, r.gap)?;
        }
        Ok(())
    }
}

fn check_ladder(eps: &[f64]) -> Result<()> {
    if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0)) || eps.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::invalid("epsilon", "ladder must be positive and strictly decreasing"));
    }
    Ok(())
}

/// `U^eps` along a decreasing `eps` ladder against the limit value
/// `reference = U0(t, x)`. Every rung reuses the same seed.
#[allow(clippy::too_many_arguments)]
pub fn convergence_study(
    model: &SlowFastModel,
    alpha: f64,
    ladder: &[f64],
    h: &TerminalFn,
    t: f64,
    x: f64,
    y: f64,
    reference: f64,
    settings: &McSettings,
) -> Result<ConvergenceTable> {
    check_ladder(ladder)?;
    let mut rows = Vec::with_capacity(ladder.len());
    let mut estimates = Vec::with_capacity(ladder.len());
    for &eps in ladder {
        let regime = RegimeParams::new(eps, alpha)?;
        let e = estimate_u_eps(model, &regime, h, t, x, y, settings)?;
        rows.push(ConvergenceRow {
            epsilon: eps,
            estimate: e.estimate,
            std_error: e.std_error,
            reference,
            gap: (e.estimate - reference).abs(),
        });
        estimates.push(e);
    }
    Ok(ConvergenceTable { rows, estimates })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailRateRow {
    pub epsilon: f64,
    pub hits: u64,
    pub survivors: u64,
    pub frequency: f64,
    /// `-eps ln(frequency)`; `None` when no path hit the set.
    pub rate: Option<f64>,
    /// One-sided 95% Clopper-Pearson upper bound on the probability.
    pub p_upper: f64,
    /// `-eps ln(p_upper)`, a lower confidence bound on the rate.
    pub rate_lower_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailRateTable {
    pub set: (f64, f64),
    pub t: f64,
    pub x0: f64,
    pub y0: f64,
    pub rows: Vec<TailRateRow>,
    /// Limit rate over the set, when supplied.
    pub reference: Option<f64>,
}

impl TailRateTable {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "epsilon,hits,paths,frequency,rate,p_upper,rate_lower_bound,reference")?;
        let reference = self.reference.map_or(String::new(), |r| r.to_string());
        for r in &self.rows {
            let rate = r.rate.map_or("inf".to_string(), |v| v.to_string());
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.epsilon, r.hits, r.survivors, r.frequency, rate, r.p_upper, r.rate_lower_bound, reference
            )?;
        }
        Ok(())
    }
}

/// One-sided upper confidence bound at level `1 - alpha_level` for a
/// binomial proportion with `hits` successes in `n` trials.
pub fn clopper_pearson_upper(hits: u64, n: u64, alpha_level: f64) -> f64 {
    if hits >= n {
        return 1.0;
    }
    if hits == 0 {
        return 1.0 - alpha_level.powf(1.0 / n as f64);
    }
    // P(Bin(n, p) <= hits) = alpha_level, solved by bisection in p
    let cdf = |p: f64| -> f64 {
        let lp = p.ln();
        let lq = (-p).ln_1p();
        let mut term = n as f64 * lq;
        let mut acc = term.exp();
        for k in 0..hits {
            term += ((n - k) as f64).ln() - ((k + 1) as f64).ln() + lp - lq;
            acc += term.exp();
        }
        acc
    };
    let (mut lo, mut hi) = (hits as f64 / n as f64, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) > alpha_level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Empirical `-eps ln P(X_t in [a, b])` along an `eps` ladder.
#[allow(clippy::too_many_arguments)]
pub fn tail_probability_rate(
    model: &SlowFastModel,
    alpha: f64,
    t: f64,
    x0: f64,
    y0: f64,
    set: (f64, f64),
    ladder: &[f64],
    settings: &McSettings,
) -> Result<TailRateTable> {
    check_ladder(ladder)?;
    if !(set.0 <= set.1) {
        return Err(Error::invalid("set", "need a <= b"));
    }
    let mut rows = Vec::with_capacity(ladder.len());
    for &eps in ladder {
        let regime = RegimeParams::new(eps, alpha)?;
        let grid = settings.grid(&regime, t)?;
        let outcome = terminal_map(model, &regime, &grid, x0, y0, settings.paths, settings.seed, |r| match r {
            Ok((x, _)) => u8::from(x >= set.0 && x <= set.1),
            Err(_) => 2,
        })?;
        let hits = outcome.iter().filter(|&&o| o == 1).count() as u64;
        let survivors = outcome.iter().filter(|&&o| o != 2).count() as u64;
        if survivors == 0 {
            return Err(Error::Estimation(format!("all paths failed at eps = {eps}")));
        }
        let frequency = hits as f64 / survivors as f64;
        let p_upper = clopper_pearson_upper(hits, survivors, 0.05);
        rows.push(TailRateRow {
            epsilon: eps,
            hits,
            survivors,
            frequency,
            rate: (hits > 0).then(|| -eps * frequency.ln()),
            p_upper,
            rate_lower_bound: -eps * p_upper.ln(),
        });
    }
    Ok(TailRateTable {
        set,
        t,
        x0,
        y0,
        rows,
        reference: None,
    })
}
