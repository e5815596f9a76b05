//! Configuration-driven experiment runner behind the `slowfast` binary.
//!
//! A config is a JSON document:
//!
//! ```json
//! {
//!   "model": { "preset": "ou-averaging", "params": { "s0": 1, "s2": 1, "theta": 1, "sigma2": 1, "rho": 0 } },
//!   "regime": { "alpha": [3, 2, 1.5], "epsilon": [0.1] },
//!   "experiment": { "kind": "hamiltonian-table", "x": { "lo": 0, "hi": 0, "points": 1 },
//!                   "p": { "lo": -1, "hi": 1, "points": 9 } },
//!   "seed": 1,
//!   "output": "out/ou-table"
//! }
//! ```
//!
//! Every run writes its CSV files plus `manifest.json` (resolved config,
//! crate version, condition report, checks and SHA-256 of each output).
//! Nothing in the outputs depends on wall-clock time or thread count.

use crate::error::{Error, Result};
use crate::fastlayer::{invariant_measure, stationarity_battery, InvariantMeasure, YDomain};
use crate::hamiltonian::{supercritical_drops_coupling, H0Settings, HamiltonianTable};
use crate::hjb::{
    legendre_transform, padded_grid, rate_from_linear_family, solve_hj, FnHamiltonian, HamiltonianSource,
    RateFunction, SolveOptions, TerminalFn,
};
use crate::mc::{convergence_study, tail_probability_rate, McSettings};
use crate::model::{classify_regime, presets, validate_conditions, ConditionReport, Regime, SlowFastModel};
use crate::quad::{interp_linear, linspace};
use crate::simulate::{occupation_histogram, simulate_virtual_fast, TimeGrid};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub preset: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

/// One value or a list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn values(&self) -> Vec<f64> {
        match self {
            OneOrMany::One(v) => vec![*v],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeSpec {
    pub alpha: OneOrMany,
    /// Decreasing ladder used by the Monte Carlo kinds.
    #[serde(default)]
    pub epsilon: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            vec![self.lo]
        } else {
            linspace(self.lo, self.hi, self.points)
        }
    }

    fn check(&self, field: &str, min_points: usize) -> Result<()> {
        let ok = self.lo.is_finite()
            && self.hi.is_finite()
            && self.points >= min_points
            && (self.points == 1 || self.lo < self.hi);
        if ok {
            Ok(())
        } else {
            Err(Error::config(
                field,
                format!("need finite lo < hi and at least {min_points} points"),
            ))
        }
    }
}

/// Where a Hamiltonian comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "from", rename_all = "kebab-case", deny_unknown_fields)]
pub enum HamiltonianSpec {
    /// Tabulated `H0` of the configured model in the regime of the first `alpha`.
    Model {
        p: GridSpec,
        /// Slow grid of the table; a single point makes it x-independent.
        #[serde(default = "single_x")]
        x: GridSpec,
        #[serde(default)]
        settings: H0Settings,
    },
    /// `coefficient * |p|^exponent`, sampled on `p` when samples are needed.
    Power { coefficient: f64, exponent: f64, p: GridSpec },
}

fn single_x() -> GridSpec {
    GridSpec { lo: 0.0, hi: 0.0, points: 1 }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "from", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ReferenceSpec {
    Value { value: f64 },
    /// Solve the limit Cauchy problem from `h` and read `U0(t, x)`.
    Hj {
        hamiltonian: HamiltonianSpec,
        dx: f64,
        #[serde(default)]
        solve: SolveOptions,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ExperimentKind {
    HamiltonianTable {
        x: GridSpec,
        p: GridSpec,
        #[serde(default)]
        settings: H0Settings,
    },
    HjSolve {
        hamiltonian: HamiltonianSpec,
        h: TerminalFn,
        /// Reported window; the solve runs on a padded grid.
        window: [f64; 2],
        dx: f64,
        t_end: f64,
        #[serde(default)]
        solve: SolveOptions,
    },
    Rate {
        hamiltonian: HamiltonianSpec,
        q: GridSpec,
        /// `(x, x0, t)` triples.
        points: Vec<[f64; 3]>,
        /// Slopes for the linear-family cross-check; defaults to the `p` grid.
        #[serde(default)]
        slopes: Option<GridSpec>,
    },
    McConvergence {
        h: TerminalFn,
        t: f64,
        x: f64,
        /// Several starting points show how the estimate flattens in y.
        y: OneOrMany,
        paths: usize,
        max_dt: f64,
        reference: ReferenceSpec,
    },
    TailRate {
        t: f64,
        x0: f64,
        y0: f64,
        set: [f64; 2],
        paths: usize,
        max_dt: f64,
        /// Limit Hamiltonian used for the reference rate (x-independent).
        #[serde(default)]
        reference_hamiltonian: Option<HamiltonianSpec>,
        #[serde(default)]
        q: Option<GridSpec>,
    },
    FastLayer {
        x: Vec<f64>,
        #[serde(default)]
        y_domain: YDomain,
        /// Compare π with the time average of a simulated path (jumps included).
        #[serde(default)]
        occupation: Option<OccupationSpec>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OccupationSpec {
    pub horizon: f64,
    pub dt: f64,
    #[serde(default = "default_bins")]
    pub bins: usize,
}

fn default_bins() -> usize {
    40
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::HamiltonianTable { .. } => "hamiltonian-table",
            ExperimentKind::HjSolve { .. } => "hj-solve",
            ExperimentKind::Rate { .. } => "rate",
            ExperimentKind::McConvergence { .. } => "mc-convergence",
            ExperimentKind::TailRate { .. } => "tail-rate",
            ExperimentKind::FastLayer { .. } => "fast-layer",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub regime: RegimeSpec,
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub output: PathBuf,
}

const KINDS: &[&str] = &["hamiltonian-table", "hj-solve", "rate", "mc-convergence", "tail-rate", "fast-layer"];

/// Parses a config document. Parse failures become config errors that quote
/// the offending field where the parser names one.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let raw: Value = serde_json::from_str(text).map_err(|e| Error::config("<document>", e.to_string()))?;
    if let Some(kind) = raw.pointer("/experiment/kind").and_then(Value::as_str) {
        if !KINDS.contains(&kind) {
            return Err(Error::config(
                "experiment.kind",
                format!("unknown experiment kind `{kind}` (expected one of {})", KINDS.join(", ")),
            ));
        }
    }
    serde_json::from_value(raw).map_err(|e| {
        let msg = e.to_string();
        let field = msg
            .split('`')
            .nth(1)
            .filter(|_| msg.starts_with("missing field") || msg.starts_with("unknown field"))
            .unwrap_or("<document>")
            .to_string();
        Error::config(field, msg)
    })
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::config("<path>", format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

/// A config with its model built and all grids checked.
pub struct Validated {
    pub config: ExperimentConfig,
    pub model: SlowFastModel,
    pub regimes: Vec<(f64, Regime)>,
    pub conditions: ConditionReport,
    pub notices: Vec<String>,
}

fn probe_pairs() -> Vec<((f64, f64), (f64, f64))> {
    let pts = [-2.0, -1.0, 0.0, 0.5, 1.0, 2.0];
    let mut out = Vec::new();
    for &x in &pts {
        for &y in &pts {
            out.push(((x, y), (x + 0.25, y)));
            out.push(((x, y), (x, y + 0.25)));
        }
    }
    out
}

fn check_positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("{v} must be positive")))
    }
}

fn check_hamiltonian(field: &str, h: &HamiltonianSpec) -> Result<()> {
    match h {
        HamiltonianSpec::Model { p, x, .. } => {
            p.check(&format!("{field}.p"), 3)?;
            x.check(&format!("{field}.x"), 1)
        }
        HamiltonianSpec::Power { coefficient, exponent, p } => {
            if !(*coefficient >= 0.0) || !(*exponent >= 1.0) {
                return Err(Error::config(field, "power Hamiltonian needs coefficient >= 0 and exponent >= 1"));
            }
            p.check(&format!("{field}.p"), 3)
        }
    }
}

/// Builds the model, classifies each `alpha` and checks every grid.
pub fn validate(config: ExperimentConfig) -> Result<Validated> {
    let model = presets::build(&config.model.preset, &config.model.params)?;
    let alphas = config.regime.alpha.values();
    if alphas.is_empty() {
        return Err(Error::config("regime.alpha", "at least one alpha is required"));
    }
    let mut regimes = Vec::new();
    for &a in &alphas {
        let r = classify_regime(a).map_err(|e| Error::config("regime.alpha", e.to_string()))?;
        regimes.push((a, r));
    }
    let ladder = &config.regime.epsilon;
    if ladder.iter().any(|e| !(*e > 0.0)) || ladder.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::config("regime.epsilon", "ladder must be positive and strictly decreasing"));
    }
    match &config.experiment {
        ExperimentKind::HamiltonianTable { x, p, .. } => {
            x.check("experiment.x", 1)?;
            p.check("experiment.p", 3)?;
        }
        ExperimentKind::HjSolve { hamiltonian, h, window, dx, t_end, .. } => {
            check_hamiltonian("experiment.hamiltonian", hamiltonian)?;
            h.validate().map_err(|e| Error::config("experiment.h", e.to_string()))?;
            if !(window[0] < window[1]) {
                return Err(Error::config("experiment.window", "need lo < hi"));
            }
            check_positive("experiment.dx", *dx)?;
            check_positive("experiment.t_end", *t_end)?;
        }
        ExperimentKind::Rate { hamiltonian, q, points, slopes } => {
            check_hamiltonian("experiment.hamiltonian", hamiltonian)?;
            q.check("experiment.q", 2)?;
            if points.is_empty() {
                return Err(Error::config("experiment.points", "need at least one (x, x0, t) triple"));
            }
            if let Some(s) = slopes {
                s.check("experiment.slopes", 3)?;
            }
        }
        ExperimentKind::McConvergence { h, t, paths, max_dt, reference, .. } => {
            h.validate().map_err(|e| Error::config("experiment.h", e.to_string()))?;
            check_positive("experiment.t", *t)?;
            check_positive("experiment.max_dt", *max_dt)?;
            if *paths < 100 {
                return Err(Error::config("experiment.paths", "need at least 100 paths"));
            }
            if ladder.is_empty() {
                return Err(Error::config("regime.epsilon", "Monte Carlo kinds need an epsilon ladder"));
            }
            if let ReferenceSpec::Hj { hamiltonian, dx, .. } = reference {
                check_hamiltonian("experiment.reference.hamiltonian", hamiltonian)?;
                check_positive("experiment.reference.dx", *dx)?;
            }
        }
        ExperimentKind::TailRate { t, set, paths, max_dt, reference_hamiltonian, q, .. } => {
            check_positive("experiment.t", *t)?;
            check_positive("experiment.max_dt", *max_dt)?;
            if !(set[0] <= set[1]) {
                return Err(Error::config("experiment.set", "need a <= b"));
            }
            if *paths < 1 {
                return Err(Error::config("experiment.paths", "need at least one path"));
            }
            if ladder.is_empty() {
                return Err(Error::config("regime.epsilon", "Monte Carlo kinds need an epsilon ladder"));
            }
            if let Some(hs) = reference_hamiltonian {
                check_hamiltonian("experiment.reference_hamiltonian", hs)?;
                q.ok_or_else(|| Error::config("experiment.q", "required with reference_hamiltonian"))?
                    .check("experiment.q", 2)?;
            }
        }
        ExperimentKind::FastLayer { x, occupation, .. } => {
            if x.is_empty() {
                return Err(Error::config("experiment.x", "need at least one slow point"));
            }
            if let Some(o) = occupation {
                check_positive("experiment.occupation.horizon", o.horizon)?;
                check_positive("experiment.occupation.dt", o.dt)?;
                if o.bins < 2 {
                    return Err(Error::config("experiment.occupation.bins", "need at least two bins"));
                }
            }
        }
    }
    let conditions = validate_conditions(&model.coeffs, &model.nu1, &model.nu2, &probe_pairs()).map_err(|e| e.in_module("model"))?;
    let mut notices = Vec::new();
    if regimes.iter().any(|(_, r)| *r == Regime::Supercritical) && supercritical_drops_coupling(&model) {
        notices.push("supercritical H0 averages V against the continuous fast proxy; rho and the fast jump kernel do not enter it".to_string());
    }
    if !conditions.violations.is_empty() {
        notices.push(format!("{} probe points gave non-finite coefficients", conditions.violations.len()));
    }
    Ok(Validated {
        config,
        model,
        regimes,
        conditions,
        notices,
    })
}

/// Hamiltonian ready for the solvers.
enum BuiltHamiltonian {
    Table(HamiltonianTable),
    Power { c: f64, k: f64, p: Vec<f64> },
}

impl BuiltHamiltonian {
    fn build(spec: &HamiltonianSpec, v: &Validated) -> Result<Self> {
        match spec {
            HamiltonianSpec::Model { p, x, settings } => {
                let regime = v.regimes[0].1;
                let t = HamiltonianTable::build(&v.model, regime, &x.values(), &p.values(), settings)
                    .map_err(|e| e.in_module("hamiltonian"))?;
                Ok(BuiltHamiltonian::Table(t))
            }
            HamiltonianSpec::Power { coefficient, exponent, p } => Ok(BuiltHamiltonian::Power {
                c: *coefficient,
                k: *exponent,
                p: p.values(),
            }),
        }
    }

    fn source(&self) -> Box<dyn HamiltonianSource + '_> {
        match self {
            BuiltHamiltonian::Table(t) => Box::new(t.clone()),
            BuiltHamiltonian::Power { c, k, .. } => {
                let (c, k) = (*c, *k);
                Box::new(FnHamiltonian(move |p: f64| c * p.abs().powf(k)))
            }
        }
    }

    /// `(p, H(p))` samples on the first slow point.
    fn samples(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            BuiltHamiltonian::Table(t) => (t.p.clone(), t.values[0].clone()),
            BuiltHamiltonian::Power { c, k, p } => (p.clone(), p.iter().map(|q| c * q.abs().powf(*k)).collect()),
        }
    }

    fn eval_p(&self, p: f64) -> f64 {
        match self {
            BuiltHamiltonian::Table(t) => interp_linear(&t.p, &t.values[0], p),
            BuiltHamiltonian::Power { c, k, .. } => c * p.abs().powf(*k),
        }
    }
}

/// Solves the limit problem from `h` on a padded grid around `window`.
fn solve_padded(
    ham: &BuiltHamiltonian,
    h: &TerminalFn,
    window: (f64, f64),
    dx: f64,
    t_end: f64,
    opts: &SolveOptions,
) -> Result<(crate::hjb::SolutionField, std::ops::Range<usize>)> {
    let src = ham.source();
    let (grad_lo, grad_hi) = gradient_range(h, window, t_end);
    let speed = opts.speed.unwrap_or_else(|| src.max_slope(grad_lo, grad_hi));
    let (x, inner) = padded_grid(window.0, window.1, dx, t_end, speed.max(1e-12), opts.cfl)?;
    let field = solve_hj(src.as_ref(), &|y| h.eval(y), &x, t_end, opts).map_err(|e| e.in_module("hjb"))?;
    Ok((field, inner))
}

fn gradient_range(h: &TerminalFn, window: (f64, f64), t_end: f64) -> (f64, f64) {
    let span = (window.1 - window.0).max(1.0) + 10.0 * t_end;
    let xs = linspace(window.0 - span, window.1 + span, 4001);
    xs.iter().map(|&x| h.derivs(x).1).fold((0.0, 0.0), |(a, b), g| (a.min(g), b.max(g)))
}

/// Files written by a run, in write order.
struct Outputs {
    dir: PathBuf,
    files: Vec<(String, String, usize)>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        fs::write(self.dir.join(name), &buf)?;
        let hash = format!("{:x}", Sha256::digest(&buf));
        self.files.push((name.to_string(), hash, buf.len()));
        Ok(())
    }
}

/// What a run produced.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub files: Vec<String>,
    pub checks: BTreeMap<String, Value>,
}

fn alpha_tag(a: f64) -> String {
    format!("alpha-{a}")
}

/// Runs a validated experiment, writing outputs and the manifest into
/// `config.output`.
/// Total variation between π and the occupation law of one frozen-x path.
fn occupation_tv(v: &Validated, x: f64, pi: &InvariantMeasure, o: &OccupationSpec, seed: u64, stream: u64) -> Result<f64> {
    let grid = TimeGrid::new(o.horizon, o.dt)?;
    let lo = pi.y[0];
    let hi = pi.y[pi.y.len() - 1];
    let mut path = simulate_virtual_fast(&v.model, x, &grid, 0.5 * (lo + hi), seed, stream).map_err(|e| e.in_module("simulate"))?;
    if let Some(period) = v.model.coeffs.period() {
        path.y.iter_mut().for_each(|y| *y = lo + (*y - lo).rem_euclid(period));
    }
    let edges = linspace(lo, hi, o.bins + 1);
    let hist = occupation_histogram(&path.t, &path.y, &edges).map_err(|e| e.in_module("simulate"))?;
    Ok(hist.tv_distance(&pi.bin_masses(&edges)))
}

pub fn run(v: &Validated) -> Result<RunSummary> {
    let cfg = &v.config;
    let mut out = Outputs::new(&cfg.output)?;
    let mut checks: BTreeMap<String, Value> = BTreeMap::new();
    match &cfg.experiment {
        ExperimentKind::HamiltonianTable { x, p, settings } => {
            let xs = x.values();
            let ps = p.values();
            let mut by_regime: BTreeMap<Regime, HamiltonianTable> = BTreeMap::new();
            for &(a, regime) in &v.regimes {
                let t = HamiltonianTable::build(&v.model, regime, &xs, &ps, settings).map_err(|e| e.in_module("hamiltonian"))?;
                out.write(&format!("hamiltonian_{}.csv", alpha_tag(a)), |w| t.write_csv(w))?;
                checks.insert(format!("convexity_defect_{}", alpha_tag(a)), json!(t.convexity_defect()));
                by_regime.insert(regime, t);
            }
            if let (Some(sup), Some(cri), Some(sub)) = (
                by_regime.get(&Regime::Supercritical),
                by_regime.get(&Regime::Critical),
                by_regime.get(&Regime::Subcritical),
            ) {
                let mut worst: f64 = 0.0;
                for i in 0..xs.len() {
                    for j in 0..ps.len() {
                        worst = worst
                            .max(sup.values[i][j] - cri.values[i][j])
                            .max(cri.values[i][j] - sub.values[i][j]);
                    }
                }
                checks.insert("regime_ordering_violation".into(), json!(worst));
            }
        }
        ExperimentKind::HjSolve { hamiltonian, h, window, dx, t_end, solve } => {
            let ham = BuiltHamiltonian::build(hamiltonian, v)?;
            let (mut field, inner) = solve_padded(&ham, h, (window[0], window[1]), *dx, *t_end, solve)?;
            field.initial = Some(*h);
            field.x = field.x[inner.clone()].to_vec();
            for row in &mut field.values {
                *row = row[inner.clone()].to_vec();
            }
            checks.insert("dt".into(), json!(field.dt));
            checks.insert("numerical_viscosity".into(), json!(field.theta));
            out.write("solution.csv", |w| field.write_csv(w))?;
        }
        ExperimentKind::Rate { hamiltonian, q, points, slopes } => {
            let ham = BuiltHamiltonian::build(hamiltonian, v)?;
            let (ps, hs) = ham.samples();
            let rf = RateFunction::from_samples(&ps, &hs, &q.values()).map_err(|e| e.in_module("hjb"))?;
            let slope_grid = slopes.map(|s| s.values()).unwrap_or_else(|| ps.clone());
            checks.insert("convexity_defect".into(), json!(rf.convexity_defect));
            let mut rows = Vec::new();
            let mut worst: f64 = 0.0;
            for &[x, x0, t] in points {
                let a = rf.eval(x, x0, t).map_err(|e| e.in_module("hjb"))?;
                let b = rate_from_linear_family(&|s| ham.eval_p(s), x, x0, t, &slope_grid).map_err(|e| e.in_module("hjb"))?;
                worst = worst.max((a.value - b.value).abs());
                rows.push((x, x0, t, a, b));
            }
            checks.insert("max_duality_gap".into(), json!(worst));
            out.write("conjugate.csv", |w| rf.write_csv(w))?;
            out.write("rate.csv", |w| {
                use std::io::Write;
                writeln!(w, "x,x0,t,I,I_linear_family,saturated")?;
                for (x, x0, t, a, b) in &rows {
                    writeln!(w, "{},{},{},{},{},{}", x, x0, t, a.value, b.value, a.saturated || b.saturated)?;
                }
                Ok(())
            })?;
        }
        ExperimentKind::McConvergence { h, t, x, y, paths, max_dt, reference } => {
            let reference_value = match reference {
                ReferenceSpec::Value { value } => *value,
                ReferenceSpec::Hj { hamiltonian, dx, solve } => {
                    let ham = BuiltHamiltonian::build(hamiltonian, v)?;
                    let (field, _) = solve_padded(&ham, h, (x - 10.0 * dx, x + 10.0 * dx), *dx, *t, solve)?;
                    interp_linear(&field.x, field.terminal(), *x)
                }
            };
            checks.insert("reference".into(), json!(reference_value));
            let settings = McSettings {
                paths: *paths,
                seed: cfg.seed,
                max_dt: *max_dt,
            };
            let ys = y.values();
            for &(a, _) in &v.regimes {
                for &y0 in &ys {
                    let table = convergence_study(&v.model, a, &cfg.regime.epsilon, h, *t, *x, y0, reference_value, &settings)
                        .map_err(|e| e.in_module("mc"))?;
                    let name = if ys.len() == 1 {
                        format!("convergence_{}.csv", alpha_tag(a))
                    } else {
                        format!("convergence_{}_y-{y0}.csv", alpha_tag(a))
                    };
                    out.write(&name, |w| table.write_csv(w))?;
                }
            }
        }
        ExperimentKind::TailRate {
            t,
            x0,
            y0,
            set,
            paths,
            max_dt,
            reference_hamiltonian,
            q,
        } => {
            let reference = match (reference_hamiltonian, q) {
                (Some(hs), Some(qg)) => {
                    let ham = BuiltHamiltonian::build(hs, v)?;
                    let (ps, hv) = ham.samples();
                    let conj = legendre_transform(&ps, &hv, &qg.values()).map_err(|e| e.in_module("hjb"))?;
                    let mut best = f64::INFINITY;
                    for xx in linspace(set[0], set[1].max(set[0] + 1e-12), 401) {
                        best = best.min(crate::hjb::rate_function(xx, *x0, *t, &conj)?.value);
                    }
                    Some(best)
                }
                _ => None,
            };
            let settings = McSettings {
                paths: *paths,
                seed: cfg.seed,
                max_dt: *max_dt,
            };
            for &(a, _) in &v.regimes {
                let mut table = tail_probability_rate(&v.model, a, *t, *x0, *y0, (set[0], set[1]), &cfg.regime.epsilon, &settings)
                    .map_err(|e| e.in_module("mc"))?;
                table.reference = reference;
                out.write(&format!("tail_{}.csv", alpha_tag(a)), |w| table.write_csv(w))?;
            }
            if let Some(r) = reference {
                checks.insert("reference_rate".into(), json!(r));
            }
        }
        ExperimentKind::FastLayer { x, y_domain, occupation } => {
            let mut summary = Vec::new();
            for (i, &xi) in x.iter().enumerate() {
                let pi = invariant_measure(&v.model, xi, y_domain).map_err(|e| e.in_module("fastlayer"))?;
                let residual = stationarity_battery(&v.model, xi, &pi);
                let tv = match occupation {
                    Some(o) => Some(occupation_tv(v, xi, &pi, o, cfg.seed, i as u64)?),
                    None => None,
                };
                summary.push((xi, pi.truncation_mass, residual, pi.log_normalizer, tv));
                out.write(&format!("invariant_{i}.csv"), |w| pi.write_csv(w))?;
            }
            out.write("fast_layer_summary.csv", |w| {
                use std::io::Write;
                writeln!(w, "x,truncation_mass,stationarity_residual,log_normalizer,occupation_tv")?;
                for (a, b, c, d, e) in &summary {
                    let e = e.map(|t| t.to_string()).unwrap_or_default();
                    writeln!(w, "{a},{b},{c},{d},{e}")?;
                }
                Ok(())
            })?;
        }
    }

    let manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": cfg.experiment.name(),
        "config": cfg,
        "regimes": v.regimes.iter().map(|(a, r)| json!({"alpha": a, "regime": r})).collect::<Vec<_>>(),
        "conditions": v.conditions,
        "untested_assumptions": v.model.untested_assumptions(),
        "notices": v.notices,
        "checks": checks,
        "outputs": out.files.iter().map(|(f, h, n)| json!({"file": f, "sha256": h, "bytes": n})).collect::<Vec<_>>(),
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(cfg.output.join("manifest.json"), text + "\n")?;
    Ok(RunSummary {
        output_dir: cfg.output.clone(),
        files: out.files.iter().map(|(f, _, _)| f.clone()).collect(),
        checks,
    })
}

/// Loads, applies command-line overrides, validates and runs.
pub fn run_path(path: &Path, seed_override: Option<u64>, out_override: Option<&Path>) -> Result<RunSummary> {
    let mut cfg = load_config(path)?;
    if let Some(s) = seed_override {
        cfg.seed = s;
    }
    if let Some(o) = out_override {
        cfg.output = o.to_path_buf();
    }
    run(&validate(cfg)?)
}

/// Machine-readable error report.
pub fn error_report(e: &Error) -> Value {
    let (module, inner) = match e {
        Error::Module { module, source } => (Some(*module), source.as_ref()),
        other => (None, other),
    };
    let field = match inner {
        Error::Config { field, .. } => Some(field.clone()),
        _ => None,
    };
    json!({
        "error": e.kind(),
        "module": module,
        "field": field,
        "message": e.to_string(),
    })
}

pub fn list_presets() -> String {
    presets::catalog_text()
}
