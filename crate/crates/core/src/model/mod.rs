//! Problem description: coefficient fields, Lévy measures, time-scale
//! parameters, regime classification and empirical checks of the Lipschitz
//! and growth hypotheses.

pub mod presets;

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

/// A coefficient field `(x, y) -> value`.
pub type Field = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A general jump kernel `(x, y, z) -> value`.
pub type KernelFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

fn zero_field() -> Field {
    Arc::new(|_, _| 0.0)
}

/// Jump amplitude `k(x, y, z)`.
///
/// The `Linear` variant (`k = c(x, y) * z`) lets the simulator and the
/// discretised generator reuse cached moments of the measure instead of
/// running a quadrature per evaluation.
#[derive(Clone)]
pub enum JumpKernel {
    Zero,
    Linear(Field),
    General(KernelFn),
}

impl JumpKernel {
    pub fn linear(scale: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        JumpKernel::Linear(Arc::new(scale))
    }

    pub fn general(k: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        JumpKernel::General(Arc::new(k))
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64, z: f64) -> f64 {
        match self {
            JumpKernel::Zero => 0.0,
            JumpKernel::Linear(c) => c(x, y) * z,
            JumpKernel::General(k) => k(x, y, z),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, JumpKernel::Zero)
    }
}

impl fmt::Debug for JumpKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JumpKernel::Zero => write!(f, "Zero"),
            JumpKernel::Linear(_) => write!(f, "Linear(..)"),
            JumpKernel::General(_) => write!(f, "General(..)"),
        }
    }
}

/// The six coefficient functions of the slow-fast system plus the Brownian
/// correlation between the two equations.
#[derive(Clone)]
pub struct CoefficientSet {
    pub b1: Field,
    pub sigma1: Field,
    pub k1: JumpKernel,
    pub b2: Field,
    pub sigma2: Field,
    pub k2: JumpKernel,
    rho: f64,
    period: Option<f64>,
}

impl fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientSet")
            .field("k1", &self.k1)
            .field("k2", &self.k2)
            .field("rho", &self.rho)
            .field("period", &self.period)
            .finish_non_exhaustive()
    }
}

impl Default for CoefficientSet {
    fn default() -> Self {
        CoefficientSet {
            b1: zero_field(),
            sigma1: zero_field(),
            k1: JumpKernel::Zero,
            b2: zero_field(),
            sigma2: zero_field(),
            k2: JumpKernel::Zero,
            rho: 0.0,
            period: None,
        }
    }
}

impl CoefficientSet {
    /// All coefficients zero, `rho = 0`, no periodicity.
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn with_b1(mut self, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.b1 = Arc::new(f);
        self
    }

    pub fn with_sigma1(mut self, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.sigma1 = Arc::new(f);
        self
    }

    pub fn with_b2(mut self, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.b2 = Arc::new(f);
        self
    }

    pub fn with_sigma2(mut self, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.sigma2 = Arc::new(f);
        self
    }

    pub fn with_k1(mut self, k: JumpKernel) -> Self {
        self.k1 = k;
        self
    }

    pub fn with_k2(mut self, k: JumpKernel) -> Self {
        self.k2 = k;
        self
    }

    /// Sets the correlation; must lie strictly inside (-1, 1).
    pub fn with_rho(mut self, rho: f64) -> Result<Self> {
        if !(rho > -1.0 && rho < 1.0) {
            return Err(Error::invalid("rho", format!("{rho} is not in (-1, 1)")));
        }
        self.rho = rho;
        Ok(self)
    }

    /// Declares every coefficient periodic in `y` with the given period.
    pub fn with_period(mut self, period: f64) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::invalid("period", format!("{period} must be positive")));
        }
        self.period = Some(period);
        Ok(self)
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn period(&self) -> Option<f64> {
        self.period
    }

    /// Largest deviation between the coefficients at `(x, y)` and
    /// `(x, y + period)` over the sample points. Zero when not periodic.
    pub fn periodicity_defect(&self, samples: &[(f64, f64)], z_samples: &[f64]) -> f64 {
        let Some(l) = self.period else { return 0.0 };
        let mut worst: f64 = 0.0;
        for &(x, y) in samples {
            for f in [&self.b1, &self.sigma1, &self.b2, &self.sigma2] {
                worst = worst.max((f(x, y) - f(x, y + l)).abs());
            }
            for &z in z_samples {
                worst = worst.max((self.k1.eval(x, y, z) - self.k1.eval(x, y + l, z)).abs());
                worst = worst.max((self.k2.eval(x, y, z) - self.k2.eval(x, y + l, z)).abs());
            }
        }
        worst
    }
}

/// A point mass of a finite atomic Lévy measure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub at: f64,
    pub mass: f64,
}

/// Parametric Lévy measure.
///
/// `TruncatedStable` has density `c_plus / z^(1+index)` on `[r_min, r_max]`
/// and `c_minus / |z|^(1+index)` on `[-r_max, -r_min]`. Small jumps below
/// `r_min` are dropped (no Gaussian replacement), which biases the removed
/// compensated variance by `O(r_min^(2-index))`. `r_max` may be infinite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LevyMeasureModel {
    Null,
    Atomic {
        atoms: Vec<Atom>,
    },
    TruncatedStable {
        index: f64,
        r_min: f64,
        r_max: f64,
        c_plus: f64,
        c_minus: f64,
    },
}

impl LevyMeasureModel {
    pub fn atomic(atoms: &[(f64, f64)]) -> Result<Self> {
        let atoms: Vec<Atom> = atoms.iter().map(|&(at, mass)| Atom { at, mass }).collect();
        let m = LevyMeasureModel::Atomic { atoms };
        m.validate()?;
        Ok(m)
    }

    /// Symmetric truncated stable measure with unit density constant.
    pub fn symmetric_stable(index: f64, r_min: f64, r_max: f64) -> Result<Self> {
        Self::stable(index, r_min, r_max, 1.0, 1.0)
    }

    pub fn stable(index: f64, r_min: f64, r_max: f64, c_plus: f64, c_minus: f64) -> Result<Self> {
        let m = LevyMeasureModel::TruncatedStable {
            index,
            r_min,
            r_max,
            c_plus,
            c_minus,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn is_null(&self) -> bool {
        match self {
            LevyMeasureModel::Null => true,
            LevyMeasureModel::Atomic { atoms } => atoms.iter().all(|a| a.mass == 0.0),
            LevyMeasureModel::TruncatedStable { c_plus, c_minus, .. } => {
                *c_plus == 0.0 && *c_minus == 0.0
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LevyMeasureModel::Null => Ok(()),
            LevyMeasureModel::Atomic { atoms } => {
                for a in atoms {
                    if !(a.mass >= 0.0) || !a.mass.is_finite() {
                        return Err(Error::invalid("mass", format!("atom at {} has mass {}", a.at, a.mass)));
                    }
                    if a.at == 0.0 || !a.at.is_finite() {
                        return Err(Error::invalid("at", "atoms must sit at finite nonzero z"));
                    }
                }
                Ok(())
            }
            LevyMeasureModel::TruncatedStable {
                index,
                r_min,
                r_max,
                c_plus,
                c_minus,
            } => {
                if !(*index > 1.0 && *index < 2.0) {
                    return Err(Error::invalid("index", format!("{index} is not in (1, 2)")));
                }
                if !(*r_min > 0.0 && r_max > r_min) {
                    return Err(Error::invalid(
                        "r_min",
                        format!("need 0 < r_min < r_max, got {r_min}, {r_max}"),
                    ));
                }
                if !(*c_plus >= 0.0 && *c_minus >= 0.0) {
                    return Err(Error::invalid("c_plus", "density constants must be nonnegative"));
                }
                Ok(())
            }
        }
    }
}

/// The three asymptotic regimes selected by `delta = epsilon^alpha`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Supercritical,
    Critical,
    Subcritical,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Supercritical => "supercritical",
            Regime::Critical => "critical",
            Regime::Subcritical => "subcritical",
        })
    }
}

/// Classifies the time-scale exponent. `alpha = 2` is compared exactly:
/// the regime is a modelling choice, configs must write `2`.
pub fn classify_regime(alpha: f64) -> Result<Regime> {
    if !(alpha > 1.0) || !alpha.is_finite() {
        return Err(Error::invalid("alpha", format!("{alpha} must be a finite value > 1")));
    }
    Ok(if alpha > 2.0 {
        Regime::Supercritical
    } else if alpha == 2.0 {
        Regime::Critical
    } else {
        Regime::Subcritical
    })
}

/// `epsilon`, `alpha` and the derived `delta = epsilon^alpha`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegimeParams {
    epsilon: f64,
    alpha: f64,
    delta: f64,
    regime: Regime,
}

impl RegimeParams {
    pub fn new(epsilon: f64, alpha: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::invalid("epsilon", format!("{epsilon} must be positive")));
        }
        let regime = classify_regime(alpha)?;
        Ok(RegimeParams {
            epsilon,
            alpha,
            delta: epsilon.powf(alpha),
            regime,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn regime(&self) -> Regime {
        self.regime
    }

    /// Speed-up of the fast clock, `epsilon / delta = epsilon^(1 - alpha)`.
    pub fn fast_rate(&self) -> f64 {
        self.epsilon.powf(1.0 - self.alpha)
    }
}

/// Constant drift shifts produced by rewriting an uncompensated large-jump
/// part as compensated jumps plus drift.
///
/// `slow` enters the slow equation as `epsilon * (b1 + slow / epsilon)`,
/// `fast` as `(epsilon / delta) * (b2 + fast)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DriftShift {
    pub slow: f64,
    pub fast: f64,
}

/// Coefficients plus the two Lévy measures.
#[derive(Clone, Debug)]
pub struct SlowFastModel {
    pub coeffs: CoefficientSet,
    pub nu1: LevyMeasureModel,
    pub nu2: LevyMeasureModel,
    pub drift_shift: DriftShift,
}

impl SlowFastModel {
    pub fn new(coeffs: CoefficientSet, nu1: LevyMeasureModel, nu2: LevyMeasureModel) -> Self {
        SlowFastModel {
            coeffs,
            nu1,
            nu2,
            drift_shift: DriftShift::default(),
        }
    }

    /// Pure diffusion model (both measures null).
    pub fn diffusion(coeffs: CoefficientSet) -> Self {
        Self::new(coeffs, LevyMeasureModel::Null, LevyMeasureModel::Null)
    }

    /// Hypotheses this crate relies on but cannot check numerically.
    pub fn untested_assumptions(&self) -> Vec<&'static str> {
        vec!["ergodicity of the tilted fast process at every x (assumed, not checked)"]
    }
}

/// Probe-based estimates of the Lipschitz and growth constants.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionReport {
    pub lipschitz_estimate: f64,
    pub growth_estimate: f64,
    pub probe_count: usize,
    pub violations: Vec<(f64, f64)>,
}

/// Empirical Lipschitz/growth certificate over a list of probe pairs.
///
/// The Lipschitz quotient sums the squared coefficient differences (jump
/// kernels integrated against their measures) and divides by the squared
/// distance between the two points; the growth quotient divides the squared
/// magnitudes by `1 + x^2 + y^2`. Non-finite evaluations are recorded as
/// violations and excluded from the maxima.
pub fn validate_conditions(
    coeffs: &CoefficientSet,
    nu1: &LevyMeasureModel,
    nu2: &LevyMeasureModel,
    probes: &[((f64, f64), (f64, f64))],
) -> Result<ConditionReport> {
    if probes.is_empty() {
        return Err(Error::invalid("probes", "probe list is empty"));
    }
    for &((x1, y1), (x2, y2)) in probes {
        if ![x1, y1, x2, y2].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("probes", "probe points must be finite"));
        }
    }

    let mut violations = Vec::new();
    let mut lip: f64 = 0.0;
    let mut growth: f64 = 0.0;

    let sq_kernel_diff = |k: &JumpKernel, nu: &LevyMeasureModel, a: (f64, f64), b: (f64, f64)| {
        if k.is_zero() || nu.is_null() {
            return Ok(0.0);
        }
        nu.integrate(|z| {
            let d = k.eval(b.0, b.1, z) - k.eval(a.0, a.1, z);
            d * d
        })
    };

    for &(p, q) in probes {
        let dist2 = (q.0 - p.0).powi(2) + (q.1 - p.1).powi(2);
        for pt in [p, q] {
            match growth_quotient(coeffs, nu1, nu2, pt) {
                Ok(g) if g.is_finite() => growth = growth.max(g),
                _ => violations.push(pt),
            }
        }
        if dist2 == 0.0 {
            continue;
        }
        let diff = |f: &Field| (f(q.0, q.1) - f(p.0, p.1)).powi(2);
        let jumps = sq_kernel_diff(&coeffs.k1, nu1, p, q)
            .and_then(|a| Ok(a + sq_kernel_diff(&coeffs.k2, nu2, p, q)?));
        let num = diff(&coeffs.b1) + diff(&coeffs.b2) + diff(&coeffs.sigma1) + diff(&coeffs.sigma2);
        match jumps {
            Ok(j) if (num + j).is_finite() => lip = lip.max((num + j) / dist2),
            _ => violations.push(q),
        }
    }
    violations.dedup();

    Ok(ConditionReport {
        lipschitz_estimate: lip,
        growth_estimate: growth,
        probe_count: probes.len(),
        violations,
    })
}

fn growth_quotient(
    coeffs: &CoefficientSet,
    nu1: &LevyMeasureModel,
    nu2: &LevyMeasureModel,
    (x, y): (f64, f64),
) -> Result<f64> {
    let sq = |f: &Field| f(x, y).powi(2);
    let mut num = sq(&coeffs.b1) + sq(&coeffs.b2) + sq(&coeffs.sigma1) + sq(&coeffs.sigma2);
    if !coeffs.k1.is_zero() && !nu1.is_null() {
        num += nu1.integrate(|z| coeffs.k1.eval(x, y, z).powi(2))?;
    }
    if !coeffs.k2.is_zero() && !nu2.is_null() {
        num += nu2.integrate(|z| coeffs.k2.eval(x, y, z).powi(2))?;
    }
    Ok(num / (1.0 + x * x + y * y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn regime_examples() {
        assert_eq!(classify_regime(3.0).unwrap(), Regime::Supercritical);
        assert_eq!(classify_regime(2.0).unwrap(), Regime::Critical);
        assert_eq!(classify_regime(1.5).unwrap(), Regime::Subcritical);
        assert!(classify_regime(1.0).is_err());
        assert!(classify_regime(0.5).is_err());
        assert!(classify_regime(f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn regimes_partition_the_half_line(alpha in 1.0000001f64..50.0) {
            let r = classify_regime(alpha).unwrap();
            let expected = [alpha > 2.0, alpha == 2.0, alpha < 2.0];
            prop_assert_eq!(expected.iter().filter(|b| **b).count(), 1);
            match r {
                Regime::Supercritical => prop_assert!(expected[0]),
                Regime::Critical => prop_assert!(expected[1]),
                Regime::Subcritical => prop_assert!(expected[2]),
            }
        }

        #[test]
        fn delta_below_epsilon(eps in 1e-4f64..0.999, alpha in 1.001f64..6.0) {
            let r = RegimeParams::new(eps, alpha).unwrap();
            prop_assert!(r.delta() < r.epsilon());
        }
    }

    #[test]
    fn rho_must_be_inside_unit_interval() {
        assert!(CoefficientSet::zero().with_rho(1.0).is_err());
        assert!(CoefficientSet::zero().with_rho(-1.0).is_err());
        assert!(CoefficientSet::zero().with_rho(0.99).is_ok());
    }

    #[test]
    fn periodicity_defect_detects_aperiodic_coefficients() {
        let per = CoefficientSet::zero()
            .with_sigma1(|_, y| (1.0 + 0.5 * y.sin()).sqrt())
            .with_period(std::f64::consts::TAU)
            .unwrap();
        let pts: Vec<(f64, f64)> = (0..20).map(|i| (i as f64 * 0.3 - 3.0, i as f64 * 0.7)).collect();
        assert!(per.periodicity_defect(&pts, &[0.5]) < 1e-12);
        let bad = CoefficientSet::zero()
            .with_b2(|_, y| -y)
            .with_period(std::f64::consts::TAU)
            .unwrap();
        assert!(bad.periodicity_defect(&pts, &[0.5]) > 1.0);
    }

    #[test]
    fn constant_coefficients_have_zero_lipschitz_estimate() {
        let c = CoefficientSet::zero()
            .with_b1(|_, _| 2.0)
            .with_sigma1(|_, _| 1.0)
            .with_b2(|_, _| -0.5)
            .with_sigma2(|_, _| 3.0);
        let probes = vec![((0.0, 0.0), (1.0, 2.0)), ((-3.0, 1.0), (4.0, -2.0))];
        let r = validate_conditions(&c, &LevyMeasureModel::Null, &LevyMeasureModel::Null, &probes).unwrap();
        assert_eq!(r.lipschitz_estimate, 0.0);
        assert!(r.violations.is_empty());
    }

    #[test]
    fn unit_slope_drift() {
        let c = CoefficientSet::zero().with_b1(|x, _| x);
        let r = validate_conditions(
            &c,
            &LevyMeasureModel::Null,
            &LevyMeasureModel::Null,
            &[((0.0, 0.0), (1.0, 0.0))],
        )
        .unwrap();
        assert!((r.lipschitz_estimate - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sine_volatility_is_one_lipschitz() {
        let c = CoefficientSet::zero().with_sigma1(|_, y| y.sin());
        let ys: Vec<f64> = (0..200).map(|i| -10.0 + 0.1 * i as f64).collect();
        let mut probes = Vec::new();
        let mut brute: f64 = 0.0;
        for &a in &ys {
            for &b in &ys {
                if a < b {
                    probes.push(((0.0, a), (0.0, b)));
                    brute = brute.max(((b.sin() - a.sin()) / (b - a)).powi(2));
                }
            }
        }
        let r = validate_conditions(&c, &LevyMeasureModel::Null, &LevyMeasureModel::Null, &probes).unwrap();
        assert!((r.lipschitz_estimate - brute).abs() < 1e-14);
        assert!(r.lipschitz_estimate <= 1.0 + 1e-12);
    }

    #[test]
    fn nonfinite_coefficients_become_violations() {
        let c = CoefficientSet::zero().with_b1(|x, _| 1.0 / x);
        let r = validate_conditions(
            &c,
            &LevyMeasureModel::Null,
            &LevyMeasureModel::Null,
            &[((0.0, 0.0), (1.0, 0.0)), ((1.0, 0.0), (2.0, 0.0))],
        )
        .unwrap();
        assert!(!r.violations.is_empty());
        assert!(r.lipschitz_estimate.is_finite());
    }

    #[test]
    fn jump_kernels_enter_the_lipschitz_quotient() {
        // k1 = x z against a unit atom at z = 2: |dk|^2 = 4 dx^2
        let c = CoefficientSet::zero().with_k1(JumpKernel::general(|x, _, z| x * z));
        let nu = LevyMeasureModel::atomic(&[(2.0, 1.0)]).unwrap();
        let r = validate_conditions(&c, &nu, &LevyMeasureModel::Null, &[((0.0, 0.0), (1.0, 0.0))]).unwrap();
        assert!((r.lipschitz_estimate - 4.0).abs() < 1e-14);
    }

    #[test]
    fn stable_measure_validation() {
        assert!(LevyMeasureModel::symmetric_stable(2.5, 0.1, 1.0).is_err());
        assert!(LevyMeasureModel::symmetric_stable(1.5, 1.0, 0.1).is_err());
        assert!(LevyMeasureModel::atomic(&[(1.0, -1.0)]).is_err());
        assert!(LevyMeasureModel::symmetric_stable(1.5, 0.01, f64::INFINITY).is_ok());
    }

    proptest! {
        #[test]
        fn null_measures_reduce_to_diffusion_quotients(
            a in -2.0f64..2.0,
            b in 0.1f64..2.0,
            seed in 0u64..1000,
        ) {
            use rand::{Rng, SeedableRng};
            let c = CoefficientSet::zero()
                .with_b1(move |x, y| a * x.sin() + y)
                .with_sigma1(move |_, y| b + (a * y).cos())
                .with_b2(|_, y| -y)
                .with_sigma2(move |x, _| b * (1.0 + 0.1 * x))
                .with_k1(JumpKernel::linear(move |x, _| 1.0 + x * x))
                .with_k2(JumpKernel::linear(|_, y| y));
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let probes: Vec<((f64, f64), (f64, f64))> = (0..100)
                .map(|_| {
                    let mut pt = || (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
                    (pt(), pt())
                })
                .collect();
            let report = validate_conditions(&c, &LevyMeasureModel::Null, &LevyMeasureModel::Null, &probes).unwrap();
            let fields = [&c.b1, &c.b2, &c.sigma1, &c.sigma2];
            let mut lip: f64 = 0.0;
            let mut growth: f64 = 0.0;
            for &(p, q) in &probes {
                let d2 = (q.0 - p.0).powi(2) + (q.1 - p.1).powi(2);
                let num: f64 = fields.iter().map(|f| (f(q.0, q.1) - f(p.0, p.1)).powi(2)).sum();
                lip = lip.max(num / d2);
                for (x, y) in [p, q] {
                    let g: f64 = fields.iter().map(|f| f(x, y).powi(2)).sum();
                    growth = growth.max(g / (1.0 + x * x + y * y));
                }
            }
            prop_assert_eq!(report.lipschitz_estimate, lip);
            prop_assert_eq!(report.growth_estimate, growth);
            prop_assert!(report.violations.is_empty());
        }
    }
}
