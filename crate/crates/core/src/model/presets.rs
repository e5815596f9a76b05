//! Named model presets. Every listed parameter is required; a missing one
//! is reported with its field path so configs fail loudly.

use super::{CoefficientSet, DriftShift, JumpKernel, LevyMeasureModel, SlowFastModel};
use crate::error::{Error, Result};
use crate::levy::drift_correction;
use std::collections::BTreeMap;
use std::f64::consts::TAU;

/// Catalog entry: name, one-line summary and parameter docs.
#[derive(Clone, Debug)]
pub struct PresetInfo {
    pub name: &'static str,
    pub summary: &'static str,
    pub params: &'static [(&'static str, &'static str)],
}

const CATALOG: &[PresetInfo] = &[
    PresetInfo {
        name: "brownian-slow",
        summary: "slow Brownian motion with constant drift, Ornstein-Uhlenbeck fast process (b2 = -y, sigma2 = 1)",
        params: &[("sigma", "slow volatility sigma1"), ("drift", "slow drift b1")],
    },
    PresetInfo {
        name: "ou-averaging",
        summary: "sigma1^2 = s0 + s2 y^2 driven by an Ornstein-Uhlenbeck fast process b2 = -theta y",
        params: &[
            ("s0", "constant part of sigma1^2 (>= 0)"),
            ("s2", "quadratic part of sigma1^2 (>= 0)"),
            ("theta", "mean reversion of the fast process (> 0)"),
            ("sigma2", "fast volatility (> 0)"),
            ("rho", "Brownian correlation in (-1, 1)"),
        ],
    },
    PresetInfo {
        name: "sinusoidal-subcritical",
        summary: "periodic cell [0, 2pi): sigma1^2 = 1 + amp sin y, b2 = -kappa sin y, optional slow jumps k1 = z at one atom",
        params: &[
            ("amp", "modulation of sigma1^2, |amp| < 1"),
            ("kappa", "fast drift amplitude"),
            ("sigma2", "fast volatility (> 0)"),
            ("rho", "Brownian correlation in (-1, 1)"),
            ("drift", "slow drift b1"),
            ("jump_size", "location of the slow jump atom (nonzero)"),
            ("jump_mass", "mass of the slow jump atom (0 disables jumps)"),
        ],
    },
    PresetInfo {
        name: "stable-example",
        summary: "slow and fast equations driven by truncated alpha-stable jumps (k = z), large jumps uncompensated via drift corrections",
        params: &[
            ("alpha_stab1", "stability index of the slow jumps, in (1, 2)"),
            ("alpha_stab2", "stability index of the fast jumps, in (1, 2)"),
            ("r_min", "small-jump cutoff (> 0)"),
            ("r_max", "large-jump cutoff (> r_min, may be large)"),
            ("skew", "asymmetry in [-1, 1]: density constants 1 + skew and 1 - skew"),
            ("sigma1", "slow volatility"),
            ("sigma2", "fast volatility (> 0)"),
            ("theta", "fast mean reversion b2 = -theta y"),
        ],
    },
    PresetInfo {
        name: "zero-dynamics",
        summary: "all coefficients zero; both components stay at their initial values",
        params: &[],
    },
];

/// All presets, alphabetically.
pub fn catalog() -> &'static [PresetInfo] {
    CATALOG
}

/// Human-readable listing used by `list-presets`.
pub fn catalog_text() -> String {
    let mut out = String::new();
    for p in CATALOG {
        out.push_str(&format!("{}\n    {}\n", p.name, p.summary));
        for (k, doc) in p.params {
            out.push_str(&format!("    - {k}: {doc}\n"));
        }
    }
    out
}

/// Builds the model of preset `name` from its parameters.
pub fn build(name: &str, params: &BTreeMap<String, f64>) -> Result<SlowFastModel> {
    let info = CATALOG
        .iter()
        .find(|p| p.name == name)
        .ok_or_else(|| Error::config("model.preset", format!("unknown preset `{name}`")))?;
    for key in params.keys() {
        if !info.params.iter().any(|(k, _)| k == key) {
            return Err(Error::config(format!("model.params.{key}"), format!("not a parameter of `{name}`")));
        }
    }
    let get = |key: &str| -> Result<f64> {
        let v = *params
            .get(key)
            .ok_or_else(|| Error::config(format!("model.params.{key}"), "missing"))?;
        if !v.is_finite() {
            return Err(Error::config(format!("model.params.{key}"), "must be finite"));
        }
        Ok(v)
    };
    let positive = |key: &str| -> Result<f64> {
        let v = get(key)?;
        if v <= 0.0 {
            return Err(Error::config(format!("model.params.{key}"), format!("{v} must be positive")));
        }
        Ok(v)
    };
    let wrap = |field: &str, e: Error| match e {
        Error::InvalidParameter { reason, .. } => Error::config(format!("model.params.{field}"), reason),
        other => other,
    };

    match name {
        "zero-dynamics" => Ok(SlowFastModel::diffusion(CoefficientSet::zero())),
        "brownian-slow" => {
            let sigma = get("sigma")?;
            let drift = get("drift")?;
            let c = CoefficientSet::zero()
                .with_b1(move |_, _| drift)
                .with_sigma1(move |_, _| sigma)
                .with_b2(|_, y| -y)
                .with_sigma2(|_, _| 1.0);
            Ok(SlowFastModel::diffusion(c))
        }
        "ou-averaging" => {
            let s0 = get("s0")?;
            let s2 = get("s2")?;
            if s0 < 0.0 || s2 < 0.0 {
                return Err(Error::config("model.params.s0", "s0 and s2 must be nonnegative"));
            }
            let theta = positive("theta")?;
            let sigma2 = positive("sigma2")?;
            let c = CoefficientSet::zero()
                .with_sigma1(move |_, y| (s0 + s2 * y * y).sqrt())
                .with_b2(move |_, y| -theta * y)
                .with_sigma2(move |_, _| sigma2)
                .with_rho(get("rho")?)
                .map_err(|e| wrap("rho", e))?;
            Ok(SlowFastModel::diffusion(c))
        }
        "sinusoidal-subcritical" => {
            let amp = get("amp")?;
            if amp.abs() >= 1.0 {
                return Err(Error::config("model.params.amp", "|amp| must be below 1"));
            }
            let kappa = get("kappa")?;
            let sigma2 = positive("sigma2")?;
            let drift = get("drift")?;
            let mass = get("jump_mass")?;
            let at = get("jump_size")?;
            let c = CoefficientSet::zero()
                .with_b1(move |_, _| drift)
                .with_sigma1(move |_, y| (1.0 + amp * y.sin()).sqrt())
                .with_b2(move |_, y| -kappa * y.sin())
                .with_sigma2(move |_, _| sigma2)
                .with_rho(get("rho")?)
                .map_err(|e| wrap("rho", e))?
                .with_period(TAU)?;
            if mass == 0.0 {
                return Ok(SlowFastModel::diffusion(c));
            }
            let nu1 = LevyMeasureModel::atomic(&[(at, mass)]).map_err(|e| wrap("jump_size", e))?;
            let c = c.with_k1(JumpKernel::linear(|_, _| 1.0));
            Ok(SlowFastModel::new(c, nu1, LevyMeasureModel::Null))
        }
        "stable-example" => {
            let a1 = get("alpha_stab1")?;
            let a2 = get("alpha_stab2")?;
            let r_min = positive("r_min")?;
            let r_max = get("r_max")?;
            let skew = get("skew")?;
            if skew.abs() > 1.0 {
                return Err(Error::config("model.params.skew", "must lie in [-1, 1]"));
            }
            let s1 = get("sigma1")?;
            let s2 = positive("sigma2")?;
            let theta = get("theta")?;
            let nu1 = LevyMeasureModel::stable(a1, r_min, r_max, 1.0 + skew, 1.0 - skew)
                .map_err(|e| wrap("alpha_stab1", e))?;
            let nu2 = LevyMeasureModel::stable(a2, r_min, r_max, 1.0 + skew, 1.0 - skew)
                .map_err(|e| wrap("alpha_stab2", e))?;
            let shift = DriftShift {
                slow: drift_correction(&nu1)?,
                fast: drift_correction(&nu2)?,
            };
            let c = CoefficientSet::zero()
                .with_sigma1(move |_, _| s1)
                .with_b2(move |_, y| -theta * y)
                .with_sigma2(move |_, _| s2)
                .with_k1(JumpKernel::linear(|_, _| 1.0))
                .with_k2(JumpKernel::linear(|_, _| 1.0));
            let mut m = SlowFastModel::new(c, nu1, nu2);
            m.drift_shift = shift;
            Ok(m)
        }
        _ => unreachable!("catalog and builder out of sync"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(kv: &[(&str, f64)]) -> BTreeMap<String, f64> {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn catalog_is_alphabetical_and_complete() {
        let names: Vec<_> = catalog().iter().map(|p| p.name).collect();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
        assert!(names.contains(&"ou-averaging"));
        let stable = catalog().iter().find(|p| p.name == "stable-example").unwrap();
        assert!(stable.params.iter().any(|(k, _)| *k == "alpha_stab1"));
        assert!(stable.params.iter().any(|(k, _)| *k == "alpha_stab2"));
    }

    #[test]
    fn missing_parameter_names_the_field() {
        let p = params(&[("s0", 1.0), ("s2", 1.0), ("theta", 1.0), ("rho", 0.0)]);
        match build("ou-averaging", &p) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "model.params.sigma2"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_names_are_rejected() {
        assert!(build("nope", &BTreeMap::new()).is_err());
        let p = params(&[("bogus", 1.0)]);
        assert!(matches!(build("zero-dynamics", &p), Err(Error::Config { .. })));
    }

    #[test]
    fn every_preset_builds_with_sample_parameters() {
        let samples: &[(&str, &[(&str, f64)])] = &[
            ("zero-dynamics", &[]),
            ("brownian-slow", &[("sigma", 1.0), ("drift", 0.0)]),
            ("ou-averaging", &[("s0", 1.0), ("s2", 1.0), ("theta", 1.0), ("sigma2", 1.0), ("rho", 0.0)]),
            (
                "sinusoidal-subcritical",
                &[("amp", 0.5), ("kappa", 1.0), ("sigma2", 1.0), ("rho", 0.2), ("drift", 0.3), ("jump_size", 0.5), ("jump_mass", 1.0)],
            ),
            (
                "stable-example",
                &[("alpha_stab1", 1.5), ("alpha_stab2", 1.7), ("r_min", 0.01), ("r_max", 10.0), ("skew", 0.5), ("sigma1", 1.0), ("sigma2", 1.0), ("theta", 1.0)],
            ),
        ];
        for (name, kv) in samples {
            build(name, &params(kv)).unwrap();
        }
    }

    #[test]
    fn stable_example_drift_shift_matches_tail_mean() {
        let p = params(&[
            ("alpha_stab1", 1.5),
            ("alpha_stab2", 1.5),
            ("r_min", 0.01),
            ("r_max", 10.0),
            ("skew", 1.0),
            ("sigma1", 1.0),
            ("sigma2", 1.0),
            ("theta", 1.0),
        ]);
        let m = build("stable-example", &p).unwrap();
        // one-sided density 2 z^{-2.5} on [1, 10]: mean 2 * 2 (1 - 10^{-1/2})
        let exact = 4.0 * (1.0 - 10f64.powf(-0.5));
        assert!((m.drift_shift.slow - exact).abs() < 1e-10);
        assert!((m.drift_shift.fast - exact).abs() < 1e-10);
    }
}
