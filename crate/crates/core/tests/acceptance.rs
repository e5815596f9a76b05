//! Acceptance suite. Runs every check in sequence, prints one PASS/FAIL line
//! each and exits nonzero if any failed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slowfast_ldp::cli::{parse_config, run, validate};
use slowfast_ldp::fastlayer::{invariant_measure, stationarity_battery, YDomain};
use slowfast_ldp::hamiltonian::{
    dense_principal_eigenvalue, dv_bound, eval_prelimit_h, h0_supercritical, potential_on_grid, principal_eigen,
    CorrectorTestFn, DiscreteGenerator, EigenOptions, FastGrid, H0Settings, HamiltonianTable,
};
use slowfast_ldp::hjb::{
    hopf_lax, legendre_transform, padded_grid, rate_from_linear_family, solve_hj, FnHamiltonian, RateFunction,
    SolveOptions, TerminalFn,
};
use slowfast_ldp::mc::{estimate_u_eps, tail_probability_rate, McSettings};
use slowfast_ldp::model::{presets, CoefficientSet, JumpKernel, LevyMeasureModel, Regime, RegimeParams, SlowFastModel};
use slowfast_ldp::quad::linspace;
use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::time::Instant;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn params(kv: &[(&str, f64)]) -> BTreeMap<String, f64> {
    kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn brownian() -> SlowFastModel {
    presets::build("brownian-slow", &params(&[("sigma", 1.0), ("drift", 0.0)])).unwrap()
}

fn ou_quadratic(s0: f64, s2: f64, theta: f64, sigma2: f64) -> SlowFastModel {
    presets::build(
        "ou-averaging",
        &params(&[("s0", s0), ("s2", s2), ("theta", theta), ("sigma2", sigma2), ("rho", 0.0)]),
    )
    .unwrap()
}

fn gaussian_log_moment() -> Outcome {
    let start = Instant::now();
    let h = TerminalFn::ClippedLinear { slope: 1.0, lo: -50.0, hi: 50.0 };
    let settings = McSettings { paths: 100_000, seed: 1, max_dt: 0.01 };
    let mut ok = true;
    let mut detail = Vec::new();
    for eps in [0.1, 0.05] {
        let r = RegimeParams::new(eps, 2.0).unwrap();
        let e = estimate_u_eps(&brownian(), &r, &h, 0.5, 0.0, 0.0, &settings).map_err(|e| e.to_string())?;
        let z = (e.estimate - 0.5) / e.std_error;
        ok &= z.abs() <= 3.0;
        detail.push(format!("eps={eps}: U={:.4} se={:.4} z={z:.2}", e.estimate, e.std_error));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 60.0;
    check(ok, format!("{}; {secs:.1}s", detail.join("; ")))
}

fn ou_invariant_density() -> Outcome {
    let m = ou_quadratic(1.0, 1.0, 1.0, 1.0);
    let pi = invariant_measure(&m, 0.0, &YDomain::Line { lo: -8.0, hi: 8.0, points: 4001 }).map_err(|e| e.to_string())?;
    let sup = pi
        .y
        .iter()
        .zip(&pi.density)
        .map(|(y, d)| (d - (-0.5 * y * y).exp() / (2.0 * PI).sqrt()).abs())
        .fold(0.0, f64::max);
    let battery = stationarity_battery(&m, 0.0, &pi);
    check(sup < 1e-6 && battery < 1e-6, format!("sup error {sup:.2e}, stationarity residual {battery:.2e}"))
}

fn supercritical_average() -> Outcome {
    let m = ou_quadratic(1.0, 1.0, 1.0, 1.0);
    let r = h0_supercritical(&m, 0.0, 1.0, &YDomain::default()).map_err(|e| e.to_string())?;
    check((r.value - 2.0).abs() < 1e-3, format!("H0 = {:.10} (quadrature error {:.1e})", r.value, r.quad_error))
}

/// Periodic model with random smooth coefficients and, half of the time,
/// atomic jumps in both components.
fn random_model(rng: &mut ChaCha8Rng) -> SlowFastModel {
    let c0 = rng.gen_range(0.5..2.0);
    let c1 = rng.gen_range(-0.9..0.9) * c0;
    let f1 = rng.gen_range(0.0..TAU);
    let a0 = rng.gen_range(-0.5..0.5);
    let a1 = rng.gen_range(-2.0..2.0);
    let a2 = rng.gen_range(-1.0..1.0);
    let f2 = rng.gen_range(0.0..TAU);
    let s0 = rng.gen_range(0.5..1.5);
    let s1 = rng.gen_range(-0.4..0.4) * s0;
    let rho = rng.gen_range(-0.8..0.8);
    let coeffs = CoefficientSet::zero()
        .with_sigma1(move |x: f64, y: f64| (c0 + c1 * (y + f1).sin()).sqrt() * (1.0 + 0.1 * x.sin()))
        .with_b2(move |_, y: f64| a0 + a1 * (y + f2).sin() + a2 * (2.0 * y).cos())
        .with_sigma2(move |_, y: f64| s0 + s1 * (y + f1).cos())
        .with_rho(rho)
        .unwrap()
        .with_period(TAU)
        .unwrap();
    if rng.gen_bool(0.5) {
        let z1 = rng.gen_range(0.2..1.0);
        let w1 = rng.gen_range(0.1..1.0);
        let z2 = rng.gen_range(0.1..2.0);
        let w2 = rng.gen_range(0.1..2.0);
        let k = rng.gen_range(0.0..0.5);
        let coeffs = coeffs
            .with_k1(JumpKernel::linear(|_, _| 1.0))
            .with_k2(JumpKernel::linear(move |_, y: f64| 1.0 + k * y.sin()));
        SlowFastModel::new(
            coeffs,
            LevyMeasureModel::atomic(&[(z1, w1), (-0.5 * z1, 0.5 * w1)]).unwrap(),
            LevyMeasureModel::atomic(&[(z2, w2), (-z2, 0.3 * w2)]).unwrap(),
        )
    } else {
        SlowFastModel::diffusion(coeffs)
    }
}

fn critical_eigenvalue() -> Outcome {
    let opts = EigenOptions::default();
    // constant potential
    let c = CoefficientSet::zero()
        .with_sigma1(|_, _| 1.3)
        .with_b2(|_, y: f64| -y.sin())
        .with_sigma2(|_, _| 0.8)
        .with_period(TAU)
        .unwrap();
    let m = SlowFastModel::diffusion(c);
    let grid = FastGrid::periodic(TAU, 150).unwrap();
    let lam = slowfast_ldp::hamiltonian::h0_critical_eigen(&m, 0.0, 0.9, &grid, &opts).map_err(|e| e.to_string())?.eigenvalue;
    let const_err = (lam - 1.69 * 0.81).abs();

    // shift covariance
    let ou = ou_quadratic(1.0, 1.0, 1.0, 1.0);
    let line = FastGrid::line(-8.0, 8.0, 200).unwrap();
    let gen = DiscreteGenerator::tilted(&ou, 0.0, 1.0, line.clone()).unwrap();
    let v = potential_on_grid(&ou, 0.0, 1.0, &line).unwrap();
    let tight = EigenOptions { tol: 1e-13, ..opts };
    let a = principal_eigen(&gen, &v, &tight).map_err(|e| e.to_string())?;
    let shifted: Vec<f64> = v.iter().map(|x| x + 3.7).collect();
    let b = principal_eigen(&gen, &shifted, &tight).map_err(|e| e.to_string())?;
    let shift_err = (b.eigenvalue - a.eigenvalue - 3.7).abs();

    // power iteration against the dense solver on 200 points
    let p = principal_eigen(&gen, &v, &opts).map_err(|e| e.to_string())?;
    let dense = dense_principal_eigenvalue(&gen, &v);
    let dense_err = (p.eigenvalue - dense).abs();

    // bounds on random models
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = f64::NEG_INFINITY;
    for _ in 0..50 {
        let m = random_model(&mut rng);
        let x = rng.gen_range(-1.0..1.0);
        let pp = rng.gen_range(-2.0..2.0);
        let n = rng.gen_range(60..140);
        let grid = FastGrid::periodic(TAU, n).unwrap();
        let gen = DiscreteGenerator::tilted(&m, x, pp, grid.clone()).unwrap();
        let v = potential_on_grid(&m, x, pp, &grid).unwrap();
        let r = principal_eigen(&gen, &v, &opts).map_err(|e| e.to_string())?;
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let slack = 1e-9 * r.eigenvalue.abs().max(1.0);
        worst = worst.max(lo - r.eigenvalue - slack).max(r.eigenvalue - hi - slack);
    }
    check(
        const_err < 1e-10 && shift_err < 1e-10 && dense_err <= 1e-8 && worst <= 0.0,
        format!(
            "constant-V error {const_err:.1e}, shift error {shift_err:.1e}, dense gap {dense_err:.1e} (lambda = {:.6}), bound excess {:.1e}",
            p.eigenvalue,
            worst.max(0.0)
        ),
    )
}

fn dv_never_exceeds_eigenvalue() -> Outcome {
    let opts = EigenOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = f64::NEG_INFINITY;
    let mut tightest = f64::INFINITY;
    let f1 = |y: f64| (0.3 * y.cos()).exp();
    let f2 = |y: f64| 1.0 + 0.5 * y.sin();
    let f3 = |y: f64| 2.0 + (2.0 * y).cos();
    for _ in 0..50 {
        let m = random_model(&mut rng);
        let x = rng.gen_range(-1.0..1.0);
        let p = rng.gen_range(-2.0..2.0);
        let n = rng.gen_range(40..90);
        let grid = FastGrid::periodic(TAU, n).unwrap();
        let gen = DiscreteGenerator::tilted(&m, x, p, grid.clone()).unwrap();
        let v = potential_on_grid(&m, x, p, &grid).unwrap();
        let lam = principal_eigen(&gen, &v, &opts).map_err(|e| e.to_string())?;
        let stationary = gen.stationary(&opts).map_err(|e| e.to_string())?;
        let uniform = vec![1.0 / n as f64; n];
        let mut random: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
        let s: f64 = random.iter().sum();
        random.iter_mut().for_each(|r| *r /= s);
        let mut tilted: Vec<f64> = stationary.iter().zip(&lam.eigenfunction).map(|(a, b)| a * b * b).collect();
        let s: f64 = tilted.iter().sum();
        tilted.iter_mut().for_each(|r| *r /= s);
        let b = dv_bound(&gen, &v, &[stationary, uniform, random, tilted], &[&f1, &f2, &f3]).map_err(|e| e.to_string())?;
        worst = worst.max(b.value - lam.eigenvalue);
        tightest = tightest.min(lam.eigenvalue - b.value);
    }
    check(worst <= 1e-8, format!("max(bound - lambda) = {worst:.2e}; smallest gap {tightest:.2e}"))
}

fn regime_sandwich() -> Outcome {
    let xs = [-1.0, 0.0, 1.0];
    let ps = linspace(-1.5, 1.5, 9);
    let mut family: Vec<(String, SlowFastModel, Option<(f64, f64)>)> = Vec::new();
    for (s0, s2, th, sg) in [(1.0, 1.0, 1.0, 1.0), (0.5, 2.0, 2.0, 0.7), (2.0, 0.3, 0.5, 1.2)] {
        family.push((format!("ou({s0},{s2},{th},{sg})"), ou_quadratic(s0, s2, th, sg), Some((-8.0, 8.0))));
    }
    for (amp, kappa, sigma2) in [(0.5, 1.0, 1.0), (-0.8, 2.0, 0.6), (0.3, 0.0, 1.5)] {
        let m = presets::build(
            "sinusoidal-subcritical",
            &params(&[
                ("amp", amp),
                ("kappa", kappa),
                ("sigma2", sigma2),
                ("rho", 0.0),
                ("drift", 0.2),
                ("jump_size", 0.5),
                ("jump_mass", 0.0),
            ]),
        )
        .unwrap();
        family.push((format!("sin({amp},{kappa},{sigma2})"), m, None));
    }
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut entries = 0;
    for (name, m, window) in &family {
        let s = H0Settings {
            eigen_points: 400,
            scan_points: 4001,
            window: *window,
            ..Default::default()
        };
        let tabs: Vec<HamiltonianTable> = [Regime::Supercritical, Regime::Critical, Regime::Subcritical]
            .iter()
            .map(|r| HamiltonianTable::build(m, *r, &xs, &ps, &s))
            .collect::<Result<_, _>>()
            .map_err(|e| format!("{name}: {e}"))?;
        for i in 0..xs.len() {
            for j in 0..ps.len() {
                let (a, b, c) = (tabs[0].values[i][j], tabs[1].values[i][j], tabs[2].values[i][j]);
                worst = worst.max(a - b).max(b - c);
                entries += 1;
            }
        }
    }
    check(worst <= 1e-9, format!("{entries} entries, worst ordering violation {worst:.2e}"))
}

fn hj_solver() -> Outcome {
    let ham = FnHamiltonian(|p: f64| p * p);
    let opts = SolveOptions { snapshots: Some(2), ..Default::default() };
    let pq = linspace(-8.0, 8.0, 1601);
    let hq: Vec<f64> = pq.iter().map(|p| p * p).collect();
    let conj = legendre_transform(&pq, &hq, &linspace(-12.0, 12.0, 24001)).map_err(|e| e.to_string())?;
    let q = |s: f64| conj.eval(s);
    let t = 0.5;

    // linear data at dx = 1/400 against the Hopf-Lax oracle
    let dx = 1.0 / 400.0;
    let (x, inner) = padded_grid(-1.0, 1.0, dx, t, 2.0, opts.cfl).unwrap();
    let f = solve_hj(&ham, &|y| y, &x, t, &opts).map_err(|e| e.to_string())?;
    let mut lin_err: f64 = 0.0;
    for i in inner.clone().step_by(20) {
        let oracle = hopf_lax(&|y| y, &q, t, x[i], (x[i] - 3.0, x[i] + 3.0), 6001).map_err(|e| e.to_string())?;
        lin_err = lin_err.max((f.terminal()[i] - oracle).abs());
    }

    // grid convergence on smooth bounded data
    let h = |y: f64| y.tanh();
    let mut errs = Vec::new();
    for dx in [1.0 / 100.0, 1.0 / 200.0, 1.0 / 400.0] {
        let (x, inner) = padded_grid(-1.0, 1.0, dx, t, 2.0, opts.cfl).unwrap();
        let f = solve_hj(&ham, &h, &x, t, &opts).map_err(|e| e.to_string())?;
        let mut e: f64 = 0.0;
        let stride = ((0.05 / dx).round() as usize).max(1);
        for i in inner.step_by(stride) {
            let oracle = hopf_lax(&h, &q, t, x[i], (x[i] - 3.0, x[i] + 3.0), 6001).map_err(|e| e.to_string())?;
            e = e.max((f.terminal()[i] - oracle).abs());
        }
        errs.push(e);
    }
    let ratios = [errs[0] / errs[1], errs[1] / errs[2]];
    let ratio_ok = ratios.iter().all(|r| (r - 2.0).abs() <= 0.4);

    // discrete comparison on random ordered pairs
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let x = linspace(-3.0, 3.0, 241);
    let paired = SolveOptions { snapshots: None, speed: Some(10.0), ..Default::default() };
    let mut comparison_ok = true;
    for _ in 0..20 {
        let c = rng.gen_range(-1.0..1.0);
        let w = rng.gen_range(0.2..1.5);
        let hgt = rng.gen_range(0.5..2.0);
        let lift = rng.gen_range(0.0..0.3);
        let bc = rng.gen_range(-1.0..1.0);
        let h1 = TerminalFn::TanhRamp { center: c, width: w, height: hgt };
        let b = TerminalFn::Bump { center: bc, width: 0.5, height: 0.4 };
        let lo = move |y: f64| h1.eval(y);
        let hi = move |y: f64| h1.eval(y) + lift + b.eval(y);
        let a = solve_hj(&ham, &lo, &x, 0.7, &paired).map_err(|e| e.to_string())?;
        let bb = solve_hj(&ham, &hi, &x, 0.7, &paired).map_err(|e| e.to_string())?;
        for (ra, rb) in a.values.iter().zip(&bb.values) {
            comparison_ok &= ra.iter().zip(rb).all(|(u1, u2)| u1 <= u2);
        }
    }
    check(
        lin_err < 1e-3 && ratio_ok && comparison_ok,
        format!(
            "linear-data error {lin_err:.1e}; smooth-data errors {:.2e}/{:.2e}/{:.2e}, ratios {:.2}, {:.2}; comparison {}",
            errs[0],
            errs[1],
            errs[2],
            ratios[0],
            ratios[1],
            if comparison_ok { "holds" } else { "violated" }
        ),
    )
}

fn legendre_machinery() -> Outcome {
    let p = linspace(-6.0, 6.0, 1201);
    let h: Vec<f64> = p.iter().map(|v| v * v).collect();
    let qs = linspace(-8.0, 8.0, 161);
    let c = legendre_transform(&p, &h, &qs).map_err(|e| e.to_string())?;
    let conj_err = qs.iter().zip(&c.values).map(|(q, v)| (v - q * q / 4.0).abs()).fold(0.0, f64::max);
    let back_p = linspace(-4.0, 4.0, 81);
    let back = legendre_transform(&qs, &c.values, &back_p).map_err(|e| e.to_string())?;
    let inv_err = back_p.iter().zip(&back.values).map(|(p, v)| (v - p * p).abs()).fold(0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut gap: f64 = 0.0;
    let cases: [(&str, fn(f64) -> f64); 3] = [("p^2", |p| p * p), ("p^4", |p| p.powi(4)), ("cosh-1", |p| p.cosh() - 1.0)];
    for (_, f) in cases {
        let p = linspace(-4.0, 4.0, 8001);
        let hv: Vec<f64> = p.iter().map(|&v| f(v)).collect();
        let rf = RateFunction::from_samples(&p, &hv, &linspace(-20.0, 20.0, 20001)).map_err(|e| e.to_string())?;
        for _ in 0..20 {
            let (x, x0, t) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(0.5..2.0));
            let a = rf.eval(x, x0, t).map_err(|e| e.to_string())?.value;
            let b = rate_from_linear_family(&f, x, x0, t, &p).map_err(|e| e.to_string())?.value;
            gap = gap.max((a - b).abs());
        }
    }
    check(
        conj_err < 1e-8 && inv_err < 1e-8 && gap < 1e-4,
        format!("conjugate error {conj_err:.1e}, involution error {inv_err:.1e}, rate duality gap {gap:.1e}"),
    )
}

fn tail_rate() -> Outcome {
    let start = Instant::now();
    let s = McSettings { paths: 1_000_000, seed: 1, max_dt: 0.01 };
    let t = tail_probability_rate(&brownian(), 1.5, 1.0, 0.0, 0.0, (0.9, 1.1), &[0.02], &s).map_err(|e| e.to_string())?;
    let row = &t.rows[0];
    let secs = start.elapsed().as_secs_f64();
    let target = 0.2025;
    match row.rate {
        Some(r) => check(
            (r - target).abs() <= 0.25 * target && secs < 600.0,
            format!("hits {}, rate {r:.4} vs {target} (rel {:.1}%); {secs:.1}s", row.hits, 100.0 * (r - target) / target),
        ),
        None => Err(format!("no hits; rate lower bound {:.4}; {secs:.1}s", row.rate_lower_bound)),
    }
}

fn prelimit_consistency() -> Outcome {
    let m = presets::build(
        "sinusoidal-subcritical",
        &params(&[
            ("amp", 0.5),
            ("kappa", 1.0),
            ("sigma2", 0.8),
            ("rho", 0.4),
            ("drift", 0.3),
            ("jump_size", 0.6),
            ("jump_mass", 0.7),
        ]),
    )
    .unwrap();
    let x0 = 0.7;
    let hfun = |x: f64| (0.5 * x * x, x, 1.0);
    let p = hfun(x0).1;
    let grid = FastGrid::periodic(TAU, 200).unwrap();
    let gen = DiscreteGenerator::tilted(&m, x0, p, grid.clone()).unwrap();
    let v = potential_on_grid(&m, x0, p, &grid).unwrap();
    let eig = principal_eigen(&gen, &v, &EigenOptions { tol: 1e-11, ..Default::default() }).map_err(|e| e.to_string())?;
    let nodes = [0usize, 37, 101, 150];
    let mut errs = Vec::new();
    for eps in [1e-1, 1e-2, 1e-3] {
        let regime = RegimeParams::new(eps, 2.0).unwrap();
        let u = CorrectorTestFn::new(&gen, &eig, &hfun, eps);
        let mut e: f64 = 0.0;
        for &i in &nodes {
            let val = eval_prelimit_h(&m, &regime, &u, x0, grid.y[i]).map_err(|e| e.to_string())?;
            e = e.max((val - eig.eigenvalue).abs());
        }
        errs.push(e);
    }
    let orders = [(errs[0] / errs[1]).log10(), (errs[1] / errs[2]).log10()];
    let order = orders[0].min(orders[1]);
    check(
        order >= 0.9,
        format!(
            "errors {:.2e}/{:.2e}/{:.2e}, observed order {order:.3} (lambda = {:.6})",
            errs[0], errs[1], errs[2], eig.eigenvalue
        ),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let configs = [
        r#"{"model": {"preset": "ou-averaging", "params": {"s0": 1, "s2": 1, "theta": 1, "sigma2": 1, "rho": 0}},
            "regime": {"alpha": [3, 2, 1.5]},
            "experiment": {"kind": "hamiltonian-table", "x": {"lo": -1, "hi": 1, "points": 3},
                           "p": {"lo": -1, "hi": 1, "points": 5}, "settings": {"eigen_points": 100, "window": [-6, 6]}},
            "seed": 5, "output": "OUT/table"}"#,
        r#"{"model": {"preset": "stable-example", "params": {"alpha_stab1": 1.5, "alpha_stab2": 1.7, "r_min": 0.05,
                       "r_max": 5, "skew": 0.3, "sigma1": 1, "sigma2": 1, "theta": 1}},
            "regime": {"alpha": 2, "epsilon": [0.2, 0.1]},
            "experiment": {"kind": "mc-convergence", "h": {"shape": "tanh-ramp", "center": 0, "width": 1, "height": 1},
                           "t": 0.2, "x": 0, "y": 0, "paths": 500, "max_dt": 0.01,
                           "reference": {"from": "value", "value": 0}},
            "seed": 5, "output": "OUT/mc"}"#,
    ];
    let mut compared = 0;
    for cfg in configs {
        let text = cfg.replace("OUT", &dir.path().display().to_string());
        let first = run(&validate(parse_config(&text).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let read = |f: &str| std::fs::read(first.output_dir.join(f)).unwrap();
        let before: Vec<Vec<u8>> = first.files.iter().map(|f| read(f)).chain([read("manifest.json")]).collect();
        // second run on a two-thread pool
        let pool = rayon::ThreadPoolBuilder::new().num_threads(2).build().unwrap();
        let second = pool
            .install(|| run(&validate(parse_config(&text).unwrap()).unwrap()))
            .map_err(|e| e.to_string())?;
        let after: Vec<Vec<u8>> = second.files.iter().map(|f| read(f)).chain([read("manifest.json")]).collect();
        if before != after {
            return Err(format!("outputs of {} differ between runs", first.output_dir.display()));
        }
        compared += before.len();
    }
    check(true, format!("{compared} files byte-identical across runs"))
}

fn main() {
    let checks: [(&str, fn() -> Outcome); 11] = [
        ("gaussian log-moment", gaussian_log_moment),
        ("ou invariant density", ou_invariant_density),
        ("supercritical average", supercritical_average),
        ("critical eigenvalue", critical_eigenvalue),
        ("donsker-varadhan bound", dv_never_exceeds_eigenvalue),
        ("regime ordering", regime_sandwich),
        ("hamilton-jacobi solver", hj_solver),
        ("legendre machinery", legendre_machinery),
        ("tail rate", tail_rate),
        ("prelimit consistency", prelimit_consistency),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in checks.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|s| name.contains(s.as_str())) {
            continue;
        }
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(d) => println!("acceptance {:>2} {name}: PASS ({d})", i + 1),
            Err(d) => {
                failed += 1;
                println!("acceptance {:>2} {name}: FAIL ({d})", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance check(s) failed");
        std::process::exit(1);
    }
}
