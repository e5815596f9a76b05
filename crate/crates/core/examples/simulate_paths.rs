//! One slow/fast path of the stable-jump preset, written as CSV to stdout.

use slowfast_ldp::model::{presets, RegimeParams};
use slowfast_ldp::simulate::{simulate_slow_fast, TimeGrid};
use std::collections::BTreeMap;

fn main() -> slowfast_ldp::Result<()> {
    let params: BTreeMap<String, f64> = [
        ("alpha_stab1", 1.5),
        ("alpha_stab2", 1.7),
        ("r_min", 0.05),
        ("r_max", 5.0),
        ("skew", 0.3),
        ("sigma1", 1.0),
        ("sigma2", 1.0),
        ("theta", 1.0),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    let model = presets::build("stable-example", &params)?;
    let regime = RegimeParams::new(0.1, 2.0)?;
    // the step must resolve the fast time scale
    let grid = TimeGrid::covering(1.0, regime.delta().min(0.01))?;
    let path = simulate_slow_fast(&model, &regime, &grid, 0.0, 0.0, 7, 0)?;
    eprintln!("{} steps, {} jumps, digest {}", grid.steps, path.jumps.len(), path.digest());
    path.write_csv(std::io::stdout().lock())
}
