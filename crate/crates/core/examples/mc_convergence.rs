//! Monte Carlo log-functional along a ladder of epsilon values.

use slowfast_ldp::hjb::TerminalFn;
use slowfast_ldp::mc::{convergence_study, McSettings};
use slowfast_ldp::model::presets;
use std::collections::BTreeMap;

fn main() -> slowfast_ldp::Result<()> {
    let params: BTreeMap<String, f64> = [("sigma", 1.0), ("drift", 0.0)].into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    let model = presets::build("brownian-slow", &params)?;
    let h = TerminalFn::ClippedLinear { slope: 1.0, lo: -20.0, hi: 20.0 };
    let settings = McSettings { paths: 20_000, seed: 3, max_dt: 0.01 };
    // U = a^2 t for the Gaussian slow component
    let table = convergence_study(&model, 2.0, &[0.4, 0.2, 0.1], &h, 0.5, 0.0, 0.0, 0.5, &settings)?;
    table.write_csv(std::io::stdout().lock())
}
