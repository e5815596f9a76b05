//! Empirical decay rate of P(X_t in [0.9, 1.1]).

use slowfast_ldp::mc::{tail_probability_rate, McSettings};
use slowfast_ldp::model::presets;
use std::collections::BTreeMap;

fn main() -> slowfast_ldp::Result<()> {
    let params: BTreeMap<String, f64> = [("sigma", 1.0), ("drift", 0.0)].into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    let model = presets::build("brownian-slow", &params)?;
    let settings = McSettings { paths: 200_000, seed: 4, max_dt: 0.01 };
    let table = tail_probability_rate(&model, 1.5, 1.0, 0.0, 0.0, (0.9, 1.1), &[0.2, 0.1, 0.05], &settings)?;
    table.write_csv(std::io::stdout().lock())?;
    eprintln!("limit rate x^2/(4t) at x = 0.9: {:.4}", 0.81 / 4.0);
    Ok(())
}
