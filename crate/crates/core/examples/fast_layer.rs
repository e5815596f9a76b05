//! Invariant measure of the frozen fast process and its stationarity residual.

use slowfast_ldp::fastlayer::{invariant_measure, stationarity_battery, YDomain};
use slowfast_ldp::model::presets;
use std::collections::BTreeMap;

fn main() -> slowfast_ldp::Result<()> {
    let params: BTreeMap<String, f64> = [("amp", 0.5), ("kappa", 1.0), ("sigma2", 0.8), ("rho", 0.0), ("drift", 0.2), ("jump_size", 0.5), ("jump_mass", 0.0)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    let model = presets::build("sinusoidal-subcritical", &params)?;
    for x in [-1.0, 0.0, 1.0] {
        let pi = invariant_measure(&model, x, &YDomain::default())?;
        let mean_cos = pi.expect(|y| y.cos());
        println!("x = {x:+.1}: E[cos Y] = {mean_cos:+.6}, residual {:.2e}", stationarity_battery(&model, x, &pi));
    }
    Ok(())
}
