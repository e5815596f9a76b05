//! Effective Hamiltonian in all three regimes on a small (x, p) grid.

use slowfast_ldp::hamiltonian::{H0Settings, HamiltonianTable};
use slowfast_ldp::model::{presets, Regime};
use slowfast_ldp::quad::linspace;
use std::collections::BTreeMap;

fn main() -> slowfast_ldp::Result<()> {
    let params: BTreeMap<String, f64> = [("s0", 1.0), ("s2", 1.0), ("theta", 1.0), ("sigma2", 1.0), ("rho", 0.0)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    let model = presets::build("ou-averaging", &params)?;
    let settings = H0Settings { window: Some((-8.0, 8.0)), ..Default::default() };
    let ps = linspace(-1.0, 1.0, 5);
    println!("{:>8} {:>12} {:>12} {:>12}", "p", "super", "critical", "sub");
    let tables: Vec<HamiltonianTable> = [Regime::Supercritical, Regime::Critical, Regime::Subcritical]
        .iter()
        .map(|r| HamiltonianTable::build(&model, *r, &[0.0], &ps, &settings))
        .collect::<Result<_, _>>()?;
    for (j, p) in ps.iter().enumerate() {
        println!(
            "{p:>8.3} {:>12.6} {:>12.6} {:>12.6}",
            tables[0].values[0][j], tables[1].values[0][j], tables[2].values[0][j]
        );
    }
    Ok(())
}
