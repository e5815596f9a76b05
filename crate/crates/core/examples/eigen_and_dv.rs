//! Principal eigenvalue of the tilted fast generator next to the
//! occupation-measure lower bound.

use slowfast_ldp::hamiltonian::{dv_bound, potential_on_grid, principal_eigen, DiscreteGenerator, EigenOptions, FastGrid};
use slowfast_ldp::model::presets;
use std::collections::BTreeMap;
use std::f64::consts::TAU;

fn main() -> slowfast_ldp::Result<()> {
    let params: BTreeMap<String, f64> = [("amp", 0.5), ("kappa", 1.0), ("sigma2", 0.8), ("rho", 0.4), ("drift", 0.3), ("jump_size", 0.6), ("jump_mass", 0.7)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    let model = presets::build("sinusoidal-subcritical", &params)?;
    let grid = FastGrid::periodic(TAU, 120)?;
    let opts = EigenOptions::default();
    for p in [-1.0, 0.5, 1.5] {
        let gen = DiscreteGenerator::tilted(&model, 0.0, p, grid.clone())?;
        let v = potential_on_grid(&model, 0.0, p, &grid)?;
        let eig = principal_eigen(&gen, &v, &opts)?;
        let stationary = gen.stationary(&opts)?;
        let uniform = vec![1.0 / grid.y.len() as f64; grid.y.len()];
        let bump = |y: f64| 1.0 + 0.3 * y.sin();
        let bound = dv_bound(&gen, &v, &[stationary, uniform], &[&bump])?;
        println!("p = {p:+.1}: lambda = {:.8} ({} iterations), bound = {:.8}", eig.eigenvalue, eig.iterations, bound.value);
    }
    Ok(())
}
