//! Lax-Friedrichs solution of U_t = H(U_x) with H(p) = p^2 against Hopf-Lax.

use slowfast_ldp::hjb::{hopf_lax, legendre_transform, padded_grid, solve_hj, FnHamiltonian, SolveOptions, TerminalFn};
use slowfast_ldp::quad::linspace;

fn main() -> slowfast_ldp::Result<()> {
    let h = TerminalFn::TanhRamp { center: 0.0, width: 0.5, height: 1.0 };
    let data = move |x: f64| h.eval(x);
    let ham = FnHamiltonian(|p: f64| p * p);
    let t = 0.5;
    let opts = SolveOptions::default();
    let (x, inner) = padded_grid(-1.0, 1.0, 1.0 / 200.0, t, 4.0, opts.cfl)?;
    let field = solve_hj(&ham, &data, &x, t, &opts)?;

    let p = linspace(-8.0, 8.0, 1601);
    let hp: Vec<f64> = p.iter().map(|p| p * p).collect();
    let conj = legendre_transform(&p, &hp, &linspace(-12.0, 12.0, 12001))?;
    for i in inner.step_by(50) {
        let exact = hopf_lax(&data, &|q| conj.eval(q), t, x[i], (x[i] - 3.0, x[i] + 3.0), 4001)?;
        println!("x = {:+.3}: U = {:.6}, Hopf-Lax {:.6}", x[i], field.terminal()[i], exact);
    }
    Ok(())
}
