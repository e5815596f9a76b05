//! Rate function from a tabulated Hamiltonian, two ways.

use slowfast_ldp::hjb::{rate_from_linear_family, RateFunction};
use slowfast_ldp::quad::linspace;

fn main() -> slowfast_ldp::Result<()> {
    let ham = |p: f64| p.cosh() - 1.0;
    let p = linspace(-5.0, 5.0, 4001);
    let h: Vec<f64> = p.iter().map(|&v| ham(v)).collect();
    let rf = RateFunction::from_samples(&p, &h, &linspace(-30.0, 30.0, 12001))?;
    for x in [-1.0, 0.0, 0.5, 1.5] {
        let a = rf.eval(x, 0.0, 1.0)?;
        let b = rate_from_linear_family(&ham, x, 0.0, 1.0, &p)?;
        println!("I({x:+.1}) = {:.6}  (linear family {:.6})", a.value, b.value);
    }
    Ok(())
}
