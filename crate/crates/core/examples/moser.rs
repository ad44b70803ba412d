//! Moser stability on T^2 x S^1: find the isotopy pulling the perturbed
//! structure back to the flat one, and watch the residual drop with the step.
use cosymplectic::catalog::{self, Params};
use cosymplectic::isotopy::moser_solve;

fn main() -> cosymplectic::error::Result<()> {
    for (id, about) in catalog::PROBLEMS {
        let p = catalog::problem(id, &Params::new())?;
        let grid = p.chart.grid(16, 17);
        println!("{id}: {about}");
        let mut last = None;
        for steps in [25, 50, 100] {
            let r = moser_solve(&p, steps, &grid, 1e-8)?;
            let worst = r.omega_residual.max(r.eta_residual);
            let ratio = last.map(|l: f64| l / worst);
            println!("  N = {steps:>3}  residual {worst:.3e}  ratio {}", ratio.map_or("-".into(), |q| format!("{q:.1}")));
            last = Some(worst);
        }
    }
    Ok(())
}
