//! Flux classes on T^2 x S^1 and the factorization identity.
use cosymplectic::catalog;
use cosymplectic::flux::{factorization_check, flux, HomologyBasis};
use cosymplectic::forms::{d, Form};

fn main() -> cosymplectic::error::Result<()> {
    let s = catalog::t2s1();
    let grid = s.chart.grid(16, 17);
    let basis = HomologyBasis::coordinate_circles(&s.chart, grid.first_point())?;
    let isotopies = [
        ("reeb-flow", catalog::reeb_flow(1.0).1),
        ("rotation(1, 2)", catalog::torus_rotation(&[1.0], &[2.0], 0.0, 0.0)?.1),
        ("shear(0.5)", catalog::shear(0.5).1),
    ];
    for (name, iso) in &isotopies {
        let c = flux(&s, iso, &basis, Some(32), 64, &grid, 1e-6)?;
        let shown: Vec<String> = c.labels.iter().zip(&c.coefficients).map(|(l, v)| format!("{l} {v:+.6}")).collect();
        println!("{name:<15} {}", shown.join("  "));
    }

    let cos = Form::of(3, 0, cosymplectic::pointfn!(3 => 1, |_t, p| [p[0].cos()]));
    let alphas = [("dtheta1", Form::dx(3, 0)), ("ds", Form::dx(3, 2)), ("d cos", d(&cos))];
    for (name, iso) in &isotopies[..2] {
        for (an, a) in &alphas {
            let r = factorization_check(&s, iso, a, Some(16), &grid, 1e-8)?;
            println!("factorization {name:<15} {an:<8} lhs {:+.6} rhs {:+.6} rel {:.1e}", r.lhs, r.rhs, r.relative);
        }
    }
    Ok(())
}
