//! Split fields into `X_omega + X_eta` and classify the catalog fields.
use cosymplectic::catalog;
use cosymplectic::cosym::{classify_field, decompose, decomposition_residuals};
use cosymplectic::forms::VectorField;

fn main() -> cosymplectic::error::Result<()> {
    let s = catalog::darboux();
    let grid = s.chart.grid(8, 9);
    let x = VectorField::constant(&[1.0, 0.0, 2.0]);
    let dec = decompose(&s, &x);
    let p = [0.1, 0.2, 0.3];
    println!("d/dx + 2 d/dz on the Darboux box");
    println!("  X_omega = {:?}", dec.x_omega.eval(&p));
    println!("  X_eta   = {:?}", dec.x_eta.eval(&p));
    println!("  residuals {:?}", decomposition_residuals(&s, &x, &dec, 0.0, &grid));

    println!();
    for (id, about) in catalog::FIELDS {
        let (s, x) = catalog::field(id)?;
        let c = classify_field(&s, &x, 0.0, &s.chart.grid(16, 17), 1e-8)?;
        println!("{id:<12} {about}");
        println!(
            "             cosymplectic {} almost {} co-hamiltonian {} almost-co-hamiltonian {} mu in [{:.3}, {:.3}]",
            c.cosymplectic, c.almost_cosymplectic, c.co_hamiltonian, c.almost_co_hamiltonian, c.mu.min, c.mu.max
        );
    }
    Ok(())
}
