//! Verify every catalog structure and solve for its Reeb field.
use cosymplectic::catalog;
use cosymplectic::cosym::{reeb_field, verify_structure};

fn main() -> cosymplectic::error::Result<()> {
    for (id, about) in catalog::STRUCTURES {
        let s = catalog::structure(id)?;
        let grid = s.chart.default_grid();
        let grid = s.chart.sample_grid(&grid)?;
        let r = verify_structure(&s, 0.0, &grid, 1e-10);
        let xi = reeb_field(&s, &grid)?;
        let p = grid.first_point();
        println!("{id:<8} {about}");
        println!(
            "         |d eta| {:.1e}  |d omega| {:.1e}  min|det A| {:.4}  xi(p0) = {:?}  pass {}",
            r.d_eta,
            r.d_omega,
            r.min_det,
            xi.xi.eval(p),
            r.pass
        );
    }
    Ok(())
}
