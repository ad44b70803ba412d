//! Lift the almost cosymplectic z-scaling to the symplectization and check
//! the conformal-factor identities along the way.
use cosymplectic::catalog;
use cosymplectic::isotopy::{conformal_rate_check, lift_almost, lift_cosymplectic, lifted_hamiltonian_check, CHECKPOINTS};

fn main() -> cosymplectic::error::Result<()> {
    let (s, iso) = catalog::z_scaling(1.0);
    let lifted = lift_almost(&s, &iso)?;
    let g = lifted.chart.grid(8, 9);
    println!("z-scaling, c = 1");
    println!("  lifted symplectic residual {:.1e}", lifted.symplectic_residual(&CHECKPOINTS, &g));
    println!("  lifted Hamiltonian residual {:.1e}", lifted_hamiltonian_check(&s, &iso, &lifted, &CHECKPOINTS, &g)?);

    let r = conformal_rate_check(&s, &iso, &CHECKPOINTS, &s.chart.grid(16, 17))?;
    println!("  |mu_t - fdot_t e^(-f_t)|   {:.4}", r.printed_form);
    println!("  |mu_t o psi_t - fdot_t|    {:.1e}", r.corrected_form);
    println!("  |psi_t^*(eta)(xi) - e^f_t| {:.1e}", r.reeb_factor);

    let (s, rot) = catalog::torus_rotation(&[1.0], &[2.0], 0.0, 0.0)?;
    let lifted = lift_cosymplectic(&s, &rot)?;
    let g = lifted.chart.grid(6, 7);
    println!("torus rotation lift residual {:.1e}", lifted.symplectic_residual(&CHECKPOINTS, &g));
    Ok(())
}
