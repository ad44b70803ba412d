//! Integrate a co-Hamiltonian flow, follow the energy along an orbit and scan
//! the time-one z-scaling map for fixed points.
use cosymplectic::catalog::{self, Params};
use cosymplectic::isotopy::{fixed_point_scan, orbit_energy_profile, DEFAULT_STEPS};

fn main() -> cosymplectic::error::Result<()> {
    let (s, iso) = catalog::isotopy("torus-hamiltonian", &Params::new(), DEFAULT_STEPS)?;
    let p = [0.3, 1.2, -0.5];
    let path = iso.trajectory(&p)?;
    println!("torus-hamiltonian from {p:?}");
    for k in (0..path.times.len()).step_by(path.times.len() / 4) {
        println!("  t = {:.2}  {:?}", path.times[k], path.points[k]);
    }
    let back = iso.time_one().eval_inv(&iso.time_one().eval(&p))?;
    println!("  round trip error {:.1e}", s.chart.distance(&back, &p));

    // G = cos(theta1) + 0.5 sin s grows along I^-1(dG) at rate eta(X)^2.
    let (s, g) = catalog::scalar("trig")?;
    let e = orbit_energy_profile(&s, &g, &[0.25, 0.25, 0.25], 1.0, DEFAULT_STEPS)?;
    println!(
        "orbit of trig: G {:.6} -> {:.6}, integral of eta(X)^2 {:.6}, identity residual {:.1e}",
        e.energy[0],
        e.energy.last().unwrap(),
        e.eta_sq_integral.last().unwrap(),
        e.identity_residual
    );

    let (s, iso) = catalog::z_scaling(1.0);
    let f = iso.records.log_factor.as_ref().map(|f| f.at_time(1.0));
    let pts = fixed_point_scan(&s.chart, &iso.at(1.0), f.as_ref(), &s.chart.grid(8, 9));
    println!("z-scaling time-one map: {} fixed points on the scan grid", pts.len());
    for q in pts.iter().take(3) {
        println!("  {:?}  |f| = {:?}", q.point, q.f_value);
    }
    Ok(())
}
