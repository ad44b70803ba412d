use cosymplectic::catalog;
use cosymplectic::cosym::{
    apply_i, classify_field, decompose, decomposition_residuals, invert_i, reeb_field, verify_structure,
};
use cosymplectic::forms::{Form, VectorField};

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
}

#[test]
fn reeb_fields_of_the_catalog() {
    for (id, want) in [("t2s1", [0.0, 0.0, 1.0]), ("darboux", [0.0, 0.0, 1.0]), ("twisted", [0.0, -1.0, 1.0])] {
        let s = catalog::structure(id).unwrap();
        let grid = s.chart.grid(8, 9);
        let r = reeb_field(&s, &grid).unwrap();
        assert!(r.residual_eta < 1e-12 && r.residual_omega < 1e-12, "{id}");
        for p in grid.points().step_by(41) {
            assert!(close(&r.xi.eval(p), &want, 1e-12), "{id} at {p:?}");
        }
    }
}

#[test]
fn structure_map_round_trip_on_darboux() {
    let s = catalog::darboux();
    let x = invert_i(&s, &Form::dx(3, 1));
    let p = [0.3, -0.2, 0.7];
    assert!(close(&x.eval(&p), &[1.0, 0.0, 0.0], 1e-14));
    // I(d/dx) = dy, and back
    let a = apply_i(&s, &VectorField::coordinate(3, 0));
    assert!(close(&a.eval(&p), &[0.0, 1.0, 0.0], 1e-14));
    let y = invert_i(&s, &apply_i(&s, &VectorField::constant(&[0.5, -1.0, 2.0])));
    assert!(close(&y.eval(&p), &[0.5, -1.0, 2.0], 1e-13));
}

#[test]
fn standard_structures_verify() {
    for id in ["t2s1", "d2s1", "darboux", "twisted"] {
        let s = catalog::structure(id).unwrap();
        let r = verify_structure(&s, 0.0, &s.chart.grid(8, 9), 1e-10);
        assert!(r.pass, "{id}: {:?}", r.failures);
        assert!(r.min_det > 0.9, "{id}: {}", r.min_det);
    }
}

#[test]
fn z_dilation_is_almost_with_unit_rate() {
    let (s, x) = catalog::field("z-dilation").unwrap();
    let grid = s.chart.grid(8, 9);
    let c = classify_field(&s, &x, 0.0, &grid, 1e-8).unwrap();
    assert!(!c.cosymplectic && c.almost_cosymplectic);
    assert!((c.mu.min - 1.0).abs() < 1e-12 && (c.mu.max - 1.0).abs() < 1e-12);
    assert!(c.almost_co_hamiltonian);
    assert!(c.eta_of_x_constant.is_none());
}

#[test]
fn rotation_field_is_cosymplectic_but_not_hamiltonian() {
    let (s, x) = catalog::field("dtheta1").unwrap();
    let c = classify_field(&s, &x, 0.0, &s.chart.grid(8, 9), 1e-8).unwrap();
    assert!(c.cosymplectic && !c.co_hamiltonian);
    assert!(c.residuals.harmonic_part > 0.5);
    assert_eq!(c.eta_of_x_constant, Some(0.0));
}

#[test]
fn hamiltonian_field_is_co_hamiltonian() {
    let (s, x) = catalog::field("hamiltonian").unwrap();
    let c = classify_field(&s, &x, 0.0, &s.chart.grid(16, 17), 1e-8).unwrap();
    assert!(c.cosymplectic && c.co_hamiltonian);
}

#[test]
fn decomposition_of_constant_fields() {
    let s = catalog::darboux();
    let grid = s.chart.grid(4, 5);
    let p = [0.1, 0.2, -0.3];
    for (x, w, e) in [
        ([1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]),
        ([0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0]),
        ([1.0, 0.0, 2.0], [1.0, 0.0, 0.0], [0.0, 0.0, 2.0]),
    ] {
        let f = VectorField::constant(&x);
        let dec = decompose(&s, &f);
        assert!(close(&dec.x_omega.eval(&p), &w, 1e-14), "{x:?}");
        assert!(close(&dec.x_eta.eval(&p), &e, 1e-14), "{x:?}");
        let r = decomposition_residuals(&s, &f, &dec, 0.0, &grid);
        assert!(r.sum < 1e-14 && r.eta_of_x_omega < 1e-14 && r.omega_of_x_eta < 1e-14);
    }
}

#[test]
fn twisted_decomposition_splits_along_reeb() {
    let s = catalog::twisted();
    let x = VectorField::constant(&[0.0, 0.0, 1.0]);
    let dec = decompose(&s, &x);
    let p = [0.0, 0.0, 0.0];
    // eta(X) = 1, so X_eta is the Reeb field itself
    assert!(close(&dec.x_eta.eval(&p), &[0.0, -1.0, 1.0], 1e-14));
    assert!(close(&dec.x_omega.eval(&p), &[0.0, 1.0, 0.0], 1e-14));
}
