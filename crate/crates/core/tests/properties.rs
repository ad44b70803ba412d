//! Randomized invariants over the trig families of the catalog.

use cosymplectic::catalog::{self, TRIG_TERMS};
use cosymplectic::cosym::{invert_i, CosymplecticStructure};
use cosymplectic::flux::{flux, flux_additivity_check, HomologyBasis};
use cosymplectic::forms::{
    d, exterior_derivative, interior_product, lie_bracket, lie_derivative, pullback, Form, OneForm, VectorField,
};
use cosymplectic::isotopy::{compose_isotopies, integrate_flow, invert_isotopy, lift_cosymplectic, CHECKPOINTS};
use cosymplectic::manifold::Grid;
use cosymplectic::norms::{length, split_closed_form, LengthKind, LengthVersion, NormOptions, SectionSpec};
use proptest::prelude::*;
use std::f64::consts::PI;

fn trig(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, n * TRIG_TERMS)
}

/// Coefficients on the modes that do not involve `s`.
fn theta_modes() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, 5).prop_map(|c| {
        let mut v = vec![0.0; TRIG_TERMS];
        v[..5].copy_from_slice(&c);
        v
    })
}

fn cosym_field(st: &CosymplecticStructure, c: &[f64], h: &[f64]) -> VectorField {
    VectorField::constant(c).add(&invert_i(st, &d(&catalog::trig_scalar(h))))
}

fn grid(st: &CosymplecticStructure) -> Grid {
    st.chart.grid(6, 7)
}

fn rotation(a: f64, b: f64) -> cosymplectic::isotopy::Isotopy {
    catalog::torus_rotation(&[a], &[b], 0.0, 0.0).unwrap().1
}

fn closed(c: &[f64], h: &[f64]) -> OneForm {
    Form::constant(3, 1, c.to_vec()).add(&d(&catalog::trig_scalar(h)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn d_squared_vanishes(f in trig(1), a in trig(3)) {
        let st = catalog::t2s1();
        let g = grid(&st);
        prop_assert!(exterior_derivative(&d(&catalog::trig_scalar(&f))).max_abs(0.0, &g) < 1e-10);
        let a = catalog::trig_one_form(&a);
        prop_assert!(exterior_derivative(&exterior_derivative(&a)).max_abs(0.0, &g) < 1e-10);
    }

    #[test]
    fn cartan_formula(x in trig(3), a in trig(3)) {
        let st = catalog::t2s1();
        let (x, a) = (catalog::trig_field(&x), catalog::trig_one_form(&a));
        let lhs = lie_derivative(&x, &a);
        let rhs = d(&interior_product(&x, &a)).add(&interior_product(&x, &exterior_derivative(&a)));
        prop_assert!(lhs.sub(&rhs).max_abs(0.0, &grid(&st)) < 1e-8);
    }

    #[test]
    fn pullback_commutes_with_d(amp in -1.0..1.0f64, a in trig(3)) {
        let st = catalog::t2s1();
        let phi = catalog::shear(amp).1.time_one();
        let a = catalog::trig_one_form(&a);
        let dev = pullback(&phi, &exterior_derivative(&a)).sub(&exterior_derivative(&pullback(&phi, &a)));
        prop_assert!(dev.max_abs(0.0, &grid(&st)) < 1e-8);
    }

    #[test]
    fn bracket_of_cosymplectic_fields_is_hamiltonian(
        cx in prop::array::uniform3(-1.0..1.0f64), hx in theta_modes(),
        cy in prop::array::uniform3(-1.0..1.0f64), hy in theta_modes(),
    ) {
        let st = catalog::t2s1();
        let g = grid(&st);
        let x = cosym_field(&st, &cx, &hx);
        let y = cosym_field(&st, &cy, &hy);
        let br = lie_bracket(&x, &y);
        // I([X, Y]) = d(omega(Y, X)) for cosymplectic X, Y
        let pot = interior_product(&x, &interior_product(&y, &st.omega));
        let dev = cosymplectic::cosym::apply_i(&st, &br).sub(&d(&pot));
        prop_assert!(dev.max_abs(0.0, &g) < 1e-8);
        prop_assert!(interior_product(&br, &st.eta).max_abs(0.0, &g) < 1e-10);
    }

    #[test]
    fn reeb_transition_is_additive(a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let st = catalog::t2s1();
        let both = compose_isotopies(&st, &catalog::reeb_flow(a).1, &catalog::reeb_flow(b).1).unwrap();
        let dev = both.transition(&st).sub(&Form::constant(3, 0, vec![a + b])).max_abs(0.5, &grid(&st));
        prop_assert!(dev < 1e-10);
    }

    #[test]
    fn splitting_is_idempotent_and_linear(
        c1 in prop::array::uniform3(-2.0..2.0f64), h1 in trig(1),
        c2 in prop::array::uniform3(-2.0..2.0f64), h2 in trig(1),
        x in -2.0..2.0f64,
    ) {
        let st = catalog::t2s1();
        let g = st.chart.grid(8, 9);
        let sec = SectionSpec::CoefficientAverage;
        let (a, b) = (closed(&c1, &h1), closed(&c2, &h2));
        let sa = split_closed_form(&st.chart, &a, &sec, 0.0, &g, 1e-8).unwrap();
        let sb = split_closed_form(&st.chart, &b, &sec, 0.0, &g, 1e-8).unwrap();
        let again = split_closed_form(&st.chart, &sa.s_part, &sec, 0.0, &g, 1e-8).unwrap();
        prop_assert!(again.s_part.sub(&sa.s_part).max_abs(0.0, &g) < 1e-8);
        prop_assert!(again.osc < 1e-8);
        let sab = split_closed_form(&st.chart, &a.add(&b.scale(x)), &sec, 0.0, &g, 1e-8).unwrap();
        for k in 0..3 {
            prop_assert!((sab.coefficients[k] - sa.coefficients[k] - x * sb.coefficients[k]).abs() < 1e-8);
            prop_assert!((sa.coefficients[k] - c1[k]).abs() < 1e-8);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn flux_is_additive(a in -2.0..2.0f64, b in -2.0..2.0f64, speed in -2.0..2.0f64, amp in -1.0..1.0f64) {
        let st = catalog::t2s1();
        let g = grid(&st);
        let basis = HomologyBasis::coordinate_circles(&st.chart, g.first_point()).unwrap();
        let rot = rotation(a, b);
        let dev = flux_additivity_check(&st, &rot, &catalog::reeb_flow(speed).1, &basis, Some(16), 32, &g).unwrap();
        prop_assert!(dev < 1e-6, "rotation + reeb: {dev:e}");
        let dev = flux_additivity_check(&st, &catalog::shear(amp).1, &rot, &basis, Some(16), 32, &g).unwrap();
        prop_assert!(dev < 1e-6, "shear + rotation: {dev:e}");
    }

    #[test]
    fn rotation_flux_matches_closed_form(a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let st = catalog::t2s1();
        let g = grid(&st);
        let basis = HomologyBasis::coordinate_circles(&st.chart, g.first_point()).unwrap();
        let c = flux(&st, &rotation(a, b), &basis, Some(16), 32, &g, 1e-6).unwrap();
        prop_assert!((c.coefficients[0] + 2.0 * PI * b).abs() < 1e-6);
        prop_assert!((c.coefficients[1] - 2.0 * PI * a).abs() < 1e-6);
        prop_assert!(c.coefficients[2].abs() < 1e-6);
    }

    #[test]
    fn hamiltonian_flux_vanishes(h in theta_modes()) {
        let st = catalog::t2s1();
        let g = grid(&st);
        let x = invert_i(&st, &d(&catalog::trig_scalar(&h)));
        let iso = integrate_flow(&st.chart, &x, 40, "random-hamiltonian").unwrap();
        let basis = HomologyBasis::coordinate_circles(&st.chart, g.first_point()).unwrap();
        let c = flux(&st, &iso, &basis, None, 32, &g, 1e-6).unwrap();
        for v in c.coefficients {
            prop_assert!(v.abs() < 1e-6, "{v:e}");
        }
    }

    #[test]
    fn autonomous_flow_is_a_group(
        c in prop::array::uniform3(-1.0..1.0f64), h in theta_modes(),
        k1 in 0usize..20, k2 in 0usize..20,
    ) {
        let st = catalog::t2s1();
        let iso = integrate_flow(&st.chart, &cosym_field(&st, &c, &h), 40, "random").unwrap();
        let (a, b) = (k1 as f64 / 40.0, k2 as f64 / 40.0);
        for p in st.chart.grid(4, 5).points() {
            let lhs = iso.eval(a, &iso.eval(b, p));
            prop_assert!(st.chart.distance(&lhs, &iso.eval(a + b, p)) < 1e-10);
        }
    }

    #[test]
    fn lengths_are_symmetric(amp in 0.1..1.0f64) {
        let st = catalog::t2s1();
        let g = st.chart.grid(8, 9);
        let opts = NormOptions::default();
        let iso = catalog::shear(amp).1;
        let inv = invert_isotopy(&iso).unwrap();
        for version in [LengthVersion::Sup, LengthVersion::Integral] {
            let l = length(&st, &iso, LengthKind::CoHofer, version, 4, &g, &opts).unwrap().value;
            let li = length(&st, &inv, LengthKind::CoHofer, version, 4, &g, &opts).unwrap().value;
            prop_assert!((l - li).abs() < 1e-6 * (1.0 + l));
            prop_assert!(l > 0.0);
        }
    }

    #[test]
    fn lengths_satisfy_the_triangle_inequality(a1 in -1.0..1.0f64, a2 in -1.0..1.0f64) {
        let st = catalog::t2s1();
        let g = st.chart.grid(8, 9);
        let opts = NormOptions::default();
        let (p, q) = (catalog::shear(a1).1, catalog::cross_shear(a2).1);
        let pq = compose_isotopies(&st, &p, &q).unwrap();
        let l = |iso| length(&st, iso, LengthKind::CoHofer, LengthVersion::Integral, 4, &g, &opts).unwrap().value;
        prop_assert!(l(&pq) <= l(&p) + l(&q) + 1e-6);
    }

    #[test]
    fn lifts_are_symplectic(a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let st = catalog::t2s1();
        let lifted = lift_cosymplectic(&st, &rotation(a, b)).unwrap();
        let g = lifted.chart.grid(4, 5);
        prop_assert!(lifted.symplectic_residual(&CHECKPOINTS, &g) < 1e-8);
    }
}
