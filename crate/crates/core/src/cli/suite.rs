//! Registered checks behind `cosym suite`. Each entry produces one report; the
//! `crit` field ties an entry to the numbered acceptance list in the README.

use super::{reeb_oracle, reproduce, Comparison, RunReport, Settings, SCHEMA_VERSION};
use crate::catalog::{self, Params, TRIG_TERMS};
use crate::cosym::{
    classify_field, decompose, decomposition_residuals, exactness, invert_i, reeb_field, verify_structure,
    CosymplecticStructure,
};
use crate::error::Result;
use crate::flux::{factorization_check, flux, flux_additivity_check, HomologyBasis};
use crate::forms::{
    d, exterior_derivative, interior_product, lie_bracket, lie_derivative, pullback, Form, OneForm, ScalarField,
    VectorField,
};
use crate::isotopy::{
    compose_isotopies, conformal_rate_check, invert_isotopy, lift_almost, lift_cosymplectic, lifted_hamiltonian_check,
    moser_solve, Isotopy, CHECKPOINTS,
};
use crate::manifold::Grid;
use crate::norms::{
    length, section_equivalence_test, split_closed_form, LengthKind, LengthVersion, NormOptions, SectionSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;
use std::time::Instant;

pub struct SuiteEntry {
    pub name: &'static str,
    /// `invariants` or `golden`.
    pub tag: &'static str,
    pub crit: u8,
    pub run: fn(&Settings) -> Result<RunReport>,
}

pub fn suite_entries() -> Vec<SuiteEntry> {
    vec![
        SuiteEntry { name: "structures", tag: "invariants", crit: 1, run: structures },
        SuiteEntry { name: "reeb-solves", tag: "invariants", crit: 2, run: reeb_solves },
        SuiteEntry { name: "decomposition", tag: "invariants", crit: 3, run: decomposition },
        SuiteEntry { name: "moser", tag: "invariants", crit: 4, run: moser },
        SuiteEntry { name: "lifts", tag: "invariants", crit: 5, run: lifts },
        SuiteEntry { name: "flux", tag: "invariants", crit: 6, run: flux_suite },
        SuiteEntry { name: "reproduce-reeb-flow", tag: "golden", crit: 6, run: |s| reproduce("reeb-flow", &Params::new(), s) },
        SuiteEntry { name: "factorization", tag: "invariants", crit: 7, run: factorization },
        SuiteEntry { name: "reproduce-disk-rotation", tag: "golden", crit: 8, run: |s| reproduce("disk-rotation", &Params::new(), s) },
        SuiteEntry { name: "reproduce-torus-rotation", tag: "golden", crit: 8, run: |s| reproduce("torus-rotation", &Params::new(), s) },
        SuiteEntry { name: "conformal", tag: "invariants", crit: 9, run: conformal },
        SuiteEntry { name: "exterior-calculus", tag: "invariants", crit: 10, run: exterior_calculus },
        SuiteEntry { name: "bracket-closure", tag: "invariants", crit: 10, run: bracket_closure },
        SuiteEntry { name: "transition-cocycle", tag: "invariants", crit: 10, run: transition_cocycle },
        SuiteEntry { name: "length-properties", tag: "invariants", crit: 10, run: length_properties },
        SuiteEntry { name: "splitting", tag: "invariants", crit: 10, run: splitting },
        SuiteEntry { name: "section-equivalence", tag: "invariants", crit: 10, run: section_equivalence },
        SuiteEntry { name: "flow-group", tag: "invariants", crit: 10, run: flow_group },
    ]
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub schema_version: u32,
    pub tag: String,
    pub reports: Vec<RunReport>,
    pub passed: usize,
    pub failed: usize,
    pub pass: bool,
    pub failures: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

impl SuiteReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Run every entry whose tag matches (`all` matches everything), optionally
/// restricted to the named entries. Errors become failed reports.
pub fn run_suite(tag: &str, only: Option<&[String]>, s: &Settings) -> Result<SuiteReport> {
    if !matches!(tag, "all" | "invariants" | "golden") {
        return Err(crate::error::GeomError::Config(format!("unknown suite tag {tag:?}; use invariants, golden or all")));
    }
    let start = Instant::now();
    let mut reports = Vec::new();
    for e in suite_entries() {
        if tag != "all" && e.tag != tag {
            continue;
        }
        if let Some(names) = only {
            if !names.iter().any(|n| n == e.name) {
                continue;
            }
        }
        let r = match (e.run)(s) {
            Ok(r) => r,
            Err(err) => {
                let mut r = RunReport::new("suite", e.name, s);
                r.check(Comparison::holds("completed", false, "runner").with_note(&err.to_string()));
                r
            }
        };
        reports.push(r);
    }
    let passed = reports.iter().filter(|r| r.pass).count();
    let failed = reports.len() - passed;
    let failures = reports
        .iter()
        .flat_map(|r| r.failures().into_iter().map(move |f| format!("{}: {f}", r.example)))
        .collect();
    Ok(SuiteReport {
        schema_version: SCHEMA_VERSION,
        tag: tag.into(),
        reports,
        passed,
        failed,
        pass: failed == 0,
        failures,
        seconds: s.timing.then(|| start.elapsed().as_secs_f64()),
    })
}

fn report(name: &str, s: &Settings) -> RunReport {
    RunReport::new("suite", name, s)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn coeffs(r: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| r.gen_range(-scale..scale)).collect()
}

/// Trig coefficients restricted to modes without `s` (indices 0..5).
fn theta_only(r: &mut ChaCha8Rng, n_out: usize, scale: f64) -> Vec<f64> {
    let mut c = vec![0.0; n_out * TRIG_TERMS];
    for k in 0..n_out {
        for j in 0..5 {
            c[k * TRIG_TERMS + j] = r.gen_range(-scale..scale);
        }
    }
    c
}

fn small(st: &CosymplecticStructure) -> Grid {
    st.chart.grid(8, 9)
}

fn default_grid(st: &CosymplecticStructure, s: &Settings) -> Result<Grid> {
    s.grid_for(&st.chart)
}

// ----------------------------------------------------------------------------

fn structures(s: &Settings) -> Result<RunReport> {
    let mut rep = report("structures", s);
    for id in ["t2s1", "t4s1", "d2s1", "darboux", "twisted"] {
        let st = catalog::structure(id)?;
        let grid = default_grid(&st, s)?;
        let start = Instant::now();
        let r = verify_structure(&st, 0.0, &grid, 1e-10);
        let secs = start.elapsed().as_secs_f64();
        rep.check(Comparison::below(&format!("{id}/d_eta"), r.d_eta, 1e-10, "analytic"));
        rep.check(Comparison::below(&format!("{id}/d_omega"), r.d_omega, 1e-10, "analytic"));
        rep.check(Comparison::above(&format!("{id}/min_det"), r.min_det, 0.9, "pairing-matrix"));
        rep.value(&format!("{id}/grid"), &grid.shape);
        if s.timing {
            rep.check(Comparison::below(&format!("{id}/seconds"), secs, 5.0, "timing"));
        }
    }
    Ok(rep)
}

fn reeb_solves(s: &Settings) -> Result<RunReport> {
    let mut rep = report("reeb-solves", s);
    for (id, expected) in [("darboux", [0.0, 0.0, 1.0]), ("t2s1", [0.0, 0.0, 1.0]), ("twisted", [0.0, -1.0, 1.0])] {
        let st = catalog::structure(id)?;
        let grid = default_grid(&st, s)?;
        let r = reeb_field(&st, &grid)?;
        let (mut oracle, mut closed): (f64, f64) = (0.0, 0.0);
        for p in grid.points() {
            let x = r.xi.eval(p);
            let o = reeb_oracle(&st, p);
            for i in 0..3 {
                oracle = oracle.max((x[i] - o[i]).abs());
                closed = closed.max((x[i] - expected[i]).abs());
            }
        }
        rep.check(Comparison::below(&format!("{id}/oracle"), oracle, 1e-10, "linear-solve-oracle"));
        rep.check(Comparison::below(&format!("{id}/closed_form"), closed, 1e-10, "closed-form"));
    }
    Ok(rep)
}

fn decomposition(s: &Settings) -> Result<RunReport> {
    let mut rep = report("decomposition", s);
    let st = catalog::t2s1();
    let grid = small(&st);
    let mut r = rng(3);
    let (mut analytic, mut sampled, mut bracket): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..50 {
        let c = coeffs(&mut r, 3 * TRIG_TERMS, 1.0);
        let x = catalog::trig_field(&c);
        let dec = decompose(&st, &x);
        let res = decomposition_residuals(&st, &x, &dec, 0.0, &grid);
        analytic = analytic.max(res.sum).max(res.eta_of_x_omega).max(res.omega_of_x_eta);
        // The same field known only through values, so derivatives come from differencing.
        let xf = x.clone();
        let xs = VectorField::sampled(3, move |t, p, o| o.copy_from_slice(&xf.eval_t(t, p)));
        let dec = decompose(&st, &xs);
        let res = decomposition_residuals(&st, &xs, &dec, 0.0, &grid);
        sampled = sampled.max(res.sum).max(res.eta_of_x_omega).max(res.omega_of_x_eta);
        let y = random_cosymplectic(&st, &mut r);
        let yf = y.clone();
        let ys = VectorField::sampled(3, move |t, p, o| o.copy_from_slice(&yf.eval_t(t, p)));
        let dec = decompose(&st, &ys);
        bracket = bracket.max(lie_bracket(&dec.x_omega, &dec.x_eta).max_abs(0.0, &grid));
    }
    rep.check(Comparison::below("analytic_residual", analytic, 1e-8, "analytic"));
    rep.check(Comparison::below("finite_difference_residual", sampled, 1e-5, "finite-difference"));
    rep.check(Comparison::below("bracket_x_omega_x_eta", bracket, 1e-4, "finite-difference"));
    Ok(rep)
}

fn moser(s: &Settings) -> Result<RunReport> {
    let mut rep = report("moser", s);
    for id in ["moser-omega", "moser-eta"] {
        let p = catalog::problem(id, &Params::new())?;
        let grid = p.chart.grid(32, 33);
        let start = Instant::now();
        let fine = moser_solve(&p, 200, &grid, 1e-8)?;
        let secs = start.elapsed().as_secs_f64();
        let coarse = moser_solve(&p, 100, &grid, 1e-8)?;
        let (f, c) = (fine.omega_residual.max(fine.eta_residual), coarse.omega_residual.max(coarse.eta_residual));
        rep.value(&format!("{id}/residual_200"), f);
        rep.value(&format!("{id}/residual_100"), c);
        rep.check(Comparison::below(&format!("{id}/residual"), f, 1e-4, "pullback"));
        let ratio = if f > 1e-13 { c / f } else { f64::INFINITY };
        rep.value(&format!("{id}/halving_ratio"), ratio);
        rep.check(Comparison::above(&format!("{id}/halving_ratio"), ratio, 8.0, "fourth-order-convergence"));
        if s.timing {
            rep.check(Comparison::below(&format!("{id}/seconds"), secs, 60.0, "timing"));
        }
    }
    Ok(rep)
}

fn lifts(s: &Settings) -> Result<RunReport> {
    let mut rep = report("lifts", s);
    for (id, _) in catalog::ISOTOPIES {
        let (st, iso) = catalog::isotopy(id, &Params::new(), s.steps)?;
        let lifted = if iso.records.log_factor.is_some() { lift_almost(&st, &iso)? } else { lift_cosymplectic(&st, &iso)? };
        let g = lifted.chart.grid(6, 7);
        rep.check(Comparison::below(&format!("{id}/symplectic"), lifted.symplectic_residual(&CHECKPOINTS, &g), 1e-8, "analytic-jacobian"));
    }
    let (st, iso) = catalog::z_scaling(1.0);
    let lifted = lift_almost(&st, &iso)?;
    let g = lifted.chart.grid(8, 9);
    let h = lifted_hamiltonian_check(&st, &iso, &lifted, &CHECKPOINTS, &g)?;
    rep.check(Comparison::below("z-scaling/lifted_hamiltonian", h, 1e-6, "closed-form"));
    Ok(rep)
}

fn rotation(a: f64, b: f64) -> Isotopy {
    catalog::torus_rotation(&[a], &[b], 0.0, 0.0).expect("l = 1").1
}

fn flux_suite(s: &Settings) -> Result<RunReport> {
    let mut rep = report("flux", s);
    let st = catalog::t2s1();
    let grid = small(&st);
    let basis = HomologyBasis::coordinate_circles(&st.chart, grid.first_point())?;
    let (_, reeb) = catalog::reeb_flow(1.0);
    let c = flux(&st, &reeb, &basis, None, 64, &grid, 1e-6)?;
    rep.check(Comparison::close("reeb/s", c.coefficients[2], 2.0 * PI, 1e-8, "closed-form-orbit"));
    let c = flux(&st, &rotation(1.0, 2.0), &basis, None, 64, &grid, 1e-6)?;
    for (i, want) in [-4.0 * PI, 2.0 * PI, 0.0].iter().enumerate() {
        rep.check(Comparison::close(&format!("rotation/{}", basis.labels[i]), c.coefficients[i], *want, 1e-6, "closed-form"));
    }
    let mut r = rng(11);
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let pick = |r: &mut ChaCha8Rng, k: usize| -> Isotopy {
            match k % 3 {
                0 => rotation(r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0)),
                1 => catalog::reeb_flow(r.gen_range(-2.0..2.0)).1,
                _ => catalog::shear(r.gen_range(-1.0..1.0)).1,
            }
        };
        let phi = pick(&mut r, k);
        let psi = pick(&mut r, k + 1 + (k / 3));
        worst = worst.max(flux_additivity_check(&st, &phi, &psi, &basis, Some(32), 64, &grid)?);
    }
    rep.check(Comparison::below("additivity_20_pairs", worst, 1e-6, "homomorphism"));
    let (_, ham) = catalog::isotopy("torus-hamiltonian", &Params::new(), s.steps)?;
    let k = flux(&st, &ham, &basis, Some(32), 64, &grid, 1e-6)?;
    rep.check(Comparison::below("kernel/co_hamiltonian", k.max_abs(), 1e-6, "exactness"));
    let rot = rotation(0.7, -0.4);
    let both = compose_isotopies(&st, &ham, &rot)?;
    let a = flux(&st, &both, &basis, Some(32), 64, &grid, 1e-6)?;
    let b = flux(&st, &rot, &basis, Some(32), 64, &grid, 1e-6)?;
    let dev = a.coefficients.iter().zip(&b.coefficients).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    rep.check(Comparison::below("kernel/composed", dev, 1e-6, "exactness"));
    // Reparametrizing time leaves the class unchanged.
    // tau' is periodic, so the trapezoid rule in time stays spectrally accurate.
    let tau = std::sync::Arc::new(|t: f64| (t - (2.0 * PI * t).sin() / (4.0 * PI), 1.0 - 0.5 * (2.0 * PI * t).cos()));
    let slow = rotation(1.0, 2.0).reparametrized(tau);
    let c2 = flux(&st, &slow, &basis, Some(64), 64, &grid, 1e-6)?;
    let dev = c2.coefficients.iter().zip(&c.coefficients).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    rep.check(Comparison::below("reparametrization", dev, 1e-6, "homotopy-invariance"));
    Ok(rep)
}

fn factorization(s: &Settings) -> Result<RunReport> {
    let mut rep = report("factorization", s);
    let st = catalog::t2s1();
    let grid = default_grid(&st, s)?;
    let forms: [(&str, OneForm); 4] = [
        ("dtheta1", Form::dx(3, 0)),
        ("dtheta2", Form::dx(3, 1)),
        ("ds", Form::dx(3, 2)),
        ("dcos_theta1", d(&Form::of(3, 0, crate::pointfn!(3 => 1, |_t, p| [p[0].cos()])))),
    ];
    let isos = [("reeb-flow", catalog::reeb_flow(1.0).1), ("rotation-1-2", rotation(1.0, 2.0)), ("rotation-0.5-1.5", rotation(-0.5, 1.5))];
    for (iname, iso) in &isos {
        for (aname, a) in &forms {
            let f = factorization_check(&st, iso, a, Some(16), &grid, 1e-8)?;
            rep.check(Comparison::below(&format!("{iname}/{aname}"), f.relative, 1e-3, "independent-quadratures"));
        }
    }
    Ok(rep)
}

fn conformal(s: &Settings) -> Result<RunReport> {
    let mut rep = report("conformal", s);
    let (st, iso) = catalog::z_scaling(1.0);
    let grid = default_grid(&st, s)?;
    let r = conformal_rate_check(&st, &iso, &CHECKPOINTS, &grid)?;
    rep.check(Comparison::below("rate_printed_form", r.printed_form, 1e-6, "stated-identity").with_note(
        "mu_t = fdot_t e^{-f_t} does not hold for this family; the valid identity is mu_t o psi_t = fdot_t",
    ));
    rep.check(Comparison::below("rate_composed_form", r.corrected_form, 1e-6, "closed-form"));
    rep.check(Comparison::below("reeb_factor", r.reeb_factor, 1e-6, "closed-form"));
    Ok(rep)
}

fn exterior_calculus(s: &Settings) -> Result<RunReport> {
    let mut rep = report("exterior-calculus", s);
    let st = catalog::t2s1();
    let grid = small(&st);
    let mut r = rng(5);
    let (mut dd0, mut dd1, mut cartan, mut natural): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    let (_, shear) = catalog::shear(0.5);
    let phi = shear.time_one();
    for _ in 0..10 {
        let f = catalog::trig_scalar(&coeffs(&mut r, TRIG_TERMS, 1.0));
        let a = catalog::trig_one_form(&coeffs(&mut r, 3 * TRIG_TERMS, 1.0));
        let x = catalog::trig_field(&coeffs(&mut r, 3 * TRIG_TERMS, 1.0));
        dd0 = dd0.max(exterior_derivative(&d(&f)).max_abs(0.0, &grid));
        dd1 = dd1.max(exterior_derivative(&exterior_derivative(&a)).max_abs(0.0, &grid));
        let lhs = lie_derivative(&x, &a);
        let rhs = d(&interior_product(&x, &a)).add(&interior_product(&x, &exterior_derivative(&a)));
        cartan = cartan.max(lhs.sub(&rhs).max_abs(0.0, &grid));
        let n1 = pullback(&phi, &exterior_derivative(&a)).sub(&exterior_derivative(&pullback(&phi, &a)));
        natural = natural.max(n1.max_abs(0.0, &grid));
    }
    rep.check(Comparison::below("dd_scalar", dd0, 1e-10, "analytic"));
    rep.check(Comparison::below("dd_one_form", dd1, 1e-10, "analytic"));
    rep.check(Comparison::below("cartan", cartan, 1e-8, "analytic"));
    rep.check(Comparison::below("naturality", natural, 1e-8, "analytic"));
    Ok(rep)
}

fn random_cosymplectic(st: &CosymplecticStructure, r: &mut ChaCha8Rng) -> VectorField {
    let h = catalog::trig_scalar(&theta_only(r, 1, 1.0));
    VectorField::constant(&coeffs(r, 3, 1.0)).add(&invert_i(st, &d(&h)))
}

fn bracket_closure(s: &Settings) -> Result<RunReport> {
    let mut rep = report("bracket-closure", s);
    let st = catalog::t2s1();
    let grid = small(&st);
    let mut r = rng(9);
    let (mut periods, mut potential): (f64, f64) = (0.0, 0.0);
    let mut all = true;
    for _ in 0..10 {
        let x = random_cosymplectic(&st, &mut r);
        let y = random_cosymplectic(&st, &mut r);
        let br = lie_bracket(&x, &y);
        let i_br = crate::cosym::apply_i(&st, &br);
        let (loops, harmonic) = exactness(&st, &i_br, 0.0, &grid)?;
        periods = periods.max(loops).max(harmonic);
        // I([X, Y]) = d(omega(Y, X)).
        let w_yx = interior_product(&x, &interior_product(&y, &st.omega));
        potential = potential.max(i_br.sub(&d(&w_yx)).max_abs(0.0, &grid));
        let c = classify_field(&st, &br, 0.0, &grid, 1e-6)?;
        all &= c.co_hamiltonian;
    }
    rep.check(Comparison::below("bracket_periods", periods, 1e-8, "exactness"));
    rep.check(Comparison::below("bracket_potential", potential, 1e-8, "closed-form"));
    rep.check(Comparison::holds("bracket_co_hamiltonian", all, "classification"));
    Ok(rep)
}

fn transition_cocycle(s: &Settings) -> Result<RunReport> {
    let mut rep = report("transition-cocycle", s);
    let (st, a) = catalog::z_scaling(0.7);
    let (_, b) = catalog::z_translation(0.3);
    let (_, c) = catalog::z_scaling(-0.4);
    let grid = st.chart.grid(8, 9);
    let left = compose_isotopies(&st, &compose_isotopies(&st, &a, &b)?, &c)?;
    let right = compose_isotopies(&st, &a, &compose_isotopies(&st, &b, &c)?)?;
    let direct = {
        let mut d = left.clone();
        d.records.transition = None;
        d.transition(&st)
    };
    let (mut assoc, mut vs_direct): (f64, f64) = (0.0, 0.0);
    for &t in &CHECKPOINTS {
        assoc = assoc.max(left.transition(&st).sub(&right.transition(&st)).max_abs(t, &grid));
        vs_direct = vs_direct.max(left.transition(&st).sub(&direct).max_abs(t, &grid));
    }
    rep.check(Comparison::below("associativity", assoc, 1e-6, "cocycle"));
    rep.check(Comparison::below("cocycle_vs_definition", vs_direct, 1e-6, "definition"));
    let st = catalog::t2s1();
    let g = small(&st);
    let two = compose_isotopies(&st, &catalog::reeb_flow(0.4).1, &catalog::reeb_flow(1.1).1)?;
    let dev = two.transition(&st).sub(&Form::constant(3, 0, vec![1.5])).max_abs(0.5, &g);
    rep.check(Comparison::below("reeb_speeds_add", dev, 1e-10, "closed-form"));
    Ok(rep)
}

fn length_properties(s: &Settings) -> Result<RunReport> {
    let mut rep = report("length-properties", s);
    let st = catalog::t2s1();
    let grid = st.chart.grid(16, 17);
    let opts = NormOptions::default();
    let (_, shear) = catalog::shear(0.5);
    let (_, cross) = catalog::cross_shear(0.3);
    let rot = rotation(0.7, -0.4);
    let cases = [
        ("shear", &shear, LengthKind::CoHofer),
        ("cross-shear", &cross, LengthKind::CoHofer),
        ("rotation", &rot, LengthKind::CoHoferLike),
    ];
    for (name, iso, kind) in cases {
        let inv = invert_isotopy(iso)?;
        for version in [LengthVersion::Sup, LengthVersion::Integral] {
            let l = length(&st, iso, kind, version, 8, &grid, &opts)?.value;
            let li = length(&st, &inv, kind, version, 8, &grid, &opts)?.value;
            rep.check(Comparison::close(&format!("symmetry/{name}/{version:?}"), li, l, 1e-6, "symmetry"));
        }
    }
    let both = compose_isotopies(&st, &shear, &cross)?;
    for version in [LengthVersion::Sup, LengthVersion::Integral] {
        let la = length(&st, &shear, LengthKind::CoHofer, version, 8, &grid, &opts)?;
        let lb = length(&st, &cross, LengthKind::CoHofer, version, 8, &grid, &opts)?;
        let lab = length(&st, &both, LengthKind::CoHofer, version, 8, &grid, &opts)?;
        rep.check(Comparison::below(&format!("triangle/{version:?}"), lab.value - la.value - lb.value, 1e-4, "subadditivity"));
        rep.check(Comparison::holds(&format!("positivity/{version:?}"), lab.value >= 0.0 && la.value > 0.0, "positivity"));
        rep.check(Comparison::holds(
            &format!("ordering/{version:?}"),
            lab.integral_value <= lab.sup_value + 1e-12,
            "time-average-vs-max",
        ));
    }
    Ok(rep)
}

fn closed_form_sample(r: &mut ChaCha8Rng) -> (OneForm, ScalarField) {
    let c = coeffs(r, 3, 2.0);
    let f = catalog::trig_scalar(&coeffs(r, TRIG_TERMS, 1.0));
    (Form::constant(3, 1, c).add(&d(&f)), f)
}

fn splitting(s: &Settings) -> Result<RunReport> {
    let mut rep = report("splitting", s);
    let st = catalog::t2s1();
    let grid = small(&st);
    let sec = SectionSpec::CoefficientAverage;
    let mut r = rng(13);
    let (mut idem, mut lin, mut pot): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..5 {
        let (a, _) = closed_form_sample(&mut r);
        let (b, _) = closed_form_sample(&mut r);
        let (x, y) = (r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0));
        let sa = split_closed_form(&st.chart, &a, &sec, 0.0, &grid, 1e-8)?;
        let sb = split_closed_form(&st.chart, &b, &sec, 0.0, &grid, 1e-8)?;
        let sab = split_closed_form(&st.chart, &a.scale(x).add(&b.scale(y)), &sec, 0.0, &grid, 1e-8)?;
        let again = split_closed_form(&st.chart, &sa.s_part, &sec, 0.0, &grid, 1e-8)?;
        idem = idem.max(again.s_part.sub(&sa.s_part).max_abs(0.0, &grid)).max(again.osc);
        for k in 0..sa.coefficients.len() {
            lin = lin.max((sab.coefficients[k] - x * sa.coefficients[k] - y * sb.coefficients[k]).abs());
        }
        let comb = sa.potential.scale(x).add(&sb.potential.scale(y));
        lin = lin.max(sab.potential.sub(&comb).max_abs(0.0, &grid));
        pot = pot.max(sa.potential_residual(&a, &grid));
    }
    rep.check(Comparison::below("idempotence", idem, 1e-8, "splitting-uniqueness"));
    rep.check(Comparison::below("linearity", lin, 1e-8, "splitting-uniqueness"));
    rep.check(Comparison::below("potential", pot, 1e-8, "reconstruction"));
    Ok(rep)
}

fn section_equivalence(s: &Settings) -> Result<RunReport> {
    let mut rep = report("section-equivalence", s);
    let st = catalog::t2s1();
    let grid = small(&st);
    let opts = NormOptions::default();
    let mut r = rng(17);
    let samples: Vec<VectorField> = (0..12)
        .map(|_| random_cosymplectic(&st, &mut r))
        .collect();
    let exact: Vec<VectorField> = (0..10)
        .map(|_| invert_i(&st, &d(&catalog::trig_scalar(&theta_only(&mut r, 1, 1.0)))))
        .collect();
    let avg = SectionSpec::CoefficientAverage;
    let user = SectionSpec::rescaled_circles(&st.chart, &[2.0, 0.5, 1.0], 0.3)?;
    let same = section_equivalence_test(&st, &avg, &avg, &samples, 0.0, &grid, &opts)?;
    rep.check(Comparison::close("identical_sections/max", same.max, 1.0, 1e-12, "identity"));
    rep.check(Comparison::close("identical_sections/min", same.min, 1.0, 1e-12, "identity"));
    let mixed = section_equivalence_test(&st, &avg, &user, &samples, 0.0, &grid, &opts)?;
    rep.value("rescaled/ratios", &mixed.ratios);
    rep.check(Comparison::holds("rescaled/bounded", mixed.bounded, "norm-equivalence"));
    rep.check(Comparison::below("rescaled/constant", mixed.constant, 10.0, "norm-equivalence"));
    let ex = section_equivalence_test(&st, &avg, &user, &exact, 0.0, &grid, &opts)?;
    rep.check(Comparison::close("exact_only/max", ex.max, 1.0, 1e-8, "splitting-uniqueness"));
    rep.check(Comparison::close("exact_only/min", ex.min, 1.0, 1e-8, "splitting-uniqueness"));
    Ok(rep)
}

fn flow_group(s: &Settings) -> Result<RunReport> {
    let mut rep = report("flow-group", s);
    let st = catalog::t2s1();
    let (_, ham) = catalog::isotopy("torus-hamiltonian", &Params::new(), s.steps)?;
    let grid = small(&st);
    let mut worst: f64 = 0.0;
    for (a, b) in [(0.25, 0.5), (0.5, 0.5), (0.2, 0.35)] {
        for p in grid.points() {
            let lhs = ham.eval(a, &ham.eval(b, p));
            let rhs = ham.eval(a + b, p);
            worst = worst.max(st.chart.distance(&lhs, &rhs));
        }
    }
    rep.check(Comparison::below("composition", worst, 1e-8, "flow-property"));
    // Inverse maps from backward integration.
    let one = ham.time_one();
    let mut inv: f64 = 0.0;
    for p in grid.points() {
        let q = one.eval_inv(&one.eval(p))?;
        inv = inv.max(st.chart.distance(&q, p));
    }
    rep.check(Comparison::below("inverse", inv, 1e-8, "flow-property"));
    // Decomposed flows commute for autonomous cosymplectic generators.
    let x = VectorField::constant(&[0.3, 0.0, 0.7]).add(&invert_i(&st, &d(&catalog::torus_hamiltonian(0.5, 0.25))));
    let dec = decompose(&st, &x);
    let f_all = crate::isotopy::integrate_flow(&st.chart, &x, s.steps, "X")?;
    let f_w = crate::isotopy::integrate_flow(&st.chart, &dec.x_omega, s.steps, "X_omega")?;
    let f_e = crate::isotopy::integrate_flow(&st.chart, &dec.x_eta, s.steps, "X_eta")?;
    let (mut c1, mut c2): (f64, f64) = (0.0, 0.0);
    for p in grid.points() {
        let a = f_all.eval(1.0, p);
        c1 = c1.max(st.chart.distance(&a, &f_w.eval(1.0, &f_e.eval(1.0, p))));
        c2 = c2.max(st.chart.distance(&a, &f_e.eval(1.0, &f_w.eval(1.0, p))));
    }
    rep.check(Comparison::below("decomposed_commute/omega_eta", c1, 1e-8, "flow-property"));
    rep.check(Comparison::below("decomposed_commute/eta_omega", c2, 1e-8, "flow-property"));
    Ok(rep)
}
