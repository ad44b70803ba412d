//! Flux classes `int_0^1 [phi_t^* I(phi-dot_t)] dt` paired with coordinate
//! circles, and the identities they satisfy.

use crate::ad::{Dual, Scalar};
use crate::cosym::{apply_i, decompose, CosymplecticStructure, Range};
use crate::error::{precondition, Result};
use crate::forms::{
    d, integrate_top_form, interior_product, line_integral, power, wedge, Form, Loop, OneForm, ScalarField,
};
use crate::isotopy::{compose_isotopies, integrate_flow, Isotopy};
use crate::manifold::{c0_distance, Grid, ManifoldChart};
use crate::norms::harmonic_coefficients;
use serde::Serialize;

/// Coordinate circles through a base point, one per periodic coordinate.
#[derive(Clone)]
pub struct HomologyBasis {
    pub loops: Vec<Loop>,
    pub labels: Vec<String>,
    /// Chart coordinate of each loop.
    pub coords: Vec<usize>,
    pub periods: Vec<f64>,
}

impl HomologyBasis {
    pub fn coordinate_circles(m: &ManifoldChart, base: &[f64]) -> Result<HomologyBasis> {
        let coords = m.homology_coords();
        let mut loops = Vec::new();
        let mut periods = Vec::new();
        for &k in &coords {
            let lp = Loop::coordinate_circle(m, base, k)?;
            let gap = m.distance(&lp.point(0.0), &lp.point(1.0));
            if gap > 1e-10 {
                return Err(precondition(format!("loop {} is not closed (gap {gap:e})", lp.label)));
            }
            loops.push(lp);
            periods.push(m.coords()[k].period().expect("homology coordinate is periodic").1);
        }
        let labels = loops.iter().map(|l| l.label.clone()).collect();
        Ok(HomologyBasis { loops, labels, coords, periods })
    }

    pub fn len(&self) -> usize {
        self.loops.len()
    }
    pub fn is_empty(&self) -> bool {
        self.loops.is_empty()
    }

    /// Loop integrals of a closed form.
    pub fn pair(&self, m: &ManifoldChart, a: &OneForm, t: f64, n_loop: usize) -> Result<Vec<f64>> {
        self.loops.iter().map(|lp| line_integral(m, a, t, lp, n_loop)).collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CohomologyClass {
    /// Loop integrals, indexed like the basis.
    pub coefficients: Vec<f64>,
    pub labels: Vec<String>,
    /// `max_t |d I(phi-dot_t)|` over the checked times.
    pub closedness_residual: f64,
    pub warnings: Vec<String>,
}

impl CohomologyClass {
    pub fn max_abs(&self) -> f64 {
        self.coefficients.iter().fold(0.0, |a: f64, c| a.max(c.abs()))
    }
    /// The constant-coefficient representative `sum (c_k / period_k) dx_k`.
    pub fn representative(&self, m: &ManifoldChart, basis: &HomologyBasis) -> OneForm {
        let mut c = vec![0.0; m.dim()];
        for ((&k, &p), &v) in basis.coords.iter().zip(&basis.periods).zip(&self.coefficients) {
            c[k] = v / p;
        }
        Form::covector(&c)
    }
}

/// Flux of `iso` with `n_t` time panels (the flow's own steps when `None`) and
/// `n_loop` trapezoid panels per loop.
pub fn flux(
    s: &CosymplecticStructure,
    iso: &Isotopy,
    basis: &HomologyBasis,
    n_t: Option<usize>,
    n_loop: usize,
    grid: &Grid,
    tol: f64,
) -> Result<CohomologyClass> {
    let n_t = n_t.unwrap_or(iso.steps).max(1);
    let n = s.dim();
    let beta = apply_i(s, &iso.generator);
    let times: Vec<f64> = (0..=n_t).map(|k| k as f64 / n_t as f64).collect();
    let mut closed: f64 = 0.0;
    for t in [0.0, 0.5, 1.0] {
        closed = closed.max(d(&beta).max_abs(t, grid));
    }
    let mut warnings = Vec::new();
    if closed > tol {
        warnings.push(format!("instantaneous integrand is not closed (|d I(phi-dot)| = {closed:e})"));
    }
    let mut bv = vec![0.0; n];
    let mut coefficients = Vec::new();
    for lp in &basis.loops {
        let mut per_time = vec![0.0; times.len()];
        for j in 0..n_loop {
            let tau = j as f64 / n_loop as f64;
            let mut x = vec![Dual::cst(0.0); n];
            Dual::eval(&*lp.curve, 0.0, &[Dual::var(tau, 0)], &mut x);
            for (k, y) in iso.sample_path(&x, &times).iter().enumerate() {
                let yv: Vec<f64> = y.iter().map(|q| q.v).collect();
                beta.f.eval_f64(times[k], &yv, &mut bv);
                per_time[k] += (0..n).map(|a| bv[a] * y[a].g[0]).sum::<f64>();
            }
        }
        let h = 1.0 / n_loop as f64;
        let f: Vec<f64> = per_time.iter().map(|v| v * h).collect();
        coefficients.push(trapezoid(&f));
    }
    Ok(CohomologyClass { coefficients, labels: basis.labels.clone(), closedness_residual: closed, warnings })
}

fn trapezoid(f: &[f64]) -> f64 {
    let n = f.len() - 1;
    if n == 0 {
        return 0.0;
    }
    (f.iter().sum::<f64>() - 0.5 * (f[0] + f[n])) / n as f64
}

/// `|| flux(phi o psi) - flux(phi) - flux(psi) ||_inf`.
pub fn flux_additivity_check(
    s: &CosymplecticStructure,
    phi: &Isotopy,
    psi: &Isotopy,
    basis: &HomologyBasis,
    n_t: Option<usize>,
    n_loop: usize,
    grid: &Grid,
) -> Result<f64> {
    let both = compose_isotopies(s, phi, psi)?;
    let a = flux(s, &both, basis, n_t, n_loop, grid, 1e-6)?;
    let b = flux(s, phi, basis, n_t, n_loop, grid, 1e-6)?;
    let c = flux(s, psi, basis, n_t, n_loop, grid, 1e-6)?;
    Ok(a.coefficients
        .iter()
        .zip(&b.coefficients)
        .zip(&c.coefficients)
        .map(|((x, y), z)| (x - y - z).abs())
        .fold(0.0, f64::max))
}

/// `Delta(Phi, beta)(x) = int_0^1 beta(phi-dot_t)(phi_t x) dt` at every grid point.
pub fn delta_values(iso: &Isotopy, beta: &OneForm, n_t: usize, grid: &Grid) -> Vec<f64> {
    let times: Vec<f64> = (0..=n_t).map(|k| k as f64 / n_t as f64).collect();
    let b = interior_product(&iso.generator, beta);
    let mut o = [0.0];
    grid.points()
        .map(|p| {
            let path = iso.sample_path(p, &times);
            let f: Vec<f64> = path
                .iter()
                .zip(&times)
                .map(|(y, &t)| {
                    b.f.eval_f64(t, y, &mut o);
                    o[0]
                })
                .collect();
            trapezoid(&f)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct FactorizationReport {
    pub lhs: f64,
    pub rhs: f64,
    pub deviation: f64,
    /// `|lhs - rhs| / max(|lhs|, |rhs|, Vol)`.
    pub relative: f64,
    pub flux: Vec<f64>,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Both sides of the flux factorization identity for a closed `alpha`.
pub fn factorization_check(
    s: &CosymplecticStructure,
    iso: &Isotopy,
    alpha: &OneForm,
    n_t: Option<usize>,
    grid: &Grid,
    tol: f64,
) -> Result<FactorizationReport> {
    let closed = d(alpha).max_abs(0.0, grid);
    if closed > tol {
        return Err(precondition(format!("alpha is not closed (|d alpha| = {closed:e})")));
    }
    let nt = n_t.unwrap_or(iso.steps).max(1);
    let n = s.half();
    let wn = power(&s.omega, n)?;
    let a_wn = wedge(alpha, &wn)?;
    let e_wn = s.volume_form();
    let de = delta_values(iso, &s.eta, nt, grid);
    let da = delta_values(iso, alpha, nt, grid);
    let mut u = [0.0];
    let mut v = [0.0];
    let mut lhs = 0.0;
    for (i, p) in grid.points().enumerate() {
        a_wn.f.eval_f64(0.0, p, &mut u);
        e_wn.f.eval_f64(0.0, p, &mut v);
        lhs += grid.weight(i) * (de[i] * u[0] - da[i] * v[0]);
    }
    let basis = HomologyBasis::coordinate_circles(&s.chart, grid.first_point())?;
    let n_loop = 2 * grid.shape.iter().copied().max().unwrap_or(32).max(32);
    let cls = flux(s, iso, &basis, Some(nt), n_loop, grid, tol)?;
    let sh = cls.representative(&s.chart, &basis);
    let hc = harmonic_coefficients(&s.chart, alpha, 0.0, grid);
    let mut ah = vec![0.0; s.dim()];
    for (&k, &c) in basis.coords.iter().zip(&hc) {
        ah[k] = c;
    }
    let top = wedge(&wedge(&wedge(&Form::covector(&ah), &power(&s.omega, n - 1)?)?, &s.eta)?, &sh)?;
    let rhs = factorial(n) * integrate_top_form(&top, 0.0, grid)?;
    let vol = s.volume(0.0, grid).abs();
    let deviation = (lhs - rhs).abs();
    Ok(FactorizationReport {
        lhs,
        rhs,
        deviation,
        relative: deviation / lhs.abs().max(rhs.abs()).max(vol),
        flux: cls.coefficients,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct OrbitIntegrals {
    pub alpha: Vec<f64>,
    pub eta: Vec<f64>,
    /// `max_x |phi_1(x) - x|` of the loop.
    pub loop_defect: f64,
    pub flux: Vec<f64>,
    /// When the flux vanishes: `max |int alpha - (int alpha ^ omega^n / Vol) int eta|`.
    pub proportionality_residual: Option<f64>,
}

/// Orbit integrals `int_{t -> phi_t x} alpha` of a loop at the given points.
pub fn reeb_orbit_integrals(
    s: &CosymplecticStructure,
    iso: &Isotopy,
    alpha: &OneForm,
    points: &[Vec<f64>],
    n_t: Option<usize>,
    grid: &Grid,
    tol: f64,
) -> Result<OrbitIntegrals> {
    let defect = c0_distance(&s.chart, &iso.time_one().fwd, &crate::forms::SmoothMap::identity(s.dim()).fwd, grid);
    if defect > tol.max(1e-8) {
        return Err(precondition(format!("{} is not a loop (|phi_1 - id| = {defect:e})", iso.label)));
    }
    let nt = n_t.unwrap_or(iso.steps).max(1);
    let times: Vec<f64> = (0..=nt).map(|k| k as f64 / nt as f64).collect();
    let a_x = interior_product(&iso.generator, alpha);
    let e_x = interior_product(&iso.generator, &s.eta);
    let orbit = |f: &ScalarField, x: &[f64]| {
        let path = iso.sample_path(x, &times);
        trapezoid(&path.iter().zip(&times).map(|(y, &t)| f.value(t, y)).collect::<Vec<_>>())
    };
    let av: Vec<f64> = points.iter().map(|x| orbit(&a_x, x)).collect();
    let ev: Vec<f64> = points.iter().map(|x| orbit(&e_x, x)).collect();
    let basis = HomologyBasis::coordinate_circles(&s.chart, grid.first_point())?;
    let n_loop = 2 * grid.shape.iter().copied().max().unwrap_or(32).max(32);
    let cls = flux(s, iso, &basis, Some(nt), n_loop, grid, tol)?;
    let proportionality_residual = if cls.max_abs() < 1e-6 {
        let ratio = integrate_top_form(&wedge(alpha, &power(&s.omega, s.half())?)?, 0.0, grid)? / s.volume(0.0, grid);
        Some(av.iter().zip(&ev).map(|(a, e)| (a - ratio * e).abs()).fold(0.0, f64::max))
    } else {
        None
    };
    Ok(OrbitIntegrals { alpha: av, eta: ev, loop_defect: defect, flux: cls.coefficients, proportionality_residual })
}

#[derive(Clone, Debug, Serialize)]
pub struct DecomposedFlux {
    pub omega_part: CohomologyClass,
    pub eta_part: CohomologyClass,
    /// Index of the loop on which `eta` has nonzero period.
    pub reeb_loop: Option<usize>,
    /// Flux of `Phi_omega` on the Reeb loop.
    pub omega_reeb_coefficient: f64,
    /// `int_0^1 eta(phi-dot_t) o phi_t dt` (mean over the grid).
    pub scalar: f64,
    pub scalar_constant: bool,
    /// `max |flux(Phi_eta) - scalar [eta]|`.
    pub eta_class_residual: f64,
    pub warnings: Vec<String>,
}

/// Flux of the flows of `X_omega` and `X_eta = eta(X) xi` separately.
pub fn decomposed_flux(
    s: &CosymplecticStructure,
    iso: &Isotopy,
    n_loop: usize,
    grid: &Grid,
    tol: f64,
) -> Result<DecomposedFlux> {
    let dec = decompose(s, &iso.generator);
    let fo = integrate_flow(&s.chart, &dec.x_omega, iso.steps.max(16), "omega part")?;
    let fe = integrate_flow(&s.chart, &dec.x_eta, iso.steps.max(16), "eta part")?;
    let basis = HomologyBasis::coordinate_circles(&s.chart, grid.first_point())?;
    let omega_part = flux(s, &fo, &basis, None, n_loop, grid, tol)?;
    let eta_part = flux(s, &fe, &basis, None, n_loop, grid, tol)?;
    let eta_class = basis.pair(&s.chart, &s.eta, 0.0, n_loop)?;
    let reeb_loop = eta_class.iter().position(|c| c.abs() > 1e-9);
    let dv = delta_values(iso, &s.eta, iso.steps.max(1), grid);
    let lo = dv.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = dv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scalar = dv.iter().sum::<f64>() / dv.len() as f64;
    let range = Range { min: lo, max: hi, mean: scalar };
    let mut warnings = Vec::new();
    if !range.is_constant() {
        warnings.push(format!("Delta(Phi, eta) is not constant (range [{lo:e}, {hi:e}])"));
    }
    let eta_class_residual = eta_part
        .coefficients
        .iter()
        .zip(&eta_class)
        .map(|(f, e)| (f - scalar * e).abs())
        .fold(0.0, f64::max);
    Ok(DecomposedFlux {
        omega_reeb_coefficient: reeb_loop.map_or(0.0, |k| omega_part.coefficients[k]),
        omega_part,
        eta_part,
        reeb_loop,
        scalar,
        scalar_constant: range.is_constant(),
        eta_class_residual,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::VectorField;
    use crate::manifold::{build_manifold, FactorSpec};
    use std::f64::consts::PI;

    fn t2s1() -> CosymplecticStructure {
        let m = build_manifold(
            vec![
                FactorSpec::circle(2.0 * PI, "theta1"),
                FactorSpec::circle(2.0 * PI, "theta2"),
                FactorSpec::centered_circle(2.0 * PI, "s"),
            ],
            true,
        )
        .unwrap();
        CosymplecticStructure::new(m, Form::dx(3, 2), Form::dxdx(3, 0, 1)).unwrap()
    }

    #[test]
    fn reeb_flow_flux_is_the_eta_class() {
        let s = t2s1();
        let grid = s.chart.grid(8, 9);
        let iso = integrate_flow(&s.chart, &VectorField::coordinate(3, 2), 32, "reeb").unwrap();
        let b = HomologyBasis::coordinate_circles(&s.chart, grid.first_point()).unwrap();
        let c = flux(&s, &iso, &b, None, 16, &grid, 1e-8).unwrap();
        assert!(c.coefficients[0].abs() < 1e-12 && c.coefficients[1].abs() < 1e-12);
        assert!((c.coefficients[2] - 2.0 * PI).abs() < 1e-10);
    }
}
