//! Cosymplectic structures `(eta, omega)`: the pairing `I(X) = eta(X) eta + i_X omega`,
//! Reeb fields, the `(omega, eta)`-decomposition and classification of fields and maps.

use crate::ad::{share, Buf, Fun, GenericFn, Scalar};
use crate::error::{precondition, GeomError, Result};
use crate::forms::{
    basis, d, directional, exterior_derivative, interior_product, lie_derivative, mask_indices, power,
    pullback, pushforward_field, wedge, Form, OneForm, ScalarField, SmoothMap, TwoForm, VectorField,
};
use crate::linalg;
use crate::manifold::{Grid, ManifoldChart};
use serde::Serialize;
use smallvec::smallvec;

/// Pivot threshold below which the pairing counts as singular.
pub const SINGULAR: f64 = 1e-12;

/// `(max - min) < 1e-6 (1 + |mean|)`.
pub fn is_constant(min: f64, max: f64, mean: f64) -> bool {
    max - min < 1e-6 * (1.0 + mean.abs())
}

#[derive(Clone, Debug)]
pub struct CosymplecticStructure {
    pub chart: ManifoldChart,
    pub eta: OneForm,
    pub omega: TwoForm,
}

impl CosymplecticStructure {
    pub fn new(chart: ManifoldChart, eta: OneForm, omega: TwoForm) -> Result<Self> {
        let n = chart.dim();
        if eta.dim != n || eta.degree != 1 || omega.dim != n || omega.degree != 2 {
            return Err(GeomError::Invalid("eta must be a 1-form and omega a 2-form on the chart".into()));
        }
        Ok(CosymplecticStructure { chart, eta, omega })
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }
    /// `n` with `dim = 2n + 1`.
    pub fn half(&self) -> usize {
        (self.dim() - 1) / 2
    }

    /// The top form `eta ^ omega^n`.
    pub fn volume_form(&self) -> Form {
        wedge(&self.eta, &power(&self.omega, self.half()).expect("power within dimension"))
            .expect("top degree")
    }

    /// Total volume `int eta ^ omega^n` on the grid.
    pub fn volume(&self, t: f64, grid: &Grid) -> f64 {
        crate::forms::integrate_top_form(&self.volume_form(), t, grid).expect("top form")
    }

    /// The structure frozen at time `t` (for time-dependent families).
    pub fn at_time(&self, t: f64) -> CosymplecticStructure {
        CosymplecticStructure { chart: self.chart.clone(), eta: self.eta.at_time(t), omega: self.omega.at_time(t) }
    }
}

/// Pairing matrix `A = Omega + eta eta^T`: `A[i][j] = omega(e_i, e_j) + eta_i eta_j`,
/// so the covector of `I(Y)` has components `sum_i Y^i A[i][j]`.
pub fn assemble_pairing_matrix(s: &CosymplecticStructure, t: f64, p: &[f64]) -> Vec<f64> {
    let n = s.dim();
    let e = s.eta.eval_t(t, p);
    let w = s.omega.eval_t(t, p);
    let mut a = vec![0.0; n * n];
    fill_pairing(&e, &w, n, &mut a, false);
    a
}

/// Writes `A` (or its transpose) into `out`.
fn fill_pairing<S: Scalar>(eta: &[S], omega: &[S], n: usize, out: &mut [S], transpose: bool) {
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = eta[i] * eta[j];
        }
    }
    let b = basis(n);
    for (k, &m) in b.masks[2].iter().enumerate() {
        let ij = mask_indices(m);
        let (i, j) = (ij[0], ij[1]);
        let (u, v) = if transpose { (j, i) } else { (i, j) };
        out[u * n + v] += omega[k];
        out[v * n + u] -= omega[k];
    }
}

struct InvertFn {
    eta: Fun,
    omega: Fun,
    alpha: Fun,
    n: usize,
}

impl GenericFn for InvertFn {
    fn n_in(&self) -> usize {
        self.n
    }
    fn n_out(&self) -> usize {
        self.n
    }
    fn call<S: Scalar>(&self, t: f64, p: &[S], out: &mut [S]) {
        let n = self.n;
        let mut e: Buf<S> = smallvec![S::zero(); n];
        let mut w: Buf<S> = smallvec![S::zero(); n * (n - 1) / 2];
        S::eval(&*self.eta, t, p, &mut e);
        S::eval(&*self.omega, t, p, &mut w);
        S::eval(&*self.alpha, t, p, out);
        let mut m: smallvec::SmallVec<[S; 36]> = smallvec![S::zero(); n * n];
        // Row j of the system is the j-th covector component, i.e. A transposed.
        fill_pairing(&e, &w, n, &mut m, true);
        if !linalg::solve(&mut m, out, n, SINGULAR) {
            for o in out.iter_mut() {
                *o = S::cst(f64::NAN);
            }
        }
    }
}

struct ApplyFn {
    eta: Fun,
    omega: Fun,
    x: Fun,
    n: usize,
}

impl GenericFn for ApplyFn {
    fn n_in(&self) -> usize {
        self.n
    }
    fn n_out(&self) -> usize {
        self.n
    }
    fn call<S: Scalar>(&self, t: f64, p: &[S], out: &mut [S]) {
        let n = self.n;
        let mut e: Buf<S> = smallvec![S::zero(); n];
        let mut w: Buf<S> = smallvec![S::zero(); n * (n - 1) / 2];
        let mut x: Buf<S> = smallvec![S::zero(); n];
        S::eval(&*self.eta, t, p, &mut e);
        S::eval(&*self.omega, t, p, &mut w);
        S::eval(&*self.x, t, p, &mut x);
        let mut a: smallvec::SmallVec<[S; 36]> = smallvec![S::zero(); n * n];
        fill_pairing(&e, &w, n, &mut a, false);
        for j in 0..n {
            let mut acc = S::zero();
            for i in 0..n {
                acc += x[i] * a[i * n + j];
            }
            out[j] = acc;
        }
    }
}

/// `I(X) = eta(X) eta + i_X omega`.
pub fn apply_i(s: &CosymplecticStructure, x: &VectorField) -> OneForm {
    Form::of(
        s.dim(),
        1,
        share(ApplyFn { eta: s.eta.f.clone(), omega: s.omega.f.clone(), x: x.f.clone(), n: s.dim() }),
    )
}

/// Pointwise solve of `I(X) = alpha`; singular points evaluate to NaN.
pub fn invert_i(s: &CosymplecticStructure, alpha: &OneForm) -> VectorField {
    VectorField::of(
        s.dim(),
        share(InvertFn { eta: s.eta.f.clone(), omega: s.omega.f.clone(), alpha: alpha.f.clone(), n: s.dim() }),
    )
}

/// `invert_i` after checking that the pairing is invertible on the grid.
pub fn invert_i_on(s: &CosymplecticStructure, alpha: &OneForm, t: f64, grid: &Grid) -> Result<VectorField> {
    check_invertible(s, t, grid)?;
    Ok(invert_i(s, alpha))
}

pub fn check_invertible(s: &CosymplecticStructure, t: f64, grid: &Grid) -> Result<()> {
    let n = s.dim();
    for p in grid.points() {
        let a = assemble_pairing_matrix(s, t, p);
        if !(linalg::det(&a, n).abs() > SINGULAR) {
            return Err(GeomError::Degenerate(format!("pairing is singular at {p:?} (t = {t})")));
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct ReebSolveReport {
    pub xi: VectorField,
    /// `max |eta(xi) - 1|`.
    pub residual_eta: f64,
    /// `max |i_xi omega|`.
    pub residual_omega: f64,
}

pub fn reeb_vector(s: &CosymplecticStructure) -> VectorField {
    invert_i(s, &s.eta)
}

pub fn reeb_field(s: &CosymplecticStructure, grid: &Grid) -> Result<ReebSolveReport> {
    reeb_field_at(s, 0.0, grid)
}

pub fn reeb_field_at(s: &CosymplecticStructure, t: f64, grid: &Grid) -> Result<ReebSolveReport> {
    check_invertible(s, t, grid)?;
    let xi = reeb_vector(s);
    let ex = interior_product(&xi, &s.eta);
    let iw = interior_product(&xi, &s.omega);
    let mut residual_eta: f64 = 0.0;
    for p in grid.points() {
        residual_eta = residual_eta.max((ex.value(t, p) - 1.0).abs());
    }
    let residual_omega = iw.max_abs(t, grid);
    Ok(ReebSolveReport { xi, residual_eta, residual_omega })
}

#[derive(Clone, Debug, Serialize)]
pub struct StructureReport {
    pub d_eta: f64,
    pub d_omega: f64,
    /// Smallest `|det A|` measured in an orthonormal frame of the flat metric.
    pub min_det: f64,
    /// Smallest `|det A|` in raw chart coordinates.
    pub min_det_coordinate: f64,
    pub max_condition: f64,
    /// Smallest `|eta ^ omega^n|` in an orthonormal frame.
    pub min_volume: f64,
    pub pass: bool,
    pub failures: Vec<String>,
}

pub fn verify_structure(s: &CosymplecticStructure, t: f64, grid: &Grid, tol: f64) -> StructureReport {
    let n = s.dim();
    let d_eta = exterior_derivative(&s.eta).max_abs(t, grid);
    let d_omega = if n >= 3 { exterior_derivative(&s.omega).max_abs(t, grid) } else { 0.0 };
    let vol = s.volume_form();
    let mut min_det = f64::INFINITY;
    let mut min_det_coordinate = f64::INFINITY;
    let mut max_condition: f64 = 0.0;
    let mut min_volume = f64::INFINITY;
    for p in grid.points() {
        let g: f64 = s.chart.metric_diag(p).iter().product();
        let a = assemble_pairing_matrix(s, t, p);
        let det = linalg::det(&a, n).abs();
        min_det_coordinate = min_det_coordinate.min(det);
        min_det = min_det.min(det / g);
        max_condition = max_condition.max(linalg::condition(&a, n));
        min_volume = min_volume.min(vol.value(t, p).abs() / g.sqrt());
    }
    let mut failures = Vec::new();
    if !(d_eta < tol) {
        failures.push(format!("d eta residual {d_eta:e}"));
    }
    if !(d_omega < tol) {
        failures.push(format!("d omega residual {d_omega:e}"));
    }
    if !(min_det > tol) {
        failures.push(format!("pairing not invertible (min |det A| = {min_det:e})"));
    }
    if !(min_volume > tol) {
        failures.push(format!("eta ^ omega^n vanishes (min = {min_volume:e})"));
    }
    StructureReport {
        d_eta,
        d_omega,
        min_det,
        min_det_coordinate,
        max_condition,
        min_volume,
        pass: failures.is_empty(),
        failures,
    }
}

#[derive(Clone, Debug)]
pub struct Decomposition {
    pub x_omega: VectorField,
    pub x_eta: VectorField,
}

/// `X_omega = I^-1(i_X omega)`, `X_eta = I^-1(eta(X) eta)`.
pub fn decompose(s: &CosymplecticStructure, x: &VectorField) -> Decomposition {
    let x_omega = invert_i(s, &interior_product(x, &s.omega));
    let x_eta = invert_i(s, &s.eta.times(&interior_product(x, &s.eta)));
    Decomposition { x_omega, x_eta }
}

#[derive(Clone, Debug, Serialize)]
pub struct DecompositionResiduals {
    /// `max |X - X_omega - X_eta|`.
    pub sum: f64,
    /// `max |eta(X_omega)|`.
    pub eta_of_x_omega: f64,
    /// `max |i_{X_eta} omega|`.
    pub omega_of_x_eta: f64,
}

pub fn decomposition_residuals(
    s: &CosymplecticStructure,
    x: &VectorField,
    dec: &Decomposition,
    t: f64,
    grid: &Grid,
) -> DecompositionResiduals {
    DecompositionResiduals {
        sum: x.lin(&[(-1.0, &dec.x_omega), (-1.0, &dec.x_eta)]).max_abs(t, grid),
        eta_of_x_omega: interior_product(&dec.x_omega, &s.eta).max_abs(t, grid),
        omega_of_x_eta: interior_product(&dec.x_eta, &s.omega).max_abs(t, grid),
    }
}

/// Range statistics of a scalar field over a grid.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl Range {
    pub fn of(f: &ScalarField, t: f64, grid: &Grid) -> Range {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for p in grid.points() {
            let v = f.value(t, p);
            min = min.min(v);
            max = max.max(v);
            sum += v;
        }
        Range { min, max, mean: sum / grid.len() as f64 }
    }
    pub fn is_constant(&self) -> bool {
        is_constant(self.min, self.max, self.mean)
    }
    pub fn max_abs(&self) -> f64 {
        self.min.abs().max(self.max.abs())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FieldResiduals {
    pub lie_omega: f64,
    pub lie_eta: f64,
    /// `max |L_X eta - mu eta|`.
    pub almost_eta: f64,
    /// Largest loop integral of the relevant 1-form over the homology basis.
    pub loop_integral: f64,
    /// Largest coefficient of its harmonic part.
    pub harmonic_part: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FieldClassification {
    pub cosymplectic: bool,
    pub almost_cosymplectic: bool,
    pub co_hamiltonian: bool,
    pub almost_co_hamiltonian: bool,
    pub mu: Range,
    /// The constant value of `eta(X)` when it is constant.
    pub eta_of_x_constant: Option<f64>,
    pub residuals: FieldResiduals,
    #[serde(skip)]
    pub mu_field: Option<ScalarField>,
}

/// Loop-integral and harmonic-part test for a closed 1-form.
pub fn exactness(s: &CosymplecticStructure, beta: &OneForm, t: f64, grid: &Grid) -> Result<(f64, f64)> {
    let basis = crate::flux::HomologyBasis::coordinate_circles(&s.chart, grid.first_point())?;
    let n_loop = grid.shape.iter().copied().max().unwrap_or(32).max(32) * 2;
    let mut worst: f64 = 0.0;
    for lp in &basis.loops {
        worst = worst.max(crate::forms::line_integral(&s.chart, beta, t, lp, n_loop)?.abs());
    }
    let h = crate::norms::harmonic_coefficients(&s.chart, beta, t, grid);
    Ok((worst, h.iter().fold(0.0, |a: f64, c| a.max(c.abs()))))
}

pub fn classify_field(s: &CosymplecticStructure, x: &VectorField, t: f64, grid: &Grid, tol: f64) -> Result<FieldClassification> {
    check_invertible(s, t, grid)?;
    let xi = reeb_vector(s);
    let lie_omega = lie_derivative(x, &s.omega).max_abs(t, grid);
    let lx_eta = lie_derivative(x, &s.eta);
    let lie_eta = lx_eta.max_abs(t, grid);
    let eta_x = interior_product(x, &s.eta);
    let mu_field = directional(&xi, &eta_x);
    let mu = Range::of(&mu_field, t, grid);
    let almost_eta = lx_eta.sub(&s.eta.times(&mu_field)).max_abs(t, grid);
    let eta_range = Range::of(&eta_x, t, grid);

    let cosymplectic = lie_omega < tol && lie_eta < tol;
    let almost_cosymplectic = !cosymplectic && lie_omega < tol && almost_eta < tol;
    let mut loop_integral = f64::NAN;
    let mut harmonic_part = f64::NAN;
    let mut co_hamiltonian = false;
    let mut almost_co_hamiltonian = false;
    if cosymplectic || almost_cosymplectic {
        let beta = if cosymplectic { apply_i(s, x) } else { interior_product(x, &s.omega) };
        let (li, hp) = exactness(s, &beta, t, grid)?;
        loop_integral = li;
        harmonic_part = hp;
        let scale = 1.0 + beta.max_abs(t, grid);
        let exact = li < tol * scale && hp < tol * scale;
        co_hamiltonian = cosymplectic && exact;
        almost_co_hamiltonian = almost_cosymplectic && exact;
    }
    Ok(FieldClassification {
        cosymplectic,
        almost_cosymplectic,
        co_hamiltonian,
        almost_co_hamiltonian,
        mu,
        eta_of_x_constant: eta_range.is_constant().then_some(eta_range.mean),
        residuals: FieldResiduals { lie_omega, lie_eta, almost_eta, loop_integral, harmonic_part },
        mu_field: almost_cosymplectic.then_some(mu_field),
    })
}

struct LnFn {
    g: Fun,
}
impl GenericFn for LnFn {
    fn n_in(&self) -> usize {
        self.g.n_in()
    }
    fn n_out(&self) -> usize {
        1
    }
    fn call<S: Scalar>(&self, t: f64, p: &[S], out: &mut [S]) {
        S::eval(&*self.g, t, p, out);
        out[0] = out[0].ln();
    }
}

struct ExpFn {
    g: Fun,
}
impl GenericFn for ExpFn {
    fn n_in(&self) -> usize {
        self.g.n_in()
    }
    fn n_out(&self) -> usize {
        1
    }
    fn call<S: Scalar>(&self, t: f64, p: &[S], out: &mut [S]) {
        S::eval(&*self.g, t, p, out);
        out[0] = out[0].exp();
    }
}

pub fn ln_field(g: &ScalarField) -> ScalarField {
    Form::of(g.dim, 0, share(LnFn { g: g.f.clone() }))
}
pub fn exp_field(g: &ScalarField) -> ScalarField {
    Form::of(g.dim, 0, share(ExpFn { g: g.f.clone() }))
}

#[derive(Clone, Debug, Serialize)]
pub struct MapClassification {
    pub cosymplectomorphism: bool,
    pub almost_cosymplectomorphism: bool,
    /// Range of `f = ln(phi^*(eta)(xi))`.
    pub log_factor: Range,
    /// `max |phi^* omega - omega|`.
    pub residual_omega: f64,
    /// `max |phi^* eta - e^f eta|`.
    pub residual_eta: f64,
    #[serde(skip)]
    pub conformal_log_factor: Option<ScalarField>,
}

pub fn classify_map(s: &CosymplecticStructure, phi: &SmoothMap, t: f64, grid: &Grid, tol: f64) -> Result<MapClassification> {
    check_invertible(s, t, grid)?;
    let xi = reeb_vector(s);
    let residual_omega = pullback(phi, &s.omega).sub(&s.omega).max_abs(t, grid);
    let pe = pullback(phi, &s.eta);
    let g = interior_product(&xi, &pe);
    let gr = Range::of(&g, t, grid);
    if !(gr.min > 0.0) {
        return Err(GeomError::Degenerate(format!(
            "non-positive conformal factor phi^*(eta)(xi) = {:e} on the grid",
            gr.min
        )));
    }
    let f = ln_field(&g);
    let log_factor = Range::of(&f, t, grid);
    let residual_eta = pe.sub(&s.eta.times(&exp_field(&f))).max_abs(t, grid);
    let almost = residual_omega < tol && residual_eta < tol;
    Ok(MapClassification {
        cosymplectomorphism: almost && log_factor.max_abs() < tol,
        almost_cosymplectomorphism: almost,
        log_factor,
        residual_omega,
        residual_eta,
        conformal_log_factor: Some(f),
    })
}

/// `max |phi_* xi - e^{f o phi^-1} xi|`, with `f` taken from the classification.
pub fn pushforward_reeb_check(
    s: &CosymplecticStructure,
    phi: &SmoothMap,
    class: &MapClassification,
    t: f64,
    grid: &Grid,
) -> Result<f64> {
    if !class.almost_cosymplectomorphism {
        return Err(precondition("map is not an almost cosymplectomorphism"));
    }
    let f = class.conformal_log_factor.as_ref().ok_or_else(|| precondition("classification carries no log factor"))?;
    let inv = phi.inverse()?;
    let xi = reeb_vector(s);
    let pushed = pushforward_field(phi, &xi)?;
    let predicted = xi.times(&exp_field(&pullback(&inv, f)));
    Ok(pushed.sub(&predicted).max_abs(t, grid))
}

/// The field `Y_alpha = p_*(X_alpha)` of the symplectization construction,
/// where `X_alpha` solves `i(X_alpha) Omega = p^* alpha` on `M x R` with
/// `Omega = p^* omega + p^* eta ^ du`.
pub fn symplectization_field(s: &CosymplecticStructure, alpha: &OneForm) -> VectorField {
    VectorField::of(
        s.dim(),
        share(SymplectizationFn { eta: s.eta.f.clone(), omega: s.omega.f.clone(), alpha: alpha.f.clone(), n: s.dim() }),
    )
}

struct SymplectizationFn {
    eta: Fun,
    omega: Fun,
    alpha: Fun,
    n: usize,
}

impl GenericFn for SymplectizationFn {
    fn n_in(&self) -> usize {
        self.n
    }
    fn n_out(&self) -> usize {
        self.n
    }
    fn call<S: Scalar>(&self, t: f64, p: &[S], out: &mut [S]) {
        let n = self.n;
        let m = n + 1;
        let mut e: Buf<S> = smallvec![S::zero(); n];
        let mut w: Buf<S> = smallvec![S::zero(); n * (n - 1) / 2];
        let mut a: Buf<S> = smallvec![S::zero(); n];
        S::eval(&*self.eta, t, p, &mut e);
        S::eval(&*self.omega, t, p, &mut w);
        S::eval(&*self.alpha, t, p, &mut a);
        // Omega(e_i, e_j) on M x R: omega block, plus eta_i in the (i, u) slot.
        let mut big: smallvec::SmallVec<[S; 64]> = smallvec![S::zero(); m * m];
        let b = basis(n);
        for (k, &mask) in b.masks[2].iter().enumerate() {
            let ij = mask_indices(mask);
            big[ij[0] * m + ij[1]] += w[k];
            big[ij[1] * m + ij[0]] -= w[k];
        }
        for i in 0..n {
            big[i * m + n] += e[i];
            big[n * m + i] -= e[i];
        }
        // i_X Omega has components sum_i X^i Omega(e_i, e_j): solve Omega^T X = (alpha, 0).
        let mut mt: smallvec::SmallVec<[S; 64]> = smallvec![S::zero(); m * m];
        for i in 0..m {
            for j in 0..m {
                mt[j * m + i] = big[i * m + j];
            }
        }
        let mut rhs: smallvec::SmallVec<[S; 8]> = smallvec![S::zero(); m];
        rhs[..n].copy_from_slice(&a);
        if !linalg::solve(&mut mt, &mut rhs, m, SINGULAR) {
            rhs.iter_mut().for_each(|x| *x = S::cst(f64::NAN));
        }
        out.copy_from_slice(&rhs[..n]);
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ReebCorrectionReport {
    /// `max |I(Y_alpha - alpha(xi) xi) - alpha|`.
    pub residual_minus: f64,
    /// `max |I(Y_alpha + alpha(xi) xi) - alpha|`.
    pub residual_plus: f64,
    /// `max |L_Z eta|` for `Z = Y_alpha - alpha(xi) xi`.
    pub lie_eta_minus: f64,
    /// `max |eta(Y_alpha)|`.
    pub eta_of_y: f64,
}

/// Residuals of the two sign choices for `Z_alpha = Y_alpha -/+ alpha(xi) xi`.
pub fn reeb_correction_check(s: &CosymplecticStructure, alpha: &OneForm, t: f64, grid: &Grid) -> ReebCorrectionReport {
    let xi = reeb_vector(s);
    let y = symplectization_field(s, alpha);
    let a_xi = interior_product(&xi, alpha);
    let corr = xi.times(&a_xi);
    let z_minus = y.sub(&corr);
    let z_plus = y.add(&corr);
    ReebCorrectionReport {
        residual_minus: apply_i(s, &z_minus).sub(alpha).max_abs(t, grid),
        residual_plus: apply_i(s, &z_plus).sub(alpha).max_abs(t, grid),
        lie_eta_minus: d(&interior_product(&z_minus, &s.eta)).max_abs(t, grid),
        eta_of_y: interior_product(&y, &s.eta).max_abs(t, grid),
    }
}
