//! Splitting of closed 1-forms into a section part plus an exact part, the
//! C- and AC- field norms built from it, and the four length functionals.

use crate::ad::{share, Buf, Fun, GenericFn, Scalar};
use crate::cosym::{
    apply_i, classify_field, CosymplecticStructure, FieldClassification, Range,
};
use crate::error::{invalid, precondition, GeomError, Result};
use crate::flux::HomologyBasis;
use crate::forms::{
    d, form_norm, integrate_function, interior_product, lie_derivative, line_integral, sup_norm, Form, OneForm,
    ScalarField, VectorField,
};
use crate::isotopy::{invert_isotopy, Isotopy};
use crate::linalg::{self, gauss_legendre};
use crate::manifold::{c0_distance, FactorSpec, Grid, GridSpec, ManifoldChart};
use serde::{Deserialize, Serialize};
use smallvec::smallvec;
use std::f64::consts::PI;

/// Grid-weighted averages of the components of `beta` along the periodic
/// coordinates, in the order of [`ManifoldChart::homology_coords`].
pub fn harmonic_coefficients(m: &ManifoldChart, beta: &OneForm, t: f64, grid: &Grid) -> Vec<f64> {
    let hc = m.homology_coords();
    let mut sums = vec![0.0; hc.len()];
    let mut total = 0.0;
    let mut v = vec![0.0; m.dim()];
    for (i, p) in grid.points().enumerate() {
        let w = grid.weight(i);
        beta.f.eval_f64(t, p, &mut v);
        for (s, &k) in sums.iter_mut().zip(&hc) {
            *s += w * v[k];
        }
        total += w;
    }
    sums.iter().map(|s| s / total).collect()
}

/// A linear section of `Z^1 -> H^1`.
#[derive(Clone, Debug)]
pub enum SectionSpec {
    /// Constant-coefficient forms `sum c_k dx_k` on the periodic coordinates.
    CoefficientAverage,
    /// Closed forms `beta_k` whose period matrix on the coordinate circles is invertible.
    UserBasis { forms: Vec<OneForm> },
}

impl SectionSpec {
    /// `beta_k = lambda_k d(theta_k + eps sin theta_k)` on each periodic coordinate.
    pub fn rescaled_circles(m: &ManifoldChart, scales: &[f64], eps: f64) -> Result<SectionSpec> {
        let hc = m.homology_coords();
        if scales.len() != hc.len() {
            return Err(invalid(format!("need {} scales, got {}", hc.len(), scales.len())));
        }
        let n = m.dim();
        let forms = hc
            .iter()
            .zip(scales)
            .map(|(&k, &lam)| Form::of(n, 1, share(BumpedCircleFn { n, k, lam, eps })))
            .collect();
        Ok(SectionSpec::UserBasis { forms })
    }

    pub fn label(&self) -> &'static str {
        match self {
            SectionSpec::CoefficientAverage => "coefficient-average",
            SectionSpec::UserBasis { .. } => "user-basis",
        }
    }
}

struct BumpedCircleFn {
    n: usize,
    k: usize,
    lam: f64,
    eps: f64,
}
impl GenericFn for BumpedCircleFn {
    fn n_in(&self) -> usize {
        self.n
    }
    fn n_out(&self) -> usize {
        self.n
    }
    fn call<S: Scalar>(&self, _t: f64, p: &[S], out: &mut [S]) {
        for o in out.iter_mut() {
            *o = S::zero();
        }
        out[self.k] = (p[self.k].cos() * self.eps + 1.0) * self.lam;
    }
}

/// `alpha = s_part + dU`.
#[derive(Clone, Debug)]
pub struct SplitForm {
    pub s_part: OneForm,
    /// Zero-mean potential `U` of the exact part.
    pub potential: ScalarField,
    /// Coordinates of `s_part` in the section basis.
    pub coefficients: Vec<f64>,
    /// Largest loop integral of `alpha - s_part`.
    pub loop_residual: f64,
    /// `max U - min U` on the splitting grid.
    pub osc: f64,
    pub t: f64,
}

impl SplitForm {
    /// `max |dU - (alpha - s_part)|`.
    pub fn potential_residual(&self, alpha: &OneForm, grid: &Grid) -> f64 {
        d(&self.potential).sub(&alpha.sub(&self.s_part)).max_abs(self.t, grid)
    }
}

/// Line integral of an exact 1-form from `base` along coordinate paths.
struct PathPotentialFn {
    a: Fun,
    base: Vec<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    shift: f64,
}
impl GenericFn for PathPotentialFn {
    fn n_in(&self) -> usize {
        self.base.len()
    }
    fn n_out(&self) -> usize {
        1
    }
    fn call<S: Scalar>(&self, t: f64, p: &[S], out: &mut [S]) {
        let n = self.base.len();
        let mut q: Buf<S> = self.base.iter().map(|&b| S::cst(b)).collect();
        let mut v: Buf<S> = smallvec![S::zero(); n];
        let mut acc = S::zero();
        for k in 0..n {
            let dk = p[k] - self.base[k];
            let mut seg = S::zero();
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                q[k] = dk * *x + self.base[k];
                S::eval(&*self.a, t, &q, &mut v);
                seg += v[k] * *w;
            }
            acc += seg * dk;
            q[k] = p[k];
        }
        out[0] = acc - self.shift;
    }
}

pub fn split_closed_form(
    m: &ManifoldChart,
    alpha: &OneForm,
    section: &SectionSpec,
    t: f64,
    grid: &Grid,
    tol: f64,
) -> Result<SplitForm> {
    let closed = d(alpha).max_abs(t, grid);
    if closed > 1e-6 {
        return Err(GeomError::NotClosed(format!("|d alpha| = {closed:e}")));
    }
    let n = m.dim();
    let hc = m.homology_coords();
    let basis = HomologyBasis::coordinate_circles(m, grid.first_point())?;
    let n_loop = 2 * grid.shape.iter().copied().max().unwrap_or(32).max(32);
    let (s_part, coefficients) = match section {
        SectionSpec::CoefficientAverage => {
            let c = harmonic_coefficients(m, alpha, t, grid);
            let mut full = vec![0.0; n];
            for (&k, &ck) in hc.iter().zip(&c) {
                full[k] = ck;
            }
            (Form::covector(&full), c)
        }
        SectionSpec::UserBasis { forms } => {
            let r = hc.len();
            if forms.len() != r {
                return Err(invalid(format!("section basis has {} forms, H^1 has rank {r}", forms.len())));
            }
            let mut period = vec![0.0; r * r];
            let mut rhs = vec![0.0; r];
            for (j, lp) in basis.loops.iter().enumerate() {
                rhs[j] = line_integral(m, alpha, t, lp, n_loop)?;
                for (k, b) in forms.iter().enumerate() {
                    period[j * r + k] = line_integral(m, b, t, lp, n_loop)?;
                }
            }
            if !linalg::solve(&mut period, &mut rhs, r, 1e-12) {
                return Err(GeomError::Degenerate("section basis has a singular period matrix".into()));
            }
            let terms: Vec<(f64, &Form)> = rhs.iter().copied().zip(forms.iter()).collect();
            (Form::zero(n, 1).lin(&terms), rhs)
        }
    };
    let exact = alpha.sub(&s_part);
    let scale = 1.0 + alpha.max_abs(t, grid);
    let mut loop_residual: f64 = 0.0;
    for lp in &basis.loops {
        loop_residual = loop_residual.max(line_integral(m, &exact, t, lp, n_loop)?.abs());
    }
    if loop_residual > tol * scale {
        return Err(GeomError::NotClosed(format!(
            "path integrals of the exact part are inconsistent (largest loop integral {loop_residual:e})"
        )));
    }
    let (nodes, weights) = gauss_legendre(20);
    let raw = PathPotentialFn { a: exact.f.clone(), base: grid.first_point().to_vec(), nodes, weights, shift: 0.0 };
    let mut o = [0.0];
    let mut num = 0.0;
    let mut den = 0.0;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (i, p) in grid.points().enumerate() {
        raw.call(t, p, &mut o);
        let w = grid.weight(i) * m.volume_density(p);
        num += w * o[0];
        den += w;
        lo = lo.min(o[0]);
        hi = hi.max(o[0]);
    }
    let potential = Form::of(n, 0, share(PathPotentialFn { shift: num / den, ..raw }));
    Ok(SplitForm { s_part, potential, coefficients, loop_residual, osc: hi - lo, t })
}

pub fn osc(f: &ScalarField, t: f64, grid: &Grid) -> f64 {
    let r = Range::of(f, t, grid);
    r.max - r.min
}

/// Riemannian `L^2` norm `(int |a|^2 dvol)^{1/2}`.
pub fn l2_norm(m: &ManifoldChart, a: &Form, t: f64, grid: &Grid) -> f64 {
    let mut v = vec![0.0; a.len()];
    integrate_function(m, grid, |p| {
        a.f.eval_f64(t, p, &mut v);
        form_norm(m, p, a.degree, &v).powi(2)
    })
    .sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HarmonicNorm {
    L2,
    CoefficientL1,
}

#[derive(Clone, Debug)]
pub struct NormOptions {
    pub section: SectionSpec,
    /// Take `Vol = 1` in the Reeb term instead of the computed volume.
    pub paper_normalization: bool,
    pub harmonic: HarmonicNorm,
    pub tol: f64,
}

impl Default for NormOptions {
    fn default() -> Self {
        NormOptions {
            section: SectionSpec::CoefficientAverage,
            paper_normalization: false,
            harmonic: HarmonicNorm::L2,
            tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FieldNorm {
    pub harmonic_l2: f64,
    pub harmonic_l1: f64,
    /// The harmonic term selected by the options.
    pub harmonic: f64,
    pub osc: f64,
    /// `|eta(X)|` (C norm) or `Theta(X)` (AC norm).
    pub reeb: f64,
    pub total: f64,
}

impl FieldNorm {
    fn new(harmonic_l2: f64, harmonic_l1: f64, osc: f64, reeb: f64, opts: &NormOptions) -> Self {
        let harmonic = match opts.harmonic {
            HarmonicNorm::L2 => harmonic_l2,
            HarmonicNorm::CoefficientL1 => harmonic_l1,
        };
        FieldNorm { harmonic_l2, harmonic_l1, harmonic, osc, reeb, total: harmonic + osc + reeb }
    }
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// `|| K + H ||_{L^2} + osc(U + V) + |eta(X)|` for a cosymplectic `X` with constant `eta(X)`.
pub fn field_norm_c(
    s: &CosymplecticStructure,
    x: &VectorField,
    t: f64,
    grid: &Grid,
    opts: &NormOptions,
) -> Result<FieldNorm> {
    let lw = lie_derivative(x, &s.omega).max_abs(t, grid);
    let le = lie_derivative(x, &s.eta).max_abs(t, grid);
    if !(lw < opts.tol && le < opts.tol) {
        return Err(precondition(format!("field is not cosymplectic (|L_X omega| = {lw:e}, |L_X eta| = {le:e})")));
    }
    let ex = interior_product(x, &s.eta);
    let r = Range::of(&ex, t, grid);
    if !r.is_constant() {
        return Err(precondition(format!(
            "eta(X) is not constant (range [{:e}, {:e}]), so |eta(X)| is not a number",
            r.min, r.max
        )));
    }
    let a = split_closed_form(&s.chart, &interior_product(x, &s.omega), &opts.section, t, grid, opts.tol)?;
    let b = split_closed_form(&s.chart, &s.eta.times(&ex), &opts.section, t, grid, opts.tol)?;
    let harm = a.s_part.add(&b.s_part);
    let coeffs: Vec<f64> = a.coefficients.iter().zip(&b.coefficients).map(|(p, q)| p + q).collect();
    let pot = a.potential.add(&b.potential);
    Ok(FieldNorm::new(l2_norm(&s.chart, &harm, t, grid), l1(&coeffs), osc(&pot, t, grid), r.mean.abs(), opts))
}

/// `Theta(X) = (1/Vol) int |eta(X)| eta ^ omega^n`.
pub fn theta(s: &CosymplecticStructure, x: &VectorField, t: f64, grid: &Grid, paper_normalization: bool) -> f64 {
    let ex = interior_product(x, &s.eta);
    let vol = s.volume_form();
    let mut a = [0.0];
    let mut b = [0.0];
    let num = grid.integrate(|p| {
        ex.f.eval_f64(t, p, &mut a);
        vol.f.eval_f64(t, p, &mut b);
        a[0].abs() * b[0]
    });
    if paper_normalization {
        num
    } else {
        num / s.volume(t, grid)
    }
}

/// `|| H_omega ||_{L^2} + osc(U_omega) + Theta(X)` for an (almost) cosymplectic `X`.
pub fn field_norm_ac(
    s: &CosymplecticStructure,
    x: &VectorField,
    t: f64,
    grid: &Grid,
    opts: &NormOptions,
) -> Result<FieldNorm> {
    let a = split_closed_form(&s.chart, &interior_product(x, &s.omega), &opts.section, t, grid, opts.tol)?;
    Ok(FieldNorm::new(
        l2_norm(&s.chart, &a.s_part, t, grid),
        l1(&a.coefficients),
        a.osc,
        theta(s, x, t, grid, opts.paper_normalization),
        opts,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LengthKind {
    CoHoferLike,
    CoHofer,
    AlmostCoHoferLike,
    AlmostCoHamiltonian,
}

impl LengthKind {
    pub fn parse(s: &str) -> Result<LengthKind> {
        Ok(match s {
            "co-hofer-like" | "co" => LengthKind::CoHoferLike,
            "co-hofer" | "ch" => LengthKind::CoHofer,
            "almost-co-hofer-like" | "aco" => LengthKind::AlmostCoHoferLike,
            "almost-co-hamiltonian" | "ah" => LengthKind::AlmostCoHamiltonian,
            _ => return Err(invalid(format!("unknown length kind {s:?}"))),
        })
    }
    fn hofer_like(self) -> bool {
        matches!(self, LengthKind::CoHoferLike | LengthKind::AlmostCoHoferLike)
    }
    fn admits(self, c: &FieldClassification) -> bool {
        match self {
            LengthKind::CoHoferLike => c.cosymplectic,
            LengthKind::CoHofer => c.co_hamiltonian,
            LengthKind::AlmostCoHoferLike => c.cosymplectic || c.almost_cosymplectic,
            LengthKind::AlmostCoHamiltonian => c.co_hamiltonian || c.almost_co_hamiltonian,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LengthVersion {
    /// `max_t` of the integrand.
    #[serde(rename = "L-inf")]
    Sup,
    /// `int_0^1` of the integrand.
    #[serde(rename = "L-(1,inf)")]
    Integral,
}

impl LengthVersion {
    pub fn parse(s: &str) -> Result<LengthVersion> {
        Ok(match s {
            "inf" | "L-inf" | "sup" => LengthVersion::Sup,
            "1-inf" | "L-(1,inf)" | "integral" => LengthVersion::Integral,
            _ => return Err(invalid(format!("unknown length version {s:?}"))),
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LengthReport {
    pub kind: LengthKind,
    pub version: LengthVersion,
    pub value: f64,
    pub sup_value: f64,
    pub integral_value: f64,
    pub times: Vec<f64>,
    pub harmonic: Vec<f64>,
    pub osc: Vec<f64>,
    /// `sup |eta(X_t)|` (co kinds) or `Theta_t` (almost kinds).
    pub reeb: Vec<f64>,
    /// Whether `eta(X_t)` was constant in space, making `|C^t|` a plain number.
    pub reeb_constant: Vec<bool>,
    pub integrand: Vec<f64>,
}

fn check_kind(s: &CosymplecticStructure, iso: &Isotopy, kind: LengthKind, tol: f64) -> Result<()> {
    let coarse = s.chart.grid(8, 9);
    for t in [0.0, 0.5, 1.0] {
        let c = classify_field(s, &iso.generator, t, &coarse, tol.max(1e-6))?;
        if !kind.admits(&c) {
            return Err(precondition(format!(
                "{} does not admit a {kind:?} length at t = {t} (cosymplectic {}, almost {}, co-hamiltonian {}, almost co-hamiltonian {})",
                iso.label, c.cosymplectic, c.almost_cosymplectic, c.co_hamiltonian, c.almost_co_hamiltonian
            )));
        }
    }
    Ok(())
}

/// Length of `iso` sampled at `n_t + 1` equispaced times.
pub fn length(
    s: &CosymplecticStructure,
    iso: &Isotopy,
    kind: LengthKind,
    version: LengthVersion,
    n_t: usize,
    grid: &Grid,
    opts: &NormOptions,
) -> Result<LengthReport> {
    if n_t == 0 {
        return Err(invalid("need at least one time step"));
    }
    check_kind(s, iso, kind, opts.tol)?;
    let m = &s.chart;
    let x = &iso.generator;
    let eta_x = interior_product(x, &s.eta);
    let mut rep = LengthReport {
        kind,
        version,
        value: 0.0,
        sup_value: 0.0,
        integral_value: 0.0,
        times: Vec::new(),
        harmonic: Vec::new(),
        osc: Vec::new(),
        reeb: Vec::new(),
        reeb_constant: Vec::new(),
        integrand: Vec::new(),
    };
    for k in 0..=n_t {
        let t = k as f64 / n_t as f64;
        let (h, o, r) = match kind {
            LengthKind::CoHoferLike | LengthKind::CoHofer => {
                let sp = split_closed_form(m, &apply_i(s, x), &opts.section, t, grid, opts.tol)?;
                let h = if kind == LengthKind::CoHofer {
                    0.0
                } else {
                    match opts.harmonic {
                        HarmonicNorm::L2 => l2_norm(m, &sp.s_part, t, grid),
                        HarmonicNorm::CoefficientL1 => l1(&sp.coefficients),
                    }
                };
                let er = Range::of(&eta_x, t, grid);
                rep.reeb_constant.push(er.is_constant());
                (h, sp.osc, er.max_abs())
            }
            LengthKind::AlmostCoHoferLike | LengthKind::AlmostCoHamiltonian => {
                let sp = split_closed_form(m, &interior_product(x, &s.omega), &opts.section, t, grid, opts.tol)?;
                let h = if kind == LengthKind::AlmostCoHamiltonian {
                    0.0
                } else {
                    match opts.harmonic {
                        HarmonicNorm::L2 => l2_norm(m, &sp.s_part, t, grid),
                        HarmonicNorm::CoefficientL1 => l1(&sp.coefficients),
                    }
                };
                rep.reeb_constant.push(Range::of(&eta_x, t, grid).is_constant());
                (h, sp.osc, theta(s, x, t, grid, opts.paper_normalization))
            }
        };
        rep.times.push(t);
        rep.harmonic.push(h);
        rep.osc.push(o);
        rep.reeb.push(r);
        rep.integrand.push(h + o + r);
    }
    let f = &rep.integrand;
    rep.sup_value = f.iter().copied().fold(0.0, f64::max);
    rep.integral_value = (f.iter().sum::<f64>() - 0.5 * (f[0] + f[n_t])) / n_t as f64;
    rep.value = match version {
        LengthVersion::Sup => rep.sup_value,
        LengthVersion::Integral => rep.integral_value,
    };
    Ok(rep)
}

#[derive(Clone, Debug, Serialize)]
pub struct NormBound {
    /// An upper bound on the energy or norm of the target map, never the norm itself.
    pub upper_bound: f64,
    pub forward: f64,
    /// Bound from inverted candidates (Hofer-like kinds only).
    pub backward: Option<f64>,
    pub lengths: Vec<f64>,
    pub best_candidate: usize,
    pub endpoint_distance: Vec<f64>,
}

/// Minimum length over candidate isotopies ending at `phi`.
#[allow(clippy::too_many_arguments)]
pub fn norm_upper_bound(
    s: &CosymplecticStructure,
    phi: &crate::forms::SmoothMap,
    candidates: &[Isotopy],
    kind: LengthKind,
    version: LengthVersion,
    n_t: usize,
    grid: &Grid,
    opts: &NormOptions,
) -> Result<NormBound> {
    if candidates.is_empty() {
        return Err(precondition("norm bound needs at least one candidate isotopy"));
    }
    let mut lengths = Vec::new();
    let mut dist = Vec::new();
    for c in candidates {
        let e = c0_distance(&s.chart, &c.time_one().fwd, &phi.fwd, grid);
        if e > 1e-6 {
            return Err(precondition(format!("candidate {} ends at distance {e:e} from the target map", c.label)));
        }
        dist.push(e);
        lengths.push(length(s, c, kind, version, n_t, grid, opts)?.value);
    }
    let (best, forward) = lengths
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    let backward = if kind.hofer_like() {
        let mut b = f64::INFINITY;
        for c in candidates {
            b = b.min(length(s, &invert_isotopy(c)?, kind, version, n_t, grid, opts)?.value);
        }
        Some(b)
    } else {
        None
    };
    let upper_bound = backward.map_or(forward, |b| 0.5 * (forward + b));
    Ok(NormBound { upper_bound, forward, backward, lengths, best_candidate: best, endpoint_distance: dist })
}

#[derive(Clone, Debug, Serialize)]
pub struct ProjectionCheck {
    pub lifted: f64,
    pub base: f64,
    pub holds: bool,
}

struct ProjFormFn {
    a: Fun,
    n: usize,
}
impl GenericFn for ProjFormFn {
    fn n_in(&self) -> usize {
        self.n + 1
    }
    fn n_out(&self) -> usize {
        self.n + 1
    }
    fn call<S: Scalar>(&self, t: f64, p: &[S], out: &mut [S]) {
        S::eval(&*self.a, t, &p[..self.n], &mut out[..self.n]);
        out[self.n] = S::zero();
    }
}

/// `(|p^* alpha|_0 on M x S^1, |alpha|_0 on M)` and whether the first is at most the second.
pub fn sup_norm_projection_check(m: &ManifoldChart, alpha: &OneForm, t: f64, grid: &Grid) -> Result<ProjectionCheck> {
    let n = m.dim();
    let lifted_chart = m.times(FactorSpec::centered_circle(2.0 * PI, "theta"))?;
    let mut res = grid.shape.clone();
    res.push(8);
    let lifted_grid = Grid::new(&lifted_chart, &GridSpec::new(res))?;
    let pa = Form::of(n + 1, 1, share(ProjFormFn { a: alpha.f.clone(), n }));
    let lifted = sup_norm(&lifted_chart, &pa, t, &lifted_grid);
    let base = sup_norm(m, alpha, t, grid);
    Ok(ProjectionCheck { lifted, base, holds: lifted <= base * (1.0 + 1e-12) + 1e-15 })
}

#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceReport {
    pub ratios: Vec<f64>,
    pub min: f64,
    pub max: f64,
    /// Smallest `C` with every ratio in `[1/C, C]`.
    pub constant: f64,
    pub bounded: bool,
}

/// Ratios `||X||^{S1} / ||X||^{S2}` of the C norm under two sections.
pub fn section_equivalence_test(
    s: &CosymplecticStructure,
    s1: &SectionSpec,
    s2: &SectionSpec,
    samples: &[VectorField],
    t: f64,
    grid: &Grid,
    opts: &NormOptions,
) -> Result<EquivalenceReport> {
    if samples.len() < 10 {
        return Err(precondition(format!("need at least 10 samples, got {}", samples.len())));
    }
    let o1 = NormOptions { section: s1.clone(), ..opts.clone() };
    let o2 = NormOptions { section: s2.clone(), ..opts.clone() };
    let mut ratios = Vec::new();
    for (i, x) in samples.iter().enumerate() {
        let a = field_norm_c(s, x, t, grid, &o1)?.total;
        let b = field_norm_c(s, x, t, grid, &o2)?.total;
        if !(a > 1e-12 && b > 1e-12) {
            return Err(GeomError::Degenerate(format!("sample {i} is nonzero but has norm {a:e} / {b:e}")));
        }
        ratios.push(a / b);
    }
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let max = ratios.iter().copied().fold(0.0, f64::max);
    let constant = max.max(1.0 / min);
    Ok(EquivalenceReport { ratios, min, max, constant, bounded: constant.is_finite() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::build_manifold;
    use crate::pointfn;

    fn t2() -> ManifoldChart {
        build_manifold(vec![FactorSpec::circle(2.0 * PI, "a"), FactorSpec::circle(2.0 * PI, "b")], false).unwrap()
    }

    #[test]
    fn averaging_split_on_the_torus() {
        let m = t2();
        let grid = m.grid(32, 33);
        let alpha = Form::of(2, 1, pointfn!(2 => 2, |_t, p| [S::cst(3.0), -p[1].sin()]));
        let sp = split_closed_form(&m, &alpha, &SectionSpec::CoefficientAverage, 0.0, &grid, 1e-8).unwrap();
        assert!((sp.coefficients[0] - 3.0).abs() < 1e-12 && sp.coefficients[1].abs() < 1e-12);
        // potential is cos(b) minus its mean (which is 0)
        for p in grid.points().step_by(37) {
            assert!((sp.potential.value(0.0, p) - p[1].cos()).abs() < 1e-10);
        }
        assert!(sp.potential_residual(&alpha, &grid) < 1e-8);
        assert!((sp.osc - 2.0).abs() < 1e-12);
    }

    #[test]
    fn non_closed_form_is_rejected() {
        let m = t2();
        let grid = m.grid(16, 17);
        let alpha = Form::of(2, 1, pointfn!(2 => 2, |_t, p| [p[1].sin(), S::cst(0.0)]));
        assert!(matches!(
            split_closed_form(&m, &alpha, &SectionSpec::CoefficientAverage, 0.0, &grid, 1e-8),
            Err(GeomError::NotClosed(_))
        ));
    }

    #[test]
    fn oscillation_oracles() {
        let m = t2();
        let grid = m.grid(32, 33);
        assert_eq!(osc(&Form::constant(2, 0, vec![4.0]), 0.0, &grid), 0.0);
        let f = Form::of(2, 0, pointfn!(2 => 1, |_t, p| [(p[0] * 2.0).cos()]));
        assert!((osc(&f, 0.0, &grid) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn user_basis_reproduces_the_class() {
        let m = t2();
        let grid = m.grid(32, 33);
        let sec = SectionSpec::rescaled_circles(&m, &[2.0, 0.5], 0.3).unwrap();
        let alpha = Form::covector(&[1.0, -1.0]);
        let sp = split_closed_form(&m, &alpha, &sec, 0.0, &grid, 1e-8).unwrap();
        assert!((sp.coefficients[0] - 0.5).abs() < 1e-10);
        assert!((sp.coefficients[1] + 2.0).abs() < 1e-10);
        assert!(sp.potential_residual(&alpha, &grid) < 1e-8);
    }
}
