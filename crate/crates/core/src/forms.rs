//! Differential forms and vector fields stored as coefficient evaluators.
//!
//! A k-form on a chart of dimension `n` has `C(n, k)` coefficients indexed by
//! increasing index tuples in lexicographic order, so a 2-form stores its
//! strict upper triangle row by row. Time enters every evaluator as a
//! parameter; autonomous objects ignore it.

use crate::ad::{eval_vec, jacobian, share, Buf, Fun, GenericFn, Scalar, MAXD};
use crate::error::{invalid, precondition, GeomError, Result};
use crate::linalg;
use crate::manifold::{Grid, ManifoldChart};
use smallvec::{smallvec, SmallVec};
use std::fmt::Write as _;
use std::sync::OnceLock;

/// Index bookkeeping for the exterior algebra of `R^dim`.
pub struct Basis {
    pub dim: usize,
    /// Bit masks of each degree, lexicographic in their index tuples.
    pub masks: Vec<Vec<u32>>,
    /// `index[mask]` = position of `mask` in `masks[popcount(mask)]`.
    pub index: Vec<usize>,
}

fn build_basis(dim: usize) -> Basis {
    let mut masks = vec![Vec::new(); dim + 1];
    let mut tuples: Vec<Vec<usize>> = (0u32..(1 << dim))
        .map(|m| (0..dim).filter(|i| m & (1 << i) != 0).collect())
        .collect();
    tuples.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
    let mut index = vec![0; 1 << dim];
    for t in tuples {
        let m: u32 = t.iter().map(|i| 1u32 << i).sum();
        index[m as usize] = masks[t.len()].len();
        masks[t.len()].push(m);
    }
    Basis { dim, masks, index }
}

pub fn basis(dim: usize) -> &'static Basis {
    static B: OnceLock<Vec<Basis>> = OnceLock::new();
    &B.get_or_init(|| (0..=MAXD).map(build_basis).collect())[dim]
}

pub fn n_components(dim: usize, k: usize) -> usize {
    if k > dim {
        0
    } else {
        basis(dim).masks[k].len()
    }
}

pub fn mask_indices(m: u32) -> SmallVec<[usize; 6]> {
    (0..32).filter(|i| m & (1 << i) != 0).collect()
}

/// Position of `i` among the indices of `mask` that are smaller than it.
fn rank_in(mask: u32, i: usize) -> u32 {
    (mask & ((1u32 << i) - 1)).count_ones()
}

/// A time-dependent differential form of fixed degree.
#[derive(Clone)]
pub struct Form {
    pub dim: usize,
    pub degree: usize,
    pub f: Fun,
}

pub type ScalarField = Form;
pub type OneForm = Form;
pub type TwoForm = Form;

impl std::fmt::Debug for Form {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(fm, "Form(dim={}, degree={})", self.dim, self.degree)
    }
}

impl Form {
    pub fn new(dim: usize, degree: usize, f: Fun) -> Result<Form> {
        if f.n_in() != dim || f.n_out() != n_components(dim, degree) {
            return Err(invalid(format!(
                "{}-form on dim {dim} needs {} coefficients of {dim} inputs, got {} of {}",
                degree,
                n_components(dim, degree),
                f.n_out(),
                f.n_in()
            )));
        }
        Ok(Form { dim, degree, f })
    }

    /// Like [`Form::new`] but panics on a shape mismatch; for catalog code.
    pub fn of(dim: usize, degree: usize, f: Fun) -> Form {
        Form::new(dim, degree, f).expect("form shape")
    }

    pub fn len(&self) -> usize {
        n_components(self.dim, self.degree)
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn constant(dim: usize, degree: usize, coeffs: Vec<f64>) -> Form {
        assert_eq!(coeffs.len(), n_components(dim, degree));
        Form::of(dim, degree, share(ConstFn { n_in: dim, c: coeffs }))
    }
    pub fn zero(dim: usize, degree: usize) -> Form {
        Form::constant(dim, degree, vec![0.0; n_components(dim, degree)])
    }
    /// Constant 1-form `sum c_i dx^i`.
    pub fn covector(c: &[f64]) -> Form {
        Form::constant(c.len(), 1, c.to_vec())
    }
    /// `dx^i`.
    pub fn dx(dim: usize, i: usize) -> Form {
        let mut c = vec![0.0; dim];
        c[i] = 1.0;
        Form::constant(dim, 1, c)
    }
    /// `dx^i ^ dx^j` for `i < j`.
    pub fn dxdx(dim: usize, i: usize, j: usize) -> Form {
        assert!(i < j);
        let b = basis(dim);
        let mut c = vec![0.0; n_components(dim, 2)];
        c[b.index[((1 << i) | (1 << j)) as usize]] = 1.0;
        Form::constant(dim, 2, c)
    }

    /// A form known only on `f64`; derivatives by central differences.
    pub fn sampled<F>(dim: usize, degree: usize, f: F) -> Form
    where
        F: Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Form::of(dim, degree, crate::ad::sampled(dim, n_components(dim, degree), f))
    }

    pub fn eval(&self, p: &[f64]) -> Vec<f64> {
        eval_vec(&*self.f, 0.0, p)
    }
    pub fn eval_t(&self, t: f64, p: &[f64]) -> Vec<f64> {
        eval_vec(&*self.f, t, p)
    }
    /// Value of a scalar field.
    pub fn value(&self, t: f64, p: &[f64]) -> f64 {
        let mut o = [0.0];
        self.f.eval_f64(t, p, &mut o);
        o[0]
    }

    /// Coefficient of `dx^i1 ^ ... ^ dx^ik` (indices increasing).
    pub fn coeff(&self, vals: &[f64], idx: &[usize]) -> f64 {
        let m: u32 = idx.iter().map(|i| 1u32 << i).sum();
        vals[basis(self.dim).index[m as usize]]
    }

    pub fn add(&self, o: &Form) -> Form {
        self.lin(&[(1.0, o)])
    }
    pub fn sub(&self, o: &Form) -> Form {
        self.lin(&[(-1.0, o)])
    }
    pub fn scale(&self, c: f64) -> Form {
        Form::of(self.dim, self.degree, share(LinFn { terms: vec![(c, self.f.clone())] }))
    }
    /// `self + sum c_i o_i`.
    pub fn lin(&self, terms: &[(f64, &Form)]) -> Form {
        let mut v = vec![(1.0, self.f.clone())];
        for (c, o) in terms {
            assert_eq!((o.dim, o.degree), (self.dim, self.degree), "mismatched forms in sum");
            v.push((*c, o.f.clone()));
        }
        Form::of(self.dim, self.degree, share(LinFn { terms: v }))
    }
    /// Multiply by a scalar field.
    pub fn times(&self, g: &ScalarField) -> Form {
        assert_eq!(g.degree, 0);
        Form::of(self.dim, self.degree, share(MulFn { g: g.f.clone(), a: self.f.clone() }))
    }
    /// `(1 - t) self + t other`.
    pub fn lerp(&self, other: &Form) -> Form {
        Form::of(self.dim, self.degree, share(LerpFn { a: self.f.clone(), b: other.f.clone() }))
    }
    /// Freeze time at `t`.
    pub fn at_time(&self, t: f64) -> Form {
        Form::of(self.dim, self.degree, share(FixedTime { f: self.f.clone(), t }))
    }
    /// Evaluate at time `t + shift`.
    pub fn time_shift(&self, shift: f64) -> Form {
        Form::of(self.dim, self.degree, share(TimeShift { f: self.f.clone(), shift }))
    }

    /// Largest absolute coefficient over the grid.
    pub fn max_abs(&self, t: f64, grid: &Grid) -> f64 {
        let mut out = vec![0.0; self.len()];
        let mut m: f64 = 0.0;
        for p in grid.points() {
            self.f.eval_f64(t, p, &mut out);
            for x in &out {
                m = m.max(x.abs());
            }
        }
        m
    }

    /// Sampled coefficients with point coordinates, one CSV row per grid point.
    pub fn to_csv(&self, m: &ManifoldChart, grid: &Grid, t: f64) -> String {
        let b = basis(self.dim);
        let mut s = m.labels().join(",");
        for mask in &b.masks[self.degree] {
            let name: Vec<String> = mask_indices(*mask).iter().map(|i| format!("d{}", m.labels()[*i])).collect();
            let _ = write!(s, ",{}", if name.is_empty() { "value".to_string() } else { name.join("^") });
        }
        s.push('\n');
        for p in grid.points() {
            let v = self.eval_t(t, p);
            let row: Vec<String> = p.iter().chain(v.iter()).map(|x| x.to_string()).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

/// A time-dependent vector field given by its components.
#[derive(Clone)]
pub struct VectorField {
    pub dim: usize,
    pub f: Fun,
}

impl std::fmt::Debug for VectorField {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(fm, "VectorField(dim={})", self.dim)
    }
}

impl VectorField {
    pub fn new(dim: usize, f: Fun) -> Result<VectorField> {
        if f.n_in() != dim || f.n_out() != dim {
            return Err(invalid(format!("vector field on dim {dim} got shape {} -> {}", f.n_in(), f.n_out())));
        }
        Ok(VectorField { dim, f })
    }
    pub fn of(dim: usize, f: Fun) -> VectorField {
        VectorField::new(dim, f).expect("vector field shape")
    }
    pub fn constant(c: &[f64]) -> VectorField {
        VectorField::of(c.len(), share(ConstFn { n_in: c.len(), c: c.to_vec() }))
    }
    pub fn zero(dim: usize) -> VectorField {
        VectorField::constant(&vec![0.0; dim])
    }
    /// `d/dx^i`.
    pub fn coordinate(dim: usize, i: usize) -> VectorField {
        let mut c = vec![0.0; dim];
        c[i] = 1.0;
        VectorField::constant(&c)
    }
    pub fn sampled<F>(dim: usize, f: F) -> VectorField
    where
        F: Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        VectorField::of(dim, crate::ad::sampled(dim, dim, f))
    }
    pub fn eval(&self, p: &[f64]) -> Vec<f64> {
        eval_vec(&*self.f, 0.0, p)
    }
    pub fn eval_t(&self, t: f64, p: &[f64]) -> Vec<f64> {
        eval_vec(&*self.f, t, p)
    }
    pub fn add(&self, o: &VectorField) -> VectorField {
        self.lin(&[(1.0, o)])
    }
    pub fn sub(&self, o: &VectorField) -> VectorField {
        self.lin(&[(-1.0, o)])
    }
    pub fn scale(&self, c: f64) -> VectorField {
        VectorField::of(self.dim, share(LinFn { terms: vec![(c, self.f.clone())] }))
    }
    pub fn lin(&self, terms: &[(f64, &VectorField)]) -> VectorField {
        let mut v = vec![(1.0, self.f.clone())];
        for (c, o) in terms {
            v.push((*c, o.f.clone()));
        }
        VectorField::of(self.dim, share(LinFn { terms: v }))
    }
    pub fn times(&self, g: &ScalarField) -> VectorField {
        VectorField::of(self.dim, share(MulFn { g: g.f.clone(), a: self.f.clone() }))
    }
    pub fn at_time(&self, t: f64) -> VectorField {
        VectorField::of(self.dim, share(FixedTime { f: self.f.clone(), t }))
    }
    /// Components as a 1-form through the coordinate identification (for norms).
    pub fn max_abs(&self, t: f64, grid: &Grid) -> f64 {
        Form { dim: self.dim, degree: 1, f: self.f.clone() }.max_abs(t, grid)
    }
}

/// A time-dependent smooth self-map of a chart with an optional inverse.
#[derive(Clone)]
pub struct SmoothMap {
    pub dim: usize,
    pub fwd: Fun,
    pub inv: Option<Fun>,
}

impl std::fmt::Debug for SmoothMap {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(fm, "SmoothMap(dim={}, inverse={})", self.dim, self.inv.is_some())
    }
}

impl SmoothMap {
    pub fn new(dim: usize, fwd: Fun, inv: Option<Fun>) -> Result<SmoothMap> {
        let ok = |f: &Fun| f.n_in() == dim && f.n_out() == dim;
        if !ok(&fwd) || !inv.as_ref().map_or(true, ok) {
            return Err(invalid(format!("map on dim {dim} has the wrong shape")));
        }
        Ok(SmoothMap { dim, fwd, inv })
    }
    pub fn of(dim: usize, fwd: Fun, inv: Option<Fun>) -> SmoothMap {
        SmoothMap::new(dim, fwd, inv).expect("map shape")
    }
    pub fn identity(dim: usize) -> SmoothMap {
        let id = share(IdFn { n: dim });
        SmoothMap::of(dim, id.clone(), Some(id))
    }
    pub fn eval(&self, p: &[f64]) -> Vec<f64> {
        eval_vec(&*self.fwd, 0.0, p)
    }
    pub fn eval_t(&self, t: f64, p: &[f64]) -> Vec<f64> {
        eval_vec(&*self.fwd, t, p)
    }
    pub fn eval_inv(&self, p: &[f64]) -> Result<Vec<f64>> {
        let inv = self.inv.as_ref().ok_or_else(|| precondition("map has no inverse"))?;
        Ok(eval_vec(&**inv, 0.0, p))
    }
    /// Row-major Jacobian at `p`.
    pub fn jacobian(&self, t: f64, p: &[f64]) -> Vec<f64> {
        jacobian(&*self.fwd, t, p).1
    }
    pub fn inverse(&self) -> Result<SmoothMap> {
        let inv = self.inv.clone().ok_or_else(|| precondition("map has no inverse"))?;
        Ok(SmoothMap { dim: self.dim, fwd: inv, inv: Some(self.fwd.clone()) })
    }
    /// `self o other`.
    pub fn compose(&self, other: &SmoothMap) -> SmoothMap {
        let fwd = share(ComposeFn { outer: self.fwd.clone(), inner: other.fwd.clone() });
        let inv = match (&self.inv, &other.inv) {
            (Some(a), Some(b)) => Some(share(ComposeFn { outer: b.clone(), inner: a.clone() })),
            _ => None,
        };
        SmoothMap { dim: self.dim, fwd, inv }
    }
    pub fn at_time(&self, t: f64) -> SmoothMap {
        SmoothMap {
            dim: self.dim,
            fwd: share(FixedTime { f: self.fwd.clone(), t }),
            inv: self.inv.as_ref().map(|i| share(FixedTime { f: i.clone(), t })),
        }
    }
    /// Smallest `|det J|` over the grid.
    pub fn min_jacobian_det(&self, t: f64, grid: &Grid) -> f64 {
        grid.points().map(|p| linalg::det(&self.jacobian(t, p), self.dim).abs()).fold(f64::INFINITY, f64::min)
    }
    /// Largest chart distance between `inv(fwd(x))` and `x` over the grid.
    pub fn inverse_defect(&self, m: &ManifoldChart, t: f64, grid: &Grid) -> Result<f64> {
        let inv = self.inv.as_ref().ok_or_else(|| precondition("map has no inverse"))?;
        Ok(grid
            .points()
            .map(|p| {
                let y = eval_vec(&*self.fwd, t, p);
                m.distance(&eval_vec(&**inv, t, &y), p)
            })
            .fold(0.0, f64::max))
    }
}

// ----------------------------------------------------------------------------
// Field-level operations.

pub fn exterior_derivative(a: &Form) -> Form {
    let n = a.dim;
    let k = a.degree + 1;
    assert!(k <= n, "exterior derivative of a top form");
    let b = basis(n);
    let mut terms = Vec::new();
    for (out, &m) in b.masks[k].iter().enumerate() {
        for i in mask_indices(m) {
            let sub = m & !(1 << i);
            let sign = if rank_in(m, i) % 2 == 0 { 1.0 } else { -1.0 };
            terms.push((out, b.index[sub as usize], i, sign));
        }
    }
    Form::of(n, k, share(DFn { a: a.f.clone(), n, n_out: n_components(n, k), terms }))
}

/// Differential of a scalar field.
pub fn d(f: &ScalarField) -> OneForm {
    exterior_derivative(f)
}

fn wedge_terms(n: usize, da: usize, db: usize) -> Vec<(usize, usize, usize, f64)> {
    let b = basis(n);
    let mut terms = Vec::new();
    for (ia, &ma) in b.masks[da].iter().enumerate() {
        for (ib, &mb) in b.masks[db].iter().enumerate() {
            if ma & mb != 0 {
                continue;
            }
            let mut inv = 0;
            for j in mask_indices(mb) {
                inv += (ma >> (j + 1)).count_ones();
            }
            let sign = if inv % 2 == 0 { 1.0 } else { -1.0 };
            terms.push((b.index[(ma | mb) as usize], ia, ib, sign));
        }
    }
    terms
}

pub fn wedge(a: &Form, b: &Form) -> Result<Form> {
    if a.dim != b.dim {
        return Err(invalid("wedge of forms on different charts"));
    }
    let k = a.degree + b.degree;
    if k > a.dim {
        return Err(precondition(format!("wedge degree {k} exceeds dimension {}", a.dim)));
    }
    let terms = wedge_terms(a.dim, a.degree, b.degree);
    Ok(Form::of(
        a.dim,
        k,
        share(WedgeFn {
            a: a.f.clone(),
            b: b.f.clone(),
            n: a.dim,
            na: a.len(),
            nb: b.len(),
            n_out: n_components(a.dim, k),
            terms,
        }),
    ))
}

/// `a ^ a ^ ... ^ a` (`k` factors), with `a^0 = 1`.
pub fn power(a: &Form, k: usize) -> Result<Form> {
    let mut acc = Form::constant(a.dim, 0, vec![1.0]);
    for _ in 0..k {
        acc = wedge(&acc, a)?;
    }
    Ok(acc)
}

pub fn interior_product(x: &VectorField, a: &Form) -> Form {
    let n = a.dim;
    assert_eq!(x.dim, n);
    if a.degree == 0 {
        return Form::zero(n, 0);
    }
    let k = a.degree - 1;
    let b = basis(n);
    let mut terms = Vec::new();
    for (out, &m) in b.masks[k].iter().enumerate() {
        for i in 0..n {
            if m & (1 << i) != 0 {
                continue;
            }
            let full = m | (1 << i);
            let sign = if rank_in(full, i) % 2 == 0 { 1.0 } else { -1.0 };
            terms.push((out, i, b.index[full as usize], sign));
        }
    }
    Form::of(
        n,
        k,
        share(InteriorFn { x: x.f.clone(), a: a.f.clone(), n, na: a.len(), n_out: n_components(n, k), terms }),
    )
}

/// `X(f) = df(X)`.
pub fn directional(x: &VectorField, f: &ScalarField) -> ScalarField {
    interior_product(x, &d(f))
}

/// Cartan's formula `L_X = i_X d + d i_X`.
pub fn lie_derivative(x: &VectorField, a: &Form) -> Form {
    if a.degree == 0 {
        return directional(x, a);
    }
    let first = if a.degree < a.dim { Some(interior_product(x, &exterior_derivative(a))) } else { None };
    let second = exterior_derivative(&interior_product(x, a));
    match first {
        Some(f) => f.add(&second),
        None => second,
    }
}

/// `(phi^* a)_x = a_{phi(x)}` composed with the Jacobian in every slot.
pub fn pullback(phi: &SmoothMap, a: &Form) -> Form {
    let n = a.dim;
    assert_eq!(phi.dim, n);
    let b = basis(n);
    let rows: Vec<SmallVec<[usize; 6]>> = b.masks[a.degree].iter().map(|&m| mask_indices(m)).collect();
    Form::of(n, a.degree, share(PullFn { phi: phi.fwd.clone(), a: a.f.clone(), n, rows }))
}

/// Pullback after checking that the Jacobian is nonsingular on the grid.
pub fn pullback_on(phi: &SmoothMap, a: &Form, grid: &Grid) -> Result<Form> {
    let m = phi.min_jacobian_det(0.0, grid);
    if !(m > 1e-12) {
        return Err(GeomError::Degenerate(format!("Jacobian determinant {m:e} on the grid")));
    }
    Ok(pullback(phi, a))
}

/// `(phi_* X)_y = D phi(phi^-1 y) X(phi^-1 y)`.
pub fn pushforward_field(phi: &SmoothMap, x: &VectorField) -> Result<VectorField> {
    let inv = phi.inv.clone().ok_or_else(|| precondition("pushforward needs the inverse map"))?;
    Ok(VectorField::of(x.dim, share(PushFn { phi: phi.fwd.clone(), inv, x: x.f.clone(), n: x.dim })))
}

/// `[X, Y] = DY X - DX Y`.
pub fn lie_bracket(x: &VectorField, y: &VectorField) -> VectorField {
    VectorField::of(x.dim, share(BracketFn { x: x.f.clone(), y: y.f.clone(), n: x.dim }))
}

/// Pointwise dual norm of a 1-form under the flat metric, maximized over the grid.
pub fn sup_norm(m: &ManifoldChart, a: &OneForm, t: f64, grid: &Grid) -> f64 {
    grid.points().map(|p| covector_norm(m, p, &a.eval_t(t, p))).fold(0.0, f64::max)
}

pub fn covector_norm(m: &ManifoldChart, p: &[f64], c: &[f64]) -> f64 {
    let g = m.metric_diag(p);
    c.iter().zip(&g).map(|(x, gi)| x * x / gi).sum::<f64>().sqrt()
}

/// Norm of a k-form's coefficients in the orthonormal coframe.
pub fn form_norm(m: &ManifoldChart, p: &[f64], degree: usize, c: &[f64]) -> f64 {
    let g = m.metric_diag(p);
    let b = basis(m.dim());
    b.masks[degree]
        .iter()
        .zip(c)
        .map(|(&mask, x)| {
            let scale: f64 = mask_indices(mask).iter().map(|&i| g[i]).product();
            x * x / scale
        })
        .sum::<f64>()
        .sqrt()
}

/// Integral of a top-degree form, oriented by the coordinate order.
pub fn integrate_top_form(f: &Form, t: f64, grid: &Grid) -> Result<f64> {
    if f.degree != f.dim {
        return Err(precondition(format!("{}-form is not of top degree {}", f.degree, f.dim)));
    }
    let mut o = [0.0];
    Ok(grid.integrate(|p| {
        f.f.eval_f64(t, p, &mut o);
        o[0]
    }))
}

/// Riemannian integral of a scalar function.
pub fn integrate_function(m: &ManifoldChart, grid: &Grid, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    grid.integrate(|p| f(p) * m.volume_density(p))
}

/// A closed curve `[0, 1] -> M` given as a one-input map.
#[derive(Clone)]
pub struct Loop {
    pub dim: usize,
    pub curve: Fun,
    pub label: String,
}

impl Loop {
    /// The coordinate circle through `base` along periodic coordinate `k`.
    pub fn coordinate_circle(m: &ManifoldChart, base: &[f64], k: usize) -> Result<Loop> {
        let (_, period) =
            m.coords()[k].period().ok_or_else(|| invalid(format!("coordinate {k} is not periodic")))?;
        Ok(Loop {
            dim: m.dim(),
            curve: share(CircleFn { base: base.to_vec(), k, period }),
            label: m.labels()[k].clone(),
        })
    }
    pub fn point(&self, tau: f64) -> Vec<f64> {
        eval_vec(&*self.curve, 0.0, &[tau])
    }
}

/// Composite trapezoid rule for `int_loop a` with `n` panels.
pub fn line_integral(m: &ManifoldChart, a: &OneForm, t: f64, lp: &Loop, n: usize) -> Result<f64> {
    let gap = m.distance(&lp.point(0.0), &lp.point(1.0));
    if gap > 1e-9 {
        return Err(precondition(format!("loop {} is not closed (endpoint gap {gap:e})", lp.label)));
    }
    let pulled = pull_to_loop(a, lp);
    let h = 1.0 / n as f64;
    let mut o = [0.0];
    let mut s = 0.0;
    for k in 0..n {
        pulled.eval_f64(t, &[k as f64 * h], &mut o);
        s += o[0];
    }
    Ok(s * h)
}

/// The 1-form `a` restricted to the loop, as a function of the loop parameter.
pub fn pull_to_loop(a: &OneForm, lp: &Loop) -> Fun {
    share(LoopPullFn { a: a.f.clone(), curve: lp.curve.clone(), n: a.dim })
}

// ----------------------------------------------------------------------------
// Evaluator structs.

struct ConstFn {
    n_in: usize,
    c: Vec<f64>,
}
impl GenericFn for ConstFn {
    fn n_in(&self) -> usize {
        self.n_in
    }
    fn n_out(&self) -> usize {
        self.c.len()
    }
    fn call<S: Scalar>(&self, _t: f64, _p: &[S], out: &mut [S]) {
        for (o, c) in out.iter_mut().zip(&self.c) {
            *o = S::cst(*c);
        }
    }
}

pub(crate) struct IdFn {
    pub n: usize,
}
impl GenericFn for IdFn {
    fn n_in(&self) -> usize {
        self.n
    }
    fn n_out(&self) -> usize {
        self.n
    }
    fn call<S: Scalar>(&self, _t: f64, p: &[S], out: &mut [S]) {
        out.copy_from_slice(p);
    }
}

struct LinFn {
    terms: Vec<(f64, Fun)>,
}
impl GenericFn for LinFn {
    fn n_in(&self) -> usize {
        self.terms[0].1.n_in()
    }
    fn n_out(&self) -> usize {
        self.terms[0].1.n_out()
    }
    fn call<S: Scalar>(&self, t: f64, p: &[S], out: &mut [S]) {
        let mut buf: Buf<S> = smallvec![S::zero(); out.len()];
        for o in out.iter_mut() {
            *o = S::zero();
        }
        for (c, f) in &self.terms {
            S::eval(&**f, t, p, &mut buf);
            for (o, b) in out.iter_mut().zip(&buf) {
                *o += *b * *c;
            }
        }
    }
}

struct MulFn {
    g: Fun,
    a: Fun,
}
impl GenericFn for MulFn {
    fn n_in(&self) -> usize {
        self.a.n_in()
    }
    fn n_out(&self) -> usize {
        self.a.n_out()
    }
    fn call<S: Scalar>(&self, t: f64, p: &[S], out: &mut [S]) {
        let mut g = [S::zero()];
        S::eval(&*self.g, t, p, &mut g);
        S::eval(&*self.a, t, p, out);
        for o in out.iter_mut() {
            *o = *o * g[0];
        }
    }
}

struct LerpFn {
    a: Fun,
    b: Fun,
}
impl GenericFn for LerpFn {
    fn n_in(&self) -> usize {
        self.a.n_in()
    }
    fn n_out(&self) -> usize {
        self.a.n_out()
    }
    fn call<S: Scalar>(&self, t: f64, p: &[S], out: &mut [S]) {
        let mut buf: Buf<S> = smallvec![S::zero(); out.len()];
        S::eval(&*self.a, t, p, out);
        S::eval(&*self.b, t, p, &mut buf);
        for (o, b) in out.iter_mut().zip(&buf) {
            *o = *o * (1.0 - t) + *b * t;
        }
    }
}

pub(crate) struct FixedTime {
    pub f: Fun,
    pub t: f64,
}
impl GenericFn for FixedTime {
    fn n_in(&self) -> usize {
        self.f.n_in()
    }
    fn n_out(&self) -> usize {
        self.f.n_out()
    }
    fn call<S: Scalar>(&self, _t: f64, p: &[S], out: &mut [S]) {
        S::eval(&*self.f, self.t, p, out)
    }
}

struct TimeShift {
    f: Fun,
    shift: f64,
}
impl GenericFn for TimeShift {
    fn n_in(&self) -> usize {
        self.f.n_in()
    }
    fn n_out(&self) -> usize {
        self.f.n_out()
    }
    fn call<S: Scalar>(&self, t: f64, p: &[S], out: &mut [S]) {
        S::eval(&*self.f, t + self.shift, p, out)
    }
}

pub(crate) struct ComposeFn {
    pub outer: Fun,
    pub inner: Fun,
}
impl GenericFn for ComposeFn {
    fn n_in(&self) -> usize {
        self.inner.n_in()
    }
    fn n_out(&self) -> usize {
        self.outer.n_out()
    }
    fn call<S: Scalar>(&self, t: f64, p: &[S], out: &mut [S]) {
        let mut y: Buf<S> = smallvec![S::zero(); self.inner.n_out()];
        S::eval(&*self.inner, t, p, &mut y);
        S::eval(&*self.outer, t, &y, out);
    }
}

struct DFn {
    a: Fun,
    n: usize,
    n_out: usize,
    terms: Vec<(usize, usize, usize, f64)>,
}
impl GenericFn for DFn {
    fn n_in(&self) -> usize {
        self.n
    }
    fn n_out(&self) -> usize {
        self.n_out
    }
    fn call<S: Scalar>(&self, t: f64, p: &[S], out: &mut [S]) {
        let na = self.a.n_out();
        let mut v: Buf<S> = smallvec![S::zero(); na];
        let mut jac: SmallVec<[S; 36]> = smallvec![S::zero(); na * self.n];
        S::eval_jac(&*self.a, t, p, &mut v, &mut jac);
        for o in out.iter_mut() {
            *o = S::zero();
        }
        for &(o, ia, i, sign) in &self.terms {
            out[o] += jac[ia * self.n + i] * sign;
        }
    }
}

struct WedgeFn {
    a: Fun,
    b: Fun,
    n: usize,
    na: usize,
    nb: usize,
    n_out: usize,
    terms: Vec<(usize, usize, usize, f64)>,
}
impl GenericFn for WedgeFn {
    fn n_in(&self) -> usize {
        self.n
    }
    fn n_out(&self) -> usize {
        self.n_out
    }
    fn call<S: Scalar>(&self, t: f64, p: &[S], out: &mut [S]) {
        let mut va: Buf<S> = smallvec![S::zero(); self.na];
        let mut vb: Buf<S> = smallvec![S::zero(); self.nb];
        S::eval(&*self.a, t, p, &mut va);
        S::eval(&*self.b, t, p, &mut vb);
        for o in out.iter_mut() {
            *o = S::zero();
        }
        for &(o, ia, ib, sign) in &self.terms {
            out[o] += va[ia] * vb[ib] * sign;
        }
    }
}

struct InteriorFn {
    x: Fun,
    a: Fun,
    n: usize,
    na: usize,
    n_out: usize,
    terms: Vec<(usize, usize, usize, f64)>,
}
impl GenericFn for InteriorFn {
    fn n_in(&self) -> usize {
        self.n
    }
    fn n_out(&self) -> usize {
        self.n_out
    }
    fn call<S: Scalar>(&self, t: f64, p: &[S], out: &mut [S]) {
        let mut vx: Buf<S> = smallvec![S::zero(); self.n];
        let mut va: Buf<S> = smallvec![S::zero(); self.na];
        S::eval(&*self.x, t, p, &mut vx);
        S::eval(&*self.a, t, p, &mut va);
        for o in out.iter_mut() {
            *o = S::zero();
        }
        for &(o, i, ia, sign) in &self.terms {
            out[o] += vx[i] * va[ia] * sign;
        }
    }
}

struct PullFn {
    phi: Fun,
    a: Fun,
    n: usize,
    rows: Vec<SmallVec<[usize; 6]>>,
}
impl GenericFn for PullFn {
    fn n_in(&self) -> usize {
        self.n
    }
    fn n_out(&self) -> usize {
        self.rows.len()
    }
    fn call<S: Scalar>(&self, t: f64, p: &[S], out: &mut [S]) {
        let n = self.n;
        let mut y: Buf<S> = smallvec![S::zero(); n];
        let mut jac: SmallVec<[S; 36]> = smallvec![S::zero(); n * n];
        S::eval_jac(&*self.phi, t, p, &mut y, &mut jac);
        let mut va: Buf<S> = smallvec![S::zero(); self.rows.len()];
        S::eval(&*self.a, t, &y, &mut va);
        if self.rows.len() == 1 && self.rows[0].is_empty() {
            out[0] = va[0];
            return;
        }
        for (o, cols) in out.iter_mut().zip(&self.rows) {
            let mut acc = S::zero();
            for (c, rows) in va.iter().zip(&self.rows) {
                if c.re() == 0.0 && std::mem::size_of::<S>() == 8 {
                    continue;
                }
                acc += *c * linalg::minor(&jac, n, rows, cols);
            }
            *o = acc;
        }
    }
}

struct PushFn {
    phi: Fun,
    inv: Fun,
    x: Fun,
    n: usize,
}
impl GenericFn for PushFn {
    fn n_in(&self) -> usize {
        self.n
    }
    fn n_out(&self) -> usize {
        self.n
    }
    fn call<S: Scalar>(&self, t: f64, p: &[S], out: &mut [S]) {
        let n = self.n;
        let mut x0: Buf<S> = smallvec![S::zero(); n];
        S::eval(&*self.inv, t, p, &mut x0);
        let mut y: Buf<S> = smallvec![S::zero(); n];
        let mut jac: SmallVec<[S; 36]> = smallvec![S::zero(); n * n];
        S::eval_jac(&*self.phi, t, &x0, &mut y, &mut jac);
        let mut vx: Buf<S> = smallvec![S::zero(); n];
        S::eval(&*self.x, t, &x0, &mut vx);
        for a in 0..n {
            let mut acc = S::zero();
            for i in 0..n {
                acc += jac[a * n + i] * vx[i];
            }
            out[a] = acc;
        }
    }
}

struct BracketFn {
    x: Fun,
    y: Fun,
    n: usize,
}
impl GenericFn for BracketFn {
    fn n_in(&self) -> usize {
        self.n
    }
    fn n_out(&self) -> usize {
        self.n
    }
    fn call<S: Scalar>(&self, t: f64, p: &[S], out: &mut [S]) {
        let n = self.n;
        let mut vx: Buf<S> = smallvec![S::zero(); n];
        let mut vy: Buf<S> = smallvec![S::zero(); n];
        let mut jx: SmallVec<[S; 36]> = smallvec![S::zero(); n * n];
        let mut jy: SmallVec<[S; 36]> = smallvec![S::zero(); n * n];
        S::eval_jac(&*self.x, t, p, &mut vx, &mut jx);
        S::eval_jac(&*self.y, t, p, &mut vy, &mut jy);
        for a in 0..n {
            let mut acc = S::zero();
            for i in 0..n {
                acc += vx[i] * jy[a * n + i] - vy[i] * jx[a * n + i];
            }
            out[a] = acc;
        }
    }
}

struct CircleFn {
    base: Vec<f64>,
    k: usize,
    period: f64,
}
impl GenericFn for CircleFn {
    fn n_in(&self) -> usize {
        1
    }
    fn n_out(&self) -> usize {
        self.base.len()
    }
    fn call<S: Scalar>(&self, _t: f64, p: &[S], out: &mut [S]) {
        for (o, b) in out.iter_mut().zip(&self.base) {
            *o = S::cst(*b);
        }
        out[self.k] = p[0] * self.period + self.base[self.k];
    }
}

struct LoopPullFn {
    a: Fun,
    curve: Fun,
    n: usize,
}
impl GenericFn for LoopPullFn {
    fn n_in(&self) -> usize {
        1
    }
    fn n_out(&self) -> usize {
        1
    }
    fn call<S: Scalar>(&self, t: f64, p: &[S], out: &mut [S]) {
        let n = self.n;
        let mut y: Buf<S> = smallvec![S::zero(); n];
        let mut tan: Buf<S> = smallvec![S::zero(); n];
        S::eval_jac(&*self.curve, t, p, &mut y, &mut tan);
        let mut va: Buf<S> = smallvec![S::zero(); n];
        S::eval(&*self.a, t, &y, &mut va);
        let mut acc = S::zero();
        for i in 0..n {
            acc += va[i] * tan[i];
        }
        out[0] = acc;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{build_manifold, FactorSpec};
    use crate::pointfn;
    use std::f64::consts::PI;

    fn t2s1() -> ManifoldChart {
        build_manifold(
            vec![
                FactorSpec::circle(2.0 * PI, "theta1"),
                FactorSpec::circle(2.0 * PI, "theta2"),
                FactorSpec::centered_circle(2.0 * PI, "s"),
            ],
            true,
        )
        .unwrap()
    }

    #[test]
    fn basis_ordering_is_upper_triangle() {
        let b = basis(3);
        assert_eq!(b.masks[2], vec![0b011, 0b101, 0b110]);
        assert_eq!(n_components(5, 2), 10);
    }

    #[test]
    fn derivative_examples() {
        let f = Form::of(2, 0, pointfn!(2 => 1, |_t, p| [p[0].cos()]));
        let df = d(&f);
        let v = df.eval(&[0.3, 1.0]);
        assert!((v[0] + 0.3f64.sin()).abs() < 1e-15 && v[1] == 0.0);
        let a = Form::of(2, 1, pointfn!(2 => 2, |_t, p| [S::zero(), p[0].sin() * 0.5]));
        let da = exterior_derivative(&a);
        assert!((da.eval(&[0.7, 0.1])[0] - 0.5 * 0.7f64.cos()).abs() < 1e-15);
        assert_eq!(exterior_derivative(&Form::covector(&[3.0, 0.0])).eval(&[0.2, 0.2]), vec![0.0]);
    }

    #[test]
    fn wedge_and_interior_examples() {
        let m = t2s1();
        let vol = wedge(&Form::dx(3, 2), &Form::dxdx(3, 0, 1)).unwrap();
        assert_eq!(vol.eval(&[0.0; 3]), vec![1.0]);
        let g = m.grid(8, 8);
        let total = integrate_top_form(&wedge(&Form::dx(3, 2), &Form::dxdx(3, 0, 1)).unwrap(), 0.0, &g).unwrap();
        assert!((total - (2.0 * PI).powi(3)).abs() < 1e-9);
        assert_eq!(wedge(&Form::dx(3, 0), &Form::dx(3, 0)).unwrap().eval(&[0.0; 3]), vec![0.0, 0.0, 0.0]);
        let w = Form::dxdx(3, 0, 1).add(&Form::dxdx(3, 0, 2));
        let i = interior_product(&VectorField::coordinate(3, 0), &w);
        assert_eq!(i.eval(&[0.0; 3]), vec![0.0, 1.0, 1.0]);
        let iz = interior_product(&VectorField::coordinate(3, 2), &Form::dxdx(3, 0, 1));
        assert_eq!(iz.eval(&[0.0; 3]), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn pullback_of_scaling() {
        let c = 0.7;
        let psi = SmoothMap::of(3, pointfn!(3 => 3, |_t, p| [p[0], p[1], p[2] * c.exp()]), None);
        let v = pullback(&psi, &Form::dx(3, 2)).eval(&[0.1, 0.2, 0.3]);
        assert!((v[2] - c.exp()).abs() < 1e-15);
        let inv = pointfn!(3 => 3, |_t, p| [p[0], p[1], p[2] * (-c).exp()]);
        let psi = SmoothMap::of(3, psi.fwd, Some(inv));
        let x = pushforward_field(&psi, &VectorField::coordinate(3, 2)).unwrap();
        assert!((x.eval(&[0.0, 0.0, 1.0])[2] - c.exp()).abs() < 1e-15);
    }

    #[test]
    fn bracket_example() {
        let x = VectorField::of(3, pointfn!(3 => 3, |_t, p| [S::zero(), p[0], S::zero()]));
        let y = VectorField::coordinate(3, 0);
        let b = lie_bracket(&x, &y).eval(&[0.4, 0.5, 0.6]);
        assert_eq!(b, vec![0.0, -1.0, 0.0]);
    }

    #[test]
    fn sup_norm_and_loops() {
        let t2 = build_manifold(vec![FactorSpec::circle(2.0 * PI, "a"); 2], false).unwrap();
        let g = t2.grid(8, 8);
        assert!((sup_norm(&t2, &Form::covector(&[3.0, 4.0]), 0.0, &g) - 5.0).abs() < 1e-15);
        let lp = Loop::coordinate_circle(&t2, &[0.0, 0.0], 0).unwrap();
        let v = line_integral(&t2, &Form::dx(2, 0), 0.0, &lp, 16).unwrap();
        assert!((v - 2.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn polar_area() {
        let disk =
            build_manifold(vec![FactorSpec::polar_disk(1e-3, 1.0, "d"), FactorSpec::circle(2.0 * PI, "s")], true)
                .unwrap();
        let g = disk.grid(16, 33);
        let area = Form::of(3, 3, pointfn!(3 => 1, |_t, p| [p[0] / (2.0 * PI)]));
        let v = integrate_top_form(&area, 0.0, &g).unwrap();
        assert!((v - PI * (1.0 - 1e-6)).abs() < 1e-10, "{v}");
    }
}
