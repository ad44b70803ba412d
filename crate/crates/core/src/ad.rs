//! Forward-mode differentiation with a fixed number of seed directions.
//!
//! Every field in the crate is a [`PointFn`]: a map `R^n_in -> R^n_out` (plus a
//! time parameter) that can be evaluated on plain `f64`, on first-order jets
//! [`Dual`] and on second-order jets [`HDual`]. Derivatives of derived objects
//! (exterior derivatives, pullbacks, brackets) are obtained by composing
//! these evaluations, so no finite differences are involved for closures
//! built with [`pointfn!`](crate::pointfn).

use smallvec::SmallVec;
use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::sync::Arc;

/// Maximum number of seed directions, which bounds the chart dimension.
pub const MAXD: usize = 6;
/// Length of a packed symmetric `MAXD x MAXD` matrix.
pub const NH: usize = MAXD * (MAXD + 1) / 2;

/// Position of entry `(i, j)` in the packed upper triangle.
#[inline]
pub const fn hidx(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * (2 * MAXD - i + 1) / 2 + (j - i)
}

const HPAIRS: [(usize, usize); NH] = {
    let mut out = [(0usize, 0usize); NH];
    let mut i = 0;
    let mut k = 0;
    while i < MAXD {
        let mut j = i;
        while j < MAXD {
            out[k] = (i, j);
            k += 1;
            j += 1;
        }
        i += 1;
    }
    out
};

pub type Buf<S> = SmallVec<[S; 16]>;

/// Number type the field closures are generic over.
pub trait Scalar:
    Copy
    + Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    fn cst(v: f64) -> Self;
    fn re(&self) -> f64;
    /// Apply a unary function given its value and first two derivatives at `re()`.
    fn chain(self, f0: f64, f1: f64, f2: f64) -> Self;

    fn eval(f: &dyn PointFn, t: f64, p: &[Self], out: &mut [Self]);
    /// Values and row-major Jacobian (`n_out x n_in`), both carried at this order.
    fn eval_jac(f: &dyn PointFn, t: f64, p: &[Self], val: &mut [Self], jac: &mut [Self]);

    #[inline]
    fn zero() -> Self {
        Self::cst(0.0)
    }
    #[inline]
    fn one() -> Self {
        Self::cst(1.0)
    }
    #[inline]
    fn sin(self) -> Self {
        let x = self.re();
        let (s, c) = x.sin_cos();
        self.chain(s, c, -s)
    }
    #[inline]
    fn cos(self) -> Self {
        let x = self.re();
        let (s, c) = x.sin_cos();
        self.chain(c, -s, -c)
    }
    #[inline]
    fn exp(self) -> Self {
        let e = self.re().exp();
        self.chain(e, e, e)
    }
    #[inline]
    fn ln(self) -> Self {
        let x = self.re();
        self.chain(x.ln(), 1.0 / x, -1.0 / (x * x))
    }
    #[inline]
    fn sqrt(self) -> Self {
        let x = self.re();
        let s = x.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * x))
    }
    #[inline]
    fn powi(self, n: i32) -> Self {
        let x = self.re();
        let nf = n as f64;
        self.chain(x.powi(n), nf * x.powi(n - 1), nf * (nf - 1.0) * x.powi(n - 2))
    }
    #[inline]
    fn abs(self) -> Self {
        let x = self.re();
        let sg = if x < 0.0 { -1.0 } else { 1.0 };
        self.chain(x.abs(), sg, 0.0)
    }
    #[inline]
    fn recip(self) -> Self {
        let x = self.re();
        let r = 1.0 / x;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }
    #[inline]
    fn atan(self) -> Self {
        let x = self.re();
        let d = 1.0 / (1.0 + x * x);
        self.chain(x.atan(), d, -2.0 * x * d * d)
    }
    #[inline]
    fn sq(self) -> Self {
        self * self
    }
    /// Shift by a whole number of periods so that `re()` lies in `[lo, lo + period)`.
    #[inline]
    fn wrap(self, lo: f64, period: f64) -> Self {
        let k = ((self.re() - lo) / period).floor();
        if k == 0.0 {
            self
        } else {
            self - k * period
        }
    }
}

impl Scalar for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn re(&self) -> f64 {
        *self
    }
    #[inline]
    fn chain(self, f0: f64, _f1: f64, _f2: f64) -> Self {
        f0
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    #[inline]
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn eval(f: &dyn PointFn, t: f64, p: &[f64], out: &mut [f64]) {
        f.eval_f64(t, p, out)
    }
    fn eval_jac(f: &dyn PointFn, t: f64, p: &[f64], val: &mut [f64], jac: &mut [f64]) {
        let n = p.len();
        assert!(n <= MAXD, "chart dimension {n} exceeds MAXD");
        let q: Buf<Dual> = p.iter().enumerate().map(|(i, &x)| Dual::var(x, i)).collect();
        let mut o: Buf<Dual> = SmallVec::from_elem(Dual::cst(0.0), val.len());
        f.eval_dual(t, &q, &mut o);
        for (a, oa) in o.iter().enumerate() {
            val[a] = oa.v;
            for i in 0..n {
                jac[a * n + i] = oa.g[i];
            }
        }
    }
}

/// First-order jet: value plus gradient with respect to the seeds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual {
    pub v: f64,
    pub g: [f64; MAXD],
}

impl Dual {
    #[inline]
    pub fn var(v: f64, i: usize) -> Self {
        let mut g = [0.0; MAXD];
        g[i] = 1.0;
        Dual { v, g }
    }
    /// Value with an explicit tangent along seed 0.
    #[inline]
    pub fn along(v: f64, dv: f64) -> Self {
        let mut g = [0.0; MAXD];
        g[0] = dv;
        Dual { v, g }
    }
}

impl Scalar for Dual {
    #[inline]
    fn cst(v: f64) -> Self {
        Dual { v, g: [0.0; MAXD] }
    }
    #[inline]
    fn re(&self) -> f64 {
        self.v
    }
    #[inline]
    fn chain(self, f0: f64, f1: f64, _f2: f64) -> Self {
        let mut g = self.g;
        for x in g.iter_mut() {
            *x *= f1;
        }
        Dual { v: f0, g }
    }
    fn eval(f: &dyn PointFn, t: f64, p: &[Dual], out: &mut [Dual]) {
        f.eval_dual(t, p, out)
    }
    fn eval_jac(f: &dyn PointFn, t: f64, p: &[Dual], val: &mut [Dual], jac: &mut [Dual]) {
        let n = p.len();
        assert!(n <= MAXD, "chart dimension {n} exceeds MAXD");
        let q: Buf<HDual> = p.iter().enumerate().map(|(i, x)| HDual::var(x.v, i)).collect();
        let mut o: Buf<HDual> = SmallVec::from_elem(HDual::cst(0.0), val.len());
        f.eval_hdual(t, &q, &mut o);
        for (a, oa) in o.iter().enumerate() {
            let mut g = [0.0; MAXD];
            for i in 0..n {
                let c = oa.g[i];
                if c != 0.0 {
                    for (gk, pk) in g.iter_mut().zip(p[i].g.iter()) {
                        *gk += c * pk;
                    }
                }
            }
            val[a] = Dual { v: oa.v, g };
            for i in 0..n {
                let mut g = [0.0; MAXD];
                for j in 0..n {
                    let c = oa.h[hidx(i, j)];
                    if c != 0.0 {
                        for (gk, pk) in g.iter_mut().zip(p[j].g.iter()) {
                            *gk += c * pk;
                        }
                    }
                }
                jac[a * n + i] = Dual { v: oa.g[i], g };
            }
        }
    }
}

/// Second-order jet: value, gradient and packed symmetric Hessian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HDual {
    pub v: f64,
    pub g: [f64; MAXD],
    pub h: [f64; NH],
}

impl HDual {
    #[inline]
    pub fn var(v: f64, i: usize) -> Self {
        let mut g = [0.0; MAXD];
        g[i] = 1.0;
        HDual { v, g, h: [0.0; NH] }
    }
    #[inline]
    pub fn hess(&self, i: usize, j: usize) -> f64 {
        self.h[hidx(i, j)]
    }
}

impl Scalar for HDual {
    #[inline]
    fn cst(v: f64) -> Self {
        HDual { v, g: [0.0; MAXD], h: [0.0; NH] }
    }
    #[inline]
    fn re(&self) -> f64 {
        self.v
    }
    #[inline]
    fn chain(self, f0: f64, f1: f64, f2: f64) -> Self {
        let mut h = [0.0; NH];
        for (k, &(i, j)) in HPAIRS.iter().enumerate() {
            h[k] = f1 * self.h[k] + f2 * self.g[i] * self.g[j];
        }
        let mut g = self.g;
        for x in g.iter_mut() {
            *x *= f1;
        }
        HDual { v: f0, g, h }
    }
    fn eval(f: &dyn PointFn, t: f64, p: &[HDual], out: &mut [HDual]) {
        f.eval_hdual(t, p, out)
    }
    /// Jacobian entries carry value and gradient; their Hessian would need
    /// third derivatives and is set to NaN.
    fn eval_jac(f: &dyn PointFn, t: f64, p: &[HDual], val: &mut [HDual], jac: &mut [HDual]) {
        let n = p.len();
        assert!(n <= MAXD, "chart dimension {n} exceeds MAXD");
        let q: Buf<HDual> = p.iter().enumerate().map(|(i, x)| HDual::var(x.v, i)).collect();
        let mut o: Buf<HDual> = SmallVec::from_elem(HDual::cst(0.0), val.len());
        f.eval_hdual(t, &q, &mut o);
        for (a, oa) in o.iter().enumerate() {
            val[a] = compose_hdual(oa, p);
            for i in 0..n {
                let mut g = [0.0; MAXD];
                for j in 0..n {
                    let c = oa.h[hidx(i, j)];
                    for (gk, pk) in g.iter_mut().zip(p[j].g.iter()) {
                        *gk += c * pk;
                    }
                }
                jac[a * n + i] = HDual { v: oa.g[i], g, h: [f64::NAN; NH] };
            }
        }
    }
}

/// Compose an output jet taken with respect to unit seeds with input jets `p`.
pub fn compose_hdual(o: &HDual, p: &[HDual]) -> HDual {
    let n = p.len();
    let mut g = [0.0; MAXD];
    let mut h = [0.0; NH];
    for i in 0..n {
        let c = o.g[i];
        if c != 0.0 {
            for k in 0..MAXD {
                g[k] += c * p[i].g[k];
            }
            for k in 0..NH {
                h[k] += c * p[i].h[k];
            }
        }
        for j in 0..n {
            let c2 = o.h[hidx(i, j)];
            if c2 != 0.0 {
                for (k, &(u, w)) in HPAIRS.iter().enumerate() {
                    h[k] += c2 * p[i].g[u] * p[j].g[w];
                }
            }
        }
    }
    HDual { v: o.v, g, h }
}

macro_rules! jet_ops {
    ($T:ident) => {
        impl Add for $T {
            type Output = $T;
            #[inline]
            fn add(mut self, o: $T) -> $T {
                self += o;
                self
            }
        }
        impl Sub for $T {
            type Output = $T;
            #[inline]
            fn sub(mut self, o: $T) -> $T {
                self -= o;
                self
            }
        }
        impl Div for $T {
            type Output = $T;
            #[inline]
            fn div(self, o: $T) -> $T {
                self * o.recip()
            }
        }
        impl Neg for $T {
            type Output = $T;
            #[inline]
            fn neg(self) -> $T {
                self * -1.0
            }
        }
        impl Add<f64> for $T {
            type Output = $T;
            #[inline]
            fn add(mut self, o: f64) -> $T {
                self.v += o;
                self
            }
        }
        impl Sub<f64> for $T {
            type Output = $T;
            #[inline]
            fn sub(mut self, o: f64) -> $T {
                self.v -= o;
                self
            }
        }
        impl Div<f64> for $T {
            type Output = $T;
            #[inline]
            fn div(self, o: f64) -> $T {
                self * (1.0 / o)
            }
        }
        impl Add<$T> for f64 {
            type Output = $T;
            #[inline]
            fn add(self, o: $T) -> $T {
                o + self
            }
        }
        impl Sub<$T> for f64 {
            type Output = $T;
            #[inline]
            fn sub(self, o: $T) -> $T {
                -o + self
            }
        }
        impl Mul<$T> for f64 {
            type Output = $T;
            #[inline]
            fn mul(self, o: $T) -> $T {
                o * self
            }
        }
        impl Div<$T> for f64 {
            type Output = $T;
            #[inline]
            fn div(self, o: $T) -> $T {
                o.recip() * self
            }
        }
        impl MulAssign for $T {
            #[inline]
            fn mul_assign(&mut self, o: $T) {
                *self = *self * o;
            }
        }
    };
}

jet_ops!(Dual);
jet_ops!(HDual);

impl AddAssign for Dual {
    #[inline]
    fn add_assign(&mut self, o: Dual) {
        self.v += o.v;
        for k in 0..MAXD {
            self.g[k] += o.g[k];
        }
    }
}
impl SubAssign for Dual {
    #[inline]
    fn sub_assign(&mut self, o: Dual) {
        self.v -= o.v;
        for k in 0..MAXD {
            self.g[k] -= o.g[k];
        }
    }
}
impl Mul for Dual {
    type Output = Dual;
    #[inline]
    fn mul(self, o: Dual) -> Dual {
        let mut g = [0.0; MAXD];
        for k in 0..MAXD {
            g[k] = self.v * o.g[k] + o.v * self.g[k];
        }
        Dual { v: self.v * o.v, g }
    }
}
impl Mul<f64> for Dual {
    type Output = Dual;
    #[inline]
    fn mul(mut self, o: f64) -> Dual {
        self.v *= o;
        for k in 0..MAXD {
            self.g[k] *= o;
        }
        self
    }
}

impl AddAssign for HDual {
    #[inline]
    fn add_assign(&mut self, o: HDual) {
        self.v += o.v;
        for k in 0..MAXD {
            self.g[k] += o.g[k];
        }
        for k in 0..NH {
            self.h[k] += o.h[k];
        }
    }
}
impl SubAssign for HDual {
    #[inline]
    fn sub_assign(&mut self, o: HDual) {
        self.v -= o.v;
        for k in 0..MAXD {
            self.g[k] -= o.g[k];
        }
        for k in 0..NH {
            self.h[k] -= o.h[k];
        }
    }
}
impl Mul for HDual {
    type Output = HDual;
    #[inline]
    fn mul(self, o: HDual) -> HDual {
        let mut g = [0.0; MAXD];
        for k in 0..MAXD {
            g[k] = self.v * o.g[k] + o.v * self.g[k];
        }
        let mut h = [0.0; NH];
        for (k, &(i, j)) in HPAIRS.iter().enumerate() {
            h[k] = self.v * o.h[k] + o.v * self.h[k] + self.g[i] * o.g[j] + self.g[j] * o.g[i];
        }
        HDual { v: self.v * o.v, g, h }
    }
}
impl Mul<f64> for HDual {
    type Output = HDual;
    #[inline]
    fn mul(mut self, o: f64) -> HDual {
        self.v *= o;
        for k in 0..MAXD {
            self.g[k] *= o;
        }
        for k in 0..NH {
            self.h[k] *= o;
        }
        self
    }
}

/// A smooth map `R^n_in -> R^n_out` depending on a time parameter.
pub trait PointFn: Send + Sync {
    fn n_in(&self) -> usize;
    fn n_out(&self) -> usize;
    fn eval_f64(&self, t: f64, p: &[f64], out: &mut [f64]);
    fn eval_dual(&self, t: f64, p: &[Dual], out: &mut [Dual]);
    fn eval_hdual(&self, t: f64, p: &[HDual], out: &mut [HDual]);
}

pub type Fun = Arc<dyn PointFn>;

/// Implementation helper: write the body once, generic over the scalar type.
pub trait GenericFn: Send + Sync {
    fn n_in(&self) -> usize;
    fn n_out(&self) -> usize;
    fn call<S: Scalar>(&self, t: f64, p: &[S], out: &mut [S]);
}

pub struct Gen<G>(pub G);

impl<G: GenericFn> PointFn for Gen<G> {
    fn n_in(&self) -> usize {
        self.0.n_in()
    }
    fn n_out(&self) -> usize {
        self.0.n_out()
    }
    fn eval_f64(&self, t: f64, p: &[f64], out: &mut [f64]) {
        self.0.call(t, p, out)
    }
    fn eval_dual(&self, t: f64, p: &[Dual], out: &mut [Dual]) {
        self.0.call(t, p, out)
    }
    fn eval_hdual(&self, t: f64, p: &[HDual], out: &mut [HDual]) {
        self.0.call(t, p, out)
    }
}

pub fn share<G: GenericFn + 'static>(g: G) -> Fun {
    Arc::new(Gen(g))
}

/// Three monomorphic copies of one closure body, produced by [`pointfn!`](crate::pointfn).
pub struct Tri<A, B, C> {
    pub n_in: usize,
    pub n_out: usize,
    pub a: A,
    pub b: B,
    pub c: C,
}

impl<A, B, C> PointFn for Tri<A, B, C>
where
    A: Fn(f64, &[f64], &mut [f64]) + Send + Sync,
    B: Fn(f64, &[Dual], &mut [Dual]) + Send + Sync,
    C: Fn(f64, &[HDual], &mut [HDual]) + Send + Sync,
{
    fn n_in(&self) -> usize {
        self.n_in
    }
    fn n_out(&self) -> usize {
        self.n_out
    }
    fn eval_f64(&self, t: f64, p: &[f64], out: &mut [f64]) {
        (self.a)(t, p, out)
    }
    fn eval_dual(&self, t: f64, p: &[Dual], out: &mut [Dual]) {
        (self.b)(t, p, out)
    }
    fn eval_hdual(&self, t: f64, p: &[HDual], out: &mut [HDual]) {
        (self.c)(t, p, out)
    }
}

/// Build an analytic [`Fun`] from an expression written once.
///
/// Inside the body, `S` names the scalar type and `p` the input slice; the
/// body evaluates to an array of `n_out` values of type `S`. Captured
/// variables must be `Copy`.
///
/// ```
/// use cosymplectic::pointfn;
/// let f = pointfn!(2 => 1, |_t, p| [p[0].sin() * p[1]]);
/// let mut out = [0.0];
/// f.eval_f64(0.0, &[0.5, 2.0], &mut out);
/// assert!((out[0] - 2.0 * 0.5f64.sin()).abs() < 1e-15);
/// ```
#[macro_export]
macro_rules! pointfn {
    ($n_in:expr => $n_out:literal, |$t:ident, $p:ident| $body:expr) => {{
        let f: $crate::ad::Fun = ::std::sync::Arc::new($crate::ad::Tri {
            n_in: $n_in,
            n_out: $n_out,
            a: move |$t: f64, $p: &[f64], o: &mut [f64]| {
                #[allow(unused_imports)]
                use $crate::ad::Scalar as _;
                #[allow(dead_code)]
                type S = f64;
                let _ = $t;
                let r: [S; $n_out] = $body;
                o.copy_from_slice(&r);
            },
            b: move |$t: f64, $p: &[$crate::ad::Dual], o: &mut [$crate::ad::Dual]| {
                #[allow(unused_imports)]
                use $crate::ad::Scalar as _;
                #[allow(dead_code)]
                type S = $crate::ad::Dual;
                let _ = $t;
                let r: [S; $n_out] = $body;
                o.copy_from_slice(&r);
            },
            c: move |$t: f64, $p: &[$crate::ad::HDual], o: &mut [$crate::ad::HDual]| {
                #[allow(unused_imports)]
                use $crate::ad::Scalar as _;
                #[allow(dead_code)]
                type S = $crate::ad::HDual;
                let _ = $t;
                let r: [S; $n_out] = $body;
                o.copy_from_slice(&r);
            },
        });
        f
    }};
}

/// A closure known only on `f64`; derivatives come from central differences
/// with step `1e-5 (1 + |x|)` and are chained with the input jets.
pub struct Sampled<F> {
    pub n_in: usize,
    pub n_out: usize,
    pub f: F,
}

pub fn sampled<F>(n_in: usize, n_out: usize, f: F) -> Fun
where
    F: Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
{
    Arc::new(Sampled { n_in, n_out, f })
}

impl<F: Fn(f64, &[f64], &mut [f64]) + Send + Sync> Sampled<F> {
    fn fd_jet(&self, t: f64, x: &[f64], second: bool) -> Vec<HDual> {
        let n = self.n_in;
        let m = self.n_out;
        let mut out: Vec<HDual> = vec![HDual::cst(0.0); m];
        let mut v = vec![0.0; m];
        (self.f)(t, x, &mut v);
        for a in 0..m {
            out[a].v = v[a];
        }
        let mut xp = x.to_vec();
        let mut fp = vec![0.0; m];
        let mut fm = vec![0.0; m];
        let step = |xi: f64, scale: f64| scale * (1.0 + xi.abs());
        for i in 0..n {
            let h = step(x[i], 1e-5);
            xp[i] = x[i] + h;
            (self.f)(t, &xp, &mut fp);
            xp[i] = x[i] - h;
            (self.f)(t, &xp, &mut fm);
            xp[i] = x[i];
            for a in 0..m {
                out[a].g[i] = (fp[a] - fm[a]) / (2.0 * h);
            }
        }
        if second {
            let mut fpp = vec![0.0; m];
            let mut fpm = vec![0.0; m];
            let mut fmp = vec![0.0; m];
            let mut fmm = vec![0.0; m];
            for i in 0..n {
                for j in i..n {
                    let hi = step(x[i], 1e-4);
                    let hj = step(x[j], 1e-4);
                    if i == j {
                        xp[i] = x[i] + hi;
                        (self.f)(t, &xp, &mut fp);
                        xp[i] = x[i] - hi;
                        (self.f)(t, &xp, &mut fm);
                        xp[i] = x[i];
                        for a in 0..m {
                            out[a].h[hidx(i, i)] = (fp[a] - 2.0 * v[a] + fm[a]) / (hi * hi);
                        }
                    } else {
                        let mut eval = |si: f64, sj: f64, buf: &mut Vec<f64>| {
                            xp[i] = x[i] + si * hi;
                            xp[j] = x[j] + sj * hj;
                            (self.f)(t, &xp, buf);
                            xp[i] = x[i];
                            xp[j] = x[j];
                        };
                        eval(1.0, 1.0, &mut fpp);
                        eval(1.0, -1.0, &mut fpm);
                        eval(-1.0, 1.0, &mut fmp);
                        eval(-1.0, -1.0, &mut fmm);
                        for a in 0..m {
                            out[a].h[hidx(i, j)] =
                                (fpp[a] - fpm[a] - fmp[a] + fmm[a]) / (4.0 * hi * hj);
                        }
                    }
                }
            }
        }
        out
    }
}

impl<F: Fn(f64, &[f64], &mut [f64]) + Send + Sync> PointFn for Sampled<F> {
    fn n_in(&self) -> usize {
        self.n_in
    }
    fn n_out(&self) -> usize {
        self.n_out
    }
    fn eval_f64(&self, t: f64, p: &[f64], out: &mut [f64]) {
        (self.f)(t, p, out)
    }
    fn eval_dual(&self, t: f64, p: &[Dual], out: &mut [Dual]) {
        let x: Buf<f64> = p.iter().map(|d| d.v).collect();
        let jet = self.fd_jet(t, &x, false);
        for (a, o) in jet.iter().enumerate() {
            let mut g = [0.0; MAXD];
            for (i, pi) in p.iter().enumerate() {
                for k in 0..MAXD {
                    g[k] += o.g[i] * pi.g[k];
                }
            }
            out[a] = Dual { v: o.v, g };
        }
    }
    fn eval_hdual(&self, t: f64, p: &[HDual], out: &mut [HDual]) {
        let x: Buf<f64> = p.iter().map(|d| d.v).collect();
        let jet = self.fd_jet(t, &x, true);
        for (a, o) in jet.iter().enumerate() {
            out[a] = compose_hdual(o, p);
        }
    }
}

/// Convenience evaluation on `f64` returning an owned vector.
pub fn eval_vec(f: &dyn PointFn, t: f64, p: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; f.n_out()];
    f.eval_f64(t, p, &mut out);
    out
}

/// Values and Jacobian at an `f64` point.
pub fn jacobian(f: &dyn PointFn, t: f64, p: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; f.n_out()];
    let mut j = vec![0.0; f.n_out() * p.len()];
    f64::eval_jac(f, t, p, &mut v, &mut j);
    (v, j)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hessian_index_is_dense() {
        let mut seen = [false; NH];
        for i in 0..MAXD {
            for j in i..MAXD {
                assert!(!seen[hidx(i, j)]);
                seen[hidx(i, j)] = true;
                assert_eq!(hidx(i, j), hidx(j, i));
                assert_eq!(HPAIRS[hidx(i, j)], (i, j));
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn product_rule_second_order() {
        // f(x, y) = sin(x) * exp(y)
        let x = HDual::var(0.3, 0);
        let y = HDual::var(-0.7, 1);
        let f = x.sin() * y.exp();
        let (s, c, e) = (0.3f64.sin(), 0.3f64.cos(), (-0.7f64).exp());
        assert!((f.v - s * e).abs() < 1e-15);
        assert!((f.g[0] - c * e).abs() < 1e-15);
        assert!((f.g[1] - s * e).abs() < 1e-15);
        assert!((f.hess(0, 0) + s * e).abs() < 1e-15);
        assert!((f.hess(0, 1) - c * e).abs() < 1e-15);
        assert!((f.hess(1, 1) - s * e).abs() < 1e-15);
    }

    #[test]
    fn quotient_and_powers() {
        let x = Dual::var(2.0, 0);
        let f = (x.powi(3) + 1.0) / x.sqrt();
        // d/dx (x^3 + 1) x^{-1/2} = 3x^2 x^{-1/2} - 0.5 (x^3 + 1) x^{-3/2}
        let want = 3.0 * 4.0 / 2f64.sqrt() - 0.5 * 9.0 / 2f64.powf(1.5);
        assert!((f.g[0] - want).abs() < 1e-13);
        let l = HDual::var(3.0, 2).ln();
        assert!((l.hess(2, 2) + 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn jacobian_of_macro_closure() {
        let f = pointfn!(2 => 2, |_t, p| [p[0] * p[1], p[0].cos()]);
        let (v, j) = jacobian(&*f, 0.0, &[1.5, -2.0]);
        assert_eq!(v[0], -3.0);
        assert_eq!(j, vec![-2.0, 1.5, -(1.5f64.sin()), 0.0]);
    }

    #[test]
    fn nested_jacobian_matches_hessian() {
        let f = pointfn!(2 => 1, |_t, p| [p[0].sq() * p[1].sin()]);
        let p = [Dual::var(0.4, 0), Dual::var(1.1, 1)];
        let mut v = [Dual::cst(0.0)];
        let mut j = [Dual::cst(0.0); 2];
        Dual::eval_jac(&*f, 0.0, &p, &mut v, &mut j);
        // d/dx (2 x sin y) = 2 sin y; d/dy (2 x sin y) = 2 x cos y
        assert!((j[0].g[0] - 2.0 * 1.1f64.sin()).abs() < 1e-14);
        assert!((j[0].g[1] - 0.8 * 1.1f64.cos()).abs() < 1e-14);
        assert!((j[1].g[1] + 0.16 * 1.1f64.sin()).abs() < 1e-14);
    }

    #[test]
    fn sampled_derivatives_are_close() {
        let f = sampled(2, 1, |_t, p, o| o[0] = p[0].exp() * p[1]);
        let p = [HDual::var(0.2, 0), HDual::var(0.5, 1)];
        let mut o = [HDual::cst(0.0)];
        f.eval_hdual(0.0, &p, &mut o);
        let e = 0.2f64.exp();
        assert!((o[0].g[0] - 0.5 * e).abs() < 1e-9);
        assert!((o[0].hess(0, 1) - e).abs() < 1e-6);
        assert!((o[0].hess(0, 0) - 0.5 * e).abs() < 1e-6);
    }

    #[test]
    fn wrap_keeps_derivative() {
        let x = Dual::var(7.0 * std::f64::consts::PI, 0);
        let w = x.wrap(0.0, 2.0 * std::f64::consts::PI);
        assert!((w.v - std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(w.g[0], 1.0);
    }
}
