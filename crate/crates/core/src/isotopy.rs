//! Isotopies `t -> phi_t`, `t` in `[0, 1]`: integrated flows and closed-form
//! families, with the records the group operations transform (potentials,
//! conformal log factors `phi_t^* eta = e^{f_t} eta`, transition functions
//! `C^t = eta(phi-dot_t) o phi_t`).

use crate::ad::{share, Buf, Dual, Fun, GenericFn, PointFn, Scalar};
use crate::cosym::{
    apply_i, check_invertible, classify_field, exp_field, invert_i, ln_field, reeb_vector, verify_structure,
    CosymplecticStructure, FieldClassification, MapClassification, Range,
};
use crate::error::{invalid, precondition, GeomError, Result};
use crate::forms::{
    basis, d, directional, interior_product, mask_indices, pullback, pushforward_field, ComposeFn, Form, OneForm,
    ScalarField, SmoothMap, TwoForm, VectorField,
};
use crate::linalg::{self, gauss_legendre};
use crate::manifold::{FactorSpec, Grid, ManifoldChart};
use serde::{Deserialize, Serialize};
use smallvec::smallvec;
use std::f64::consts::PI;
use std::sync::Arc;

pub const DEFAULT_STEPS: usize = 200;
pub const CHECKPOINTS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Integration data behind a flow map.
pub struct FlowData {
    pub field: Fun,
    pub steps: usize,
    /// Periodic coordinates `(index, start, period)`, wrapped on output.
    pub wrap: Vec<(usize, f64, f64)>,
}

pub(crate) fn periodic_wraps(m: &ManifoldChart) -> Vec<(usize, f64, f64)> {
    m.coords().iter().enumerate().filter_map(|(i, c)| c.period().map(|(s, p)| (i, s, p))).collect()
}

/// Segments `(tau, dt)` from `a` to `b` on the lattice `k / n`, with a partial
/// step where `a` or `b` falls between lattice points.
fn lattice_segments(a: f64, b: f64, n: usize, out: &mut Vec<(f64, f64)>) {
    out.clear();
    let h = 1.0 / n as f64;
    let eps = 1e-12;
    let mut tau = a;
    if b > a {
        while b - tau > eps {
            let mut next = ((((tau + eps) / h).floor() + 1.0) * h).min(b);
            if b - next < eps {
                next = b;
            }
            out.push((tau, next - tau));
            tau = next;
        }
    } else {
        while tau - b > eps {
            let mut next = ((((tau - eps) / h).ceil() - 1.0) * h).max(b);
            if next - b < eps {
                next = b;
            }
            out.push((tau, next - tau));
            tau = next;
        }
    }
}

fn rk4_step<S: Scalar>(f: &dyn PointFn, tau: f64, dt: f64, y: &mut [S]) {
    let n = y.len();
    let mut k1: Buf<S> = smallvec![S::zero(); n];
    let mut k2: Buf<S> = smallvec![S::zero(); n];
    let mut k3: Buf<S> = smallvec![S::zero(); n];
    let mut k4: Buf<S> = smallvec![S::zero(); n];
    let mut tmp: Buf<S> = smallvec![S::zero(); n];
    S::eval(f, tau, y, &mut k1);
    for i in 0..n {
        tmp[i] = y[i] + k1[i] * (0.5 * dt);
    }
    S::eval(f, tau + 0.5 * dt, &tmp, &mut k2);
    for i in 0..n {
        tmp[i] = y[i] + k2[i] * (0.5 * dt);
    }
    S::eval(f, tau + 0.5 * dt, &tmp, &mut k3);
    for i in 0..n {
        tmp[i] = y[i] + k3[i] * dt;
    }
    S::eval(f, tau + dt, &tmp, &mut k4);
    for i in 0..n {
        y[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0);
    }
}

fn integrate<S: Scalar>(data: &FlowData, a: f64, b: f64, y: &mut [S], segs: &mut Vec<(f64, f64)>) {
    lattice_segments(a, b, data.steps, segs);
    for &(tau, dt) in segs.iter() {
        rk4_step(&*data.field, tau, dt, y);
    }
}

fn wrap_out<S: Scalar>(data: &FlowData, y: &mut [S]) {
    for &(i, start, period) in &data.wrap {
        if i < y.len() {
            y[i] = y[i].wrap(start, period);
        }
    }
}

/// `phi_t` (forward from 0 to `t`) or `phi_t^-1` (backward from `t` to 0).
struct FlowFn {
    data: Arc<FlowData>,
    backward: bool,
}

impl GenericFn for FlowFn {
    fn n_in(&self) -> usize {
        self.data.field.n_in()
    }
    fn n_out(&self) -> usize {
        self.data.field.n_in()
    }
    fn call<S: Scalar>(&self, t: f64, p: &[S], out: &mut [S]) {
        out.copy_from_slice(p);
        let mut segs = Vec::new();
        if self.backward {
            integrate(&self.data, t, 0.0, out, &mut segs);
        } else {
            integrate(&self.data, 0.0, t, out, &mut segs);
        }
        wrap_out(&self.data, out);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialKind {
    /// `I(phi-dot_t) = dF_t`.
    CoHamiltonian,
    /// `i(phi-dot_t) omega = dF_t`.
    AlmostCoHamiltonian,
}

/// Optional closed-form records carried by an isotopy. Anything absent is
/// computed from the map and generator when needed.
#[derive(Clone, Default)]
pub struct Records {
    pub potential: Option<(PotentialKind, ScalarField)>,
    /// `f_t(x)` with `phi_t^* eta = e^{f_t} eta`.
    pub log_factor: Option<ScalarField>,
    /// `d/dt f_t(x)`.
    pub log_rate: Option<ScalarField>,
    /// `C^t(x) = eta(phi-dot_t)(phi_t x)`.
    pub transition: Option<ScalarField>,
}

#[derive(Clone)]
pub struct Isotopy {
    pub chart: ManifoldChart,
    /// `(t, x) -> phi_t(x)`, with `(t, y) -> phi_t^-1(y)` when known.
    pub map: SmoothMap,
    /// `phi-dot_t`, as a field on the image: `d/dt phi_t(x) = X_t(phi_t(x))`.
    pub generator: VectorField,
    pub flow: Option<Arc<FlowData>>,
    pub records: Records,
    pub steps: usize,
    pub label: String,
    pub warnings: Vec<String>,
}

impl std::fmt::Debug for Isotopy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Isotopy({}, dim={}, flow={})", self.label, self.chart.dim(), self.flow.is_some())
    }
}

impl Isotopy {
    pub fn closed_form(
        chart: &ManifoldChart,
        fwd: Fun,
        inv: Option<Fun>,
        generator: VectorField,
        label: &str,
    ) -> Result<Isotopy> {
        let map = SmoothMap::new(chart.dim(), fwd, inv)?;
        if generator.dim != chart.dim() {
            return Err(invalid("generator dimension does not match the chart"));
        }
        Ok(Isotopy {
            chart: chart.clone(),
            map,
            generator,
            flow: None,
            records: Records::default(),
            steps: DEFAULT_STEPS,
            label: label.to_string(),
            warnings: Vec::new(),
        })
    }

    pub fn identity(chart: &ManifoldChart) -> Isotopy {
        let n = chart.dim();
        let mut iso = Isotopy::closed_form(
            chart,
            SmoothMap::identity(n).fwd,
            SmoothMap::identity(n).inv,
            VectorField::zero(n),
            "identity",
        )
        .expect("identity shape");
        iso.records = Records {
            potential: Some((PotentialKind::CoHamiltonian, Form::zero(n, 0))),
            log_factor: Some(Form::zero(n, 0)),
            log_rate: Some(Form::zero(n, 0)),
            transition: Some(Form::zero(n, 0)),
        };
        iso
    }

    pub fn with_records(mut self, r: Records) -> Isotopy {
        self.records = r;
        self
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    /// `phi_t` as a time-independent map.
    pub fn at(&self, t: f64) -> SmoothMap {
        self.map.at_time(t)
    }
    pub fn time_one(&self) -> SmoothMap {
        self.at(1.0)
    }
    pub fn eval(&self, t: f64, x: &[f64]) -> Vec<f64> {
        self.map.eval_t(t, x)
    }

    /// Points `phi_t(x)` for increasing `times`; flows integrate once through all of them.
    pub fn sample_path<S: Scalar>(&self, x: &[S], times: &[f64]) -> Vec<Buf<S>> {
        let mut out = Vec::with_capacity(times.len());
        match &self.flow {
            Some(fd) => {
                let mut y: Buf<S> = x.iter().copied().collect();
                let mut segs = Vec::new();
                let mut cur = 0.0;
                for &t in times {
                    integrate(fd, cur, t, &mut y, &mut segs);
                    cur = t;
                    let mut w = y.clone();
                    wrap_out(fd, &mut w);
                    out.push(w);
                }
            }
            None => {
                for &t in times {
                    let mut y: Buf<S> = smallvec![S::zero(); x.len()];
                    S::eval(&*self.map.fwd, t, x, &mut y);
                    out.push(y);
                }
            }
        }
        out
    }

    /// `eta(phi-dot_t) o phi_t`, from the record when present.
    pub fn transition(&self, s: &CosymplecticStructure) -> ScalarField {
        self.records.transition.clone().unwrap_or_else(|| {
            compose_scalar(&interior_product(&self.generator, &s.eta), &self.map.fwd)
        })
    }

    /// `f_t = ln(phi_t^*(eta)(xi))`, from the record when present.
    pub fn log_factor(&self, s: &CosymplecticStructure) -> ScalarField {
        self.records.log_factor.clone().unwrap_or_else(|| {
            ln_field(&interior_product(&reeb_vector(s), &pullback(&self.map, &s.eta)))
        })
    }

    /// `d/dt f_t`, from the record or by differencing in time.
    pub fn log_rate(&self, s: &CosymplecticStructure) -> ScalarField {
        self.records.log_rate.clone().unwrap_or_else(|| {
            let f = self.log_factor(s);
            Form::of(f.dim, 0, share(TimeDerivFn { f: f.f.clone(), h: 1e-4 }))
        })
    }

    /// `mu_t = xi(eta(phi-dot_t))`, a field on the image.
    pub fn mu(&self, s: &CosymplecticStructure) -> ScalarField {
        directional(&reeb_vector(s), &interior_product(&self.generator, &s.eta))
    }

    /// Classification of the generator at the given times.
    pub fn classify(
        &self,
        s: &CosymplecticStructure,
        times: &[f64],
        grid: &Grid,
        tol: f64,
    ) -> Result<Vec<FieldClassification>> {
        times.iter().map(|&t| classify_field(s, &self.generator, t, grid, tol)).collect()
    }

    /// `max |phi_t^* omega - omega|` and `max |phi_t^* eta - e^{f_t} eta|` (with the
    /// recorded or computed `f_t`) at time `t`.
    pub fn invariance_residuals(&self, s: &CosymplecticStructure, t: f64, grid: &Grid) -> (f64, f64) {
        let w = pullback(&self.map, &s.omega).sub(&s.omega).max_abs(t, grid);
        let f = self.log_factor(s);
        let e = pullback(&self.map, &s.eta).sub(&s.eta.times(&exp_field(&f))).max_abs(t, grid);
        (w, e)
    }

    /// Residual of the potential record: `I(phi-dot) - dF` or `i(phi-dot) omega - dF`.
    pub fn potential_residual(&self, s: &CosymplecticStructure, t: f64, grid: &Grid) -> Option<f64> {
        let (kind, f) = self.records.potential.as_ref()?;
        let lhs = match kind {
            PotentialKind::CoHamiltonian => apply_i(s, &self.generator),
            PotentialKind::AlmostCoHamiltonian => interior_product(&self.generator, &s.omega),
        };
        Some(lhs.sub(&d(f)).max_abs(t, grid))
    }

    /// The same path run at speed `tau'(t)`: `t -> phi_{tau(t)}`.
    pub fn reparametrized(&self, tau: Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>) -> Isotopy {
        let fwd = share(ReparamFn { f: self.map.fwd.clone(), tau: tau.clone(), rate: false });
        let inv = self.map.inv.as_ref().map(|i| share(ReparamFn { f: i.clone(), tau: tau.clone(), rate: false }));
        let gen = VectorField::of(self.dim(), share(ReparamFn { f: self.generator.f.clone(), tau, rate: true }));
        Isotopy {
            chart: self.chart.clone(),
            map: SmoothMap::of(self.dim(), fwd, inv),
            generator: gen,
            flow: None,
            records: Records::default(),
            steps: self.steps,
            label: format!("{} (reparametrized)", self.label),
            warnings: Vec::new(),
        }
    }

    /// Dense trajectory of one point with a chart-exit check at every step.
    pub fn trajectory(&self, x0: &[f64]) -> Result<Trajectory> {
        let n = self.steps.max(1);
        let times: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
        let points: Vec<Vec<f64>> = match &self.flow {
            Some(fd) => {
                let mut y = x0.to_vec();
                let mut segs = Vec::new();
                let mut v = vec![x0.to_vec()];
                for k in 1..=n {
                    integrate(fd, times[k - 1], times[k], &mut y, &mut segs);
                    v.push(y.clone());
                }
                v
            }
            None => times.iter().map(|&t| self.eval(t, x0)).collect(),
        };
        for (t, p) in times.iter().zip(&points) {
            if !self.chart.contains(p) {
                return Err(GeomError::OutOfChart { point: p.clone(), time: *t });
            }
        }
        let velocities = times.iter().zip(&points).map(|(&t, p)| self.generator.eval_t(t, p)).collect();
        Ok(Trajectory { chart: self.chart.clone(), times, points, velocities })
    }
}

/// RK4 samples of one orbit with cubic Hermite dense output.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub chart: ManifoldChart,
    pub times: Vec<f64>,
    /// Unwrapped chart coordinates.
    pub points: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
}

impl Trajectory {
    /// Hermite interpolant at `t`, canonicalized into the chart.
    pub fn at(&self, t: f64) -> Vec<f64> {
        let n = self.times.len() - 1;
        let t = t.clamp(self.times[0], self.times[n]);
        let k = self.times.partition_point(|&s| s <= t).clamp(1, n) - 1;
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let h = t1 - t0;
        let u = (t - t0) / h;
        let (h00, h10, h01, h11) =
            (2.0 * u.powi(3) - 3.0 * u * u + 1.0, u.powi(3) - 2.0 * u * u + u, -2.0 * u.powi(3) + 3.0 * u * u, u.powi(3) - u * u);
        let p: Vec<f64> = (0..self.points[k].len())
            .map(|i| {
                h00 * self.points[k][i]
                    + h10 * h * self.velocities[k][i]
                    + h01 * self.points[k + 1][i]
                    + h11 * h * self.velocities[k + 1][i]
            })
            .collect();
        self.chart.canonicalize(&p).unwrap_or(p)
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("t,{}\n", self.chart.labels().join(","));
        for (t, p) in self.times.iter().zip(&self.points) {
            let q = self.chart.canonicalize(p).unwrap_or_else(|_| p.clone());
            let row: Vec<String> = std::iter::once(*t).chain(q).map(|x| x.to_string()).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

/// Flow of a time-dependent field with `steps` fixed RK4 steps on `[0, 1]`.
pub fn integrate_flow(chart: &ManifoldChart, x: &VectorField, steps: usize, label: &str) -> Result<Isotopy> {
    if steps < 16 {
        return Err(invalid(format!("need at least 16 steps, got {steps}")));
    }
    if x.dim != chart.dim() {
        return Err(invalid("field dimension does not match the chart"));
    }
    let data = Arc::new(FlowData { field: x.f.clone(), steps, wrap: periodic_wraps(chart) });
    let fwd = share(FlowFn { data: data.clone(), backward: false });
    let inv = share(FlowFn { data: data.clone(), backward: true });
    Ok(Isotopy {
        chart: chart.clone(),
        map: SmoothMap::of(chart.dim(), fwd, Some(inv)),
        generator: x.clone(),
        flow: Some(data),
        records: Records::default(),
        steps,
        label: label.to_string(),
        warnings: Vec::new(),
    })
}

/// `integrate_flow` followed by a chart-exit check of every grid trajectory.
pub fn integrate_flow_checked(
    chart: &ManifoldChart,
    x: &VectorField,
    steps: usize,
    grid: &Grid,
    label: &str,
) -> Result<Isotopy> {
    let iso = integrate_flow(chart, x, steps, label)?;
    for p in grid.points() {
        iso.trajectory(p)?;
    }
    Ok(iso)
}

pub(crate) fn compose_scalar(f: &ScalarField, inner: &Fun) -> ScalarField {
    Form::of(f.dim, 0, share(ComposeFn { outer: f.f.clone(), inner: inner.clone() }))
}

struct TimeDerivFn {
    f: Fun,
    h: f64,
}
impl GenericFn for TimeDerivFn {
    fn n_in(&self) -> usize {
        self.f.n_in()
    }
    fn n_out(&self) -> usize {
        self.f.n_out()
    }
    fn call<S: Scalar>(&self, t: f64, p: &[S], out: &mut [S]) {
        let m = out.len();
        let h = self.h;
        let mut a: Buf<S> = smallvec![S::zero(); m];
        let mut b: Buf<S> = smallvec![S::zero(); m];
        let mut c: Buf<S> = smallvec![S::zero(); m];
        // Central where possible, second-order one-sided at the ends of [0, 1].
        if t - h >= 0.0 && t + h <= 1.0 {
            S::eval(&*self.f, t + h, p, &mut a);
            S::eval(&*self.f, t - h, p, &mut b);
            for i in 0..m {
                out[i] = (a[i] - b[i]) / (2.0 * h);
            }
        } else {
            let sg = if t - h < 0.0 { 1.0 } else { -1.0 };
            S::eval(&*self.f, t, p, &mut a);
            S::eval(&*self.f, t + sg * h, p, &mut b);
            S::eval(&*self.f, t + sg * 2.0 * h, p, &mut c);
            for i in 0..m {
                out[i] = (a[i] * -3.0 + b[i] * 4.0 - c[i]) * (sg / (2.0 * h));
            }
        }
    }
}

struct ReparamFn {
    f: Fun,
    tau: Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>,
    rate: bool,
}
impl GenericFn for ReparamFn {
    fn n_in(&self) -> usize {
        self.f.n_in()
    }
    fn n_out(&self) -> usize {
        self.f.n_out()
    }
    fn call<S: Scalar>(&self, t: f64, p: &[S], out: &mut [S]) {
        let (tau, dtau) = (self.tau)(t);
        S::eval(&*self.f, tau, p, out);
        if self.rate {
            for o in out.iter_mut() {
                *o = *o * dtau;
            }
        }
    }
}

// ----------------------------------------------------------------------------
// Hamiltonian constructions.

/// Flow of `X_t = I^-1(dH_t)`. With `normalize`, the recorded potential is
/// shifted to `int H_t eta ^ omega^n = 0` (exact on the step lattice).
pub fn co_hamiltonian_isotopy(
    s: &CosymplecticStructure,
    h: &ScalarField,
    steps: usize,
    normalize: bool,
    grid: &Grid,
) -> Result<Isotopy> {
    check_invertible(s, 0.0, grid)?;
    let x = invert_i(s, &d(h));
    let mut iso = integrate_flow(&s.chart, &x, steps, "co-hamiltonian")?;
    let xi = reeb_vector(s);
    for t in [0.0, 0.5, 1.0] {
        let r = Range::of(&directional(&xi, h), t, grid);
        if !r.is_constant() {
            iso.warnings.push(format!(
                "xi(H_t) is not constant at t = {t} (range {:.3e}); the flow need not be cosymplectic",
                r.max - r.min
            ));
            break;
        }
    }
    let potential = if normalize {
        let vol = s.volume_form();
        let total = s.volume(0.0, grid);
        let m = 2 * steps;
        let table: Vec<f64> = (0..=m)
            .map(|k| {
                let t = k as f64 / m as f64;
                grid.integrate(|p| h.value(t, p) * vol.value(t, p)) / total
            })
            .collect();
        Form::of(h.dim, 0, share(MeanShiftFn { f: h.f.clone(), table }))
    } else {
        h.clone()
    };
    iso.records.potential = Some((PotentialKind::CoHamiltonian, potential));
    Ok(iso)
}

struct MeanShiftFn {
    f: Fun,
    table: Vec<f64>,
}
impl GenericFn for MeanShiftFn {
    fn n_in(&self) -> usize {
        self.f.n_in()
    }
    fn n_out(&self) -> usize {
        1
    }
    fn call<S: Scalar>(&self, t: f64, p: &[S], out: &mut [S]) {
        S::eval(&*self.f, t, p, out);
        let m = self.table.len() - 1;
        let u = (t.clamp(0.0, 1.0) * m as f64).min(m as f64);
        let k = (u.floor() as usize).min(m.saturating_sub(1));
        let w = u - k as f64;
        let mean = self.table[k] * (1.0 - w) + self.table[(k + 1).min(m)] * w;
        out[0] = out[0] - mean;
    }
}

/// Index `r` with `xi = d/dx_r` on the grid, if any.
pub fn reeb_coordinate(s: &CosymplecticStructure, grid: &Grid) -> Option<usize> {
    let xi = reeb_vector(s);
    let n = s.dim();
    let first = xi.eval(grid.first_point());
    let r = (0..n).find(|&i| (first[i] - 1.0).abs() < 1e-10)?;
    let ok = grid.points().all(|p| {
        let v = xi.eval(p);
        (0..n).all(|i| (v[i] - if i == r { 1.0 } else { 0.0 }).abs() < 1e-10)
    });
    ok.then_some(r)
}

/// `g(p) = int_0^{p_r} mu(p with x_r = u) du`, the primitive of `mu eta` along the Reeb coordinate.
struct ReebPrimitiveFn {
    mu: Fun,
    r: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}
impl GenericFn for ReebPrimitiveFn {
    fn n_in(&self) -> usize {
        self.mu.n_in()
    }
    fn n_out(&self) -> usize {
        1
    }
    fn call<S: Scalar>(&self, t: f64, p: &[S], out: &mut [S]) {
        let mut q: Buf<S> = p.iter().copied().collect();
        let mut o = [S::zero()];
        let mut acc = S::zero();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            q[self.r] = p[self.r] * *x;
            S::eval(&*self.mu, t, &q, &mut o);
            acc += o[0] * *w;
        }
        out[0] = acc * p[self.r];
    }
}

struct AugmentFn {
    x: Fun,
    extra: Fun,
    n: usize,
}
impl GenericFn for AugmentFn {
    fn n_in(&self) -> usize {
        self.n + 1
    }
    fn n_out(&self) -> usize {
        self.n + 1
    }
    fn call<S: Scalar>(&self, t: f64, p: &[S], out: &mut [S]) {
        let n = self.n;
        S::eval(&*self.x, t, &p[..n], &mut out[..n]);
        S::eval(&*self.extra, t, &p[..n], &mut out[n..]);
    }
}

/// Last component of an augmented flow started at `(x, 0)`.
struct AugmentedTailFn {
    flow: Arc<FlowData>,
    n: usize,
}
impl GenericFn for AugmentedTailFn {
    fn n_in(&self) -> usize {
        self.n
    }
    fn n_out(&self) -> usize {
        1
    }
    fn call<S: Scalar>(&self, t: f64, p: &[S], out: &mut [S]) {
        let mut y: Buf<S> = p.iter().copied().collect();
        y.push(S::zero());
        let mut segs = Vec::new();
        integrate(&self.flow, 0.0, t, &mut y, &mut segs);
        out[0] = y[self.n];
    }
}

/// Field with `i(X_t) omega = dH_t` and `eta(X_t) = g_t`, `dg_t = mu_t eta`; the log
/// factor `f_t = int_0^t mu_s o psi_s ds` is integrated alongside the flow.
pub fn almost_co_hamiltonian_isotopy(
    s: &CosymplecticStructure,
    h: &ScalarField,
    mu: &ScalarField,
    steps: usize,
    grid: &Grid,
    tol: f64,
) -> Result<Isotopy> {
    check_invertible(s, 0.0, grid)?;
    let r = reeb_coordinate(s, grid)
        .ok_or_else(|| precondition("almost co-Hamiltonian solve needs xi to be a coordinate field"))?;
    let (nodes, weights) = gauss_legendre(20);
    let g = Form::of(s.dim(), 0, share(ReebPrimitiveFn { mu: mu.f.clone(), r, nodes, weights }));
    let x = invert_i(s, &d(h).add(&s.eta.times(&g)));
    for t in [0.0, 0.5, 1.0] {
        let r1 = interior_product(&x, &s.omega).sub(&d(h)).max_abs(t, grid);
        let r2 = d(&interior_product(&x, &s.eta)).sub(&s.eta.times(mu)).max_abs(t, grid);
        if !(r1 < tol && r2 < tol) {
            return Err(precondition(format!(
                "inconsistent (H, mu) pair at t = {t}: |i_X omega - dH| = {r1:e}, |d eta(X) - mu eta| = {r2:e}"
            )));
        }
    }
    let mut iso = integrate_flow(&s.chart, &x, steps, "almost co-hamiltonian")?;
    let n = s.dim();
    let aug = Arc::new(FlowData {
        field: share(AugmentFn { x: x.f.clone(), extra: mu.f.clone(), n }),
        steps,
        wrap: periodic_wraps(&s.chart),
    });
    iso.records = Records {
        potential: Some((PotentialKind::AlmostCoHamiltonian, h.clone())),
        log_factor: Some(Form::of(n, 0, share(AugmentedTailFn { flow: aug, n }))),
        log_rate: Some(compose_scalar(mu, &iso.map.fwd)),
        transition: None,
    };
    Ok(iso)
}

// ----------------------------------------------------------------------------
// Group operations.

/// `-D phi_t(z)^-1 X_t(phi_t z)`: the generator of `t -> phi_t^-1`.
struct InverseGenFn {
    fwd: Fun,
    x: Fun,
    n: usize,
}
impl GenericFn for InverseGenFn {
    fn n_in(&self) -> usize {
        self.n
    }
    fn n_out(&self) -> usize {
        self.n
    }
    fn call<S: Scalar>(&self, t: f64, p: &[S], out: &mut [S]) {
        let n = self.n;
        let mut y: Buf<S> = smallvec![S::zero(); n];
        let mut j: smallvec::SmallVec<[S; 36]> = smallvec![S::zero(); n * n];
        S::eval_jac(&*self.fwd, t, p, &mut y, &mut j);
        S::eval(&*self.x, t, &y, out);
        if !linalg::solve(&mut j, out, n, 1e-300) {
            out.iter_mut().for_each(|o| *o = S::cst(f64::NAN));
        }
        for o in out.iter_mut() {
            *o = -*o;
        }
    }
}

/// `t -> phi_t^-1` with transformed records: potential `-F_t o phi_t`, log factor `-f_t o phi_t^-1`.
pub fn invert_isotopy(phi: &Isotopy) -> Result<Isotopy> {
    let map = phi.map.inverse().map_err(|_| precondition("inverting an isotopy needs its inverse maps"))?;
    let n = phi.dim();
    let gen = VectorField::of(n, share(InverseGenFn { fwd: phi.map.fwd.clone(), x: phi.generator.f.clone(), n }));
    let inv = map.fwd.clone();
    let records = Records {
        potential: phi.records.potential.as_ref().map(|(k, f)| (*k, compose_scalar(f, &phi.map.fwd).scale(-1.0))),
        log_factor: phi.records.log_factor.as_ref().map(|f| compose_scalar(f, &inv).scale(-1.0)),
        log_rate: None,
        transition: None,
    };
    Ok(Isotopy {
        chart: phi.chart.clone(),
        map,
        generator: gen,
        flow: None,
        records,
        steps: phi.steps,
        label: format!("inverse of {}", phi.label),
        warnings: Vec::new(),
    })
}

/// `t -> phi_t o psi_t`, with the potentials `F + K o phi_t^-1`, log factors
/// `f o psi_t + q` and the transition cocycle `C_phi o psi_t + e^{f o psi_t} C_psi`.
pub fn compose_isotopies(s: &CosymplecticStructure, phi: &Isotopy, psi: &Isotopy) -> Result<Isotopy> {
    let map = phi.map.compose(&psi.map);
    let pushed = pushforward_field(&phi.map, &psi.generator)
        .map_err(|_| precondition("composition needs the inverse maps of the outer isotopy"))?;
    let gen = phi.generator.add(&pushed);
    let potential = match (&phi.records.potential, &psi.records.potential, &phi.map.inv) {
        (Some((k1, f)), Some((k2, g)), Some(inv)) if k1 == k2 => Some((*k1, f.add(&compose_scalar(g, inv)))),
        _ => None,
    };
    let f_phi = phi.log_factor(s);
    let f_psi_in = compose_scalar(&f_phi, &psi.map.fwd);
    let log_factor = match (&phi.records.log_factor, &psi.records.log_factor) {
        (Some(_), Some(q)) => Some(f_psi_in.add(q)),
        _ => None,
    };
    let transition =
        compose_scalar(&phi.transition(s), &psi.map.fwd).add(&psi.transition(s).times(&exp_field(&f_psi_in)));
    Ok(Isotopy {
        chart: phi.chart.clone(),
        map,
        generator: gen,
        flow: None,
        records: Records { potential, log_factor, log_rate: None, transition: Some(transition) },
        steps: phi.steps.max(psi.steps),
        label: format!("{} o {}", phi.label, psi.label),
        warnings: Vec::new(),
    })
}

/// `psi_t = rho^-1 o phi_t o rho` for an (almost) cosymplectic `rho`.
pub fn conjugate_isotopy(
    s: &CosymplecticStructure,
    phi: &Isotopy,
    rho: &SmoothMap,
    class: &MapClassification,
) -> Result<Isotopy> {
    if !class.almost_cosymplectomorphism {
        return Err(precondition("conjugating map is not classified (almost) cosymplectic"));
    }
    let rho_inv = rho.inverse()?;
    let f_rho = class
        .conformal_log_factor
        .clone()
        .ok_or_else(|| precondition("classification carries no log factor"))?;
    let map = rho_inv.compose(&phi.map).compose(rho);
    let gen = pushforward_field(&rho_inv, &phi.generator)?;
    let potential = phi.records.potential.as_ref().and_then(|(k, f)| match k {
        PotentialKind::AlmostCoHamiltonian => Some((*k, compose_scalar(f, &rho.fwd))),
        PotentialKind::CoHamiltonian => class.cosymplectomorphism.then(|| (*k, compose_scalar(f, &rho.fwd))),
    });
    let log_factor = compose_scalar(&phi.log_factor(s), &rho.fwd)
        .add(&f_rho)
        .sub(&compose_scalar(&f_rho, &map.fwd));
    Ok(Isotopy {
        chart: phi.chart.clone(),
        map,
        generator: gen,
        flow: None,
        records: Records { potential, log_factor: Some(log_factor), log_rate: None, transition: None },
        steps: phi.steps,
        label: format!("conjugate of {}", phi.label),
        warnings: Vec::new(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ConjugationReport {
    /// `max |mu^psi_t - (-df^rho((rho^-1)_* phi-dot_t) + f-dot_t) o psi_t^-1|`.
    pub printed_formula: f64,
    /// `max |mu^psi_t - (f-dot_t o rho o psi_t^-1 - df^rho(psi-dot_t))|`.
    pub corrected_formula: f64,
    /// `max |I-potential residual|` of the conjugate, when it carries one.
    pub potential_residual: Option<f64>,
}

/// Compares the directly computed `mu` of the conjugate with the closed form `H_t(rho)`.
pub fn conjugation_check(
    s: &CosymplecticStructure,
    phi: &Isotopy,
    rho: &SmoothMap,
    class: &MapClassification,
    t: f64,
    grid: &Grid,
) -> Result<ConjugationReport> {
    let psi = conjugate_isotopy(s, phi, rho, class)?;
    let psi_inv = psi.map.inv.clone().ok_or_else(|| precondition("conjugate has no inverse"))?;
    let f_rho = class.conformal_log_factor.clone().expect("checked in conjugate_isotopy");
    let direct = psi.mu(s);
    let rate = phi.log_rate(s);
    let dfr = directional(&psi.generator, &f_rho);
    let printed = compose_scalar(&rate.sub(&dfr), &psi_inv);
    let rate_back = compose_scalar(&compose_scalar(&rate, &rho.fwd), &psi_inv);
    let corrected = rate_back.sub(&dfr);
    Ok(ConjugationReport {
        printed_formula: direct.sub(&printed).max_abs(t, grid),
        corrected_formula: direct.sub(&corrected).max_abs(t, grid),
        potential_residual: psi.potential_residual(s, t, grid),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ConformalRateReport {
    pub times: Vec<f64>,
    /// `max_x |mu_t(x) - f-dot_t(x) e^{-f_t(x)}|`.
    pub printed_form: f64,
    /// `max_x |mu_t(psi_t x) - f-dot_t(x)|`.
    pub corrected_form: f64,
    /// `max_x |psi_t^*(eta)(xi) - e^{f_t}|`.
    pub reeb_factor: f64,
}

/// The conformal-rate identities for an almost isotopy, using its recorded `f_t`.
pub fn conformal_rate_check(
    s: &CosymplecticStructure,
    psi: &Isotopy,
    times: &[f64],
    grid: &Grid,
) -> Result<ConformalRateReport> {
    let f = psi.records.log_factor.clone().ok_or_else(|| precondition("isotopy has no tracked log factor"))?;
    let rate = psi.log_rate(s);
    let mu = psi.mu(s);
    let mu_back = compose_scalar(&mu, &psi.map.fwd);
    let xi = reeb_vector(s);
    let factor = interior_product(&xi, &pullback(&psi.map, &s.eta));
    let ef = exp_field(&f);
    let printed = mu.sub(&rate.times(&exp_field(&f.scale(-1.0))));
    let corrected = mu_back.sub(&rate);
    let reeb = factor.sub(&ef);
    let mut out = ConformalRateReport { times: times.to_vec(), printed_form: 0.0, corrected_form: 0.0, reeb_factor: 0.0 };
    for &t in times {
        out.printed_form = out.printed_form.max(printed.max_abs(t, grid));
        out.corrected_form = out.corrected_form.max(corrected.max_abs(t, grid));
        out.reeb_factor = out.reeb_factor.max(reeb.max_abs(t, grid));
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct InverseTransitionReport {
    /// `max |C_{phi^-1} + e^{f_t} C_phi o phi_t^-1|`.
    pub printed_formula: f64,
    /// `max |C_{phi^-1} + e^{-f_t o phi_t^-1} C_phi o phi_t^-1|`.
    pub corrected_formula: f64,
}

pub fn inverse_transition_check(
    s: &CosymplecticStructure,
    phi: &Isotopy,
    t: f64,
    grid: &Grid,
) -> Result<InverseTransitionReport> {
    let inv = invert_isotopy(phi)?;
    let back = inv.map.fwd.clone();
    let direct = inv.transition(s);
    let c_back = compose_scalar(&phi.transition(s), &back);
    let f = phi.log_factor(s);
    let printed = c_back.times(&exp_field(&f)).scale(-1.0);
    let corrected = c_back.times(&exp_field(&compose_scalar(&f, &back).scale(-1.0))).scale(-1.0);
    Ok(InverseTransitionReport {
        printed_formula: direct.sub(&printed).max_abs(t, grid),
        corrected_formula: direct.sub(&corrected).max_abs(t, grid),
    })
}

// ----------------------------------------------------------------------------
// Moser stability.

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MoserVariant {
    /// `omega_t = omega_0 + t d(alpha)`, eta fixed.
    Omega,
    /// `eta_t = eta_0 + t df`, omega fixed.
    Eta,
    /// Both interpolated.
    Full,
    /// A given family with `d/dt omega_t = d alpha_t`, `d/dt eta_t = d f_t`.
    General,
}

#[derive(Clone, Debug)]
pub struct StabilityProblem {
    pub chart: ManifoldChart,
    pub eta: OneForm,
    pub omega: TwoForm,
    pub alpha: OneForm,
    pub f: ScalarField,
    pub variant: MoserVariant,
}

impl StabilityProblem {
    pub fn omega(s0: &CosymplecticStructure, alpha: &OneForm) -> Self {
        let w1 = s0.omega.add(&d(alpha));
        StabilityProblem {
            chart: s0.chart.clone(),
            eta: s0.eta.clone(),
            omega: s0.omega.lerp(&w1),
            alpha: alpha.clone(),
            f: Form::zero(s0.dim(), 0),
            variant: MoserVariant::Omega,
        }
    }
    pub fn eta(s0: &CosymplecticStructure, f: &ScalarField) -> Self {
        let e1 = s0.eta.add(&d(f));
        StabilityProblem {
            chart: s0.chart.clone(),
            eta: s0.eta.lerp(&e1),
            omega: s0.omega.clone(),
            alpha: Form::zero(s0.dim(), 1),
            f: f.clone(),
            variant: MoserVariant::Eta,
        }
    }
    pub fn full(s0: &CosymplecticStructure, alpha: &OneForm, f: &ScalarField) -> Self {
        let w1 = s0.omega.add(&d(alpha));
        let e1 = s0.eta.add(&d(f));
        StabilityProblem {
            chart: s0.chart.clone(),
            eta: s0.eta.lerp(&e1),
            omega: s0.omega.lerp(&w1),
            alpha: alpha.clone(),
            f: f.clone(),
            variant: MoserVariant::Full,
        }
    }
    pub fn general(chart: &ManifoldChart, eta_t: &OneForm, omega_t: &TwoForm, alpha_t: &OneForm, f_t: &ScalarField) -> Self {
        StabilityProblem {
            chart: chart.clone(),
            eta: eta_t.clone(),
            omega: omega_t.clone(),
            alpha: alpha_t.clone(),
            f: f_t.clone(),
            variant: MoserVariant::General,
        }
    }

    /// The time-dependent structure `(eta_t, omega_t)`.
    pub fn family(&self) -> CosymplecticStructure {
        CosymplecticStructure { chart: self.chart.clone(), eta: self.eta.clone(), omega: self.omega.clone() }
    }

    /// `v_t = I_t^-1(-alpha_t - f_t eta_t)`.
    pub fn moser_field(&self) -> VectorField {
        let rhs = self.alpha.scale(-1.0).sub(&self.eta.times(&self.f));
        invert_i(&self.family(), &rhs)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ProblemCheck {
    /// `max |d/dt omega_t - d alpha_t|` over the checkpoints.
    pub primitive_omega: f64,
    /// `max |d/dt eta_t - d f_t|`.
    pub primitive_eta: f64,
    /// `max |alpha(xi_t)|` (omega variant) or `max |d(alpha_t(xi_t))|`.
    pub hypothesis: f64,
    pub min_det: f64,
}

pub fn check_problem(p: &StabilityProblem, grid: &Grid, tol: f64) -> Result<ProblemCheck> {
    let fam = p.family();
    let h = 1e-4;
    let mut out = ProblemCheck { primitive_omega: 0.0, primitive_eta: 0.0, hypothesis: 0.0, min_det: f64::INFINITY };
    let da = d(&p.alpha);
    let df = d(&p.f);
    for &t in &CHECKPOINTS {
        let (t0, t1) = ((t - h).max(0.0), (t + h).min(1.0));
        let dw = p.omega.at_time(t1).sub(&p.omega.at_time(t0)).scale(1.0 / (t1 - t0));
        let de = p.eta.at_time(t1).sub(&p.eta.at_time(t0)).scale(1.0 / (t1 - t0));
        out.primitive_omega = out.primitive_omega.max(dw.sub(&da.at_time(t)).max_abs(0.0, grid));
        out.primitive_eta = out.primitive_eta.max(de.sub(&df.at_time(t)).max_abs(0.0, grid));
        let st = fam.at_time(t);
        let rep = verify_structure(&st, 0.0, grid, tol);
        if !rep.pass {
            return Err(GeomError::Degenerate(format!("structure at t = {t}: {}", rep.failures.join("; "))));
        }
        out.min_det = out.min_det.min(rep.min_det);
        let a_xi = interior_product(&reeb_vector(&st), &p.alpha.at_time(t));
        let hyp = match p.variant {
            MoserVariant::Omega => a_xi.max_abs(0.0, grid),
            MoserVariant::Eta => 0.0,
            MoserVariant::Full | MoserVariant::General => d(&a_xi).max_abs(0.0, grid),
        };
        out.hypothesis = out.hypothesis.max(hyp);
    }
    // Differencing in time costs about h^2 relative accuracy.
    let slack = tol.max(1e-6);
    if out.primitive_omega > slack || out.primitive_eta > slack {
        return Err(precondition(format!(
            "primitives do not match the family: |d/dt omega - d alpha| = {:e}, |d/dt eta - df| = {:e}",
            out.primitive_omega, out.primitive_eta
        )));
    }
    if out.hypothesis > tol {
        let which = if p.variant == MoserVariant::Omega { "alpha(xi) = 0" } else { "d(alpha_t(xi_t)) = 0" };
        return Err(precondition(format!("stability hypothesis {which} fails (residual {:e})", out.hypothesis)));
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct MoserCheckpoint {
    pub t: f64,
    /// `max |phi_t^*(omega_t) - omega_0|`.
    pub omega: f64,
    /// `max |phi_t^*(eta_t) - eta_0|`.
    pub eta: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MoserReport {
    pub variant: MoserVariant,
    pub steps: usize,
    pub check: ProblemCheck,
    pub checkpoints: Vec<MoserCheckpoint>,
    pub omega_residual: f64,
    pub eta_residual: f64,
    #[serde(skip)]
    pub isotopy: Option<Isotopy>,
}

pub fn moser_solve(p: &StabilityProblem, steps: usize, grid: &Grid, tol: f64) -> Result<MoserReport> {
    let check = check_problem(p, grid, tol)?;
    let fam = p.family();
    for &t in &CHECKPOINTS {
        check_invertible(&fam, t, grid)?;
    }
    let iso = integrate_flow(&p.chart, &p.moser_field(), steps, "moser")?;
    let checkpoints = pullback_residuals(&iso, &p.eta, &p.omega, &CHECKPOINTS, grid);
    let omega_residual = checkpoints.iter().map(|c| c.omega).fold(0.0, f64::max);
    let eta_residual = checkpoints.iter().map(|c| c.eta).fold(0.0, f64::max);
    Ok(MoserReport {
        variant: p.variant,
        steps,
        check,
        checkpoints,
        omega_residual,
        eta_residual,
        isotopy: Some(iso),
    })
}

/// `max |phi_t^*(eta_t) - eta_0|`, `max |phi_t^*(omega_t) - omega_0|` at `times`,
/// from one pass of first-order jets per grid point.
pub fn pullback_residuals(
    iso: &Isotopy,
    eta: &OneForm,
    omega: &TwoForm,
    times: &[f64],
    grid: &Grid,
) -> Vec<MoserCheckpoint> {
    let n = iso.dim();
    let b = basis(n);
    let pairs: Vec<(usize, usize)> = b.masks[2]
        .iter()
        .map(|&m| {
            let v = mask_indices(m);
            (v[0], v[1])
        })
        .collect();
    let mut out: Vec<MoserCheckpoint> = times.iter().map(|&t| MoserCheckpoint { t, omega: 0.0, eta: 0.0 }).collect();
    let mut e_y = vec![0.0; n];
    let mut w_y = vec![0.0; pairs.len()];
    let mut e_0 = vec![0.0; n];
    let mut w_0 = vec![0.0; pairs.len()];
    for x in grid.points() {
        let seed: Vec<Dual> = x.iter().enumerate().map(|(i, &v)| Dual::var(v, i)).collect();
        let path = iso.sample_path(&seed, times);
        eta.f.eval_f64(0.0, x, &mut e_0);
        omega.f.eval_f64(0.0, x, &mut w_0);
        for (k, y) in path.iter().enumerate() {
            let t = times[k];
            let yv: Vec<f64> = y.iter().map(|d| d.v).collect();
            let jac = |a: usize, i: usize| y[a].g[i];
            eta.f.eval_f64(t, &yv, &mut e_y);
            omega.f.eval_f64(t, &yv, &mut w_y);
            for i in 0..n {
                let v: f64 = (0..n).map(|a| e_y[a] * jac(a, i)).sum();
                out[k].eta = out[k].eta.max((v - e_0[i]).abs());
            }
            for (c, &(i, j)) in pairs.iter().enumerate() {
                let mut v = 0.0;
                for (q, &(a, bb)) in pairs.iter().enumerate() {
                    v += w_y[q] * (jac(a, i) * jac(bb, j) - jac(a, j) * jac(bb, i));
                }
                out[k].omega = out[k].omega.max((v - w_0[c]).abs());
            }
        }
    }
    out
}

// ----------------------------------------------------------------------------
// Symplectization lifts.

/// `M x S^1` with `omega~ = p^* omega + p^* eta ^ d theta`, theta on `[-pi, pi)`.
pub fn symplectization(s: &CosymplecticStructure) -> Result<(ManifoldChart, TwoForm)> {
    let chart = s.chart.times(FactorSpec::centered_circle(2.0 * PI, "theta"))?;
    let n = s.dim();
    let small = basis(n);
    let slots: Vec<(bool, usize)> = basis(n + 1).masks[2]
        .iter()
        .map(|&m| {
            let v = mask_indices(m);
            if v[1] == n {
                (true, v[0])
            } else {
                (false, small.index[m as usize])
            }
        })
        .collect();
    let w = Form::of(n + 1, 2, share(LiftFormFn { eta: s.eta.f.clone(), omega: s.omega.f.clone(), n, slots }));
    Ok((chart, w))
}

struct LiftFormFn {
    eta: Fun,
    omega: Fun,
    n: usize,
    slots: Vec<(bool, usize)>,
}
impl GenericFn for LiftFormFn {
    fn n_in(&self) -> usize {
        self.n + 1
    }
    fn n_out(&self) -> usize {
        self.slots.len()
    }
    fn call<S: Scalar>(&self, t: f64, p: &[S], out: &mut [S]) {
        let n = self.n;
        let mut e: Buf<S> = smallvec![S::zero(); n];
        let mut w: Buf<S> = smallvec![S::zero(); n * (n - 1) / 2];
        S::eval(&*self.eta, t, &p[..n], &mut e);
        S::eval(&*self.omega, t, &p[..n], &mut w);
        for (o, &(is_eta, k)) in out.iter_mut().zip(&self.slots) {
            *o = if is_eta { e[k] } else { w[k] };
        }
    }
}

/// `(X_t(y), -c_t(y))` or `(X_t(y), -c_t(y) theta)` on the lifted chart.
struct LiftGenFn {
    x: Fun,
    c: Fun,
    n: usize,
    scale_theta: bool,
}
impl GenericFn for LiftGenFn {
    fn n_in(&self) -> usize {
        self.n + 1
    }
    fn n_out(&self) -> usize {
        self.n + 1
    }
    fn call<S: Scalar>(&self, t: f64, p: &[S], out: &mut [S]) {
        let n = self.n;
        S::eval(&*self.x, t, &p[..n], &mut out[..n]);
        let mut c = [S::zero()];
        S::eval(&*self.c, t, &p[..n], &mut c);
        out[n] = if self.scale_theta { -(c[0] * p[n]) } else { -c[0] };
    }
}

/// `(x, theta) -> (phi_t x, theta -/+ int_0^t C^u(x) du)`, with `x` the input
/// (forward) or the output (inverse) of `map`.
struct LiftRotFn {
    map: Fun,
    c: Fun,
    n: usize,
    inverse: bool,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}
impl GenericFn for LiftRotFn {
    fn n_in(&self) -> usize {
        self.n + 1
    }
    fn n_out(&self) -> usize {
        self.n + 1
    }
    fn call<S: Scalar>(&self, t: f64, p: &[S], out: &mut [S]) {
        let n = self.n;
        S::eval(&*self.map, t, &p[..n], &mut out[..n]);
        let x: Buf<S> = if self.inverse { out[..n].iter().copied().collect() } else { p[..n].iter().copied().collect() };
        let mut o = [S::zero()];
        let mut acc = S::zero();
        for (u, w) in self.nodes.iter().zip(&self.weights) {
            S::eval(&*self.c, t * u, &x, &mut o);
            acc += o[0] * *w;
        }
        let shift = acc * t;
        out[n] = if self.inverse { p[n] + shift } else { p[n] - shift };
    }
}

/// `(x, theta) -> (psi_t x, theta e^{-f_t(x)})` and its inverse.
struct LiftScaleFn {
    map: Fun,
    f: Fun,
    n: usize,
    inverse: bool,
}
impl GenericFn for LiftScaleFn {
    fn n_in(&self) -> usize {
        self.n + 1
    }
    fn n_out(&self) -> usize {
        self.n + 1
    }
    fn call<S: Scalar>(&self, t: f64, p: &[S], out: &mut [S]) {
        let n = self.n;
        S::eval(&*self.map, t, &p[..n], &mut out[..n]);
        let mut f = [S::zero()];
        if self.inverse {
            let x: Buf<S> = out[..n].iter().copied().collect();
            S::eval(&*self.f, t, &x, &mut f);
            out[n] = p[n] * f[0].exp();
        } else {
            S::eval(&*self.f, t, &p[..n], &mut f);
            out[n] = p[n] * (-f[0]).exp();
        }
    }
}

#[derive(Clone, Debug)]
pub struct LiftedIsotopy {
    pub chart: ManifoldChart,
    pub omega: TwoForm,
    pub isotopy: Isotopy,
}

impl LiftedIsotopy {
    /// `max |phi~_t^* omega~ - omega~|` at the given times.
    pub fn symplectic_residual(&self, times: &[f64], grid: &Grid) -> f64 {
        let r = pullback(&self.isotopy.map, &self.omega).sub(&self.omega);
        times.iter().map(|&t| r.max_abs(t, grid)).fold(0.0, f64::max)
    }
}

fn require_cosymplectic(s: &CosymplecticStructure, phi: &Isotopy, almost: bool) -> Result<()> {
    let coarse = s.chart.grid(6, 7);
    for t in [0.0, 0.5, 1.0] {
        let lw = crate::forms::lie_derivative(&phi.generator, &s.omega).max_abs(t, &coarse);
        let le = if almost {
            let mu = phi.mu(s);
            crate::forms::lie_derivative(&phi.generator, &s.eta).sub(&s.eta.times(&mu)).max_abs(t, &coarse)
        } else {
            crate::forms::lie_derivative(&phi.generator, &s.eta).max_abs(t, &coarse)
        };
        if !(lw < 1e-6 && le < 1e-6) {
            let what = if almost { "almost cosymplectic" } else { "cosymplectic" };
            return Err(precondition(format!("{} is not {what} at t = {t} ({lw:e}, {le:e})", phi.label)));
        }
    }
    Ok(())
}

/// Lift of a cosymplectic isotopy: `theta -> theta - int_0^t C^u(x) du`.
pub fn lift_cosymplectic(s: &CosymplecticStructure, phi: &Isotopy) -> Result<LiftedIsotopy> {
    require_cosymplectic(s, phi, false)?;
    let (chart, omega) = symplectization(s)?;
    let n = s.dim();
    let eta_x = interior_product(&phi.generator, &s.eta);
    let gen = VectorField::of(n + 1, share(LiftGenFn { x: phi.generator.f.clone(), c: eta_x.f, n, scale_theta: false }));
    let mut iso = if phi.flow.is_some() {
        integrate_flow(&chart, &gen, phi.steps, "")?
    } else {
        let inv = phi.map.inv.clone().ok_or_else(|| precondition("lift needs the inverse maps"))?;
        let c = phi.transition(s).f;
        let (nodes, weights) = gauss_legendre(16);
        let fwd = share(LiftRotFn {
            map: phi.map.fwd.clone(),
            c: c.clone(),
            n,
            inverse: false,
            nodes: nodes.clone(),
            weights: weights.clone(),
        });
        let back = share(LiftRotFn { map: inv, c, n, inverse: true, nodes, weights });
        Isotopy::closed_form(&chart, fwd, Some(back), gen, "")?
    };
    iso.label = format!("lift of {}", phi.label);
    Ok(LiftedIsotopy { chart, omega, isotopy: iso })
}

/// Lift of an almost cosymplectic isotopy: `theta -> theta e^{-f_t(x)}`.
pub fn lift_almost(s: &CosymplecticStructure, psi: &Isotopy) -> Result<LiftedIsotopy> {
    require_cosymplectic(s, psi, true)?;
    let (chart, omega) = symplectization(s)?;
    let n = s.dim();
    let mut iso = if psi.flow.is_some() {
        let mu = psi.mu(s);
        let gen = VectorField::of(n + 1, share(LiftGenFn { x: psi.generator.f.clone(), c: mu.f, n, scale_theta: true }));
        integrate_flow(&chart, &gen, psi.steps, "")?
    } else {
        let f = psi.records.log_factor.clone().ok_or_else(|| precondition("lift needs a tracked log factor"))?;
        let inv = psi.map.inv.clone().ok_or_else(|| precondition("lift needs the inverse maps"))?;
        let rate_back = compose_scalar(&psi.log_rate(s), &inv);
        let gen = VectorField::of(
            n + 1,
            share(LiftGenFn { x: psi.generator.f.clone(), c: rate_back.f, n, scale_theta: true }),
        );
        let fwd = share(LiftScaleFn { map: psi.map.fwd.clone(), f: f.f.clone(), n, inverse: false });
        let back = share(LiftScaleFn { map: inv, f: f.f, n, inverse: true });
        Isotopy::closed_form(&chart, fwd, Some(back), gen, "")?
    };
    iso.label = format!("lift of {}", psi.label);
    Ok(LiftedIsotopy { chart, omega, isotopy: iso })
}

struct LiftScalarFn {
    h: Fun,
    e: Fun,
    n: usize,
}
impl GenericFn for LiftScalarFn {
    fn n_in(&self) -> usize {
        self.n + 1
    }
    fn n_out(&self) -> usize {
        1
    }
    fn call<S: Scalar>(&self, t: f64, p: &[S], out: &mut [S]) {
        let n = self.n;
        let mut h = [S::zero()];
        let mut e = [S::zero()];
        S::eval(&*self.h, t, &p[..n], &mut h);
        S::eval(&*self.e, t, &p[..n], &mut e);
        out[0] = h[0] + p[n] * e[0];
    }
}

/// `max |i(psi~-dot_t) omega~ - d(H_t o p + theta eta(psi-dot_t) o p)|` over `times`.
pub fn lifted_hamiltonian_check(
    s: &CosymplecticStructure,
    psi: &Isotopy,
    lifted: &LiftedIsotopy,
    times: &[f64],
    grid: &Grid,
) -> Result<f64> {
    let h = match &psi.records.potential {
        Some((PotentialKind::AlmostCoHamiltonian, h)) => h.clone(),
        _ => return Err(precondition("lifted Hamiltonian check needs an almost co-Hamiltonian potential record")),
    };
    let n = s.dim();
    let e = interior_product(&psi.generator, &s.eta);
    let big = Form::of(n + 1, 0, share(LiftScalarFn { h: h.f.clone(), e: e.f.clone(), n }));
    let lhs = interior_product(&lifted.isotopy.generator, &lifted.omega);
    let r = lhs.sub(&d(&big));
    Ok(times.iter().map(|&t| r.max_abs(t, grid)).fold(0.0, f64::max))
}

// ----------------------------------------------------------------------------
// Dynamics.

#[derive(Clone, Debug, Serialize)]
pub struct EnergyProfile {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    /// `int_0^t eta(X)^2 o phi^s ds`, integrated with the orbit.
    pub eta_sq_integral: Vec<f64>,
    /// `max |G(phi^t p) - G(p) - int_0^t eta(X)^2|`.
    pub identity_residual: f64,
    pub monotone: bool,
    /// `int_0^T eta(X)^2` vanishes, so a periodic orbit through `p` is not excluded.
    pub periodic_candidate: bool,
}

/// Energy `G` along the orbit of `X = I^-1(dG)` through `p` for time `T`.
pub fn orbit_energy_profile(
    s: &CosymplecticStructure,
    g: &ScalarField,
    p: &[f64],
    t_end: f64,
    steps: usize,
) -> Result<EnergyProfile> {
    let n = s.dim();
    let x = invert_i(s, &d(g));
    let eta_x = interior_product(&x, &s.eta);
    let sq = Form::of(n, 0, share(SquareFn { f: eta_x.f }));
    let data = FlowData { field: share(AugmentFn { x: x.f.clone(), extra: sq.f, n }), steps, wrap: Vec::new() };
    let mut y: Vec<f64> = p.iter().copied().chain([0.0]).collect();
    let h = t_end / steps as f64;
    let mut times = vec![0.0];
    let mut energy = vec![g.value(0.0, p)];
    let mut integral = vec![0.0];
    for k in 0..steps {
        rk4_step(&*data.field, k as f64 * h, h, &mut y);
        let t = (k + 1) as f64 * h;
        times.push(t);
        energy.push(g.value(t, &y[..n]));
        integral.push(y[n]);
    }
    let g0 = energy[0];
    let identity_residual =
        energy.iter().zip(&integral).map(|(e, q)| (e - g0 - q).abs()).fold(0.0, f64::max);
    let monotone = energy.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    let periodic_candidate = *integral.last().unwrap() < 1e-10;
    Ok(EnergyProfile { times, energy, eta_sq_integral: integral, identity_residual, monotone, periodic_candidate })
}

struct SquareFn {
    f: Fun,
}
impl GenericFn for SquareFn {
    fn n_in(&self) -> usize {
        self.f.n_in()
    }
    fn n_out(&self) -> usize {
        1
    }
    fn call<S: Scalar>(&self, t: f64, p: &[S], out: &mut [S]) {
        S::eval(&*self.f, t, p, out);
        out[0] = out[0] * out[0];
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FixedPoint {
    pub point: Vec<f64>,
    pub displacement: f64,
    /// `|f(x*)|` when a function was supplied.
    pub f_value: Option<f64>,
}

/// Grid scan for points with `phi(x) = x`, refined by a shrinking compass search
/// on the displacement.
pub fn fixed_point_scan(
    m: &ManifoldChart,
    phi: &SmoothMap,
    f: Option<&ScalarField>,
    grid: &Grid,
) -> Vec<FixedPoint> {
    let n = m.dim();
    let disp = |x: &[f64]| m.distance(&phi.eval(x), x);
    let values: Vec<f64> = grid.points().map(|p| disp(p)).collect();
    let spacing: f64 = grid
        .nodes
        .iter()
        .map(|v| if v.len() > 1 { (v[1] - v[0]).abs() } else { 1.0 })
        .fold(0.0, f64::max);
    let mut found: Vec<FixedPoint> = Vec::new();
    for (i, p) in grid.points().enumerate() {
        let v = values[i];
        if v > 2.0 * spacing {
            continue;
        }
        let idx = grid.multi_index(i);
        let mut local_min = true;
        for k in 0..n {
            for dlt in [-1i64, 1] {
                let j = idx[k] as i64 + dlt;
                if j < 0 || j >= grid.shape[k] as i64 {
                    continue;
                }
                let mut q = idx.clone();
                q[k] = j as usize;
                if values[grid.flat_index(&q)] < v - 1e-15 {
                    local_min = false;
                }
            }
        }
        if !local_min {
            continue;
        }
        let mut x = p.to_vec();
        let mut best = v;
        let mut step = spacing;
        while best > 1e-13 && step > 1e-13 {
            let mut moved = false;
            for k in 0..n {
                for sg in [-1.0, 1.0] {
                    let mut y = x.clone();
                    y[k] += sg * step;
                    if !m.contains(&y) {
                        continue;
                    }
                    let dy = disp(&y);
                    if dy < best {
                        best = dy;
                        x = y;
                        moved = true;
                    }
                }
            }
            if !moved {
                step *= 0.5;
            }
        }
        if best < 1e-8 {
            let x = m.canonicalize(&x).unwrap_or(x);
            if found.iter().all(|q| m.distance(&q.point, &x) > 1e-6) {
                let f_value = f.map(|f| f.value(0.0, &x).abs());
                found.push(FixedPoint { point: x, displacement: best, f_value });
            }
        }
    }
    found
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::build_manifold;
    use crate::pointfn;

    fn darboux() -> CosymplecticStructure {
        let m = build_manifold(vec![FactorSpec::interval(-1.0, 1.0, "x"), FactorSpec::interval(-1.0, 1.0, "y"), FactorSpec::interval(-1.0, 1.0, "z")], true).unwrap();
        CosymplecticStructure::new(m, Form::dx(3, 2), Form::dxdx(3, 0, 1)).unwrap()
    }

    #[test]
    fn lattice_segments_cover_interval() {
        let mut v = Vec::new();
        lattice_segments(0.0, 0.3, 10, &mut v);
        assert_eq!(v.len(), 3);
        lattice_segments(0.0, 0.35, 10, &mut v);
        assert_eq!(v.len(), 4);
        assert!((v[3].1 - 0.05).abs() < 1e-12);
        lattice_segments(0.35, 0.0, 10, &mut v);
        assert!((v[0].1 + 0.05).abs() < 1e-12);
        let total: f64 = v.iter().map(|s| s.1).sum();
        assert!((total + 0.35).abs() < 1e-14);
    }

    #[test]
    fn z_scaling_flow_and_log_factor() {
        let s = darboux();
        let grid = s.chart.grid(8, 5);
        let mu = Form::constant(3, 0, vec![1.0]);
        let iso = almost_co_hamiltonian_isotopy(&s, &Form::zero(3, 0), &mu, 200, &grid, 1e-8).unwrap();
        let p = [0.3, -0.2, 0.5];
        let y = iso.eval(1.0, &p);
        assert!((y[2] - 0.5 * 1f64.exp()).abs() < 1e-9);
        let f = iso.records.log_factor.as_ref().unwrap();
        assert!((f.value(0.7, &p) - 0.7).abs() < 1e-12);
        let back = iso.map.inv.as_ref().unwrap();
        let z = crate::ad::eval_vec(&**back, 1.0, &y);
        assert!((z[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn out_of_chart_is_reported() {
        let s = darboux();
        let x = VectorField::constant(&[0.0, 0.0, 3.0]);
        let iso = integrate_flow(&s.chart, &x, 32, "push").unwrap();
        match iso.trajectory(&[0.0, 0.0, 0.0]) {
            Err(GeomError::OutOfChart { time, .. }) => assert!(time > 0.3 && time < 0.4),
            other => panic!("expected chart exit, got {other:?}"),
        }
    }

    #[test]
    fn gauss_legendre_primitive() {
        let s = darboux();
        let grid = s.chart.grid(4, 5);
        assert_eq!(reeb_coordinate(&s, &grid), Some(2));
        let mu = pointfn!(3 => 1, |_t, p| [p[2] * p[2]]);
        let g = Form::of(3, 0, share(ReebPrimitiveFn { mu, r: 2, nodes: gauss_legendre(8).0, weights: gauss_legendre(8).1 }));
        assert!((g.value(0.0, &[0.1, 0.2, 0.9]) - 0.243).abs() < 1e-14);
    }
}
