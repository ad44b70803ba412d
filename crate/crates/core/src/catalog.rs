//! Standard structures, closed-form isotopies and stability problems, looked
//! up by string id.

use crate::ad::{share, GenericFn, Scalar};
use crate::cosym::CosymplecticStructure;
use crate::error::{invalid, GeomError, Result};
use crate::forms::{Form, OneForm, ScalarField, VectorField};
use crate::isotopy::{Isotopy, PotentialKind, Records, StabilityProblem};
use crate::manifold::{build_manifold, FactorSpec};
use crate::pointfn;
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Numeric example parameters (`a1`, `b1`, `h`, `speed`, ...).
pub type Params = BTreeMap<String, f64>;

fn get(p: &Params, key: &str, default: f64) -> f64 {
    p.get(key).copied().unwrap_or(default)
}

pub const STRUCTURES: [(&str, &str); 5] = [
    ("t2s1", "T^2 x S^1, eta = ds, omega = dtheta1 ^ dtheta2"),
    ("t4s1", "T^4 x S^1, eta = ds, omega = dtheta1 ^ dtheta3 + dtheta2 ^ dtheta4"),
    ("d2s1", "D^2 x S^1 in polar coordinates, eta = ds, omega = r dr ^ dtheta"),
    ("darboux", "box [-1, 1]^3, eta = dz, omega = dx ^ dy"),
    ("twisted", "box [-1, 1]^3, eta = dz, omega = dx ^ dy + dx ^ dz"),
];

pub const ISOTOPIES: [(&str, &str); 8] = [
    ("identity", "identity isotopy on T^2 x S^1"),
    ("reeb-flow", "s -> s + speed t on T^2 x S^1"),
    ("torus-rotation", "(theta, s) -> (theta + t v, s e^{t h(theta)}) on T^2l x S^1 (l = 1, 2)"),
    ("disk-rotation", "(r, theta, s) -> (r, theta + t rho(r), s e^{t f(r)}) on D^2 x S^1"),
    ("z-scaling", "(x, y, z) -> (x, y, e^{c t} z) on the Darboux box"),
    ("z-translation", "(x, y, z) -> (x, y, z + speed t) on the Darboux box"),
    ("shear", "theta2 -> theta2 + t amp sin(theta1) on T^2 x S^1"),
    ("torus-hamiltonian", "flow of I^-1(d(amp cos theta1 + amp2 sin theta2)) on T^2 x S^1"),
];

pub const FIELDS: [(&str, &str); 6] = [
    ("reeb", "the Reeb field d/ds on T^2 x S^1"),
    ("dtheta1", "d/dtheta1 on T^2 x S^1 (cosymplectic, not co-Hamiltonian)"),
    ("hamiltonian", "I^-1(d(cos theta1 + 0.5 sin theta2)) on T^2 x S^1"),
    ("z-dilation", "z d/dz on the Darboux box (almost cosymplectic, mu = 1)"),
    ("mixed", "d/dx + 2 d/dz on the Darboux box"),
    ("generic", "a fixed trigonometric field on T^2 x S^1"),
];

pub const SCALARS: [(&str, &str); 3] = [
    ("z", "G = z on the Darboux box"),
    ("trig", "G = cos theta1 + 0.5 sin s on T^2 x S^1"),
    ("flat", "G = 0.5 cos theta1 + 0.25 sin theta2 on T^2 x S^1 (xi(G) = 0)"),
];

pub const PROBLEMS: [(&str, &str); 3] = [
    ("moser-omega", "omega_1 = omega + d(eps sin(theta1) dtheta2) on T^2 x S^1"),
    ("moser-eta", "eta_1 = eta + d(amp sin s) on T^2 x S^1"),
    ("moser-full", "both perturbations at once"),
];

fn circle(label: &str) -> FactorSpec {
    FactorSpec::circle(2.0 * PI, label)
}

pub fn t2s1() -> CosymplecticStructure {
    let m = build_manifold(vec![circle("theta1"), circle("theta2"), FactorSpec::centered_circle(2.0 * PI, "s")], true)
        .expect("static chart");
    CosymplecticStructure::new(m, Form::dx(3, 2), Form::dxdx(3, 0, 1)).expect("static forms")
}

pub fn t4s1() -> CosymplecticStructure {
    let m = build_manifold(
        vec![
            circle("theta1"),
            circle("theta2"),
            circle("theta3"),
            circle("theta4"),
            FactorSpec::centered_circle(2.0 * PI, "s"),
        ],
        true,
    )
    .expect("static chart");
    let w = Form::dxdx(5, 0, 2).add(&Form::dxdx(5, 1, 3));
    CosymplecticStructure::new(m, Form::dx(5, 4), w).expect("static forms")
}

/// Inner radius of the disk chart; polar coordinates degenerate at 0.
pub const DISK_R_MIN: f64 = 1e-4;

pub fn d2s1() -> CosymplecticStructure {
    let m = build_manifold(
        vec![FactorSpec::polar_disk(DISK_R_MIN, 1.0, ""), FactorSpec::centered_circle(2.0 * PI, "s")],
        true,
    )
    .expect("static chart");
    let w = Form::of(3, 2, pointfn!(3 => 3, |_t, p| [p[0], S::cst(0.0), S::cst(0.0)]));
    CosymplecticStructure::new(m, Form::dx(3, 2), w).expect("static forms")
}

fn unit_box() -> crate::manifold::ManifoldChart {
    build_manifold(
        vec![FactorSpec::interval(-1.0, 1.0, "x"), FactorSpec::interval(-1.0, 1.0, "y"), FactorSpec::interval(-1.0, 1.0, "z")],
        true,
    )
    .expect("static chart")
}

pub fn darboux() -> CosymplecticStructure {
    CosymplecticStructure::new(unit_box(), Form::dx(3, 2), Form::dxdx(3, 0, 1)).expect("static forms")
}

pub fn twisted() -> CosymplecticStructure {
    let w = Form::dxdx(3, 0, 1).add(&Form::dxdx(3, 0, 2));
    CosymplecticStructure::new(unit_box(), Form::dx(3, 2), w).expect("static forms")
}

pub fn structure(id: &str) -> Result<CosymplecticStructure> {
    Ok(match id {
        "t2s1" => t2s1(),
        "t4s1" => t4s1(),
        "d2s1" => d2s1(),
        "darboux" => darboux(),
        "twisted" => twisted(),
        _ => return Err(unknown("structure", id, STRUCTURES.iter().map(|s| s.0))),
    })
}

fn unknown<'a>(what: &str, id: &str, known: impl Iterator<Item = &'a str>) -> GeomError {
    GeomError::Config(format!("unknown {what} {id:?}; known: {}", known.collect::<Vec<_>>().join(", ")))
}

fn records(
    potential: Option<(PotentialKind, ScalarField)>,
    log_factor: ScalarField,
    log_rate: ScalarField,
    transition: ScalarField,
) -> Records {
    Records { potential, log_factor: Some(log_factor), log_rate: Some(log_rate), transition: Some(transition) }
}

/// `s -> s + speed t` on T^2 x S^1.
pub fn reeb_flow(speed: f64) -> (CosymplecticStructure, Isotopy) {
    let s = t2s1();
    let fwd = pointfn!(3 => 3, |t, p| [p[0], p[1], p[2] + speed * t]);
    let inv = pointfn!(3 => 3, |t, p| [p[0], p[1], p[2] - speed * t]);
    let iso = Isotopy::closed_form(&s.chart, fwd, Some(inv), VectorField::constant(&[0.0, 0.0, speed]), "reeb-flow")
        .expect("static shapes")
        .with_records(records(
            Some((PotentialKind::AlmostCoHamiltonian, Form::zero(3, 0))),
            Form::zero(3, 0),
            Form::zero(3, 0),
            Form::constant(3, 0, vec![speed]),
        ));
    (s, iso)
}

#[derive(Clone, Copy)]
enum Part {
    Fwd,
    Inv,
    Gen,
    Log,
    Rate,
    Trans,
}

/// Rotation by `t v` on `T^2l` and scaling of `s` by `e^{t h}`, `h = h0 + h1 cos(theta1)`.
struct TorusRotFn {
    l: usize,
    v: Vec<f64>,
    h0: f64,
    h1: f64,
    part: Part,
}

impl TorusRotFn {
    fn h<S: Scalar>(&self, th1: S) -> S {
        th1.cos() * self.h1 + self.h0
    }
}

impl GenericFn for TorusRotFn {
    fn n_in(&self) -> usize {
        2 * self.l + 1
    }
    fn n_out(&self) -> usize {
        match self.part {
            Part::Fwd | Part::Inv | Part::Gen => 2 * self.l + 1,
            _ => 1,
        }
    }
    fn call<S: Scalar>(&self, t: f64, p: &[S], out: &mut [S]) {
        let k = 2 * self.l;
        match self.part {
            Part::Fwd => {
                for i in 0..k {
                    out[i] = p[i] + self.v[i] * t;
                }
                out[k] = p[k] * (self.h(p[0]) * t).exp();
            }
            Part::Inv => {
                for i in 0..k {
                    out[i] = p[i] - self.v[i] * t;
                }
                out[k] = p[k] * (-(self.h(out[0]) * t)).exp();
            }
            Part::Gen => {
                for i in 0..k {
                    out[i] = S::cst(self.v[i]);
                }
                out[k] = p[k] * self.h(p[0] - self.v[0] * t);
            }
            Part::Log => out[0] = self.h(p[0]) * t,
            Part::Rate => out[0] = self.h(p[0]),
            Part::Trans => {
                let h = self.h(p[0]);
                out[0] = h * p[k] * (h * t).exp();
            }
        }
    }
}

/// `(theta, s) -> (theta + t v, s e^{t h(theta)})` with `v = (a_1..a_l, b_1..b_l)`.
pub fn torus_rotation(a: &[f64], b: &[f64], h0: f64, h1: f64) -> Result<(CosymplecticStructure, Isotopy)> {
    let l = a.len();
    if b.len() != l || !(l == 1 || l == 2) {
        return Err(invalid("torus rotation needs a and b of equal length 1 or 2"));
    }
    let s = if l == 1 { t2s1() } else { t4s1() };
    let n = 2 * l + 1;
    let v: Vec<f64> = a.iter().chain(b).copied().collect();
    let f = |part| share(TorusRotFn { l, v: v.clone(), h0, h1, part });
    let iso = Isotopy::closed_form(&s.chart, f(Part::Fwd), Some(f(Part::Inv)), VectorField::of(n, f(Part::Gen)), "torus-rotation")?
        .with_records(records(None, Form::of(n, 0, f(Part::Log)), Form::of(n, 0, f(Part::Rate)), Form::of(n, 0, f(Part::Trans))));
    Ok((s, iso))
}

/// `(r, theta, s) -> (r, theta + t rho(r), s e^{t f(r)})`, `rho = a + b r`, `f = c + k r^2`.
pub fn disk_rotation(a: f64, b: f64, c: f64, k: f64) -> (CosymplecticStructure, Isotopy) {
    let s = d2s1();
    let fwd = pointfn!(3 => 3, |t, p| {
        let (r, f) = (p[0], p[0] * p[0] * k + c);
        [r, p[1] + (r * b + a) * t, p[2] * (f * t).exp()]
    });
    let inv = pointfn!(3 => 3, |t, p| {
        let (r, f) = (p[0], p[0] * p[0] * k + c);
        [r, p[1] - (r * b + a) * t, p[2] * (-(f * t)).exp()]
    });
    let gen = pointfn!(3 => 3, |_t, p| [S::cst(0.0), p[0] * b + a, p[2] * (p[0] * p[0] * k + c)]);
    let pot = pointfn!(3 => 1, |_t, p| [-(p[0] * p[0] * (p[0] * (b / 3.0) + a / 2.0))]);
    let log = pointfn!(3 => 1, |t, p| [(p[0] * p[0] * k + c) * t]);
    let rate = pointfn!(3 => 1, |_t, p| [p[0] * p[0] * k + c]);
    let trans = pointfn!(3 => 1, |t, p| {
        let f = p[0] * p[0] * k + c;
        [f * p[2] * (f * t).exp()]
    });
    let iso = Isotopy::closed_form(&s.chart, fwd, Some(inv), VectorField::of(3, gen), "disk-rotation")
        .expect("static shapes")
        .with_records(records(
            Some((PotentialKind::AlmostCoHamiltonian, Form::of(3, 0, pot))),
            Form::of(3, 0, log),
            Form::of(3, 0, rate),
            Form::of(3, 0, trans),
        ));
    (s, iso)
}

/// `(x, y, z) -> (x, y, e^{c t} z)` on the Darboux box.
pub fn z_scaling(c: f64) -> (CosymplecticStructure, Isotopy) {
    let s = darboux();
    let fwd = pointfn!(3 => 3, |t, p| [p[0], p[1], p[2] * (c * t).exp()]);
    let inv = pointfn!(3 => 3, |t, p| [p[0], p[1], p[2] * (-c * t).exp()]);
    let gen = pointfn!(3 => 3, |_t, p| [S::cst(0.0), S::cst(0.0), p[2] * c]);
    let trans = pointfn!(3 => 1, |t, p| [p[2] * (c * (c * t).exp())]);
    let iso = Isotopy::closed_form(&s.chart, fwd, Some(inv), VectorField::of(3, gen), "z-scaling")
        .expect("static shapes")
        .with_records(records(
            Some((PotentialKind::AlmostCoHamiltonian, Form::zero(3, 0))),
            Form::of(3, 0, pointfn!(3 => 1, |t, _p| [S::cst(c * t)])),
            Form::constant(3, 0, vec![c]),
            Form::of(3, 0, trans),
        ));
    (s, iso)
}

/// `z -> z + speed t` on the Darboux box, co-Hamiltonian with `F = speed z`.
pub fn z_translation(speed: f64) -> (CosymplecticStructure, Isotopy) {
    let s = darboux();
    let fwd = pointfn!(3 => 3, |t, p| [p[0], p[1], p[2] + speed * t]);
    let inv = pointfn!(3 => 3, |t, p| [p[0], p[1], p[2] - speed * t]);
    let iso = Isotopy::closed_form(&s.chart, fwd, Some(inv), VectorField::constant(&[0.0, 0.0, speed]), "z-translation")
        .expect("static shapes")
        .with_records(records(
            Some((PotentialKind::CoHamiltonian, Form::of(3, 0, pointfn!(3 => 1, |_t, p| [p[2] * speed])))),
            Form::zero(3, 0),
            Form::zero(3, 0),
            Form::constant(3, 0, vec![speed]),
        ));
    (s, iso)
}

/// `theta2 -> theta2 + t amp sin(theta1)`: co-Hamiltonian with `F = amp cos(theta1)`.
pub fn shear(amp: f64) -> (CosymplecticStructure, Isotopy) {
    let s = t2s1();
    let fwd = pointfn!(3 => 3, |t, p| [p[0], p[1] + p[0].sin() * (amp * t), p[2]]);
    let inv = pointfn!(3 => 3, |t, p| [p[0], p[1] - p[0].sin() * (amp * t), p[2]]);
    let gen = pointfn!(3 => 3, |_t, p| [S::cst(0.0), p[0].sin() * amp, S::cst(0.0)]);
    let pot = pointfn!(3 => 1, |_t, p| [p[0].cos() * amp]);
    let iso = Isotopy::closed_form(&s.chart, fwd, Some(inv), VectorField::of(3, gen), "shear")
        .expect("static shapes")
        .with_records(records(
            Some((PotentialKind::CoHamiltonian, Form::of(3, 0, pot))),
            Form::zero(3, 0),
            Form::zero(3, 0),
            Form::zero(3, 0),
        ));
    (s, iso)
}

/// `theta1 += t amp cos(theta2)`, the transverse companion of [`shear`].
pub fn cross_shear(amp: f64) -> (CosymplecticStructure, Isotopy) {
    let s = t2s1();
    let fwd = pointfn!(3 => 3, |t, p| [p[0] + p[1].cos() * (amp * t), p[1], p[2]]);
    let inv = pointfn!(3 => 3, |t, p| [p[0] - p[1].cos() * (amp * t), p[1], p[2]]);
    let gen = pointfn!(3 => 3, |_t, p| [p[1].cos() * amp, S::cst(0.0), S::cst(0.0)]);
    let iso = Isotopy::closed_form(&s.chart, fwd, Some(inv), VectorField::of(3, gen), "cross-shear")
        .expect("static shapes");
    (s, iso)
}

/// `H = amp cos(theta1) + amp2 sin(theta2)` on T^2 x S^1, with `xi(H) = 0`.
pub fn torus_hamiltonian(amp: f64, amp2: f64) -> ScalarField {
    Form::of(3, 0, pointfn!(3 => 1, |_t, p| [p[0].cos() * amp + p[1].sin() * amp2]))
}

/// Catalog isotopy by id. Flow-based entries use `steps` RK4 steps.
pub fn isotopy(id: &str, p: &Params, steps: usize) -> Result<(CosymplecticStructure, Isotopy)> {
    Ok(match id {
        "identity" => {
            let s = t2s1();
            let iso = Isotopy::identity(&s.chart);
            (s, iso)
        }
        "reeb-flow" => reeb_flow(get(p, "speed", 1.0)),
        "torus-rotation" => {
            let l = get(p, "l", 1.0) as usize;
            let a: Vec<f64> = (1..=l).map(|i| get(p, &format!("a{i}"), if i == 1 { 1.0 } else { 0.0 })).collect();
            let b: Vec<f64> = (1..=l).map(|i| get(p, &format!("b{i}"), if i == 1 { 2.0 } else { 0.0 })).collect();
            torus_rotation(&a, &b, get(p, "h", 1.0), get(p, "h1", 0.0))?
        }
        "disk-rotation" => disk_rotation(get(p, "rho0", 1.0), get(p, "rho1", 0.0), get(p, "f", 1.0), get(p, "f2", 0.0)),
        "z-scaling" => z_scaling(get(p, "c", 1.0)),
        "z-translation" => z_translation(get(p, "speed", 1.0)),
        "shear" => shear(get(p, "amp", 0.5)),
        "torus-hamiltonian" => {
            let s = t2s1();
            let h = torus_hamiltonian(get(p, "amp", 0.5), get(p, "amp2", 0.25));
            let grid = s.chart.grid(8, 9);
            let iso = crate::isotopy::co_hamiltonian_isotopy(&s, &h, steps, false, &grid)?;
            (s, iso)
        }
        _ => return Err(unknown("isotopy", id, ISOTOPIES.iter().map(|s| s.0))),
    })
}

pub fn field(id: &str) -> Result<(CosymplecticStructure, VectorField)> {
    Ok(match id {
        "reeb" => (t2s1(), VectorField::coordinate(3, 2)),
        "dtheta1" => (t2s1(), VectorField::coordinate(3, 0)),
        "hamiltonian" => {
            let s = t2s1();
            let h = Form::of(3, 0, pointfn!(3 => 1, |_t, p| [p[0].cos() + p[1].sin() * 0.5]));
            let x = crate::cosym::invert_i(&s, &crate::forms::d(&h));
            (s, x)
        }
        "z-dilation" => (darboux(), VectorField::of(3, pointfn!(3 => 3, |_t, p| [S::cst(0.0), S::cst(0.0), p[2]]))),
        "mixed" => (darboux(), VectorField::constant(&[1.0, 0.0, 2.0])),
        "generic" => {
            let c: Vec<f64> = (0..3 * TRIG_TERMS).map(|k| ((k * 7 % 11) as f64 - 5.0) / 10.0).collect();
            (t2s1(), trig_field(&c))
        }
        _ => return Err(unknown("field", id, FIELDS.iter().map(|s| s.0))),
    })
}

pub fn scalar(id: &str) -> Result<(CosymplecticStructure, ScalarField)> {
    Ok(match id {
        "z" => (darboux(), Form::of(3, 0, pointfn!(3 => 1, |_t, p| [p[2]]))),
        "trig" => (t2s1(), Form::of(3, 0, pointfn!(3 => 1, |_t, p| [p[0].cos() + p[2].sin() * 0.5]))),
        "flat" => (t2s1(), torus_hamiltonian(0.5, 0.25)),
        _ => return Err(unknown("scalar field", id, SCALARS.iter().map(|s| s.0))),
    })
}

/// Number of trigonometric modes per component in [`trig_field`] and friends:
/// `1, sin/cos theta1, sin/cos theta2, sin/cos s, sin(theta1 - s), cos(theta2 + s)`.
pub const TRIG_TERMS: usize = 9;

struct TrigFn {
    c: Vec<f64>,
    n_out: usize,
}

impl GenericFn for TrigFn {
    fn n_in(&self) -> usize {
        3
    }
    fn n_out(&self) -> usize {
        self.n_out
    }
    fn call<S: Scalar>(&self, _t: f64, p: &[S], out: &mut [S]) {
        let modes = [
            S::one(),
            p[0].sin(),
            p[0].cos(),
            p[1].sin(),
            p[1].cos(),
            p[2].sin(),
            p[2].cos(),
            (p[0] - p[2]).sin(),
            (p[1] + p[2]).cos(),
        ];
        for (k, o) in out.iter_mut().enumerate() {
            let mut acc = S::zero();
            for (j, m) in modes.iter().enumerate() {
                acc += *m * self.c[k * TRIG_TERMS + j];
            }
            *o = acc;
        }
    }
}

fn trig(c: &[f64], n_out: usize) -> crate::ad::Fun {
    assert_eq!(c.len(), n_out * TRIG_TERMS, "trigonometric sample needs {} coefficients", n_out * TRIG_TERMS);
    share(TrigFn { c: c.to_vec(), n_out })
}

/// Trigonometric vector field on T^2 x S^1 from `3 * TRIG_TERMS` coefficients.
pub fn trig_field(c: &[f64]) -> VectorField {
    VectorField::of(3, trig(c, 3))
}

pub fn trig_scalar(c: &[f64]) -> ScalarField {
    Form::of(3, 0, trig(c, 1))
}

pub fn trig_one_form(c: &[f64]) -> OneForm {
    Form::of(3, 1, trig(c, 3))
}

/// `eps sin(theta1) dtheta2`, the primitive of the omega perturbation.
pub fn omega_primitive(eps: f64) -> OneForm {
    Form::of(3, 1, pointfn!(3 => 3, |_t, p| [S::cst(0.0), p[0].sin() * eps, S::cst(0.0)]))
}

/// `amp sin(s)`, the primitive of the eta perturbation.
pub fn eta_primitive(amp: f64) -> ScalarField {
    Form::of(3, 0, pointfn!(3 => 1, |_t, p| [p[2].sin() * amp]))
}

pub fn problem(id: &str, p: &Params) -> Result<StabilityProblem> {
    let s = t2s1();
    let eps = get(p, "eps", 0.5);
    let amp = get(p, "amp", 0.1);
    Ok(match id {
        "moser-omega" => StabilityProblem::omega(&s, &omega_primitive(eps)),
        "moser-eta" => StabilityProblem::eta(&s, &eta_primitive(amp)),
        "moser-full" => StabilityProblem::full(&s, &omega_primitive(eps), &eta_primitive(amp)),
        _ => return Err(unknown("problem", id, PROBLEMS.iter().map(|s| s.0))),
    })
}
