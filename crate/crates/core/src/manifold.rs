//! Product charts built from circles, intervals and polar disks, with
//! tensor-product sampling grids and the flat product metric.

use crate::ad::{Fun, MAXD};
use crate::error::{invalid, GeomError, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FactorKind {
    /// Circle of the given period. A centered circle uses `[-period/2, period/2)`
    /// and samples with a half-cell offset, so its seam and its origin fall on
    /// cell boundaries; otherwise the domain is `[0, period)`.
    Circle {
        period: f64,
        #[serde(default)]
        centered: bool,
    },
    Box {
        lo: f64,
        hi: f64,
    },
    /// Polar coordinates `(r, theta)` on an annulus `r_min <= r <= r_max`.
    PolarDisk {
        r_min: f64,
        r_max: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorSpec {
    #[serde(flatten)]
    pub kind: FactorKind,
    #[serde(default)]
    pub label: String,
}

impl FactorSpec {
    pub fn circle(period: f64, label: &str) -> Self {
        FactorSpec { kind: FactorKind::Circle { period, centered: false }, label: label.into() }
    }
    /// The `S^1` factor `s in [-pi, pi)`.
    pub fn centered_circle(period: f64, label: &str) -> Self {
        FactorSpec { kind: FactorKind::Circle { period, centered: true }, label: label.into() }
    }
    pub fn interval(lo: f64, hi: f64, label: &str) -> Self {
        FactorSpec { kind: FactorKind::Box { lo, hi }, label: label.into() }
    }
    pub fn polar_disk(r_min: f64, r_max: f64, label: &str) -> Self {
        FactorSpec { kind: FactorKind::PolarDisk { r_min, r_max }, label: label.into() }
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            FactorKind::PolarDisk { .. } => 2,
            _ => 1,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = |c: bool, m: &str| if c { Ok(()) } else { Err(invalid(format!("factor {}: {m}", self.label))) };
        match self.kind {
            FactorKind::Circle { period, .. } => ok(period.is_finite() && period > 0.0, "period must be positive"),
            FactorKind::Box { lo, hi } => ok(lo.is_finite() && hi.is_finite() && lo < hi, "need lo < hi"),
            FactorKind::PolarDisk { r_min, r_max } => {
                ok(r_min > 0.0 && r_min < r_max && r_max <= 1.0, "need 0 < r_min < r_max <= 1")
            }
        }
    }
}

/// What a single chart coordinate is.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Coord {
    Periodic { start: f64, period: f64, offset: bool },
    Bounded { lo: f64, hi: f64 },
    Radius { lo: f64, hi: f64 },
    /// Angular coordinate of a polar disk (the loop it spans is contractible).
    Angle,
}

impl Coord {
    pub fn is_periodic(&self) -> bool {
        matches!(self, Coord::Periodic { .. } | Coord::Angle)
    }
    pub fn period(&self) -> Option<(f64, f64)> {
        match *self {
            Coord::Periodic { start, period, .. } => Some((start, period)),
            Coord::Angle => Some((0.0, 2.0 * PI)),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifoldChart {
    pub factors: Vec<FactorSpec>,
    #[serde(skip)]
    coords: Vec<Coord>,
    #[serde(skip)]
    labels: Vec<String>,
}

/// Slack allowed on bounded coordinates before a point counts as outside.
pub const CHART_TOL: f64 = 1e-9;

pub fn build_manifold(spec: Vec<FactorSpec>, cosymplectic: bool) -> Result<ManifoldChart> {
    if spec.is_empty() {
        return Err(invalid("empty factor list"));
    }
    for f in &spec {
        f.validate()?;
    }
    let mut coords = Vec::new();
    let mut labels = Vec::new();
    for (k, f) in spec.iter().enumerate() {
        let name = |suffix: &str| {
            if f.label.is_empty() {
                format!("x{k}{suffix}")
            } else {
                format!("{}{suffix}", f.label)
            }
        };
        match f.kind {
            FactorKind::Circle { period, centered } => {
                let start = if centered { -period / 2.0 } else { 0.0 };
                coords.push(Coord::Periodic { start, period, offset: centered });
                labels.push(name(""));
            }
            FactorKind::Box { lo, hi } => {
                coords.push(Coord::Bounded { lo, hi });
                labels.push(name(""));
            }
            FactorKind::PolarDisk { r_min, r_max } => {
                coords.push(Coord::Radius { lo: r_min, hi: r_max });
                coords.push(Coord::Angle);
                labels.push(name("_r"));
                labels.push(name("_theta"));
            }
        }
    }
    if coords.len() > MAXD {
        return Err(invalid(format!("dimension {} exceeds the supported maximum {MAXD}", coords.len())));
    }
    if cosymplectic && (coords.len() < 3 || coords.len() % 2 == 0) {
        return Err(invalid(format!("cosymplectic charts need odd dimension >= 3, got {}", coords.len())));
    }
    Ok(ManifoldChart { factors: spec, coords, labels })
}

impl ManifoldChart {
    /// Rebuild derived data after deserialization.
    pub fn rebuild(self, cosymplectic: bool) -> Result<Self> {
        build_manifold(self.factors, cosymplectic)
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
    pub fn coords(&self) -> &[Coord] {
        &self.coords
    }
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Product with one more factor appended (used for symplectization lifts).
    pub fn times(&self, f: FactorSpec) -> Result<ManifoldChart> {
        let mut v = self.factors.clone();
        v.push(f);
        build_manifold(v, false)
    }

    /// Indices of coordinates whose loops generate first homology.
    pub fn homology_coords(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&i| matches!(self.coords[i], Coord::Periodic { .. })).collect()
    }

    pub fn canonicalize(&self, p: &[f64]) -> Result<Vec<f64>> {
        if p.len() != self.dim() {
            return Err(invalid(format!("point has {} coordinates, chart has {}", p.len(), self.dim())));
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(invalid(format!("non-finite coordinate in {p:?}")));
        }
        let mut q = p.to_vec();
        for (i, c) in self.coords.iter().enumerate() {
            match *c {
                Coord::Periodic { start, period, .. } => q[i] = wrap(q[i], start, period),
                Coord::Angle => q[i] = wrap(q[i], 0.0, 2.0 * PI),
                Coord::Bounded { lo, hi } | Coord::Radius { lo, hi } => {
                    if q[i] < lo - CHART_TOL || q[i] > hi + CHART_TOL {
                        return Err(GeomError::OutOfChart { point: p.to_vec(), time: 0.0 });
                    }
                }
            }
        }
        Ok(q)
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.coords.iter().zip(p).all(|(c, &x)| match *c {
            Coord::Bounded { lo, hi } | Coord::Radius { lo, hi } => x >= lo - CHART_TOL && x <= hi + CHART_TOL,
            _ => x.is_finite(),
        })
    }

    /// Diagonal of the flat product metric in chart coordinates.
    pub fn metric_diag(&self, p: &[f64]) -> Vec<f64> {
        let mut g = vec![1.0; self.dim()];
        for i in 0..self.dim() {
            if self.coords[i] == Coord::Angle {
                g[i] = p[i - 1] * p[i - 1];
            }
        }
        g
    }

    /// Riemannian volume density `sqrt(det g)`.
    pub fn volume_density(&self, p: &[f64]) -> f64 {
        self.metric_diag(p).iter().product::<f64>().sqrt()
    }

    /// Geodesic distance of the flat product metric.
    pub fn distance(&self, p: &[f64], q: &[f64]) -> f64 {
        let mut s = 0.0;
        let mut i = 0;
        while i < self.dim() {
            match self.coords[i] {
                Coord::Periodic { period, .. } => {
                    let d = circle_gap(p[i] - q[i], period);
                    s += d * d;
                }
                Coord::Bounded { .. } => {
                    let d = p[i] - q[i];
                    s += d * d;
                }
                Coord::Radius { .. } => {
                    let (r1, t1, r2, t2) = (p[i], p[i + 1], q[i], q[i + 1]);
                    let dx = r1 * t1.cos() - r2 * t2.cos();
                    let dy = r1 * t1.sin() - r2 * t2.sin();
                    s += dx * dx + dy * dy;
                    i += 1;
                }
                Coord::Angle => {}
            }
            i += 1;
        }
        s.sqrt()
    }

    pub fn sample_grid(&self, g: &GridSpec) -> Result<Grid> {
        Grid::new(self, g)
    }

    /// Default resolution: 32 per periodic coordinate, 33 per bounded one, in
    /// dimension up to 3; 12 and 13 above that to keep tensor grids tractable.
    pub fn default_grid(&self) -> GridSpec {
        if self.dim() <= 3 {
            GridSpec::uniform(self, 32, 33)
        } else {
            GridSpec::uniform(self, 12, 13)
        }
    }

    pub fn grid(&self, periodic: usize, bounded: usize) -> Grid {
        Grid::new(self, &GridSpec::uniform(self, periodic, bounded)).expect("uniform grid is valid")
    }
}

pub fn wrap(x: f64, start: f64, period: f64) -> f64 {
    let y = x - ((x - start) / period).floor() * period;
    if y >= start + period {
        start
    } else {
        y
    }
}

fn circle_gap(d: f64, period: f64) -> f64 {
    let r = d.rem_euclid(period);
    r.min(period - r)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub resolution: Vec<usize>,
}

impl GridSpec {
    pub fn new(resolution: Vec<usize>) -> Self {
        GridSpec { resolution }
    }
    pub fn uniform(m: &ManifoldChart, periodic: usize, bounded: usize) -> Self {
        GridSpec {
            resolution: m.coords().iter().map(|c| if c.is_periodic() { periodic } else { bounded }).collect(),
        }
    }
    pub fn total(&self) -> usize {
        self.resolution.iter().product()
    }
}

/// Tensor-product grid with quadrature weights for `dx_1 ... dx_d`.
#[derive(Clone, Debug)]
pub struct Grid {
    pub dim: usize,
    pub shape: Vec<usize>,
    pub nodes: Vec<Vec<f64>>,
    pub node_weights: Vec<Vec<f64>>,
    points: Vec<f64>,
    weights: Vec<f64>,
}

fn nodes_1d(c: &Coord, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    match *c {
        Coord::Periodic { start, period, offset } => {
            if n < 4 {
                return Err(invalid("periodic resolution must be at least 4"));
            }
            let h = period / n as f64;
            let off = if offset { 0.5 } else { 0.0 };
            Ok(((0..n).map(|k| start + (k as f64 + off) * h).collect(), vec![h; n]))
        }
        Coord::Angle => nodes_1d(&Coord::Periodic { start: 0.0, period: 2.0 * PI, offset: false }, n),
        Coord::Bounded { lo, hi } | Coord::Radius { lo, hi } => {
            if n < 2 {
                return Err(invalid("bounded resolution must be at least 2"));
            }
            let h = (hi - lo) / (n - 1) as f64;
            let x = (0..n).map(|k| if k == n - 1 { hi } else { lo + k as f64 * h }).collect();
            Ok((x, simpson_weights(n, h)))
        }
    }
}

/// Composite Simpson weights on `n` equispaced nodes; an even node count
/// closes with a three-eighths panel, and two nodes fall back to trapezoid.
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; n];
    if n == 2 {
        return vec![h / 2.0; 2];
    }
    if n == 3 || n % 2 == 1 {
        let mut k = 0;
        while k + 2 < n {
            w[k] += h / 3.0;
            w[k + 1] += 4.0 * h / 3.0;
            w[k + 2] += h / 3.0;
            k += 2;
        }
        return w;
    }
    let m = n - 3;
    let mut k = 0;
    while k + 2 < m {
        w[k] += h / 3.0;
        w[k + 1] += 4.0 * h / 3.0;
        w[k + 2] += h / 3.0;
        k += 2;
    }
    let s = m - 1;
    let c = 3.0 * h / 8.0;
    w[s] += c;
    w[s + 1] += 3.0 * c;
    w[s + 2] += 3.0 * c;
    w[s + 3] += c;
    w
}

impl Grid {
    pub fn new(m: &ManifoldChart, g: &GridSpec) -> Result<Grid> {
        if g.resolution.len() != m.dim() {
            return Err(invalid(format!(
                "grid has {} resolutions, chart has {} coordinates",
                g.resolution.len(),
                m.dim()
            )));
        }
        let mut nodes = Vec::new();
        let mut node_weights = Vec::new();
        for (c, &n) in m.coords().iter().zip(&g.resolution) {
            let (x, w) = nodes_1d(c, n)?;
            nodes.push(x);
            node_weights.push(w);
        }
        let dim = m.dim();
        let total = g.total();
        let mut points = Vec::with_capacity(total * dim);
        let mut weights = Vec::with_capacity(total);
        let mut idx = vec![0usize; dim];
        for _ in 0..total {
            let mut w = 1.0;
            for d in 0..dim {
                points.push(nodes[d][idx[d]]);
                w *= node_weights[d][idx[d]];
            }
            weights.push(w);
            for d in (0..dim).rev() {
                idx[d] += 1;
                if idx[d] < g.resolution[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        Ok(Grid { dim, shape: g.resolution.clone(), nodes, node_weights, points, weights })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }
    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }
    /// Coordinate-measure quadrature weight of point `i`.
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }
    pub fn multi_index(&self, mut i: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim];
        for d in (0..self.dim).rev() {
            idx[d] = i % self.shape[d];
            i /= self.shape[d];
        }
        idx
    }
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.shape).fold(0, |acc, (&k, &n)| acc * n + k)
    }

    /// Quadrature of a scalar density given pointwise.
    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.points().zip(&self.weights).map(|(p, w)| w * f(p)).sum()
    }

    pub fn first_point(&self) -> &[f64] {
        self.point(0)
    }

    pub fn to_csv(&self, m: &ManifoldChart) -> String {
        let mut s = m.labels().join(",");
        s.push_str(",weight\n");
        for (p, w) in self.points().zip(&self.weights) {
            for x in p {
                let _ = write!(s, "{x},");
            }
            let _ = writeln!(s, "{w}");
        }
        s
    }

    pub fn write_csv(&self, m: &ManifoldChart, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv(m))?;
        Ok(())
    }
}

/// `max_x d(F(x), G(x))` over the grid.
pub fn c0_distance(m: &ManifoldChart, f: &Fun, g: &Fun, grid: &Grid) -> f64 {
    let n = m.dim();
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut worst: f64 = 0.0;
    for p in grid.points() {
        f.eval_f64(0.0, p, &mut a);
        g.eval_f64(0.0, p, &mut b);
        worst = worst.max(m.distance(&a, &b));
    }
    worst
}

/// Symmetrized `max(d(f, h), d(f^-1, h^-1))`.
pub fn c0_distance_sym(
    m: &ManifoldChart,
    f: &Fun,
    f_inv: Option<&Fun>,
    g: &Fun,
    g_inv: Option<&Fun>,
    grid: &Grid,
) -> Result<f64> {
    match (f_inv, g_inv) {
        (Some(fi), Some(gi)) => Ok(c0_distance(m, f, g, grid).max(c0_distance(m, fi, gi, grid))),
        _ => Err(crate::error::precondition("symmetrized C0 distance needs both inverses")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t3() -> ManifoldChart {
        build_manifold(vec![FactorSpec::circle(2.0 * PI, "a"); 3], true).unwrap()
    }

    #[test]
    fn builds_standard_charts() {
        assert_eq!(t3().dim(), 3);
        let disk = build_manifold(
            vec![FactorSpec::polar_disk(1e-3, 1.0, "d"), FactorSpec::centered_circle(2.0 * PI, "s")],
            true,
        )
        .unwrap();
        assert_eq!(disk.dim(), 3);
        assert!(build_manifold(vec![FactorSpec::circle(1.0, "a"); 2], true).is_err());
        assert!(build_manifold(vec![FactorSpec::interval(1.0, -1.0, "x")], false).is_err());
    }

    #[test]
    fn canonicalize_examples() {
        let m = t3();
        let q = m.canonicalize(&[7.0 * PI, 0.5, 0.0]).unwrap();
        assert!((q[0] - PI).abs() < 1e-12);
        assert_eq!(q[1], 0.5);
        let disk =
            build_manifold(vec![FactorSpec::polar_disk(1e-3, 1.0, "d"), FactorSpec::circle(2.0 * PI, "s")], true)
                .unwrap();
        assert!(matches!(disk.canonicalize(&[0.0005, 0.0, 0.0]), Err(GeomError::OutOfChart { .. })));
    }

    #[test]
    fn grid_counts_and_nodes() {
        let t2 = build_manifold(vec![FactorSpec::circle(2.0 * PI, "a"); 2], false).unwrap();
        assert_eq!(t2.grid(4, 4).len(), 16);
        let b = build_manifold(vec![FactorSpec::interval(-1.0, 1.0, "x")], false).unwrap();
        let g = b.grid(4, 5);
        assert_eq!(g.nodes[0], vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn simpson_weights_integrate_cubics() {
        for n in [3, 4, 5, 6, 9, 10] {
            let h = 2.0 / (n - 1) as f64;
            let w = simpson_weights(n, h);
            let s: f64 = (0..n).map(|k| w[k] * (-1.0 + k as f64 * h).powi(3) + w[k] * 1.0).sum();
            assert!((s - 2.0).abs() < 1e-13, "n = {n}: {s}");
            let s2: f64 = (0..n).map(|k| w[k] * (-1.0 + k as f64 * h).powi(2)).sum();
            assert!((s2 - 2.0 / 3.0).abs() < 1e-13, "n = {n}: {s2}");
        }
    }

    #[test]
    fn distances() {
        let m = t3();
        assert!((m.distance(&[0.0, 0.0, 0.0], &[0.1, 0.0, 0.0]) - 0.1).abs() < 1e-15);
        assert!((m.distance(&[0.0, 0.0, 0.0], &[PI, 0.0, 0.0]) - PI).abs() < 1e-15);
        assert!((m.distance(&[0.05, 0.0, 0.0], &[2.0 * PI - 0.05, 0.0, 0.0]) - 0.1).abs() < 1e-12);
    }
}
