//! Command-line front end for the `cosym` binary: settings and configuration,
//! JSON run reports, one runner per subcommand, reproductions and the suite.

pub mod suite;

pub use suite::{run_suite, suite_entries, SuiteEntry, SuiteReport};

use crate::catalog::{self, Params};
use crate::cosym::{
    classify_field, classify_map, decompose, decomposition_residuals, reeb_field, verify_structure,
    CosymplecticStructure,
};
use crate::error::{invalid, GeomError, Result};
use crate::flux::{decomposed_flux, flux, HomologyBasis};
use crate::isotopy::{
    fixed_point_scan, lift_almost, lift_cosymplectic, lifted_hamiltonian_check, moser_solve, orbit_energy_profile,
    Isotopy, PotentialKind, CHECKPOINTS,
};
use crate::manifold::{Grid, GridSpec, ManifoldChart};
use crate::norms::{length, HarmonicNorm, LengthKind, LengthVersion, NormOptions};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    /// `|computed - expected| <= tolerance`.
    Close,
    /// `computed < expected`.
    Below,
    /// `computed > expected`.
    Above,
    /// A boolean property; `computed` is 1 or 0.
    Holds,
}

/// One comparison of a computed value against a golden value or a bound.
#[derive(Clone, Debug, Serialize)]
pub struct Comparison {
    pub label: String,
    pub kind: CheckKind,
    pub computed: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub deviation: f64,
    /// Where the expected value comes from (`closed-form`, `linear-solve-oracle`, ...).
    pub provenance: String,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Comparison {
    pub fn close(label: &str, computed: f64, expected: f64, tolerance: f64, provenance: &str) -> Self {
        let deviation = (computed - expected).abs();
        Comparison {
            label: label.into(),
            kind: CheckKind::Close,
            computed,
            expected,
            tolerance,
            deviation,
            provenance: provenance.into(),
            pass: deviation <= tolerance,
            note: None,
        }
    }
    pub fn below(label: &str, computed: f64, bound: f64, provenance: &str) -> Self {
        Comparison {
            label: label.into(),
            kind: CheckKind::Below,
            computed,
            expected: bound,
            tolerance: 0.0,
            deviation: (computed - bound).max(0.0),
            provenance: provenance.into(),
            pass: computed < bound,
            note: None,
        }
    }
    pub fn above(label: &str, computed: f64, bound: f64, provenance: &str) -> Self {
        Comparison {
            label: label.into(),
            kind: CheckKind::Above,
            computed,
            expected: bound,
            tolerance: 0.0,
            deviation: (bound - computed).max(0.0),
            provenance: provenance.into(),
            pass: computed > bound,
            note: None,
        }
    }
    pub fn holds(label: &str, ok: bool, provenance: &str) -> Self {
        Comparison {
            label: label.into(),
            kind: CheckKind::Holds,
            computed: if ok { 1.0 } else { 0.0 },
            expected: 1.0,
            tolerance: 0.0,
            deviation: if ok { 0.0 } else { 1.0 },
            provenance: provenance.into(),
            pass: ok,
            note: None,
        }
    }
    pub fn with_note(mut self, note: &str) -> Self {
        self.note = Some(note.into());
        self
    }
    pub fn describe(&self) -> String {
        let verdict = if self.pass { "ok" } else { "FAIL" };
        match self.kind {
            CheckKind::Close => format!(
                "{verdict} {}: {:.12e} vs {:.12e} (dev {:.3e}, tol {:.1e})",
                self.label, self.computed, self.expected, self.deviation, self.tolerance
            ),
            CheckKind::Below => format!("{verdict} {}: {:.3e} < {:.1e}", self.label, self.computed, self.expected),
            CheckKind::Above => format!("{verdict} {}: {:.6e} > {:.3e}", self.label, self.computed, self.expected),
            CheckKind::Holds => format!("{verdict} {}", self.label),
        }
    }
}

/// Resolution and tolerance settings shared by every runner.
#[derive(Clone, Debug, Serialize)]
pub struct Settings {
    /// Points per periodic coordinate (bounded ones get one more); `None` is the chart default.
    pub grid: Option<usize>,
    pub steps: usize,
    /// Override for each runner's own tolerance.
    pub tol: Option<f64>,
    pub paper_normalization: bool,
    /// Time samples for lengths and flux.
    pub nt: Option<usize>,
    pub params: Params,
    #[serde(skip)]
    pub timing: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            grid: None,
            steps: crate::isotopy::DEFAULT_STEPS,
            tol: None,
            paper_normalization: false,
            nt: None,
            params: Params::new(),
            timing: false,
        }
    }
}

impl Settings {
    pub fn grid_spec(&self, m: &ManifoldChart) -> GridSpec {
        match self.grid {
            Some(n) => GridSpec::uniform(m, n, n + 1),
            None => m.default_grid(),
        }
    }
    pub fn grid_for(&self, m: &ManifoldChart) -> Result<Grid> {
        Grid::new(m, &self.grid_spec(m))
    }
    pub fn tol_or(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }
    pub fn nt_or(&self, default: usize) -> usize {
        self.nt.unwrap_or(default)
    }
    /// Layer a configuration file under this settings value (explicit values win).
    pub fn merge_config(&mut self, c: &Config) {
        if self.grid.is_none() {
            self.grid = c.grid;
        }
        if let Some(s) = c.steps {
            if self.steps == crate::isotopy::DEFAULT_STEPS {
                self.steps = s;
            }
        }
        if self.tol.is_none() {
            self.tol = c.tol;
        }
        if self.nt.is_none() {
            self.nt = c.nt;
        }
        self.paper_normalization |= c.paper_normalization.unwrap_or(false);
        for (k, v) in &c.params {
            self.params.entry(k.clone()).or_insert(*v);
        }
    }
}

/// Contents of a `--config` file (TOML key-value pairs, see the README).
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub grid: Option<usize>,
    pub steps: Option<usize>,
    pub tol: Option<f64>,
    pub nt: Option<usize>,
    pub paper_normalization: Option<bool>,
    /// Example parameters, as with `--set key=value`.
    pub params: Params,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        toml::from_str(text).map_err(|e| GeomError::Config(e.to_string()))
    }
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| GeomError::Config(format!("{}: {e}", path.display())))?;
        Config::parse(&text)
    }
}

/// JSON report of a single run. Byte-identical across runs with the same
/// settings unless timing is requested.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub command: String,
    pub example: String,
    pub settings: Settings,
    pub values: BTreeMap<String, Value>,
    pub comparisons: Vec<Comparison>,
    pub warnings: Vec<String>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

impl RunReport {
    pub fn new(command: &str, example: &str, settings: &Settings) -> Self {
        RunReport {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            example: example.into(),
            settings: settings.clone(),
            values: BTreeMap::new(),
            comparisons: Vec::new(),
            warnings: Vec::new(),
            pass: true,
            seconds: None,
        }
    }
    pub fn value(&mut self, key: &str, v: impl Serialize) {
        let v = serde_json::to_value(v).unwrap_or(Value::Null);
        self.values.insert(key.into(), v);
    }
    pub fn check(&mut self, c: Comparison) {
        self.pass &= c.pass;
        self.comparisons.push(c);
    }
    pub fn warn(&mut self, w: impl Into<String>) {
        self.warnings.push(w.into());
    }
    pub fn failures(&self) -> Vec<String> {
        self.comparisons.iter().filter(|c| !c.pass).map(|c| c.describe()).collect()
    }
    pub fn comparison(&self, label: &str) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| c.label == label)
    }
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn timed(settings: &Settings, f: impl FnOnce() -> Result<RunReport>) -> Result<RunReport> {
    let start = Instant::now();
    let mut r = f()?;
    if settings.timing {
        r.seconds = Some(start.elapsed().as_secs_f64());
    }
    Ok(r)
}

// ----------------------------------------------------------------------------
// Argument parsing.

#[derive(Debug, Parser)]
#[command(name = "cosym", version, about = "Cosymplectic structures, isotopies, flux and Hofer-like lengths")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML file with grid, steps, tol, nt, paper_normalization and a [params] table.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Points per periodic coordinate; bounded coordinates get one more.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// RK4 steps for integrated flows.
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Take Vol = 1 in the Reeb terms of lengths and norms.
    #[arg(long, global = true)]
    pub paper_normalization: bool,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Include wall-clock seconds in reports (breaks byte-identical output).
    #[arg(long, global = true)]
    pub timing: bool,
    /// Example parameter override, e.g. `--set a1=2`.
    #[arg(long = "set", global = true, value_parser = parse_kv)]
    pub set: Vec<(String, f64)>,
}

fn parse_kv(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got {s:?}"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("{k}: {e}"))?;
    Ok((k.trim().to_string(), v))
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check closedness and non-degeneracy of a catalog structure.
    VerifyStructure {
        #[arg(long, default_value = "t2s1")]
        structure: String,
        #[arg(long, default_value_t = 0.0)]
        t: f64,
    },
    /// Solve for the Reeb field.
    Reeb {
        #[arg(long, default_value = "twisted")]
        structure: String,
    },
    /// Split a catalog field into X_omega + X_eta.
    Decompose {
        #[arg(long, default_value = "generic")]
        field: String,
    },
    /// Cosymplectic / almost / co-Hamiltonian classification of a field.
    ClassifyField {
        #[arg(long, default_value = "z-dilation")]
        field: String,
        #[arg(long, default_value_t = 0.0)]
        t: f64,
    },
    /// Classification of the time-t map of a catalog isotopy.
    ClassifyMap {
        #[arg(long, default_value = "z-scaling")]
        isotopy: String,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
    },
    /// Integrate one trajectory and check invariance along the isotopy.
    Flow {
        #[arg(long, default_value = "torus-hamiltonian")]
        isotopy: String,
        /// Seed point, comma separated (default: the first grid point).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        point: Option<Vec<f64>>,
        /// Also write the trajectory as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Solve a Moser stability problem and report pullback residuals.
    Moser {
        #[arg(long, default_value = "moser-omega")]
        problem: String,
        /// Also solve with half the steps and report the convergence ratio.
        #[arg(long)]
        halving: bool,
    },
    /// Lift an isotopy to the symplectization and check it is symplectic.
    Lift {
        #[arg(long, default_value = "z-scaling")]
        isotopy: String,
    },
    /// Energy G along the orbit of I^-1(dG).
    Orbit {
        #[arg(long, default_value = "trig")]
        hamiltonian: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        point: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1.0)]
        t_end: f64,
    },
    /// Scan for fixed points of the time-t map.
    FixedPoints {
        #[arg(long, default_value = "z-scaling")]
        isotopy: String,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
    },
    /// Flux class of an isotopy on the coordinate-circle basis.
    Flux {
        #[arg(long, default_value = "reeb-flow")]
        isotopy: String,
        /// Only `auto` (coordinate circles through the grid origin) is available.
        #[arg(long, default_value = "auto")]
        basis: String,
        #[arg(long)]
        nt: Option<usize>,
    },
    /// Hofer-like length of a catalog isotopy.
    Norm {
        #[arg(long, default_value = "torus-rotation")]
        isotopy: String,
        /// co-hofer-like, co-hofer, almost-co-hofer-like or almost-co-hamiltonian.
        #[arg(long, default_value = "almost-co-hofer-like")]
        kind: String,
        /// sup (L-inf) or integral (L-(1,inf)).
        #[arg(long, default_value = "sup")]
        version: String,
        /// l2 (flat Hodge norm) or l1 (coefficient sum) for the harmonic term.
        #[arg(long, default_value = "l2")]
        harmonic: String,
        #[arg(long)]
        nt: Option<usize>,
    },
    /// Reproduce a worked example against its golden values.
    Reproduce { id: String },
    /// Run a tagged group of checks: invariants, golden or all.
    Suite {
        #[arg(default_value = "all")]
        tag: String,
        /// Comma-separated entry names, to run a subset.
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<String>>,
    },
    /// List catalog ids.
    List,
}

/// What the binary prints and how it exits.
pub struct Outcome {
    pub json: String,
    pub pass: bool,
    /// One line per failed comparison, for stderr.
    pub failures: Vec<String>,
}

pub fn settings_from(g: &GlobalArgs) -> Result<Settings> {
    let mut s = Settings {
        grid: g.grid,
        steps: g.steps.unwrap_or(crate::isotopy::DEFAULT_STEPS),
        tol: g.tol,
        paper_normalization: g.paper_normalization,
        timing: g.timing,
        ..Settings::default()
    };
    for (k, v) in &g.set {
        s.params.insert(k.clone(), *v);
    }
    if let Some(p) = &g.config {
        let c = Config::load(p)?;
        if g.steps.is_none() {
            s.steps = c.steps.unwrap_or(s.steps);
        }
        s.merge_config(&c);
    }
    if let Some(n) = s.grid {
        if n < 4 {
            return Err(invalid("--grid must be at least 4"));
        }
    }
    if s.steps < 16 {
        return Err(invalid("--steps must be at least 16"));
    }
    Ok(s)
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let mut s = settings_from(&cli.global)?;
    let report = match &cli.command {
        Command::VerifyStructure { structure, t } => cmd_verify_structure(structure, *t, &s)?,
        Command::Reeb { structure } => cmd_reeb(structure, &s)?,
        Command::Decompose { field } => cmd_decompose(field, &s)?,
        Command::ClassifyField { field, t } => cmd_classify_field(field, *t, &s)?,
        Command::ClassifyMap { isotopy, t } => cmd_classify_map(isotopy, *t, &s)?,
        Command::Flow { isotopy, point, csv } => cmd_flow(isotopy, point.as_deref(), csv.as_deref(), &s)?,
        Command::Moser { problem, halving } => cmd_moser(problem, *halving, &s)?,
        Command::Lift { isotopy } => cmd_lift(isotopy, &s)?,
        Command::Orbit { hamiltonian, point, t_end } => cmd_orbit(hamiltonian, point.as_deref(), *t_end, &s)?,
        Command::FixedPoints { isotopy, t } => cmd_fixed_points(isotopy, *t, &s)?,
        Command::Flux { isotopy, basis, nt } => {
            if basis != "auto" {
                return Err(invalid(format!("unknown basis {basis:?}; only \"auto\" is available")));
            }
            s.nt = nt.or(s.nt);
            cmd_flux(isotopy, &s)?
        }
        Command::Norm { isotopy, kind, version, harmonic, nt } => {
            s.nt = nt.or(s.nt);
            cmd_norm(isotopy, &LengthKind::parse(kind)?, &LengthVersion::parse(version)?, parse_harmonic(harmonic)?, &s)?
        }
        Command::Reproduce { id } => {
            let overrides = s.params.clone();
            reproduce(id, &overrides, &s)?
        }
        Command::Suite { tag, only } => {
            let r = run_suite(tag, only.as_deref(), &s)?;
            return Ok(Outcome { json: r.to_json(), pass: r.pass, failures: r.failures.clone() });
        }
        Command::List => {
            let v = serde_json::json!({
                "schema_version": SCHEMA_VERSION,
                "structures": catalog::STRUCTURES.iter().map(|x| [x.0, x.1]).collect::<Vec<_>>(),
                "isotopies": catalog::ISOTOPIES.iter().map(|x| [x.0, x.1]).collect::<Vec<_>>(),
                "problems": catalog::PROBLEMS.iter().map(|x| [x.0, x.1]).collect::<Vec<_>>(),
                "fields": catalog::FIELDS.iter().map(|x| [x.0, x.1]).collect::<Vec<_>>(),
                "scalars": catalog::SCALARS.iter().map(|x| [x.0, x.1]).collect::<Vec<_>>(),
                "examples": REPRODUCTIONS.iter().map(|x| [x.0, x.1]).collect::<Vec<_>>(),
                "suite": suite_entries().iter().map(|e| [e.name, e.tag]).collect::<Vec<_>>(),
            });
            return Ok(Outcome { json: serde_json::to_string_pretty(&v).expect("json"), pass: true, failures: vec![] });
        }
    };
    let failures = report.failures();
    Ok(Outcome { json: report.to_json(), pass: report.pass, failures })
}

fn parse_harmonic(s: &str) -> Result<HarmonicNorm> {
    match s {
        "l2" | "L2" => Ok(HarmonicNorm::L2),
        "l1" | "coefficient-l1" => Ok(HarmonicNorm::CoefficientL1),
        _ => Err(invalid(format!("unknown harmonic norm {s:?} (l2 or l1)"))),
    }
}

// ----------------------------------------------------------------------------
// Subcommand runners.

pub fn cmd_verify_structure(id: &str, t: f64, s: &Settings) -> Result<RunReport> {
    timed(s, || {
        let st = catalog::structure(id)?;
        let grid = s.grid_for(&st.chart)?;
        let tol = s.tol_or(1e-10);
        let r = verify_structure(&st, t, &grid, tol);
        let mut rep = RunReport::new("verify-structure", id, s);
        rep.value("grid", &grid.shape);
        rep.value("report", &r);
        rep.check(Comparison::below("d_eta", r.d_eta, tol, "analytic"));
        rep.check(Comparison::below("d_omega", r.d_omega, tol, "analytic"));
        rep.check(Comparison::above("min_det", r.min_det, 0.9, "pairing-matrix"));
        rep.check(Comparison::above("min_volume", r.min_volume, tol, "top-form"));
        Ok(rep)
    })
}

/// Independent pointwise solve of `A^T x = eta` for the Reeb field.
pub fn reeb_oracle(st: &CosymplecticStructure, p: &[f64]) -> Vec<f64> {
    let n = st.dim();
    let a = crate::cosym::assemble_pairing_matrix(st, 0.0, p);
    let mut at = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            at[i * n + j] = a[j * n + i];
        }
    }
    let mut b = st.eta.eval(p);
    crate::linalg::solve(&mut at, &mut b, n, 1e-14);
    b
}

pub fn cmd_reeb(id: &str, s: &Settings) -> Result<RunReport> {
    timed(s, || {
        let st = catalog::structure(id)?;
        let grid = s.grid_for(&st.chart)?;
        let tol = s.tol_or(1e-10);
        let r = reeb_field(&st, &grid)?;
        let mut dev: f64 = 0.0;
        for p in grid.points() {
            let x = r.xi.eval(p);
            let o = reeb_oracle(&st, p);
            dev = dev.max(x.iter().zip(&o).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        }
        let mut rep = RunReport::new("reeb", id, s);
        rep.value("xi_at_origin", r.xi.eval(grid.first_point()));
        rep.value("residual_eta", r.residual_eta);
        rep.value("residual_omega", r.residual_omega);
        rep.check(Comparison::below("oracle_deviation", dev, tol, "linear-solve-oracle"));
        rep.check(Comparison::below("eta_of_xi_minus_1", r.residual_eta, tol, "defining-equations"));
        rep.check(Comparison::below("i_xi_omega", r.residual_omega, tol, "defining-equations"));
        Ok(rep)
    })
}

pub fn cmd_decompose(id: &str, s: &Settings) -> Result<RunReport> {
    timed(s, || {
        let (st, x) = catalog::field(id)?;
        let grid = s.grid_for(&st.chart)?;
        let tol = s.tol_or(1e-8);
        let dec = decompose(&st, &x);
        let r = decomposition_residuals(&st, &x, &dec, 0.0, &grid);
        let mut rep = RunReport::new("decompose", id, s);
        let p = grid.first_point();
        rep.value("x_omega_at_origin", dec.x_omega.eval(p));
        rep.value("x_eta_at_origin", dec.x_eta.eval(p));
        rep.check(Comparison::below("sum", r.sum, tol, "analytic"));
        rep.check(Comparison::below("eta_of_x_omega", r.eta_of_x_omega, tol, "analytic"));
        rep.check(Comparison::below("i_x_eta_omega", r.omega_of_x_eta, tol, "analytic"));
        Ok(rep)
    })
}

pub fn cmd_classify_field(id: &str, t: f64, s: &Settings) -> Result<RunReport> {
    timed(s, || {
        let (st, x) = catalog::field(id)?;
        let grid = s.grid_for(&st.chart)?;
        let c = classify_field(&st, &x, t, &grid, s.tol_or(1e-8))?;
        let mut rep = RunReport::new("classify-field", id, s);
        rep.value("classification", &c);
        Ok(rep)
    })
}

fn load_isotopy(id: &str, s: &Settings) -> Result<(CosymplecticStructure, Isotopy)> {
    catalog::isotopy(id, &s.params, s.steps)
}

pub fn cmd_classify_map(id: &str, t: f64, s: &Settings) -> Result<RunReport> {
    timed(s, || {
        let (st, iso) = load_isotopy(id, s)?;
        let grid = s.grid_for(&st.chart)?;
        let c = classify_map(&st, &iso.at(t), 0.0, &grid, s.tol_or(1e-8))?;
        let mut rep = RunReport::new("classify-map", id, s);
        rep.value("t", t);
        rep.value("classification", &c);
        if let Some(f) = &iso.records.log_factor {
            let dev = (0..grid.len())
                .map(|i| {
                    let p = grid.point(i);
                    let est = c.conformal_log_factor.as_ref().map(|g| g.value(0.0, p)).unwrap_or(f64::NAN);
                    (est - f.value(t, p)).abs()
                })
                .fold(0.0, f64::max);
            rep.check(Comparison::below("log_factor_vs_record", dev, 1e-6, "closed-form"));
        }
        Ok(rep)
    })
}

pub fn cmd_flow(id: &str, point: Option<&[f64]>, csv: Option<&Path>, s: &Settings) -> Result<RunReport> {
    timed(s, || {
        let (st, iso) = load_isotopy(id, s)?;
        let grid = s.grid_for(&st.chart)?;
        let x0: Vec<f64> = point.map(|p| p.to_vec()).unwrap_or_else(|| grid.first_point().to_vec());
        if x0.len() != st.dim() {
            return Err(invalid(format!("point has {} coordinates, chart has {}", x0.len(), st.dim())));
        }
        let traj = iso.trajectory(&x0)?;
        if let Some(path) = csv {
            std::fs::write(path, traj.to_csv()).map_err(|e| GeomError::Config(format!("{}: {e}", path.display())))?;
        }
        let mut rep = RunReport::new("flow", id, s);
        rep.value("seed", &x0);
        rep.value("endpoint", traj.points.last());
        rep.value("warnings", &iso.warnings);
        let coarse = coarse_grid(&st.chart, s);
        let mut res = Vec::new();
        for &t in &CHECKPOINTS {
            let (w, e) = iso.invariance_residuals(&st, t, &coarse);
            res.push(serde_json::json!({ "t": t, "omega": w, "eta": e }));
            rep.check(Comparison::below(&format!("invariance_omega_t{t}"), w, s.tol_or(1e-5), "pullback"));
            rep.check(Comparison::below(&format!("invariance_eta_t{t}"), e, s.tol_or(1e-5), "pullback"));
        }
        rep.value("invariance", res);
        Ok(rep)
    })
}

/// A small grid for checks that integrate one flow per grid point.
fn coarse_grid(m: &ManifoldChart, s: &Settings) -> Grid {
    match s.grid {
        Some(n) => m.grid(n.min(12), n.min(12) + 1),
        None => m.grid(8, 9),
    }
}

pub fn cmd_moser(id: &str, halving: bool, s: &Settings) -> Result<RunReport> {
    timed(s, || {
        let p = catalog::problem(id, &s.params)?;
        let grid = s.grid_for(&p.chart)?;
        let tol = s.tol_or(1e-8);
        let start = Instant::now();
        let r = moser_solve(&p, s.steps, &grid, tol)?;
        let secs = start.elapsed().as_secs_f64();
        let mut rep = RunReport::new("moser", id, s);
        let worst = r.omega_residual.max(r.eta_residual);
        rep.value("report", &r);
        rep.check(Comparison::below("pullback_residual", worst, 1e-4, "pullback"));
        if s.timing {
            rep.check(Comparison::below("seconds", secs, 60.0, "timing"));
        }
        if halving {
            let h = moser_solve(&p, s.steps / 2, &grid, tol)?;
            let coarse = h.omega_residual.max(h.eta_residual);
            rep.value("half_steps_residual", coarse);
            // Below ~1e-13 the ratio measures rounding, not truncation.
            let ratio = if worst > 1e-13 { coarse / worst } else { f64::INFINITY };
            rep.value("halving_ratio", ratio);
            rep.check(Comparison::above("halving_ratio", ratio, 8.0, "fourth-order-convergence"));
        }
        Ok(rep)
    })
}

pub fn cmd_lift(id: &str, s: &Settings) -> Result<RunReport> {
    timed(s, || {
        let (st, iso) = load_isotopy(id, s)?;
        let almost = iso.records.log_factor.is_some();
        let lifted = if almost { lift_almost(&st, &iso)? } else { lift_cosymplectic(&st, &iso)? };
        let g = coarse_grid(&lifted.chart, s);
        let res = lifted.symplectic_residual(&CHECKPOINTS, &g);
        let mut rep = RunReport::new("lift", id, s);
        rep.value("lift", if almost { "almost" } else { "cosymplectic" });
        rep.value("grid", &g.shape);
        rep.check(Comparison::below("symplectic_residual", res, s.tol_or(1e-8), "analytic-jacobian"));
        if matches!(iso.records.potential, Some((PotentialKind::AlmostCoHamiltonian, _)))
            || matches!(iso.records.potential, Some((PotentialKind::CoHamiltonian, _)))
        {
            match lifted_hamiltonian_check(&st, &iso, &lifted, &CHECKPOINTS, &g) {
                Ok(h) => rep.check(Comparison::below("lifted_hamiltonian", h, 1e-6, "closed-form")),
                Err(e) => rep.warn(format!("lifted Hamiltonian check skipped: {e}")),
            }
        }
        Ok(rep)
    })
}

pub fn cmd_orbit(id: &str, point: Option<&[f64]>, t_end: f64, s: &Settings) -> Result<RunReport> {
    timed(s, || {
        let (st, g) = catalog::scalar(id)?;
        let x0: Vec<f64> = match point {
            Some(p) => p.to_vec(),
            None => st.chart.coords().iter().map(|_| 0.25).collect(),
        };
        if x0.len() != st.dim() {
            return Err(invalid(format!("point has {} coordinates, chart has {}", x0.len(), st.dim())));
        }
        let e = orbit_energy_profile(&st, &g, &x0, t_end, s.steps)?;
        let mut rep = RunReport::new("orbit", id, s);
        rep.value("seed", &x0);
        rep.value("energy_start", e.energy[0]);
        rep.value("energy_end", e.energy.last());
        rep.value("eta_sq_integral", e.eta_sq_integral.last());
        rep.value("periodic_candidate", e.periodic_candidate);
        rep.check(Comparison::holds("energy_monotone", e.monotone, "energy-identity"));
        rep.check(Comparison::below("energy_identity", e.identity_residual, 1e-6, "two-quadratures"));
        Ok(rep)
    })
}

pub fn cmd_fixed_points(id: &str, t: f64, s: &Settings) -> Result<RunReport> {
    timed(s, || {
        let (st, iso) = load_isotopy(id, s)?;
        let grid = coarse_grid(&st.chart, s);
        let f = iso.records.log_factor.as_ref().map(|f| f.at_time(t));
        let pts = fixed_point_scan(&st.chart, &iso.at(t), f.as_ref(), &grid);
        let mut rep = RunReport::new("fixed-points", id, s);
        rep.value("count", pts.len());
        rep.value("candidates", pts.iter().take(64).collect::<Vec<_>>());
        let worst_f = pts.iter().filter_map(|p| p.f_value).fold(0.0, f64::max);
        rep.value("max_abs_f_at_fixed_points", worst_f);
        Ok(rep)
    })
}

fn basis_for(st: &CosymplecticStructure, grid: &Grid) -> Result<HomologyBasis> {
    HomologyBasis::coordinate_circles(&st.chart, grid.first_point())
}

pub fn cmd_flux(id: &str, s: &Settings) -> Result<RunReport> {
    timed(s, || {
        let (st, iso) = load_isotopy(id, s)?;
        let grid = s.grid_for(&st.chart)?;
        let basis = basis_for(&st, &grid)?;
        let class = flux(&st, &iso, &basis, s.nt, 64, &grid, s.tol_or(1e-6))?;
        let mut rep = RunReport::new("flux", id, s);
        rep.value("labels", &class.labels);
        rep.value("coefficients", &class.coefficients);
        rep.value("closedness_residual", class.closedness_residual);
        for w in &class.warnings {
            rep.warn(w.clone());
        }
        if iso.records.log_factor.is_none() {
            match decomposed_flux(&st, &iso, 64, &grid, s.tol_or(1e-6)) {
                Ok(d) => rep.value("decomposed", &d),
                Err(e) => rep.warn(format!("decomposed flux skipped: {e}")),
            }
        }
        Ok(rep)
    })
}

pub fn cmd_norm(id: &str, kind: &LengthKind, version: &LengthVersion, harmonic: HarmonicNorm, s: &Settings) -> Result<RunReport> {
    timed(s, || {
        let (st, iso) = load_isotopy(id, s)?;
        let grid = s.grid_for(&st.chart)?;
        let opts = NormOptions { paper_normalization: s.paper_normalization, harmonic, tol: s.tol_or(1e-6), ..Default::default() };
        let r = length(&st, &iso, *kind, *version, s.nt_or(32), &grid, &opts)?;
        let mut rep = RunReport::new("norm", id, s);
        rep.value("length", &r);
        Ok(rep)
    })
}

// ----------------------------------------------------------------------------
// Reproductions.

pub const REPRODUCTIONS: [(&str, &str); 3] = [
    ("disk-rotation", "almost co-Hamiltonian length of the disk rotation, rho = rho0 + rho1 r, f = f"),
    ("torus-rotation", "almost co-Hofer-like length (Vol = 1, coefficient l1 harmonic term) and flux of the torus rotation"),
    ("reeb-flow", "flux of the time-one Reeb flow on T^2 x S^1"),
];

/// Run a worked example end to end (structure, isotopy, lengths, flux) and
/// compare with its golden values.
pub fn reproduce(id: &str, overrides: &Params, base: &Settings) -> Result<RunReport> {
    let mut s = base.clone();
    s.params = overrides.clone();
    timed(&s, || match id {
        "disk-rotation" => reproduce_disk(&s),
        "torus-rotation" => reproduce_torus(&s),
        "reeb-flow" => reproduce_reeb(&s),
        _ => Err(GeomError::Config(format!(
            "unknown example {id:?}; known: {}",
            REPRODUCTIONS.iter().map(|r| r.0).collect::<Vec<_>>().join(", ")
        ))),
    })
}

fn param(s: &Settings, k: &str, default: f64) -> f64 {
    s.params.get(k).copied().unwrap_or(default)
}

fn structure_checks(rep: &mut RunReport, st: &CosymplecticStructure, grid: &Grid) {
    let r = verify_structure(st, 0.0, grid, 1e-10);
    rep.check(Comparison::holds("structure", r.pass, "analytic").with_note(&r.failures.join("; ")));
}

fn reproduce_disk(s: &Settings) -> Result<RunReport> {
    let (a, b, c, k) = (param(s, "rho0", 1.0), param(s, "rho1", 0.0), param(s, "f", 1.0), param(s, "f2", 0.0));
    let mut rep = RunReport::new("reproduce", "disk-rotation", s);
    let (st, iso) = catalog::isotopy("disk-rotation", &s.params, s.steps)?;
    let grid = s.grid_for(&st.chart)?;
    structure_checks(&mut rep, &st, &grid);
    let opts = NormOptions { paper_normalization: s.paper_normalization, tol: s.tol_or(1e-6), ..Default::default() };
    let nt = s.nt_or(16);
    let sup = length(&st, &iso, LengthKind::AlmostCoHamiltonian, LengthVersion::Sup, nt, &grid, &opts)?;
    let int = length(&st, &iso, LengthKind::AlmostCoHamiltonian, LengthVersion::Integral, nt, &grid, &opts)?;
    rep.value("length_sup", sup.value);
    rep.value("length_integral", int.value);
    rep.value("osc", sup.osc.first());
    rep.value("reeb_term", sup.reeb.first());
    rep.check(Comparison::holds("integral_le_sup", int.value <= sup.value + 1e-12, "time-average-vs-max"));
    // Closed form: int_0^1 u rho(u) du + (1/2) int_D |f| Omega, for rho >= 0 and constant f.
    if k == 0.0 && a >= 0.0 && a + b >= 0.0 && !s.paper_normalization {
        let golden = a / 2.0 + b / 3.0 + PI * c.abs() / 2.0;
        rep.value("golden", golden);
        rep.check(Comparison::close("length", sup.value, golden, 1e-6, "closed-form-integrand-quadrature"));
    } else {
        rep.warn("no golden value: the closed form needs rho >= 0, constant f and the computed volume");
    }
    let basis = basis_for(&st, &grid)?;
    let class = flux(&st, &iso, &basis, Some(nt), 64, &grid, s.tol_or(1e-6))?;
    rep.value("flux_labels", &class.labels);
    rep.value("flux", &class.coefficients);
    if c != 0.0 || k != 0.0 {
        rep.warn("the eta part of the flux contains s f ds, whose loop integral depends on the chart seam of s");
    }
    Ok(rep)
}

fn reproduce_torus(s: &Settings) -> Result<RunReport> {
    let l = param(s, "l", 1.0) as usize;
    let a: Vec<f64> = (1..=l).map(|i| param(s, &format!("a{i}"), if i == 1 { 1.0 } else { 0.0 })).collect();
    let b: Vec<f64> = (1..=l).map(|i| param(s, &format!("b{i}"), if i == 1 { 2.0 } else { 0.0 })).collect();
    let (h0, h1) = (param(s, "h", 1.0), param(s, "h1", 0.0));
    let mut rep = RunReport::new("reproduce", "torus-rotation", s);
    let (st, iso) = catalog::torus_rotation(&a, &b, h0, h1)?;
    let grid = s.grid_for(&st.chart)?;
    structure_checks(&mut rep, &st, &grid);
    let nt = s.nt_or(16);
    let opts = NormOptions {
        paper_normalization: true,
        harmonic: HarmonicNorm::CoefficientL1,
        tol: s.tol_or(1e-6),
        ..Default::default()
    };
    let sup = length(&st, &iso, LengthKind::AlmostCoHoferLike, LengthVersion::Sup, nt, &grid, &opts)?;
    let int = length(&st, &iso, LengthKind::AlmostCoHoferLike, LengthVersion::Integral, nt, &grid, &opts)?;
    let flat = NormOptions { paper_normalization: s.paper_normalization, tol: s.tol_or(1e-6), ..Default::default() };
    let l2 = length(&st, &iso, LengthKind::AlmostCoHoferLike, LengthVersion::Sup, nt, &grid, &flat)?;
    rep.value("length_sup", sup.value);
    rep.value("length_integral", int.value);
    rep.value("length_sup_l2_harmonic", l2.value);
    rep.value("harmonic_l1", sup.harmonic.first());
    rep.value("reeb_term", sup.reeb.first());
    rep.check(Comparison::holds("integral_le_sup", int.value <= sup.value + 1e-12, "time-average-vs-max"));
    if h1 == 0.0 {
        let fact: f64 = (1..=l).map(|k| k as f64).product();
        let golden = a.iter().chain(&b).map(|x| x.abs()).sum::<f64>() + PI * PI * h0.abs() * fact * (2.0 * PI).powi(2 * l as i32);
        rep.value("golden", golden);
        rep.check(Comparison::close("length", sup.value, golden, 1e-6, "closed-form-integrand-quadrature"));
    } else {
        rep.warn("no golden value for non-constant h");
    }
    // The eta part h s ds crosses the seam of s, so the class is checked on the h = 0 rotation.
    let (st0, iso0) = catalog::torus_rotation(&a, &b, 0.0, 0.0)?;
    let basis = basis_for(&st0, &grid)?;
    let class = flux(&st0, &iso0, &basis, Some(nt), 64, &grid, s.tol_or(1e-6))?;
    rep.value("flux_labels", &class.labels);
    rep.value("flux_h0", &class.coefficients);
    for i in 0..l {
        let ci = -2.0 * PI * b[i];
        let cil = 2.0 * PI * a[i];
        rep.check(Comparison::close(&format!("flux_theta{}", i + 1), class.coefficients[i], ci, 1e-6, "closed-form"));
        rep.check(Comparison::close(&format!("flux_theta{}", i + 1 + l), class.coefficients[i + l], cil, 1e-6, "closed-form"));
    }
    rep.check(Comparison::close("flux_s", class.coefficients[2 * l], 0.0, 1e-6, "closed-form"));
    Ok(rep)
}

fn reproduce_reeb(s: &Settings) -> Result<RunReport> {
    let speed = param(s, "speed", 1.0);
    let mut rep = RunReport::new("reproduce", "reeb-flow", s);
    let (st, iso) = catalog::isotopy("reeb-flow", &s.params, s.steps)?;
    let grid = s.grid_for(&st.chart)?;
    structure_checks(&mut rep, &st, &grid);
    let basis = basis_for(&st, &grid)?;
    let class = flux(&st, &iso, &basis, s.nt, 64, &grid, s.tol_or(1e-6))?;
    rep.value("flux_labels", &class.labels);
    rep.value("flux", &class.coefficients);
    rep.check(Comparison::close("flux_s", class.coefficients[2], 2.0 * PI * speed, 1e-8, "closed-form-orbit"));
    rep.check(Comparison::close("flux_theta1", class.coefficients[0], 0.0, 1e-8, "closed-form-orbit"));
    rep.check(Comparison::close("flux_theta2", class.coefficients[1], 0.0, 1e-8, "closed-form-orbit"));
    let opts = NormOptions { paper_normalization: s.paper_normalization, tol: s.tol_or(1e-6), ..Default::default() };
    let co = length(&st, &iso, LengthKind::CoHoferLike, LengthVersion::Sup, s.nt_or(16), &grid, &opts)?;
    rep.value("co_hofer_like_length", co.value);
    Ok(rep)
}
