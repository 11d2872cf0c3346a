//! Command-line front end: `check`, `invert` and `verify`.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 mathematical failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::fmt::sig;
use crate::lininv::{residual_beta_map, solve_linear_inverse, CoefficientRole, InverseModel, RoleSelection};
use crate::linalg::AffineMap;
use crate::model::{load_system, InitialCondition, ObserverForm};
use crate::nlinv::{solve_nonlinear_inverse, NonlinearInverse, NonlinearSolveConfig, SolveMethod};
use crate::param::io_residual_probe;
use crate::series::{self, Basis, TruncatedSeries};
use crate::traj::{interpolate, steady_state, BoundaryCondition, BoundarySpec, Seed};
use crate::verify::{error_metric_with, integrate_forward, write_csv, Method, Precision, Quadrature, SimResult};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_MATH: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "seriesinv", version, about = "Inverse models for systems with series-defined outputs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and validate a system file.
    Check { system: PathBuf },
    /// Compute the inverse model of a scenario.
    Invert {
        scenario: PathBuf,
        /// Input series order.
        #[arg(long)]
        nprime: Option<usize>,
        /// Directory for a CSV of the instantiated trajectories.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = PrecisionArg::Six)]
        precision: PrecisionArg,
    },
    /// Invert, simulate the original dynamics and report the error E.
    Verify {
        scenario: PathBuf,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        #[arg(long)]
        step: Option<f64>,
        /// Comma-separated input orders.
        #[arg(long, value_delimiter = ',')]
        sweep: Option<Vec<usize>>,
        #[arg(long, value_enum)]
        quadrature: Option<QuadratureArg>,
        /// Directory for one CSV per run.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = PrecisionArg::Six)]
        precision: PrecisionArg,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PrecisionArg {
    Six,
    Full,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Euler,
    Rk4,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum QuadratureArg {
    Trapezoid,
    Left,
}

impl From<PrecisionArg> for Precision {
    fn from(p: PrecisionArg) -> Self {
        match p {
            PrecisionArg::Six => Precision::Six,
            PrecisionArg::Full => Precision::Full,
        }
    }
}

/// Scenario file.
///
/// ```toml
/// [system]
/// path = "vanvusse.system.toml"
/// [series]
/// basis = "power"
/// N = 3
/// Nprime = 3
/// [trajectory]
/// conditions = [{ t = 0, order = 0, value = 0.9 }, { t = 1, order = 0, value = 1.1 }]
/// [initial]
/// steady_state = 0.9
/// [horizon]
/// t0 = 0
/// tf = 1
/// [verify]
/// method = "euler"
/// step = 1e-4
/// ```
#[derive(Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub system: SystemRef,
    pub series: SeriesSection,
    pub trajectory: TrajectorySection,
    pub initial: InitialSection,
    pub horizon: HorizonSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(skip)]
    pub dir: PathBuf,
}

#[derive(Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct SystemRef {
    pub path: PathBuf,
}

#[derive(Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct SeriesSection {
    #[serde(default = "default_basis")]
    pub basis: String,
    pub rate: Option<f64>,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "Nprime")]
    pub nprime: Option<usize>,
    pub sweep: Option<Vec<usize>>,
}

fn default_basis() -> String {
    "power".into()
}

#[derive(Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySection {
    /// Full output coefficient vector.
    pub alpha: Option<Vec<f64>>,
    pub conditions: Option<Vec<ConditionEntry>>,
    /// Linear systems: indices of the free output coefficients.
    pub free_alpha: Option<Vec<usize>>,
    /// Linear systems: values of the free output coefficients.
    pub free_values: Option<Vec<f64>>,
}

#[derive(Deserialize, Debug, Clone, Copy)]
#[serde(deny_unknown_fields)]
pub struct ConditionEntry {
    pub t: f64,
    #[serde(default)]
    pub order: usize,
    pub value: f64,
}

#[derive(Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    /// Observer-form states.
    pub x0: Option<Vec<f64>>,
    /// Values of the system's physical coordinates.
    pub physical: Option<Vec<f64>>,
    /// Equilibrium with this output value.
    pub steady_state: Option<f64>,
    pub seed_x: Option<Vec<f64>>,
    pub seed_u: Option<f64>,
}

#[derive(Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct HorizonSection {
    #[serde(default)]
    pub t0: f64,
    pub tf: f64,
}

#[derive(Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    pub method: Option<String>,
    pub step: Option<f64>,
    pub quadrature: Option<String>,
}

impl Scenario {
    pub fn parse(text: &str, dir: &Path) -> Result<Scenario> {
        let mut s: Scenario = toml::from_str(text).map_err(|e| Error::Schema(e.message().to_string()))?;
        s.dir = dir.to_path_buf();
        let sources = [s.initial.x0.is_some(), s.initial.physical.is_some(), s.initial.steady_state.is_some()];
        if sources.iter().filter(|b| **b).count() != 1 {
            return Err(Error::Schema(
                "[initial] needs exactly one of x0, physical, steady_state".into(),
            ));
        }
        if s.trajectory.alpha.is_some() == s.trajectory.conditions.is_some() && s.trajectory.free_values.is_none() {
            return Err(Error::Schema(
                "[trajectory] needs either alpha or conditions (or free_values for linear systems)".into(),
            ));
        }
        if s.series.nprime == Some(0) || s.series.sweep.as_ref().is_some_and(|v| v.contains(&0)) {
            return Err(Error::Schema("input order Nprime must be at least 1".into()));
        }
        if !(s.horizon.tf > s.horizon.t0) {
            return Err(Error::Schema("horizon needs t0 < tf".into()));
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Scenario::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn system(&self) -> Result<ObserverForm> {
        let p = self.dir.join(&self.system.path);
        if !p.exists() {
            return Err(Error::Io(format!("system file {} not found", p.display())));
        }
        load_system(&p)
    }

    pub fn basis(&self) -> Result<Basis> {
        match self.series.basis.to_ascii_lowercase().as_str() {
            "power" => {
                if self.series.rate.is_some() {
                    return Err(Error::Schema("rate applies to the exponential basis only".into()));
                }
                Ok(Basis::Power)
            }
            "exponential" => {
                let rate = self.series.rate.unwrap_or(1.0);
                if !(rate > 0.0 && rate.is_finite()) {
                    return Err(Error::Schema("exponential rate must be positive".into()));
                }
                Ok(Basis::Exponential { rate })
            }
            b => Err(Error::Schema(format!("unknown basis `{b}`"))),
        }
    }

    pub fn nprime(&self) -> usize {
        self.series.nprime.unwrap_or(self.series.n)
    }

    /// Output coefficients from `alpha` or from the boundary conditions.
    pub fn alpha(&self, basis: Basis) -> Result<Option<Vec<f64>>> {
        if let Some(a) = &self.trajectory.alpha {
            if a.len() != self.series.n + 1 {
                return Err(Error::Schema(format!(
                    "trajectory.alpha needs N + 1 = {} entries",
                    self.series.n + 1
                )));
            }
            return Ok(Some(a.clone()));
        }
        let Some(conds) = &self.trajectory.conditions else {
            return Ok(None);
        };
        let spec = BoundarySpec {
            t0: self.horizon.t0,
            tf: self.horizon.tf,
            conditions: conds
                .iter()
                .map(|c| BoundaryCondition {
                    t: c.t,
                    order: c.order,
                    value: c.value,
                })
                .collect(),
        };
        Ok(Some(interpolate(&spec, basis, self.series.n)?.alpha))
    }

    fn seed(&self) -> Option<Seed> {
        let i = &self.initial;
        if i.seed_x.is_none() && i.seed_u.is_none() {
            return None;
        }
        let y = i.steady_state.unwrap_or(0.0);
        Some(Seed {
            x: i.seed_x.clone().unwrap_or_default(),
            u: i.seed_u.unwrap_or(0.0),
        })
        .map(|mut s| {
            if s.x.is_empty() {
                s.x = vec![y];
            }
            s
        })
    }

    pub fn verify_method(&self) -> Result<Method> {
        self.verify.method.as_deref().unwrap_or("euler").parse()
    }

    pub fn verify_step(&self) -> f64 {
        self.verify.step.unwrap_or(1e-4 * (self.horizon.tf - self.horizon.t0))
    }

    pub fn quadrature(&self) -> Result<Quadrature> {
        self.verify.quadrature.as_deref().unwrap_or("trapezoid").parse()
    }
}

/// Initial condition resolved from the scenario, with a note on its origin.
struct ResolvedIc {
    ic: InitialCondition,
    note: Option<String>,
}

fn resolve_ic(sc: &Scenario, sys: &ObserverForm) -> Result<ResolvedIc> {
    let t0 = sc.horizon.t0;
    if let Some(x0) = &sc.initial.x0 {
        return Ok(ResolvedIc {
            ic: InitialCondition::observer(t0, x0.clone()),
            note: None,
        });
    }
    if let Some(z) = &sc.initial.physical {
        return Ok(ResolvedIc {
            ic: InitialCondition::physical(t0, z.clone()),
            note: None,
        });
    }
    let y = sc.initial.steady_state.expect("validated");
    let mut seed = sc.seed();
    if let Some(s) = seed.as_mut() {
        if s.x.len() == 1 && sys.n() > 1 {
            s.x = vec![y; sys.n()];
        }
    }
    let ss = steady_state(sys, y, seed.as_ref())?;
    let mut note = format!("steady state at y = {}: x = {}, u = {}", sig(y, 6), vec6(&ss.x), sig(ss.u, 6));
    for (x, u) in &ss.other_roots {
        let _ = write!(note, "\nwarning: another equilibrium at x = {}, u = {}", vec6(x), sig(*u, 6));
    }
    Ok(ResolvedIc {
        ic: InitialCondition::observer(t0, ss.x),
        note: Some(note),
    })
}

fn vec6(v: &[f64]) -> String {
    format!("[{}]", v.iter().map(|x| sig(*x, 6)).collect::<Vec<_>>().join(", "))
}

/// Affine expression `c0 + Σ cⱼ·nameⱼ` with 6 significant digits.
fn affine_text(linear: &[f64], offset: f64, names: &[String]) -> String {
    let scale = linear.iter().fold(offset.abs(), |m, v| m.max(v.abs()));
    let tiny = 1e-13 * scale.max(f64::MIN_POSITIVE);
    let mut out = String::new();
    for (c, name) in linear.iter().zip(names) {
        if c.abs() <= tiny {
            continue;
        }
        let mag = sig(c.abs(), 6);
        let term = if mag == "1" { name.clone() } else { format!("{mag}*{name}") };
        if out.is_empty() {
            out = if *c < 0.0 { format!("-{term}") } else { term };
        } else {
            let _ = write!(out, " {} {term}", if *c < 0.0 { '-' } else { '+' });
        }
    }
    if offset.abs() > tiny || out.is_empty() {
        let v = if offset.abs() > tiny { offset } else { 0.0 };
        if out.is_empty() {
            out = sig(v, 6);
        } else {
            let _ = write!(out, " {} {}", if v < 0.0 { '-' } else { '+' }, sig(v.abs(), 6));
        }
    }
    out
}

fn map_rows(map: &AffineMap, prefix: &str, names: &[String], pick: impl Fn(usize) -> bool) -> String {
    let mut out = String::new();
    for i in 0..map.output_dim() {
        if pick(i) {
            let _ = writeln!(out, "  {prefix}{i} = {}", affine_text(map.linear.row(i), map.offset[i], names));
        }
    }
    out
}

fn role_text(r: CoefficientRole) -> &'static str {
    match r {
        CoefficientRole::Free => "free",
        CoefficientRole::SolvedFromResidual => "residual",
        CoefficientRole::SolvedFromIc => "initial conditions",
    }
}

fn system_line(sys: &ObserverForm) -> String {
    match sys.as_linear() {
        Some(l) => format!("{}: linear, n={}, g=({}), q=({})", sys.name, sys.n(), join6(&l.g), join6(&l.q)),
        None => format!("{}: nonlinear, n={}", sys.name, sys.n()),
    }
}

fn join6(v: &[f64]) -> String {
    v.iter().map(|x| sig(*x, 6)).collect::<Vec<_>>().join(", ")
}

/// Everything `invert` computes for one input order.
enum Inverse {
    Linear {
        model: Box<InverseModel>,
        free: Vec<f64>,
    },
    Nonlinear(Box<NonlinearInverse>),
}

impl Inverse {
    fn series(&self) -> Result<(TruncatedSeries, TruncatedSeries, Vec<f64>)> {
        match self {
            Inverse::Linear { model, free } => {
                let (x, u) = model.instantiate(free)?;
                let t0 = model.ic.t0;
                let x0 = x.iter().map(|s| series::eval(s, t0)).collect();
                Ok((model.output(free)?, u, x0))
            }
            Inverse::Nonlinear(inv) => Ok((inv.output(), inv.input(), Vec::new())),
        }
    }
}

fn run_inverse(sc: &Scenario, sys: &ObserverForm, ric: &ResolvedIc, nprime: usize, report: &mut String) -> Result<Inverse> {
    let basis = sc.basis()?;
    let n = sc.series.n;
    if sys.is_linear() {
        let roles = match &sc.trajectory.free_alpha {
            Some(f) => RoleSelection::FreeAlpha(f.clone()),
            None => RoleSelection::Auto,
        };
        let model = solve_linear_inverse(sys, basis, n, nprime, &ric.ic, &roles)?;
        let free = match (&sc.trajectory.free_values, sc.alpha(basis)?) {
            (Some(v), _) => v.clone(),
            (None, Some(a)) => model.free_alpha.iter().map(|&i| a[i]).collect(),
            (None, None) => vec![0.0; model.n_free()],
        };
        if free.len() != model.n_free() {
            return Err(Error::Schema(format!(
                "trajectory.free_values needs {} entries (free a{:?})",
                model.n_free(),
                model.free_alpha
            )));
        }
        write_linear_report(sys, &model, &free, report)?;
        Ok(Inverse::Linear {
            model: Box::new(model),
            free,
        })
    } else {
        if basis != Basis::Power {
            return Err(Error::Unsupported("nonlinear systems use the power basis".into()));
        }
        let alpha = sc
            .alpha(basis)?
            .ok_or_else(|| Error::Schema("nonlinear scenarios need trajectory.alpha or conditions".into()))?;
        let inv = solve_nonlinear_inverse(sys, &alpha, &ric.ic, &NonlinearSolveConfig::new(nprime))?;
        write_nonlinear_report(&inv, report);
        Ok(Inverse::Nonlinear(Box::new(inv)))
    }
}

fn write_linear_report(sys: &ObserverForm, m: &InverseModel, free: &[f64], out: &mut String) -> Result<()> {
    let params = m.param_names();
    let _ = writeln!(out, "basis: {}, N = {}, N' = {}", m.basis, m.n_out, m.n_in);
    let probe = io_residual_probe(sys, m.basis, m.n_out, m.n_in)?;
    if let Ok(rb) = residual_beta_map(&probe) {
        let mut names: Vec<String> = (0..=m.n_out).map(|i| format!("a{i}")).collect();
        names.extend(rb.unsolved.iter().map(|j| format!("b{j}")));
        let _ = writeln!(out, "input coefficients from the residual:");
        for (k, &j) in rb.solved.iter().enumerate() {
            let _ = writeln!(
                out,
                "  b{j} = {}",
                affine_text(rb.map.linear.row(k), rb.map.offset[k], &names)
            );
        }
    }
    let _ = writeln!(out, "inverse model in ({}):", params.join(", "));
    out.push_str(&map_rows(&m.alpha_map, "a", &params, |i| m.alpha_roles[i] != CoefficientRole::Free));
    out.push_str(&map_rows(&m.beta_map, "b", &params, |_| true));
    let roles = |prefix: &str, r: &[CoefficientRole]| {
        r.iter()
            .enumerate()
            .map(|(i, r)| format!("{prefix}{i}: {}", role_text(*r)))
            .collect::<Vec<_>>()
            .join(", ")
    };
    let _ = writeln!(out, "roles: {}", roles("a", &m.alpha_roles));
    let _ = writeln!(out, "       {}", roles("b", &m.beta_roles));
    let inst = m
        .free_alpha
        .iter()
        .zip(free)
        .map(|(i, v)| format!("a{i} = {}", sig(*v, 6)))
        .collect::<Vec<_>>()
        .join(", ");
    let _ = writeln!(out, "instance ({inst}):");
    let _ = writeln!(out, "  alpha = {}", vec6(&m.alpha(free)?));
    let _ = writeln!(out, "  beta = {}", vec6(&m.beta(free)?));
    Ok(())
}

fn write_nonlinear_report(inv: &NonlinearInverse, out: &mut String) {
    let _ = writeln!(out, "basis: power, N = {}, N' = {}", inv.alpha.len() - 1, inv.beta.len() - 1);
    let _ = writeln!(out, "alpha = {}", vec6(&inv.alpha));
    let _ = writeln!(out, "beta = {}", vec6(&inv.beta));
    let method = match inv.method {
        SolveMethod::Sequential => "sequential elimination".to_string(),
        SolveMethod::Newton { iterations } => format!("newton ({iterations} iterations)"),
    };
    let _ = writeln!(out, "solved by {method}");
    let _ = writeln!(
        out,
        "matched residual coefficients: {} (max scaled {})",
        inv.matched,
        sig(inv.matched_error(), 3)
    );
    let _ = writeln!(out, "residual tail norm: {}", sig(inv.tail_norm, 6));
    let _ = writeln!(out, "degree of b_k in residual equation i:");
    let header: Vec<String> = (0..inv.beta.len()).map(|k| format!("{:>4}", format!("b{k}"))).collect();
    let _ = writeln!(out, "       {}", header.join(""));
    for (i, row) in inv.degrees.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|d| format!("{d:>4}")).collect();
        let _ = writeln!(out, "  f{i:<4}{}", cells.join(""));
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "scenario".into())
}

fn write_trajectory_csv(
    path: &Path,
    sys: &ObserverForm,
    inv: &Inverse,
    t0: f64,
    tf: f64,
    precision: Precision,
) -> Result<()> {
    let (y, u, _) = inv.series()?;
    let states: Vec<TruncatedSeries> = match inv {
        Inverse::Linear { model, free } => model.instantiate(free)?.0,
        Inverse::Nonlinear(nl) => {
            let trunc = crate::param::working_order(sys, nl.alpha.len() - 1, nl.beta.len() - 1);
            crate::param::eliminate_states(sys, &y, &u, trunc)?.states
        }
    };
    let steps = 100;
    let times: Vec<f64> = (0..=steps).map(|k| t0 + (tf - t0) * k as f64 / steps as f64).collect();
    let ys: Vec<f64> = times.iter().map(|&t| series::eval(&y, t)).collect();
    let res = SimResult {
        states: states.iter().map(|s| times.iter().map(|&t| series::eval(s, t)).collect()).collect(),
        u: times.iter().map(|&t| series::eval(&u, t)).collect(),
        y_sim: ys.clone(),
        y_ref: ys,
        times,
        method: Method::Euler,
        h: (tf - t0) / steps as f64,
    };
    let f = std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_csv(&res, f, precision)
}

fn cmd_check(path: &Path, out: &mut String) -> Result<()> {
    let sys = load_system(path)?;
    let _ = writeln!(out, "{}", system_line(&sys));
    for (i, g) in sys.g().iter().enumerate() {
        let used: Vec<String> = (0..sys.n()).filter(|&j| g.uses_var(j)).map(|j| format!("x{}", j + 1)).collect();
        let _ = writeln!(out, "  g{} = {}  uses [{}]", i + 1, g, used.join(", "));
    }
    let used: Vec<String> = (0..sys.n()).filter(|&j| sys.f().uses_var(j)).map(|j| format!("x{}", j + 1)).collect();
    let _ = writeln!(out, "  F = {}  uses [{}]", sys.f(), used.join(", "));
    if let Some(c) = &sys.coordinates {
        let _ = writeln!(out, "  coordinates: {}", c.names.join(", "));
    }
    Ok(())
}

fn cmd_invert(path: &Path, nprime: Option<usize>, dir: Option<&Path>, precision: Precision, out: &mut String) -> Result<()> {
    let sc = Scenario::load(path)?;
    let sys = sc.system()?;
    let _ = writeln!(out, "{}", system_line(&sys));
    let ric = resolve_ic(&sc, &sys)?;
    if let Some(n) = &ric.note {
        let _ = writeln!(out, "{n}");
    }
    let np = nprime.unwrap_or(sc.nprime());
    if np == 0 {
        return Err(Error::Schema("input order must be at least 1".into()));
    }
    let inv = run_inverse(&sc, &sys, &ric, np, out)?;
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
        let file = dir.join(format!("{}_invert.csv", stem(path)));
        write_trajectory_csv(&file, &sys, &inv, sc.horizon.t0, sc.horizon.tf, precision)?;
        let _ = writeln!(out, "wrote {}", file.display());
    }
    Ok(())
}

struct VerifyOpts {
    method: Option<Method>,
    step: Option<f64>,
    sweep: Option<Vec<usize>>,
    quadrature: Option<Quadrature>,
    out: Option<PathBuf>,
    precision: Precision,
}

fn cmd_verify(path: &Path, o: &VerifyOpts, out: &mut String) -> Result<()> {
    let sc = Scenario::load(path)?;
    let sys = sc.system()?;
    let _ = writeln!(out, "{}", system_line(&sys));
    let ric = resolve_ic(&sc, &sys)?;
    if let Some(n) = &ric.note {
        let _ = writeln!(out, "{n}");
    }
    let method = match o.method {
        Some(m) => m,
        None => sc.verify_method()?,
    };
    let quad = match o.quadrature {
        Some(q) => q,
        None => sc.quadrature()?,
    };
    let h = o.step.unwrap_or(sc.verify_step());
    let orders = o
        .sweep
        .clone()
        .or_else(|| sc.series.sweep.clone())
        .unwrap_or_else(|| vec![sc.nprime()]);
    if orders.contains(&0) {
        return Err(Error::Schema("input order must be at least 1".into()));
    }
    if let Some(d) = &o.out {
        std::fs::create_dir_all(d)?;
    }
    let mut rows = Vec::new();
    let mut first_err = None;
    for &np in &orders {
        let _ = writeln!(out, "--- N' = {np}");
        let result = (|| -> Result<(f64, f64)> {
            let inv = run_inverse(&sc, &sys, &ric, np, out)?;
            let (y, u, x0_model) = inv.series()?;
            let x0 = if x0_model.is_empty() { ric.ic.x0.clone() } else { x0_model };
            let ic = InitialCondition::observer(sc.horizon.t0, x0);
            let res = integrate_forward(&sys, &u, Some(&y), &ic, sc.horizon.tf, h, method)?;
            let rep = error_metric_with(&res, quad);
            if let Some(d) = &o.out {
                let file = d.join(format!("{}_n{np}.csv", stem(path)));
                let f = std::fs::File::create(&file).map_err(|e| Error::Io(format!("{}: {e}", file.display())))?;
                write_csv(&res, f, o.precision)?;
                let _ = writeln!(out, "wrote {}", file.display());
            }
            Ok((rep.e, rep.max_abs_error))
        })();
        match result {
            Ok((e, m)) => {
                let _ = writeln!(out, "E = {}, max |error| = {} ({method}, h = {})", sig(e, 6), sig(m, 6), sig(h, 6));
                rows.push(format!("{np:>6}  {:>12}  {:>12}", sig(e, 6), sig(m, 6)));
            }
            Err(e) => {
                let _ = writeln!(out, "failed: {e}");
                rows.push(format!("{np:>6}  {:>12}  {:>12}", "failed", "-"));
                first_err.get_or_insert(e);
            }
        }
    }
    if orders.len() > 1 {
        let _ = writeln!(out, "{:>6}  {:>12}  {:>12}", "N'", "E", "max|error|");
        for r in rows {
            let _ = writeln!(out, "{r}");
        }
    }
    first_err.map_or(Ok(()), Err)
}

fn exit_code(e: &Error) -> i32 {
    if e.is_mathematical() {
        EXIT_MATH
    } else {
        EXIT_USAGE
    }
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(text.as_bytes()) } else { stdout.write_all(text.as_bytes()) };
            return code;
        }
    };
    let mut out = String::new();
    let (result, code_for) = match cli.command {
        Command::Check { system } => {
            // an invalid system is the failure `check` reports
            let r = cmd_check(&system, &mut out);
            let code = |e: &Error| if matches!(e, Error::Io(_)) { EXIT_USAGE } else { EXIT_MATH };
            (r, Box::new(code) as Box<dyn Fn(&Error) -> i32>)
        }
        Command::Invert {
            scenario,
            nprime,
            out: dir,
            precision,
        } => (
            cmd_invert(&scenario, nprime, dir.as_deref(), precision.into(), &mut out),
            Box::new(exit_code) as Box<dyn Fn(&Error) -> i32>,
        ),
        Command::Verify {
            scenario,
            method,
            step,
            sweep,
            quadrature,
            out: dir,
            precision,
        } => {
            let o = VerifyOpts {
                method: method.map(|m| match m {
                    MethodArg::Euler => Method::Euler,
                    MethodArg::Rk4 => Method::Rk4,
                }),
                step,
                sweep,
                quadrature: quadrature.map(|q| match q {
                    QuadratureArg::Trapezoid => Quadrature::Trapezoid,
                    QuadratureArg::Left => Quadrature::LeftRiemann,
                }),
                out: dir,
                precision: precision.into(),
            };
            (cmd_verify(&scenario, &o, &mut out), Box::new(exit_code) as Box<dyn Fn(&Error) -> i32>)
        }
    };
    let _ = stdout.write_all(out.as_bytes());
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            code_for(&e)
        }
    }
}
