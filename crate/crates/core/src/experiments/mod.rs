//! Experiment drivers: twin-run stability sweeps, vanishing-viscosity
//! convergence, weak–strong refinement, identity-ledger refinement and the
//! sampled hypothesis audit.

mod audit;
mod convergence;
mod identity;
mod stability;
mod system;
mod weak_strong;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::hypotheses::{least_squares, AuditConfig};
use crate::linalg::State;
use crate::sampling::Region;
use crate::solver::{stable_dt, Field, Grid1D, InitialData, Integrator, Scheme, SolverConfig, Trajectory, TrigTarget};
use crate::systems::BalanceLaw;

pub use audit::{run_hypothesis_audit, run_solve};
pub use convergence::run_convergence;
pub use identity::run_identity_check;
pub use stability::run_stability;
pub use system::SystemConfig;
pub use weak_strong::run_weak_strong;

fn d_cfl() -> f64 {
    0.4
}
fn d_newton_tol() -> f64 {
    1e-12
}
fn d_newton_iters() -> usize {
    crate::systems::INVERSION_MAX_ITERS
}
fn d_max_steps() -> usize {
    10_000_000
}

/// Solver settings shared by every run of an experiment. `epsilon` is the
/// sweep list; `scheme` defaults to central for viscous runs and local
/// Lax–Friedrichs for inviscid ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    #[serde(default)]
    pub epsilon: Option<Vec<f64>>,
    #[serde(default = "d_cfl")]
    pub cfl: f64,
    #[serde(default)]
    pub scheme: Option<Scheme>,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "d_newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "d_newton_iters")]
    pub newton_iters: usize,
    #[serde(default = "d_max_steps")]
    pub max_steps: usize,
}

impl Default for SolverBlock {
    fn default() -> Self {
        SolverBlock {
            epsilon: None,
            cfl: d_cfl(),
            scheme: None,
            integrator: Integrator::default(),
            dt: None,
            newton_tol: d_newton_tol(),
            newton_iters: d_newton_iters(),
            max_steps: d_max_steps(),
        }
    }
}

impl SolverBlock {
    pub fn validate(&self) -> Result<()> {
        if let Some(eps) = &self.epsilon {
            for (i, e) in eps.iter().enumerate() {
                if !(*e >= 0.0 && e.is_finite()) {
                    return Err(Error::config(format!("solver.epsilon[{i}]"), "must be finite and nonnegative"));
                }
            }
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::config("solver.cfl", "must lie in (0, 1]"));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::config("solver.dt", "must be positive"));
            }
        }
        if !(self.newton_tol > 0.0) {
            return Err(Error::config("solver.newton_tol", "must be positive"));
        }
        if self.newton_iters == 0 {
            return Err(Error::config("solver.newton_iters", "must be at least 1"));
        }
        Ok(())
    }

    fn epsilons(&self, default: &[f64]) -> Vec<f64> {
        self.epsilon.clone().unwrap_or_else(|| default.to_vec())
    }

    /// Run settings for one `ε` with a fixed step.
    fn run(&self, epsilon: f64, t_end: f64, dt: f64, snapshot_every: usize) -> SolverConfig {
        let mut c = SolverConfig::new(t_end);
        c.epsilon = epsilon;
        c.cfl = self.cfl;
        c.scheme = self.scheme.unwrap_or(if epsilon > 0.0 {
            Scheme::Central
        } else {
            Scheme::LocalLaxFriedrichs
        });
        c.integrator = self.integrator;
        c.newton_tol = self.newton_tol;
        c.newton_iters = self.newton_iters;
        c.max_steps = self.max_steps;
        c.dt = Some(dt);
        c.max_dt_fraction = 1.0;
        c.snapshot_every = snapshot_every.max(1);
        c
    }
}

fn d_ns() -> Vec<usize> {
    vec![64, 128, 256]
}
fn d_length() -> f64 {
    2.0 * PI
}
fn d_n_max() -> usize {
    4096
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    /// Resolutions for refinement studies; the first is the base resolution.
    #[serde(default = "d_ns")]
    pub n: Vec<usize>,
    #[serde(default = "d_length")]
    pub length: f64,
    /// Budget for grid doubling in the convergence sweep.
    #[serde(default = "d_n_max")]
    pub n_max: usize,
}

impl Default for GridBlock {
    fn default() -> Self {
        GridBlock {
            n: d_ns(),
            length: d_length(),
            n_max: d_n_max(),
        }
    }
}

fn d_center() -> f64 {
    PI
}
fn d_width() -> f64 {
    0.5
}

/// `δ·exp(−d²/(2w²))·direction`, `d` the periodic distance to `center`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    /// Per-command default when absent (1e-3 for stability, 0.1 for identity).
    #[serde(default)]
    pub amplitude: Option<f64>,
    #[serde(default = "d_center")]
    pub center: f64,
    #[serde(default = "d_width")]
    pub width: f64,
    /// All ones when absent.
    #[serde(default)]
    pub direction: Option<Vec<f64>>,
}

impl Default for Perturbation {
    fn default() -> Self {
        Perturbation {
            amplitude: None,
            center: d_center(),
            width: d_width(),
            direction: None,
        }
    }
}

impl Perturbation {
    fn validate(&self, n: usize) -> Result<()> {
        if let Some(a) = self.amplitude {
            if !a.is_finite() {
                return Err(Error::config("experiment.perturbation.amplitude", "must be finite"));
            }
        }
        if !(self.width > 0.0) {
            return Err(Error::config("experiment.perturbation.width", "must be positive"));
        }
        if let Some(d) = &self.direction {
            if d.len() != n {
                return Err(Error::config(
                    "experiment.perturbation.direction",
                    format!("{} entries for a system with {n} components", d.len()),
                ));
            }
        }
        Ok(())
    }

    fn profile(&self, amplitude: f64, grid: &Grid1D, n: usize) -> Vec<State> {
        let dir = self.direction.clone().unwrap_or_else(|| vec![1.0; n]);
        let dir = State::from_vec(dir);
        (0..grid.n)
            .map(|i| {
                let d = (grid.center(i) - self.center).rem_euclid(grid.length);
                let d = d.min(grid.length - d);
                &dir * (amplitude * (-d * d / (2.0 * self.width * self.width)).exp())
            })
            .collect()
    }
}

/// Sampling overrides for the audit; system defaults fill the gaps.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloudBlock {
    #[serde(default)]
    pub region: Option<Region>,
    /// Lower floor per component; `null` entries are unconstrained.
    #[serde(default)]
    pub floors: Option<Vec<Option<f64>>>,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub pairs: Option<usize>,
    #[serde(default)]
    pub shells: Option<Vec<f64>>,
    #[serde(default)]
    pub shell_samples: Option<usize>,
}

fn d_t_end() -> f64 {
    1.0
}
fn d_snapshots() -> usize {
    100
}
fn d_reference_factor() -> usize {
    4
}

/// The `experiment` block of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentParams {
    #[serde(default)]
    pub grid: GridBlock,
    /// System default when absent.
    #[serde(default)]
    pub initial: Option<InitialData>,
    #[serde(default)]
    pub perturbation: Perturbation,
    #[serde(default = "d_t_end")]
    pub t_end: f64,
    /// Manufactured reference for the convergence sweep.
    #[serde(default)]
    pub target: Option<TrigTarget>,
    /// Constant offset of the mismatched-data convergence variant; 0.05 per
    /// component when absent, skipped when all zero.
    #[serde(default)]
    pub mismatch: Option<Vec<f64>>,
    /// Resolution ratio of the weak–strong reference.
    #[serde(default = "d_reference_factor")]
    pub reference_factor: usize,
    /// Target number of stored snapshots per run.
    #[serde(default = "d_snapshots")]
    pub snapshots: usize,
    #[serde(default)]
    pub cloud: CloudBlock,
    #[serde(default)]
    pub audit: AuditConfig,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        ExperimentParams {
            grid: GridBlock::default(),
            initial: None,
            perturbation: Perturbation::default(),
            t_end: d_t_end(),
            target: None,
            mismatch: None,
            reference_factor: d_reference_factor(),
            snapshots: d_snapshots(),
            cloud: CloudBlock::default(),
            audit: AuditConfig::default(),
        }
    }
}

impl ExperimentParams {
    pub fn validate(&self, components: usize) -> Result<()> {
        if self.grid.n.is_empty() {
            return Err(Error::config("experiment.grid.n", "need at least one resolution"));
        }
        for (i, &n) in self.grid.n.iter().enumerate() {
            if n < crate::solver::MIN_CELLS {
                return Err(Error::config(
                    format!("experiment.grid.n[{i}]"),
                    format!("need at least {} cells", crate::solver::MIN_CELLS),
                ));
            }
        }
        if !(self.grid.length > 0.0 && self.grid.length.is_finite()) {
            return Err(Error::config("experiment.grid.length", "must be positive"));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::config("experiment.t_end", "must be positive"));
        }
        if self.snapshots < 2 {
            return Err(Error::config("experiment.snapshots", "must be at least 2"));
        }
        if self.reference_factor == 0 {
            return Err(Error::config("experiment.reference_factor", "must be at least 1"));
        }
        if let Some(init) = &self.initial {
            if init.components() != components {
                return Err(Error::config(
                    "experiment.initial",
                    format!("{} components for a system with {components}", init.components()),
                ));
            }
        }
        if let Some(t) = &self.target {
            if t.components.len() != components {
                return Err(Error::config(
                    "experiment.target.components",
                    format!("{} components for a system with {components}", t.components.len()),
                ));
            }
        }
        if let Some(m) = &self.mismatch {
            if m.len() != components {
                return Err(Error::config(
                    "experiment.mismatch",
                    format!("{} entries for a system with {components}", m.len()),
                ));
            }
        }
        self.perturbation.validate(components)
    }
}

fn d_ratio_cap() -> f64 {
    2.0
}
fn d_gronwall() -> f64 {
    0.05
}
fn d_slope_window() -> [f64; 2] {
    [0.8, 1.2]
}
fn d_plateau() -> f64 {
    0.1
}
fn d_saturation() -> f64 {
    0.05
}
fn d_ws_order() -> f64 {
    0.8
}
fn d_identity_order() -> f64 {
    1.7
}
fn d_shock_growth() -> f64 {
    50.0
}
fn d_dissipation_floor() -> f64 {
    -1e-12
}

/// Verdict thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "d_ratio_cap")]
    pub stability_ratio_cap: f64,
    #[serde(default = "d_gronwall")]
    pub gronwall: f64,
    #[serde(default = "d_slope_window")]
    pub slope_window: [f64; 2],
    #[serde(default = "d_plateau")]
    pub plateau: f64,
    #[serde(default = "d_saturation")]
    pub saturation: f64,
    #[serde(default = "d_ws_order")]
    pub weak_strong_order: f64,
    #[serde(default = "d_identity_order")]
    pub identity_order: f64,
    #[serde(default = "d_shock_growth")]
    pub shock_growth: f64,
    #[serde(default = "d_dissipation_floor")]
    pub dissipation_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            stability_ratio_cap: d_ratio_cap(),
            gronwall: d_gronwall(),
            slope_window: d_slope_window(),
            plateau: d_plateau(),
            saturation: d_saturation(),
            weak_strong_order: d_ws_order(),
            identity_order: d_identity_order(),
            shock_growth: d_shock_growth(),
            dissipation_floor: d_dissipation_floor(),
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.slope_window;
        if !(lo <= hi) {
            return Err(Error::config("tolerances.slope_window", "lower end exceeds upper end"));
        }
        for (key, v) in [
            ("stability_ratio_cap", self.stability_ratio_cap),
            ("gronwall", self.gronwall),
            ("plateau", self.plateau),
            ("saturation", self.saturation),
            ("shock_growth", self.shock_growth),
        ] {
            if !(v > 0.0) {
                return Err(Error::config(format!("tolerances.{key}"), "must be positive"));
            }
        }
        Ok(())
    }
}

/// Everything an experiment driver reads.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub solver: SolverBlock,
    pub experiment: ExperimentParams,
    pub tolerances: Tolerances,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.solver.validate()?;
        self.experiment.validate(self.system.components())?;
        self.tolerances.validate()
    }

    fn initial(&self) -> InitialData {
        self.experiment
            .initial
            .clone()
            .unwrap_or_else(|| self.system.default_initial())
    }

    fn grid(&self, n: usize) -> Result<Grid1D> {
        Grid1D::new(n, self.experiment.grid.length)
    }

    /// Positive `ε` list for the viscous experiments.
    fn viscous_epsilons(&self, default: &[f64]) -> Result<Vec<f64>> {
        let eps = self.solver.epsilons(default);
        if eps.is_empty() {
            return Err(Error::config("solver.epsilon", "need at least one value"));
        }
        for (i, e) in eps.iter().enumerate() {
            if *e <= 0.0 {
                return Err(Error::config(format!("solver.epsilon[{i}]"), "viscous runs need epsilon > 0"));
            }
        }
        Ok(eps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Pass,
    Fail,
    Inconclusive,
    Error,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Pass => 0,
            Outcome::Fail => 1,
            Outcome::Inconclusive => 2,
            Outcome::Error => 3,
        }
    }
}

/// Numeric table written as `<name>.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Series {
    pub name: String,
    pub columns: Vec<String>,
    #[serde(skip)]
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Series {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_columns(name: impl Into<String>, columns: Vec<String>) -> Self {
        Series {
            name: name.into(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FigureKind {
    LogLog,
    TimeSeries,
    Stack,
}

/// Plot declared over one or more series sharing the `x` column.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Figure {
    pub name: String,
    pub kind: FigureKind,
    pub title: String,
    pub series: Vec<String>,
    pub x: String,
    pub y: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub kind: String,
    pub system: String,
    pub verdict: Outcome,
    pub reason: String,
    /// How the strong reference was realized, when there is one.
    pub reference: Option<String>,
    pub inputs: Value,
    pub measurements: Map<String, Value>,
    pub series: Vec<Series>,
    pub figures: Vec<Figure>,
    /// Files written next to `report.json`, filled in on emission.
    pub artifacts: Vec<String>,
}

impl ExperimentReport {
    pub fn new(kind: &str, config: &ExperimentConfig) -> Self {
        ExperimentReport {
            kind: kind.into(),
            system: system_name(&config.system),
            verdict: Outcome::Inconclusive,
            reason: String::new(),
            reference: None,
            inputs: serde_json::to_value(config).unwrap_or(Value::Null),
            measurements: Map::new(),
            series: Vec::new(),
            figures: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    /// Report for a run that stopped on an error after it started.
    pub fn failed(kind: &str, config: &ExperimentConfig, error: &Error) -> Self {
        let mut r = Self::new(kind, config);
        r.verdict = Outcome::Error;
        r.reason = error.to_string();
        r
    }

    pub fn measure(&mut self, key: &str, value: impl Serialize) {
        self.measurements
            .insert(key.into(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    pub fn conclude(&mut self, verdict: Outcome, reason: impl Into<String>) {
        self.verdict = verdict;
        self.reason = reason.into();
    }

    pub fn series(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }
}

fn system_name(cfg: &SystemConfig) -> String {
    match serde_json::to_value(cfg) {
        Ok(Value::Object(m)) => m.get("kind").and_then(Value::as_str).unwrap_or("system").to_string(),
        _ => "system".into(),
    }
}

/// `(Σ |a_i − b_i|² Δx)^{1/2}`.
pub fn l2_distance(a: &Field, b: &Field) -> f64 {
    let dx = a.grid.dx();
    a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).norm_squared())
        .sum::<f64>()
        .sqrt()
        * dx.sqrt()
}

/// `max_i |U_{i+1} − U_{i−1}|∞ / 2Δx`.
pub fn max_gradient(f: &Field) -> f64 {
    crate::diagnostics::gradient(f)
        .iter()
        .map(|g| g.amax())
        .fold(0.0, f64::max)
}

/// Fixed step shared by runs that must keep identical time stamps: the
/// smallest stable step of the given fields with a 0.8 safety factor,
/// rounded down so that it divides `t_end`.
fn shared_dt(
    spec: &dyn BalanceLaw,
    fields: &[&Field],
    block: &SolverBlock,
    epsilon: f64,
    t_end: f64,
) -> Result<(f64, usize)> {
    let raw = match block.dt {
        Some(dt) => dt,
        None => {
            let mut m = f64::INFINITY;
            for f in fields {
                m = m.min(0.8 * stable_dt(spec, f, epsilon, block.cfl)?);
            }
            m.min(0.1 * t_end)
        }
    };
    let steps = (t_end / raw).ceil().max(1.0) as usize;
    Ok((t_end / steps as f64, steps))
}

fn snapshot_stride(steps: usize, snapshots: usize) -> usize {
    steps.div_ceil(snapshots.max(1)).max(1)
}

/// Snapshot times must agree to rounding for paired diagnostics.
fn aligned(a: &Trajectory, b: &Trajectory) -> bool {
    a.times.len() == b.times.len()
        && a.times
            .iter()
            .zip(&b.times)
            .all(|(x, y)| (x - y).abs() <= 1e-10 * x.abs().max(1.0))
}

/// Order `−d log y / d log x` by least squares; `None` with fewer than two
/// positive points.
fn fitted_order(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .unzip();
    if lx.len() < 2 || lx.len() != xs.len() {
        return None;
    }
    Some(-least_squares(&lx, &ly).0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shared_dt_divides_t_end() {
        let law = crate::systems::make_scalar_sanity();
        let g = Grid1D::new(32, 2.0 * PI).unwrap();
        let f = Field::new(g, (0..32).map(|i| State::from_element(1, g.center(i).sin())).collect(), 0.0).unwrap();
        let (dt, steps) = shared_dt(&law, &[&f], &SolverBlock::default(), 0.1, 0.7).unwrap();
        assert!((dt * steps as f64 - 0.7).abs() < 1e-14);
        assert!(dt <= 0.8 * stable_dt(&law, &f, 0.1, 0.4).unwrap());
    }

    #[test]
    fn bump_peaks_at_center() {
        let p = Perturbation::default();
        let g = Grid1D::new(64, 2.0 * PI).unwrap();
        let b = p.profile(1e-3, &g, 2);
        let peak = b.iter().map(|v| v[0]).fold(0.0, f64::max);
        assert!((peak - 1e-3).abs() < 1e-5);
        assert_eq!(b[0][0], b[0][1]);
    }

    #[test]
    fn order_of_a_power_law() {
        let xs = [64.0, 128.0, 256.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-2.0)).collect();
        assert!((fitted_order(&xs, &ys).unwrap() - 2.0).abs() < 1e-12);
        assert!(fitted_order(&xs, &[0.0, 0.0, 0.0]).is_none());
    }
}
