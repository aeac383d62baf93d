//! Periodic 1-D method of lines for
//! `∂t A(U,x,t) + ∂x f(U,x,t) + P(U,x,t) = ε ∂x(B(U,x,t) ∂x U)`.
//!
//! The conserved variable `V = A(U,x,t)` is evolved; `U` is recovered per
//! cell by Newton inversion at the new stage time.

mod initial;
mod manufactured;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, spectral_radius, Mat, State};
use crate::systems::{invert_a_with, BalanceLaw};

pub use initial::InitialData;
pub use manufactured::{forcing, manufactured_forcing, Forced, Target, TrigComponent, TrigTarget};

pub const MIN_CELLS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub n: usize,
    pub length: f64,
}

impl Grid1D {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < MIN_CELLS {
            return Err(Error::config("grid.n", format!("need at least {MIN_CELLS} cells, got {n}")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::config("grid.length", "must be positive"));
        }
        Ok(Grid1D { n, length })
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx()
    }

    /// Right interface of cell `i`.
    pub fn interface(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.dx()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.center(i)).collect()
    }

    fn right(&self, i: usize) -> usize {
        (i + 1) % self.n
    }

    fn left(&self, i: usize) -> usize {
        (i + self.n - 1) % self.n
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: Grid1D,
    pub values: Vec<State>,
    pub t: f64,
}

impl Field {
    pub fn new(grid: Grid1D, values: Vec<State>, t: f64) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::config("field", format!("{} values for {} cells", values.len(), grid.n)));
        }
        Ok(Field { grid, values, t })
    }

    pub fn check(&self, spec: &dyn BalanceLaw) -> Result<()> {
        self.values.iter().enumerate().try_for_each(|(i, u)| {
            if u.len() != spec.n() {
                return Err(Error::config("field", format!("cell {i} has {} components, system has {}", u.len(), spec.n())).at_cell(i));
            }
            spec.check(u, &[self.grid.center(i)], self.t).map_err(|e| e.at_cell(i))
        })
    }

    pub fn conserved(&self, spec: &dyn BalanceLaw) -> Vec<State> {
        self.values
            .par_iter()
            .enumerate()
            .map(|(i, u)| spec.a(u, &[self.grid.center(i)], self.t))
            .collect()
    }

    /// `Σ A(U_i) Δx`, summed in cell order.
    pub fn total_conserved(&self, spec: &dyn BalanceLaw) -> State {
        let dx = self.grid.dx();
        self.conserved(spec)
            .into_iter()
            .fold(State::zeros(spec.n()), |acc, v| acc + v * dx)
    }

    /// `x, U_1..U_n` rows.
    pub fn csv_rows(&self) -> Vec<Vec<f64>> {
        self.values
            .iter()
            .enumerate()
            .map(|(i, u)| std::iter::once(self.grid.center(i)).chain(u.iter().copied()).collect())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Second-order central flux difference; for viscous or smooth runs.
    Central,
    #[default]
    LocalLaxFriedrichs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    #[default]
    SspRk2,
    Rk4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default = "d_cfl")]
    pub cfl: f64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub integrator: Integrator,
    pub t_end: f64,
    #[serde(default = "d_newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "d_newton_iters")]
    pub newton_iters: usize,
    /// Fixed step; adaptive `stable_dt` when absent. The last step is
    /// shortened to land on `t_end`.
    #[serde(default)]
    pub dt: Option<f64>,
    /// Snapshot every this many steps; the final state is always kept.
    #[serde(default = "d_every")]
    pub snapshot_every: usize,
    /// Upper bound on `dt` as a fraction of `t_end`, for runs with no wave
    /// speed and no viscosity.
    #[serde(default = "d_max_fraction")]
    pub max_dt_fraction: f64,
    #[serde(default = "d_max_steps")]
    pub max_steps: usize,
    #[serde(default)]
    pub manufactured: Option<TrigTarget>,
}

fn d_cfl() -> f64 {
    0.4
}
fn d_newton_tol() -> f64 {
    1e-12
}
fn d_newton_iters() -> usize {
    crate::systems::INVERSION_MAX_ITERS
}
fn d_every() -> usize {
    1
}
fn d_max_fraction() -> f64 {
    0.1
}
fn d_max_steps() -> usize {
    10_000_000
}

impl SolverConfig {
    pub fn new(t_end: f64) -> Self {
        SolverConfig {
            epsilon: 0.0,
            cfl: d_cfl(),
            scheme: Scheme::default(),
            integrator: Integrator::default(),
            t_end,
            newton_tol: d_newton_tol(),
            newton_iters: d_newton_iters(),
            dt: None,
            snapshot_every: d_every(),
            max_dt_fraction: d_max_fraction(),
            max_steps: d_max_steps(),
            manufactured: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::config("solver.epsilon", "must be finite and nonnegative"));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::config("solver.cfl", "must lie in (0, 1]"));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::config("solver.t_end", "must be finite and nonnegative"));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::config("solver.dt", "must be positive"));
            }
        }
        if self.snapshot_every == 0 {
            return Err(Error::config("solver.snapshot_every", "must be at least 1"));
        }
        if !(self.max_dt_fraction > 0.0) {
            return Err(Error::config("solver.max_dt_fraction", "must be positive"));
        }
        Ok(())
    }
}

/// `∇A⁻¹ M` without forming the inverse.
fn pull_back(da: &Mat, m: &Mat) -> Mat {
    if da.nrows() == 1 {
        return m / da[(0, 0)];
    }
    da.clone().lu().solve(m).unwrap_or_else(|| Mat::from_element(m.nrows(), m.ncols(), f64::INFINITY))
}

fn wave_speed(spec: &dyn BalanceLaw, u: &State, x: f64, t: f64) -> f64 {
    let xs = [x];
    spectral_radius(&pull_back(&spec.da(u, &xs, t), &spec.dflux(0, u, &xs, t)))
}

/// `dV/dt` per cell at the field's time stamp.
pub fn semidiscrete_rhs(spec: &dyn BalanceLaw, field: &Field, epsilon: f64, scheme: Scheme) -> Result<Vec<State>> {
    field.check(spec)?;
    Ok(rhs_unchecked(spec, field, epsilon, scheme))
}

fn rhs_unchecked(spec: &dyn BalanceLaw, field: &Field, epsilon: f64, scheme: Scheme) -> Vec<State> {
    let g = &field.grid;
    let (t, dx) = (field.t, g.dx());
    let u = &field.values;
    let fluxes: Vec<State> = u
        .par_iter()
        .enumerate()
        .map(|(i, ui)| spec.flux(0, ui, &[g.center(i)], t))
        .collect();
    // numerical flux at the right interface of each cell
    let numerical: Option<Vec<State>> = match scheme {
        Scheme::Central => None,
        Scheme::LocalLaxFriedrichs => {
            let v = field.conserved(spec);
            let speed: Vec<f64> = u
                .par_iter()
                .enumerate()
                .map(|(i, ui)| wave_speed(spec, ui, g.center(i), t))
                .collect();
            Some(
                (0..g.n)
                    .into_par_iter()
                    .map(|i| {
                        let r = g.right(i);
                        let s = speed[i].max(speed[r]);
                        (&fluxes[i] + &fluxes[r]) * 0.5 - (&v[r] - &v[i]) * (0.5 * s)
                    })
                    .collect(),
            )
        }
    };
    // viscous flux B_{i+½}(U_{i+1} − U_i)/Δx at the right interface
    let viscous: Option<Vec<State>> = (epsilon != 0.0).then(|| {
        (0..g.n)
            .into_par_iter()
            .map(|i| {
                let r = g.right(i);
                let xi = [g.interface(i)];
                let b = (spec.b(0, 0, &u[i], &xi, t) + spec.b(0, 0, &u[r], &xi, t)) * 0.5;
                b * (&u[r] - &u[i]) / dx
            })
            .collect()
    });
    (0..g.n)
        .into_par_iter()
        .map(|i| {
            let (l, r) = (g.left(i), g.right(i));
            let mut out = match &numerical {
                None => -(&fluxes[r] - &fluxes[l]) / (2.0 * dx),
                Some(h) => -(&h[i] - &h[l]) / dx,
            };
            out -= spec.source(&u[i], &[g.center(i)], t);
            if let Some(w) = &viscous {
                out += (&w[i] - &w[l]) * (epsilon / dx);
            }
            out
        })
        .collect()
}

/// `cfl·min(Δx/λ_max, Δx²/(2εβ_max))` with `λ` the spectral radius of
/// `∇A⁻¹∇f` and `β` the spectral norm of `∇A⁻¹B`. Infinite when both the
/// wave speed and the viscosity vanish.
pub fn stable_dt(spec: &dyn BalanceLaw, field: &Field, epsilon: f64, cfl: f64) -> Result<f64> {
    field.check(spec)?;
    Ok(stable_dt_unchecked(spec, field, epsilon, cfl))
}

fn stable_dt_unchecked(spec: &dyn BalanceLaw, field: &Field, epsilon: f64, cfl: f64) -> f64 {
    let g = &field.grid;
    let (lam, beta) = field
        .values
        .par_iter()
        .enumerate()
        .map(|(i, u)| {
            let xs = [g.center(i)];
            let da = spec.da(u, &xs, field.t);
            let lam = spectral_radius(&pull_back(&da, &spec.dflux(0, u, &xs, field.t)));
            let beta = if epsilon > 0.0 {
                spectral_norm(&pull_back(&da, &spec.b(0, 0, u, &xs, field.t)))
            } else {
                0.0
            };
            (lam, beta)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    let dx = g.dx();
    let hyper = if lam > 0.0 { dx / lam } else { f64::INFINITY };
    let visc = if epsilon * beta > 0.0 {
        dx * dx / (2.0 * epsilon * beta)
    } else {
        f64::INFINITY
    };
    cfl * hyper.min(visc)
}

fn invert_all(spec: &dyn BalanceLaw, v: &[State], guess: &Field, t: f64, cfg: &SolverConfig) -> Result<Field> {
    let g = guess.grid;
    let values = v
        .par_iter()
        .zip(guess.values.par_iter())
        .enumerate()
        .map(|(i, (vi, ui))| {
            invert_a_with(spec, vi, &[g.center(i)], t, ui, cfg.newton_tol, cfg.newton_iters).map_err(|e| e.at_cell(i))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Field { grid: g, values, t })
}

fn axpy(v: &[State], k: &[State], dt: f64) -> Vec<State> {
    v.iter().zip(k).map(|(a, b)| a + b * dt).collect()
}

/// One explicit step of size `dt`. Systems with memory must already have the
/// history recorded up to `field.t` with horizon at least `dt`.
pub fn time_step(spec: &dyn BalanceLaw, field: &Field, dt: f64, config: &SolverConfig) -> Result<Field> {
    field.check(spec)?;
    let (eps, scheme) = (config.epsilon, config.scheme);
    let t = field.t;
    let v0 = field.conserved(spec);
    let l0 = rhs_unchecked(spec, field, eps, scheme);
    match config.integrator {
        Integrator::SspRk2 => {
            let u1 = invert_all(spec, &axpy(&v0, &l0, dt), field, t + dt, config)?;
            let l1 = rhs_unchecked(spec, &u1, eps, scheme);
            let v1 = u1.conserved(spec);
            let v2: Vec<State> = v0
                .iter()
                .zip(&v1)
                .zip(&l1)
                .map(|((a, b), l)| (a + b + l * dt) * 0.5)
                .collect();
            invert_all(spec, &v2, &u1, t + dt, config)
        }
        Integrator::Rk4 => {
            let h = 0.5 * dt;
            let u1 = invert_all(spec, &axpy(&v0, &l0, h), field, t + h, config)?;
            let l1 = rhs_unchecked(spec, &u1, eps, scheme);
            let u2 = invert_all(spec, &axpy(&v0, &l1, h), &u1, t + h, config)?;
            let l2 = rhs_unchecked(spec, &u2, eps, scheme);
            let u3 = invert_all(spec, &axpy(&v0, &l2, dt), &u2, t + dt, config)?;
            let l3 = rhs_unchecked(spec, &u3, eps, scheme);
            let v4: Vec<State> = (0..v0.len())
                .map(|i| &v0[i] + (&l0[i] + (&l1[i] + &l2[i]) * 2.0 + &l3[i]) * (dt / 6.0))
                .collect();
            invert_all(spec, &v4, &u3, t + dt, config)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepFailure {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub fields: Vec<Field>,
    /// Every accepted step, not only the snapshot ones.
    pub dts: Vec<f64>,
    pub failure: Option<StepFailure>,
}

impl Trajectory {
    pub fn last(&self) -> &Field {
        self.fields.last().expect("trajectory has at least the initial snapshot")
    }

    pub fn into_result(self) -> Result<Self> {
        match &self.failure {
            None => Ok(self),
            Some(f) => Err(Error::Ledger(format!("solve aborted at step {} (t = {}): {}", f.step, f.t, f.message))),
        }
    }
}

pub fn solve(spec: &dyn BalanceLaw, initial: &Field, config: &SolverConfig) -> Result<Trajectory> {
    solve_with(spec, initial, config, |_| {})
}

/// As [`solve`], calling `hook` on every snapshot.
pub fn solve_with(
    spec: &dyn BalanceLaw,
    initial: &Field,
    config: &SolverConfig,
    mut hook: impl FnMut(&Field),
) -> Result<Trajectory> {
    config.validate()?;
    if let Some(target) = &config.manufactured {
        if target.components.len() != spec.n() {
            return Err(Error::config(
                "solver.manufactured.components",
                format!("{} components for a system with {}", target.components.len(), spec.n()),
            ));
        }
        let target: Arc<dyn Target> = Arc::new(target.clone());
        let forced = manufactured_forcing(spec, target, config.epsilon);
        let mut cfg = config.clone();
        cfg.manufactured = None;
        return solve_with(&forced, initial, &cfg, hook);
    }
    let t_end = config.t_end;
    let cap = config.max_dt_fraction * t_end;
    let first_dt = config
        .dt
        .unwrap_or_else(|| stable_dt_unchecked(spec, initial, config.epsilon, config.cfl))
        .min(cap)
        .min((t_end - initial.t).max(0.0));
    spec.record_history(initial.t, &initial.grid.centers(), &initial.values, first_dt)?;
    initial.check(spec)?;

    let mut traj = Trajectory {
        times: vec![initial.t],
        fields: vec![initial.clone()],
        dts: Vec::new(),
        failure: None,
    };
    hook(initial);
    let mut field = initial.clone();
    let mut step = 0usize;
    let centers = initial.grid.centers();
    // relative slack so that accumulated rounding does not leave a sliver step
    let done = |t: f64| t >= t_end - 1e-12 * t_end.max(1.0);
    while !done(field.t) {
        if step >= config.max_steps {
            traj.failure = Some(StepFailure {
                step,
                t: field.t,
                dt: 0.0,
                message: format!("step budget {} exhausted", config.max_steps),
            });
            break;
        }
        let mut dt = config
            .dt
            .unwrap_or_else(|| stable_dt_unchecked(spec, &field, config.epsilon, config.cfl))
            .min(cap);
        if !(dt > 0.0 && dt.is_finite()) {
            traj.failure = Some(StepFailure {
                step,
                t: field.t,
                dt,
                message: "non-positive or non-finite time step".into(),
            });
            break;
        }
        let landing = field.t + dt >= t_end || done(field.t + dt);
        if landing {
            dt = t_end - field.t;
        }
        let next = spec
            .record_history(field.t, &centers, &field.values, dt)
            .and_then(|_| time_step(spec, &field, dt, config));
        match next {
            Ok(mut f) => {
                if landing {
                    f.t = t_end;
                }
                field = f;
                step += 1;
                traj.dts.push(dt);
                let keep = landing || step % config.snapshot_every == 0;
                if let Err(e) = spec.record_history(field.t, &centers, &field.values, 0.0) {
                    traj.failure = Some(StepFailure {
                        step,
                        t: field.t,
                        dt,
                        message: e.to_string(),
                    });
                    break;
                }
                if keep {
                    hook(&field);
                    traj.times.push(field.t);
                    traj.fields.push(field.clone());
                }
            }
            Err(e) => {
                traj.failure = Some(StepFailure {
                    step,
                    t: field.t,
                    dt,
                    message: e.to_string(),
                });
                break;
            }
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::linalg::state;
    use crate::systems::{make_duct_gas, make_scalar_sanity, AreaProfile, DuctGas};

    fn sine_field(n: usize, amp: f64) -> Field {
        let g = Grid1D::new(n, 2.0 * PI).unwrap();
        let v = (0..n).map(|i| state(&[amp * g.center(i).sin()])).collect();
        Field::new(g, v, 0.0).unwrap()
    }

    #[test]
    fn grid_needs_eight_cells() {
        assert!(Grid1D::new(7, 1.0).is_err());
        let g = Grid1D::new(8, 2.0).unwrap();
        assert_eq!(g.dx(), 0.25);
        assert_eq!(g.center(0), 0.125);
    }

    #[test]
    fn constant_field_has_zero_rhs() {
        let s = make_scalar_sanity();
        let g = Grid1D::new(16, 1.0).unwrap();
        let f = Field::new(g, vec![state(&[0.7]); 16], 0.0).unwrap();
        for scheme in [Scheme::Central, Scheme::LocalLaxFriedrichs] {
            let r = semidiscrete_rhs(&s, &f, 0.5, scheme).unwrap();
            assert!(r.iter().all(|v| v[0] == 0.0));
        }
    }

    #[test]
    fn central_burgers_rhs_is_second_order() {
        let s = make_scalar_sanity();
        let err = |n: usize| {
            let f = sine_field(n, 1.0);
            let r = semidiscrete_rhs(&s, &f, 0.0, Scheme::Central).unwrap();
            (0..n)
                .map(|i| {
                    let x = f.grid.center(i);
                    (r[i][0] + x.sin() * x.cos()).abs()
                })
                .fold(0.0, f64::max)
        };
        let ratio = err(64) / err(128);
        assert!((ratio - 4.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn discrete_laplacian_is_second_order() {
        // f = P = 0 via the linear transport law with zero speed
        struct Heat;
        impl crate::systems::Closures for Heat {
            fn name(&self) -> &str {
                "heat"
            }
            fn n(&self) -> usize {
                1
            }
            fn check(&self, _u: &State, _x: &[f64], _t: f64) -> Result<()> {
                Ok(())
            }
            fn a(&self, u: &State, _x: &[f64], _t: f64) -> State {
                u.clone()
            }
            fn flux(&self, _a: usize, _u: &State, _x: &[f64], _t: f64) -> State {
                state(&[0.0])
            }
            fn source(&self, _u: &State, _x: &[f64], _t: f64) -> State {
                state(&[0.0])
            }
            fn eta(&self, u: &State, _x: &[f64], _t: f64) -> f64 {
                0.5 * u[0] * u[0]
            }
            fn q(&self, _a: usize, _u: &State, _x: &[f64], _t: f64) -> f64 {
                0.0
            }
            fn g(&self, u: &State, _x: &[f64], _t: f64) -> State {
                u.clone()
            }
            fn b(&self, _a: usize, _b: usize, _u: &State, _x: &[f64], _t: f64) -> Mat {
                Mat::identity(1, 1)
            }
        }
        let s = crate::systems::synthesize_derivatives(Heat);
        let err = |n: usize| {
            let f = sine_field(n, 1.0);
            let r = semidiscrete_rhs(&s, &f, 1.0, Scheme::Central).unwrap();
            (0..n)
                .map(|i| (r[i][0] + f.grid.center(i).sin()).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(64) / err(128);
        assert!((ratio - 4.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn stable_dt_for_unit_speed() {
        let s = make_scalar_sanity();
        let f = sine_field(64, 1.0);
        let dt = stable_dt(&s, &f, 0.0, 0.4).unwrap();
        let lam = f.values.iter().map(|u| u[0].abs()).fold(0.0, f64::max);
        assert!((dt - 0.4 * f.grid.dx() / lam).abs() < 1e-15);
        // parabolic limit quarters when Δx halves
        let d1 = stable_dt(&s, &sine_field(64, 1e-9), 100.0, 0.4).unwrap();
        let d2 = stable_dt(&s, &sine_field(128, 1e-9), 100.0, 0.4).unwrap();
        assert!((d1 / d2 - 4.0).abs() < 1e-6);
    }

    #[test]
    fn zero_speed_and_viscosity_is_capped_by_t_end() {
        let s = make_scalar_sanity();
        let f = sine_field(16, 0.0);
        assert_eq!(stable_dt(&s, &f, 0.0, 0.4).unwrap(), f64::INFINITY);
        let tr = solve(&s, &f, &SolverConfig::new(1.0)).unwrap();
        assert_eq!(tr.dts.len(), 10);
        assert_eq!(tr.last().values, f.values);
    }

    #[test]
    fn t_end_zero_keeps_one_snapshot() {
        let s = make_scalar_sanity();
        let tr = solve(&s, &sine_field(16, 0.5), &SolverConfig::new(0.0)).unwrap();
        assert_eq!(tr.fields.len(), 1);
        assert!(tr.dts.is_empty());
    }

    #[test]
    fn weighted_area_with_no_flux_keeps_u() {
        // A = a(x)u with f = P = 0: V is frozen and inversion returns U
        let mut s = DuctGas::weighted(1.0, 2.0, AreaProfile::sin(2.0, 0.3));
        s.kappa = 0.0;
        let g = Grid1D::new(16, 2.0 * PI).unwrap();
        let u0 = state(&[1.0, 0.0]);
        let f = Field::new(g, vec![u0.clone(); 16], 0.0).unwrap();
        let mut cfg = SolverConfig::new(0.5);
        cfg.dt = Some(0.05);
        let tr = solve(&s, &f, &cfg).unwrap();
        assert!(tr.failure.is_none());
        for u in &tr.last().values {
            assert!((u - &u0).amax() < 1e-12);
        }
    }

    #[test]
    fn llf_conserves_total() {
        let s = make_scalar_sanity();
        let f = sine_field(64, 1.0);
        let mut cfg = SolverConfig::new(0.5);
        cfg.scheme = Scheme::LocalLaxFriedrichs;
        let tr = solve(&s, &f, &cfg).unwrap();
        let m0 = f.total_conserved(&s)[0];
        for w in tr.fields.windows(2) {
            let d = w[1].total_conserved(&s)[0] - w[0].total_conserved(&s)[0];
            assert!(d.abs() <= 1e-12, "{d}");
        }
        assert!((tr.last().total_conserved(&s)[0] - m0).abs() < 1e-11);
    }

    #[test]
    fn duct_constant_state_follows_source_ode() {
        // a′ ≠ 0 makes P nonzero on a constant state; with the weighted form
        // and zero flux gradient in x only the source and f_x move V
        let s = make_duct_gas(1.0, 2.0, AreaProfile::sin(2.0, 0.3));
        let g = Grid1D::new(32, 2.0 * PI).unwrap();
        let u0 = state(&[1.0, 0.2]);
        let f = Field::new(g, vec![u0.clone(); 32], 0.0).unwrap();
        let (dt, t_end) = (1e-3, 0.05);
        let mut cfg = SolverConfig::new(t_end);
        cfg.dt = Some(dt);
        cfg.scheme = Scheme::Central;
        let tr = solve(&s, &f, &cfg).unwrap().into_result().unwrap();
        // per-cell ODE oracle: with a constant state the central flux
        // difference vanishes, so dU/dt = −P(U, x)
        for i in [0, 7, 19] {
            let x = [g.center(i)];
            let mut u = u0.clone();
            let h = dt / 50.0;
            for _ in 0..(t_end / h).round() as usize {
                let k1 = -s.source(&u, &x, 0.0);
                let k2 = -s.source(&(&u + &k1 * (0.5 * h)), &x, 0.0);
                let k3 = -s.source(&(&u + &k2 * (0.5 * h)), &x, 0.0);
                let k4 = -s.source(&(&u + &k3 * h), &x, 0.0);
                u += (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
            }
            // flux differences only enter once U varies in x: O(t²)
            let got = &tr.last().values[i];
            assert!((got - &u).amax() < 5e-3, "{i}: {got} vs {u}");
        }
    }

    #[test]
    fn inadmissible_cell_reports_index() {
        let s = make_duct_gas(1.0, 2.0, AreaProfile::Constant(1.0));
        let g = Grid1D::new(8, 1.0).unwrap();
        let mut v = vec![state(&[1.0, 0.0]); 8];
        v[5] = state(&[-1.0, 0.0]);
        let f = Field::new(g, v, 0.0).unwrap();
        match semidiscrete_rhs(&s, &f, 0.0, Scheme::Central) {
            Err(Error::Cell { cell, .. }) => assert_eq!(cell, 5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn burgers_characteristics_refinement() {
        // u0 = 0.5 sin x, t = 0.5 (shock at t = 2): exact u solves u = u0(x − u t)
        let s = make_scalar_sanity();
        let exact = |x: f64, t: f64| {
            let mut u = 0.5 * x.sin();
            for _ in 0..100 {
                u = 0.5 * (x - u * t).sin();
            }
            u
        };
        let err = |n: usize| {
            let f = sine_field(n, 0.5);
            let mut cfg = SolverConfig::new(0.5);
            cfg.scheme = Scheme::Central;
            cfg.integrator = Integrator::Rk4;
            cfg.epsilon = 0.0;
            cfg.dt = Some(0.2 * f.grid.dx());
            let tr = solve(&s, &f, &cfg).unwrap().into_result().unwrap();
            let last = tr.last();
            let dx = last.grid.dx();
            (0..n)
                .map(|i| (last.values[i][0] - exact(last.grid.center(i), 0.5)).powi(2) * dx)
                .sum::<f64>()
                .sqrt()
        };
        let ratio = err(64) / err(128);
        assert!(ratio > 3.5 && ratio < 4.5, "{ratio}");
    }
}
