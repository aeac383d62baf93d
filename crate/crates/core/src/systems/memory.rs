//! Scalar balance law with fading memory, written in resolvent form:
//!
//! ```text
//! ∂t u + ∂x f(u) + r(0) u − r(t) u + ∫₀ᵗ r'(t−τ) u(x,τ) dτ = ε ∂x² u
//! ```
//!
//! The history integral is frozen by [`BalanceLaw::record_history`] at the
//! start of every step so `P` keeps the `(U, x, t)` signature in between.

use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use super::BalanceLaw;
use crate::error::{Error, Result};
use crate::linalg::{Hessians, Mat, MatrixGradient, State};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum MemoryKernel {
    /// `k(t) = e^{−rate·t}`
    Exp { rate: f64 },
}

impl MemoryKernel {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            MemoryKernel::Exp { rate } => (-rate * t).exp(),
        }
    }

    pub fn sample(&self, t_end: f64, dt: f64) -> Vec<f64> {
        let steps = (t_end / dt).round() as usize;
        (0..=steps).map(|i| self.eval(i as f64 * dt)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarFlux {
    /// `f = u²/2`
    Burgers,
    /// `f = speed·u`
    Linear { speed: f64 },
}

impl ScalarFlux {
    fn f(&self, u: f64) -> f64 {
        match *self {
            ScalarFlux::Burgers => 0.5 * u * u,
            ScalarFlux::Linear { speed } => speed * u,
        }
    }
    fn df(&self, u: f64) -> f64 {
        match *self {
            ScalarFlux::Burgers => u,
            ScalarFlux::Linear { speed } => speed,
        }
    }
    /// Entropy flux for `η = u²/2`.
    fn q(&self, u: f64) -> f64 {
        match *self {
            ScalarFlux::Burgers => u * u * u / 3.0,
            ScalarFlux::Linear { speed } => 0.5 * speed * u * u,
        }
    }
}

/// Resolvent `r` of `k` on uniform stamps `0, dt, 2dt, …` with its derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolvent {
    pub r: Vec<f64>,
    pub r_prime: Vec<f64>,
    pub dt: f64,
}

impl Resolvent {
    pub fn t_max(&self) -> f64 {
        (self.r.len() - 1) as f64 * self.dt
    }

    fn interp(values: &[f64], dt: f64, t: f64) -> f64 {
        let s = (t / dt).max(0.0);
        let i = (s.floor() as usize).min(values.len().saturating_sub(2));
        if values.len() == 1 {
            return values[0];
        }
        let w = (s - i as f64).clamp(0.0, 1.0);
        values[i] * (1.0 - w) + values[i + 1] * w
    }

    pub fn r_at(&self, t: f64) -> f64 {
        Self::interp(&self.r, self.dt, t)
    }

    pub fn r_prime_at(&self, t: f64) -> f64 {
        Self::interp(&self.r_prime, self.dt, t)
    }
}

/// Solves `r + k∗r = k` with trapezoidal convolution.
pub fn resolvent_kernel(k: &[f64], dt: f64) -> Result<Resolvent> {
    if k.is_empty() {
        return Err(Error::Quadrature("empty kernel sample".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::Quadrature(format!("time step must be positive, got {dt}")));
    }
    let diag = 1.0 + 0.5 * dt * k[0];
    if diag.abs() < 1e-14 {
        return Err(Error::Quadrature("singular diagonal 1 + dt·k(0)/2 = 0".into()));
    }
    let mut r = Vec::with_capacity(k.len());
    r.push(k[0]);
    for n in 1..k.len() {
        let mut conv = 0.5 * k[n] * r[0];
        for j in 1..n {
            conv += k[n - j] * r[j];
        }
        r.push((k[n] - dt * conv) / diag);
    }
    let r_prime = derivative(&r, dt);
    Ok(Resolvent { r, r_prime, dt })
}

fn derivative(v: &[f64], dt: f64) -> Vec<f64> {
    let n = v.len();
    match n {
        0 | 1 => vec![0.0; n],
        2 => vec![(v[1] - v[0]) / dt; 2],
        _ => (0..n)
            .map(|i| {
                if i == 0 {
                    (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dt)
                } else if i == n - 1 {
                    (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * dt)
                } else {
                    (v[i + 1] - v[i - 1]) / (2.0 * dt)
                }
            })
            .collect(),
    }
}

/// Past states `u(·, τ)` on the active grid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HistoryBuffer {
    pub times: Vec<f64>,
    pub centers: Vec<f64>,
    pub snapshots: Vec<Vec<f64>>,
}

impl HistoryBuffer {
    pub fn push(&mut self, t: f64, centers: &[f64], values: &[f64]) -> Result<()> {
        if values.len() != centers.len() {
            return Err(Error::Quadrature("snapshot length does not match grid".into()));
        }
        if self.times.is_empty() {
            self.centers = centers.to_vec();
        } else if self.centers != centers {
            return Err(Error::Quadrature("snapshot grid differs from recorded grid".into()));
        }
        match self.times.last() {
            Some(&last) if t < last => {
                return Err(Error::Quadrature(format!("history stamp {t} precedes {last}")));
            }
            // re-recording the same stamp replaces it
            Some(&last) if t == last => {
                *self.snapshots.last_mut().unwrap() = values.to_vec();
                return Ok(());
            }
            _ => {}
        }
        self.times.push(t);
        self.snapshots.push(values.to_vec());
        Ok(())
    }

    pub fn covered(&self) -> f64 {
        self.times.last().copied().unwrap_or(f64::NEG_INFINITY)
    }

    /// `∫₀ᵗ r'(t−τ) u(x_i, τ) dτ` by the trapezoid rule on the recorded stamps.
    pub fn integral(&self, res: &Resolvent, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.centers.len()];
        if self.times.is_empty() || t <= 0.0 {
            return Ok(out);
        }
        if self.times[0] > 0.0 || self.covered() < t - 1e-12 * (1.0 + t) {
            return Err(Error::HistoryGap {
                t,
                covered: self.covered(),
            });
        }
        for w in 0..self.times.len() - 1 {
            let (t0, t1) = (self.times[w], self.times[w + 1]);
            if t0 >= t {
                break;
            }
            let h = t1 - t0;
            let k0 = res.r_prime_at(t - t0);
            let k1 = res.r_prime_at(t - t1);
            for (i, o) in out.iter_mut().enumerate() {
                *o += 0.5 * h * (k0 * self.snapshots[w][i] + k1 * self.snapshots[w + 1][i]);
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Default)]
struct Frozen {
    history: HistoryBuffer,
    integral: Vec<f64>,
    time: f64,
    horizon: f64,
}

#[derive(Debug)]
pub struct MemoryScalar {
    pub flux: ScalarFlux,
    pub kernel: MemoryKernel,
    pub resolvent: Resolvent,
    pub viscosity: f64,
    frozen: RwLock<Frozen>,
}

pub fn make_memory_scalar(flux: ScalarFlux, kernel: MemoryKernel, t_end: f64, dt: f64) -> Result<MemoryScalar> {
    let resolvent = resolvent_kernel(&kernel.sample(t_end, dt), dt)?;
    Ok(MemoryScalar {
        flux,
        kernel,
        resolvent,
        viscosity: 1.0,
        frozen: RwLock::new(Frozen::default()),
    })
}

impl MemoryScalar {
    pub fn history(&self) -> HistoryBuffer {
        self.frozen.read().unwrap().history.clone()
    }

    /// Drops all recorded history.
    pub fn reset(&self) {
        *self.frozen.write().unwrap() = Frozen::default();
    }

    /// Frozen history integral at the cell nearest to `x`.
    fn frozen_term(&self, x: f64) -> f64 {
        let fr = self.frozen.read().unwrap();
        let c = &fr.history.centers;
        if fr.integral.is_empty() {
            return 0.0;
        }
        let mut best = 0;
        let mut dist = f64::INFINITY;
        for (i, &ci) in c.iter().enumerate() {
            let d = (ci - x).abs();
            if d < dist {
                dist = d;
                best = i;
            }
        }
        fr.integral[best]
    }

    fn decay(&self, t: f64) -> f64 {
        self.resolvent.r[0] - self.resolvent.r_at(t)
    }
}

fn scalar(v: f64) -> State {
    State::from_element(1, v)
}

fn one_by_one(v: f64) -> Mat {
    Mat::from_element(1, 1, v)
}

impl BalanceLaw for MemoryScalar {
    fn name(&self) -> &str {
        "memory_scalar"
    }
    fn n(&self) -> usize {
        1
    }
    fn check(&self, u: &State, _x: &[f64], t: f64) -> Result<()> {
        if u.len() != 1 || !u[0].is_finite() {
            return Err(Error::domain("u", u.get(0).copied().unwrap_or(f64::NAN), f64::NEG_INFINITY));
        }
        if t > self.resolvent.t_max() * (1.0 + 1e-12) {
            return Err(Error::Quadrature(format!(
                "t = {t} beyond the sampled resolvent range {}",
                self.resolvent.t_max()
            )));
        }
        let fr = self.frozen.read().unwrap();
        let covered = if fr.history.times.is_empty() {
            0.0
        } else {
            fr.time + fr.horizon
        };
        if t > covered * (1.0 + 1e-12) + 1e-12 {
            return Err(Error::HistoryGap {
                t,
                covered: fr.history.covered().max(0.0),
            });
        }
        Ok(())
    }

    fn a(&self, u: &State, _x: &[f64], _t: f64) -> State {
        u.clone()
    }
    fn da(&self, _u: &State, _x: &[f64], _t: f64) -> Mat {
        one_by_one(1.0)
    }
    fn d2a(&self, _u: &State, _x: &[f64], _t: f64) -> Hessians {
        vec![one_by_one(0.0)]
    }
    fn a_t(&self, _u: &State, _x: &[f64], _t: f64) -> State {
        scalar(0.0)
    }

    fn flux(&self, _alpha: usize, u: &State, _x: &[f64], _t: f64) -> State {
        scalar(self.flux.f(u[0]))
    }
    fn dflux(&self, _alpha: usize, u: &State, _x: &[f64], _t: f64) -> Mat {
        one_by_one(self.flux.df(u[0]))
    }
    fn flux_x(&self, _alpha: usize, _u: &State, _x: &[f64], _t: f64) -> State {
        scalar(0.0)
    }

    fn source(&self, u: &State, x: &[f64], t: f64) -> State {
        scalar(self.decay(t) * u[0] + self.frozen_term(x[0]))
    }

    fn eta(&self, u: &State, _x: &[f64], _t: f64) -> f64 {
        0.5 * u[0] * u[0]
    }
    fn grad_eta(&self, u: &State, _x: &[f64], _t: f64) -> State {
        u.clone()
    }
    fn hess_eta(&self, _u: &State, _x: &[f64], _t: f64) -> Mat {
        one_by_one(1.0)
    }
    fn eta_t(&self, _u: &State, _x: &[f64], _t: f64) -> f64 {
        0.0
    }

    fn q(&self, _alpha: usize, u: &State, _x: &[f64], _t: f64) -> f64 {
        self.flux.q(u[0])
    }
    fn grad_q(&self, _alpha: usize, u: &State, _x: &[f64], _t: f64) -> State {
        scalar(u[0] * self.flux.df(u[0]))
    }
    fn q_x(&self, _alpha: usize, _u: &State, _x: &[f64], _t: f64) -> f64 {
        0.0
    }

    fn g(&self, u: &State, _x: &[f64], _t: f64) -> State {
        u.clone()
    }
    fn dg(&self, _u: &State, _x: &[f64], _t: f64) -> Mat {
        one_by_one(1.0)
    }
    fn d2g(&self, _u: &State, _x: &[f64], _t: f64) -> Hessians {
        vec![one_by_one(0.0)]
    }
    fn g_t(&self, _u: &State, _x: &[f64], _t: f64) -> State {
        scalar(0.0)
    }
    fn g_x(&self, _alpha: usize, _u: &State, _x: &[f64], _t: f64) -> State {
        scalar(0.0)
    }
    fn dg_x(&self, _alpha: usize, _u: &State, _x: &[f64], _t: f64) -> Mat {
        one_by_one(0.0)
    }

    fn b(&self, _alpha: usize, _beta: usize, _u: &State, _x: &[f64], _t: f64) -> Mat {
        one_by_one(self.viscosity)
    }
    fn db(&self, _alpha: usize, _beta: usize, _u: &State, _x: &[f64], _t: f64) -> MatrixGradient {
        vec![one_by_one(0.0)]
    }
    fn b_x(&self, _alpha: usize, _beta: usize, _u: &State, _x: &[f64], _t: f64) -> Mat {
        one_by_one(0.0)
    }

    fn record_history(&self, t: f64, centers: &[f64], values: &[State], horizon: f64) -> Result<()> {
        let vals: Vec<f64> = values.iter().map(|v| v[0]).collect();
        let mut fr = self.frozen.write().unwrap();
        fr.history.push(t, centers, &vals)?;
        fr.integral = fr.history.integral(&self.resolvent, t)?;
        fr.time = t;
        fr.horizon = horizon.max(0.0);
        Ok(())
    }
}
