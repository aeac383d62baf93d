//! Central finite-difference synthesis of every derivative slot.
//!
//! First derivatives use the step `ε_mach^(1/3)·(1+|c|)`; second and mixed
//! derivatives use `ε_mach^(1/4)·(1+|c|)` so that rounding stays below the
//! truncation error of the three/four-point stencils.

use super::{BalanceLaw, Closures, DerivativeMode, SharedLaw};
use crate::error::Result;
use crate::linalg::{Hessians, Mat, MatrixGradient, State};

fn step1(c: f64) -> f64 {
    f64::EPSILON.cbrt() * (1.0 + c.abs())
}

fn step2(c: f64) -> f64 {
    f64::EPSILON.powf(0.25) * (1.0 + c.abs())
}

/// Values that can be combined in a difference quotient.
trait Diff: Sized {
    fn diff(plus: &Self, minus: &Self, scale: f64) -> Self;
}

impl Diff for f64 {
    fn diff(plus: &Self, minus: &Self, scale: f64) -> Self {
        (plus - minus) * scale
    }
}

impl Diff for State {
    fn diff(plus: &Self, minus: &Self, scale: f64) -> Self {
        (plus - minus) * scale
    }
}

impl Diff for Mat {
    fn diff(plus: &Self, minus: &Self, scale: f64) -> Self {
        (plus - minus) * scale
    }
}

fn shifted(u: &State, k: usize, h: f64) -> State {
    let mut v = u.clone();
    v[k] += h;
    v
}

fn partial_u<T: Diff>(f: impl Fn(&State) -> T, u: &State, k: usize, h: f64) -> T {
    T::diff(&f(&shifted(u, k, h)), &f(&shifted(u, k, -h)), 0.5 / h)
}

fn partial_x<T: Diff>(f: impl Fn(&[f64]) -> T, x: &[f64], alpha: usize, h: f64) -> T {
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    xp[alpha] += h;
    xm[alpha] -= h;
    T::diff(&f(&xp), &f(&xm), 0.5 / h)
}

fn partial_t<T: Diff>(f: impl Fn(f64) -> T, t: f64, h: f64) -> T {
    T::diff(&f(t + h), &f(t - h), 0.5 / h)
}

fn jacobian(f: impl Fn(&State) -> State, u: &State) -> Mat {
    let n = u.len();
    let mut cols = Vec::with_capacity(n);
    for k in 0..n {
        cols.push(partial_u(&f, u, k, step1(u[k])));
    }
    Mat::from_columns(&cols)
}

fn gradient(f: impl Fn(&State) -> f64, u: &State) -> State {
    State::from_iterator(u.len(), (0..u.len()).map(|k| partial_u(&f, u, k, step1(u[k]))))
}

/// Hessians of each component of a vector map, by three/four-point stencils.
fn hessians(f: impl Fn(&State) -> State, u: &State) -> Hessians {
    let n = u.len();
    let f0 = f(u);
    let m = f0.len();
    let mut out = vec![Mat::zeros(n, n); m];
    for j in 0..n {
        let hj = step2(u[j]);
        let fp = f(&shifted(u, j, hj));
        let fm = f(&shifted(u, j, -hj));
        for i in 0..m {
            out[i][(j, j)] = (fp[i] - 2.0 * f0[i] + fm[i]) / (hj * hj);
        }
        for k in (j + 1)..n {
            let hk = step2(u[k]);
            let pp = f(&shifted(&shifted(u, j, hj), k, hk));
            let pm = f(&shifted(&shifted(u, j, hj), k, -hk));
            let mp = f(&shifted(&shifted(u, j, -hj), k, hk));
            let mm = f(&shifted(&shifted(u, j, -hj), k, -hk));
            for i in 0..m {
                let v = (pp[i] - pm[i] - mp[i] + mm[i]) / (4.0 * hj * hk);
                out[i][(j, k)] = v;
                out[i][(k, j)] = v;
            }
        }
    }
    out
}

/// A system whose derivative slots are all central finite differences of
/// the zeroth-order closures.
pub struct Synthesized<C> {
    core: C,
}

impl<C: Closures> Synthesized<C> {
    pub fn core(&self) -> &C {
        &self.core
    }
}

pub fn synthesize_derivatives<C: Closures>(core: C) -> Synthesized<C> {
    Synthesized { core }
}

impl<C: Closures> BalanceLaw for Synthesized<C> {
    fn name(&self) -> &str {
        self.core.name()
    }
    fn n(&self) -> usize {
        self.core.n()
    }
    fn d(&self) -> usize {
        self.core.d()
    }
    fn derivative_mode(&self) -> DerivativeMode {
        DerivativeMode::FiniteDifferenceSynthesized
    }
    fn check(&self, u: &State, x: &[f64], t: f64) -> Result<()> {
        self.core.check(u, x, t)
    }

    fn a(&self, u: &State, x: &[f64], t: f64) -> State {
        self.core.a(u, x, t)
    }
    fn da(&self, u: &State, x: &[f64], t: f64) -> Mat {
        jacobian(|v| self.core.a(v, x, t), u)
    }
    fn d2a(&self, u: &State, x: &[f64], t: f64) -> Hessians {
        hessians(|v| self.core.a(v, x, t), u)
    }
    fn a_t(&self, u: &State, x: &[f64], t: f64) -> State {
        partial_t(|s| self.core.a(u, x, s), t, step1(t))
    }

    fn flux(&self, alpha: usize, u: &State, x: &[f64], t: f64) -> State {
        self.core.flux(alpha, u, x, t)
    }
    fn dflux(&self, alpha: usize, u: &State, x: &[f64], t: f64) -> Mat {
        jacobian(|v| self.core.flux(alpha, v, x, t), u)
    }
    fn flux_x(&self, alpha: usize, u: &State, x: &[f64], t: f64) -> State {
        partial_x(|y| self.core.flux(alpha, u, y, t), x, alpha, step1(x[alpha]))
    }

    fn source(&self, u: &State, x: &[f64], t: f64) -> State {
        self.core.source(u, x, t)
    }

    fn eta(&self, u: &State, x: &[f64], t: f64) -> f64 {
        self.core.eta(u, x, t)
    }
    fn grad_eta(&self, u: &State, x: &[f64], t: f64) -> State {
        gradient(|v| self.core.eta(v, x, t), u)
    }
    fn hess_eta(&self, u: &State, x: &[f64], t: f64) -> Mat {
        hessians(|v| State::from_element(1, self.core.eta(v, x, t)), u).remove(0)
    }
    fn eta_t(&self, u: &State, x: &[f64], t: f64) -> f64 {
        partial_t(|s| self.core.eta(u, x, s), t, step1(t))
    }

    fn q(&self, alpha: usize, u: &State, x: &[f64], t: f64) -> f64 {
        self.core.q(alpha, u, x, t)
    }
    fn grad_q(&self, alpha: usize, u: &State, x: &[f64], t: f64) -> State {
        gradient(|v| self.core.q(alpha, v, x, t), u)
    }
    fn q_x(&self, alpha: usize, u: &State, x: &[f64], t: f64) -> f64 {
        partial_x(|y| self.core.q(alpha, u, y, t), x, alpha, step1(x[alpha]))
    }

    fn g(&self, u: &State, x: &[f64], t: f64) -> State {
        self.core.g(u, x, t)
    }
    fn dg(&self, u: &State, x: &[f64], t: f64) -> Mat {
        jacobian(|v| self.core.g(v, x, t), u)
    }
    fn d2g(&self, u: &State, x: &[f64], t: f64) -> Hessians {
        hessians(|v| self.core.g(v, x, t), u)
    }
    fn g_t(&self, u: &State, x: &[f64], t: f64) -> State {
        partial_t(|s| self.core.g(u, x, s), t, step1(t))
    }
    fn g_x(&self, alpha: usize, u: &State, x: &[f64], t: f64) -> State {
        partial_x(|y| self.core.g(u, y, t), x, alpha, step1(x[alpha]))
    }
    fn dg_x(&self, alpha: usize, u: &State, x: &[f64], t: f64) -> Mat {
        // mixed U/x derivative: both steps at the second-derivative scale
        let hx = step2(x[alpha]);
        let col = |y: &[f64]| {
            let n = u.len();
            let cols: Vec<State> = (0..n)
                .map(|k| partial_u(|v| self.core.g(v, y, t), u, k, step2(u[k])))
                .collect();
            Mat::from_columns(&cols)
        };
        partial_x(col, x, alpha, hx)
    }

    fn b(&self, alpha: usize, beta: usize, u: &State, x: &[f64], t: f64) -> Mat {
        self.core.b(alpha, beta, u, x, t)
    }
    fn db(&self, alpha: usize, beta: usize, u: &State, x: &[f64], t: f64) -> MatrixGradient {
        (0..u.len())
            .map(|k| partial_u(|v| self.core.b(alpha, beta, v, x, t), u, k, step1(u[k])))
            .collect()
    }
    fn b_x(&self, alpha: usize, beta: usize, u: &State, x: &[f64], t: f64) -> Mat {
        partial_x(|y| self.core.b(alpha, beta, u, y, t), x, alpha, step1(x[alpha]))
    }

    fn record_history(&self, t: f64, centers: &[f64], values: &[State], horizon: f64) -> Result<()> {
        self.core.record_history(t, centers, values, horizon)
    }
}

/// View of a full system through its zeroth-order closures only.
pub struct ZerothOrder(pub SharedLaw);

impl Closures for ZerothOrder {
    fn name(&self) -> &str {
        self.0.name()
    }
    fn n(&self) -> usize {
        self.0.n()
    }
    fn d(&self) -> usize {
        self.0.d()
    }
    fn check(&self, u: &State, x: &[f64], t: f64) -> Result<()> {
        self.0.check(u, x, t)
    }
    fn a(&self, u: &State, x: &[f64], t: f64) -> State {
        self.0.a(u, x, t)
    }
    fn flux(&self, alpha: usize, u: &State, x: &[f64], t: f64) -> State {
        self.0.flux(alpha, u, x, t)
    }
    fn source(&self, u: &State, x: &[f64], t: f64) -> State {
        self.0.source(u, x, t)
    }
    fn eta(&self, u: &State, x: &[f64], t: f64) -> f64 {
        self.0.eta(u, x, t)
    }
    fn q(&self, alpha: usize, u: &State, x: &[f64], t: f64) -> f64 {
        self.0.q(alpha, u, x, t)
    }
    fn g(&self, u: &State, x: &[f64], t: f64) -> State {
        self.0.g(u, x, t)
    }
    fn b(&self, alpha: usize, beta: usize, u: &State, x: &[f64], t: f64) -> Mat {
        self.0.b(alpha, beta, u, x, t)
    }
    fn record_history(&self, t: f64, centers: &[f64], values: &[State], horizon: f64) -> Result<()> {
        self.0.record_history(t, centers, values, horizon)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Result;
    use crate::linalg::state;

    /// f = u²/2, η = u²/2, A = e^x u.
    struct Poly;

    impl Closures for Poly {
        fn name(&self) -> &str {
            "poly"
        }
        fn n(&self) -> usize {
            1
        }
        fn check(&self, _u: &State, _x: &[f64], _t: f64) -> Result<()> {
            Ok(())
        }
        fn a(&self, u: &State, x: &[f64], _t: f64) -> State {
            u * x[0].exp()
        }
        fn flux(&self, _alpha: usize, u: &State, _x: &[f64], _t: f64) -> State {
            u.map(|v| 0.5 * v * v)
        }
        fn source(&self, u: &State, _x: &[f64], _t: f64) -> State {
            u * 0.0
        }
        fn eta(&self, u: &State, _x: &[f64], _t: f64) -> f64 {
            0.5 * u[0] * u[0]
        }
        fn q(&self, _alpha: usize, u: &State, _x: &[f64], _t: f64) -> f64 {
            u[0].powi(3) / 3.0
        }
        fn g(&self, u: &State, x: &[f64], _t: f64) -> State {
            u * (-x[0]).exp()
        }
        fn b(&self, _alpha: usize, _beta: usize, _u: &State, _x: &[f64], _t: f64) -> Mat {
            Mat::identity(1, 1)
        }
    }

    #[test]
    fn polynomial_derivatives() {
        let s = synthesize_derivatives(Poly);
        assert_eq!(s.derivative_mode(), DerivativeMode::FiniteDifferenceSynthesized);
        assert!((s.dflux(0, &state(&[3.0]), &[0.0], 0.0)[(0, 0)] - 3.0).abs() < 1e-6);
        assert!((s.hess_eta(&state(&[1.0]), &[0.0], 0.0)[(0, 0)] - 1.0).abs() < 1e-6);
        let u = state(&[1.0]);
        assert!(s.a_t(&u, &[0.0], 0.0)[0].abs() < 1e-12);
        assert!((s.da(&u, &[0.0], 0.0)[(0, 0)] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn mixed_slot_matches_closed_form() {
        // G = e^{-x} u  =>  ∂x ∇G = -e^{-x}
        let s = synthesize_derivatives(Poly);
        let v = s.dg_x(0, &state(&[0.7]), &[0.4], 0.0)[(0, 0)];
        assert!((v + (-0.4f64).exp()).abs() < 1e-7, "{v}");
    }
}
