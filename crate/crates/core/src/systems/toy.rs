//! Small analytic systems used to exercise the audit and identity code:
//! deliberately broken wrappers and one fully inhomogeneous scalar law.

use super::{BalanceLaw, SharedLaw};
use crate::error::{Error, Result};
use crate::linalg::{Hessians, Mat, MatrixGradient, State};

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*) -> $ret:ty;)*) => {
        $(fn $name(&self, $($arg: $ty),*) -> $ret {
            self.0.$name($($arg),*)
        })*
    };
}

/// Forwards every slot except the name, entropy pair and multiplier to `self.0`.
macro_rules! delegate_constitutive {
    () => {
        fn n(&self) -> usize {
            self.0.n()
        }
        fn d(&self) -> usize {
            self.0.d()
        }
        fn derivative_mode(&self) -> $crate::systems::DerivativeMode {
            self.0.derivative_mode()
        }
        fn record_history(
            &self,
            t: f64,
            centers: &[f64],
            values: &[$crate::linalg::State],
            horizon: f64,
        ) -> $crate::error::Result<()> {
            self.0.record_history(t, centers, values, horizon)
        }
        $crate::systems::delegate! {
            check(u: &$crate::linalg::State, x: &[f64], t: f64) -> $crate::error::Result<()>;
            a(u: &$crate::linalg::State, x: &[f64], t: f64) -> $crate::linalg::State;
            da(u: &$crate::linalg::State, x: &[f64], t: f64) -> $crate::linalg::Mat;
            d2a(u: &$crate::linalg::State, x: &[f64], t: f64) -> $crate::linalg::Hessians;
            a_t(u: &$crate::linalg::State, x: &[f64], t: f64) -> $crate::linalg::State;
            flux(alpha: usize, u: &$crate::linalg::State, x: &[f64], t: f64) -> $crate::linalg::State;
            dflux(alpha: usize, u: &$crate::linalg::State, x: &[f64], t: f64) -> $crate::linalg::Mat;
            flux_x(alpha: usize, u: &$crate::linalg::State, x: &[f64], t: f64) -> $crate::linalg::State;
            source(u: &$crate::linalg::State, x: &[f64], t: f64) -> $crate::linalg::State;
            b(alpha: usize, beta: usize, u: &$crate::linalg::State, x: &[f64], t: f64) -> $crate::linalg::Mat;
            db(alpha: usize, beta: usize, u: &$crate::linalg::State, x: &[f64], t: f64) -> $crate::linalg::MatrixGradient;
            b_x(alpha: usize, beta: usize, u: &$crate::linalg::State, x: &[f64], t: f64) -> $crate::linalg::Mat;
        }
    };
}

pub(crate) use delegate;

/// Flips the sign of the entropy pair and multiplier. Convexity fails.
pub struct NegatedEntropy(pub SharedLaw);

impl BalanceLaw for NegatedEntropy {
    fn name(&self) -> &str {
        "negated_entropy"
    }
    delegate_constitutive!();

    fn eta(&self, u: &State, x: &[f64], t: f64) -> f64 {
        -self.0.eta(u, x, t)
    }
    fn grad_eta(&self, u: &State, x: &[f64], t: f64) -> State {
        -self.0.grad_eta(u, x, t)
    }
    fn hess_eta(&self, u: &State, x: &[f64], t: f64) -> Mat {
        -self.0.hess_eta(u, x, t)
    }
    fn eta_t(&self, u: &State, x: &[f64], t: f64) -> f64 {
        -self.0.eta_t(u, x, t)
    }
    fn q(&self, alpha: usize, u: &State, x: &[f64], t: f64) -> f64 {
        -self.0.q(alpha, u, x, t)
    }
    fn grad_q(&self, alpha: usize, u: &State, x: &[f64], t: f64) -> State {
        -self.0.grad_q(alpha, u, x, t)
    }
    fn q_x(&self, alpha: usize, u: &State, x: &[f64], t: f64) -> f64 {
        -self.0.q_x(alpha, u, x, t)
    }
    fn g(&self, u: &State, x: &[f64], t: f64) -> State {
        -self.0.g(u, x, t)
    }
    fn dg(&self, u: &State, x: &[f64], t: f64) -> Mat {
        -self.0.dg(u, x, t)
    }
    fn d2g(&self, u: &State, x: &[f64], t: f64) -> Hessians {
        self.0.d2g(u, x, t).into_iter().map(|m| -m).collect()
    }
    fn g_t(&self, u: &State, x: &[f64], t: f64) -> State {
        -self.0.g_t(u, x, t)
    }
    fn g_x(&self, alpha: usize, u: &State, x: &[f64], t: f64) -> State {
        -self.0.g_x(alpha, u, x, t)
    }
    fn dg_x(&self, alpha: usize, u: &State, x: &[f64], t: f64) -> Mat {
        -self.0.dg_x(alpha, u, x, t)
    }
}

/// Keeps η and G but drops the entropy flux, so `∇q = G·∇f` fails.
pub struct ZeroEntropyFlux(pub SharedLaw);

impl BalanceLaw for ZeroEntropyFlux {
    fn name(&self) -> &str {
        "zero_entropy_flux"
    }
    delegate_constitutive!();
    delegate! {
        eta(u: &State, x: &[f64], t: f64) -> f64;
        grad_eta(u: &State, x: &[f64], t: f64) -> State;
        hess_eta(u: &State, x: &[f64], t: f64) -> Mat;
        eta_t(u: &State, x: &[f64], t: f64) -> f64;
        g(u: &State, x: &[f64], t: f64) -> State;
        dg(u: &State, x: &[f64], t: f64) -> Mat;
        d2g(u: &State, x: &[f64], t: f64) -> Hessians;
        g_t(u: &State, x: &[f64], t: f64) -> State;
        g_x(alpha: usize, u: &State, x: &[f64], t: f64) -> State;
        dg_x(alpha: usize, u: &State, x: &[f64], t: f64) -> Mat;
    }

    fn q(&self, _alpha: usize, _u: &State, _x: &[f64], _t: f64) -> f64 {
        0.0
    }
    fn grad_q(&self, _alpha: usize, u: &State, _x: &[f64], _t: f64) -> State {
        State::zeros(u.len())
    }
    fn q_x(&self, _alpha: usize, _u: &State, _x: &[f64], _t: f64) -> f64 {
        0.0
    }
}

/// Scalar law with every coefficient depending on `x` and `t`:
///
/// ```text
/// s(u) = u + u³/3        A = a(x) s(u)          η = b(x,t) A²/2
/// G = b A                f = c(x,t) A            q = c η
/// P = (0.5 + 0.2 sin x) u                        B = (1 + u²/2)(1 + 0.3 cos x)
/// a = 2 + sin x,  b = 1 + 0.3 cos x + 0.2 t,  c = 1 + 0.5 sin(x + t)
/// ```
#[derive(Debug, Clone, Copy, Default)]
pub struct WarpedScalar;

struct Coef {
    a: f64,
    a_x: f64,
    b: f64,
    b_x: f64,
    b_t: f64,
    c: f64,
    c_x: f64,
}

fn coef(x: f64, t: f64) -> Coef {
    Coef {
        a: 2.0 + x.sin(),
        a_x: x.cos(),
        b: 1.0 + 0.3 * x.cos() + 0.2 * t,
        b_x: -0.3 * x.sin(),
        b_t: 0.2,
        c: 1.0 + 0.5 * (x + t).sin(),
        c_x: 0.5 * (x + t).cos(),
    }
}

/// `(s, s', s'')`
fn warp(u: f64) -> (f64, f64, f64) {
    (u + u * u * u / 3.0, 1.0 + u * u, 2.0 * u)
}

fn scalar(v: f64) -> State {
    State::from_element(1, v)
}

fn one_by_one(v: f64) -> Mat {
    Mat::from_element(1, 1, v)
}

impl BalanceLaw for WarpedScalar {
    fn name(&self) -> &str {
        "warped_scalar"
    }
    fn n(&self) -> usize {
        1
    }
    fn check(&self, u: &State, _x: &[f64], t: f64) -> Result<()> {
        if u.len() != 1 || !u[0].is_finite() {
            return Err(Error::domain("u", u.get(0).copied().unwrap_or(f64::NAN), f64::NEG_INFINITY));
        }
        // b must stay positive for η to be convex
        if t < 0.0 {
            return Err(Error::domain("t", t, 0.0));
        }
        Ok(())
    }

    fn a(&self, u: &State, x: &[f64], t: f64) -> State {
        scalar(coef(x[0], t).a * warp(u[0]).0)
    }
    fn da(&self, u: &State, x: &[f64], t: f64) -> Mat {
        one_by_one(coef(x[0], t).a * warp(u[0]).1)
    }
    fn d2a(&self, u: &State, x: &[f64], t: f64) -> Hessians {
        vec![one_by_one(coef(x[0], t).a * warp(u[0]).2)]
    }
    fn a_t(&self, _u: &State, _x: &[f64], _t: f64) -> State {
        scalar(0.0)
    }

    fn flux(&self, _alpha: usize, u: &State, x: &[f64], t: f64) -> State {
        let k = coef(x[0], t);
        scalar(k.c * k.a * warp(u[0]).0)
    }
    fn dflux(&self, _alpha: usize, u: &State, x: &[f64], t: f64) -> Mat {
        let k = coef(x[0], t);
        one_by_one(k.c * k.a * warp(u[0]).1)
    }
    fn flux_x(&self, _alpha: usize, u: &State, x: &[f64], t: f64) -> State {
        let k = coef(x[0], t);
        scalar((k.c_x * k.a + k.c * k.a_x) * warp(u[0]).0)
    }

    fn source(&self, u: &State, x: &[f64], _t: f64) -> State {
        scalar((0.5 + 0.2 * x[0].sin()) * u[0])
    }

    fn eta(&self, u: &State, x: &[f64], t: f64) -> f64 {
        let k = coef(x[0], t);
        let s = warp(u[0]).0;
        0.5 * k.b * k.a * k.a * s * s
    }
    fn grad_eta(&self, u: &State, x: &[f64], t: f64) -> State {
        let k = coef(x[0], t);
        let (s, s1, _) = warp(u[0]);
        scalar(k.b * k.a * k.a * s * s1)
    }
    fn hess_eta(&self, u: &State, x: &[f64], t: f64) -> Mat {
        let k = coef(x[0], t);
        let (s, s1, s2) = warp(u[0]);
        one_by_one(k.b * k.a * k.a * (s1 * s1 + s * s2))
    }
    fn eta_t(&self, u: &State, x: &[f64], t: f64) -> f64 {
        let k = coef(x[0], t);
        let s = warp(u[0]).0;
        0.5 * k.b_t * k.a * k.a * s * s
    }

    fn q(&self, _alpha: usize, u: &State, x: &[f64], t: f64) -> f64 {
        let k = coef(x[0], t);
        let s = warp(u[0]).0;
        0.5 * k.c * k.b * k.a * k.a * s * s
    }
    fn grad_q(&self, _alpha: usize, u: &State, x: &[f64], t: f64) -> State {
        let k = coef(x[0], t);
        let (s, s1, _) = warp(u[0]);
        scalar(k.c * k.b * k.a * k.a * s * s1)
    }
    fn q_x(&self, _alpha: usize, u: &State, x: &[f64], t: f64) -> f64 {
        let k = coef(x[0], t);
        let s = warp(u[0]).0;
        let cba2_x = k.c_x * k.b * k.a * k.a + k.c * k.b_x * k.a * k.a + 2.0 * k.c * k.b * k.a * k.a_x;
        0.5 * cba2_x * s * s
    }

    fn g(&self, u: &State, x: &[f64], t: f64) -> State {
        let k = coef(x[0], t);
        scalar(k.b * k.a * warp(u[0]).0)
    }
    fn dg(&self, u: &State, x: &[f64], t: f64) -> Mat {
        let k = coef(x[0], t);
        one_by_one(k.b * k.a * warp(u[0]).1)
    }
    fn d2g(&self, u: &State, x: &[f64], t: f64) -> Hessians {
        let k = coef(x[0], t);
        vec![one_by_one(k.b * k.a * warp(u[0]).2)]
    }
    fn g_t(&self, u: &State, x: &[f64], t: f64) -> State {
        let k = coef(x[0], t);
        scalar(k.b_t * k.a * warp(u[0]).0)
    }
    fn g_x(&self, _alpha: usize, u: &State, x: &[f64], t: f64) -> State {
        let k = coef(x[0], t);
        scalar((k.b_x * k.a + k.b * k.a_x) * warp(u[0]).0)
    }
    fn dg_x(&self, _alpha: usize, u: &State, x: &[f64], t: f64) -> Mat {
        let k = coef(x[0], t);
        one_by_one((k.b_x * k.a + k.b * k.a_x) * warp(u[0]).1)
    }

    fn b(&self, _alpha: usize, _beta: usize, u: &State, x: &[f64], _t: f64) -> Mat {
        one_by_one((1.0 + 0.5 * u[0] * u[0]) * (1.0 + 0.3 * x[0].cos()))
    }
    fn db(&self, _alpha: usize, _beta: usize, u: &State, x: &[f64], _t: f64) -> MatrixGradient {
        vec![one_by_one(u[0] * (1.0 + 0.3 * x[0].cos()))]
    }
    fn b_x(&self, _alpha: usize, _beta: usize, u: &State, x: &[f64], _t: f64) -> Mat {
        one_by_one(-(1.0 + 0.5 * u[0] * u[0]) * 0.3 * x[0].sin())
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::linalg::state;
    use crate::systems::make_scalar_sanity;

    #[test]
    fn negated_entropy_flips_sign() {
        let s = NegatedEntropy(Arc::new(make_scalar_sanity()));
        assert_eq!(s.eta(&state(&[2.0]), &[0.0], 0.0), -2.0);
        assert_eq!(s.g(&state(&[2.0]), &[0.0], 0.0)[0], -2.0);
    }

    #[test]
    fn warped_multiplier_is_compatible_with_entropy() {
        let s = WarpedScalar;
        for &(u, x, t) in &[(0.4, 0.3, 0.2), (-1.2, 2.5, 1.0)] {
            let u = state(&[u]);
            let lhs = s.grad_eta(&u, &[x], t)[0];
            let rhs = s.g(&u, &[x], t)[0] * s.da(&u, &[x], t)[(0, 0)];
            assert!((lhs - rhs).abs() < 1e-13);
            let lhs = s.grad_q(0, &u, &[x], t)[0];
            let rhs = s.g(&u, &[x], t)[0] * s.dflux(0, &u, &[x], t)[(0, 0)];
            assert!((lhs - rhs).abs() < 1e-13);
        }
    }
}
