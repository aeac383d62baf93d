//! Constitutive closures of an inhomogeneous system of balance laws
//!
//! ```text
//! ∂t A(U,x,t) + ∂α fα(U,x,t) + P(U,x,t) = ε ∂α(Bαβ(U,x,t) ∂β U)
//! ```
//!
//! together with an entropy pair `(η, qα)` and its multiplier `G`.
//!
//! Closures are total on the admissible region and never fail; admissibility
//! is checked once per evaluation site through [`BalanceLaw::check`]. Every
//! public operation in this crate calls `check` before touching a closure.

mod duct;
mod fd;
mod memory;
mod scalar;
mod selfsimilar;
mod toy;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{inf_norm, solve, Hessians, Mat, MatrixGradient, State};

pub use duct::{make_duct_gas, AreaProfile, DuctForm, DuctGas, DEFAULT_RHO_MIN};
pub use fd::{synthesize_derivatives, Synthesized, ZerothOrder};
pub use memory::{
    make_memory_scalar, resolvent_kernel, HistoryBuffer, MemoryKernel, MemoryScalar, Resolvent,
    ScalarFlux,
};
pub use scalar::{make_scalar_sanity, ScalarSanity};
pub use selfsimilar::{make_selfsimilar, SelfSimilar};
pub use toy::{NegatedEntropy, WarpedScalar, ZeroEntropyFlux};
pub(crate) use toy::delegate;

pub type SharedLaw = Arc<dyn BalanceLaw>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeMode {
    Analytic,
    FiniteDifferenceSynthesized,
}

/// Zeroth-order closures only. [`synthesize_derivatives`] turns any
/// implementor into a full [`BalanceLaw`].
pub trait Closures: Send + Sync {
    fn name(&self) -> &str;
    fn n(&self) -> usize;
    fn d(&self) -> usize {
        1
    }
    fn check(&self, u: &State, x: &[f64], t: f64) -> Result<()>;

    fn a(&self, u: &State, x: &[f64], t: f64) -> State;
    fn flux(&self, alpha: usize, u: &State, x: &[f64], t: f64) -> State;
    fn source(&self, u: &State, x: &[f64], t: f64) -> State;
    fn eta(&self, u: &State, x: &[f64], t: f64) -> f64;
    fn q(&self, alpha: usize, u: &State, x: &[f64], t: f64) -> f64;
    fn g(&self, u: &State, x: &[f64], t: f64) -> State;
    fn b(&self, alpha: usize, beta: usize, u: &State, x: &[f64], t: f64) -> Mat;

    fn record_history(&self, _t: f64, _centers: &[f64], _values: &[State], _horizon: f64) -> Result<()> {
        Ok(())
    }
}

/// Full system: closures plus every derivative slot used by the relative
/// entropy calculus. `_t` and `_x` suffixes denote explicit partial
/// derivatives at frozen `U`; `d`-prefixed slots are `U`-gradients.
pub trait BalanceLaw: Send + Sync {
    fn name(&self) -> &str;
    /// State dimension.
    fn n(&self) -> usize;
    /// Space dimension.
    fn d(&self) -> usize {
        1
    }
    fn derivative_mode(&self) -> DerivativeMode {
        DerivativeMode::Analytic
    }
    fn check(&self, u: &State, x: &[f64], t: f64) -> Result<()>;

    fn a(&self, u: &State, x: &[f64], t: f64) -> State;
    fn da(&self, u: &State, x: &[f64], t: f64) -> Mat;
    fn d2a(&self, u: &State, x: &[f64], t: f64) -> Hessians;
    fn a_t(&self, u: &State, x: &[f64], t: f64) -> State;

    fn flux(&self, alpha: usize, u: &State, x: &[f64], t: f64) -> State;
    fn dflux(&self, alpha: usize, u: &State, x: &[f64], t: f64) -> Mat;
    /// `f_{α, x_α}`.
    fn flux_x(&self, alpha: usize, u: &State, x: &[f64], t: f64) -> State;

    fn source(&self, u: &State, x: &[f64], t: f64) -> State;

    fn eta(&self, u: &State, x: &[f64], t: f64) -> f64;
    fn grad_eta(&self, u: &State, x: &[f64], t: f64) -> State;
    fn hess_eta(&self, u: &State, x: &[f64], t: f64) -> Mat;
    fn eta_t(&self, u: &State, x: &[f64], t: f64) -> f64;

    fn q(&self, alpha: usize, u: &State, x: &[f64], t: f64) -> f64;
    fn grad_q(&self, alpha: usize, u: &State, x: &[f64], t: f64) -> State;
    /// `q_{α, x_α}`.
    fn q_x(&self, alpha: usize, u: &State, x: &[f64], t: f64) -> f64;

    fn g(&self, u: &State, x: &[f64], t: f64) -> State;
    fn dg(&self, u: &State, x: &[f64], t: f64) -> Mat;
    fn d2g(&self, u: &State, x: &[f64], t: f64) -> Hessians;
    fn g_t(&self, u: &State, x: &[f64], t: f64) -> State;
    fn g_x(&self, alpha: usize, u: &State, x: &[f64], t: f64) -> State;
    fn dg_x(&self, alpha: usize, u: &State, x: &[f64], t: f64) -> Mat;

    fn b(&self, alpha: usize, beta: usize, u: &State, x: &[f64], t: f64) -> Mat;
    fn db(&self, alpha: usize, beta: usize, u: &State, x: &[f64], t: f64) -> MatrixGradient;
    /// `B_{αβ, x_α}`.
    fn b_x(&self, alpha: usize, beta: usize, u: &State, x: &[f64], t: f64) -> Mat;

    /// Called by the time loop after every accepted step (and once at the
    /// initial time). Systems with memory freeze their history term here;
    /// `horizon` is the largest time ahead of `t` that may be evaluated
    /// before the next call.
    fn record_history(&self, _t: f64, _centers: &[f64], _values: &[State], _horizon: f64) -> Result<()> {
        Ok(())
    }
}

/// `R = P + A_t + Σα f_{α,x_α}`.
pub fn eval_r(spec: &dyn BalanceLaw, u: &State, x: &[f64], t: f64) -> Result<State> {
    spec.check(u, x, t)?;
    Ok(r_unchecked(spec, u, x, t))
}

pub fn r_unchecked(spec: &dyn BalanceLaw, u: &State, x: &[f64], t: f64) -> State {
    let mut r = spec.source(u, x, t) + spec.a_t(u, x, t);
    for alpha in 0..spec.d() {
        r += spec.flux_x(alpha, u, x, t);
    }
    r
}

/// `Z = G·R − η_t − Σα q_{α,x_α}`.
pub fn eval_z(spec: &dyn BalanceLaw, u: &State, x: &[f64], t: f64) -> Result<f64> {
    spec.check(u, x, t)?;
    let r = r_unchecked(spec, u, x, t);
    let mut z = spec.g(u, x, t).dot(&r) - spec.eta_t(u, x, t);
    for alpha in 0..spec.d() {
        z -= spec.q_x(alpha, u, x, t);
    }
    Ok(z)
}

pub const INVERSION_MAX_ITERS: usize = 50;

/// Newton solve of `A(U, x, t) = V` starting from `guess`.
pub fn invert_a(spec: &dyn BalanceLaw, v: &State, x: &[f64], t: f64, guess: &State) -> Result<State> {
    invert_a_with(spec, v, x, t, guess, 1e-12, INVERSION_MAX_ITERS)
}

pub fn invert_a_with(
    spec: &dyn BalanceLaw,
    v: &State,
    x: &[f64],
    t: f64,
    guess: &State,
    tol: f64,
    max_iters: usize,
) -> Result<State> {
    spec.check(guess, x, t)?;
    let target = tol * (1.0 + inf_norm(v));
    let mut u = guess.clone();
    let mut residual = spec.a(&u, x, t) - v;
    let mut res_norm = inf_norm(&residual);
    for _ in 0..max_iters {
        if res_norm <= target {
            return Ok(u);
        }
        let jac = spec.da(&u, x, t);
        let step = solve(&jac, &residual, "inversion Jacobian")?;
        u -= step;
        spec.check(&u, x, t)?;
        residual = spec.a(&u, x, t) - v;
        res_norm = inf_norm(&residual);
    }
    if res_norm <= target {
        return Ok(u);
    }
    Err(Error::Inversion {
        iterations: max_iters,
        residual: res_norm,
        last_iterate: u.iter().copied().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::state;

    /// A(u) = u + u³, everything else trivial.
    struct Cubic;

    impl Closures for Cubic {
        fn name(&self) -> &str {
            "cubic"
        }
        fn n(&self) -> usize {
            1
        }
        fn check(&self, _u: &State, _x: &[f64], _t: f64) -> Result<()> {
            Ok(())
        }
        fn a(&self, u: &State, _x: &[f64], _t: f64) -> State {
            u.map(|v| v + v * v * v)
        }
        fn flux(&self, _alpha: usize, u: &State, _x: &[f64], _t: f64) -> State {
            u * 0.0
        }
        fn source(&self, u: &State, _x: &[f64], _t: f64) -> State {
            u * 0.0
        }
        fn eta(&self, u: &State, _x: &[f64], _t: f64) -> f64 {
            0.5 * u[0] * u[0]
        }
        fn q(&self, _alpha: usize, _u: &State, _x: &[f64], _t: f64) -> f64 {
            0.0
        }
        fn g(&self, u: &State, _x: &[f64], _t: f64) -> State {
            u.map(|v| v / (1.0 + 3.0 * v * v))
        }
        fn b(&self, _alpha: usize, _beta: usize, _u: &State, _x: &[f64], _t: f64) -> Mat {
            Mat::identity(1, 1)
        }
    }

    fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(lo) * f(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn scalar_sanity_has_zero_r_and_z() {
        let s = make_scalar_sanity();
        for &(u, x, t) in &[(0.3, 0.1, 0.0), (-2.0, 5.0, 3.0)] {
            let r = eval_r(&s, &state(&[u]), &[x], t).unwrap();
            assert_eq!(r[0], 0.0);
            assert_eq!(eval_z(&s, &state(&[u]), &[x], t).unwrap(), 0.0);
        }
    }

    #[test]
    fn duct_gas_r_and_z_at_origin() {
        let s = make_duct_gas(1.0, 2.0, AreaProfile::sin(2.0, 1.0));
        let u = state(&[1.0, 1.0]);
        let r = eval_r(&s, &u, &[0.0], 0.7).unwrap();
        assert!((r[0] - 0.5).abs() < 1e-15 && (r[1] - 0.5).abs() < 1e-15);
        // G = (-m²/2ρ² + 2ρ, m/ρ) = (1.5, 1); Z = 1.5·0.5 + 1·0.5
        let z = eval_z(&s, &u, &[0.0], 0.7).unwrap();
        assert!((z - 1.25).abs() < 1e-14, "z = {z}");
    }

    #[test]
    fn selfsimilar_wrapper_keeps_r_zero() {
        let s = make_selfsimilar(Arc::new(make_scalar_sanity()), Mat::identity(1, 1));
        let r = eval_r(&s, &state(&[1.3]), &[0.2], 0.5).unwrap();
        assert_eq!(r[0], 0.0);
    }

    #[test]
    fn inadmissible_density_is_a_domain_error() {
        let s = make_duct_gas(1.0, 2.0, AreaProfile::Constant(1.0));
        let err = eval_r(&s, &state(&[-0.1, 0.0]), &[0.0], 0.0).unwrap_err();
        match err {
            Error::Domain { component, .. } => assert_eq!(component, "rho"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invert_identity_and_weighted_maps() {
        let s = make_duct_gas(1.0, 2.0, AreaProfile::Constant(1.0));
        let u = invert_a(&s, &state(&[3.0, -1.0]), &[0.0], 0.0, &state(&[1.0, 0.0])).unwrap();
        assert_eq!(u, state(&[3.0, -1.0]));

        // weighted duct form: A = a(x) U with a(0) = 2
        let w = DuctGas::weighted(1.0, 2.0, AreaProfile::sin(2.0, 1.0));
        let u = invert_a(&w, &state(&[4.0, 2.0]), &[0.0], 0.0, &state(&[1.0, 0.0])).unwrap();
        assert!((u[0] - 2.0).abs() < 1e-12 && (u[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invert_cubic_matches_bisection() {
        let oracle = bisect(|u| u + u * u * u - 2.0, 0.0, 2.0);
        let s = synthesize_derivatives(Cubic);
        let u = invert_a(&s, &state(&[2.0]), &[0.0], 0.0, &state(&[0.0])).unwrap();
        assert!((u[0] - oracle).abs() < 1e-11);
        // u³ + u − 2 = (u − 1)(u² + u + 2)
        assert!((u[0] - 1.0).abs() < 1e-11);
    }

    #[test]
    fn inversion_failure_carries_last_iterate() {
        let s = synthesize_derivatives(Cubic);
        let err = invert_a_with(&s, &state(&[2.0]), &[0.0], 0.0, &state(&[0.0]), 1e-12, 1).unwrap_err();
        match err {
            Error::Inversion {
                iterations,
                residual,
                last_iterate,
            } => {
                assert_eq!(iterations, 1);
                assert!(residual > 0.0);
                assert_eq!(last_iterate.len(), 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
