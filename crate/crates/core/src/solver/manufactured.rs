use std::ops::Deref;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{directional, Hessians, Mat, MatrixGradient, State};
use crate::systems::{BalanceLaw, DerivativeMode};

/// Smooth space-time field `Ū*(x, t)` with its first time derivative and
/// first two space derivatives.
pub trait Target: Send + Sync {
    fn value(&self, x: f64, t: f64) -> State;
    fn dt(&self, x: f64, t: f64) -> State;
    fn dx(&self, x: f64, t: f64) -> State;
    fn dxx(&self, x: f64, t: f64) -> State;
}

/// One travelling wave per component: `mean + amplitude·sin(k(x − c t) + phase)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigComponent {
    pub mean: f64,
    pub amplitude: f64,
    #[serde(default = "one")]
    pub wavenumber: f64,
    #[serde(default = "one")]
    pub speed: f64,
    #[serde(default)]
    pub phase: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigTarget {
    pub components: Vec<TrigComponent>,
}

impl TrigComponent {
    fn arg(&self, x: f64, t: f64) -> f64 {
        self.wavenumber * (x - self.speed * t) + self.phase
    }
}

impl TrigTarget {
    fn map(&self, f: impl Fn(&TrigComponent) -> f64) -> State {
        State::from_iterator(self.components.len(), self.components.iter().map(f))
    }
}

impl Target for TrigTarget {
    fn value(&self, x: f64, t: f64) -> State {
        self.map(|c| c.mean + c.amplitude * c.arg(x, t).sin())
    }
    fn dt(&self, x: f64, t: f64) -> State {
        self.map(|c| -c.amplitude * c.wavenumber * c.speed * c.arg(x, t).cos())
    }
    fn dx(&self, x: f64, t: f64) -> State {
        self.map(|c| c.amplitude * c.wavenumber * c.arg(x, t).cos())
    }
    fn dxx(&self, x: f64, t: f64) -> State {
        self.map(|c| -c.amplitude * c.wavenumber * c.wavenumber * c.arg(x, t).sin())
    }
}

/// `F(x,t) = ∂t A(Ū*) + ∂x f(Ū*) + P(Ū*) − ε ∂x(B(Ū*) ∂x Ū*)`.
pub fn forcing(spec: &dyn BalanceLaw, target: &dyn Target, epsilon: f64, x: f64, t: f64) -> State {
    let xs = [x];
    let u = target.value(x, t);
    let (ut, ux, uxx) = (target.dt(x, t), target.dx(x, t), target.dxx(x, t));
    let a_t = spec.a_t(&u, &xs, t) + spec.da(&u, &xs, t) * &ut;
    let f_x = spec.flux_x(0, &u, &xs, t) + spec.dflux(0, &u, &xs, t) * &ux;
    let mut out = a_t + f_x + spec.source(&u, &xs, t);
    if epsilon != 0.0 {
        let b = spec.b(0, 0, &u, &xs, t);
        let b_total_x = spec.b_x(0, 0, &u, &xs, t) + directional(&spec.db(0, 0, &u, &xs, t), &ux);
        out -= (b_total_x * &ux + b * &uxx) * epsilon;
    }
    out
}

/// `spec` with `P` replaced by `P − F`, so that the target solves it exactly.
/// `L` is any handle to the inner law (`&dyn BalanceLaw` or a shared pointer).
pub struct Forced<L> {
    inner: L,
    target: Arc<dyn Target>,
    epsilon: f64,
    name: String,
}

pub fn manufactured_forcing<'a, L>(spec: L, target: Arc<dyn Target>, epsilon: f64) -> Forced<L>
where
    L: Deref<Target = dyn BalanceLaw + 'a> + Send + Sync,
{
    let name = format!("{}+forcing", spec.name());
    Forced {
        inner: spec,
        target,
        epsilon,
        name,
    }
}

impl<L> Forced<L> {
    pub fn target(&self) -> &dyn Target {
        self.target.as_ref()
    }
}

macro_rules! forward {
    ($($name:ident($($arg:ident: $ty:ty),*) -> $ret:ty;)*) => {
        $(fn $name(&self, $($arg: $ty),*) -> $ret {
            self.inner.$name($($arg),*)
        })*
    };
}

impl<'a, L> BalanceLaw for Forced<L>
where
    L: Deref<Target = dyn BalanceLaw + 'a> + Send + Sync,
{
    fn name(&self) -> &str {
        &self.name
    }
    fn source(&self, u: &State, x: &[f64], t: f64) -> State {
        self.inner.source(u, x, t) - forcing(&*self.inner, self.target.as_ref(), self.epsilon, x[0], t)
    }
    forward! {
        n() -> usize;
        d() -> usize;
        derivative_mode() -> DerivativeMode;
        record_history(t: f64, centers: &[f64], values: &[State], horizon: f64) -> Result<()>;
        check(u: &State, x: &[f64], t: f64) -> Result<()>;
        a(u: &State, x: &[f64], t: f64) -> State;
        da(u: &State, x: &[f64], t: f64) -> Mat;
        d2a(u: &State, x: &[f64], t: f64) -> Hessians;
        a_t(u: &State, x: &[f64], t: f64) -> State;
        flux(alpha: usize, u: &State, x: &[f64], t: f64) -> State;
        dflux(alpha: usize, u: &State, x: &[f64], t: f64) -> Mat;
        flux_x(alpha: usize, u: &State, x: &[f64], t: f64) -> State;
        eta(u: &State, x: &[f64], t: f64) -> f64;
        grad_eta(u: &State, x: &[f64], t: f64) -> State;
        hess_eta(u: &State, x: &[f64], t: f64) -> Mat;
        eta_t(u: &State, x: &[f64], t: f64) -> f64;
        q(alpha: usize, u: &State, x: &[f64], t: f64) -> f64;
        grad_q(alpha: usize, u: &State, x: &[f64], t: f64) -> State;
        q_x(alpha: usize, u: &State, x: &[f64], t: f64) -> f64;
        g(u: &State, x: &[f64], t: f64) -> State;
        dg(u: &State, x: &[f64], t: f64) -> Mat;
        d2g(u: &State, x: &[f64], t: f64) -> Hessians;
        g_t(u: &State, x: &[f64], t: f64) -> State;
        g_x(alpha: usize, u: &State, x: &[f64], t: f64) -> State;
        dg_x(alpha: usize, u: &State, x: &[f64], t: f64) -> Mat;
        b(alpha: usize, beta: usize, u: &State, x: &[f64], t: f64) -> Mat;
        db(alpha: usize, beta: usize, u: &State, x: &[f64], t: f64) -> MatrixGradient;
        b_x(alpha: usize, beta: usize, u: &State, x: &[f64], t: f64) -> Mat;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::state;
    use crate::systems::{make_duct_gas, make_scalar_sanity, AreaProfile, WarpedScalar};

    fn wave(mean: f64, amp: f64) -> TrigComponent {
        TrigComponent {
            mean,
            amplitude: amp,
            wavenumber: 1.0,
            speed: 1.0,
            phase: 0.0,
        }
    }

    #[test]
    fn constant_target_on_homogeneous_law_needs_no_forcing() {
        let t = TrigTarget {
            components: vec![wave(0.7, 0.0)],
        };
        let f = forcing(&make_scalar_sanity(), &t, 0.3, 1.1, 0.2);
        assert_eq!(f, state(&[0.0]));
    }

    #[test]
    fn travelling_wave_on_burgers() {
        // u = 1 + a sin(x − t): u_t + u u_x = a² sin cos and −ε u_xx = ε a sin
        let t = TrigTarget {
            components: vec![wave(1.0, 0.2)],
        };
        let (x, tt, eps) = (0.4_f64, 0.3_f64, 0.05);
        let s = (x - tt).sin();
        let c = (x - tt).cos();
        let expect = 0.2 * (0.2 * s) * c + eps * 0.2 * s;
        let got = forcing(&make_scalar_sanity(), &t, eps, x, tt)[0];
        assert!((got - expect).abs() < 1e-14);
    }

    #[test]
    fn forcing_matches_finite_differences() {
        let specs: Vec<(Box<dyn BalanceLaw>, TrigTarget)> = vec![
            (
                Box::new(make_duct_gas(1.0, 2.0, AreaProfile::sin(2.0, 0.3))),
                TrigTarget {
                    components: vec![wave(1.0, 0.2), wave(0.3, 0.1)],
                },
            ),
            (
                Box::new(WarpedScalar),
                TrigTarget {
                    components: vec![wave(0.2, 0.3)],
                },
            ),
        ];
        let (x, t, eps) = (0.9, 0.35, 0.1);
        let h = 1e-5;
        for (spec, tg) in specs {
            let spec = spec.as_ref();
            let av = |x: f64, t: f64| spec.a(&tg.value(x, t), &[x], t);
            let fv = |x: f64| spec.flux(0, &tg.value(x, t), &[x], t);
            let bux = |x: f64| spec.b(0, 0, &tg.value(x, t), &[x], t) * tg.dx(x, t);
            let oracle = (av(x, t + h) - av(x, t - h)) / (2.0 * h) + (fv(x + h) - fv(x - h)) / (2.0 * h)
                + spec.source(&tg.value(x, t), &[x], t)
                - (bux(x + h) - bux(x - h)) / (2.0 * h) * eps;
            let got = forcing(spec, &tg, eps, x, t);
            assert!((got - oracle).amax() < 1e-8, "{}", spec.name());
        }
    }

    #[test]
    fn forced_law_only_changes_the_source() {
        let base: Arc<dyn BalanceLaw> = Arc::new(make_scalar_sanity());
        let tg: Arc<dyn Target> = Arc::new(TrigTarget {
            components: vec![wave(0.0, 0.5)],
        });
        let f = manufactured_forcing(base.clone(), tg.clone(), 0.1);
        let u = state(&[0.3]);
        assert_eq!(f.flux(0, &u, &[0.2], 0.1), base.flux(0, &u, &[0.2], 0.1));
        let expect = -forcing(base.as_ref(), tg.as_ref(), 0.1, 0.2, 0.1);
        assert_eq!(f.source(&u, &[0.2], 0.1), expect);
    }
}
