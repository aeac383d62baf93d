use super::{BalanceLaw, DerivativeMode, SharedLaw};
use crate::error::Result;
use crate::linalg::{Hessians, Mat, MatrixGradient, State};

/// Replaces the viscosity of `inner` by `B = t·B̃`.
#[derive(Clone)]
pub struct SelfSimilar {
    pub inner: SharedLaw,
    pub btilde: Mat,
}

pub fn make_selfsimilar(inner: SharedLaw, btilde: Mat) -> SelfSimilar {
    assert_eq!(btilde.shape(), (inner.n(), inner.n()), "B̃ must be n×n");
    SelfSimilar { inner, btilde }
}

impl BalanceLaw for SelfSimilar {
    fn name(&self) -> &str {
        "selfsimilar"
    }
    fn n(&self) -> usize {
        self.inner.n()
    }
    fn d(&self) -> usize {
        self.inner.d()
    }
    fn derivative_mode(&self) -> DerivativeMode {
        self.inner.derivative_mode()
    }
    fn check(&self, u: &State, x: &[f64], t: f64) -> Result<()> {
        self.inner.check(u, x, t)
    }

    fn a(&self, u: &State, x: &[f64], t: f64) -> State {
        self.inner.a(u, x, t)
    }
    fn da(&self, u: &State, x: &[f64], t: f64) -> Mat {
        self.inner.da(u, x, t)
    }
    fn d2a(&self, u: &State, x: &[f64], t: f64) -> Hessians {
        self.inner.d2a(u, x, t)
    }
    fn a_t(&self, u: &State, x: &[f64], t: f64) -> State {
        self.inner.a_t(u, x, t)
    }
    fn flux(&self, alpha: usize, u: &State, x: &[f64], t: f64) -> State {
        self.inner.flux(alpha, u, x, t)
    }
    fn dflux(&self, alpha: usize, u: &State, x: &[f64], t: f64) -> Mat {
        self.inner.dflux(alpha, u, x, t)
    }
    fn flux_x(&self, alpha: usize, u: &State, x: &[f64], t: f64) -> State {
        self.inner.flux_x(alpha, u, x, t)
    }
    fn source(&self, u: &State, x: &[f64], t: f64) -> State {
        self.inner.source(u, x, t)
    }
    fn eta(&self, u: &State, x: &[f64], t: f64) -> f64 {
        self.inner.eta(u, x, t)
    }
    fn grad_eta(&self, u: &State, x: &[f64], t: f64) -> State {
        self.inner.grad_eta(u, x, t)
    }
    fn hess_eta(&self, u: &State, x: &[f64], t: f64) -> Mat {
        self.inner.hess_eta(u, x, t)
    }
    fn eta_t(&self, u: &State, x: &[f64], t: f64) -> f64 {
        self.inner.eta_t(u, x, t)
    }
    fn q(&self, alpha: usize, u: &State, x: &[f64], t: f64) -> f64 {
        self.inner.q(alpha, u, x, t)
    }
    fn grad_q(&self, alpha: usize, u: &State, x: &[f64], t: f64) -> State {
        self.inner.grad_q(alpha, u, x, t)
    }
    fn q_x(&self, alpha: usize, u: &State, x: &[f64], t: f64) -> f64 {
        self.inner.q_x(alpha, u, x, t)
    }
    fn g(&self, u: &State, x: &[f64], t: f64) -> State {
        self.inner.g(u, x, t)
    }
    fn dg(&self, u: &State, x: &[f64], t: f64) -> Mat {
        self.inner.dg(u, x, t)
    }
    fn d2g(&self, u: &State, x: &[f64], t: f64) -> Hessians {
        self.inner.d2g(u, x, t)
    }
    fn g_t(&self, u: &State, x: &[f64], t: f64) -> State {
        self.inner.g_t(u, x, t)
    }
    fn g_x(&self, alpha: usize, u: &State, x: &[f64], t: f64) -> State {
        self.inner.g_x(alpha, u, x, t)
    }
    fn dg_x(&self, alpha: usize, u: &State, x: &[f64], t: f64) -> Mat {
        self.inner.dg_x(alpha, u, x, t)
    }

    fn b(&self, _alpha: usize, _beta: usize, _u: &State, _x: &[f64], t: f64) -> Mat {
        &self.btilde * t
    }
    fn db(&self, _alpha: usize, _beta: usize, _u: &State, _x: &[f64], _t: f64) -> MatrixGradient {
        vec![Mat::zeros(self.n(), self.n()); self.n()]
    }
    fn b_x(&self, _alpha: usize, _beta: usize, _u: &State, _x: &[f64], _t: f64) -> Mat {
        Mat::zeros(self.n(), self.n())
    }

    fn record_history(&self, t: f64, centers: &[f64], values: &[State], horizon: f64) -> Result<()> {
        self.inner.record_history(t, centers, values, horizon)
    }
}
