//! Relative quantities between a state `U` and a reference `Ū` at a fixed
//! point `(x, t)`, and the empirical audit of their lower/upper bounds.

mod lemma;

use crate::error::Result;
use crate::linalg::{contract_last, solve, Mat, State};
use crate::systems::BalanceLaw;

pub use lemma::{lemma_bounds_audit, LemmaAuditConfig, LemmaAuditReport, LemmaSample, ShellSummary};

/// `η(U|Ū) = η − η̄ − Ḡ·(A − Ā)`.
pub fn rel_entropy(spec: &dyn BalanceLaw, u: &State, ub: &State, x: &[f64], t: f64) -> Result<f64> {
    spec.check(u, x, t)?;
    spec.check(ub, x, t)?;
    Ok(rel_entropy_unchecked(spec, u, ub, x, t))
}

pub(crate) fn rel_entropy_unchecked(spec: &dyn BalanceLaw, u: &State, ub: &State, x: &[f64], t: f64) -> f64 {
    let da = spec.a(u, x, t) - spec.a(ub, x, t);
    spec.eta(u, x, t) - spec.eta(ub, x, t) - spec.g(ub, x, t).dot(&da)
}

/// `q_α(U|Ū) = q_α − q̄_α − Ḡ·(f_α − f̄_α)` for each `α`.
pub fn rel_entropy_flux(spec: &dyn BalanceLaw, u: &State, ub: &State, x: &[f64], t: f64) -> Result<Vec<f64>> {
    spec.check(u, x, t)?;
    spec.check(ub, x, t)?;
    let gb = spec.g(ub, x, t);
    Ok((0..spec.d())
        .map(|a| {
            let df = spec.flux(a, u, x, t) - spec.flux(a, ub, x, t);
            spec.q(a, u, x, t) - spec.q(a, ub, x, t) - gb.dot(&df)
        })
        .collect())
}

/// `w = (∇Ā)⁻¹ (A − Ā)`.
fn pulled_back(spec: &dyn BalanceLaw, u: &State, ub: &State, x: &[f64], t: f64) -> Result<State> {
    let diff = spec.a(u, x, t) - spec.a(ub, x, t);
    solve(&spec.da(ub, x, t), &diff, "∇A(Ū)")
}

/// `f_α(U|Ū) = f_α − f̄_α − ∇f̄_α (∇Ā)⁻¹ (A − Ā)` for each `α`.
pub fn rel_flux(spec: &dyn BalanceLaw, u: &State, ub: &State, x: &[f64], t: f64) -> Result<Vec<State>> {
    spec.check(u, x, t)?;
    spec.check(ub, x, t)?;
    let w = pulled_back(spec, u, ub, x, t)?;
    Ok((0..spec.d())
        .map(|a| spec.flux(a, u, x, t) - spec.flux(a, ub, x, t) - spec.dflux(a, ub, x, t) * &w)
        .collect())
}

/// `G(U|Ū) = G − Ḡ − ∇Ḡ (∇Ā)⁻¹ (A − Ā)`.
pub fn rel_multiplier(spec: &dyn BalanceLaw, u: &State, ub: &State, x: &[f64], t: f64) -> Result<State> {
    spec.check(u, x, t)?;
    spec.check(ub, x, t)?;
    let w = pulled_back(spec, u, ub, x, t)?;
    Ok(spec.g(u, x, t) - spec.g(ub, x, t) - spec.dg(ub, x, t) * w)
}

/// Quadratic parts of the expansions of `U`, `∇G` and `G_x` along `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct Remainders {
    /// `(∇Ā)⁻¹(A − Ā) − (U − Ū)`
    pub phi: State,
    /// `∇G − ∇Ḡ − ∇²Ḡ·(∇Ā)⁻¹(A − Ā)`
    pub g1: Mat,
    /// `G_{x_α} − Ḡ_{x_α} − ∇Ḡ_{x_α}(∇Ā)⁻¹(A − Ā)` per `α`.
    pub g2: Vec<State>,
}

pub fn rel_remainders(spec: &dyn BalanceLaw, u: &State, ub: &State, x: &[f64], t: f64) -> Result<Remainders> {
    spec.check(u, x, t)?;
    spec.check(ub, x, t)?;
    let w = pulled_back(spec, u, ub, x, t)?;
    let phi = &w - (u - ub);
    let g1 = spec.dg(u, x, t) - spec.dg(ub, x, t) - contract_last(&spec.d2g(ub, x, t), &w);
    let g2 = (0..spec.d())
        .map(|a| spec.g_x(a, u, x, t) - spec.g_x(a, ub, x, t) - spec.dg_x(a, ub, x, t) * &w)
        .collect();
    Ok(Remainders { phi, g1, g2 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelativeQuantities {
    pub rel_eta: f64,
    pub rel_q: Vec<f64>,
    pub rel_f: Vec<State>,
    pub rel_g: State,
    pub phi: State,
    pub g1: Mat,
    pub g2: Vec<State>,
}

pub fn relative_quantities(
    spec: &dyn BalanceLaw,
    u: &State,
    ub: &State,
    x: &[f64],
    t: f64,
) -> Result<RelativeQuantities> {
    let Remainders { phi, g1, g2 } = rel_remainders(spec, u, ub, x, t)?;
    Ok(RelativeQuantities {
        rel_eta: rel_entropy(spec, u, ub, x, t)?,
        rel_q: rel_entropy_flux(spec, u, ub, x, t)?,
        rel_f: rel_flux(spec, u, ub, x, t)?,
        rel_g: rel_multiplier(spec, u, ub, x, t)?,
        phi,
        g1,
        g2,
    })
}

/// `½ δᵀ (∇²η − G·∇²A)(Ū) δ`: the limit of `s⁻² η(Ū + sδ | Ū)` as `s → 0`.
pub fn quadratic_form(spec: &dyn BalanceLaw, ub: &State, delta: &State, x: &[f64], t: f64) -> Result<f64> {
    spec.check(ub, x, t)?;
    let h = spec.hess_eta(ub, x, t) - crate::linalg::weighted_sum(&spec.g(ub, x, t), &spec.d2a(ub, x, t));
    Ok(0.5 * delta.dot(&(h * delta)))
}
