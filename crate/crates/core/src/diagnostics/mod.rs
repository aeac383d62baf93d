//! Integrated functionals on periodic fields, the pointwise terms of the
//! viscous relative entropy identity, the identity ledger and Gronwall fits.
//!
//! Quadrature is the midpoint rule; space derivatives of fields are
//! second-order central differences.

mod gronwall;
mod ledger;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{contract_last, directional, solve, State};
use crate::relent::{rel_entropy_unchecked, rel_remainders};
use crate::solver::Field;
use crate::systems::BalanceLaw;

pub use gronwall::{gronwall_fit, GronwallFit, GRONWALL_MIN_POINTS};
pub use ledger::{identity_ledger, IdentityLedger, LedgerRow};

pub fn total_entropy(spec: &dyn BalanceLaw, field: &Field) -> Result<f64> {
    field.check(spec)?;
    let g = &field.grid;
    let parts: Vec<f64> = field
        .values
        .par_iter()
        .enumerate()
        .map(|(i, u)| spec.eta(u, &[g.center(i)], field.t))
        .collect();
    Ok(parts.iter().sum::<f64>() * g.dx())
}

fn same_grid(u: &Field, ub: &Field) -> Result<()> {
    if u.grid != ub.grid {
        return Err(Error::Ledger(format!("grids differ: {:?} vs {:?}", u.grid, ub.grid)));
    }
    if u.t != ub.t {
        return Err(Error::Ledger(format!("time stamps differ: {} vs {}", u.t, ub.t)));
    }
    Ok(())
}

/// `∫ η(U|Ū) dx`.
pub fn rel_entropy_total(spec: &dyn BalanceLaw, u: &Field, ub: &Field) -> Result<f64> {
    same_grid(u, ub)?;
    u.check(spec)?;
    ub.check(spec)?;
    Ok(rel_entropy_total_unchecked(spec, u, ub))
}

pub(crate) fn rel_entropy_total_unchecked(spec: &dyn BalanceLaw, u: &Field, ub: &Field) -> f64 {
    let g = &u.grid;
    let parts: Vec<f64> = (0..g.n)
        .into_par_iter()
        .map(|i| rel_entropy_unchecked(spec, &u.values[i], &ub.values[i], &[g.center(i)], u.t))
        .collect();
    parts.iter().sum::<f64>() * g.dx()
}

/// Central first difference of a periodic field.
pub fn gradient(field: &Field) -> Vec<State> {
    let n = field.grid.n;
    let h = 2.0 * field.grid.dx();
    (0..n)
        .map(|i| (&field.values[(i + 1) % n] - &field.values[(i + n - 1) % n]) / h)
        .collect()
}

/// Central second difference of a periodic field.
pub fn second_difference(field: &Field) -> Vec<State> {
    let n = field.grid.n;
    let h2 = field.grid.dx() * field.grid.dx();
    (0..n)
        .map(|i| (&field.values[(i + 1) % n] - &field.values[i] * 2.0 + &field.values[(i + n - 1) % n]) / h2)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DissipationTotal {
    /// `∫ ∇G ∂x(U−Ū)·B ∂x(U−Ū) dx`
    pub integral: f64,
    /// `ε` times the integral.
    pub scaled: f64,
    /// The integral is below `−1e−12`.
    pub negative: bool,
}

pub fn d_total(spec: &dyn BalanceLaw, u: &Field, ub: &Field, epsilon: f64) -> Result<DissipationTotal> {
    same_grid(u, ub)?;
    u.check(spec)?;
    ub.check(spec)?;
    let (du, dub) = (gradient(u), gradient(ub));
    let g = &u.grid;
    let parts: Vec<f64> = (0..g.n)
        .into_par_iter()
        .map(|i| {
            let xs = [g.center(i)];
            dissipation(spec, &u.values[i], &(&du[i] - &dub[i]), &xs, u.t)
        })
        .collect();
    let integral = parts.iter().sum::<f64>() * g.dx();
    Ok(DissipationTotal {
        integral,
        scaled: epsilon * integral,
        negative: integral < -1e-12,
    })
}

fn dissipation(spec: &dyn BalanceLaw, u: &State, dd: &State, x: &[f64], t: f64) -> f64 {
    (spec.dg(u, x, t) * dd).dot(&(spec.b(0, 0, u, x, t) * dd))
}

/// First and second space derivatives of `U` and `Ū` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub u: State,
    pub ux: State,
    pub ub: State,
    pub ubx: State,
    /// `∂xx Ū`, needed by `Q1` only.
    pub ubxx: State,
    pub x: f64,
    pub t: f64,
}

/// Pointwise viscous terms: the dissipation `D`, the flux `j` and `Q1..Q9`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViscousTerms {
    pub d: f64,
    pub j: f64,
    pub q: [f64; 9],
}

/// `Q1..Q9`, `D` and `j` at one point (one space dimension).
pub fn q_terms(spec: &dyn BalanceLaw, jet: &Jet) -> Result<ViscousTerms> {
    let (u, ub, x, t) = (&jet.u, &jet.ub, [jet.x], jet.t);
    let rem = rel_remainders(spec, u, ub, &x, t)?;
    let (ux, ubx) = (&jet.ux, &jet.ubx);
    let dux = ux - ubx;

    let g = spec.g(u, &x, t);
    let gb = spec.g(ub, &x, t);
    let dg = spec.dg(u, &x, t);
    let dgb = spec.dg(ub, &x, t);
    let b = spec.b(0, 0, u, &x, t);
    let bb = spec.b(0, 0, ub, &x, t);
    let gx = spec.g_x(0, u, &x, t);
    let gbx = spec.g_x(0, ub, &x, t);

    let bbu = &bb * ubx;
    let ddg = &dg - &dgb;
    let db = &b - &bb;
    let dgx = &gx - &gbx;

    // ∂x(∇Ḡᵀ B̄ ∂xŪ) along Ū(x)
    let dgb_x = contract_last(&spec.d2g(ub, &x, t), ubx) + spec.dg_x(0, ub, &x, t);
    let bb_x = directional(&spec.db(0, 0, ub, &x, t), ubx) + spec.b_x(0, 0, ub, &x, t);
    let div = dgb_x.transpose() * &bbu + dgb.transpose() * (&bb_x * ubx + &bb * &jet.ubxx);

    let q = [
        -div.dot(&rem.phi),
        -bbu.dot(&(&ddg * &dux)),
        -bbu.dot(&(&rem.g1 * ubx)),
        -(&dg * &dux).dot(&(&db * ubx)),
        -(&ddg * ubx).dot(&(&b * &dux)),
        -(&ddg * ubx).dot(&(&db * ubx)),
        -dgx.dot(&(&b * &dux)),
        -dgx.dot(&(&db * ubx)),
        -bbu.dot(&rem.g2[0]),
    ];
    // G(U|Ū) = G − Ḡ − ∇Ḡ w with w = φ + (U − Ū)
    let w = &rem.phi + (u - ub);
    let rel_g = &g - &gb - &dgb * &w;
    let j = (&g - &gb).dot(&(&b * ux - &bbu)) + bbu.dot(&rel_g) + bbu.dot(&(&dgb * &rem.phi));
    Ok(ViscousTerms {
        d: (&dg * &dux).dot(&(&b * &dux)),
        j,
        q,
    })
}

/// `(∇Ā)⁻¹(A − Ā)`, exposed for oracles.
pub fn pulled_back_difference(spec: &dyn BalanceLaw, u: &State, ub: &State, x: f64, t: f64) -> Result<State> {
    let xs = [x];
    solve(&spec.da(ub, &xs, t), &(spec.a(u, &xs, t) - spec.a(ub, &xs, t)), "∇A(Ū)")
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;
    use std::sync::Arc;

    use super::*;
    use crate::linalg::{state, Mat};
    use crate::solver::Grid1D;
    use crate::systems::{make_duct_gas, make_scalar_sanity, AreaProfile, DuctGas, ScalarSanity, WarpedScalar};

    fn sine(n: usize, base: f64, amp: f64) -> Field {
        let g = Grid1D::new(n, 2.0 * PI).unwrap();
        Field::new(g, (0..n).map(|i| state(&[base + amp * g.center(i).sin()])).collect(), 0.0).unwrap()
    }

    #[test]
    fn totals_on_sine() {
        let s = make_scalar_sanity();
        // ∫ sin²x / 2 over one period
        assert!((total_entropy(&s, &sine(64, 0.0, 1.0)).unwrap() - PI / 2.0).abs() < 1e-12);
        let z = sine(64, 0.0, 0.0);
        assert_eq!(total_entropy(&s, &z).unwrap(), 0.0);
        let d = 0.3;
        let e = rel_entropy_total(&s, &sine(64, 0.0, d), &z).unwrap();
        assert!((e - d * d * PI / 2.0).abs() < 1e-12);
        assert_eq!(rel_entropy_total(&s, &z, &z).unwrap(), 0.0);
    }

    #[test]
    fn dissipation_on_sine() {
        let s = make_scalar_sanity();
        let d = 0.3;
        let err = |n: usize| {
            let r = d_total(&s, &sine(n, 0.0, d), &sine(n, 0.0, 0.0), 0.1).unwrap();
            assert!(!r.negative);
            (r.integral - d * d * PI).abs()
        };
        // central differences damp cos by sin(Δx)/Δx
        assert!(err(64) < 1e-2 && err(64) / err(128) > 3.9);
        let neg = ScalarSanity { viscosity: -1.0 };
        let r = d_total(&neg, &sine(64, 0.0, d), &sine(64, 0.0, 0.0), 1.0).unwrap();
        assert!(r.negative && r.integral < 0.0);
    }

    #[test]
    fn mismatched_grids_are_ledger_errors() {
        let s = make_scalar_sanity();
        assert!(matches!(
            rel_entropy_total(&s, &sine(16, 0.0, 1.0), &sine(32, 0.0, 1.0)),
            Err(Error::Ledger(_))
        ));
    }

    fn jet_for(spec: &dyn BalanceLaw, uf: &dyn Fn(f64) -> State, ubf: &dyn Fn(f64) -> State, x: f64, t: f64) -> Jet {
        let h = 1e-4;
        let d1 = |f: &dyn Fn(f64) -> State| (f(x + h) - f(x - h)) / (2.0 * h);
        let d2 = |f: &dyn Fn(f64) -> State| (f(x + h) - f(x) * 2.0 + f(x - h)) / (h * h);
        let _ = spec;
        Jet {
            u: uf(x),
            ux: d1(uf),
            ub: ubf(x),
            ubx: d1(ubf),
            ubxx: d2(ubf),
            x,
            t,
        }
    }

    #[test]
    fn equal_states_give_zero_terms() {
        let s = WarpedScalar;
        let jet = Jet {
            u: state(&[0.4]),
            ux: state(&[0.2]),
            ub: state(&[0.4]),
            ubx: state(&[0.2]),
            ubxx: state(&[-0.1]),
            x: 0.3,
            t: 0.2,
        };
        let v = q_terms(&s, &jet).unwrap();
        assert!(v.q.iter().all(|q| q.abs() < 1e-15) && v.d == 0.0 && v.j.abs() < 1e-15);
    }

    #[test]
    fn homogeneous_and_constant_viscosity_zeros() {
        let s = make_duct_gas(1.0, 2.0, AreaProfile::Constant(1.0));
        let jet = Jet {
            u: state(&[1.3, 0.2]),
            ux: state(&[0.1, -0.3]),
            ub: state(&[0.9, -0.1]),
            ubx: state(&[0.2, 0.05]),
            ubxx: state(&[0.0, 0.1]),
            x: 0.3,
            t: 0.0,
        };
        let v = q_terms(&s, &jet).unwrap();
        assert_eq!(&v.q[6..], &[0.0, 0.0, 0.0]);
        let sc = make_scalar_sanity();
        let jet = Jet {
            u: state(&[1.3]),
            ux: state(&[0.1]),
            ub: state(&[0.9]),
            ubx: state(&[0.2]),
            ubxx: state(&[0.1]),
            x: 0.3,
            t: 0.0,
        };
        let v = q_terms(&sc, &jet).unwrap();
        assert_eq!([v.q[3], v.q[5], v.q[7]], [0.0, 0.0, 0.0]);
    }

    /// The ε-terms of the identity, written out term by term, against
    /// `∂x j − D + ΣQ` with `∂x j` by finite differences.
    fn identity_gap(spec: &dyn BalanceLaw, uf: &dyn Fn(f64) -> State, ubf: &dyn Fn(f64) -> State, x: f64, t: f64) -> f64 {
        let h = 1e-4;
        let at = |y: f64| jet_for(spec, uf, ubf, y, t);
        let jx = (q_terms(spec, &at(x + h)).unwrap().j - q_terms(spec, &at(x - h)).unwrap().j) / (2.0 * h);
        let terms = q_terms(spec, &at(x)).unwrap();
        let rhs = jx - terms.d + terms.q.iter().sum::<f64>();

        // J from its definition
        let w = |y: f64| pulled_back_difference(spec, &uf(y), &ubf(y), y, t).unwrap();
        let inner = |y: f64| {
            let jt = at(y);
            let xs = [y];
            let (u, ub) = (&jt.u, &jt.ub);
            let g = spec.g(u, &xs, t);
            let gb = spec.g(ub, &xs, t);
            let bu = spec.b(0, 0, u, &xs, t) * &jt.ux;
            let bbu = spec.b(0, 0, ub, &xs, t) * &jt.ubx;
            g.dot(&bu) - gb.dot(&bbu) - bbu.dot(&(spec.dg(ub, &xs, t) * w(y))) - gb.dot(&(&bu - &bbu))
        };
        let jt = at(x);
        let xs = [x];
        let (u, ub) = (&jt.u, &jt.ub);
        let dg = spec.dg(u, &xs, t);
        let dgb = spec.dg(ub, &xs, t);
        let b: Mat = spec.b(0, 0, u, &xs, t);
        let bb: Mat = spec.b(0, 0, ub, &xs, t);
        let bu = &b * &jt.ux;
        let bbu = &bb * &jt.ubx;
        let wx = (w(x + h) - w(x - h)) / (2.0 * h);
        let w0 = w(x);
        let gx = spec.g_x(0, u, &xs, t);
        let gbx = spec.g_x(0, ub, &xs, t);
        let hess = contract_last(&spec.d2g(ub, &xs, t), &w0) * &jt.ubx;
        let j_def = (inner(x + h) - inner(x - h)) / (2.0 * h)
            - (&dg * &jt.ux - &dgb * &jt.ubx).dot(&(&bu - &bbu))
            + bbu.dot(&(-(&dg * &jt.ux) + &dgb * &jt.ubx + &dgb * &wx + hess))
            - (&gx - &gbx).dot(&(&b * (&jt.ux - &jt.ubx) + (&b - &bb) * &jt.ubx))
            + bbu.dot(&(-&gx + &gbx + spec.dg_x(0, ub, &xs, t) * &w0));
        (j_def - rhs).abs()
    }

    #[test]
    fn viscous_terms_reassemble_the_identity() {
        let warped = WarpedScalar;
        let g = identity_gap(
            &warped,
            &|x: f64| state(&[0.3 + 0.4 * x.sin()]),
            &|x: f64| state(&[-0.2 + 0.3 * (2.0 * x).cos()]),
            0.7,
            0.4,
        );
        assert!(g < 1e-6, "{g}");
        let duct = DuctGas::weighted(1.0, 1.4, AreaProfile::sin(2.0, 0.4)).with_viscosity(Mat::from_row_slice(
            2,
            2,
            &[1.0, 0.2, -0.1, 0.8],
        ));
        let duct: Arc<dyn BalanceLaw> = Arc::new(duct);
        let g = identity_gap(
            duct.as_ref(),
            &|x: f64| state(&[1.2 + 0.3 * x.sin(), 0.4 * x.cos()]),
            &|x: f64| state(&[0.9 + 0.2 * x.cos(), -0.1 + 0.2 * x.sin()]),
            1.1,
            0.0,
        );
        assert!(g < 1e-6, "{g}");
    }
}
