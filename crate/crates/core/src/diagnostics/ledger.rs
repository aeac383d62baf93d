use rayon::prelude::*;
use serde::Serialize;

use super::{gradient, q_terms, rel_entropy_total_unchecked, same_grid, second_difference, Jet};
use crate::error::{Error, Result};
use crate::linalg::State;
use crate::relent::rel_flux;
use crate::solver::{Field, Trajectory};
use crate::systems::{r_unchecked, BalanceLaw};

/// Every term of the integrated identity at one snapshot. The `∂x q(U|Ū)`
/// and `∂x j` divergences vanish on the torus and are left out of the
/// residual; `j_divergence` records the discrete sum for audit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LedgerRow {
    pub t: f64,
    /// `∫ η(U|Ū) dx`
    pub rel_entropy: f64,
    pub de_dt: f64,
    /// `∫ (G−Ḡ)·(R−R̄) dx`
    pub source_difference: f64,
    /// `∫ ∇Ḡ ∂xŪ · f(U|Ū) dx`
    pub flux_term: f64,
    /// `∫ R̄ · G(U|Ū) dx`
    pub multiplier_term: f64,
    /// `∫ [(η_t+q_x−η̄_t−q̄_x) − Ḡ·(A_t+f_x−Ā_t−f̄_x) − Ḡ_t·(A−Ā) − Ḡ_x·(f−f̄)] dx`
    pub inhomogeneity: f64,
    /// `ε ∫ D dx`
    pub dissipation: f64,
    /// `ε ∫ Q_i dx`
    pub q: [f64; 9],
    /// `Σ_i (j_{i+1} − j_{i−1})/2`
    pub j_divergence: f64,
    /// `de_dt + source + flux + multiplier − inhomogeneity + εD − εΣQ`
    pub residual: f64,
}

impl LedgerRow {
    pub fn csv_header() -> Vec<String> {
        let mut h: Vec<String> = [
            "t",
            "rel_entropy",
            "de_dt",
            "source_difference",
            "flux_term",
            "multiplier_term",
            "inhomogeneity",
            "eps_d",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        h.extend((1..=9).map(|i| format!("eps_q{i}")));
        h.push("j_divergence".into());
        h.push("residual".into());
        h
    }

    pub fn csv_row(&self) -> Vec<f64> {
        let mut r = vec![
            self.t,
            self.rel_entropy,
            self.de_dt,
            self.source_difference,
            self.flux_term,
            self.multiplier_term,
            self.inhomogeneity,
            self.dissipation,
        ];
        r.extend(self.q);
        r.push(self.j_divergence);
        r.push(self.residual);
        r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityLedger {
    pub epsilon: f64,
    pub rows: Vec<LedgerRow>,
    /// `∫ |residual| dt` by the trapezoid rule over the rows.
    pub residual_l1: f64,
    pub residual_max: f64,
    pub min_dissipation: f64,
    /// Largest `|ε∫Q_i|` for `i = 7, 8, 9`.
    pub max_inhomogeneous_q: f64,
    pub max_j_divergence: f64,
}

struct Spatial {
    e: f64,
    source: f64,
    flux: f64,
    mult: f64,
    inhom: f64,
    d: f64,
    q: [f64; 9],
    j_div: f64,
}

fn spatial_terms(spec: &dyn BalanceLaw, u: &Field, ub: &Field, epsilon: f64) -> Result<Spatial> {
    let g = &u.grid;
    let t = u.t;
    let (ux, ubx, ubxx) = (gradient(u), gradient(ub), second_difference(ub));
    let cells: Vec<(f64, f64, f64, f64, f64, f64, [f64; 9])> = (0..g.n)
        .into_par_iter()
        .map(|i| {
            let xs = [g.center(i)];
            let (a, b) = (&u.values[i], &ub.values[i]);
            let ga = spec.g(a, &xs, t);
            let gb = spec.g(b, &xs, t);
            let ra = r_unchecked(spec, a, &xs, t);
            let rb = r_unchecked(spec, b, &xs, t);
            let dgb = spec.dg(b, &xs, t);
            let source = (&ga - &gb).dot(&(&ra - &rb));
            let fr = rel_flux(spec, a, b, &xs, t)?;
            let flux = (&dgb * &ubx[i]).dot(&fr[0]);
            let w = super::pulled_back_difference(spec, a, b, xs[0], t)?;
            let rel_g = &ga - &gb - &dgb * &w;
            let mult = rb.dot(&rel_g);
            let afx = |v: &State| spec.a_t(v, &xs, t) + spec.flux_x(0, v, &xs, t);
            let eqx = |v: &State| spec.eta_t(v, &xs, t) + spec.q_x(0, v, &xs, t);
            let inhom = eqx(a) - eqx(b)
                - gb.dot(&(afx(a) - afx(b)))
                - spec.g_t(b, &xs, t).dot(&(spec.a(a, &xs, t) - spec.a(b, &xs, t)))
                - spec.g_x(0, b, &xs, t).dot(&(spec.flux(0, a, &xs, t) - spec.flux(0, b, &xs, t)));
            let vt = q_terms(
                spec,
                &Jet {
                    u: a.clone(),
                    ux: ux[i].clone(),
                    ub: b.clone(),
                    ubx: ubx[i].clone(),
                    ubxx: ubxx[i].clone(),
                    x: xs[0],
                    t,
                },
            )?;
            Ok((source, flux, mult, inhom, vt.d, vt.j, vt.q))
        })
        .collect::<Result<Vec<_>>>()?;
    let dx = g.dx();
    let sum = |f: &dyn Fn(&(f64, f64, f64, f64, f64, f64, [f64; 9])) -> f64| cells.iter().map(f).sum::<f64>() * dx;
    let mut q = [0.0; 9];
    for (k, qk) in q.iter_mut().enumerate() {
        *qk = epsilon * sum(&|c| c.6[k]);
    }
    let n = g.n;
    let j_div = (0..n)
        .map(|i| 0.5 * (cells[(i + 1) % n].5 - cells[(i + n - 1) % n].5))
        .sum::<f64>();
    Ok(Spatial {
        e: rel_entropy_total_unchecked(spec, u, ub),
        source: sum(&|c| c.0),
        flux: sum(&|c| c.1),
        mult: sum(&|c| c.2),
        inhom: sum(&|c| c.3),
        d: epsilon * sum(&|c| c.4),
        q,
        j_div,
    })
}

/// Three-point derivative at the middle of nonuniform stamps.
fn centered(t: [f64; 3], y: [f64; 3]) -> f64 {
    let (h1, h2) = (t[1] - t[0], t[2] - t[1]);
    -h2 / (h1 * (h1 + h2)) * y[0] + (h2 - h1) / (h1 * h2) * y[1] + h1 / (h2 * (h1 + h2)) * y[2]
}

/// Ledger over the interior snapshots of two trajectories on the same grid
/// and time stamps.
pub fn identity_ledger(
    spec: &dyn BalanceLaw,
    u: &Trajectory,
    ub: &Trajectory,
    epsilon: f64,
) -> Result<IdentityLedger> {
    if u.times != ub.times {
        return Err(Error::Ledger("trajectories have different snapshot times".into()));
    }
    if u.fields.len() < 3 {
        return Err(Error::Ledger(format!(
            "need at least 3 snapshots for centered differences, got {}",
            u.fields.len()
        )));
    }
    for (a, b) in u.fields.iter().zip(&ub.fields) {
        same_grid(a, b)?;
        a.check(spec)?;
        b.check(spec)?;
    }
    let spatial = u
        .fields
        .par_iter()
        .zip(ub.fields.par_iter())
        .map(|(a, b)| spatial_terms(spec, a, b, epsilon))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<LedgerRow> = (1..spatial.len() - 1)
        .map(|k| {
            let s = &spatial[k];
            let de_dt = centered(
                [u.times[k - 1], u.times[k], u.times[k + 1]],
                [spatial[k - 1].e, s.e, spatial[k + 1].e],
            );
            let residual = de_dt + s.source + s.flux + s.mult - s.inhom + s.d - s.q.iter().sum::<f64>();
            LedgerRow {
                t: u.times[k],
                rel_entropy: s.e,
                de_dt,
                source_difference: s.source,
                flux_term: s.flux,
                multiplier_term: s.mult,
                inhomogeneity: s.inhom,
                dissipation: s.d,
                q: s.q,
                j_divergence: s.j_div,
                residual,
            }
        })
        .collect();
    let residual_l1 = rows
        .windows(2)
        .map(|w| 0.5 * (w[0].residual.abs() + w[1].residual.abs()) * (w[1].t - w[0].t))
        .sum();
    let fold = |f: &dyn Fn(&LedgerRow) -> f64, init: f64, op: fn(f64, f64) -> f64| rows.iter().map(f).fold(init, op);
    Ok(IdentityLedger {
        epsilon,
        residual_max: fold(&|r| r.residual.abs(), 0.0, f64::max),
        min_dissipation: fold(&|r| r.dissipation, f64::INFINITY, f64::min),
        max_inhomogeneous_q: fold(&|r| r.q[6].abs().max(r.q[7].abs()).max(r.q[8].abs()), 0.0, f64::max),
        max_j_divergence: fold(&|r| r.j_divergence.abs(), 0.0, f64::max),
        residual_l1,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::linalg::state;
    use crate::solver::{solve, Grid1D, Scheme, SolverConfig};
    use crate::systems::make_scalar_sanity;

    fn run(n: usize, amp: f64) -> Trajectory {
        let s = make_scalar_sanity();
        let g = Grid1D::new(n, 2.0 * PI).unwrap();
        let f = Field::new(g, (0..n).map(|i| state(&[amp * g.center(i).sin()])).collect(), 0.0).unwrap();
        let mut cfg = SolverConfig::new(0.2);
        cfg.epsilon = 0.1;
        cfg.scheme = Scheme::Central;
        cfg.dt = Some(0.25 * g.dx());
        solve(&s, &f, &cfg).unwrap().into_result().unwrap()
    }

    #[test]
    fn equal_trajectories_have_an_empty_ledger() {
        let s = make_scalar_sanity();
        let a = run(32, 0.5);
        let l = identity_ledger(&s, &a, &a, 0.1).unwrap();
        for r in &l.rows {
            assert!(r.csv_row().iter().skip(1).all(|v| v.abs() < 1e-15), "{r:?}");
        }
    }

    #[test]
    fn residual_is_second_order() {
        let s = make_scalar_sanity();
        let res = |n: usize| identity_ledger(&s, &run(n, 0.5), &run(n, 0.3), 0.1).unwrap();
        let (a, b) = (res(32), res(64));
        let order = (a.residual_l1 / b.residual_l1).log2();
        assert!(order > 1.7, "{order}");
        assert!(b.min_dissipation >= -1e-12);
        assert!(b.max_j_divergence < 1e-12);
        assert_eq!(b.max_inhomogeneous_q, 0.0);
    }

    #[test]
    fn mismatched_times_are_rejected() {
        let s = make_scalar_sanity();
        let a = run(16, 0.5);
        let mut b = a.clone();
        b.times[1] += 1e-3;
        assert!(matches!(identity_ledger(&s, &a, &b, 0.1), Err(Error::Ledger(_))));
    }
}
