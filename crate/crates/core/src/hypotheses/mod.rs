//! Numerical audit of the structural, growth, inhomogeneity and viscosity
//! hypotheses over sampled clouds of states and space-time points.
//!
//! Asymptotic (`o(1)` as `|U| → ∞`) conditions are audited as decay trends
//! over finite shells and reported as `trend-pass`, never `pass`.

mod cloud;
mod decay;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{symmetric_min_eigenvalue, weighted_sum, State};
use crate::sampling::stream_rng;
use crate::systems::{r_unchecked, BalanceLaw};

pub use cloud::{CloudConfig, CloudPair, CloudPoint, SampleCloud, Shell};
pub use decay::{fit_decay, least_squares, DecayFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    TrendPass,
    NotApplicable,
}

impl Verdict {
    /// Acceptable for aggregation: pass, trend-pass or not applicable.
    pub fn ok(self) -> bool {
        self != Verdict::Fail
    }
}

pub const HYPOTHESIS_IDS: [&str; 19] = [
    "H1", "H2", "H3", "HB", "Hgr1", "Hgr2", "Hgr3", "Hxt1", "Hxt2", "Hxt3", "HBxt", "Hgr4", "Hgr5", "HR1", "HR2",
    "HR3", "HP1", "HP2", "HBpar",
];

/// Asymptotic trend hypotheses; reported, gated only on request.
pub const TREND_IDS: [&str; 6] = ["Hgr2", "Hgr3", "Hgr4", "Hgr5", "HR1", "HR3"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub u: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ubar: Option<Vec<f64>>,
    pub x: f64,
    pub t: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisResult {
    pub id: String,
    pub verdict: Verdict,
    /// Name of the fitted constant (`mu`, `C`, `lambda1`, `slope`, ...).
    pub constant_name: String,
    pub constant: Option<f64>,
    /// Spread of per-point constants between the sampled `(x, t)` and a
    /// fixed reference point, where uniformity in `(x, t)` matters.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xt_spread: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xt_uniform: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shell_ratios: Option<Vec<(f64, f64)>>,
    pub witness: Option<Witness>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    #[serde(default = "d_p")]
    pub p: f64,
    #[serde(default = "d_directions")]
    pub hp2_directions: usize,
    #[serde(default = "d_h1")]
    pub h1_tol: f64,
    #[serde(default = "d_h2")]
    pub h2_tol: f64,
    /// Allowed negative excursion of `(G−Ḡ)·(R−R̄)`, relative to `|G−Ḡ||R−R̄|`.
    #[serde(default = "d_hr2")]
    pub hr2_tol: f64,
    /// Bound below which a term counts as identically zero.
    #[serde(default = "d_zero")]
    pub zero_tol: f64,
    /// Ratio cap flagging non-uniformity in `(x, t)`.
    #[serde(default = "d_uniform")]
    pub uniformity_ratio: f64,
    /// Growth of `|Δ|/|U−Ū|²` along a pair shrunk 100× that marks it unbounded.
    #[serde(default = "d_blowup")]
    pub blowup_factor: f64,
    #[serde(default)]
    pub gate_trends: bool,
}

fn d_p() -> f64 {
    2.0
}
fn d_directions() -> usize {
    64
}
fn d_h1() -> f64 {
    1e-12
}
fn d_h2() -> f64 {
    1e-8
}
fn d_hr2() -> f64 {
    1e-12
}
fn d_zero() -> f64 {
    1e-14
}
fn d_uniform() -> f64 {
    10.0
}
fn d_blowup() -> f64 {
    10.0
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            p: d_p(),
            hp2_directions: d_directions(),
            h1_tol: d_h1(),
            h2_tol: d_h2(),
            hr2_tol: d_hr2(),
            zero_tol: d_zero(),
            uniformity_ratio: d_uniform(),
            blowup_factor: d_blowup(),
            gate_trends: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub system: String,
    pub seed: u64,
    pub samples: usize,
    pub pairs: usize,
    pub p: f64,
    pub results: Vec<HypothesisResult>,
    pub verdict: Verdict,
    pub trend_passes: usize,
    #[serde(skip)]
    pub point_rows: Vec<PointRecord>,
}

impl HypothesisReport {
    pub fn get(&self, id: &str) -> &HypothesisResult {
        self.results.iter().find(|r| r.id == id).expect("unknown hypothesis id")
    }

    pub fn csv_header() -> &'static [&'static str] {
        &["x", "t", "norm_u", "det_da", "h2_entropy", "h2_flux", "h3_lambda_min", "hp1_lambda_min", "hp2_ratio_min"]
    }

    pub fn csv_rows(&self) -> Vec<Vec<f64>> {
        self.point_rows
            .iter()
            .map(|r| {
                vec![
                    r.x,
                    r.t,
                    r.norm_u,
                    r.det_da,
                    r.h2_entropy_residual,
                    r.h2_flux_residual,
                    r.h3_lambda_min,
                    r.hp1_lambda_min,
                    r.hp2_ratio_min,
                ]
            })
            .collect()
    }
}

/// Structural checks at one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointRecord {
    pub x: f64,
    pub t: f64,
    pub norm_u: f64,
    pub det_da: f64,
    /// `|∇η − G·∇A|∞`
    pub h2_entropy_residual: f64,
    /// `max_α |∇q_α − G·∇f_α|∞`
    pub h2_flux_residual: f64,
    /// `λ_min(sym(∇²η − G·∇²A))`
    pub h3_lambda_min: f64,
    /// `λ_min(sym(∇Gᵀ B))`
    pub hp1_lambda_min: f64,
    /// Filled by the sampled audit; `NaN` from [`audit_pointwise`].
    pub hp2_ratio_min: f64,
}

pub fn audit_pointwise(spec: &dyn BalanceLaw, u: &State, x: &[f64], t: f64) -> Result<PointRecord> {
    spec.check(u, x, t)?;
    Ok(pointwise_unchecked(spec, u, x, t))
}

fn h3_lambda(spec: &dyn BalanceLaw, u: &State, x: &[f64], t: f64) -> f64 {
    let h = spec.hess_eta(u, x, t) - weighted_sum(&spec.g(u, x, t), &spec.d2a(u, x, t));
    symmetric_min_eigenvalue(&h)
}

fn hp1_lambda(spec: &dyn BalanceLaw, u: &State, x: &[f64], t: f64) -> f64 {
    symmetric_min_eigenvalue(&(spec.dg(u, x, t).transpose() * spec.b(0, 0, u, x, t)))
}

fn pointwise_unchecked(spec: &dyn BalanceLaw, u: &State, x: &[f64], t: f64) -> PointRecord {
    let da = spec.da(u, x, t);
    let g = spec.g(u, x, t);
    let det = if da.nrows() == 1 { da[(0, 0)] } else { da.determinant() };
    let res_eta = (spec.grad_eta(u, x, t) - da.transpose() * &g).amax();
    let res_q = (0..spec.d())
        .map(|a| (spec.grad_q(a, u, x, t) - spec.dflux(a, u, x, t).transpose() * &g).amax())
        .fold(0.0, f64::max);
    PointRecord {
        x: x[0],
        t,
        norm_u: u.norm(),
        det_da: det.abs(),
        h2_entropy_residual: res_eta,
        h2_flux_residual: res_q,
        h3_lambda_min: h3_lambda(spec, u, x, t),
        hp1_lambda_min: hp1_lambda(spec, u, x, t),
        hp2_ratio_min: f64::NAN,
    }
}

fn witness(p: &CloudPoint, value: f64) -> Witness {
    Witness {
        u: p.u.iter().copied().collect(),
        ubar: None,
        x: p.x,
        t: p.t,
        value,
    }
}

fn pair_witness(p: &CloudPair, value: f64) -> Witness {
    Witness {
        u: p.u.iter().copied().collect(),
        ubar: Some(p.ub.iter().copied().collect()),
        x: p.x,
        t: p.t,
        value,
    }
}

fn result(id: &str, verdict: Verdict, name: &str, constant: Option<f64>, note: impl Into<String>) -> HypothesisResult {
    HypothesisResult {
        id: id.into(),
        verdict,
        constant_name: name.into(),
        constant,
        xt_spread: None,
        xt_uniform: None,
        shell_ratios: None,
        witness: None,
        note: note.into(),
    }
}

/// `(argmax, max)` of a per-item value; NaN entries lose.
fn arg_max<T>(items: &[T], f: impl Fn(&T) -> f64 + Sync) -> Option<(usize, f64)>
where
    T: Sync,
{
    let vals: Vec<f64> = items.par_iter().map(&f).collect();
    vals.iter()
        .enumerate()
        .filter(|(_, v)| !v.is_nan())
        .fold(None, |best: Option<(usize, f64)>, (i, &v)| match best {
            Some((_, b)) if b >= v => best,
            _ => Some((i, v)),
        })
}

fn arg_min<T: Sync>(items: &[T], f: impl Fn(&T) -> f64 + Sync) -> Option<(usize, f64)> {
    arg_max(items, |x| -f(x)).map(|(i, v)| (i, -v))
}

/// Supremum-type boundedness check over the bounded region.
fn sup_bound(id: &str, cloud: &SampleCloud, f: impl Fn(&CloudPoint) -> f64 + Sync, what: &str) -> HypothesisResult {
    match arg_max(&cloud.points, f) {
        Some((i, c)) if c.is_finite() => {
            let mut r = result(id, Verdict::Pass, "C", Some(c), format!("sup of {what} over the bounded region"));
            r.witness = Some(witness(&cloud.points[i], c));
            r
        }
        Some((i, c)) => {
            let mut r = result(id, Verdict::Fail, "C", None, format!("{what} is not finite"));
            r.witness = Some(witness(&cloud.points[i], c));
            r
        }
        None => result(id, Verdict::Fail, "C", None, "no finite samples"),
    }
}

/// Shell-wise sup of a ratio, fitted for decay. `None` when the numerator
/// vanishes identically on every shell.
fn trend(
    id: &str,
    spec: &dyn BalanceLaw,
    cloud: &SampleCloud,
    num: impl Fn(&State, &[f64], f64) -> f64 + Sync,
    what: &str,
    zero_tol: f64,
) -> HypothesisResult {
    let mut ratios = Vec::new();
    let mut worst: Option<Witness> = None;
    let mut all_zero = true;
    for shell in &cloud.shells {
        let found = arg_max(&shell.points, |p| {
            let xs = [p.x];
            let n = num(&p.u, &xs, p.t);
            let e = spec.eta(&p.u, &xs, p.t);
            if e > 0.0 {
                n / e
            } else {
                f64::INFINITY
            }
        });
        if let Some((i, v)) = found {
            if v > zero_tol {
                all_zero = false;
            }
            ratios.push((shell.radius, v));
            worst = Some(witness(&shell.points[i], v));
        }
    }
    if all_zero {
        let mut r = result(id, Verdict::Pass, "sup_ratio", Some(0.0), format!("{what} vanishes on every shell"));
        r.shell_ratios = Some(ratios);
        return r;
    }
    let mut r = match fit_decay(&ratios) {
        Ok(fit) => {
            let v = if fit.trend_pass { Verdict::TrendPass } else { Verdict::Fail };
            result(id, v, "slope", Some(fit.slope), format!("decay fit of shell sup of {what}"))
        }
        Err(e) => result(id, Verdict::Fail, "slope", None, e.to_string()),
    };
    r.shell_ratios = Some(ratios);
    r.witness = worst;
    r
}

/// Paired bound `|Δ| ≤ C|U−Ū|²`. Each pair is also shrunk toward `Ū` by
/// 100×; a ratio that grows by more than `blowup` marks a non-quadratic
/// difference, which no constant can bound.
fn quadratic_pair_bound(
    id: &str,
    spec: &dyn BalanceLaw,
    cloud: &SampleCloud,
    delta: impl Fn(&State, &State, &[f64], f64) -> f64 + Sync,
    blowup: f64,
    what: &str,
) -> HypothesisResult {
    let rows: Vec<(f64, f64)> = cloud
        .pairs
        .par_iter()
        .map(|p| {
            let xs = [p.x];
            let d2 = (&p.u - &p.ub).norm_squared();
            if d2 == 0.0 {
                return (0.0, 0.0);
            }
            let r1 = delta(&p.u, &p.ub, &xs, p.t) / d2;
            let us = &p.ub + (&p.u - &p.ub) * 0.01;
            let rs = if spec.check(&us, &xs, p.t).is_ok() {
                delta(&us, &p.ub, &xs, p.t) / (d2 * 1e-4)
            } else {
                r1
            };
            (r1, rs)
        })
        .collect();
    let c = rows.iter().map(|r| r.0.max(r.1)).fold(0.0, f64::max);
    let grow = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.1 > 1e-6 && r.1 > blowup * r.0.max(1e-300))
        .max_by(|a, b| (a.1 .1 / a.1 .0).total_cmp(&(b.1 .1 / b.1 .0)));
    match grow {
        Some((i, r)) => {
            let mut out = result(
                id,
                Verdict::Fail,
                "C",
                Some(c),
                format!("{what}/|U−Ū|² grows from {:.3e} to {:.3e} as U → Ū", r.0, r.1),
            );
            out.witness = Some(pair_witness(&cloud.pairs[i], r.1));
            out
        }
        None => {
            let mut out = result(id, Verdict::Pass, "C", Some(c), format!("sup of {what}/|U−Ū|² over pairs"));
            if let Some((i, v)) = arg_max(&rows, |r| r.0.max(r.1)) {
                out.witness = Some(pair_witness(&cloud.pairs[i], v));
            }
            out
        }
    }
}

fn vanishes(cloud: &SampleCloud, f: impl Fn(&CloudPoint) -> f64 + Sync, tol: f64) -> bool {
    arg_max(&cloud.points, f).is_none_or(|(_, v)| v <= tol)
}

pub fn audit_sampled(spec: &dyn BalanceLaw, cloud: &SampleCloud, config: &AuditConfig) -> Result<HypothesisReport> {
    // admissibility is checked once up front; everything below is unchecked
    for p in &cloud.points {
        spec.check(&p.u, &[p.x], p.t)?;
    }
    for p in &cloud.pairs {
        spec.check(&p.u, &[p.x], p.t)?;
        spec.check(&p.ub, &[p.x], p.t)?;
    }
    for s in &cloud.shells {
        for p in &s.points {
            spec.check(&p.u, &[p.x], p.t)?;
        }
    }

    let d = spec.d();
    let (x0, t0) = (cloud.points[0].x, cloud.points[0].t);
    let mut rows: Vec<PointRecord> = cloud
        .points
        .par_iter()
        .map(|p| pointwise_unchecked(spec, &p.u, &[p.x], p.t))
        .collect();

    // HP2 direction sampling
    let directions = config.hp2_directions.max(1);
    let hp2: Vec<f64> = cloud
        .points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let xs = [p.x];
            let mut rng = stream_rng(cloud.seed ^ 0x4850_3200, i as u64);
            let dg = spec.dg(&p.u, &xs, p.t);
            let b = spec.b(0, 0, &p.u, &xs, p.t);
            let mut worst = f64::INFINITY;
            for _ in 0..directions {
                let du = State::from_fn(spec.n(), |_, _| rand::Rng::random::<f64>(&mut rng) * 2.0 - 1.0);
                let bdu = &b * &du;
                let lhs = (&dg * &du).dot(&bdu);
                let rhs = bdu.norm_squared();
                let ratio = if rhs > 0.0 {
                    lhs / rhs
                } else if lhs >= 0.0 {
                    continue;
                } else {
                    f64::NEG_INFINITY
                };
                worst = worst.min(ratio);
            }
            worst
        })
        .collect();
    for (r, h) in rows.iter_mut().zip(&hp2) {
        r.hp2_ratio_min = *h;
    }

    let mut results = Vec::with_capacity(HYPOTHESIS_IDS.len());

    // H1
    {
        let (i, v) = arg_min(&rows, |r| r.det_da).unwrap();
        let v_ok = v > config.h1_tol;
        let mut r = result(
            "H1",
            if v_ok { Verdict::Pass } else { Verdict::Fail },
            "min_abs_det",
            Some(v),
            "minimum |det ∇A| over the cloud",
        );
        r.witness = Some(witness(&cloud.points[i], v));
        results.push(r);
    }
    // H2
    {
        let (i, v) = arg_max(&rows, |r| r.h2_entropy_residual.max(r.h2_flux_residual)).unwrap();
        let mut r = result(
            "H2",
            if v <= config.h2_tol { Verdict::Pass } else { Verdict::Fail },
            "max_residual",
            Some(v),
            "max of |∇η − G·∇A|∞ and |∇q − G·∇f|∞",
        );
        r.witness = Some(witness(&cloud.points[i], v));
        results.push(r);
    }
    // H3 with (x, t) uniformity
    {
        let (i, mu) = arg_min(&rows, |r| r.h3_lambda_min).unwrap();
        let (spread, ratio) = xt_spread(&cloud.points, &rows, |p| h3_lambda(spec, &p.u, &[x0], t0), |r| r.h3_lambda_min);
        let mut r = result(
            "H3",
            if mu > 0.0 { Verdict::Pass } else { Verdict::Fail },
            "mu",
            Some(mu),
            "minimum eigenvalue of sym(∇²η − G·∇²A)",
        );
        r.xt_spread = Some(spread);
        r.xt_uniform = Some(ratio <= config.uniformity_ratio);
        r.witness = Some(witness(&cloud.points[i], mu));
        results.push(r);
    }
    // HB
    results.push(sup_bound(
        "HB",
        cloud,
        |p| {
            let xs = [p.x];
            let mut s = spec.a(&p.u, &xs, p.t).norm() + spec.da(&p.u, &xs, p.t).norm();
            for a in 0..d {
                s += spec.flux(a, &p.u, &xs, p.t).norm() + spec.dflux(a, &p.u, &xs, p.t).norm();
            }
            s.max(spec.g(&p.u, &xs, p.t).norm() + spec.dg(&p.u, &xs, p.t).norm())
        },
        "|A|+|∇A|+|f|+|∇f| and |G|+|∇G|",
    ));
    // Hgr1
    results.push(growth_bounds(spec, cloud, config.p));
    // Hgr2, Hgr3
    results.push(trend(
        "Hgr2",
        spec,
        cloud,
        |u, x, t| (0..d).map(|a| spec.flux(a, u, x, t).norm()).fold(0.0, f64::max),
        "|f|/η",
        config.zero_tol,
    ));
    results.push(trend("Hgr3", spec, cloud, |u, x, t| spec.a(u, x, t).norm(), "|A|/η", config.zero_tol));

    // inhomogeneity terms
    let gxt_zero = vanishes(
        cloud,
        |p| {
            let xs = [p.x];
            let mut s = spec.g_t(&p.u, &xs, p.t).amax();
            for a in 0..d {
                s = s.max(spec.g_x(a, &p.u, &xs, p.t).amax());
            }
            s
        },
        config.zero_tol,
    );
    let afx = |u: &State, x: &[f64], t: f64| {
        let mut v = spec.a_t(u, x, t);
        for a in 0..d {
            v += spec.flux_x(a, u, x, t);
        }
        v
    };
    let eqx = |u: &State, x: &[f64], t: f64| spec.eta_t(u, x, t) + (0..d).map(|a| spec.q_x(a, u, x, t)).sum::<f64>();
    let afx_zero = vanishes(cloud, |p| afx(&p.u, &[p.x], p.t).amax(), config.zero_tol);
    let eqx_zero = vanishes(cloud, |p| eqx(&p.u, &[p.x], p.t).abs(), config.zero_tol);

    results.push(if gxt_zero {
        result("Hxt1", Verdict::NotApplicable, "C", None, "G_t and G_x vanish; the terms it controls are absent")
    } else {
        quadratic_pair_bound(
            "Hxt1",
            spec,
            cloud,
            |u, ub, x, t| {
                let mut s = (spec.a(u, x, t) - spec.a(ub, x, t)).norm();
                for a in 0..d {
                    s += (spec.flux(a, u, x, t) - spec.flux(a, ub, x, t)).norm();
                }
                s
            },
            config.blowup_factor,
            "|A−Ā|+|f−f̄|",
        )
    });
    results.push(if afx_zero {
        result("Hxt2", Verdict::NotApplicable, "C", None, "A_t and f_x vanish")
    } else {
        quadratic_pair_bound(
            "Hxt2",
            spec,
            cloud,
            |u, ub, x, t| (afx(u, x, t) - afx(ub, x, t)).norm(),
            config.blowup_factor,
            "|A_t−Ā_t+f_x−f̄_x|",
        )
    });
    results.push(if eqx_zero {
        result("Hxt3", Verdict::NotApplicable, "C", None, "η_t and q_x vanish")
    } else {
        quadratic_pair_bound(
            "Hxt3",
            spec,
            cloud,
            |u, ub, x, t| (eqx(u, x, t) - eqx(ub, x, t)).abs(),
            config.blowup_factor,
            "|η_t−η̄_t+q_x−q̄_x|",
        )
    });
    results.push(sup_bound(
        "HBxt",
        cloud,
        |p| {
            let xs = [p.x];
            let mut s = r_unchecked(spec, &p.u, &xs, p.t).norm() + spec.g_t(&p.u, &xs, p.t).norm();
            for a in 0..d {
                s += spec.g_x(a, &p.u, &xs, p.t).norm();
            }
            s
        },
        "|R|+|G_t|+|G_x|",
    ));
    results.push(if eqx_zero {
        result("Hgr4", Verdict::NotApplicable, "slope", None, "η_t and q_x vanish")
    } else {
        trend("Hgr4", spec, cloud, |u, x, t| eqx(u, x, t).abs(), "|η_t+q_x|/η", config.zero_tol)
    });
    results.push(if afx_zero {
        result("Hgr5", Verdict::NotApplicable, "slope", None, "A_t and f_x vanish")
    } else {
        trend("Hgr5", spec, cloud, |u, x, t| afx(u, x, t).norm(), "|A_t+f_x|/η", config.zero_tol)
    });
    // HR1..3
    results.push(trend(
        "HR1",
        spec,
        cloud,
        |u, x, t| {
            let r = r_unchecked(spec, u, x, t);
            spec.g(u, x, t).dot(&r).abs().max(r.norm())
        },
        "max(|G·R|, |R|)/η",
        config.zero_tol,
    ));
    {
        let vals: Vec<(f64, f64)> = cloud
            .pairs
            .par_iter()
            .map(|p| {
                let xs = [p.x];
                let dg = spec.g(&p.u, &xs, p.t) - spec.g(&p.ub, &xs, p.t);
                let dr = r_unchecked(spec, &p.u, &xs, p.t) - r_unchecked(spec, &p.ub, &xs, p.t);
                (dg.dot(&dr), dg.norm() * dr.norm())
            })
            .collect();
        let (i, v) = arg_min(&vals, |v| v.0 + config.hr2_tol * v.1).unwrap_or((0, 0.0));
        let raw = vals.get(i).map_or(0.0, |v| v.0);
        let mut r = result(
            "HR2",
            if v >= 0.0 { Verdict::Pass } else { Verdict::Fail },
            "min_product",
            Some(raw),
            "minimum of (G−Ḡ)·(R−R̄) over pairs",
        );
        if !cloud.pairs.is_empty() {
            r.witness = Some(pair_witness(&cloud.pairs[i], raw));
        }
        results.push(r);
    }
    results.push(trend("HR3", spec, cloud, |u, x, t| spec.g(u, x, t).norm(), "|G|/η", config.zero_tol));
    // HP1
    {
        let (i, l1) = arg_min(&rows, |r| r.hp1_lambda_min).unwrap();
        let (spread, ratio) = xt_spread(&cloud.points, &rows, |p| hp1_lambda(spec, &p.u, &[x0], t0), |r| r.hp1_lambda_min);
        let mut r = result(
            "HP1",
            if l1 > 0.0 { Verdict::Pass } else { Verdict::Fail },
            "lambda1",
            Some(l1),
            "minimum eigenvalue of sym(∇Gᵀ B)",
        );
        r.xt_spread = Some(spread);
        r.xt_uniform = Some(ratio <= config.uniformity_ratio);
        r.witness = Some(witness(&cloud.points[i], l1));
        results.push(r);
    }
    // HP2
    {
        let (i, l2) = arg_min(&rows, |r| r.hp2_ratio_min).unwrap();
        let mut r = result(
            "HP2",
            if l2 > 0.0 { Verdict::Pass } else { Verdict::Fail },
            "lambda2",
            Some(l2),
            format!("minimum of ∇G∂u·B∂u / |B∂u|² over {directions} random ∂u per point"),
        );
        r.witness = Some(witness(&cloud.points[i], l2));
        results.push(r);
    }
    results.push(sup_bound(
        "HBpar",
        cloud,
        |p| {
            let xs = [p.x];
            let mut s = 0.0;
            for a in 0..d {
                for b in 0..d {
                    s += spec.b(a, b, &p.u, &xs, p.t).norm()
                        + spec.db(a, b, &p.u, &xs, p.t).iter().map(|m| m.norm_squared()).sum::<f64>().sqrt()
                        + spec.b_x(a, b, &p.u, &xs, p.t).norm();
                }
            }
            s
        },
        "|B|+|∇B|+|B_x|",
    ));

    let verdict = aggregate(&results, config.gate_trends);
    let trend_passes = results.iter().filter(|r| r.verdict == Verdict::TrendPass).count();
    Ok(HypothesisReport {
        system: spec.name().to_string(),
        seed: cloud.seed,
        samples: cloud.points.len(),
        pairs: cloud.pairs.len(),
        p: config.p,
        results,
        verdict,
        trend_passes,
        point_rows: rows,
    })
}

/// Spread of a per-point constant between each point's own `(x, t)` and a
/// shared reference point: `(max |Δ|, max ratio)`.
fn xt_spread(
    points: &[CloudPoint],
    rows: &[PointRecord],
    at_ref: impl Fn(&CloudPoint) -> f64 + Sync,
    own: impl Fn(&PointRecord) -> f64 + Sync,
) -> (f64, f64) {
    let pairs: Vec<(f64, f64)> = points
        .par_iter()
        .zip(rows.par_iter())
        .map(|(p, r)| {
            let (a, b) = (own(r), at_ref(p));
            let ratio = if a.signum() == b.signum() && a != 0.0 && b != 0.0 {
                (a / b).max(b / a)
            } else if a == b {
                1.0
            } else {
                f64::INFINITY
            };
            ((a - b).abs(), ratio)
        })
        .collect();
    pairs
        .iter()
        .fold((0.0, 1.0), |(s, r), &(ds, dr)| (f64::max(s, ds), f64::max(r, dr)))
}

/// `β₁(|U|^p + 1) − β₃ ≤ η ≤ β₂(|U|^p + 1)`: `β₂` is the sup of the ratio over
/// every sampled state, `β₁` the infimum on the outermost shell, `β₃` the
/// smallest offset making the lower bound hold everywhere.
fn growth_bounds(spec: &dyn BalanceLaw, cloud: &SampleCloud, p: f64) -> HypothesisResult {
    let all: Vec<&CloudPoint> = cloud
        .points
        .iter()
        .chain(cloud.shells.iter().flat_map(|s| s.points.iter()))
        .collect();
    let ratio = |c: &CloudPoint| spec.eta(&c.u, &[c.x], c.t) / (c.u.norm().powf(p) + 1.0);
    let beta2 = all.par_iter().map(|c| ratio(c)).reduce(|| f64::NEG_INFINITY, f64::max);
    let beta1 = cloud
        .shells
        .last()
        .map(|s| s.points.iter().map(ratio).fold(f64::INFINITY, f64::min))
        .unwrap_or(f64::NAN);
    let beta3 = all
        .par_iter()
        .map(|c| beta1 * (c.u.norm().powf(p) + 1.0) - spec.eta(&c.u, &[c.x], c.t))
        .reduce(|| 0.0, f64::max);
    let ok = beta1 > 0.0 && beta2.is_finite() && beta2 > 0.0 && beta3.is_finite();
    let mut r = result(
        "Hgr1",
        if ok { Verdict::Pass } else { Verdict::Fail },
        "beta1",
        Some(beta1),
        format!("beta2 = {beta2:e}, beta3 = {beta3:e}, p = {p}"),
    );
    r.shell_ratios = Some(vec![(1.0, beta1), (2.0, beta2), (3.0, beta3)]);
    r
}

/// Aggregate verdict. Trend hypotheses gate only when `gate_trends`; the
/// source group needs HR2, or HR1 with HR3 as its alternative; the viscous
/// group needs HP1 or HP2.
pub fn aggregate(results: &[HypothesisResult], gate_trends: bool) -> Verdict {
    let v = |id: &str| results.iter().find(|r| r.id == id).map(|r| r.verdict);
    let passes = |id: &str| v(id) == Some(Verdict::Pass);
    let mut ok = true;
    for r in results {
        let id = r.id.as_str();
        if matches!(id, "HR1" | "HR2" | "HR3" | "HP1" | "HP2") {
            continue;
        }
        if TREND_IDS.contains(&id) && !gate_trends {
            continue;
        }
        ok &= r.verdict.ok();
    }
    let alt = |id: &str| v(id).is_some_and(|x| x == Verdict::Pass || x == Verdict::TrendPass);
    ok &= passes("HR2") || (alt("HR1") && alt("HR3"));
    ok &= passes("HP1") || passes("HP2");
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}
