use rayon::prelude::*;
use serde::Serialize;

use super::{
    fitted_order, shared_dt, ExperimentConfig, ExperimentReport, Figure, FigureKind, Outcome, Series,
};
use crate::diagnostics::{identity_ledger, IdentityLedger, LedgerRow};
use crate::error::Result;
use crate::solver::{solve, Field, StepFailure};

const DEFAULT_EPSILON: f64 = 0.05;
const DEFAULT_DELTA: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize)]
struct Entry {
    n: usize,
    dt: f64,
    residual_l1: Option<f64>,
    residual_max: Option<f64>,
    min_dissipation: Option<f64>,
    max_inhomogeneous_q: Option<f64>,
    max_j_divergence: Option<f64>,
    failure: Option<StepFailure>,
    #[serde(skip)]
    ledger: Option<IdentityLedger>,
}

fn entry(cfg: &ExperimentConfig, n: usize, epsilon: f64, delta: f64) -> Result<Entry> {
    let p = &cfg.experiment;
    let grid = cfg.grid(n)?;
    let init = cfg.initial().sample(&grid)?;
    let bump = p.perturbation.profile(delta, &grid, cfg.system.components());
    let u0 = Field::new(grid, init.clone(), 0.0)?;
    let ub0 = Field::new(grid, init.iter().zip(&bump).map(|(a, b)| a + b).collect(), 0.0)?;
    let (law, law_b) = (cfg.system.build(p.t_end)?, cfg.system.build(p.t_end)?);
    let (dt, _) = shared_dt(law.as_ref(), &[&u0, &ub0], &cfg.solver, epsilon, p.t_end)?;
    // every step is a snapshot: the ledger differentiates in time
    let run = cfg.solver.run(epsilon, p.t_end, dt, 1);
    let (a, b) = rayon::join(|| solve(law.as_ref(), &u0, &run), || solve(law_b.as_ref(), &ub0, &run));
    let (a, b) = (a?, b?);
    if let Some(f) = a.failure.clone().or_else(|| b.failure.clone()) {
        return Ok(Entry {
            n,
            dt,
            residual_l1: None,
            residual_max: None,
            min_dissipation: None,
            max_inhomogeneous_q: None,
            max_j_divergence: None,
            failure: Some(f),
            ledger: None,
        });
    }
    let ledger = identity_ledger(law.as_ref(), &a, &b, epsilon)?;
    Ok(Entry {
        n,
        dt,
        residual_l1: Some(ledger.residual_l1),
        residual_max: Some(ledger.residual_max),
        min_dissipation: Some(ledger.min_dissipation),
        max_inhomogeneous_q: Some(ledger.max_inhomogeneous_q),
        max_j_divergence: Some(ledger.max_j_divergence),
        failure: None,
        ledger: Some(ledger),
    })
}

/// Identity ledger of twin viscous runs over the resolution sweep; the
/// time-integrated residual must converge at the configured order and the
/// dissipation stay nonnegative.
pub fn run_identity_check(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let epsilon = cfg.viscous_epsilons(&[DEFAULT_EPSILON])?[0];
    let delta = cfg.experiment.perturbation.amplitude.unwrap_or(DEFAULT_DELTA);
    let mut report = ExperimentReport::new("identity", cfg);
    report.measure("epsilon", epsilon);
    report.measure("delta", delta);
    let ns = cfg.experiment.grid.n.clone();
    let entries = ns
        .par_iter()
        .map(|&n| entry(cfg, n, epsilon, delta))
        .collect::<Result<Vec<_>>>()?;

    let mut summary = Series::new(
        "identity_refinement",
        &["n", "residual_l1", "residual_max", "min_dissipation", "max_inhomogeneous_q"],
    );
    for e in &entries {
        let v = |o: Option<f64>| o.unwrap_or(f64::NAN);
        summary.push(vec![
            e.n as f64,
            v(e.residual_l1),
            v(e.residual_max),
            v(e.min_dissipation),
            v(e.max_inhomogeneous_q),
        ]);
        if let Some(l) = &e.ledger {
            let mut s = Series::with_columns(format!("ledger_n{}", e.n), LedgerRow::csv_header());
            s.rows = l.rows.iter().map(LedgerRow::csv_row).collect();
            report.series.push(s);
        }
    }
    report.series.insert(0, summary);
    report.figures.push(Figure {
        name: "identity_refinement".into(),
        kind: FigureKind::LogLog,
        title: "time-integrated ledger residual against N".into(),
        series: vec!["identity_refinement".into()],
        x: "n".into(),
        y: vec!["residual_l1".into()],
    });
    if let Some(finest) = entries.iter().rev().find(|e| e.ledger.is_some()) {
        let mut y: Vec<String> = LedgerRow::csv_header()
            .into_iter()
            .filter(|c| c != "t" && c != "rel_entropy" && c != "j_divergence")
            .collect();
        y.retain(|c| c != "residual");
        y.push("residual".into());
        report.figures.push(Figure {
            name: "identity_ledger".into(),
            kind: FigureKind::Stack,
            title: format!("ledger terms at N = {}", finest.n),
            series: vec![format!("ledger_n{}", finest.n)],
            x: "t".into(),
            y,
        });
    }

    let ns_f: Vec<f64> = entries.iter().map(|e| e.n as f64).collect();
    let residuals: Vec<f64> = entries.iter().map(|e| e.residual_l1.unwrap_or(f64::NAN)).collect();
    let order = fitted_order(&ns_f, &residuals);
    report.measure("order", order);
    report.measure("entries", &entries);
    let min_d = entries
        .iter()
        .filter_map(|e| e.min_dissipation)
        .fold(f64::INFINITY, f64::min);
    let floor = cfg.tolerances.dissipation_floor;
    let need = cfg.tolerances.identity_order;
    if let Some(e) = entries.iter().find(|e| e.failure.is_some()) {
        let f = e.failure.as_ref().unwrap();
        report.conclude(Outcome::Fail, format!("solver failed at N = {}, t = {}: {}", e.n, f.t, f.message));
    } else if min_d < floor {
        report.conclude(Outcome::Fail, format!("negative dissipation: eps int D = {min_d}"));
    } else if residuals.iter().all(|r| *r == 0.0) {
        report.conclude(Outcome::Pass, "identically zero ledger");
    } else {
        match order {
            Some(o) if o >= need => report.conclude(Outcome::Pass, format!("residual order {o}")),
            Some(o) => report.conclude(Outcome::Fail, format!("residual order {o} below {need}")),
            None if entries.len() < 2 => report.conclude(Outcome::Inconclusive, "need at least two resolutions"),
            None => report.conclude(Outcome::Fail, "residual not positive at every resolution"),
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::SystemConfig;

    fn quick() -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.experiment.grid.n = vec![32, 64];
        c.experiment.t_end = 0.2;
        c
    }

    #[test]
    fn smooth_pair_converges() {
        let r = run_identity_check(&quick()).unwrap();
        assert_eq!(r.verdict, Outcome::Pass, "{}", r.reason);
        assert!(r.series("ledger_n64").is_some());
    }

    #[test]
    fn equal_data_gives_a_zero_ledger() {
        let mut c = quick();
        c.experiment.perturbation.amplitude = Some(0.0);
        let r = run_identity_check(&c).unwrap();
        assert_eq!(r.verdict, Outcome::Pass);
        assert_eq!(r.reason, "identically zero ledger");
    }

    #[test]
    fn negative_viscosity_is_flagged() {
        let mut c = quick();
        c.system = SystemConfig::ScalarSanity { viscosity: -1.0 };
        c.experiment.t_end = 0.05;
        let r = run_identity_check(&c).unwrap();
        assert_eq!(r.verdict, Outcome::Fail, "{}", r.reason);
    }
}
