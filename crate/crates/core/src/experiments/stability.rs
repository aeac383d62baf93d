use rayon::prelude::*;
use serde::Serialize;

use super::{
    aligned, l2_distance, shared_dt, snapshot_stride, ExperimentConfig, ExperimentReport, Figure, FigureKind, Outcome,
    Series,
};
use crate::diagnostics::{gronwall_fit, rel_entropy_total, GronwallFit};
use crate::error::{Error, Result};
use crate::solver::{solve, Field, StepFailure};

const DEFAULT_EPSILONS: [f64; 3] = [1e-3, 1e-2, 1e-1];
const DEFAULT_DELTA: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
struct Entry {
    epsilon: f64,
    /// `sup_t ‖U−Ū‖₂ / ‖U₀−Ū₀‖₂`
    ratio: f64,
    initial_distance: f64,
    steps: usize,
    dt: f64,
    gronwall: Option<GronwallFit>,
    failure: Option<StepFailure>,
    #[serde(skip)]
    rows: Vec<Vec<f64>>,
}

fn twin(cfg: &ExperimentConfig, epsilon: f64, delta: f64) -> Result<Entry> {
    let p = &cfg.experiment;
    let t_end = p.t_end;
    let n = p.grid.n[0];
    let grid = cfg.grid(n)?;
    let init = cfg.initial().sample(&grid)?;
    let bump = p.perturbation.profile(delta, &grid, cfg.system.components());
    let u0 = Field::new(grid, init.clone(), 0.0)?;
    let ub0 = Field::new(grid, init.iter().zip(&bump).map(|(a, b)| a + b).collect(), 0.0)?;
    // separate instances so that memory systems keep separate histories
    let (law, law_b) = (cfg.system.build(t_end)?, cfg.system.build(t_end)?);
    let (dt, steps) = shared_dt(law.as_ref(), &[&u0, &ub0], &cfg.solver, epsilon, t_end)?;
    let run = cfg.solver.run(epsilon, t_end, dt, snapshot_stride(steps, p.snapshots));
    let (a, b) = rayon::join(|| solve(law.as_ref(), &u0, &run), || solve(law_b.as_ref(), &ub0, &run));
    let (a, b) = (a?, b?);
    let failure = a.failure.clone().or_else(|| b.failure.clone());
    let d0 = l2_distance(&u0, &ub0);
    let mut rows = Vec::new();
    if failure.is_none() {
        if !aligned(&a, &b) {
            return Err(Error::Ledger("twin runs have different snapshot times".into()));
        }
        for (fa, fb) in a.fields.iter().zip(&b.fields) {
            let d = l2_distance(fa, fb);
            let e = rel_entropy_total(law.as_ref(), fa, fb)?;
            rows.push(vec![fa.t, d, d / d0, e]);
        }
    }
    let ratio = if failure.is_some() {
        f64::INFINITY
    } else {
        rows.iter().map(|r| r[2]).fold(f64::NEG_INFINITY, f64::max)
    };
    let gronwall = if failure.is_none() && d0 > 0.0 {
        let times: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let series: Vec<f64> = rows.iter().map(|r| r[3]).collect();
        Some(gronwall_fit(&series, &times, cfg.tolerances.gronwall)?)
    } else {
        None
    };
    Ok(Entry {
        epsilon,
        ratio,
        initial_distance: d0,
        steps,
        dt,
        gronwall,
        failure,
        rows,
    })
}

/// Twin viscous runs from `U₀` and `U₀ + δ·bump` for every `ε`; the ratio
/// `S(ε) = sup_t ‖U−Ū‖₂/‖U₀−Ū₀‖₂` must stay within the cap across the sweep
/// and `∫η(U|Ū)` inside its fitted Gronwall envelope.
pub fn run_stability(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let eps = cfg.viscous_epsilons(&DEFAULT_EPSILONS)?;
    let delta = cfg.experiment.perturbation.amplitude.unwrap_or(DEFAULT_DELTA);
    let mut report = ExperimentReport::new("stability", cfg);
    report.measure("delta", delta);
    report.measure("n", cfg.experiment.grid.n[0]);
    let entries = eps.par_iter().map(|&e| twin(cfg, e, delta)).collect::<Result<Vec<_>>>()?;

    let mut summary = Series::new("stability_ratio", &["epsilon", "ratio", "gronwall_rate", "gronwall_excess"]);
    for (k, e) in entries.iter().enumerate() {
        let (rate, excess) = e.gronwall.as_ref().map_or((f64::NAN, f64::NAN), |g| (g.rate, g.max_excess));
        summary.push(vec![e.epsilon, e.ratio, rate, excess]);
        let mut s = Series::new(format!("stability_eps{k}"), &["t", "l2_distance", "ratio", "rel_entropy"]);
        s.rows = e.rows.clone();
        report.series.push(s);
    }
    report.series.insert(0, summary);
    report.figures.push(Figure {
        name: "stability_ratio".into(),
        kind: FigureKind::LogLog,
        title: "sup_t |U-Ubar| / |U0-Ubar0| against epsilon".into(),
        series: vec!["stability_ratio".into()],
        x: "epsilon".into(),
        y: vec!["ratio".into()],
    });
    report.figures.push(Figure {
        name: "stability_time".into(),
        kind: FigureKind::TimeSeries,
        title: "twin-run distance ratio".into(),
        series: (0..entries.len()).map(|k| format!("stability_eps{k}")).collect(),
        x: "t".into(),
        y: vec!["ratio".into()],
    });

    let ratios: Vec<f64> = entries.iter().map(|e| e.ratio).collect();
    let (lo, hi) = ratios
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &r| (a.min(r), b.max(r)));
    let spread = hi / lo;
    report.measure("ratio_max", hi);
    report.measure("ratio_min", lo);
    report.measure("ratio_spread", spread);
    report.measure("entries", &entries);

    if let Some(e) = entries.iter().find(|e| e.failure.is_some()) {
        let f = e.failure.as_ref().unwrap();
        report.conclude(
            Outcome::Fail,
            format!("solver failed for epsilon = {} at t = {}: {}", e.epsilon, f.t, f.message),
        );
    } else if entries.iter().all(|e| e.initial_distance == 0.0) {
        report.conclude(Outcome::Inconclusive, "degenerate: zero perturbation keeps U identical to Ubar");
    } else if !ratios.iter().all(|r| r.is_finite()) {
        report.conclude(Outcome::Fail, "non-finite stability ratio");
    } else if spread > cfg.tolerances.stability_ratio_cap {
        report.conclude(
            Outcome::Fail,
            format!("ratio spread {spread} exceeds cap {}", cfg.tolerances.stability_ratio_cap),
        );
    } else if let Some(e) = entries.iter().find(|e| e.gronwall.as_ref().is_some_and(|g| g.violated)) {
        report.conclude(
            Outcome::Fail,
            format!("Gronwall envelope exceeded for epsilon = {}", e.epsilon),
        );
    } else {
        report.conclude(
            Outcome::Pass,
            format!("ratio spread {spread} within cap {}", cfg.tolerances.stability_ratio_cap),
        );
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.experiment.grid.n = vec![32];
        c.experiment.t_end = 0.5;
        c.experiment.snapshots = 20;
        c
    }

    #[test]
    fn scalar_sweep_is_uniform_in_epsilon() {
        let r = run_stability(&quick()).unwrap();
        assert_eq!(r.verdict, Outcome::Pass, "{}", r.reason);
        assert_eq!(r.series("stability_ratio").unwrap().rows.len(), 3);
    }

    #[test]
    fn zero_perturbation_is_degenerate() {
        let mut c = quick();
        c.experiment.perturbation.amplitude = Some(0.0);
        let r = run_stability(&c).unwrap();
        assert_eq!(r.verdict, Outcome::Inconclusive);
        assert!(r.reason.contains("degenerate"));
    }

    #[test]
    fn sup_ratio_grows_with_the_window() {
        let mut c = quick();
        c.solver.epsilon = Some(vec![1e-2]);
        let short = run_stability(&c).unwrap();
        c.experiment.t_end = 1.0;
        let long = run_stability(&c).unwrap();
        let s = |r: &ExperimentReport| r.series("stability_ratio").unwrap().rows[0][1];
        assert!(s(&long) >= s(&short));
    }
}
