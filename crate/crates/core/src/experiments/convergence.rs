use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::{shared_dt, snapshot_stride, ExperimentConfig, ExperimentReport, Figure, FigureKind, Outcome, Series};
use crate::diagnostics::rel_entropy_total;
use crate::error::{Error, Result};
use crate::hypotheses::least_squares;
use crate::linalg::State;
use crate::solver::{manufactured_forcing, solve, Field, Grid1D, Target, TrigTarget};
use crate::systems::SharedLaw;

const DEFAULT_EPSILONS: [f64; 4] = [1e-2, 5e-3, 2.5e-3, 1.25e-3];
const DEFAULT_MISMATCH: f64 = 0.05;
pub const MIN_EPSILONS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
struct Level {
    n: usize,
    /// `sup_t ∫η(U^ε|Ū*) dx`
    sup_rel_entropy: f64,
    steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct Entry {
    epsilon: f64,
    levels: Vec<Level>,
    saturated: bool,
    value: f64,
    /// Mismatched-data variant at the saturated resolution.
    mismatched: Option<f64>,
    initial_rel_entropy: Option<f64>,
    #[serde(skip)]
    rows: Vec<Vec<f64>>,
}

/// `sup_t ∫η(U|Ū*)` for a viscous run of the system forced so that the
/// target solves its inviscid version exactly, with `U₀ = Ū*(·,0) + offset`.
fn measure(
    cfg: &ExperimentConfig,
    target: &Arc<TrigTarget>,
    epsilon: f64,
    n: usize,
    offset: &State,
) -> Result<(f64, usize, f64, Vec<Vec<f64>>)> {
    let p = &cfg.experiment;
    let grid: Grid1D = cfg.grid(n)?;
    let law: SharedLaw = cfg.system.build(p.t_end)?;
    let reference = |t: f64| -> Result<Field> {
        Field::new(grid, (0..n).map(|i| target.value(grid.center(i), t)).collect(), t)
    };
    let ub0 = reference(0.0)?;
    let u0 = Field::new(grid, ub0.values.iter().map(|v| v + offset).collect(), 0.0)?;
    let forced = manufactured_forcing(law.clone(), target.clone() as Arc<dyn Target>, 0.0);
    let (dt, steps) = shared_dt(&forced, &[&u0], &cfg.solver, epsilon, p.t_end)?;
    let run = cfg.solver.run(epsilon, p.t_end, dt, snapshot_stride(steps, p.snapshots));
    let traj = solve(&forced, &u0, &run)?.into_result()?;
    let e0 = rel_entropy_total(law.as_ref(), &u0, &ub0)?;
    let mut rows = Vec::with_capacity(traj.fields.len());
    for f in &traj.fields {
        rows.push(vec![f.t, rel_entropy_total(law.as_ref(), f, &reference(f.t)?)?]);
    }
    let sup = rows.iter().map(|r| r[1]).fold(f64::NEG_INFINITY, f64::max);
    Ok((sup, steps, e0, rows))
}

fn sweep_entry(cfg: &ExperimentConfig, target: &Arc<TrigTarget>, epsilon: f64, mismatch: &Option<State>) -> Result<Entry> {
    let zero = State::zeros(cfg.system.components());
    let tol = cfg.tolerances.saturation;
    let mut levels = Vec::new();
    let mut rows = Vec::new();
    let mut n = cfg.experiment.grid.n[0];
    let mut saturated = false;
    while n <= cfg.experiment.grid.n_max {
        let (sup, steps, _, r) = measure(cfg, target, epsilon, n, &zero)?;
        let prev = levels.last().map(|l: &Level| l.sup_rel_entropy);
        levels.push(Level {
            n,
            sup_rel_entropy: sup,
            steps,
        });
        rows = r;
        if let Some(prev) = prev {
            if (sup - prev).abs() <= tol * prev.abs().max(f64::MIN_POSITIVE) {
                saturated = true;
                break;
            }
        }
        n *= 2;
    }
    let last = levels.last().ok_or_else(|| {
        Error::config("experiment.grid.n_max", "smaller than the base resolution")
    })?;
    let (mismatched, e0) = match mismatch {
        Some(c) => {
            let (sup, _, e0, _) = measure(cfg, target, epsilon, last.n, c)?;
            (Some(sup), Some(e0))
        }
        None => (None, None),
    };
    Ok(Entry {
        epsilon,
        value: last.sup_rel_entropy,
        levels,
        saturated,
        mismatched,
        initial_rel_entropy: e0,
        rows,
    })
}

/// Vanishing-viscosity sweep against a manufactured smooth reference `Ū*`
/// of the inviscid system. Each `ε` doubles the grid until
/// `E(ε) = sup_t ∫η(U^ε|Ū*)` changes by less than the saturation tolerance;
/// the verdict checks the log-log slope of `E` against `ε` and, for the
/// offset-data variant, the plateau at the initial relative entropy.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let eps = cfg.viscous_epsilons(&DEFAULT_EPSILONS)?;
    if eps.len() < MIN_EPSILONS {
        return Err(Error::config(
            "solver.epsilon",
            format!("convergence needs at least {MIN_EPSILONS} values, got {}", eps.len()),
        ));
    }
    let p = &cfg.experiment;
    let target = Arc::new(p.target.clone().unwrap_or_else(|| cfg.system.default_target()));
    let ncomp = cfg.system.components();
    let mismatch = p
        .mismatch
        .clone()
        .unwrap_or_else(|| vec![DEFAULT_MISMATCH; ncomp]);
    let mismatch = (mismatch.iter().any(|c| *c != 0.0)).then(|| State::from_vec(mismatch));

    let mut report = ExperimentReport::new("convergence", cfg);
    report.reference = Some("manufactured exact solution of the inviscid forced system".into());
    let entries = eps
        .par_iter()
        .map(|&e| sweep_entry(cfg, &target, e, &mismatch))
        .collect::<Result<Vec<_>>>()?;

    let mut summary = Series::new(
        "convergence",
        &["epsilon", "sup_rel_entropy", "n", "mismatched_sup", "initial_rel_entropy"],
    );
    for (k, e) in entries.iter().enumerate() {
        summary.push(vec![
            e.epsilon,
            e.value,
            e.levels.last().map_or(f64::NAN, |l| l.n as f64),
            e.mismatched.unwrap_or(f64::NAN),
            e.initial_rel_entropy.unwrap_or(f64::NAN),
        ]);
        let mut s = Series::new(format!("convergence_eps{k}"), &["t", "rel_entropy"]);
        s.rows = e.rows.clone();
        report.series.push(s);
    }
    report.series.insert(0, summary);
    let mut y = vec!["sup_rel_entropy".to_string()];
    if mismatch.is_some() {
        y.push("mismatched_sup".into());
    }
    report.figures.push(Figure {
        name: "convergence_loglog".into(),
        kind: FigureKind::LogLog,
        title: "sup_t int eta(U^eps | U*) dx against epsilon".into(),
        series: vec!["convergence".into()],
        x: "epsilon".into(),
        y,
    });
    report.figures.push(Figure {
        name: "convergence_time".into(),
        kind: FigureKind::TimeSeries,
        title: "relative entropy to the manufactured reference".into(),
        series: (0..entries.len()).map(|k| format!("convergence_eps{k}")).collect(),
        x: "t".into(),
        y: vec!["rel_entropy".into()],
    });

    let lx: Vec<f64> = entries.iter().map(|e| e.epsilon.ln()).collect();
    let ly: Vec<f64> = entries.iter().map(|e| e.value.ln()).collect();
    let range = lx.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - lx.iter().cloned().fold(f64::INFINITY, f64::min);
    let slope = if ly.iter().all(|v| v.is_finite()) {
        least_squares(&lx, &ly).0
    } else {
        f64::NAN
    };
    report.measure("slope", slope);
    let plateau: Vec<f64> = entries
        .iter()
        .filter_map(|e| Some((e.mismatched? - e.initial_rel_entropy?).abs() / e.initial_rel_entropy?))
        .collect();
    let plateau_dev = plateau.iter().cloned().fold(0.0, f64::max);
    if mismatch.is_some() {
        report.measure("plateau_deviation", plateau_dev);
    }
    report.measure("entries", &entries);

    let [lo, hi] = cfg.tolerances.slope_window;
    let plateau_ok = mismatch.is_none() || plateau_dev <= cfg.tolerances.plateau;
    if range < 1e-12 {
        report.conclude(Outcome::Inconclusive, "epsilon values are not distinct; the slope is undefined");
    } else if let Some(e) = entries.iter().find(|e| !e.saturated) {
        report.conclude(
            Outcome::Inconclusive,
            format!(
                "grid not saturated for epsilon = {} within n_max = {}",
                e.epsilon, cfg.experiment.grid.n_max
            ),
        );
    } else if !slope.is_finite() {
        report.conclude(Outcome::Inconclusive, "zero or non-finite relative entropy; no slope");
    } else if !(lo..=hi).contains(&slope) {
        report.conclude(Outcome::Fail, format!("slope {slope} outside [{lo}, {hi}]"));
    } else if !plateau_ok {
        report.conclude(
            Outcome::Fail,
            format!("mismatched data deviates {plateau_dev} from the initial level"),
        );
    } else {
        report.conclude(Outcome::Pass, format!("slope {slope} within [{lo}, {hi}]"));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.experiment.grid.n = vec![32];
        c.experiment.grid.n_max = 256;
        c.experiment.t_end = 0.5;
        c.experiment.snapshots = 10;
        c.solver.epsilon = Some(vec![4e-2, 2e-2, 1e-2]);
        c
    }

    #[test]
    fn single_epsilon_is_a_config_error() {
        let mut c = quick();
        c.solver.epsilon = Some(vec![1e-2]);
        assert!(matches!(run_convergence(&c), Err(Error::Config { .. })));
    }

    #[test]
    fn equal_epsilons_are_inconclusive() {
        let mut c = quick();
        c.solver.epsilon = Some(vec![2e-2; 3]);
        let r = run_convergence(&c).unwrap();
        assert_eq!(r.verdict, Outcome::Inconclusive);
        let slope = r.measurements["slope"].as_f64().unwrap();
        assert!(slope.abs() < 1e-9);
    }

    #[test]
    fn offset_data_plateaus_at_the_initial_level() {
        let r = run_convergence(&quick()).unwrap();
        let dev = r.measurements["plateau_deviation"].as_f64().unwrap();
        assert!(dev < 0.1, "{dev}");
        let s = r.series("convergence").unwrap();
        assert!(s.rows.iter().all(|row| row[1] > 0.0));
    }
}
