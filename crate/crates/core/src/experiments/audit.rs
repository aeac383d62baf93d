use super::{snapshot_stride, ExperimentConfig, ExperimentReport, Figure, FigureKind, Outcome, Series, SystemConfig};
use crate::diagnostics::total_entropy;
use crate::error::{Error, Result};
use crate::hypotheses::{audit_sampled, CloudConfig, HypothesisReport, SampleCloud, Verdict};
use crate::sampling::{SpaceTime, StateSampler};
use crate::solver::{solve, Field};

/// Sampled audit of every hypothesis on the configured system over the torus
/// and `[0, t_end]`.
pub fn run_hypothesis_audit(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let p = &cfg.experiment;
    let law = cfg.system.build(p.t_end)?;
    SystemConfig::quiescent_history(&law, p.t_end)?;
    let (default_region, mut sampler) = cfg.system.default_region();
    let c = &p.cloud;
    if let Some(floors) = &c.floors {
        if floors.len() != law.n() {
            return Err(Error::config(
                "experiment.cloud.floors",
                format!("{} entries for a system with {}", floors.len(), law.n()),
            ));
        }
        sampler = StateSampler::unconstrained(law.n());
        for (i, f) in floors.iter().enumerate() {
            if let Some(f) = f {
                sampler = sampler.with_floor(i, *f);
            }
        }
    }
    let mut cloud_cfg = CloudConfig::new(
        c.region.clone().unwrap_or(default_region),
        SpaceTime::torus(p.grid.length, p.t_end),
    );
    cloud_cfg.seed = cfg.seed;
    if let Some(v) = c.samples {
        cloud_cfg.samples = v;
    }
    if let Some(v) = c.pairs {
        cloud_cfg.pairs = v;
    }
    if let Some(v) = &c.shells {
        cloud_cfg.shells = v.clone();
    }
    if let Some(v) = c.shell_samples {
        cloud_cfg.shell_samples = v;
    }
    let cloud = SampleCloud::draw(law.as_ref(), &sampler, &cloud_cfg)?;
    let audit = audit_sampled(law.as_ref(), &cloud, &p.audit)?;
    Ok(audit_report(cfg, &audit))
}

fn audit_report(cfg: &ExperimentConfig, audit: &HypothesisReport) -> ExperimentReport {
    let mut report = ExperimentReport::new("audit", cfg);
    let mut points = Series::new("audit_points", HypothesisReport::csv_header());
    points.rows = audit.csv_rows();
    report.series.push(points);
    report.measure("samples", audit.samples);
    report.measure("pairs", audit.pairs);
    report.measure("trend_passes", audit.trend_passes);
    report.measure("hypotheses", &audit.results);
    let failed: Vec<&str> = audit
        .results
        .iter()
        .filter(|r| r.verdict == Verdict::Fail)
        .map(|r| r.id.as_str())
        .collect();
    match audit.verdict {
        Verdict::Fail => report.conclude(Outcome::Fail, format!("failing hypotheses: {}", failed.join(", "))),
        _ if failed.is_empty() => report.conclude(Outcome::Pass, "all applicable hypotheses pass"),
        _ => report.conclude(
            Outcome::Pass,
            format!("aggregate passes; non-gating failures: {}", failed.join(", ")),
        ),
    }
    report
}

/// Single run from the configured data with `ε = epsilon[0]` (0 by default).
pub fn run_solve(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let p = &cfg.experiment;
    let epsilon = cfg.solver.epsilons(&[0.0])[0];
    let grid = cfg.grid(p.grid.n[0])?;
    let law = cfg.system.build(p.t_end)?;
    let u0 = Field::new(grid, cfg.initial().sample(&grid)?, 0.0)?;
    let (dt, steps) = super::shared_dt(law.as_ref(), &[&u0], &cfg.solver, epsilon, p.t_end)?;
    let run = cfg.solver.run(epsilon, p.t_end, dt, snapshot_stride(steps, p.snapshots));
    let traj = solve(law.as_ref(), &u0, &run)?;

    let mut report = ExperimentReport::new("solve", cfg);
    report.measure("epsilon", epsilon);
    report.measure("n", grid.n);
    report.measure("dt", dt);
    report.measure("steps", traj.dts.len());
    let n = law.n();
    let mut cols = vec!["t".to_string(), "x".to_string()];
    cols.extend((0..n).map(|k| format!("u{k}")));
    let mut snaps = Series::with_columns("snapshots", cols);
    let mut tcols = vec!["t".to_string(), "total_entropy".to_string()];
    tcols.extend((0..n).map(|k| format!("total_a{k}")));
    let mut totals = Series::with_columns("totals", tcols);
    for f in &traj.fields {
        for row in f.csv_rows() {
            snaps.push(std::iter::once(f.t).chain(row).collect());
        }
        let mut row = vec![f.t, total_entropy(law.as_ref(), f)?];
        row.extend(f.total_conserved(law.as_ref()).iter().copied());
        totals.push(row);
    }
    report.series.push(totals);
    report.series.push(snaps);
    report.figures.push(Figure {
        name: "totals".into(),
        kind: FigureKind::TimeSeries,
        title: "total entropy and conserved quantities".into(),
        series: vec!["totals".into()],
        x: "t".into(),
        y: report.series[0].columns[1..].to_vec(),
    });
    report.measure("failure", &traj.failure);
    match &traj.failure {
        None => report.conclude(Outcome::Pass, format!("reached t = {}", p.t_end)),
        Some(f) => report.conclude(Outcome::Fail, format!("step {} at t = {}: {}", f.step, f.t, f.message)),
    }
    Ok(report)
}
