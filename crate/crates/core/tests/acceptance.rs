//! Acceptance checks, one line per criterion. Exits nonzero if any fails.

use std::path::{Path, PathBuf};
use std::process::Command as Proc;
use std::time::{Duration, Instant};

use relent_core::cli::{dispatch, parse_config, Command};
use relent_core::experiments::{ExperimentReport, Outcome, SystemConfig};
use relent_core::linalg::{state, State};
use relent_core::relent::{quadratic_form, rel_entropy, rel_flux, rel_multiplier, rel_remainders};
use relent_core::solver::{solve, Field, Grid1D, Scheme, SolverConfig, Target, TrigComponent, TrigTarget};
use relent_core::systems::{make_scalar_sanity, resolvent_kernel, SharedLaw};

type Check = Result<String, String>;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(command: Command, file: &str) -> Result<(ExperimentReport, Duration), String> {
    let text = std::fs::read_to_string(configs().join(file)).map_err(|e| format!("{file}: {e}"))?;
    let cfg = parse_config(&text).map_err(|e| format!("{file}: {e}"))?;
    let start = Instant::now();
    let report = dispatch(command, &cfg);
    Ok((report, start.elapsed()))
}

fn num(r: &ExperimentReport, key: &str) -> Option<f64> {
    r.measurements.get(key).and_then(|v| v.as_f64())
}

fn within(label: &str, took: Duration, budget: u64) -> Result<(), String> {
    if took > Duration::from_secs(budget) {
        return Err(format!("{label} took {:.1}s, budget {budget}s", took.as_secs_f64()));
    }
    Ok(())
}

fn ac1() -> Check {
    let (r, took) = run(Command::Audit, "audit_duct.json")?;
    within("audit", took, 10)?;
    let samples = num(&r, "samples").unwrap_or(0.0);
    if samples < 1e4 {
        return Err(format!("only {samples} samples"));
    }
    let hyps = r.measurements["hypotheses"].as_array().ok_or("no hypotheses")?;
    let get = |id: &str| hyps.iter().find(|h| h["id"] == id).cloned().unwrap_or_default();
    for id in ["H1", "H2", "H3"] {
        if get(id)["verdict"] != "pass" {
            return Err(format!("{id} is {}", get(id)["verdict"]));
        }
    }
    let residual = get("H2")["constant"].as_f64().unwrap_or(f64::INFINITY);
    let mu = get("H3")["constant"].as_f64().unwrap_or(0.0);
    let spread = get("H3")["xt_spread"].as_f64().unwrap_or(f64::INFINITY);
    if residual > 1e-8 || mu <= 0.0 || spread > 1e-10 {
        return Err(format!("H2 residual {residual:e}, H3 mu {mu}, spread {spread:e}"));
    }
    Ok(format!(
        "{samples} samples, H2 residual {residual:.1e}, H3 mu {mu:.4} spread {spread:.1e}, {:.2}s",
        took.as_secs_f64()
    ))
}

fn builtin(json: &str) -> SharedLaw {
    let cfg: SystemConfig = serde_json::from_str(json).unwrap();
    let law = cfg.build(1.0).unwrap();
    SystemConfig::quiescent_history(&law, 1.0).unwrap();
    law
}

fn slope(s: &[f64], v: &[f64]) -> f64 {
    let n = s.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = s.iter().zip(v).map(|(a, b)| (a.ln(), b.ln())).unzip();
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

fn ac2() -> Check {
    let specs = [
        ("scalar_sanity", r#"{"kind":"scalar_sanity"}"#, vec![0.3], vec![1.0]),
        ("duct_gas", r#"{"kind":"duct_gas"}"#, vec![1.2, 0.4], vec![0.7, -0.5]),
        ("duct_gas weighted", r#"{"kind":"duct_gas","form":"weighted"}"#, vec![1.2, 0.4], vec![0.7, -0.5]),
        ("memory_scalar", r#"{"kind":"memory_scalar"}"#, vec![0.3], vec![1.0]),
        ("warped_scalar", r#"{"kind":"warped_scalar"}"#, vec![0.3], vec![1.0]),
    ];
    let steps = [1e-2, 5e-3, 2.5e-3];
    let (x, t) = ([0.7], 0.3);
    let mut worst_rel = 0.0f64;
    let mut slopes = Vec::new();
    for (name, json, ub, delta) in specs {
        let law = builtin(json);
        let (ub, delta) = (State::from_vec(ub), State::from_vec(delta));
        let at = |s: f64| ub.clone() + delta.clone() * s;
        let scaled: Vec<f64> = steps
            .iter()
            .map(|&s| rel_entropy(law.as_ref(), &at(s), &ub, &x, t).map(|e| e / (s * s)))
            .collect::<Result<_, _>>()
            .map_err(|e| format!("{name}: {e}"))?;
        // removes the O(s) and O(s^2) error terms
        let extrapolated = (8.0 * scaled[2] - 6.0 * scaled[1] + scaled[0]) / 3.0;
        let exact = quadratic_form(law.as_ref(), &ub, &delta, &x, t).map_err(|e| format!("{name}: {e}"))?;
        let rel = (extrapolated - exact).abs() / exact.abs();
        worst_rel = worst_rel.max(rel);
        if rel > 1e-4 {
            return Err(format!("{name}: limit {extrapolated} vs {exact} (rel {rel:e})"));
        }

        let mut norms: Vec<(&str, Vec<f64>)> =
            ["rel_flux", "rel_multiplier", "phi", "G1", "G2"].iter().map(|k| (*k, Vec::new())).collect();
        for &s in &steps {
            let u = at(s);
            let f = rel_flux(law.as_ref(), &u, &ub, &x, t).map_err(|e| e.to_string())?;
            let g = rel_multiplier(law.as_ref(), &u, &ub, &x, t).map_err(|e| e.to_string())?;
            let rem = rel_remainders(law.as_ref(), &u, &ub, &x, t).map_err(|e| e.to_string())?;
            norms[0].1.push(f[0].amax());
            norms[1].1.push(g.amax());
            norms[2].1.push(rem.phi.amax());
            norms[3].1.push(rem.g1.amax());
            norms[4].1.push(rem.g2[0].amax());
        }
        for (what, v) in norms {
            // identically zero remainders (e.g. A = U) are trivially bounded
            if v.iter().all(|n| *n < 1e-14) {
                continue;
            }
            let k = slope(&steps, &v);
            slopes.push(k);
            if !(1.8..=2.2).contains(&k) {
                return Err(format!("{name}: {what} slope {k:.3}"));
            }
        }
    }
    let (lo, hi) = slopes.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), k| (a.min(*k), b.max(*k)));
    Ok(format!("5 specs, worst limit error {worst_rel:.1e}, remainder slopes in [{lo:.3}, {hi:.3}]"))
}

fn ac3() -> Check {
    let mut parts = Vec::new();
    for (file, homogeneous) in [("identity_scalar.json", true), ("identity_duct.json", false)] {
        let (r, took) = run(Command::Identity, file)?;
        within(file, took, 120)?;
        if r.verdict != Outcome::Pass {
            return Err(format!("{file}: {:?} ({})", r.verdict, r.reason));
        }
        let order = num(&r, "order").ok_or("no order")?;
        let entries = r.measurements["entries"].as_array().ok_or("no entries")?;
        let min_d = entries
            .iter()
            .filter_map(|e| e["min_dissipation"].as_f64())
            .fold(f64::INFINITY, f64::min);
        if order < 1.7 || min_d < -1e-12 {
            return Err(format!("{file}: order {order}, min eps int D {min_d:e}"));
        }
        if homogeneous {
            for s in r.series.iter().filter(|s| s.name.starts_with("ledger_n")) {
                for col in ["eps_q7", "eps_q8", "eps_q9"] {
                    let k = s.columns.iter().position(|c| c == col).ok_or("missing Q column")?;
                    if s.rows.iter().any(|row| row[k] != 0.0) {
                        return Err(format!("{file}: {col} nonzero in {}", s.name));
                    }
                }
            }
        }
        parts.push(format!("{} order {order:.2} ({:.1}s)", r.system, took.as_secs_f64()));
    }
    Ok(format!("{}, Q7-Q9 = 0 on scalar sanity", parts.join(", ")))
}

fn ac4() -> Check {
    let mut parts = Vec::new();
    for file in ["stability_scalar.json", "stability_duct.json"] {
        let (r, took) = run(Command::Stability, file)?;
        within(file, took, 180)?;
        let spread = num(&r, "ratio_spread").unwrap_or(f64::NAN);
        if r.verdict != Outcome::Pass {
            return Err(format!("{file}: {:?} ({})", r.verdict, r.reason));
        }
        parts.push(format!("{} spread {spread:.3} ({:.1}s)", r.system, took.as_secs_f64()));
    }
    Ok(parts.join(", "))
}

fn ac5() -> Check {
    let mut parts = Vec::new();
    let mut failures = Vec::new();
    for file in ["convergence_scalar.json", "convergence_duct.json"] {
        let (r, took) = run(Command::Convergence, file)?;
        within(file, took, 300)?;
        let slope = num(&r, "slope").unwrap_or(f64::NAN);
        let plateau = num(&r, "plateau_deviation").unwrap_or(f64::NAN);
        let line = format!("{} slope {slope:.3} plateau {plateau:.3}", r.system);
        if r.verdict != Outcome::Pass {
            failures.push(format!("{line}: {:?} ({})", r.verdict, r.reason));
        }
        parts.push(line);
    }
    if failures.is_empty() {
        Ok(parts.join(", "))
    } else {
        Err(failures.join("; "))
    }
}

fn ac6() -> Check {
    let mut parts = Vec::new();
    for file in ["weakstrong_scalar.json", "weakstrong_duct.json"] {
        let (r, took) = run(Command::Weakstrong, file)?;
        within(file, took, 120)?;
        if r.verdict != Outcome::Pass {
            return Err(format!("{file}: {:?} ({})", r.verdict, r.reason));
        }
        let order = num(&r, "order").unwrap_or(f64::NAN);
        parts.push(format!("{} order {order:.2} ({:.1}s)", r.system, took.as_secs_f64()));
    }
    Ok(parts.join(", "))
}

fn resolvent_error(dt: f64) -> Result<f64, String> {
    let n = (10.0 / dt).round() as usize + 1;
    let k: Vec<f64> = (0..n).map(|i| (-(i as f64) * dt).exp()).collect();
    let r = resolvent_kernel(&k, dt).map_err(|e| e.to_string())?;
    Ok(r.r
        .iter()
        .enumerate()
        .map(|(i, v)| (v - (-2.0 * i as f64 * dt).exp()).abs())
        .fold(0.0, f64::max))
}

fn ac7() -> Check {
    let (e1, e2) = (resolvent_error(1e-3)?, resolvent_error(5e-4)?);
    if e1 > 1e-4 || e1 / e2 < 3.5 {
        return Err(format!("error {e1:e}, halving ratio {:.2}", e1 / e2));
    }
    Ok(format!("max error {e1:.2e}, halving ratio {:.2}", e1 / e2))
}

fn manufactured_error(n: usize) -> Result<f64, String> {
    let law = make_scalar_sanity();
    let target = TrigTarget {
        components: vec![TrigComponent {
            mean: 0.5,
            amplitude: 0.25,
            wavenumber: 1.0,
            speed: 1.0,
            phase: 0.0,
        }],
    };
    let grid = Grid1D::new(n, std::f64::consts::TAU).map_err(|e| e.to_string())?;
    let init = grid.centers().iter().map(|&x| target.value(x, 0.0)).collect();
    let u0 = Field::new(grid, init, 0.0).map_err(|e| e.to_string())?;
    let t_end = 0.5;
    let mut cfg = SolverConfig::new(t_end);
    cfg.epsilon = 0.05;
    cfg.scheme = Scheme::Central;
    cfg.dt = Some(t_end / (n as f64));
    cfg.snapshot_every = usize::MAX;
    cfg.manufactured = Some(target.clone());
    let tr = solve(&law, &u0, &cfg).map_err(|e| e.to_string())?;
    if let Some(f) = tr.failure {
        return Err(f.message);
    }
    let last = tr.last();
    let sq: f64 = grid
        .centers()
        .iter()
        .zip(&last.values)
        .map(|(&x, u)| (u - target.value(x, t_end)).norm_squared())
        .sum();
    Ok((sq * grid.dx()).sqrt())
}

fn ac8() -> Check {
    let ns = [32usize, 64, 128, 256];
    let errors = ns.iter().map(|&n| manufactured_error(n)).collect::<Result<Vec<_>, _>>()?;
    let hs: Vec<f64> = ns.iter().map(|&n| 1.0 / n as f64).collect();
    let order = slope(&hs, &errors);
    if !(1.7..=2.3).contains(&order) {
        return Err(format!("manufactured order {order:.3}"));
    }

    let law = make_scalar_sanity();
    let grid = Grid1D::new(64, std::f64::consts::TAU).map_err(|e| e.to_string())?;
    let init = grid.centers().iter().map(|x| state(&[0.5 + x.sin()])).collect();
    let u0 = Field::new(grid, init, 0.0).map_err(|e| e.to_string())?;
    let mut cfg = SolverConfig::new(1.0);
    cfg.scheme = Scheme::LocalLaxFriedrichs;
    let tr = solve(&law, &u0, &cfg).map_err(|e| e.to_string())?;
    let drift = tr
        .fields
        .windows(2)
        .map(|w| (w[1].total_conserved(&law)[0] - w[0].total_conserved(&law)[0]).abs())
        .fold(0.0, f64::max);
    if drift > 1e-12 {
        return Err(format!("conservation drift {drift:e} per step"));
    }
    Ok(format!("manufactured L2 order {order:.3}, llf drift {drift:.1e} per step"))
}

fn cli_run(file: &str, out: &Path, threads: &str) -> Result<(), String> {
    let status = Proc::new(env!("CARGO_BIN_EXE_relent-lab"))
        .arg(file.split('_').next().unwrap())
        .arg("--config")
        .arg(configs().join(file))
        .arg("--out")
        .arg(out)
        .env("RELENT_THREADS", threads)
        .output()
        .map_err(|e| e.to_string())?;
    match status.status.code() {
        Some(0..=2) => Ok(()),
        other => Err(format!("{file}: exit {other:?}: {}", String::from_utf8_lossy(&status.stderr))),
    }
}

fn ac9() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let files = ["audit_scalar.json", "identity_scalar.json", "stability_duct.json", "weakstrong_scalar.json"];
    for file in files {
        let (a, b) = (tmp.path().join(format!("{file}.a")), tmp.path().join(format!("{file}.b")));
        cli_run(file, &a, "1")?;
        cli_run(file, &b, "4")?;
        for name in ["manifest.json", "report.json"] {
            let (x, y) = (std::fs::read(a.join(name)), std::fs::read(b.join(name)));
            match (x, y) {
                (Ok(x), Ok(y)) if x == y => {}
                _ => return Err(format!("{file}: {name} differs between reruns")),
            }
        }
    }
    Ok(format!("{} experiments byte-identical across reruns at 1 and 4 threads", files.len()))
}

fn main() {
    let checks: [(&str, fn() -> Check); 9] = [
        ("AC1 hypothesis audit", ac1),
        ("AC2 quadratic scaling", ac2),
        ("AC3 identity ledger", ac3),
        ("AC4 stability", ac4),
        ("AC5 vanishing viscosity", ac5),
        ("AC6 weak-strong", ac6),
        ("AC7 resolvent oracle", ac7),
        ("AC8 solver verification", ac8),
        ("AC9 determinism", ac9),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| a.starts_with("AC")).collect();
    let mut failed = 0;
    for (name, check) in checks {
        if !only.is_empty() && !only.iter().any(|o| name.starts_with(o.as_str())) {
            continue;
        }
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
