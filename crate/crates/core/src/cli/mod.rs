//! Config ingestion, dispatch and output emission for `relent-lab`.

mod emit;
mod scan;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::experiments::{
    run_convergence, run_hypothesis_audit, run_identity_check, run_solve, run_stability, run_weak_strong,
    ExperimentConfig, ExperimentParams, ExperimentReport, Outcome, SolverBlock, SystemConfig, Tolerances,
};

pub use emit::{csv_text, emit_outputs, write_metadata, Manifest, ManifestEntry};

pub const CONFIG_VERSION: &str = "1";
pub const THREADS_ENV: &str = "RELENT_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Audit,
    Solve,
    Identity,
    Stability,
    Convergence,
    Weakstrong,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Audit => "audit",
            Command::Solve => "solve",
            Command::Identity => "identity",
            Command::Stability => "stability",
            Command::Convergence => "convergence",
            Command::Weakstrong => "weakstrong",
        }
    }
}

fn d_version() -> String {
    CONFIG_VERSION.into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "d_version")]
    pub version: String,
    /// Taken from the command line when absent.
    #[serde(default)]
    pub command: Option<Command>,
    pub system: SystemConfig,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub experiment: ExperimentParams,
    #[serde(default)]
    pub out: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl RunConfig {
    pub fn experiment_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            system: self.system.clone(),
            solver: self.solver.clone(),
            experiment: self.experiment.clone(),
            tolerances: self.tolerances.clone(),
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::config(
                ".version",
                format!("unsupported version {:?}, expected {CONFIG_VERSION:?}", self.version),
            ));
        }
        self.experiment_config().validate().map_err(dotted)
    }
}

/// Config errors cite JSON paths from the root, e.g. `.solver.epsilon[0]`.
fn dotted(e: Error) -> Error {
    match e {
        Error::Config { path, message } if !path.starts_with('.') => Error::Config {
            path: format!(".{path}"),
            message,
        },
        other => other,
    }
}

/// Parsed config together with the keys that appeared more than once (the
/// last occurrence wins).
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedConfig {
    pub config: RunConfig,
    pub duplicate_keys: Vec<String>,
}

fn parse_value(text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| Error::config(".", format!("invalid JSON: {e}")))
}

fn from_value(value: Value) -> Result<RunConfig> {
    let cfg: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { path } else { format!(".{path}") };
        Error::config(path, e.into_inner().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with(text, &[]).map(|p| p.config)
}

/// As [`parse_config`], applying `key=value` overrides first.
pub fn parse_config_with(text: &str, overrides: &[String]) -> Result<ParsedConfig> {
    let duplicate_keys = scan::duplicate_keys(text)?;
    let mut value = parse_value(text)?;
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    Ok(ParsedConfig {
        config: from_value(value)?,
        duplicate_keys,
    })
}

/// `a.b.c=value`; numeric segments index arrays, values parse as JSON and
/// fall back to strings.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::config("--set", format!("expected key=value, got {assignment:?}")))?;
    let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let segments: Vec<&str> = key.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(Error::config("--set", format!("empty path segment in {key:?}")));
    }
    set_path(root, &segments, parsed, key)
}

fn set_path(cur: &mut Value, segments: &[&str], value: Value, key: &str) -> Result<()> {
    let Some((seg, rest)) = segments.split_first() else {
        *cur = value;
        return Ok(());
    };
    if let Value::Array(items) = cur {
        let i: usize = seg
            .parse()
            .map_err(|_| Error::config(format!(".{key}"), format!("{seg:?} is not an array index")))?;
        let len = items.len();
        let slot = items
            .get_mut(i)
            .ok_or_else(|| Error::config(format!(".{key}"), format!("index {i} out of range ({len} items)")))?;
        return set_path(slot, rest, value, key);
    }
    if !cur.is_object() {
        *cur = Value::Object(Default::default());
    }
    let map = cur.as_object_mut().expect("object");
    let slot = map.entry(seg.to_string()).or_insert(Value::Null);
    set_path(slot, rest, value, key)
}

/// Runs the experiment named by `command`. Errors after the run started
/// become a report with the error verdict.
pub fn dispatch(command: Command, config: &RunConfig) -> ExperimentReport {
    let cfg = config.experiment_config();
    let result = match command {
        Command::Audit => run_hypothesis_audit(&cfg),
        Command::Solve => run_solve(&cfg),
        Command::Identity => run_identity_check(&cfg),
        Command::Stability => run_stability(&cfg),
        Command::Convergence => run_convergence(&cfg),
        Command::Weakstrong => run_weak_strong(&cfg),
    };
    let mut report = result.unwrap_or_else(|e| ExperimentReport::failed(command.name(), &cfg, &dotted(e)));
    report.inputs = serde_json::to_value(config).unwrap_or(Value::Null);
    report
}

/// Applies `RELENT_THREADS` to the global worker pool; ignores values that
/// are not positive integers.
pub fn configure_threads() -> Option<usize> {
    let n = std::env::var(THREADS_ENV).ok()?.trim().parse::<usize>().ok()?;
    if n == 0 {
        return None;
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().ok()?;
    Some(n)
}

#[derive(Debug, Parser)]
#[command(name = "relent-lab", about = "Relative entropy experiments for balance laws")]
pub struct Args {
    pub command: Command,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `key=value` override, repeatable; dotted keys reach nested blocks.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

/// Parses, runs and emits; returns the process exit status.
pub fn run(args: &Args) -> i32 {
    let threads = configure_threads();
    match run_inner(args, threads) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("relent-lab: {e}");
            Outcome::Error.exit_code()
        }
    }
}

fn run_inner(args: &Args, threads: Option<usize>) -> Result<i32> {
    let text = std::fs::read_to_string(&args.config)?;
    let mut overrides = args.set.clone();
    if let Some(seed) = args.seed {
        overrides.push(format!("seed={seed}"));
    }
    let parsed = parse_config_with(&text, &overrides)?;
    let mut config = parsed.config;
    if let Some(c) = config.command {
        if c != args.command {
            return Err(Error::config(
                ".command",
                format!("config is for {:?}, command line asks for {:?}", c.name(), args.command.name()),
            ));
        }
    }
    config.command = Some(args.command);
    let out: PathBuf = args
        .out
        .clone()
        .or_else(|| config.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| Path::new("out").join(args.command.name()));
    let started = Instant::now();
    let mut report = dispatch(args.command, &config);
    report.inputs = json!({
        "config": report.inputs.clone(),
        "duplicate_keys": parsed.duplicate_keys,
    });
    let manifest = emit_outputs(&mut report, &out)?;
    write_metadata(&out, started.elapsed().as_secs_f64(), threads)?;
    println!(
        "{}: {:?} ({}) -> {} files in {}",
        args.command.name(),
        report.verdict,
        report.reason,
        manifest.files.len(),
        out.display()
    );
    Ok(report.verdict.exit_code())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse_config(r#"{"system":{"kind":"scalar_sanity"}}"#).unwrap();
        assert_eq!(c.solver.cfl, 0.4);
        assert_eq!(c.solver.integrator, crate::solver::Integrator::SspRk2);
        assert_eq!(c.version, "1");
    }

    #[test]
    fn negative_epsilon_cites_its_path() {
        let e = parse_config(r#"{"system":{"kind":"scalar_sanity"},"solver":{"epsilon":[-1]}}"#).unwrap_err();
        match e {
            Error::Config { path, .. } => assert_eq!(path, ".solver.epsilon[0]"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected_with_a_path() {
        let e = parse_config(r#"{"system":{"kind":"scalar_sanity"},"solver":{"cfl":0.3,"clf":1}}"#).unwrap_err();
        match e {
            Error::Config { path, message } => {
                assert_eq!(path, ".solver.clf");
                assert!(message.contains("clf"), "{message}");
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn unknown_system_kind_is_rejected() {
        let e = parse_config(r#"{"system":{"kind":"plasma"}}"#).unwrap_err();
        assert!(matches!(e, Error::Config { ref path, .. } if path == ".system.kind"), "{e}");
    }

    #[test]
    fn duplicate_keys_keep_the_last_value() {
        let p = parse_config_with(r#"{"system":{"kind":"scalar_sanity"},"seed":1,"seed":7}"#, &[]).unwrap();
        assert_eq!(p.config.seed, 7);
        assert_eq!(p.duplicate_keys, vec![".seed".to_string()]);
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let p = parse_config_with(
            r#"{"system":{"kind":"scalar_sanity"},"solver":{"epsilon":[0.1,0.2]}}"#,
            &["solver.epsilon.1=0.5".into(), "experiment.t_end=0.25".into(), "solver.scheme=central".into()],
        )
        .unwrap();
        assert_eq!(p.config.solver.epsilon, Some(vec![0.1, 0.5]));
        assert_eq!(p.config.experiment.t_end, 0.25);
        assert_eq!(p.config.solver.scheme, Some(crate::solver::Scheme::Central));
    }

    #[test]
    fn serialized_config_parses_back() {
        let c = parse_config(r#"{"system":{"kind":"duct_gas"},"command":"stability","seed":3}"#).unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(parse_config(&text).unwrap(), c);
    }
}
