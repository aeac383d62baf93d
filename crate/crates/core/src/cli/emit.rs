use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::experiments::{ExperimentReport, Figure, FigureKind, Series};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn get(&self, path: &str) -> Option<&ManifestEntry> {
        self.files.iter().find(|f| f.path == path)
    }
}

/// Shortest representation that parses back to the same `f64`.
fn number(v: f64) -> String {
    format!("{v:?}")
}

/// Header row plus one line per row, comma separated.
pub fn csv_text(series: &Series) -> String {
    let mut s = series.columns.join(",");
    s.push('\n');
    for row in &series.rows {
        let cells: Vec<String> = row.iter().map(|v| number(*v)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

fn py_list(items: &[String]) -> String {
    let quoted: Vec<String> = items.iter().map(|s| format!("{s:?}")).collect();
    format!("[{}]", quoted.join(", "))
}

/// Standalone matplotlib script reading the figure's CSVs from its own
/// directory and writing `<name>.png` beside them.
fn plot_script(fig: &Figure) -> String {
    let files: Vec<String> = fig.series.iter().map(|s| format!("{s}.csv")).collect();
    let draw = match fig.kind {
        FigureKind::LogLog => "ax.loglog(x, y, marker='o', label=label)",
        FigureKind::TimeSeries | FigureKind::Stack => "ax.plot(x, y, label=label)",
    };
    let layout = match fig.kind {
        FigureKind::Stack => "fig, axes = plt.subplots(len(COLUMNS), 1, sharex=True, figsize=(7, 1.6 * len(COLUMNS)))",
        _ => "fig, ax = plt.subplots(figsize=(7, 4.5))\naxes = [ax] * len(COLUMNS)",
    };
    let mut s = String::new();
    let _ = writeln!(s, "import csv");
    let _ = writeln!(s, "import os");
    let _ = writeln!(s);
    let _ = writeln!(s, "import matplotlib");
    let _ = writeln!(s, "matplotlib.use('Agg')");
    let _ = writeln!(s, "import matplotlib.pyplot as plt");
    let _ = writeln!(s);
    let _ = writeln!(s, "HERE = os.path.dirname(os.path.abspath(__file__))");
    let _ = writeln!(s, "FILES = {}", py_list(&files));
    let _ = writeln!(s, "X = {:?}", fig.x);
    let _ = writeln!(s, "COLUMNS = {}", py_list(&fig.y));
    let _ = writeln!(s);
    let _ = writeln!(s, "def load(name):");
    let _ = writeln!(s, "    with open(os.path.join(HERE, name)) as fh:");
    let _ = writeln!(s, "        rows = list(csv.DictReader(fh))");
    let _ = writeln!(s, "    return {{k: [float(r[k]) for r in rows] for k in (rows[0].keys() if rows else [])}}");
    let _ = writeln!(s);
    let _ = writeln!(s, "{layout}");
    let _ = writeln!(s, "for name in FILES:");
    let _ = writeln!(s, "    data = load(name)");
    let _ = writeln!(s, "    if not data:");
    let _ = writeln!(s, "        continue");
    let _ = writeln!(s, "    x = data[X]");
    let _ = writeln!(s, "    for ax, col in zip(axes, COLUMNS):");
    let _ = writeln!(s, "        y = data[col]");
    let _ = writeln!(s, "        label = col if len(FILES) == 1 else name[:-4] + ':' + col");
    let _ = writeln!(s, "        {draw}");
    let _ = writeln!(s, "        ax.set_ylabel(col if len(set(axes)) > 1 else '')");
    let _ = writeln!(s, "for ax in set(axes):");
    let _ = writeln!(s, "    ax.legend(fontsize='small')");
    let _ = writeln!(s, "axes[-1].set_xlabel(X)");
    let _ = writeln!(s, "fig.suptitle({:?})", fig.title);
    let _ = writeln!(s, "fig.tight_layout()");
    let _ = writeln!(s, "fig.savefig(os.path.join(HERE, {:?}), dpi=150)", format!("{}.png", fig.name));
    s
}

fn write_hashed(dir: &Path, name: &str, bytes: &[u8]) -> Result<ManifestEntry> {
    fs::write(dir.join(name), bytes)?;
    Ok(ManifestEntry {
        path: name.to_string(),
        sha256: hex::encode(Sha256::digest(bytes)),
        bytes: bytes.len(),
    })
}

/// Writes the series CSVs, one plot script per figure, `report.json` and
/// `manifest.json` (paths and SHA-256 of everything else).
pub fn emit_outputs(report: &mut ExperimentReport, dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let mut artifacts = Vec::new();
    for s in &report.series {
        let name = format!("{}.csv", s.name);
        files.push(write_hashed(dir, &name, csv_text(s).as_bytes())?);
        artifacts.push(name);
    }
    for f in &report.figures {
        let name = format!("plot_{}.py", f.name);
        files.push(write_hashed(dir, &name, plot_script(f).as_bytes())?);
        artifacts.push(name);
    }
    report.artifacts = artifacts;
    let mut body = serde_json::to_string_pretty(report)?;
    body.push('\n');
    files.push(write_hashed(dir, "report.json", body.as_bytes())?);
    let manifest = Manifest { files };
    let mut m = serde_json::to_string_pretty(&manifest)?;
    m.push('\n');
    fs::write(dir.join("manifest.json"), m)?;
    Ok(manifest)
}

/// Run-specific facts kept out of the hashed outputs.
pub fn write_metadata(dir: &Path, elapsed_seconds: f64, threads: Option<usize>) -> Result<()> {
    let created = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let meta = serde_json::json!({
        "created_unix": created,
        "elapsed_seconds": elapsed_seconds,
        "threads": threads.unwrap_or_else(rayon::current_num_threads),
        "version": env!("CARGO_PKG_VERSION"),
    });
    let mut text = serde_json::to_string_pretty(&meta)?;
    text.push('\n');
    fs::write(dir.join("metadata.json"), text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{ExperimentConfig, Outcome};

    #[test]
    fn empty_series_is_header_only() {
        let s = Series::new("e", &["a", "b"]);
        assert_eq!(csv_text(&s), "a,b\n");
    }

    #[test]
    fn numbers_round_trip() {
        let mut s = Series::new("n", &["v"]);
        let vals = [0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -0.0, f64::MIN_POSITIVE, 2.0f64.sqrt()];
        for v in vals {
            s.push(vec![v]);
        }
        let text = csv_text(&s);
        let back: Vec<f64> = text.lines().skip(1).map(|l| l.parse().unwrap()).collect();
        for (a, b) in vals.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn two_snapshots_give_two_rows_and_stable_hashes() {
        let dir = tempfile::tempdir().unwrap();
        let make = || {
            let mut r = ExperimentReport::new("solve", &ExperimentConfig::default());
            let mut s = Series::new("snap", &["t", "x"]);
            s.push(vec![0.0, 1.0]);
            s.push(vec![0.5, 1.0]);
            r.series.push(s);
            r.conclude(Outcome::Pass, "ok");
            r
        };
        let m1 = emit_outputs(&mut make(), dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join("snap.csv")).unwrap();
        assert_eq!(text.lines().count(), 3);
        let m2 = emit_outputs(&mut make(), dir.path()).unwrap();
        assert_eq!(m1, m2);
        let report: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
        assert_eq!(report["artifacts"][0], "snap.csv");
    }
}
