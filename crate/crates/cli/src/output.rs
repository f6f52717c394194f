//! Result tables, verdicts and the run manifest.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use modeheat::Psd;
use modeheat::Estimate;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Format};
use crate::error::CliError;

pub const RNG_NAME: &str = "ChaCha20 (rand_chacha 0.9), one stream per ensemble member";

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Num(x) if x.is_finite() => write!(f, "{x:e}"),
            Cell::Num(x) => write!(f, "{x}"),
            Cell::Text(s) if s.contains([',', '"', '\n']) => write!(f, "\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Num(x as f64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.to_string(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width of table {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric value at `row`, `column`.
    pub fn value(&self, row: usize, column: &str) -> Option<f64> {
        match self.rows.get(row)?.get(self.column(column)?)? {
            Cell::Num(x) => Some(*x),
            Cell::Text(_) => None,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::to_string).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

/// One tolerance check with its outcome.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }

    /// `|a − b| ≤ tol · max(|a|, |b|)` or both below `floor`.
    pub fn relative(name: impl Into<String>, a: f64, b: f64, tol: f64, floor: f64) -> Self {
        let scale = a.abs().max(b.abs());
        let err = if scale > 0.0 { (a - b).abs() / scale } else { 0.0 };
        let passed = err <= tol || (a - b).abs() <= floor;
        Self::new(name, passed, format!("{a:e} vs {b:e}: relative difference {err:.3e} (tolerance {tol:e})"))
    }

    /// Agreement of two estimates within `z` joint standard errors.
    pub fn agree(name: impl Into<String>, a: Estimate<f64>, b: Estimate<f64>, z: f64) -> Self {
        let score = a.z_score(&b);
        let diff = (a.value - b.value).abs();
        let exact = diff <= 1e-12 * a.value.abs().max(b.value.abs());
        Self::new(
            name,
            score <= z || exact,
            format!(
                "{:e} ± {:e} vs {:e} ± {:e}: {score:.2} joint SE (limit {z})",
                a.value, a.std_error, b.value, b.std_error
            ),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
        })
    }
}

/// Everything an experiment produces.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
    pub spectra: Vec<(String, Psd)>,
    pub summary: serde_json::Map<String, Value>,
    pub warnings: Vec<String>,
    pub fingerprints: Vec<String>,
}

impl Outcome {
    /// PASS only when there is at least one check and every check passed.
    pub fn verdict(&self) -> Verdict {
        if !self.checks.is_empty() && self.checks.iter().all(|c| c.passed) {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failed(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Creates `dir` and proves it writable.
pub fn prepare_directory(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Output(format!("cannot create {}: {e}", dir.display())))?;
    let probe = dir.join(".modeheat-write-test");
    fs::write(&probe, b"").map_err(|e| CliError::Output(format!("{} is not writable: {e}", dir.display())))?;
    fs::remove_file(&probe).map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))?;
    Ok(())
}

pub struct RunInfo<'a> {
    pub config: &'a ExperimentConfig,
    pub source_sha256: Option<String>,
    pub threads: usize,
    pub timestamp: String,
}

fn put(dir: &Path, written: &mut Vec<PathBuf>, name: String, contents: &[u8]) -> Result<(), CliError> {
    let path = dir.join(name);
    let mut f = fs::File::create(&path).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
    f.write_all(contents).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
    written.push(path);
    Ok(())
}

/// Writes tables, spectra, verdict and manifest; returns the written paths.
pub fn write_outcome(dir: &Path, outcome: &Outcome, info: &RunInfo<'_>) -> Result<Vec<PathBuf>, CliError> {
    let formats = &info.config.output.formats;
    let mut written = Vec::new();
    if formats.contains(&Format::Csv) {
        for t in &outcome.tables {
            put(dir, &mut written, format!("{}.csv", t.name), t.to_csv().as_bytes())?;
        }
        for (label, psd) in &outcome.spectra {
            let mut buf = Vec::new();
            psd.write_csv(&mut buf)?;
            put(dir, &mut written, format!("psd_{label}.csv"), &buf)?;
        }
    }
    if formats.contains(&Format::Json) {
        let results = json!({
            "experiment": info.config.experiment.name(),
            "tables": outcome.tables,
            "summary": outcome.summary,
            "checks": outcome.checks,
            "warnings": outcome.warnings,
        });
        put(dir, &mut written, "results.json".into(), serde_json::to_string_pretty(&results).expect("json").as_bytes())?;
    }
    let verdict = outcome.verdict();
    let mut text = format!("{verdict}\n");
    for c in &outcome.checks {
        text.push_str(&format!("{} {}: {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail));
    }
    put(dir, &mut written, "verdict.txt".into(), text.as_bytes())?;

    let canonical = info.config.to_canonical_json();
    let manifest = json!({
        "experiment": info.config.experiment.name(),
        "config_sha256": sha256_hex(canonical.as_bytes()),
        "source_sha256": info.source_sha256,
        "config": serde_json::from_str::<Value>(&canonical).expect("json"),
        "seed": info.config.sim.seed,
        "threads": info.threads,
        "versions": {
            "modeheat": modeheat_version(),
            "modeheat-cli": env!("CARGO_PKG_VERSION"),
        },
        "rng": RNG_NAME,
        "model_fingerprints": outcome.fingerprints,
        "timestamp": info.timestamp,
        "verdict": verdict,
        "outputs": written.iter().filter_map(|p| p.file_name()).map(|n| n.to_string_lossy().into_owned()).collect::<Vec<_>>(),
    });
    put(dir, &mut written, "manifest.json".into(), serde_json::to_string_pretty(&manifest).expect("json").as_bytes())?;
    Ok(written)
}

pub fn modeheat_version() -> &'static str {
    modeheat::VERSION
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_cells() {
        let mut t = Table::new("t", &["a", "b"]);
        t.push(vec![1.5e-21.into(), "x,y".into()]);
        t.push(vec![f64::NAN.into(), 10.0.into()]);
        assert_eq!(t.to_csv(), "a,b\n1.5e-21,\"x,y\"\nNaN,1e1\n");
        assert_eq!(t.value(0, "a"), Some(1.5e-21));
        assert_eq!(t.value(0, "b"), None);
    }

    #[test]
    fn verdict_requires_all_checks() {
        let mut o = Outcome::default();
        assert_eq!(o.verdict(), Verdict::Fail);
        o.checks.push(Check::new("a", true, ""));
        assert_eq!(o.verdict(), Verdict::Pass);
        o.checks.push(Check::new("b", false, ""));
        assert_eq!(o.verdict(), Verdict::Fail);
    }

    #[test]
    fn estimate_agreement() {
        assert!(Check::agree("x", Estimate::new(1.0, 0.1), Estimate::new(1.5, 0.1), 4.0).passed);
        assert!(!Check::agree("x", Estimate::new(1.0, 0.1), Estimate::new(2.0, 0.1), 4.0).passed);
        assert!(Check::agree("x", Estimate::exact(0.0), Estimate::exact(0.0), 4.0).passed);
        assert!(Check::relative("r", 1.0, 1.0 + 1e-9, 1e-8, 0.0).passed);
        assert!(!Check::relative("r", 1.0, 1.1, 1e-8, 0.0).passed);
        assert!(Check::relative("r", 0.0, 1e-40, 1e-8, 1e-30).passed);
    }
}
