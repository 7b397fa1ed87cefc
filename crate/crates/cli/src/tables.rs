//! Artifact readers/writers shared across subcommands: the scores table, the
//! scaling observations table, and the run manifest.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use qfilter_core::fsutil::atomic_write;
use qfilter_core::scaling::ScalingObservation;
use serde::Serialize;

/// One row of the scores artifact produced by `score`.
#[derive(Debug, Clone)]
pub struct ScoreRow {
    pub id: String,
    pub score: f64,
    pub log_odds: f64,
}

pub fn write_scores(path: &Path, rows: &[ScoreRow]) -> Result<()> {
    atomic_write(path, |w| {
        use std::io::Write;
        writeln!(w, "id,score,log_odds").map_err(|e| qfilter_core::Error::io(path, e))?;
        for r in rows {
            writeln!(w, "{},{},{}", csv_field(&r.id), r.score, r.log_odds)
                .map_err(|e| qfilter_core::Error::io(path, e))?;
        }
        Ok(())
    })?;
    Ok(())
}

/// Quote a CSV field only when it needs quoting, so simple ids stay stable.
fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoreRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .with_context(|| format!("opening scores file {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(id_col), Some(score_col)) = (col("id"), col("score")) else {
        bail!(
            "{}: scores file must have 'id' and 'score' columns, found {:?}",
            path.display(),
            headers.iter().collect::<Vec<_>>()
        );
    };
    let lo_col = col("log_odds");

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("{}: record {}", path.display(), i + 2))?;
        let id = record
            .get(id_col)
            .with_context(|| format!("{}: record {} missing id", path.display(), i + 2))?
            .to_string();
        let score: f64 = parse_float(&record, score_col, "score", path, i)?;
        let log_odds = match lo_col {
            Some(c) => parse_float(&record, c, "log_odds", path, i)?,
            // Scores from external tools may lack the column; derive it.
            None => {
                if !(score > 0.0 && score < 1.0) {
                    bail!(
                        "{}: record {}: score {} has no finite log-odds and the file has no log_odds column",
                        path.display(),
                        i + 2,
                        score
                    );
                }
                (score / (1.0 - score)).ln()
            }
        };
        rows.push(ScoreRow { id, score, log_odds });
    }
    if rows.is_empty() {
        bail!("{}: no score rows", path.display());
    }
    Ok(rows)
}

fn parse_float(
    record: &csv::StringRecord,
    col: usize,
    name: &str,
    path: &Path,
    row: usize,
) -> Result<f64> {
    let raw = record
        .get(col)
        .with_context(|| format!("{}: record {} missing {name}", path.display(), row + 2))?;
    raw.parse::<f64>()
        .with_context(|| format!("{}: record {}: bad {name} value {raw:?}", path.display(), row + 2))
}

/// Read a scaling observations CSV with header `n,d,loss`.
pub fn read_observations(path: &Path) -> Result<Vec<ScalingObservation>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .with_context(|| format!("opening observations file {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(n_col), Some(d_col), Some(loss_col)) = (col("n"), col("d"), col("loss")) else {
        bail!(
            "{}: observations file must have 'n', 'd' and 'loss' columns, found {:?}",
            path.display(),
            headers.iter().collect::<Vec<_>>()
        );
    };
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("{}: record {}", path.display(), i + 2))?;
        out.push(ScalingObservation {
            n: parse_float(&record, n_col, "n", path, i)?,
            d: parse_float(&record, d_col, "d", path, i)?,
            loss: parse_float(&record, loss_col, "loss", path, i)?,
        });
    }
    if out.is_empty() {
        bail!("{}: no observation rows", path.display());
    }
    Ok(out)
}

/// Record of a run, written next to the primary output artifact. Contains no
/// timestamps or host details, so byte-identical reruns stay byte-identical.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config_path: Option<String>,
    pub seed: u64,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new(subcommand: &str, config_path: Option<&Path>, seed: u64) -> Self {
        RunManifest {
            subcommand: subcommand.to_string(),
            config_path: config_path.map(|p| p.display().to_string()),
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            tool_version: qfilter_core::TOOL_VERSION.to_string(),
        }
    }

    pub fn input(mut self, path: &Path) -> Self {
        self.inputs.push(path.display().to_string());
        self
    }

    pub fn output(mut self, path: &Path) -> Self {
        self.outputs.push(path.display().to_string());
        self
    }

    pub fn output_opt(mut self, path: Option<&PathBuf>) -> Self {
        if let Some(p) = path {
            self.outputs.push(p.display().to_string());
        }
        self
    }

    /// Write `<primary output>.manifest.json`.
    pub fn write_beside(&self, primary_output: &Path) -> Result<()> {
        let mut name = primary_output.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        let path = primary_output.with_file_name(name);
        self.write_to(&path)
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        let body = serde_json::to_string_pretty(self)?;
        atomic_write(path, |w| {
            use std::io::Write;
            writeln!(w, "{body}").map_err(|e| qfilter_core::Error::io(path, e))
        })?;
        Ok(())
    }
}

/// Serialize a JSON value atomically with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let body = serde_json::to_string_pretty(value)?;
    atomic_write(path, |w| {
        use std::io::Write;
        writeln!(w, "{body}").map_err(|e| qfilter_core::Error::io(path, e))
    })?;
    Ok(())
}
