//! Result rows and their CSV / JSON-lines serialization.
//!
//! Output is a pure function of the rows: identical runs write identical
//! bytes.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};

use crate::config::OutputFormat;

pub const CSV_HEADER: &str = "experiment,N,algorithm,param,value,stderr,trials,seed";

/// One aggregate result: a sweep point of one algorithm.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub n: usize,
    pub algorithm: String,
    /// Sweep parameter: candidate size P for the power experiment, the
    /// power cap for the outage experiment.
    pub param: f64,
    pub value: f64,
    pub stderr: f64,
    /// Trials the value aggregates (completed trials for power means).
    pub trials: usize,
    pub seed: u64,
}

impl ResultRow {
    fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.experiment,
            self.n,
            self.algorithm,
            self.param,
            self.value,
            self.stderr,
            self.trials,
            self.seed
        )
    }
}

/// Writes rows to `writer` in the requested format.
pub fn write_results<W: Write>(rows: &[ResultRow], writer: &mut W, format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            writeln!(writer, "{CSV_HEADER}")?;
            for row in rows {
                writeln!(writer, "{}", row.csv_line())?;
            }
        }
        OutputFormat::Jsonl => {
            for row in rows {
                let line = serde_json::to_string(row).context("serializing result row")?;
                writeln!(writer, "{line}")?;
            }
        }
    }
    Ok(())
}

/// Writes rows to a file, creating parent directories as needed.
pub fn emit_results(rows: &[ResultRow], path: &Path, format: OutputFormat) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    let file = std::fs::File::create(path)
        .with_context(|| format!("creating output file {}", path.display()))?;
    let mut writer = std::io::BufWriter::new(file);
    write_results(rows, &mut writer, format)
        .with_context(|| format!("writing {}", path.display()))?;
    writer.flush().with_context(|| format!("flushing {}", path.display()))?;
    Ok(())
}
