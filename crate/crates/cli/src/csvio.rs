//! CSV output and ingestion.
//!
//! Output files carry a `# columns:` comment documenting every column,
//! then a header row, then data rows. Fields are comma-separated UTF-8 with
//! `.` as the decimal separator; floats use Rust's shortest-roundtrip
//! formatting, so identical values always produce identical bytes. Fields
//! containing commas, quotes, or newlines are double-quoted.
//!
//! Ingestion uses a standard CSV reader with a required header row; `#`
//! comment lines are skipped, so our own outputs round-trip.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

pub struct CsvOut {
    writer: BufWriter<File>,
    path: PathBuf,
    columns: usize,
}

impl CsvOut {
    /// Opens `path` and writes the `# columns:` documentation comment and the
    /// header row. `documented` pairs each header name with a description.
    pub fn create(path: &Path, documented: &[(&str, &str)]) -> Result<Self> {
        let file = File::create(path)
            .with_context(|| format!("cannot create {}", path.display()))?;
        let mut writer = BufWriter::new(file);
        let doc = documented
            .iter()
            .map(|(name, description)| format!("{name}={description}"))
            .collect::<Vec<_>>()
            .join("; ");
        writeln!(writer, "# columns: {doc}")?;
        let header = documented
            .iter()
            .map(|(name, _)| quote(name))
            .collect::<Vec<_>>()
            .join(",");
        writeln!(writer, "{header}")?;
        Ok(CsvOut {
            writer,
            path: path.to_path_buf(),
            columns: documented.len(),
        })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        if fields.len() != self.columns {
            bail!(
                "internal: row with {} fields in a {}-column file {}",
                fields.len(),
                self.columns,
                self.path.display()
            );
        }
        let line = fields
            .iter()
            .map(|f| quote(f))
            .collect::<Vec<_>>()
            .join(",");
        writeln!(self.writer, "{line}")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.writer
            .flush()
            .with_context(|| format!("cannot flush {}", self.path.display()))?;
        Ok(self.path)
    }
}

fn quote(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

/// Reads one named column of floats. The header row is required; `#` lines
/// are comments.
pub fn read_column(path: &Path, column: &str) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let Some(index) = headers.iter().position(|h| h == column) else {
        bail!(
            "{}: missing required column {column:?} (found: {})",
            path.display(),
            headers.iter().collect::<Vec<_>>().join(", ")
        );
    };
    let mut values = Vec::new();
    for (rowno, record) in reader.records().enumerate() {
        let record = record?;
        let raw = record.get(index).unwrap_or("");
        let value: f64 = raw.parse().with_context(|| {
            format!("{} row {}: bad {column} value {raw:?}", path.display(), rowno + 1)
        })?;
        values.push(value);
    }
    Ok(values)
}

/// A labeled candidate row for conformal prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub id: String,
    pub label: String,
    pub score: f64,
}

/// Reads a candidate file with columns `id,label,score`.
pub fn read_candidates(path: &Path) -> Result<Vec<Candidate>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let position = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            anyhow::anyhow!(
                "{}: missing required column {name:?} (found: {})",
                path.display(),
                headers.iter().collect::<Vec<_>>().join(", ")
            )
        })
    };
    let (id_at, label_at, score_at) = (position("id")?, position("label")?, position("score")?);
    let mut rows = Vec::new();
    for (rowno, record) in reader.records().enumerate() {
        let record = record?;
        let raw = record.get(score_at).unwrap_or("");
        let score: f64 = raw.parse().with_context(|| {
            format!("{} row {}: bad score value {raw:?}", path.display(), rowno + 1)
        })?;
        rows.push(Candidate {
            id: record.get(id_at).unwrap_or("").to_string(),
            label: record.get(label_at).unwrap_or("").to_string(),
            score,
        });
    }
    Ok(rows)
}
