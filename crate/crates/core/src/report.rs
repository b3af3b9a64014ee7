//! Deterministic report files.
//!
//! Every table starts with one comment line carrying the artifact version
//! and the config hash, and contains no timestamps, so a rerun with the
//! same config and seeds writes byte-identical files.

use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::KahanSum;

/// On-disk layout of a report table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    /// Comma-separated values under a `#` header line.
    Csv,
    /// Whitespace-separated columns, directly loadable by gnuplot.
    Gnuplot,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Gnuplot => "dat",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "gnuplot" => Ok(OutputFormat::Gnuplot),
            other => Err(Error::Config(format!("unknown output format {other:?}"))),
        }
    }
}

/// Where a run writes its tables and what its header line says.
#[derive(Debug, Clone)]
pub struct RunMeta {
    pub out_dir: PathBuf,
    pub format: OutputFormat,
    pub config_sha: String,
}

impl RunMeta {
    pub fn new(
        out_dir: impl Into<PathBuf>,
        format: OutputFormat,
        config_sha: impl Into<String>,
    ) -> Self {
        RunMeta {
            out_dir: out_dir.into(),
            format,
            config_sha: config_sha.into(),
        }
    }

    fn header(&self) -> String {
        format!(
            "# aixilab v{} config_sha256={}\n",
            crate::VERSION,
            self.config_sha
        )
    }
}

/// An in-memory table flushed to a single file.
#[derive(Debug, Clone)]
pub struct Table {
    name: String,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Table {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Writes in the run's configured format and returns the path.
    pub fn write(&self, meta: &RunMeta) -> Result<PathBuf> {
        self.write_as(meta, meta.format)
    }

    /// Writes as CSV regardless of the configured format; verdict and case
    /// tables carry free text that a plot file cannot.
    pub fn write_csv(&self, meta: &RunMeta) -> Result<PathBuf> {
        self.write_as(meta, OutputFormat::Csv)
    }

    fn write_as(&self, meta: &RunMeta, format: OutputFormat) -> Result<PathBuf> {
        fs::create_dir_all(&meta.out_dir)?;
        let path = meta
            .out_dir
            .join(format!("{}.{}", self.name, format.extension()));
        let mut bytes = meta.header().into_bytes();
        match format {
            OutputFormat::Csv => {
                let mut w = csv::Writer::from_writer(&mut bytes);
                w.write_record(&self.columns)?;
                for row in &self.rows {
                    w.write_record(row)?;
                }
                w.flush()?;
                drop(w);
            }
            OutputFormat::Gnuplot => {
                bytes.extend_from_slice(format!("# {}\n", self.columns.join(" ")).as_bytes());
                for row in &self.rows {
                    bytes.extend_from_slice(row.join(" ").as_bytes());
                    bytes.push(b'\n');
                }
            }
        }
        fs::write(&path, bytes)?;
        Ok(path)
    }
}

/// One named pass/fail check with the measured quantities spelled out.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Verdict {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

/// Everything one experiment run produced.
#[derive(Debug)]
pub struct ExperimentReport {
    pub kind: &'static str,
    pub files: Vec<PathBuf>,
    pub verdicts: Vec<Verdict>,
    /// Qualifiers such as `out-of-assumption` that suspend verdicts.
    pub labels: Vec<String>,
}

impl ExperimentReport {
    pub fn new(kind: &'static str) -> Self {
        ExperimentReport {
            kind,
            files: Vec::new(),
            verdicts: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    /// Writes the verdict table (always CSV) and records its path.
    pub fn flush_verdicts(&mut self, meta: &RunMeta) -> Result<()> {
        let mut t = Table::new(
            format!("{}_verdicts", self.kind),
            &["verdict", "pass", "detail"],
        );
        for v in &self.verdicts {
            t.push(vec![v.name.clone(), v.pass.to_string(), v.detail.clone()]);
        }
        self.files.push(t.write_csv(meta)?);
        Ok(())
    }
}

/// Shortest-roundtrip decimal form; what every table stores for floats.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub(crate) fn median(mut values: Vec<f64>) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in medians"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut acc = KahanSum::default();
    for &v in values {
        acc.add(v);
    }
    acc.total() / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn median_and_mean_basics() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
    }

    #[test]
    fn table_bytes_are_reproducible() {
        let dir = tempdir().unwrap();
        let meta = RunMeta::new(dir.path(), OutputFormat::Csv, "abc123");
        let mut t = Table::new("demo", &["cycle", "value"]);
        t.push(vec!["1".into(), fmt_f64(0.25)]);
        t.push(vec!["2".into(), fmt_f64(1.0 / 3.0)]);
        let path = t.write(&meta).unwrap();
        let first = std::fs::read(&path).unwrap();
        let again = std::fs::read(t.write(&meta).unwrap()).unwrap();
        assert_eq!(first, again);
        let text = String::from_utf8(first).unwrap();
        assert!(text.starts_with(&format!("# aixilab v{} config_sha256=abc123\n", crate::VERSION)));
        assert!(text.contains("cycle,value"));
        assert!(text.contains("0.3333333333333333"));
    }

    #[test]
    fn gnuplot_variant_is_whitespace_separated() {
        let dir = tempdir().unwrap();
        let meta = RunMeta::new(dir.path(), OutputFormat::Gnuplot, "abc123");
        let mut t = Table::new("demo", &["a", "b"]);
        t.push(vec!["1".into(), "2".into()]);
        let path = t.write(&meta).unwrap();
        assert_eq!(path.extension().unwrap(), "dat");
        let text = std::fs::read_to_string(path).unwrap();
        assert!(text.contains("# a b\n1 2\n"));
    }

    #[test]
    fn verdict_table_lands_next_to_the_data() {
        let dir = tempdir().unwrap();
        let meta = RunMeta::new(dir.path(), OutputFormat::Gnuplot, "x");
        let mut report = ExperimentReport::new("demo");
        report.verdicts.push(Verdict::new("check", true, "1 < 2"));
        report.flush_verdicts(&meta).unwrap();
        assert!(report.all_pass());
        let text = std::fs::read_to_string(&report.files[0]).unwrap();
        assert!(text.contains("check,true,1 < 2"));
    }

    #[test]
    fn format_parsing() {
        assert_eq!("csv".parse::<OutputFormat>().unwrap(), OutputFormat::Csv);
        assert_eq!(
            "gnuplot".parse::<OutputFormat>().unwrap(),
            OutputFormat::Gnuplot
        );
        assert!("svg".parse::<OutputFormat>().is_err());
    }
}
