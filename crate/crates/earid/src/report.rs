//! Experiment reports as CSV, JSON and a markdown table.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::harness::Condition;
use crate::{Error, Result};

pub const REPORT_VERSION: &str = "report_v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub condition: Condition,
    pub repeat: usize,
    pub seed: u64,
    /// `None` when the cell failed.
    pub train_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub wall_time_s: f64,
    pub config_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
}

#[derive(Serialize, Deserialize)]
struct ReportFile {
    version: String,
    rows: Vec<ReportRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [ReportFormat::Csv, ReportFormat::Json, ReportFormat::Markdown];

    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
            ReportFormat::Markdown => "md",
        }
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ExperimentReport {
    pub fn failed(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    /// Conditions present, in canonical order.
    pub fn conditions(&self) -> Vec<Condition> {
        let mut c: Vec<_> = self.rows.iter().map(|r| r.condition).collect();
        c.sort();
        c.dedup();
        c
    }

    /// Median test accuracy of a condition over its successful rows.
    pub fn median_test(&self, cond: Condition) -> Option<f64> {
        median(self.rows.iter().filter(|r| r.condition == cond).filter_map(|r| r.test_accuracy).collect())
    }

    pub fn median_train(&self, cond: Condition) -> Option<f64> {
        median(self.rows.iter().filter(|r| r.condition == cond).filter_map(|r| r.train_accuracy).collect())
    }

    pub fn to_json(&self) -> String {
        let file = ReportFile {
            version: REPORT_VERSION.into(),
            rows: self.rows.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ReportFile =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("report: {e}")))?;
        if file.version != REPORT_VERSION {
            return Err(Error::SchemaVersionMismatch {
                expected: REPORT_VERSION.into(),
                found: file.version,
            });
        }
        Ok(Self { rows: file.rows })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
            _ => Error::io(path, e),
        })?;
        Self::from_json(&text)
    }

    /// Columns `condition, repeat, seed, train_acc, test_acc, wall_time_s`;
    /// failed cells leave the accuracy fields empty.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["condition", "repeat", "seed", "train_acc", "test_acc", "wall_time_s"])
            .expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.condition.name().to_string(),
                r.repeat.to_string(),
                r.seed.to_string(),
                opt(r.train_accuracy),
                opt(r.test_accuracy),
                r.wall_time_s.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }

    /// One row per repeat, a Train/Test column pair per condition and a
    /// closing median row.
    pub fn to_markdown(&self) -> String {
        let conds = self.conditions();
        let pct = |v: Option<f64>| v.map(|x| format!("{:.1}%", 100.0 * x)).unwrap_or_else(|| "failed".into());
        let mut s = String::from("| Repeat |");
        for c in &conds {
            s.push_str(&format!(" {c} Train | {c} Test |"));
        }
        s.push_str("\n|---|");
        for _ in &conds {
            s.push_str("---:|---:|");
        }
        s.push('\n');
        let mut repeats: Vec<usize> = self.rows.iter().map(|r| r.repeat).collect();
        repeats.sort_unstable();
        repeats.dedup();
        for rep in repeats {
            s.push_str(&format!("| {rep} |"));
            for &c in &conds {
                match self.rows.iter().find(|r| r.condition == c && r.repeat == rep) {
                    Some(r) => s.push_str(&format!(" {} | {} |", pct(r.train_accuracy), pct(r.test_accuracy))),
                    None => s.push_str(" | |"),
                }
            }
            s.push('\n');
        }
        s.push_str("| median |");
        for &c in &conds {
            s.push_str(&format!(" {} | {} |", pct(self.median_train(c)), pct(self.median_test(c))));
        }
        s.push('\n');
        s
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Csv => self.to_csv(),
            ReportFormat::Json => self.to_json(),
            ReportFormat::Markdown => self.to_markdown(),
        }
    }

    pub fn write(&self, format: ReportFormat, path: &Path) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::Config("cannot emit an empty report".into()));
        }
        crate::io::write_file(path, self.render(format))
    }
}

/// Writes `r` to `path` in `format`.
pub fn emit_report(r: &ExperimentReport, format: ReportFormat, path: &Path) -> Result<()> {
    r.write(format, path)
}
