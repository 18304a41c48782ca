use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::scheduler::{Event, RejectedTask, TaskType};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Jsonl,
}

impl FromStr for Format {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "jsonl" | "json-lines" => Ok(Format::Jsonl),
            other => Err(HarnessError::Validation {
                field: "format".into(),
                message: format!("expected csv or jsonl, got {other}"),
            }),
        }
    }
}

/// A flat record type with a fixed column order.
pub trait Record: Serialize {
    const COLUMNS: &'static [&'static str];
}

macro_rules! record {
    ($(#[$m:meta])* pub struct $name:ident { $($(#[$fm:meta])* pub $field:ident : $ty:ty),* $(,)? }) => {
        $(#[$m])*
        #[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
        pub struct $name { $($(#[$fm])* pub $field: $ty),* }
        impl Record for $name {
            const COLUMNS: &'static [&'static str] = &[$(stringify!($field)),*];
        }
    };
}

record! {
    pub struct TaskRecord {
        pub id: u64,
        pub kind: TaskType,
        pub qubits: usize,
        pub qpu: usize,
        pub transaction: u64,
        pub submit: u64,
        pub start: u64,
        pub end: u64,
        pub fidelity_score: f64,
        /// Space-separated physical qubits.
        pub footprint: String,
    }
}

record! {
    pub struct RejectRecord {
        pub id: u64,
        pub time: u64,
        pub reason: String,
    }
}

record! {
    /// General tasks completed in `[start, end)`.
    pub struct WindowCount {
        pub start: u64,
        pub end: u64,
        pub completed: u64,
    }
}

record! {
    pub struct FidelitySample {
        pub timestamp: u64,
        pub qpu: usize,
        pub element: String,
        pub value: f64,
    }
}

record! {
    /// Worst element per class and the probe circuit's mapped score.
    pub struct QualitySample {
        pub timestamp: u64,
        pub qpu: usize,
        pub min_single: f64,
        pub min_two: f64,
        pub min_measure: f64,
        pub reference_score: Option<f64>,
    }
}

record! {
    pub struct CheckRecord {
        pub time: u64,
        pub qpu: usize,
        pub interval: u64,
        pub below: usize,
        pub flagged: String,
        pub min_single: f64,
        pub min_two: f64,
        pub min_measure: f64,
        pub task: Option<u64>,
    }
}

record! {
    pub struct CalibrationRecord {
        pub time: u64,
        pub qpu: usize,
        pub task: u64,
        pub targets: String,
        pub restored: usize,
        pub min_restored: f64,
    }
}

record! {
    pub struct SummaryRow {
        pub metric: String,
        pub value: f64,
    }
}

/// Everything one scenario run produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub name: String,
    pub seed: u64,
    pub duration: u64,
    pub submitted: usize,
    pub tasks: Vec<TaskRecord>,
    pub rejected: Vec<RejectRecord>,
    /// Latest end time of a general task (0 if none completed).
    pub makespan: u64,
    pub throughput: Vec<WindowCount>,
    pub fidelity: Vec<FidelitySample>,
    pub quality: Vec<QualitySample>,
    pub checks: Vec<CheckRecord>,
    pub calibrations: Vec<CalibrationRecord>,
    pub events: Vec<Event>,
    /// Largest trace deviation seen in any noisy simulation of the run.
    pub max_trace_error: f64,
}

impl Report {
    pub fn empty(name: &str, seed: u64, duration: u64) -> Self {
        Report {
            name: name.to_string(),
            seed,
            duration,
            submitted: 0,
            tasks: Vec::new(),
            rejected: Vec::new(),
            makespan: 0,
            throughput: Vec::new(),
            fidelity: Vec::new(),
            quality: Vec::new(),
            checks: Vec::new(),
            calibrations: Vec::new(),
            events: Vec::new(),
            max_trace_error: 0.0,
        }
    }

    pub fn general_tasks(&self) -> impl Iterator<Item = &TaskRecord> {
        self.tasks.iter().filter(|t| t.kind == TaskType::General)
    }

    pub fn completed_general(&self) -> usize {
        self.general_tasks().count()
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        let row = |m: &str, v: f64| SummaryRow {
            metric: m.to_string(),
            value: v,
        };
        let general = self.completed_general();
        let mean_score = if general == 0 {
            0.0
        } else {
            self.general_tasks().map(|t| t.fidelity_score).sum::<f64>() / general as f64
        };
        vec![
            row("seed", self.seed as f64),
            row("duration", self.duration as f64),
            row("submitted", self.submitted as f64),
            row("completed_general", general as f64),
            row("completed_calibration", (self.tasks.len() - general) as f64),
            row("rejected", self.rejected.len() as f64),
            row("makespan", self.makespan as f64),
            row("mean_fidelity_score", mean_score),
            row("calibrations", self.calibrations.len() as f64),
        ]
    }

    pub fn tables(&self, format: Format) -> Result<Vec<RenderedTable>, HarnessError> {
        Ok(vec![
            RenderedTable::new("tasks", &self.tasks, format)?,
            RenderedTable::new("rejected", &self.rejected, format)?,
            RenderedTable::new("throughput", &self.throughput, format)?,
            RenderedTable::new("fidelity", &self.fidelity, format)?,
            RenderedTable::new("quality", &self.quality, format)?,
            RenderedTable::new("checks", &self.checks, format)?,
            RenderedTable::new("calibrations", &self.calibrations, format)?,
            RenderedTable::new("summary", &self.summary(), format)?,
            RenderedTable {
                file_name: "events.jsonl".into(),
                contents: to_jsonl(&self.events)?,
            },
        ])
    }
}

pub fn rejected_records(r: &[RejectedTask]) -> Vec<RejectRecord> {
    r.iter()
        .map(|x| RejectRecord {
            id: x.id.0,
            time: x.time,
            reason: x.reason.clone(),
        })
        .collect()
}

/// One output file's name and bytes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RenderedTable {
    pub file_name: String,
    pub contents: String,
}

impl RenderedTable {
    pub fn new<T: Record>(name: &str, rows: &[T], format: Format) -> Result<Self, HarnessError> {
        Ok(match format {
            Format::Csv => RenderedTable {
                file_name: format!("{name}.csv"),
                contents: to_csv(rows)?,
            },
            Format::Jsonl => RenderedTable {
                file_name: format!("{name}.jsonl"),
                contents: to_jsonl(rows)?,
            },
        })
    }
}

/// CSV with a header row, even when there are no records.
pub fn to_csv<T: Record>(rows: &[T]) -> Result<String, HarnessError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(T::COLUMNS)?;
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| HarnessError::Output(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| HarnessError::Output(e.to_string()))
}

pub fn to_jsonl<T: Serialize>(rows: &[T]) -> Result<String, HarnessError> {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

/// Parses JSON-lines output back into records.
pub fn parse_jsonl<T: DeserializeOwned>(text: &str) -> Result<Vec<T>, HarnessError> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(HarnessError::from))
        .collect()
}

/// Reports from one experiment plus its cross-run tables.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportBundle {
    pub name: String,
    pub reports: Vec<Report>,
    pub tables: Vec<RenderedTable>,
}

impl ReportBundle {
    /// Every output file as `(relative path, contents)`, in a fixed order.
    pub fn files(&self, format: Format) -> Result<Vec<(PathBuf, String)>, HarnessError> {
        let mut out: Vec<(PathBuf, String)> = self
            .tables
            .iter()
            .map(|t| (PathBuf::from(&t.file_name), t.contents.clone()))
            .collect();
        for r in &self.reports {
            for t in r.tables(format)? {
                out.push((Path::new(&r.name).join(&t.file_name), t.contents));
            }
        }
        Ok(out)
    }
}

fn write_files(dir: &Path, files: &[(PathBuf, String)]) -> Result<Vec<PathBuf>, HarnessError> {
    let io = |p: &Path, e: std::io::Error| HarnessError::Io {
        path: p.display().to_string(),
        message: e.to_string(),
    };
    let mut written = Vec::with_capacity(files.len());
    for (rel, contents) in files {
        let path = dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| io(parent, e))?;
        }
        fs::write(&path, contents).map_err(|e| io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Writes a report's tables (and `events.jsonl`) into `dir`.
pub fn emit_report(r: &Report, dir: &Path, format: Format) -> Result<Vec<PathBuf>, HarnessError> {
    let files: Vec<(PathBuf, String)> = r
        .tables(format)?
        .into_iter()
        .map(|t| (PathBuf::from(t.file_name), t.contents))
        .collect();
    write_files(dir, &files)
}

/// Writes bundle tables into `dir` and each report into `dir/<report name>/`.
pub fn emit_bundle(
    b: &ReportBundle,
    dir: &Path,
    format: Format,
) -> Result<Vec<PathBuf>, HarnessError> {
    write_files(dir, &b.files(format)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_report_yields_header_only_csv() {
        let r = Report::empty("x", 0, 10);
        let tables = r.tables(Format::Csv).unwrap();
        let tasks = tables.iter().find(|t| t.file_name == "tasks.csv").unwrap();
        assert_eq!(
            tasks.contents,
            "id,kind,qubits,qpu,transaction,submit,start,end,fidelity_score,footprint\n"
        );
        let events = tables
            .iter()
            .find(|t| t.file_name == "events.jsonl")
            .unwrap();
        assert!(events.contents.is_empty());
    }

    #[test]
    fn jsonl_round_trips() {
        let rows = vec![QualitySample {
            timestamp: 5,
            qpu: 0,
            min_single: 0.99,
            min_two: 0.951,
            min_measure: 1.0,
            reference_score: None,
        }];
        let text = to_jsonl(&rows).unwrap();
        assert_eq!(parse_jsonl::<QualitySample>(&text).unwrap(), rows);
    }

    #[test]
    fn optional_cells_are_blank_in_csv() {
        let rows = vec![CheckRecord {
            time: 1,
            qpu: 0,
            interval: 3600,
            below: 0,
            flagged: String::new(),
            min_single: 0.5,
            min_two: 0.25,
            min_measure: 1.0,
            task: None,
        }];
        assert_eq!(
            to_csv(&rows).unwrap().lines().nth(1).unwrap(),
            "1,0,3600,0,,0.5,0.25,1.0,"
        );
    }
}
