//! CSV logs. The metrics file is the single source of truth for plots.
//!
//! Metrics columns: `method, seed, epoch, task, cumulative_env_steps,
//! success_rate, mean_return, sel_0 .. sel_{K-1}`. Eval columns are empty on
//! epochs without evaluation.

use std::io::{Read, Write};

use qmp_core::trainer::{DecisionRecord, EpochRecord};

pub const FIXED_COLUMNS: [&str; 7] =
    ["method", "seed", "epoch", "task", "cumulative_env_steps", "success_rate", "mean_return"];

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("schema mismatch in {source_name}: offending columns {columns:?}")]
    Schema { source_name: String, columns: Vec<String> },
    #[error("{source_name} row {row}: bad value `{value}` in column {column}")]
    Value { source_name: String, row: usize, column: String, value: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub method: String,
    pub seed: u64,
    pub epoch: usize,
    pub task: usize,
    pub cumulative_env_steps: u64,
    pub success_rate: Option<f64>,
    pub mean_return: Option<f64>,
    pub selection: Vec<u64>,
}

impl MetricRow {
    pub fn from_record(method: &str, seed: u64, r: &EpochRecord) -> Self {
        Self {
            method: method.to_string(),
            seed,
            epoch: r.epoch,
            task: r.task,
            cumulative_env_steps: r.cumulative_env_steps,
            success_rate: r.eval.map(|e| e.success_rate),
            mean_return: r.eval.map(|e| e.mean_return),
            selection: r.selection.clone(),
        }
    }
}

pub fn header(candidates: usize) -> Vec<String> {
    FIXED_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain((0..candidates).map(|j| format!("sel_{j}")))
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Streaming metrics writer; flushes after every epoch.
pub struct MetricsWriter<W: Write> {
    inner: csv::Writer<W>,
    candidates: usize,
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(out: W, candidates: usize) -> Result<Self, MetricsError> {
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record(header(candidates))?;
        Ok(Self { inner, candidates })
    }

    pub fn write(&mut self, row: &MetricRow) -> Result<(), MetricsError> {
        debug_assert_eq!(row.selection.len(), self.candidates);
        let mut rec = vec![
            row.method.clone(),
            row.seed.to_string(),
            row.epoch.to_string(),
            row.task.to_string(),
            row.cumulative_env_steps.to_string(),
            opt(row.success_rate),
            opt(row.mean_return),
        ];
        rec.extend(row.selection.iter().map(u64::to_string));
        self.inner.write_record(rec)?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), MetricsError> {
        Ok(self.inner.flush()?)
    }
}

/// Reads a metrics CSV, checking the header against the schema.
pub fn read_metrics<R: Read>(input: R, source_name: &str) -> Result<Vec<MetricRow>, MetricsError> {
    let mut rdr = csv::Reader::from_reader(input);
    let head: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut offending: Vec<String> = FIXED_COLUMNS
        .iter()
        .enumerate()
        .filter(|(i, c)| head.get(*i).map(String::as_str) != Some(**c))
        .map(|(_, c)| c.to_string())
        .collect();
    let sel = head.len().saturating_sub(FIXED_COLUMNS.len());
    for (j, name) in head.iter().skip(FIXED_COLUMNS.len()).enumerate() {
        if *name != format!("sel_{j}") {
            offending.push(name.clone());
        }
    }
    if !offending.is_empty() {
        return Err(MetricsError::Schema { source_name: source_name.to_string(), columns: offending });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |col: usize| MetricsError::Value {
            source_name: source_name.to_string(),
            row: i + 1,
            column: head[col].clone(),
            value: rec.get(col).unwrap_or("").to_string(),
        };
        let num = |col: usize| -> Result<u64, MetricsError> { rec[col].parse().map_err(|_| bad(col)) };
        let float = |col: usize| -> Result<Option<f64>, MetricsError> {
            match &rec[col] {
                "" => Ok(None),
                s => s.parse().map(Some).map_err(|_| bad(col)),
            }
        };
        rows.push(MetricRow {
            method: rec[0].to_string(),
            seed: num(1)?,
            epoch: num(2)? as usize,
            task: num(3)? as usize,
            cumulative_env_steps: num(4)?,
            success_rate: float(5)?,
            mean_return: float(6)?,
            selection: (0..sel).map(|j| num(FIXED_COLUMNS.len() + j)).collect::<Result<_, _>>()?,
        });
    }
    Ok(rows)
}

/// Fresh switch decisions: `epoch, task, step, chosen, score_0 ..`.
pub fn write_decisions<W: Write>(out: W, candidates: usize, decisions: &[DecisionRecord]) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_writer(out);
    let mut head: Vec<String> = ["epoch", "task", "step", "chosen"].iter().map(|s| s.to_string()).collect();
    head.extend((0..candidates).map(|j| format!("score_{j}")));
    w.write_record(&head)?;
    for d in decisions {
        let mut rec = vec![d.epoch.to_string(), d.task.to_string(), d.step.to_string(), d.chosen.to_string()];
        rec.extend(d.scores.iter().map(f64::to_string));
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}
