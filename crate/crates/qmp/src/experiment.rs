//! One seed of one experiment file, end to end.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use qmp_core::trainer::{EvalReport, Trainer};

use crate::config::{ConfigError, ExperimentFile};
use crate::metrics::{write_decisions, MetricRow, MetricsError, MetricsWriter};
use crate::snapshot::{Checkpoint, SnapshotError};

/// Overrides the root that relative `run.output_dir` paths resolve against.
pub const OUTPUT_ROOT_VAR: &str = "QMP_OUTPUT_ROOT";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] qmp_core::Error),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl RunError {
    /// 1 config error, 2 invariant (contract) failure, 3 runtime error.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            RunError::Core(qmp_core::Error::Contract(_)) => 2,
            _ => 3,
        }
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

/// `run.output_dir`, under `$QMP_OUTPUT_ROOT` when set and the path is relative.
pub fn output_dir(file: &ExperimentFile) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_VAR) {
        Some(root) if file.run.output_dir.is_relative() => PathBuf::from(root).join(&file.run.output_dir),
        _ => file.run.output_dir.clone(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub label: String,
    pub seed: u64,
    pub metrics: PathBuf,
    pub decisions: Option<PathBuf>,
    pub checkpoint: PathBuf,
    pub rows: Vec<MetricRow>,
    pub final_eval: EvalReport,
    /// Whole-run selection counts, `[task][candidate]`.
    pub selection: Vec<Vec<u64>>,
}

/// Trains one seed, writing `<label>_seed<seed>.csv`, an optional decisions
/// CSV and checkpoints into `dir`.
pub fn run_seed(file: &ExperimentFile, seed: u64, dir: &Path) -> Result<RunSummary, RunError> {
    let config = file.train_config(seed)?;
    let label = file.label();
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let stem = format!("{label}_seed{seed}");
    let metrics = dir.join(format!("{stem}.csv"));
    let mut trainer = Trainer::new(config)?;
    let out = File::create(&metrics).map_err(io(&metrics))?;
    let mut writer = MetricsWriter::new(BufWriter::new(out), trainer.candidate_count())?;
    let mut rows = Vec::new();
    let mut final_eval = EvalReport::default();
    let ckpt_every = file.run.checkpoint_interval;
    let mut checkpoint = dir.join(format!("{stem}.ckpt"));
    while trainer.epochs_done() < file.run.epochs {
        let records = trainer.run_epoch()?;
        for r in &records {
            let row = MetricRow::from_record(&label, seed, r);
            writer.write(&row)?;
            rows.push(row);
        }
        writer.flush()?;
        if records.iter().all(|r| r.eval.is_some()) {
            final_eval.tasks = records.iter().filter_map(|r| r.eval).collect();
        }
        let epoch = trainer.epochs_done();
        if ckpt_every > 0 && epoch % ckpt_every == 0 && epoch < file.run.epochs {
            let path = dir.join(format!("{stem}_epoch{epoch}.ckpt"));
            Checkpoint::capture(epoch, trainer.agents()).save(&path)?;
        }
    }
    Checkpoint::capture(trainer.epochs_done(), trainer.agents()).save(&checkpoint)?;
    let decisions = if file.run.log_decisions {
        let path = dir.join(format!("{stem}_decisions.csv"));
        let f = File::create(&path).map_err(io(&path))?;
        write_decisions(BufWriter::new(f), trainer.candidate_count(), trainer.decisions())?;
        Some(path)
    } else {
        None
    };
    checkpoint = checkpoint.canonicalize().unwrap_or(checkpoint);
    Ok(RunSummary {
        label,
        seed,
        metrics,
        decisions,
        checkpoint,
        rows,
        final_eval,
        selection: trainer.selection_total().counts.clone(),
    })
}

/// Reloads a checkpoint into agents built from `file` and re-runs evaluation.
pub fn evaluate_checkpoint(
    file: &ExperimentFile,
    seed: u64,
    checkpoint: &Path,
    episodes: Option<usize>,
) -> Result<EvalReport, RunError> {
    let mut config = file.train_config(seed)?;
    if let Some(e) = episodes {
        config.eval_episodes = e;
    }
    let mut trainer = Trainer::new(config)?;
    Checkpoint::load(checkpoint)?.restore(trainer.agents_mut())?;
    Ok(trainer.evaluate()?)
}
