//! Multi-task training loop: per-task collection with a behavioral policy,
//! per-task replay, SAC updates, baselines and evaluation.

mod buffer;
mod run;
mod uds;

pub use buffer::ReplayBuffer;
pub use run::{EpisodeStats, Phase, Trainer};
pub use uds::{percentile, uds_share_batch};

use alloc::string::String;
use alloc::vec::Vec;

use crate::env::EnvConfig;
use crate::error::contract;
use crate::math;
use crate::sac::SacConfig;
use crate::switch::{FixedGaussianPolicy, SwitchKind, SwitchVariant};
use crate::Result;

/// How behavior (or data) is shared between tasks.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    /// Collection goes through the switch; `SelfOnly` is the no-sharing baseline.
    Mixture(SwitchKind),
    /// Own-policy collection that never calls into the switch module.
    Bypass,
    /// One agent for all tasks, fed by every task's episodes.
    FullyShared,
    /// Own-policy collection; peer transitions join training batches when
    /// their `Q_i` passes the percentile rule.
    DataSharing { percentile: f64 },
}

impl Method {
    pub fn label(&self) -> String {
        let s = match self {
            Method::Mixture(k) => match &k.variant {
                SwitchVariant::SelfOnly => "self_only",
                SwitchVariant::ArgmaxQ => "qmp",
                SwitchVariant::Uniform => "qmp_uniform",
                SwitchVariant::DomainPrior(_) => "qmp_domain",
                SwitchVariant::SoftmaxQ { .. } => "qmp_softmax",
                SwitchVariant::SampledArgmax { .. } => "qmp_sampled",
            },
            Method::Bypass => "bypass",
            Method::FullyShared => "fully_shared",
            Method::DataSharing { .. } => "uds",
        };
        String::from(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub env: EnvConfig,
    pub method: Method,
    pub sac: SacConfig,
    /// Fixed policies appended to every task's candidate pool.
    pub helpers: Vec<FixedGaussianPolicy>,
    /// Whole episodes are collected per task until at least this many steps.
    pub env_steps_per_update: usize,
    pub grad_steps_per_update: usize,
    pub batch_size: usize,
    pub min_buffer: usize,
    pub buffer_capacity: usize,
    pub epochs: usize,
    /// Evaluate every this many epochs (and after the last one).
    pub eval_interval: usize,
    pub eval_episodes: usize,
    pub seed: u64,
    /// Keep every fresh switch decision in memory.
    pub log_decisions: bool,
}

impl TrainConfig {
    pub fn new(env: EnvConfig, method: Method) -> Self {
        Self {
            env,
            method,
            sac: SacConfig::default(),
            helpers: Vec::new(),
            env_steps_per_update: 600,
            grad_steps_per_update: 100,
            batch_size: 256,
            min_buffer: 1000,
            buffer_capacity: 200_000,
            epochs: 100,
            eval_interval: 5,
            eval_episodes: 10,
            seed: 0,
            log_decisions: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sac.validate()?;
        contract!(self.env_steps_per_update >= 1, "env_steps_per_update must be positive");
        contract!(self.batch_size >= 1, "batch_size must be positive");
        contract!(self.buffer_capacity >= 1, "buffer_capacity must be positive");
        contract!(self.min_buffer <= self.buffer_capacity, "min_buffer exceeds buffer_capacity");
        contract!(self.epochs >= 1, "epochs must be positive");
        contract!(self.eval_interval >= 1, "eval_interval must be positive");
        contract!(self.eval_episodes >= 1, "eval_episodes must be positive");
        if let Method::DataSharing { percentile } = self.method {
            contract!((0.0..=100.0).contains(&percentile), "percentile {percentile} outside [0, 100]");
        }
        if !matches!(self.method, Method::Mixture(_)) {
            contract!(self.helpers.is_empty(), "helper policies need a mixture method");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TaskEval {
    pub success_rate: f64,
    pub mean_return: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub tasks: Vec<TaskEval>,
}

impl EvalReport {
    pub fn mean_success(&self) -> f64 {
        self.tasks.iter().map(|t| t.success_rate).sum::<f64>() / self.tasks.len().max(1) as f64
    }

    pub fn mean_return(&self) -> f64 {
        self.tasks.iter().map(|t| t.mean_return).sum::<f64>() / self.tasks.len().max(1) as f64
    }
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, math::sqrt(var))
}

/// One CSV row: task `task` after epoch `epoch`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub task: usize,
    pub cumulative_env_steps: u64,
    pub eval: Option<TaskEval>,
    /// Steps acted by each candidate for this task during the epoch.
    pub selection: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRecord {
    pub epoch: usize,
    pub task: usize,
    pub step: usize,
    pub chosen: usize,
    pub scores: Vec<f64>,
}
