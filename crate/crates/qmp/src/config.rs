//! Experiment files: a strict TOML document with `env`, `method`, `sac` and
//! `run` sections. Every run is reproducible from the file and a seed.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use qmp_core::env::{EnvConfig, MazeConfig, MultistageConfig, PointReachConfig};
use qmp_core::switch::{FixedGaussianPolicy, SwitchKind, SwitchVariant};
use qmp_core::trainer::{Method, TrainConfig};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid `{key}`: {message}")]
    Invalid { key: &'static str, message: String },
}

fn invalid(key: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key, message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub env: EnvSection,
    pub method: MethodSection,
    #[serde(default)]
    pub sac: SacSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvName {
    PointReach,
    Multistage,
    Maze,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSection {
    pub name: EnvName,
    /// Maze only: indices into the default task list.
    pub tasks: Option<Vec<usize>>,
    pub max_episode_steps: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    SelfOnly,
    Qmp,
    Uniform,
    DomainPrior,
    Softmax,
    Sampled,
    Bypass,
    FullyShared,
    Uds,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HelperSection {
    pub direction: Vec<f64>,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSection {
    pub name: MethodName,
    /// Hold horizon `H`.
    #[serde(default = "one")]
    pub hold: usize,
    /// Softmax temperature `T`.
    pub temperature: Option<f64>,
    pub samples: Option<usize>,
    /// Data-sharing percentile `k`.
    pub percentile: Option<f64>,
    #[serde(default)]
    pub warmup: u64,
    #[serde(default)]
    pub self_probability: f64,
    #[serde(default)]
    pub include_entropy: bool,
    #[serde(default)]
    pub helpers: Vec<HelperSection>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SacSection {
    pub hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub alpha_lr: f64,
    pub gamma: f64,
    /// Fraction of the target network kept per soft update.
    pub tau: f64,
    pub initial_alpha: f64,
    pub learn_alpha: bool,
    pub target_entropy: Option<f64>,
    pub reward_scale: f64,
    pub batch_size: usize,
    pub env_steps_per_update: usize,
    pub grad_steps_per_update: usize,
    pub min_buffer: usize,
    pub buffer_capacity: usize,
}

impl Default for SacSection {
    fn default() -> Self {
        let sac = qmp_core::sac::SacConfig::default();
        let t = TrainConfig::new(EnvConfig::PointReach(PointReachConfig::default()), Method::Bypass);
        Self {
            hidden: sac.hidden,
            actor_lr: sac.actor_lr,
            critic_lr: sac.critic_lr,
            alpha_lr: sac.alpha_lr,
            gamma: sac.gamma,
            tau: sac.target_retention,
            initial_alpha: sac.initial_alpha,
            learn_alpha: sac.learn_alpha,
            target_entropy: sac.target_entropy,
            reward_scale: sac.reward_scale,
            batch_size: t.batch_size,
            env_steps_per_update: t.env_steps_per_update,
            grad_steps_per_update: t.grad_steps_per_update,
            min_buffer: t.min_buffer,
            buffer_capacity: t.buffer_capacity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub epochs: usize,
    pub seeds: Vec<u64>,
    pub eval_interval: usize,
    pub eval_episodes: usize,
    pub output_dir: PathBuf,
    /// Method column in the CSV; defaults to the method's own label.
    pub label: Option<String>,
    pub log_decisions: bool,
    /// Save agent parameters every this many epochs; 0 saves only the last.
    pub checkpoint_interval: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            epochs: 100,
            seeds: vec![0, 1, 2, 3, 4],
            eval_interval: 5,
            eval_episodes: 10,
            output_dir: PathBuf::from("runs"),
            label: None,
            log_decisions: false,
            checkpoint_interval: 0,
        }
    }
}

impl ExperimentFile {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let file: ExperimentFile = toml::from_str(text)?;
        file.validate()?;
        Ok(file)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let m = &self.method;
        if m.hold < 1 {
            return Err(invalid("method.hold", "must be at least 1"));
        }
        match (m.name, m.temperature) {
            (MethodName::Softmax, None) => return Err(invalid("method.temperature", "softmax needs a temperature")),
            (_, Some(t)) if !(t > 0.0 && t.is_finite()) => return Err(invalid("method.temperature", format!("{t} is not positive"))),
            _ => {}
        }
        if m.name == MethodName::Sampled && m.samples.unwrap_or(0) < 1 {
            return Err(invalid("method.samples", "sampled argmax needs samples >= 1"));
        }
        if m.name == MethodName::Uds {
            match m.percentile {
                Some(k) if (0.0..=100.0).contains(&k) => {}
                Some(k) => return Err(invalid("method.percentile", format!("{k} outside [0, 100]"))),
                None => return Err(invalid("method.percentile", "uds needs a percentile")),
            }
        }
        if m.name == MethodName::DomainPrior && self.env.name != EnvName::Multistage {
            return Err(invalid("method.name", "domain_prior is defined for multistage only"));
        }
        if !(0.0..=1.0).contains(&m.self_probability) {
            return Err(invalid("method.self_probability", "must lie in [0, 1]"));
        }
        if self.env.tasks.is_some() && self.env.name != EnvName::Maze {
            return Err(invalid("env.tasks", "task subsets are supported for maze only"));
        }
        if let Some(l) = &self.run.label {
            if l.is_empty() || l.contains([',', '"', '\n', '/']) {
                return Err(invalid("run.label", "must be nonempty without commas, quotes, slashes or newlines"));
            }
        }
        if self.run.seeds.is_empty() {
            return Err(invalid("run.seeds", "at least one seed is required"));
        }
        let mut seeds = self.run.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.run.seeds.len() {
            return Err(invalid("run.seeds", "seeds must be distinct"));
        }
        for (key, v) in [
            ("run.epochs", self.run.epochs),
            ("run.eval_interval", self.run.eval_interval),
            ("run.eval_episodes", self.run.eval_episodes),
            ("sac.batch_size", self.sac.batch_size),
            ("sac.env_steps_per_update", self.sac.env_steps_per_update),
            ("sac.buffer_capacity", self.sac.buffer_capacity),
        ] {
            if v == 0 {
                return Err(invalid(key, "must be positive"));
            }
        }
        // Surface core-level violations now, with the seed-independent parts.
        self.train_config(self.run.seeds[0])?;
        Ok(())
    }

    fn env_config(&self) -> Result<EnvConfig, ConfigError> {
        let steps = self.env.max_episode_steps;
        Ok(match self.env.name {
            EnvName::PointReach => {
                let mut c = PointReachConfig::default();
                c.max_episode_steps = steps.unwrap_or(c.max_episode_steps);
                EnvConfig::PointReach(c)
            }
            EnvName::Multistage => {
                let mut c = MultistageConfig::default();
                c.max_episode_steps = steps.unwrap_or(c.max_episode_steps);
                EnvConfig::Multistage(c)
            }
            EnvName::Maze => {
                let mut c = match &self.env.tasks {
                    Some(t) => {
                        if let Some(bad) = t.iter().find(|&&i| i >= MazeConfig::DEFAULT_TASKS.len()) {
                            return Err(invalid("env.tasks", format!("no maze task {bad}")));
                        }
                        MazeConfig::with_tasks(t)
                    }
                    None => MazeConfig::default(),
                };
                c.max_episode_steps = steps.unwrap_or(c.max_episode_steps);
                EnvConfig::Maze(c)
            }
        })
    }

    fn method(&self, env: &EnvConfig) -> Method {
        let m = &self.method;
        let variant = match m.name {
            MethodName::Bypass => return Method::Bypass,
            MethodName::FullyShared => return Method::FullyShared,
            MethodName::Uds => return Method::DataSharing { percentile: m.percentile.unwrap_or(0.0) },
            MethodName::SelfOnly => SwitchVariant::SelfOnly,
            MethodName::Qmp => SwitchVariant::ArgmaxQ,
            MethodName::Uniform => SwitchVariant::Uniform,
            MethodName::DomainPrior => match env {
                EnvConfig::Multistage(c) => SwitchVariant::DomainPrior(c.domain_prior()),
                _ => SwitchVariant::Uniform,
            },
            MethodName::Softmax => SwitchVariant::SoftmaxQ { temperature: m.temperature.unwrap_or(1.0) },
            MethodName::Sampled => SwitchVariant::SampledArgmax { samples: m.samples.unwrap_or(1) },
        };
        let mut kind = SwitchKind::new(variant);
        kind.hold_horizon = m.hold;
        kind.include_entropy = m.include_entropy;
        kind.warmup_steps = m.warmup;
        kind.self_probability = m.self_probability;
        Method::Mixture(kind)
    }

    /// CSV method label.
    pub fn label(&self) -> String {
        match &self.run.label {
            Some(l) => l.clone(),
            None => self.method(&EnvConfig::Multistage(MultistageConfig::default())).label(),
        }
    }

    /// The core configuration for one seed.
    pub fn train_config(&self, seed: u64) -> Result<TrainConfig, ConfigError> {
        let env = self.env_config()?;
        let method = self.method(&env);
        let mut c = TrainConfig::new(env, method);
        let s = &self.sac;
        c.sac.hidden = s.hidden.clone();
        c.sac.actor_lr = s.actor_lr;
        c.sac.critic_lr = s.critic_lr;
        c.sac.alpha_lr = s.alpha_lr;
        c.sac.gamma = s.gamma;
        c.sac.target_retention = s.tau;
        c.sac.initial_alpha = s.initial_alpha;
        c.sac.learn_alpha = s.learn_alpha;
        c.sac.target_entropy = s.target_entropy;
        c.sac.reward_scale = s.reward_scale;
        c.batch_size = s.batch_size;
        c.env_steps_per_update = s.env_steps_per_update;
        c.grad_steps_per_update = s.grad_steps_per_update;
        c.min_buffer = s.min_buffer;
        c.buffer_capacity = s.buffer_capacity;
        c.epochs = self.run.epochs;
        c.eval_interval = self.run.eval_interval;
        c.eval_episodes = self.run.eval_episodes;
        c.log_decisions = self.run.log_decisions;
        c.seed = seed;
        for h in &self.method.helpers {
            let p = FixedGaussianPolicy::toward(&h.direction, h.std)
                .map_err(|e| invalid("method.helpers", e.to_string()))?;
            c.helpers.push(p);
        }
        c.validate().map_err(|e| invalid("config", e.to_string()))?;
        Ok(c)
    }
}
