//! Multi-task environments sharing one observation and action space per suite.
//!
//! An instance is bound to a task at [`Environment::reset`]; stepping after the
//! episode ended is a contract violation.

mod maze;
mod multistage;
mod point_reach;

pub use maze::{GridMazeNav, MazeConfig, MazeTask, LARGE_MAZE};
pub use multistage::{MultistageConfig, MultistageGoalSeq, RewardMode, StageTask};
pub use point_reach::{PointReach2D, PointReachConfig};

use alloc::boxed::Box;
use alloc::vec::Vec;

use rand::RngCore;

use crate::error::contract;
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub task_count: usize,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    pub max_episode_steps: usize,
}

impl EnvSpec {
    pub fn validate(&self) -> Result<()> {
        contract!(self.task_count >= 1, "environment needs at least one task");
        contract!(
            self.action_low.len() == self.act_dim && self.action_high.len() == self.act_dim,
            "action bounds must have act_dim = {} entries",
            self.act_dim
        );
        contract!(
            self.action_low
                .iter()
                .zip(&self.action_high)
                .all(|(l, h)| l.is_finite() && h.is_finite() && l < h),
            "action bounds must be finite with low < high"
        );
        contract!(self.max_episode_steps > 0, "episodes need a positive step limit");
        Ok(())
    }

    /// Clips `action` into the declared box; logs a warning when clipping was needed.
    pub fn clip_action(&self, action: &[f64]) -> Result<Vec<f64>> {
        contract!(action.len() == self.act_dim, "action length {} != {}", action.len(), self.act_dim);
        contract!(action.iter().all(|a| a.is_finite()), "action contains non-finite values");
        let mut clipped = false;
        let out = action
            .iter()
            .zip(self.action_low.iter().zip(&self.action_high))
            .map(|(&a, (&lo, &hi))| {
                let c = a.clamp(lo, hi);
                clipped |= c != a;
                c
            })
            .collect();
        if clipped {
            log::warn!("action {:?} outside declared bounds; clipped", action);
        }
        Ok(out)
    }

    /// Center and half-width of the action box, used by tanh-squashed policies.
    pub fn action_offset_scale(&self) -> (Vec<f64>, Vec<f64>) {
        let offset = self
            .action_low
            .iter()
            .zip(&self.action_high)
            .map(|(l, h)| 0.5 * (l + h))
            .collect();
        let scale = self
            .action_low
            .iter()
            .zip(&self.action_high)
            .map(|(l, h)| 0.5 * (h - l))
            .collect();
        (offset, scale)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepInfo {
    pub subgoals_reached: u32,
    pub success: bool,
    pub distance_to_goal: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_state: Vec<f64>,
    pub reward: f64,
    /// True termination: the next state is absorbing and is not bootstrapped.
    pub terminal: bool,
    /// The step limit ended the episode.
    pub truncated: bool,
    pub info: StepInfo,
}

impl StepResult {
    pub fn done(&self) -> bool {
        self.terminal || self.truncated
    }
}

/// What an environment remembers about the current (or just finished) episode.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeSummary {
    pub task: usize,
    pub steps: usize,
    pub final_distance: f64,
    pub subgoals_reached: u32,
    pub max_displacement: f64,
    pub terminated: bool,
}

pub trait Environment {
    fn spec(&self) -> &EnvSpec;

    fn reset(&mut self, task: usize, rng: &mut dyn RngCore) -> Result<Vec<f64>>;

    fn step(&mut self, action: &[f64]) -> Result<StepResult>;

    fn summary(&self) -> EpisodeSummary;

    /// Success of a completed episode for the task recorded in `episode`.
    fn success(&self, episode: &EpisodeSummary) -> bool;

    /// Analytic lower bound of the per-step reward for `task`.
    fn min_reward(&self, task: usize) -> f64;
}

/// Which environment suite to build, with its task definitions.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvConfig {
    PointReach(PointReachConfig),
    Multistage(MultistageConfig),
    Maze(MazeConfig),
}

impl EnvConfig {
    pub fn build(&self) -> Result<Box<dyn Environment + Send>> {
        Ok(match self {
            EnvConfig::PointReach(c) => Box::new(PointReach2D::new(c.clone())?),
            EnvConfig::Multistage(c) => Box::new(MultistageGoalSeq::new(c.clone())?),
            EnvConfig::Maze(c) => Box::new(GridMazeNav::new(c.clone())?),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            EnvConfig::PointReach(_) => "point_reach",
            EnvConfig::Multistage(_) => "multistage",
            EnvConfig::Maze(_) => "maze",
        }
    }
}

/// Step bookkeeping shared by the environments.
#[derive(Debug, Clone, Default)]
pub(crate) struct EpisodeClock {
    pub task: Option<usize>,
    pub steps: usize,
    pub done: bool,
}

impl EpisodeClock {
    pub fn start(&mut self, task: usize, task_count: usize) -> Result<()> {
        contract!(task < task_count, "task id {task} out of range (N = {task_count})");
        self.task = Some(task);
        self.steps = 0;
        self.done = false;
        Ok(())
    }

    pub fn tick(&mut self) -> Result<usize> {
        let task = match self.task {
            Some(t) => t,
            None => return Err(crate::Error::Contract("step before reset".into())),
        };
        contract!(!self.done, "step after the episode ended");
        self.steps += 1;
        Ok(task)
    }
}
