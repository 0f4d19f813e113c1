use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;

use super::{EnvSpec, Environment, EpisodeClock, EpisodeSummary, StepInfo, StepResult};
use crate::math;
use crate::Result;

/// Single-task 2D reaching: move from `start` to `goal` with bounded increments.
#[derive(Debug, Clone, PartialEq)]
pub struct PointReachConfig {
    pub start: [f64; 2],
    pub goal: [f64; 2],
    pub max_episode_steps: usize,
    pub success_radius: f64,
    /// Observations are `position * obs_scale`.
    pub obs_scale: f64,
}

impl Default for PointReachConfig {
    fn default() -> Self {
        Self {
            start: [0.0, 0.0],
            goal: [10.0, 10.0],
            max_episode_steps: 100,
            success_radius: 0.5,
            obs_scale: 0.1,
        }
    }
}

/// Reward is the negative Euclidean distance to the goal, every step; no early
/// termination.
#[derive(Debug, Clone)]
pub struct PointReach2D {
    config: PointReachConfig,
    spec: EnvSpec,
    position: [f64; 2],
    clock: EpisodeClock,
}

impl PointReach2D {
    pub fn new(config: PointReachConfig) -> Result<Self> {
        let spec = EnvSpec {
            task_count: 1,
            obs_dim: 2,
            act_dim: 2,
            action_low: vec![-1.0; 2],
            action_high: vec![1.0; 2],
            max_episode_steps: config.max_episode_steps,
        };
        spec.validate()?;
        Ok(Self {
            position: config.start,
            config,
            spec,
            clock: EpisodeClock::default(),
        })
    }

    pub fn position(&self) -> [f64; 2] {
        self.position
    }

    fn observe(&self) -> Vec<f64> {
        self.position.iter().map(|p| p * self.config.obs_scale).collect()
    }

    fn distance(&self) -> f64 {
        math::distance(&self.position, &self.config.goal)
    }

    /// Largest distance reachable from the goal within one episode.
    pub fn max_distance(&self) -> f64 {
        math::distance(&self.config.start, &self.config.goal)
            + self.config.max_episode_steps as f64 * core::f64::consts::SQRT_2
    }
}

impl Environment for PointReach2D {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, task: usize, _rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        self.clock.start(task, 1)?;
        self.position = self.config.start;
        Ok(self.observe())
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        let a = self.spec.clip_action(action)?;
        self.clock.tick()?;
        self.position[0] += a[0];
        self.position[1] += a[1];
        let dist = self.distance();
        let truncated = self.clock.steps >= self.config.max_episode_steps;
        self.clock.done = truncated;
        Ok(StepResult {
            next_state: self.observe(),
            reward: -dist,
            terminal: false,
            truncated,
            info: StepInfo {
                subgoals_reached: 0,
                success: dist < self.config.success_radius,
                distance_to_goal: dist,
            },
        })
    }

    fn summary(&self) -> EpisodeSummary {
        EpisodeSummary {
            task: self.clock.task.unwrap_or(0),
            steps: self.clock.steps,
            final_distance: self.distance(),
            subgoals_reached: 0,
            max_displacement: math::distance(&self.position, &self.config.start),
            terminated: false,
        }
    }

    fn success(&self, episode: &EpisodeSummary) -> bool {
        episode.final_distance < self.config.success_radius
    }

    fn min_reward(&self, _task: usize) -> f64 {
        -self.max_distance()
    }
}
