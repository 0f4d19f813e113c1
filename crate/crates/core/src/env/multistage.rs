use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng as _, RngCore};

use super::{EnvSpec, Environment, EpisodeClock, EpisodeSummary, StepInfo, StepResult};
use crate::error::contract;
use crate::math;
use crate::Result;

/// How a task turns positions and subgoal events into reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RewardMode {
    /// `−distance to the current subgoal + bonus per subgoal reached`.
    DenseBonus,
    /// `DenseBonus` plus a constant added every step.
    DenseBonusShifted(f64),
    /// Only the subgoal bonus.
    Sparse,
    /// `−distance to the initial position`; no subgoals.
    Stay,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageTask {
    /// Ordered subgoals; empty for [`RewardMode::Stay`].
    pub subgoals: Vec<[f64; 3]>,
    pub mode: RewardMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultistageConfig {
    pub tasks: Vec<StageTask>,
    pub initial_position: [f64; 3],
    /// Reset perturbation is uniform in `±initial_noise` per coordinate.
    pub initial_noise: f64,
    pub reach_threshold: f64,
    pub stay_radius: f64,
    pub action_bound: f64,
    pub subgoal_bonus: f64,
    /// Positions are clamped to `±workspace_bound` per coordinate.
    pub workspace_bound: f64,
    pub max_episode_steps: usize,
}

const SG_RED: [f64; 3] = [0.2, 0.3, 0.5];
const SG_BLUE: [f64; 3] = [0.3, 0.0, 0.3];
const SG_GREEN: [f64; 3] = [0.4, -0.3, 0.4];
const SG_VIOLET: [f64; 3] = [0.4, 0.3, 0.2];

impl Default for MultistageConfig {
    /// Five tasks: four subgoal sequences with partly shared segments and one
    /// conflicting "stay" task.
    fn default() -> Self {
        let task = |subgoals: &[[f64; 3]], mode| StageTask {
            subgoals: subgoals.to_vec(),
            mode,
        };
        Self {
            tasks: vec![
                task(&[SG_RED, SG_BLUE, SG_GREEN], RewardMode::DenseBonus),
                task(&[SG_RED, SG_BLUE, SG_VIOLET], RewardMode::DenseBonusShifted(-2.0)),
                task(&[SG_BLUE, SG_VIOLET, SG_GREEN], RewardMode::DenseBonus),
                task(&[SG_BLUE, SG_GREEN, SG_RED], RewardMode::Sparse),
                task(&[], RewardMode::Stay),
            ],
            initial_position: [0.0; 3],
            initial_noise: 0.01,
            reach_threshold: 0.1,
            stay_radius: 0.1,
            action_bound: 0.1,
            subgoal_bonus: 1.0,
            workspace_bound: 1.0,
            max_episode_steps: 150,
        }
    }
}

impl MultistageConfig {
    pub fn validate(&self) -> Result<()> {
        contract!(!self.tasks.is_empty(), "multistage needs at least one task");
        for (i, t) in self.tasks.iter().enumerate() {
            match t.mode {
                RewardMode::Stay => contract!(t.subgoals.is_empty(), "task {i}: stay tasks take no subgoals"),
                _ => contract!(!t.subgoals.is_empty(), "task {i}: subgoal list is empty"),
            }
        }
        contract!(self.reach_threshold > 0.0 && self.action_bound > 0.0, "thresholds must be positive");
        contract!(self.initial_noise >= 0.0, "initial noise must be nonnegative");
        Ok(())
    }

    /// Segments `(stage, from, to)` of each task's subgoal path, starting at
    /// the initial position. Stay tasks have none.
    fn segments(&self) -> Vec<Vec<(usize, [f64; 3], [f64; 3])>> {
        self.tasks
            .iter()
            .map(|t| {
                let mut from = self.initial_position;
                t.subgoals
                    .iter()
                    .enumerate()
                    .map(|(stage, &to)| {
                        let seg = (stage, from, to);
                        from = to;
                        seg
                    })
                    .collect()
            })
            .collect()
    }

    /// Hand-crafted mixture probabilities from shared subgoal segments.
    ///
    /// Each of task `i`'s segments carries equal weight, split evenly among all
    /// tasks whose path contains the same segment at the same stage. Tasks without segments keep
    /// all mass on themselves.
    pub fn domain_prior(&self) -> Vec<Vec<f64>> {
        let segs = self.segments();
        let n = self.tasks.len();
        let mut prior = vec![vec![0.0; n]; n];
        for i in 0..n {
            if segs[i].is_empty() {
                prior[i][i] = 1.0;
                continue;
            }
            let share = 1.0 / segs[i].len() as f64;
            for seg in &segs[i] {
                let owners: Vec<usize> = (0..n).filter(|&k| segs[k].contains(seg)).collect();
                for &k in &owners {
                    prior[i][k] += share / owners.len() as f64;
                }
            }
        }
        prior
    }
}

/// 3D velocity-controlled point that must visit task-specific subgoals in order.
///
/// The observation is the position plus the fraction of subgoals reached; the
/// subgoal coordinates are never observed.
#[derive(Debug, Clone)]
pub struct MultistageGoalSeq {
    config: MultistageConfig,
    spec: EnvSpec,
    position: [f64; 3],
    start: [f64; 3],
    reached: u32,
    max_displacement: f64,
    clock: EpisodeClock,
}

impl MultistageGoalSeq {
    pub fn new(config: MultistageConfig) -> Result<Self> {
        config.validate()?;
        let b = config.action_bound;
        let spec = EnvSpec {
            task_count: config.tasks.len(),
            obs_dim: 4,
            act_dim: 3,
            action_low: vec![-b; 3],
            action_high: vec![b; 3],
            max_episode_steps: config.max_episode_steps,
        };
        spec.validate()?;
        Ok(Self {
            position: config.initial_position,
            start: config.initial_position,
            config,
            spec,
            reached: 0,
            max_displacement: 0.0,
            clock: EpisodeClock::default(),
        })
    }

    pub fn config(&self) -> &MultistageConfig {
        &self.config
    }

    pub fn position(&self) -> [f64; 3] {
        self.position
    }

    pub fn subgoals_reached(&self) -> u32 {
        self.reached
    }

    fn task(&self) -> &StageTask {
        &self.config.tasks[self.clock.task.unwrap_or(0)]
    }

    /// Current target: the next subgoal, the last one once all are reached, or
    /// the start for stay tasks.
    fn target(&self) -> [f64; 3] {
        let t = self.task();
        if t.subgoals.is_empty() {
            self.start
        } else {
            t.subgoals[(self.reached as usize).min(t.subgoals.len() - 1)]
        }
    }

    fn observe(&self) -> Vec<f64> {
        let total = self.task().subgoals.len().max(1) as f64;
        vec![
            self.position[0],
            self.position[1],
            self.position[2],
            self.reached as f64 / total,
        ]
    }

    fn max_distance(&self) -> f64 {
        2.0 * self.config.workspace_bound * math::sqrt(3.0)
    }
}

impl Environment for MultistageGoalSeq {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, task: usize, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        self.clock.start(task, self.config.tasks.len())?;
        let noise = self.config.initial_noise;
        let mut p = self.config.initial_position;
        if noise > 0.0 {
            for c in &mut p {
                *c += rng.random_range(-noise..=noise);
            }
        }
        self.position = p;
        self.start = p;
        self.reached = 0;
        self.max_displacement = 0.0;
        Ok(self.observe())
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        let a = self.spec.clip_action(action)?;
        self.clock.tick()?;
        let bound = self.config.workspace_bound;
        for (p, d) in self.position.iter_mut().zip(&a) {
            *p = (*p + d).clamp(-bound, bound);
        }
        self.max_displacement = self.max_displacement.max(math::distance(&self.position, &self.start));

        let (mode, n_goals) = {
            let t = self.task();
            (t.mode, t.subgoals.len() as u32)
        };
        let mut newly = 0.0;
        if n_goals > 0 && self.reached < n_goals {
            let goal = self.task().subgoals[self.reached as usize];
            if math::distance(&self.position, &goal) < self.config.reach_threshold {
                self.reached += 1;
                newly = 1.0;
            }
        }
        let dist = math::distance(&self.position, &self.target());
        let bonus = newly * self.config.subgoal_bonus;
        let reward = match mode {
            RewardMode::DenseBonus => -dist + bonus,
            RewardMode::DenseBonusShifted(shift) => -dist + bonus + shift,
            RewardMode::Sparse => bonus,
            RewardMode::Stay => -dist,
        };
        let truncated = self.clock.steps >= self.config.max_episode_steps;
        self.clock.done = truncated;
        let summary = self.summary();
        Ok(StepResult {
            next_state: self.observe(),
            reward,
            terminal: false,
            truncated,
            info: StepInfo {
                subgoals_reached: self.reached,
                success: self.success(&summary),
                distance_to_goal: dist,
            },
        })
    }

    fn summary(&self) -> EpisodeSummary {
        EpisodeSummary {
            task: self.clock.task.unwrap_or(0),
            steps: self.clock.steps,
            final_distance: math::distance(&self.position, &self.target()),
            subgoals_reached: self.reached,
            max_displacement: self.max_displacement,
            terminated: false,
        }
    }

    fn success(&self, episode: &EpisodeSummary) -> bool {
        let task = &self.config.tasks[episode.task.min(self.config.tasks.len() - 1)];
        match task.mode {
            RewardMode::Stay => episode.max_displacement < self.config.stay_radius,
            _ => episode.subgoals_reached as usize >= task.subgoals.len(),
        }
    }

    fn min_reward(&self, task: usize) -> f64 {
        match self.config.tasks[task].mode {
            RewardMode::DenseBonus | RewardMode::Stay => -self.max_distance(),
            RewardMode::DenseBonusShifted(shift) => -self.max_distance() + shift.min(0.0),
            RewardMode::Sparse => 0.0,
        }
    }
}
