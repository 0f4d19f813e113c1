use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng as _, RngCore};

use super::{EnvSpec, Environment, EpisodeClock, EpisodeSummary, StepInfo, StepResult};
use crate::error::contract;
use crate::math;
use crate::Result;

/// Large maze wall pattern; `#` is wall, `O` is free. Row `r`, column `c` is
/// the unit cell centered at `(x, y) = (r, c)`.
pub const LARGE_MAZE: [&str; 9] = [
    "############",
    "#OOOO#OOOOO#",
    "#O##O#O#O#O#",
    "#OOOOOO#OOO#",
    "#O####O###O#",
    "#OO#O#OOOOO#",
    "##O#O#O#O###",
    "#OO#OOO#OOO#",
    "############",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MazeTask {
    pub start: [f64; 2],
    pub goal: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct MazeConfig {
    pub layout: Vec<String>,
    pub tasks: Vec<MazeTask>,
    /// Start perturbation is uniform in `±start_noise` per coordinate.
    pub start_noise: f64,
    pub goal_radius: f64,
    /// Position change per unit action.
    pub step_size: f64,
    pub max_episode_steps: usize,
    pub position_scale: f64,
}

impl MazeConfig {
    /// The ten default start/goal pairs, as grid cell coordinates.
    pub const DEFAULT_TASKS: [([f64; 2], [f64; 2]); 10] = [
        ([1.0, 1.0], [3.0, 4.0]),
        ([1.0, 1.0], [1.0, 4.0]),
        ([5.0, 1.0], [3.0, 3.0]),
        ([3.0, 6.0], [3.0, 1.0]),
        ([1.0, 6.0], [1.0, 10.0]),
        ([5.0, 6.0], [5.0, 10.0]),
        ([7.0, 4.0], [5.0, 6.0]),
        ([3.0, 8.0], [1.0, 8.0]),
        ([1.0, 4.0], [3.0, 6.0]),
        ([7.0, 8.0], [5.0, 8.0]),
    ];

    /// Default maze restricted to the listed task indices.
    pub fn with_tasks(indices: &[usize]) -> Self {
        let mut cfg = Self::default();
        cfg.tasks = indices.iter().map(|&i| cfg.tasks[i]).collect();
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        let grid = Grid::parse(&self.layout)?;
        contract!(!self.tasks.is_empty(), "maze needs at least one task");
        for (i, t) in self.tasks.iter().enumerate() {
            contract!(grid.is_free(t.start), "task {i}: start {:?} is not in free space", t.start);
            contract!(grid.is_free(t.goal), "task {i}: goal {:?} is not in free space", t.goal);
        }
        contract!(self.start_noise >= 0.0 && self.start_noise < 0.5, "start noise must lie in [0, 0.5)");
        contract!(self.step_size > 0.0 && self.step_size < 0.5, "step size must lie in (0, 0.5)");
        contract!(self.goal_radius > 0.0, "goal radius must be positive");
        Ok(())
    }
}

impl Default for MazeConfig {
    fn default() -> Self {
        Self {
            layout: LARGE_MAZE.iter().map(|r| String::from(*r)).collect(),
            tasks: Self::DEFAULT_TASKS
                .iter()
                .map(|&(start, goal)| MazeTask { start, goal })
                .collect(),
            start_noise: 0.1,
            goal_radius: 0.5,
            step_size: 0.1,
            max_episode_steps: 600,
            position_scale: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
struct Grid {
    rows: usize,
    cols: usize,
    wall: Vec<bool>,
}

impl Grid {
    fn parse(layout: &[String]) -> Result<Self> {
        contract!(!layout.is_empty(), "maze layout is empty");
        let cols = layout[0].len();
        let mut wall = Vec::with_capacity(layout.len() * cols);
        for (r, row) in layout.iter().enumerate() {
            contract!(row.len() == cols, "maze row {r} has {} cells, expected {cols}", row.len());
            for ch in row.chars() {
                match ch {
                    '#' => wall.push(true),
                    'O' | '.' => wall.push(false),
                    other => return Err(crate::Error::Contract(alloc::format!("unknown maze cell {other:?}"))),
                }
            }
        }
        Ok(Self { rows: layout.len(), cols, wall })
    }

    /// Cells outside the layout count as walls.
    fn is_free(&self, p: [f64; 2]) -> bool {
        let r = libm::floor(p[0] + 0.5);
        let c = libm::floor(p[1] + 0.5);
        if r < 0.0 || c < 0.0 || r >= self.rows as f64 || c >= self.cols as f64 {
            return false;
        }
        !self.wall[r as usize * self.cols + c as usize]
    }
}

/// Point mass in a walled grid maze. Each task fixes a start and a goal; the
/// goal is not observed.
#[derive(Debug, Clone)]
pub struct GridMazeNav {
    config: MazeConfig,
    grid: Grid,
    spec: EnvSpec,
    position: [f64; 2],
    velocity: [f64; 2],
    terminated: bool,
    clock: EpisodeClock,
}

impl GridMazeNav {
    pub fn new(config: MazeConfig) -> Result<Self> {
        config.validate()?;
        let grid = Grid::parse(&config.layout)?;
        let spec = EnvSpec {
            task_count: config.tasks.len(),
            obs_dim: 4,
            act_dim: 2,
            action_low: vec![-1.0; 2],
            action_high: vec![1.0; 2],
            max_episode_steps: config.max_episode_steps,
        };
        spec.validate()?;
        Ok(Self {
            position: config.tasks[0].start,
            config,
            grid,
            spec,
            velocity: [0.0; 2],
            terminated: false,
            clock: EpisodeClock::default(),
        })
    }

    pub fn position(&self) -> [f64; 2] {
        self.position
    }

    pub fn is_free(&self, p: [f64; 2]) -> bool {
        self.grid.is_free(p)
    }

    /// Teleports the agent; for tests and diagnostics.
    pub fn set_position(&mut self, p: [f64; 2]) -> Result<()> {
        contract!(self.grid.is_free(p), "position {p:?} is inside a wall");
        self.position = p;
        Ok(())
    }

    fn goal(&self) -> [f64; 2] {
        self.config.tasks[self.clock.task.unwrap_or(0)].goal
    }

    fn observe(&self) -> Vec<f64> {
        let s = self.config.position_scale;
        let v = 1.0 / self.config.step_size;
        vec![
            self.position[0] * s,
            self.position[1] * s,
            self.velocity[0] * v,
            self.velocity[1] * v,
        ]
    }
}

impl Environment for GridMazeNav {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, task: usize, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        self.clock.start(task, self.config.tasks.len())?;
        let noise = self.config.start_noise;
        let mut p = self.config.tasks[task].start;
        if noise > 0.0 {
            for c in &mut p {
                *c += rng.random_range(-noise..=noise);
            }
        }
        // Start cells are free and noise < 0.5, so the start stays in its cell.
        self.position = p;
        self.velocity = [0.0; 2];
        self.terminated = false;
        Ok(self.observe())
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        let a = self.spec.clip_action(action)?;
        self.clock.tick()?;
        let before = self.position;
        for axis in 0..2 {
            let mut trial = self.position;
            trial[axis] += self.config.step_size * a[axis];
            if self.grid.is_free(trial) {
                self.position = trial;
            }
        }
        self.velocity = [self.position[0] - before[0], self.position[1] - before[1]];
        let dist = math::distance(&self.position, &self.goal());
        let reward = math::exp(-dist) - 1.0;
        self.terminated = dist < self.config.goal_radius;
        let truncated = !self.terminated && self.clock.steps >= self.config.max_episode_steps;
        self.clock.done = self.terminated || truncated;
        Ok(StepResult {
            next_state: self.observe(),
            reward,
            terminal: self.terminated,
            truncated,
            info: StepInfo {
                subgoals_reached: 0,
                success: self.terminated,
                distance_to_goal: dist,
            },
        })
    }

    fn summary(&self) -> EpisodeSummary {
        let task = self.clock.task.unwrap_or(0);
        EpisodeSummary {
            task,
            steps: self.clock.steps,
            final_distance: math::distance(&self.position, &self.config.tasks[task].goal),
            subgoals_reached: 0,
            max_displacement: 0.0,
            terminated: self.terminated,
        }
    }

    fn success(&self, episode: &EpisodeSummary) -> bool {
        episode.final_distance < self.config.goal_radius
    }

    fn min_reward(&self, _task: usize) -> f64 {
        -1.0
    }
}
