use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng as _, RngCore};

use crate::error::contract;
use crate::Result;

/// Finite MDP with shared dynamics and one reward table per task.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    pub n_states: usize,
    pub n_actions: usize,
    /// `transitions[(s * n_actions + a) * n_states + s']`.
    pub transitions: Vec<f64>,
    /// `rewards[task][s * n_actions + a]`.
    pub rewards: Vec<Vec<f64>>,
    pub gamma: f64,
}

impl TabularMdp {
    pub fn new(n_states: usize, n_actions: usize, transitions: Vec<f64>, rewards: Vec<Vec<f64>>, gamma: f64) -> Result<Self> {
        contract!(n_states >= 1 && n_actions >= 1, "MDP needs at least one state and action");
        contract!(transitions.len() == n_states * n_actions * n_states, "transition tensor has wrong size");
        contract!((0.0..1.0).contains(&gamma), "gamma {gamma} outside [0, 1)");
        contract!(!rewards.is_empty(), "MDP needs at least one task");
        for row in transitions.chunks(n_states) {
            contract!(row.iter().all(|p| *p >= 0.0), "negative transition probability");
            let s: f64 = row.iter().sum();
            contract!((s - 1.0).abs() <= 1e-12, "transition row sums to {s}");
        }
        for r in &rewards {
            contract!(r.len() == n_states * n_actions, "reward table has wrong size");
            contract!(r.iter().all(|x| x.is_finite()), "reward table has non-finite entries");
        }
        Ok(Self { n_states, n_actions, transitions, rewards, gamma })
    }

    pub fn task_count(&self) -> usize {
        self.rewards.len()
    }

    pub fn next_state_dist(&self, s: usize, a: usize) -> &[f64] {
        let i = (s * self.n_actions + a) * self.n_states;
        &self.transitions[i..i + self.n_states]
    }

    pub fn reward(&self, task: usize, s: usize, a: usize) -> f64 {
        self.rewards[task][s * self.n_actions + a]
    }

    /// Random dynamics where each `(s, a)` reaches one to `max_branching`
    /// successors; rewards uniform in `[0, 1)`.
    pub fn random<R: RngCore + ?Sized>(
        n_states: usize,
        n_actions: usize,
        gamma: f64,
        tasks: usize,
        max_branching: usize,
        rng: &mut R,
    ) -> Result<Self> {
        contract!(max_branching >= 1, "branching must be at least 1");
        let mut transitions = vec![0.0; n_states * n_actions * n_states];
        for row in transitions.chunks_mut(n_states) {
            let k = rng.random_range(1..=max_branching.min(n_states));
            for _ in 0..k {
                let s2 = rng.random_range(0..n_states);
                row[s2] += rng.random::<f64>() + 0.05;
            }
            let z: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= z);
            fix_row_sum(row);
        }
        let rewards = (0..tasks)
            .map(|_| (0..n_states * n_actions).map(|_| rng.random::<f64>()).collect())
            .collect();
        Self::new(n_states, n_actions, transitions, rewards, gamma)
    }

    /// Two tasks on shared dynamics whose rewards agree on a random subset of
    /// states holding about `shared_fraction` of them. Elsewhere the peer
    /// reward is `(1 − divergence) · r + divergence · u` with fresh uniform `u`.
    pub fn related_pair<R: RngCore + ?Sized>(
        n_states: usize,
        n_actions: usize,
        gamma: f64,
        shared_fraction: f64,
        divergence: f64,
        max_branching: usize,
        rng: &mut R,
    ) -> Result<Self> {
        contract!((0.0..=1.0).contains(&divergence), "divergence must lie in [0, 1]");
        let mut mdp = Self::random(n_states, n_actions, gamma, 1, max_branching, rng)?;
        let base = mdp.rewards[0].clone();
        let mut peer = base.clone();
        for s in 0..n_states {
            if rng.random::<f64>() >= shared_fraction {
                for a in 0..n_actions {
                    let i = s * n_actions + a;
                    peer[i] = (1.0 - divergence) * base[i] + divergence * rng.random::<f64>();
                }
            }
        }
        mdp.rewards.push(peer);
        Ok(mdp)
    }
}

/// Pushes rounding error into the largest entry so the row sums to 1.
fn fix_row_sum(row: &mut [f64]) {
    let s: f64 = row.iter().sum();
    let imax = (0..row.len()).fold(0, |m, i| if row[i] > row[m] { i } else { m });
    row[imax] += 1.0 - s;
}

/// Row-stochastic `probs[s * n_actions + a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    pub n_states: usize,
    pub n_actions: usize,
    pub probs: Vec<f64>,
}

impl TabularPolicy {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        contract!(probs.len() == n_states * n_actions, "policy table has wrong size");
        for (s, row) in probs.chunks(n_actions).enumerate() {
            contract!(row.iter().all(|p| *p >= 0.0), "policy row {s} has negative entries");
            let z: f64 = row.iter().sum();
            contract!((z - 1.0).abs() <= 1e-9, "policy row {s} sums to {z}");
        }
        Ok(Self { n_states, n_actions, probs })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self { n_states, n_actions, probs: vec![1.0 / n_actions as f64; n_states * n_actions] }
    }

    pub fn random<R: RngCore + ?Sized>(n_states: usize, n_actions: usize, rng: &mut R) -> Self {
        let mut probs: Vec<f64> = (0..n_states * n_actions).map(|_| rng.random::<f64>() + 1e-3).collect();
        for row in probs.chunks_mut(n_actions) {
            let z: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= z);
        }
        Self { n_states, n_actions, probs }
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    pub n_states: usize,
    pub n_actions: usize,
    pub values: Vec<f64>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self { n_states, n_actions, values: vec![0.0; n_states * n_actions] }
    }

    pub fn random<R: RngCore + ?Sized>(n_states: usize, n_actions: usize, scale: f64, rng: &mut R) -> Self {
        Self {
            n_states,
            n_actions,
            values: (0..n_states * n_actions).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect(),
        }
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    /// `‖self − other‖∞`.
    pub fn max_abs_diff(&self, other: &QTable) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Largest amount by which `other` exceeds `self` (0 when `self ≥ other`).
    pub fn max_shortfall(&self, other: &QTable) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| b - a).fold(0.0, f64::max)
    }
}
