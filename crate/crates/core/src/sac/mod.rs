//! Per-task soft actor-critic.

mod agent;
mod critic;
mod policy;

pub use agent::{SacAgent, UpdateStats};
pub use critic::TwinCritic;
pub use policy::{PolicyHead, PolicySample, LOG_STD_MAX, LOG_STD_MIN};

use alloc::vec;
use alloc::vec::Vec;

use crate::error::contract;
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// Absorbing next state; the bootstrap term is dropped.
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SacConfig {
    pub hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub alpha_lr: f64,
    pub gamma: f64,
    /// Fraction of the target kept per soft update.
    pub target_retention: f64,
    pub initial_alpha: f64,
    pub learn_alpha: bool,
    /// Defaults to `-act_dim` when unset.
    pub target_entropy: Option<f64>,
    /// Rewards are multiplied by this before entering critic targets.
    pub reward_scale: f64,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            alpha_lr: 3e-4,
            gamma: 0.99,
            target_retention: 0.995,
            initial_alpha: 1.0,
            learn_alpha: true,
            target_entropy: None,
            reward_scale: 1.0,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<()> {
        contract!(self.hidden.iter().all(|&h| h > 0), "hidden widths must be positive");
        contract!(
            [self.actor_lr, self.critic_lr, self.alpha_lr].iter().all(|lr| lr.is_finite() && *lr >= 0.0),
            "learning rates must be finite and nonnegative"
        );
        contract!((0.0..=1.0).contains(&self.gamma), "gamma must lie in [0, 1]");
        contract!((0.0..=1.0).contains(&self.target_retention), "target retention must lie in [0, 1]");
        contract!(self.initial_alpha > 0.0 && self.initial_alpha.is_finite(), "initial alpha must be positive");
        contract!(self.reward_scale.is_finite() && self.reward_scale > 0.0, "reward scale must be positive");
        Ok(())
    }
}
