//! Mixture-of-policies behavior sharing: pick which task's policy acts for
//! task `i` at the current state. Nothing here mutates a policy or a critic.

mod select;
mod switcher;

pub use select::{argmax_index, sampled_score, select_policy, softmax_probabilities, MixtureDecision, TIE_TOLERANCE};
pub use switcher::{hold_step, mixture_stats, SelectionCounts, SwitchStep, Switcher};

use alloc::vec::Vec;

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::error::contract;
use crate::math::{self, LN_2PI};
use crate::sac::{PolicyHead, TwinCritic};
use crate::Result;

/// A policy the switch may delegate to.
pub trait CandidatePolicy {
    fn mean_action(&self, obs: &[f64]) -> Result<Vec<f64>>;
    fn sample_action(&self, obs: &[f64], rng: &mut dyn RngCore) -> Result<Vec<f64>>;
    fn entropy(&self, obs: &[f64]) -> Result<f64>;
}

/// Task `i`'s action-value estimate, as seen by its switch.
pub trait QCritic {
    fn q_value(&self, obs: &[f64], action: &[f64]) -> Result<f64>;
}

impl CandidatePolicy for PolicyHead {
    fn mean_action(&self, obs: &[f64]) -> Result<Vec<f64>> {
        PolicyHead::mean_action(self, obs)
    }

    fn sample_action(&self, obs: &[f64], rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        Ok(self.sample(obs, rng)?.action)
    }

    fn entropy(&self, obs: &[f64]) -> Result<f64> {
        PolicyHead::entropy(self, obs)
    }
}

/// The switch scores with the minimum of the online twin critics.
impl QCritic for TwinCritic {
    fn q_value(&self, obs: &[f64], action: &[f64]) -> Result<f64> {
        self.q_min(obs, action)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SwitchVariant {
    /// No sharing: task `i` always acts with its own policy.
    SelfOnly,
    /// Highest own-critic value at each candidate's mean action.
    ArgmaxQ,
    Uniform,
    /// Row `i` is the fixed sampling distribution for task `i`.
    DomainPrior(Vec<Vec<f64>>),
    SoftmaxQ { temperature: f64 },
    /// ArgmaxQ over Monte-Carlo estimates of `E_{a~π_j} Q_i(s, a)`.
    SampledArgmax { samples: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchKind {
    pub variant: SwitchVariant,
    /// A selected policy acts for this many consecutive steps.
    pub hold_horizon: usize,
    /// Adds `α · H(π_j(·|s))` to Q-based scores.
    pub include_entropy: bool,
    /// Own policy only for the first `warmup_steps` environment steps of a task.
    pub warmup_steps: u64,
    /// Probability of forcing the own policy before consulting the switch.
    pub self_probability: f64,
}

impl SwitchKind {
    pub fn new(variant: SwitchVariant) -> Self {
        Self {
            variant,
            hold_horizon: 1,
            include_entropy: false,
            warmup_steps: 0,
            self_probability: 0.0,
        }
    }

    pub fn validate(&self, task_count: usize) -> Result<()> {
        contract!(self.hold_horizon >= 1, "hold horizon must be at least 1");
        contract!(
            (0.0..=1.0).contains(&self.self_probability),
            "self probability {} outside [0, 1]",
            self.self_probability
        );
        match &self.variant {
            SwitchVariant::SoftmaxQ { temperature } => {
                contract!(*temperature > 0.0 && temperature.is_finite(), "softmax temperature must be positive")
            }
            SwitchVariant::SampledArgmax { samples } => contract!(*samples >= 1, "sample count must be at least 1"),
            SwitchVariant::DomainPrior(rows) => {
                contract!(rows.len() == task_count, "domain prior has {} rows for {task_count} tasks", rows.len());
                for (i, row) in rows.iter().enumerate() {
                    contract!(row.len() == task_count, "domain prior row {i} has {} entries", row.len());
                    contract!(row.iter().all(|p| *p >= 0.0 && p.is_finite()), "domain prior row {i} has a negative entry");
                    let s: f64 = row.iter().sum();
                    contract!((s - 1.0).abs() <= 1e-9, "domain prior row {i} sums to {s}");
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Whether choosing a policy ever consults the critic.
    pub fn uses_critic(&self) -> bool {
        matches!(
            self.variant,
            SwitchVariant::ArgmaxQ | SwitchVariant::SoftmaxQ { .. } | SwitchVariant::SampledArgmax { .. }
        )
    }
}

/// Diagonal Gaussian with a fixed mean; samples are clipped to the box.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedGaussianPolicy {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl FixedGaussianPolicy {
    pub fn new(mean: Vec<f64>, std: Vec<f64>, low: Vec<f64>, high: Vec<f64>) -> Result<Self> {
        let d = mean.len();
        contract!(std.len() == d && low.len() == d && high.len() == d, "fixed policy dimensions differ");
        contract!(std.iter().all(|s| *s >= 0.0), "standard deviations must be nonnegative");
        Ok(Self { mean, std, low, high })
    }

    /// Mean along the unit vector `direction`, std `std`, in `[-1, 1]^d`.
    pub fn toward(direction: &[f64], std: f64) -> Result<Self> {
        let norm = math::sqrt(direction.iter().map(|x| x * x).sum());
        contract!(norm > 0.0, "direction must be nonzero");
        let d = direction.len();
        Self::new(
            direction.iter().map(|x| x / norm).collect(),
            alloc::vec![std; d],
            alloc::vec![-1.0; d],
            alloc::vec![1.0; d],
        )
    }

    fn clip(&self, a: Vec<f64>) -> Vec<f64> {
        a.into_iter()
            .zip(self.low.iter().zip(&self.high))
            .map(|(x, (lo, hi))| x.clamp(*lo, *hi))
            .collect()
    }
}

impl CandidatePolicy for FixedGaussianPolicy {
    fn mean_action(&self, _obs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.clip(self.mean.clone()))
    }

    fn sample_action(&self, _obs: &[f64], rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        let a = self
            .mean
            .iter()
            .zip(&self.std)
            .map(|(m, s)| {
                let e: f64 = StandardNormal.sample(rng);
                m + s * e
            })
            .collect();
        Ok(self.clip(a))
    }

    fn entropy(&self, _obs: &[f64]) -> Result<f64> {
        Ok(self.std.iter().map(|s| math::ln(*s) + 0.5 * (1.0 + LN_2PI)).sum())
    }
}
