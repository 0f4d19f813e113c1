use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng as _, RngCore};

use super::{CandidatePolicy, QCritic, SwitchKind, SwitchVariant};
use crate::error::{contract, ensure_finite};
use crate::math;
use crate::Result;

/// Scores within this distance of the maximum count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Index of the maximum; ties within [`TIE_TOLERANCE`] go to the lowest index.
pub fn argmax_index(scores: &[f64]) -> usize {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    scores.iter().position(|s| *s >= max - TIE_TOLERANCE).unwrap_or(0)
}

/// `softmax(scores / temperature)` with max subtraction.
pub fn softmax_probabilities(scores: &[f64], temperature: f64) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = scores.iter().map(|s| math::exp((s - max) / temperature)).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

fn sample_categorical(probs: &[f64], rng: &mut dyn RngCore) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (j, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return j;
        }
    }
    // Rounding left u above the total; take the last index with mass.
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

/// Monte-Carlo estimate of `E_{a~π}[Q(s, a)]` from `k` samples.
pub fn sampled_score(
    policy: &dyn CandidatePolicy,
    obs: &[f64],
    critic: &dyn QCritic,
    k: usize,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    contract!(k >= 1, "sampled score needs k >= 1");
    let mut total = 0.0;
    for _ in 0..k {
        let a = policy.sample_action(obs, rng)?;
        total += critic.q_value(obs, &a)?;
    }
    Ok(total / k as f64)
}

/// Outcome of one switch evaluation for task `task`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureDecision {
    pub chosen: usize,
    /// Q-based variants: the switch scores. Others: selection probabilities.
    pub scores: Vec<f64>,
    /// Steps the chosen policy still acts before the switch is re-evaluated.
    pub held_steps_remaining: usize,
}

/// Chooses which of `policies` acts for `task` at `obs`. `critic` must be the
/// task's own critic; `alpha` weighs the optional entropy bonus.
pub fn select_policy(
    task: usize,
    obs: &[f64],
    policies: &[&dyn CandidatePolicy],
    critic: &dyn QCritic,
    kind: &SwitchKind,
    alpha: f64,
    rng: &mut dyn RngCore,
) -> Result<MixtureDecision> {
    let n = policies.len();
    contract!(n >= 1, "switch needs at least one candidate policy");
    contract!(task < n, "task {task} has no policy among {n} candidates");
    let q_scores = |rng: &mut dyn RngCore| -> Result<Vec<f64>> {
        let mut scores = Vec::with_capacity(n);
        for p in policies {
            let mut s = match kind.variant {
                SwitchVariant::SampledArgmax { samples } => sampled_score(*p, obs, critic, samples, rng)?,
                _ => critic.q_value(obs, &p.mean_action(obs)?)?,
            };
            if kind.include_entropy {
                s += alpha * p.entropy(obs)?;
            }
            scores.push(s);
        }
        ensure_finite("switch score", &scores)?;
        Ok(scores)
    };
    let (chosen, scores) = match &kind.variant {
        SwitchVariant::SelfOnly => {
            let mut one_hot = vec![0.0; n];
            one_hot[task] = 1.0;
            (task, one_hot)
        }
        SwitchVariant::ArgmaxQ | SwitchVariant::SampledArgmax { .. } => {
            let scores = q_scores(rng)?;
            (argmax_index(&scores), scores)
        }
        SwitchVariant::SoftmaxQ { temperature } => {
            let scores = q_scores(rng)?;
            let probs = softmax_probabilities(&scores, *temperature);
            (sample_categorical(&probs, rng), scores)
        }
        SwitchVariant::Uniform => (rng.random_range(0..n), vec![1.0 / n as f64; n]),
        SwitchVariant::DomainPrior(rows) => {
            contract!(rows.len() == n && rows[task].len() == n, "domain prior shape does not match {n} tasks");
            (sample_categorical(&rows[task], rng), rows[task].clone())
        }
    };
    Ok(MixtureDecision {
        chosen,
        scores,
        held_steps_remaining: kind.hold_horizon,
    })
}
