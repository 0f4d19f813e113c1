use alloc::vec::Vec;

use rand::{Rng as _, RngCore};

use super::spi::{
    exact_policy_evaluation, mixture_policy, mixture_spi, soft_backup, soft_improve, soft_value_iteration_oracle,
    DominanceStats,
};
use super::{QTable, TabularMdp, TabularPolicy};
use crate::error::contract;
use crate::Result;

pub const GAMMAS: [f64; 3] = [0.5, 0.9, 0.95];

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ContractionReport {
    pub pairs: usize,
    /// Largest observed `‖TQ − TQ′‖∞ / ‖Q − Q′‖∞ − γ`.
    pub max_excess: f64,
    pub max_ratio: f64,
    pub violations: usize,
}

impl ContractionReport {
    fn merge(&mut self, o: &ContractionReport) {
        if self.pairs == 0 {
            self.max_excess = o.max_excess;
        } else if o.pairs > 0 {
            self.max_excess = self.max_excess.max(o.max_excess);
        }
        self.pairs += o.pairs;
        self.max_ratio = self.max_ratio.max(o.max_ratio);
        self.violations += o.violations;
    }
}

/// Checks `‖T^π Q − T^π Q′‖∞ ≤ γ ‖Q − Q′‖∞ + 1e-12` on random `(Q, Q′)` pairs.
pub fn verify_contraction(
    mdp: &TabularMdp,
    task: usize,
    policy: &TabularPolicy,
    alpha: f64,
    trials: usize,
    rng: &mut dyn RngCore,
) -> Result<ContractionReport> {
    contract!(trials >= 1, "contraction check needs at least one trial");
    let mut rep = ContractionReport { max_excess: f64::NEG_INFINITY, ..Default::default() };
    for _ in 0..trials {
        let q = QTable::random(mdp.n_states, mdp.n_actions, 10.0, rng);
        let q2 = QTable::random(mdp.n_states, mdp.n_actions, 10.0, rng);
        let lhs = soft_backup(mdp, task, policy, &q, alpha).max_abs_diff(&soft_backup(mdp, task, policy, &q2, alpha));
        let rhs = q.max_abs_diff(&q2);
        rep.pairs += 1;
        if rhs == 0.0 {
            continue;
        }
        let ratio = lhs / rhs;
        rep.max_ratio = rep.max_ratio.max(ratio);
        rep.max_excess = rep.max_excess.max(ratio - mdp.gamma);
        if ratio > mdp.gamma + 1e-12 {
            rep.violations += 1;
        }
    }
    Ok(rep)
}

/// Random MDPs with `2..=10` states, `2..=5` actions and γ cycling through
/// `gammas`, each checked on `pairs` random pairs under a random policy.
pub fn contraction_suite(mdps: usize, pairs: usize, gammas: &[f64], rng: &mut dyn RngCore) -> Result<ContractionReport> {
    contract!(!gammas.is_empty(), "contraction suite needs at least one discount");
    let mut total = ContractionReport::default();
    for m in 0..mdps {
        let ns = rng.random_range(2..=10);
        let na = rng.random_range(2..=5);
        let mdp = TabularMdp::random(ns, na, gammas[m % gammas.len()], 1, 3, rng)?;
        let policy = TabularPolicy::random(ns, na, rng);
        let alpha = rng.random_range(0.05..2.0);
        total.merge(&verify_contraction(&mdp, 0, &policy, alpha, pairs, rng)?);
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImprovementViolation {
    pub trial: usize,
    /// `"improvement"` for `Q^{π_i} ≥ Q^{π_old}`, `"mixture"` for `Q^{π_mix} ≥ Q^{π_i}`.
    pub stage: &'static str,
    pub shortfall: f64,
    pub note: &'static str,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ImprovementReport {
    pub trials: usize,
    pub improvement_holds: usize,
    pub mixture_holds: usize,
    pub worst_improvement_shortfall: f64,
    pub worst_mixture_shortfall: f64,
    pub dominance: DominanceStats,
    pub violations: Vec<ImprovementViolation>,
}

impl ImprovementReport {
    pub fn improvement_rate(&self) -> f64 {
        self.improvement_holds as f64 / self.trials.max(1) as f64
    }

    pub fn mixture_rate(&self) -> f64 {
        self.mixture_holds as f64 / self.trials.max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImprovementSuite {
    pub trials: usize,
    pub max_states: usize,
    pub max_actions: usize,
    pub alpha: f64,
    pub shared_fraction: f64,
    pub divergence: f64,
    /// Elementwise comparisons tolerate this much shortfall.
    pub tolerance: f64,
    /// Discounts used in rotation.
    pub gammas: Vec<f64>,
}

impl Default for ImprovementSuite {
    fn default() -> Self {
        Self { trials: 100, max_states: 6, max_actions: 4, alpha: 0.5, shared_fraction: 0.5, divergence: 1.0, tolerance: 1e-8, gammas: GAMMAS.to_vec() }
    }
}

/// One improvement step `π_old → π_i = improve(Q^{π_old})` followed by the
/// per-state mixture of `{π_i, π_peer}` scored with `Q^{π_i}`, where `π_peer`
/// is soft-optimal for a related task. Both elementwise inequalities are
/// checked by exact evaluation; failures are recorded, never dropped.
pub fn verify_improvement(suite: &ImprovementSuite, rng: &mut dyn RngCore) -> Result<ImprovementReport> {
    contract!(suite.max_states >= 2 && suite.max_actions >= 2, "suite sizes must be at least 2");
    contract!(!suite.gammas.is_empty(), "improvement suite needs at least one discount");
    let mut rep = ImprovementReport::default();
    for trial in 0..suite.trials {
        let ns = rng.random_range(2..=suite.max_states);
        let na = rng.random_range(2..=suite.max_actions);
        let gamma = suite.gammas[trial % suite.gammas.len()];
        let mdp = TabularMdp::related_pair(ns, na, gamma, suite.shared_fraction, suite.divergence, 3, rng)?;
        let alpha = suite.alpha;
        let old = TabularPolicy::random(ns, na, rng);
        let q_old = exact_policy_evaluation(&mdp, 0, &old, alpha)?;
        let pi_i = soft_improve(&q_old, alpha)?;
        let q_i = exact_policy_evaluation(&mdp, 0, &pi_i, alpha)?;
        let peer = soft_improve(&soft_value_iteration_oracle(&mdp, 1, alpha, 1e-12)?, alpha)?;
        let (mix, dom) = mixture_policy(&[&pi_i, &peer], 0, &q_i, alpha)?;
        rep.dominance.merge(&dom);
        let q_mix = exact_policy_evaluation(&mdp, 0, &mix, alpha)?;

        rep.trials += 1;
        let s1 = q_i.max_shortfall(&q_old);
        let s2 = q_mix.max_shortfall(&q_i);
        rep.worst_improvement_shortfall = rep.worst_improvement_shortfall.max(s1);
        rep.worst_mixture_shortfall = rep.worst_mixture_shortfall.max(s2);
        if s1 <= suite.tolerance {
            rep.improvement_holds += 1;
        } else {
            log::warn!("trial {trial}: improvement shortfall {s1:e}");
            rep.violations.push(ImprovementViolation { trial, stage: "improvement", shortfall: s1, note: "soft_improvement" });
        }
        if s2 <= suite.tolerance {
            rep.mixture_holds += 1;
        } else {
            log::warn!("trial {trial}: mixture shortfall {s2:e} (coverage caveat)");
            rep.violations.push(ImprovementViolation { trial, stage: "mixture", shortfall: s2, note: "coverage_caveat" });
        }
    }
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IterationRaceReport {
    pub instances: usize,
    /// `(plain, mixture)` evaluations needed to get within `accuracy` of `Q*`.
    pub iterations: Vec<(usize, usize)>,
    pub not_worse: usize,
    pub strictly_fewer: usize,
    /// Largest `‖Q_final − Q*‖∞` over both loops and all instances.
    pub max_oracle_gap: f64,
    pub dominance: DominanceStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRace {
    pub instances: usize,
    pub max_states: usize,
    pub max_actions: usize,
    pub alpha: f64,
    pub shared_fraction: f64,
    pub divergence: f64,
    pub accuracy: f64,
    pub gammas: Vec<f64>,
}

impl Default for IterationRace {
    fn default() -> Self {
        Self { instances: 20, max_states: 10, max_actions: 5, alpha: 0.1, shared_fraction: 0.8, divergence: 0.05, accuracy: 1e-6, gammas: GAMMAS.to_vec() }
    }
}

/// Plain versus mixture soft policy iteration on related-task MDPs, where the
/// mixture may borrow the peer task's soft-optimal policy.
pub fn iteration_race(race: &IterationRace, rng: &mut dyn RngCore) -> Result<IterationRaceReport> {
    contract!(!race.gammas.is_empty(), "iteration race needs at least one discount");
    let mut rep = IterationRaceReport::default();
    for inst in 0..race.instances {
        let ns = rng.random_range(3..=race.max_states);
        let na = rng.random_range(2..=race.max_actions);
        let gamma = race.gammas[inst % race.gammas.len()];
        let mdp = TabularMdp::related_pair(ns, na, gamma, race.shared_fraction, race.divergence, 3, rng)?;
        let q_star = soft_value_iteration_oracle(&mdp, 0, race.alpha, 1e-13)?;
        let peer = soft_improve(&soft_value_iteration_oracle(&mdp, 1, race.alpha, 1e-13)?, race.alpha)?;
        let tol = race.accuracy * 1e-3;
        let plain = mixture_spi(&mdp, 0, &[], race.alpha, tol, 500)?;
        let mixed = mixture_spi(&mdp, 0, &[peer], race.alpha, tol, 500)?;
        rep.dominance.merge(&mixed.dominance);
        let kp = plain.first_within(&q_star, race.accuracy).unwrap_or(usize::MAX);
        let km = mixed.first_within(&q_star, race.accuracy).unwrap_or(usize::MAX);
        rep.max_oracle_gap = rep
            .max_oracle_gap
            .max(plain.final_q().max_abs_diff(&q_star))
            .max(mixed.final_q().max_abs_diff(&q_star));
        rep.instances += 1;
        rep.not_worse += usize::from(km <= kp);
        rep.strictly_fewer += usize::from(km < kp);
        rep.iterations.push((kp, km));
    }
    Ok(rep)
}
