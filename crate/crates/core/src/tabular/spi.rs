use alloc::vec;
use alloc::vec::Vec;

use super::{QTable, TabularMdp, TabularPolicy};
use crate::error::contract;
use crate::math;
use crate::switch::argmax_index;
use crate::{Error, Result};

/// Probabilities are floored here before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;
const EVAL_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 200_000;

/// `Σ_a π(a) (q(a) − α log π(a))`.
pub fn soft_value(pi_row: &[f64], q_row: &[f64], alpha: f64) -> f64 {
    pi_row
        .iter()
        .zip(q_row)
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, q)| p * (q - alpha * math::ln(p.max(PROB_FLOOR))))
        .sum()
}

/// `T^π Q (s, a) = r_i(s, a) + γ E_{s′}[Σ_{a′} π(a′|s′)(Q(s′, a′) − α log π(a′|s′))]`.
pub fn soft_backup(mdp: &TabularMdp, task: usize, policy: &TabularPolicy, q: &QTable, alpha: f64) -> QTable {
    let v: Vec<f64> = (0..mdp.n_states).map(|s| soft_value(policy.row(s), q.row(s), alpha)).collect();
    bellman(mdp, task, &v)
}

fn bellman(mdp: &TabularMdp, task: usize, v: &[f64]) -> QTable {
    let mut out = QTable::zeros(mdp.n_states, mdp.n_actions);
    for s in 0..mdp.n_states {
        for a in 0..mdp.n_actions {
            let ev: f64 = mdp.next_state_dist(s, a).iter().zip(v).map(|(p, v)| p * v).sum();
            out.values[s * mdp.n_actions + a] = mdp.reward(task, s, a) + mdp.gamma * ev;
        }
    }
    out
}

/// Fixed point of [`soft_backup`] by repeated application.
pub fn exact_policy_evaluation(mdp: &TabularMdp, task: usize, policy: &TabularPolicy, alpha: f64) -> Result<QTable> {
    let mut q = QTable::zeros(mdp.n_states, mdp.n_actions);
    for _ in 0..MAX_SWEEPS {
        let next = soft_backup(mdp, task, policy, &q, alpha);
        let diff = next.max_abs_diff(&q);
        let scale = next.values.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        q = next;
        if diff <= EVAL_TOL * scale {
            return Ok(q);
        }
    }
    Err(Error::NotConverged { what: "policy evaluation", iterations: MAX_SWEEPS })
}

/// Boltzmann policy `π(a|s) ∝ exp(Q(s, a) / α)`.
pub fn soft_improve(q: &QTable, alpha: f64) -> Result<TabularPolicy> {
    contract!(alpha > 0.0, "alpha must be positive");
    let mut probs = Vec::with_capacity(q.values.len());
    for s in 0..q.n_states {
        let row = q.row(s);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = row.iter().map(|x| math::exp((x - max) / alpha)).collect();
        let z: f64 = w.iter().sum();
        probs.extend(w.into_iter().map(|x| x / z));
    }
    Ok(TabularPolicy { n_states: q.n_states, n_actions: q.n_actions, probs })
}

/// Per-candidate objective `Σ_a π_j(a|s) Q(s, a) + α H(π_j(·|s))` at `state`.
pub fn mixture_objectives(state: usize, candidates: &[&TabularPolicy], q: &QTable, alpha: f64) -> Vec<f64> {
    candidates.iter().map(|c| soft_value(c.row(state), q.row(state), alpha)).collect()
}

/// Index of the candidate with the largest objective; ties go to the lowest index.
pub fn mixture_select_tabular(state: usize, candidates: &[&TabularPolicy], q: &QTable, alpha: f64) -> Result<usize> {
    contract!(!candidates.is_empty(), "no candidate policies");
    Ok(argmax_index(&mixture_objectives(state, candidates, q, alpha)))
}

/// Per-state objective comparisons between the chosen and the own candidate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DominanceStats {
    pub checks: usize,
    pub violations: usize,
    /// Largest `own − chosen` objective gap seen (0 when never worse).
    pub worst_gap: f64,
}

impl DominanceStats {
    pub fn merge(&mut self, other: &DominanceStats) {
        self.checks += other.checks;
        self.violations += other.violations;
        self.worst_gap = self.worst_gap.max(other.worst_gap);
    }
}

/// Mixture policy taking, per state, the row of the selected candidate.
/// `candidates[own]` is the task's own policy.
pub fn mixture_policy(
    candidates: &[&TabularPolicy],
    own: usize,
    q: &QTable,
    alpha: f64,
) -> Result<(TabularPolicy, DominanceStats)> {
    contract!(own < candidates.len(), "own index {own} out of range");
    let first = candidates[0];
    let mut probs = Vec::with_capacity(first.probs.len());
    let mut stats = DominanceStats::default();
    for s in 0..first.n_states {
        let obj = mixture_objectives(s, candidates, q, alpha);
        let chosen = argmax_index(&obj);
        stats.checks += 1;
        let gap = obj[own] - obj[chosen];
        if gap > 1e-12 {
            stats.violations += 1;
        }
        stats.worst_gap = stats.worst_gap.max(gap);
        probs.extend_from_slice(candidates[chosen].row(s));
    }
    Ok((TabularPolicy { n_states: first.n_states, n_actions: first.n_actions, probs }, stats))
}

/// Soft-optimal `Q*` by `Q ← r + γ E[α logsumexp(Q(s′, ·)/α)]`.
pub fn soft_value_iteration_oracle(mdp: &TabularMdp, task: usize, alpha: f64, tol: f64) -> Result<QTable> {
    contract!(alpha > 0.0 && tol > 0.0, "alpha and tol must be positive");
    let mut q = QTable::zeros(mdp.n_states, mdp.n_actions);
    for _ in 0..MAX_SWEEPS {
        let v: Vec<f64> = (0..mdp.n_states)
            .map(|s| {
                let scaled: Vec<f64> = q.row(s).iter().map(|x| x / alpha).collect();
                alpha * math::log_sum_exp(&scaled)
            })
            .collect();
        let next = bellman(mdp, task, &v);
        let diff = next.max_abs_diff(&q);
        q = next;
        if diff <= tol {
            return Ok(q);
        }
    }
    Err(Error::NotConverged { what: "soft value iteration", iterations: MAX_SWEEPS })
}

/// Unregularized optimal `Q` by `Q ← r + γ E[max_a Q(s′, a)]`.
pub fn hard_value_iteration(mdp: &TabularMdp, task: usize, tol: f64) -> Result<QTable> {
    let mut q = QTable::zeros(mdp.n_states, mdp.n_actions);
    for _ in 0..MAX_SWEEPS {
        let v: Vec<f64> = (0..mdp.n_states)
            .map(|s| q.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let next = bellman(mdp, task, &v);
        let diff = next.max_abs_diff(&q);
        q = next;
        if diff <= tol {
            return Ok(q);
        }
    }
    Err(Error::NotConverged { what: "value iteration", iterations: MAX_SWEEPS })
}

/// Soft policy iteration history: `q_history[k]` is `Q` of the k-th policy.
#[derive(Debug, Clone, PartialEq)]
pub struct SpiTrace {
    pub q_history: Vec<QTable>,
    pub final_policy: TabularPolicy,
    pub dominance: DominanceStats,
}

impl SpiTrace {
    /// Number of policy evaluations performed.
    pub fn iterations(&self) -> usize {
        self.q_history.len()
    }

    /// First `k` with `‖Q_k − target‖∞ < tol`.
    pub fn first_within(&self, target: &QTable, tol: f64) -> Option<usize> {
        self.q_history.iter().position(|q| q.max_abs_diff(target) < tol)
    }

    pub fn final_q(&self) -> &QTable {
        self.q_history.last().expect("trace holds at least one evaluation")
    }
}

/// Soft policy iteration from the uniform policy. With peers, each improved
/// policy `π′` is replaced by the per-state mixture over `{π′} ∪ peers`
/// scored with `Q^{π′}`. Stops when successive `Q` differ by less than `tol`.
pub fn mixture_spi(
    mdp: &TabularMdp,
    task: usize,
    peers: &[TabularPolicy],
    alpha: f64,
    tol: f64,
    max_iterations: usize,
) -> Result<SpiTrace> {
    contract!(tol > 0.0, "tolerance must be positive");
    let mut policy = TabularPolicy::uniform(mdp.n_states, mdp.n_actions);
    let mut q = exact_policy_evaluation(mdp, task, &policy, alpha)?;
    let mut history = vec![q.clone()];
    let mut dominance = DominanceStats::default();
    while history.len() < max_iterations {
        let improved = soft_improve(&q, alpha)?;
        policy = if peers.is_empty() {
            improved
        } else {
            let q_improved = exact_policy_evaluation(mdp, task, &improved, alpha)?;
            let mut cands: Vec<&TabularPolicy> = vec![&improved];
            cands.extend(peers.iter());
            let (mix, stats) = mixture_policy(&cands, 0, &q_improved, alpha)?;
            dominance.merge(&stats);
            mix
        };
        let next = exact_policy_evaluation(mdp, task, &policy, alpha)?;
        let diff = next.max_abs_diff(&q);
        history.push(next.clone());
        q = next;
        if diff < tol {
            return Ok(SpiTrace { q_history: history, final_policy: policy, dominance });
        }
    }
    Err(Error::NotConverged { what: "soft policy iteration", iterations: max_iterations })
}
