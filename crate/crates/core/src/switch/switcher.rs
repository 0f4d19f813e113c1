use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng as _, RngCore};

use super::select::{select_policy, MixtureDecision};
use super::{CandidatePolicy, QCritic, SwitchKind, SwitchVariant};
use crate::error::contract;
use crate::Result;

/// Consumes one step of a held decision.
pub fn hold_step(decision: &MixtureDecision) -> MixtureDecision {
    MixtureDecision {
        held_steps_remaining: decision.held_steps_remaining.saturating_sub(1),
        ..decision.clone()
    }
}

/// Selection frequency of each policy over a decision history.
pub fn mixture_stats(history: &[MixtureDecision], task_count: usize) -> Result<Vec<f64>> {
    contract!(!history.is_empty(), "mixture statistics need a nonempty history");
    let mut freq = vec![0.0; task_count];
    for d in history {
        contract!(d.chosen < task_count, "decision chose {} of {task_count}", d.chosen);
        freq[d.chosen] += 1.0;
    }
    let n = history.len() as f64;
    freq.iter_mut().for_each(|f| *f /= n);
    Ok(freq)
}

/// Streaming `counts[task][chosen]` of acting policies. Candidates may
/// outnumber tasks when fixed helper policies join the pool.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionCounts {
    pub counts: Vec<Vec<u64>>,
}

impl SelectionCounts {
    pub fn new(task_count: usize) -> Self {
        Self::with_candidates(task_count, task_count)
    }

    pub fn with_candidates(task_count: usize, candidate_count: usize) -> Self {
        Self { counts: vec![vec![0; candidate_count]; task_count] }
    }

    pub fn record(&mut self, task: usize, chosen: usize) {
        self.counts[task][chosen] += 1;
    }

    pub fn total(&self, task: usize) -> u64 {
        self.counts[task].iter().sum()
    }

    /// Row `task` normalized; all zeros before any record.
    pub fn frequencies(&self, task: usize) -> Vec<f64> {
        let total = self.total(task);
        self.counts[task]
            .iter()
            .map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
            .collect()
    }

    pub fn merge(&mut self, other: &SelectionCounts) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

/// Which policy acts this step, and the fresh decision if the switch ran.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchStep {
    pub chosen: usize,
    pub decision: Option<MixtureDecision>,
}

/// Per-task switch with hold, warm-up and forced-self bookkeeping.
#[derive(Debug, Clone)]
pub struct Switcher {
    kind: SwitchKind,
    task: usize,
    current: Option<MixtureDecision>,
    steps_seen: u64,
}

impl Switcher {
    pub fn new(task: usize, kind: SwitchKind, task_count: usize) -> Result<Self> {
        kind.validate(task_count)?;
        contract!(task < task_count, "switcher task {task} out of range");
        Ok(Self { kind, task, current: None, steps_seen: 0 })
    }

    pub fn kind(&self) -> &SwitchKind {
        &self.kind
    }

    pub fn steps_seen(&self) -> u64 {
        self.steps_seen
    }

    fn own(&self, n: usize) -> MixtureDecision {
        let mut scores = vec![0.0; n];
        scores[self.task] = 1.0;
        MixtureDecision { chosen: self.task, scores, held_steps_remaining: self.kind.hold_horizon }
    }

    /// Policy for the next environment step. Held decisions are reused without
    /// consulting the critic.
    pub fn next(
        &mut self,
        obs: &[f64],
        policies: &[&dyn CandidatePolicy],
        critic: &dyn QCritic,
        alpha: f64,
        rng: &mut dyn RngCore,
    ) -> Result<SwitchStep> {
        self.steps_seen += 1;
        if let Some(held) = &self.current {
            if held.held_steps_remaining > 0 {
                let chosen = held.chosen;
                self.current = Some(hold_step(held));
                return Ok(SwitchStep { chosen, decision: None });
            }
        }
        let n = policies.len();
        let decision = if matches!(self.kind.variant, SwitchVariant::SelfOnly) || self.steps_seen <= self.kind.warmup_steps {
            self.own(n)
        } else if self.kind.self_probability > 0.0 && rng.random::<f64>() < self.kind.self_probability {
            self.own(n)
        } else {
            select_policy(self.task, obs, policies, critic, &self.kind, alpha, rng)?
        };
        self.current = Some(hold_step(&decision));
        Ok(SwitchStep { chosen: decision.chosen, decision: Some(decision) })
    }

    /// Drops any held decision.
    pub fn end_episode(&mut self) {
        self.current = None;
    }
}
