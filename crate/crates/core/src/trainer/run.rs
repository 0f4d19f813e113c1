use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;

use super::{uds_share_batch, DecisionRecord, EpochRecord, EvalReport, Method, ReplayBuffer, TaskEval, TrainConfig};
use crate::env::{EnvSpec, Environment};
use crate::error::contract;
use crate::math;
use crate::sac::{PolicyHead, SacAgent, Transition};
use crate::switch::{CandidatePolicy, SelectionCounts, Switcher};
use crate::{rng_stream, Result, Rng};

const STREAM_INIT: u64 = 0;
const STREAM_COLLECT: u64 = 1;
const STREAM_UPDATE: u64 = 2;
const STREAM_EVAL: u64 = 3;
const STREAM_SWITCH: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Collect,
    Update,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStats {
    pub task: usize,
    pub steps: usize,
    pub episode_return: f64,
    pub success: bool,
}

/// Multi-task training state. Every run is a pure function of the config.
pub struct Trainer {
    config: TrainConfig,
    env: Box<dyn Environment + Send>,
    eval_env: Box<dyn Environment + Send>,
    spec: EnvSpec,
    /// One per task, or a single shared agent for `FullyShared`.
    agents: Vec<SacAgent>,
    buffers: Vec<ReplayBuffer>,
    /// Empty unless the method is a mixture.
    switchers: Vec<Switcher>,
    collect_rng: Rng,
    update_rng: Rng,
    eval_rng: Rng,
    switch_rng: Rng,
    env_steps: Vec<u64>,
    epoch: usize,
    selection_total: SelectionCounts,
    selection_epochs: Vec<SelectionCounts>,
    update_calls: Vec<u64>,
    phase_log: Vec<(usize, Phase)>,
    decisions: Vec<DecisionRecord>,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let env = config.env.build()?;
        let eval_env = config.env.build()?;
        let spec = env.spec().clone();
        let n = spec.task_count;
        for h in &config.helpers {
            contract!(h.mean.len() == spec.act_dim, "helper policy has {} action dims, env has {}", h.mean.len(), spec.act_dim);
        }
        let mut init = rng_stream(config.seed, STREAM_INIT);
        let (agents, buffers) = if config.method == Method::FullyShared {
            let mut sac = config.sac.clone();
            let widen = math::sqrt(n as f64);
            sac.hidden.iter_mut().for_each(|h| *h = libm::round(*h as f64 * widen) as usize);
            let agent = SacAgent::new(&spec, sac, &mut init)?;
            (vec![agent], vec![ReplayBuffer::new(config.buffer_capacity, config.min_buffer)?])
        } else {
            let mut agents = Vec::with_capacity(n);
            let mut buffers = Vec::with_capacity(n);
            for _ in 0..n {
                agents.push(SacAgent::new(&spec, config.sac.clone(), &mut init)?);
                buffers.push(ReplayBuffer::new(config.buffer_capacity, config.min_buffer)?);
            }
            (agents, buffers)
        };
        let switchers = match &config.method {
            Method::Mixture(kind) => {
                let candidates = n + config.helpers.len();
                (0..n).map(|i| Switcher::new(i, kind.clone(), candidates)).collect::<Result<Vec<_>>>()?
            }
            _ => Vec::new(),
        };
        let candidates = n + config.helpers.len();
        let update_calls = vec![0; agents.len()];
        Ok(Self {
            collect_rng: rng_stream(config.seed, STREAM_COLLECT),
            update_rng: rng_stream(config.seed, STREAM_UPDATE),
            eval_rng: rng_stream(config.seed, STREAM_EVAL),
            switch_rng: rng_stream(config.seed, STREAM_SWITCH),
            env_steps: vec![0; n],
            epoch: 0,
            selection_total: SelectionCounts::with_candidates(n, candidates),
            selection_epochs: Vec::new(),
            update_calls,
            phase_log: Vec::new(),
            decisions: Vec::new(),
            config,
            env,
            eval_env,
            spec,
            agents,
            buffers,
            switchers,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn task_count(&self) -> usize {
        self.spec.task_count
    }

    pub fn candidate_count(&self) -> usize {
        self.spec.task_count + self.config.helpers.len()
    }

    pub fn agents(&self) -> &[SacAgent] {
        &self.agents
    }

    /// Replaces agent parameters, e.g. from a checkpoint.
    pub fn agents_mut(&mut self) -> &mut [SacAgent] {
        &mut self.agents
    }

    pub fn buffers(&self) -> &[ReplayBuffer] {
        &self.buffers
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    pub fn env_steps(&self) -> &[u64] {
        &self.env_steps
    }

    pub fn selection_total(&self) -> &SelectionCounts {
        &self.selection_total
    }

    /// Selection counts of each finished epoch, in order.
    pub fn selection_history(&self) -> &[SelectionCounts] {
        &self.selection_epochs
    }

    /// SAC update calls per agent.
    pub fn update_calls(&self) -> &[u64] {
        &self.update_calls
    }

    /// `(epoch, phase)` in execution order, one entry per phase entered.
    pub fn phase_log(&self) -> &[(usize, Phase)] {
        &self.phase_log
    }

    pub fn decisions(&self) -> &[DecisionRecord] {
        &self.decisions
    }

    pub fn take_decisions(&mut self) -> Vec<DecisionRecord> {
        core::mem::take(&mut self.decisions)
    }

    /// One full episode of task `task`, stored in task `task`'s buffer.
    pub fn collect_episode(&mut self, task: usize, counts: &mut SelectionCounts) -> Result<EpisodeStats> {
        contract!(task < self.spec.task_count, "task {task} out of range");
        let slot = if self.config.method == Method::FullyShared { 0 } else { task };
        if let Some(sw) = self.switchers.get_mut(task) {
            sw.end_episode();
        }
        let mut obs = self.env.reset(task, &mut self.collect_rng)?;
        let mut stats = EpisodeStats { task, steps: 0, episode_return: 0.0, success: false };
        loop {
            let (chosen, action) = match &self.config.method {
                Method::Mixture(_) => {
                    let agents = &self.agents;
                    let mut pool: Vec<&dyn CandidatePolicy> =
                        agents.iter().map(|a| &a.policy as &dyn CandidatePolicy).collect();
                    pool.extend(self.config.helpers.iter().map(|h| h as &dyn CandidatePolicy));
                    let own = &agents[task];
                    let step = self.switchers[task].next(&obs, &pool, &own.critic, own.alpha(), &mut self.switch_rng)?;
                    if let (true, Some(d)) = (self.config.log_decisions, &step.decision) {
                        self.decisions.push(DecisionRecord {
                            epoch: self.epoch,
                            task,
                            step: stats.steps,
                            chosen: d.chosen,
                            scores: d.scores.clone(),
                        });
                    }
                    let rng: &mut dyn RngCore = &mut self.collect_rng;
                    (step.chosen, pool[step.chosen].sample_action(&obs, rng)?)
                }
                _ => (task, own_policy(&self.agents, task).sample(&obs, &mut self.collect_rng)?.action),
            };
            let r = self.env.step(&action)?;
            counts.record(task, chosen);
            self.selection_total.record(task, chosen);
            self.env_steps[task] += 1;
            stats.steps += 1;
            stats.episode_return += r.reward;
            let done = r.done();
            self.buffers[slot].push(Transition {
                state: obs,
                action,
                reward: r.reward,
                next_state: r.next_state.clone(),
                terminal: r.terminal,
            });
            obs = r.next_state;
            if done {
                break;
            }
        }
        stats.success = self.env.success(&self.env.summary());
        Ok(stats)
    }

    fn update_agent(&mut self, slot: usize, steps: usize) -> Result<()> {
        if !self.buffers[slot].ready() {
            return Ok(());
        }
        let batch_size = self.config.batch_size;
        for _ in 0..steps {
            let batch = self.buffers[slot].sample(batch_size, &mut self.update_rng)?;
            match self.config.method {
                Method::DataSharing { percentile } => {
                    let mut peers = Vec::new();
                    for (j, buf) in self.buffers.iter().enumerate() {
                        if j != slot && buf.ready() {
                            peers.extend(buf.sample(batch_size, &mut self.update_rng)?);
                        }
                    }
                    let floor = self.env.min_reward(slot);
                    let shared = uds_share_batch(&batch, &peers, &self.agents[slot].critic, percentile, floor)?;
                    let refs: Vec<&Transition> = shared.iter().collect();
                    self.agents[slot].update(&refs, &mut self.update_rng)?;
                }
                _ => {
                    let agent = &mut self.agents[slot];
                    agent.update(&batch, &mut self.update_rng)?;
                }
            }
            self.update_calls[slot] += 1;
        }
        Ok(())
    }

    /// Collection for every task, then updates for every agent, then
    /// evaluation when scheduled. Returns one record per task.
    pub fn run_epoch(&mut self) -> Result<Vec<EpochRecord>> {
        let n = self.spec.task_count;
        let mut counts = SelectionCounts::with_candidates(n, self.candidate_count());
        self.phase_log.push((self.epoch, Phase::Collect));
        for task in 0..n {
            let mut steps = 0;
            while steps < self.config.env_steps_per_update {
                steps += self.collect_episode(task, &mut counts)?.steps;
            }
        }
        self.switchers.iter_mut().for_each(Switcher::end_episode);
        self.phase_log.push((self.epoch, Phase::Update));
        let g = self.config.grad_steps_per_update;
        if self.config.method == Method::FullyShared {
            self.update_agent(0, g * n)?;
        } else {
            for slot in 0..n {
                self.update_agent(slot, g)?;
            }
        }
        self.epoch += 1;
        let eval = if self.epoch % self.config.eval_interval == 0 || self.epoch == self.config.epochs {
            Some(self.evaluate()?)
        } else {
            None
        };
        let records = (0..n)
            .map(|task| EpochRecord {
                epoch: self.epoch,
                task,
                cumulative_env_steps: self.env_steps[task],
                eval: eval.as_ref().map(|e| e.tasks[task]),
                selection: counts.counts[task].clone(),
            })
            .collect();
        self.selection_epochs.push(counts);
        Ok(records)
    }

    /// Runs the remaining epochs and returns every record.
    pub fn train(&mut self) -> Result<Vec<EpochRecord>> {
        let mut out = Vec::new();
        while self.epoch < self.config.epochs {
            out.extend(self.run_epoch()?);
        }
        Ok(out)
    }

    /// Own-policy mean-action evaluation on a separate environment instance.
    pub fn evaluate(&mut self) -> Result<EvalReport> {
        let policies: Vec<&PolicyHead> = (0..self.spec.task_count).map(|t| own_policy(&self.agents, t)).collect();
        evaluate(&policies, self.eval_env.as_mut(), self.config.eval_episodes, &mut self.eval_rng)
    }
}

/// Task `task`'s policy; a single shared agent serves every task.
fn own_policy(agents: &[SacAgent], task: usize) -> &PolicyHead {
    &agents[task.min(agents.len() - 1)].policy
}

/// Mean-action rollouts of `policies[i]` on task `i`.
pub fn evaluate(
    policies: &[&PolicyHead],
    env: &mut dyn Environment,
    episodes: usize,
    rng: &mut dyn RngCore,
) -> Result<EvalReport> {
    contract!(policies.len() == env.spec().task_count, "{} policies for {} tasks", policies.len(), env.spec().task_count);
    contract!(episodes >= 1, "evaluation needs at least one episode");
    let mut tasks = Vec::with_capacity(policies.len());
    for (task, policy) in policies.iter().enumerate() {
        let (mut successes, mut total) = (0usize, 0.0);
        for _ in 0..episodes {
            let mut obs = env.reset(task, rng)?;
            loop {
                let r = env.step(&policy.mean_action(&obs)?)?;
                total += r.reward;
                if r.done() {
                    break;
                }
                obs = r.next_state;
            }
            successes += env.success(&env.summary()) as usize;
        }
        tasks.push(TaskEval {
            success_rate: successes as f64 / episodes as f64,
            mean_return: total / episodes as f64,
        });
    }
    Ok(EvalReport { tasks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EnvConfig, MultistageConfig, PointReachConfig};
    use crate::switch::{FixedGaussianPolicy, SwitchKind, SwitchVariant};

    fn small(env: EnvConfig, method: Method, seed: u64) -> TrainConfig {
        let mut c = TrainConfig::new(env, method);
        c.sac.hidden = vec![8];
        c.env_steps_per_update = 40;
        c.grad_steps_per_update = 3;
        c.batch_size = 16;
        c.min_buffer = 100;
        c.buffer_capacity = 1000;
        c.epochs = 4;
        c.eval_interval = 2;
        c.eval_episodes = 2;
        c.seed = seed;
        c
    }

    fn multistage() -> EnvConfig {
        let mut m = MultistageConfig::default();
        m.max_episode_steps = 20;
        EnvConfig::Multistage(m)
    }

    fn self_only() -> Method {
        Method::Mixture(SwitchKind::new(SwitchVariant::SelfOnly))
    }

    fn buffer_contents(t: &Trainer) -> Vec<Vec<Transition>> {
        t.buffers().iter().map(|b| b.iter().cloned().collect()).collect()
    }

    #[test]
    fn no_updates_before_min_buffer() {
        let mut c = small(multistage(), self_only(), 0);
        c.min_buffer = 90;
        let mut t = Trainer::new(c).unwrap();
        t.run_epoch().unwrap();
        assert_eq!(t.buffers()[0].len(), 40);
        assert!(t.update_calls().iter().all(|&u| u == 0));
        t.run_epoch().unwrap();
        assert!(t.update_calls().iter().all(|&u| u == 0));
        t.run_epoch().unwrap();
        assert!(t.update_calls().iter().all(|&u| u == 3));
    }

    #[test]
    fn identical_config_and_seed_reproduce_records() {
        let c = small(multistage(), Method::Mixture(SwitchKind::new(SwitchVariant::ArgmaxQ)), 7);
        let a = Trainer::new(c.clone()).unwrap().train().unwrap();
        let b = Trainer::new(c).unwrap().train().unwrap();
        assert_eq!(a, b);
        assert!(a.iter().any(|r| r.eval.is_some()));
    }

    #[test]
    fn self_only_matches_switch_bypass() {
        let mut a = Trainer::new(small(multistage(), self_only(), 3)).unwrap();
        let mut b = Trainer::new(small(multistage(), Method::Bypass, 3)).unwrap();
        assert_eq!(a.train().unwrap(), b.train().unwrap());
        assert_eq!(buffer_contents(&a), buffer_contents(&b));
        assert_eq!(a.agents(), b.agents());
    }

    #[test]
    fn identical_peers_match_self_only() {
        // Identical policies tie under every critic, so the lowest index acts;
        // its samples equal the own policy's for the same collect stream.
        let run = |method: Method| {
            let mut c = small(multistage(), method, 5);
            c.epochs = 1;
            c.min_buffer = 1000;
            let mut t = Trainer::new(c).unwrap();
            let shared = t.agents[0].policy.clone();
            t.agents.iter_mut().for_each(|a| a.policy = shared.clone());
            t.train().unwrap();
            (buffer_contents(&t), t.selection_total().clone())
        };
        let (mix, counts) = run(Method::Mixture(SwitchKind::new(SwitchVariant::ArgmaxQ)));
        let (own, _) = run(self_only());
        assert_eq!(mix, own);
        assert!(counts.counts.iter().all(|row| row[0] == 40));
    }

    #[test]
    fn stored_rewards_are_the_collecting_tasks() {
        let c = small(multistage(), Method::Mixture(SwitchKind::new(SwitchVariant::Uniform)), 11);
        let mut t = Trainer::new(c.clone()).unwrap();
        t.train().unwrap();
        let mut env = c.env.build().unwrap();
        for (task, buf) in t.buffers().iter().enumerate() {
            for tr in buf.iter() {
                // Re-simulating is noisy; the reward bound of the task is not.
                assert!(tr.reward >= env.min_reward(task) - 1e-9);
            }
        }
        let _ = env.reset(0, &mut rng_stream(0, 0));
    }

    #[test]
    fn evaluation_never_touches_buffers_or_agents() {
        let mut t = Trainer::new(small(multistage(), self_only(), 2)).unwrap();
        t.run_epoch().unwrap();
        let before = (buffer_contents(&t), t.agents().to_vec(), t.env_steps().to_vec());
        let report = t.evaluate().unwrap();
        assert_eq!(before, (buffer_contents(&t), t.agents().to_vec(), t.env_steps().to_vec()));
        assert!(report.tasks.iter().all(|e| (0.0..=1.0).contains(&e.success_rate)));
    }

    #[test]
    fn fully_shared_single_task_equals_no_sharing() {
        let env = EnvConfig::PointReach(PointReachConfig::default());
        let mut a = Trainer::new(small(env.clone(), Method::FullyShared, 4)).unwrap();
        let mut b = Trainer::new(small(env, Method::Bypass, 4)).unwrap();
        assert_eq!(a.train().unwrap(), b.train().unwrap());
        assert_eq!(a.agents(), b.agents());
    }

    #[test]
    fn fully_shared_uses_one_wider_agent() {
        let t = Trainer::new(small(multistage(), Method::FullyShared, 0)).unwrap();
        assert_eq!(t.agents().len(), 1);
        // 8 * sqrt(5) = 17.9
        assert_eq!(t.agents()[0].config.hidden, vec![18]);
    }

    #[test]
    fn phases_alternate_and_updates_are_per_agent() {
        let mut c = small(multistage(), Method::Mixture(SwitchKind::new(SwitchVariant::ArgmaxQ)), 1);
        c.min_buffer = 40;
        let mut t = Trainer::new(c).unwrap();
        t.train().unwrap();
        let log = t.phase_log();
        assert_eq!(log.len(), 8);
        for (k, (epoch, phase)) in log.iter().enumerate() {
            assert_eq!(*epoch, k / 2);
            assert_eq!(*phase, if k % 2 == 0 { Phase::Collect } else { Phase::Update });
        }
        assert!(t.update_calls().iter().all(|&u| u == 12));
    }

    #[test]
    fn selection_counts_cover_every_step() {
        let mut t = Trainer::new(small(multistage(), Method::Mixture(SwitchKind::new(SwitchVariant::Uniform)), 9)).unwrap();
        t.train().unwrap();
        for task in 0..5 {
            assert_eq!(t.selection_total().total(task), t.env_steps()[task]);
        }
        let merged = t.selection_history().iter().fold(SelectionCounts::new(5), |mut acc, c| {
            acc.merge(c);
            acc
        });
        assert_eq!(&merged, t.selection_total());
    }

    #[test]
    fn data_sharing_runs_and_counts_updates() {
        let mut c = small(multistage(), Method::DataSharing { percentile: 80.0 }, 6);
        c.min_buffer = 40;
        let mut t = Trainer::new(c).unwrap();
        t.train().unwrap();
        assert!(t.update_calls().iter().all(|&u| u == 12));
    }

    #[test]
    fn decision_log_records_fresh_decisions() {
        let mut kind = SwitchKind::new(SwitchVariant::ArgmaxQ);
        kind.hold_horizon = 5;
        let mut c = small(multistage(), Method::Mixture(kind), 8);
        c.log_decisions = true;
        c.epochs = 1;
        let mut t = Trainer::new(c).unwrap();
        t.train().unwrap();
        // 20-step episodes, a fresh decision every 5 steps.
        assert_eq!(t.decisions().len(), 5 * 2 * 4);
        assert!(t.decisions().iter().all(|d| d.step % 5 == 0));
    }

    #[test]
    fn helpers_require_a_mixture() {
        let mut c = small(EnvConfig::PointReach(PointReachConfig::default()), Method::Bypass, 0);
        c.helpers = vec![FixedGaussianPolicy::toward(&[1.0, 0.0], 0.1).unwrap()];
        assert!(Trainer::new(c).is_err());
    }
}
