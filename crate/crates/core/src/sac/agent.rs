use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;

use super::critic::joint_input;
use super::{PolicyHead, SacConfig, Transition, TwinCritic};
use crate::env::EnvSpec;
use crate::error::{contract, ensure_finite};
use crate::math;
use crate::nn::{adam_step, AdamState, DenseNet, Tensor};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub alpha: f64,
    /// `-mean log_prob` over the actor batch.
    pub entropy: f64,
    pub mean_q: f64,
}

/// Actor, twin critics and temperature for one task, with their optimizers.
#[derive(Debug, Clone, PartialEq)]
pub struct SacAgent {
    pub config: SacConfig,
    pub policy: PolicyHead,
    pub critic: TwinCritic,
    pub log_alpha: f64,
    pub target_entropy: f64,
    pub actor_opt: AdamState,
    pub critic1_opt: AdamState,
    pub critic2_opt: AdamState,
    pub alpha_opt: AdamState,
    pub updates: u64,
}

impl SacAgent {
    pub fn new<R: RngCore + ?Sized>(env: &EnvSpec, config: SacConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        env.validate()?;
        let policy = PolicyHead::new(env.obs_dim, &config.hidden, env, rng)?;
        let critic = TwinCritic::new(env.obs_dim, env.act_dim, &config.hidden, rng)?;
        Ok(Self {
            actor_opt: AdamState::new(policy.net.num_params(), config.actor_lr),
            critic1_opt: AdamState::new(critic.q1.num_params(), config.critic_lr),
            critic2_opt: AdamState::new(critic.q2.num_params(), config.critic_lr),
            alpha_opt: AdamState::new(1, config.alpha_lr),
            log_alpha: math::ln(config.initial_alpha),
            target_entropy: config.target_entropy.unwrap_or(-(env.act_dim as f64)),
            policy,
            critic,
            config,
            updates: 0,
        })
    }

    pub fn alpha(&self) -> f64 {
        math::exp(self.log_alpha)
    }

    /// Soft Bellman targets `r·c + γ(1 − d)(min target Q(s′, a′) − α log π(a′|s′))`
    /// with `a′ ~ π(·|s′)`.
    pub fn critic_targets<R: RngCore + ?Sized>(&self, batch: &[&Transition], rng: &mut R) -> Result<Vec<f64>> {
        let alpha = self.alpha();
        batch
            .iter()
            .map(|t| {
                let r = self.config.reward_scale * t.reward;
                if t.terminal || self.config.gamma == 0.0 {
                    return Ok(r);
                }
                let (a_next, lp_next) = self.policy.sample_action(&t.next_state, rng)?;
                let q_next = self.critic.target_min(&t.next_state, &a_next)?;
                Ok(r + self.config.gamma * (q_next - alpha * lp_next))
            })
            .collect()
    }

    /// One Adam step of both critics on `0.5 · mean (Q_k − y)²`. Returns the
    /// summed loss of both critics and the mean online Q.
    pub fn critic_update<R: RngCore + ?Sized>(&mut self, batch: &[&Transition], rng: &mut R) -> Result<(f64, f64)> {
        contract!(!batch.is_empty(), "critic update on an empty batch");
        let targets = self.critic_targets(batch, rng)?;
        let n = batch.len() as f64;
        let mut loss = 0.0;
        let mut mean_q = 0.0;
        let mut g1 = vec![0.0; self.critic.q1.num_params()];
        let mut g2 = vec![0.0; self.critic.q2.num_params()];
        for (t, &y) in batch.iter().zip(&targets) {
            let x = joint_input(&t.state, &t.action);
            for (net, grads) in [(&self.critic.q1, &mut g1), (&self.critic.q2, &mut g2)] {
                let trace = net.forward_trace(&x)?;
                let q = trace.output()[0];
                loss += 0.5 * (q - y) * (q - y) / n;
                mean_q += q / (2.0 * n);
                net.backward_trace(&trace, &[(q - y) / n], grads)?;
            }
        }
        ensure_finite("critic loss", &[loss])?;
        adam_step(self.critic.q1.params_mut(), &g1, &mut self.critic1_opt)?;
        adam_step(self.critic.q2.params_mut(), &g2, &mut self.critic2_opt)?;
        Ok((loss, mean_q))
    }

    /// Gradient of `mean(α log π(a|s) − min Q(s, a))` over the batch states,
    /// using reparameterized samples. Returns `(grads, loss, mean log π)`.
    pub fn actor_gradient<R: RngCore + ?Sized>(&self, batch: &[&Transition], rng: &mut R) -> Result<(Vec<f64>, f64, f64)> {
        contract!(!batch.is_empty(), "actor update on an empty batch");
        let alpha = self.alpha();
        let n = batch.len() as f64;
        let obs_dim = self.policy.net.input_dim();
        let mut grads = vec![0.0; self.policy.net.num_params()];
        let mut loss = 0.0;
        let mut mean_lp = 0.0;
        for t in batch {
            let s = self.policy.sample(&t.state, rng)?;
            let x = joint_input(&t.state, &s.action);
            let tr1 = self.critic.q1.forward_trace(&x)?;
            let tr2 = self.critic.q2.forward_trace(&x)?;
            let (net, trace) = if tr1.output()[0] <= tr2.output()[0] {
                (&self.critic.q1, &tr1)
            } else {
                (&self.critic.q2, &tr2)
            };
            let q = trace.output()[0];
            let dq_dx = net.input_grad(trace, &[1.0])?;
            let mut out_grad = self.policy.surrogate_output_grad(&s, alpha, &dq_dx[obs_dim..]);
            out_grad.iter_mut().for_each(|g| *g /= n);
            self.policy.net.backward_trace(&s.trace, &out_grad, &mut grads)?;
            loss += (alpha * s.log_prob - q) / n;
            mean_lp += s.log_prob / n;
        }
        ensure_finite("actor loss", &[loss])?;
        Ok((grads, loss, mean_lp))
    }

    pub fn actor_update<R: RngCore + ?Sized>(&mut self, batch: &[&Transition], rng: &mut R) -> Result<(f64, f64)> {
        let (grads, loss, mean_lp) = self.actor_gradient(batch, rng)?;
        adam_step(self.policy.net.params_mut(), &grads, &mut self.actor_opt)?;
        Ok((loss, mean_lp))
    }

    /// Adam step on `log α` with gradient `H − target_entropy`, `H = −mean log π`.
    pub fn alpha_update(&mut self, mean_log_prob: f64) -> Result<f64> {
        if self.config.learn_alpha {
            let grad = -mean_log_prob - self.target_entropy;
            let mut p = [self.log_alpha];
            adam_step(&mut p, &[grad], &mut self.alpha_opt)?;
            self.log_alpha = p[0];
        }
        Ok(self.alpha())
    }

    pub fn soft_target_update(&mut self) -> Result<()> {
        self.critic.soft_update(self.config.target_retention)
    }

    /// Critic, actor, temperature, then targets.
    pub fn update<R: RngCore + ?Sized>(&mut self, batch: &[&Transition], rng: &mut R) -> Result<UpdateStats> {
        let (critic_loss, mean_q) = self.critic_update(batch, rng)?;
        let (actor_loss, mean_lp) = self.actor_update(batch, rng)?;
        let alpha = self.alpha_update(mean_lp)?;
        self.soft_target_update()?;
        self.updates += 1;
        for net in [&self.policy.net, &self.critic.q1, &self.critic.q2] {
            net.ensure_finite(self.updates)?;
        }
        Ok(UpdateStats {
            critic_loss,
            actor_loss,
            alpha,
            entropy: -mean_lp,
            mean_q,
        })
    }

    /// All learnable state in a fixed order: policy, q1, q2, target1, target2
    /// (each prefixed by its layer count), the four optimizers, then `log α`.
    pub fn to_tensors(&self) -> Vec<Tensor> {
        let mut out = Vec::new();
        for net in self.nets() {
            out.push(Tensor::scalar(net.num_layers() as f64));
            out.extend(net.to_tensors());
        }
        for opt in [&self.actor_opt, &self.critic1_opt, &self.critic2_opt, &self.alpha_opt] {
            out.push(Tensor::vector(opt.first_moment.clone()));
            out.push(Tensor::vector(opt.second_moment.clone()));
            out.push(Tensor::vector(vec![opt.step_count as f64, opt.learning_rate]));
        }
        out.push(Tensor::vector(vec![self.log_alpha, self.target_entropy, self.updates as f64]));
        out
    }

    /// Restores state written by [`Self::to_tensors`] into an agent of the same shape.
    pub fn load_tensors(&mut self, tensors: &[Tensor]) -> Result<()> {
        let mut rest = tensors;
        let mut nets: Vec<DenseNet> = Vec::with_capacity(5);
        for _ in 0..5 {
            contract!(!rest.is_empty(), "snapshot truncated before a network");
            let layers = rest[0].data.first().copied().unwrap_or(-1.0);
            contract!(layers >= 1.0 && layers as usize * 2 < rest.len(), "bad layer count {layers}");
            let k = layers as usize * 2;
            nets.push(DenseNet::from_tensors(&rest[1..1 + k])?);
            rest = &rest[1 + k..];
        }
        for (have, new) in self.nets().into_iter().zip(&nets) {
            contract!(have.dims() == new.dims(), "snapshot shape {:?} != agent {:?}", new.dims(), have.dims());
        }
        contract!(rest.len() == 13, "snapshot has {} trailing tensors, expected 13", rest.len());
        let mut opts = [
            self.actor_opt.clone(),
            self.critic1_opt.clone(),
            self.critic2_opt.clone(),
            self.alpha_opt.clone(),
        ];
        for (i, opt) in opts.iter_mut().enumerate() {
            let (m, v, meta) = (&rest[3 * i], &rest[3 * i + 1], &rest[3 * i + 2]);
            contract!(
                m.data.len() == opt.first_moment.len() && v.data.len() == opt.second_moment.len() && meta.data.len() == 2,
                "optimizer {i} shape mismatch"
            );
            opt.first_moment = m.data.clone();
            opt.second_moment = v.data.clone();
            opt.step_count = meta.data[0] as u64;
            opt.learning_rate = meta.data[1];
        }
        let tail = &rest[12].data;
        contract!(tail.len() == 3, "temperature record has {} values", tail.len());
        let [policy, q1, q2, t1, t2]: [DenseNet; 5] = nets.try_into().map_err(|_| crate::Error::Contract("net count".into()))?;
        self.policy.net = policy;
        self.critic = TwinCritic { q1, q2, target1: t1, target2: t2 };
        let [a, c1, c2, al] = opts;
        self.actor_opt = a;
        self.critic1_opt = c1;
        self.critic2_opt = c2;
        self.alpha_opt = al;
        self.log_alpha = tail[0];
        self.target_entropy = tail[1];
        self.updates = tail[2] as u64;
        Ok(())
    }

    fn nets(&self) -> [&DenseNet; 5] {
        [
            &self.policy.net,
            &self.critic.q1,
            &self.critic.q2,
            &self.critic.target1,
            &self.critic.target2,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_stream;

    fn spec() -> EnvSpec {
        EnvSpec {
            task_count: 1,
            obs_dim: 2,
            act_dim: 1,
            action_low: vec![-1.0],
            action_high: vec![1.0],
            max_episode_steps: 10,
        }
    }

    fn agent(seed: u64, hidden: &[usize]) -> SacAgent {
        let cfg = SacConfig { hidden: hidden.to_vec(), ..SacConfig::default() };
        SacAgent::new(&spec(), cfg, &mut rng_stream(seed, 0)).unwrap()
    }

    fn tr(s: [f64; 2], a: f64, r: f64, s2: [f64; 2], terminal: bool) -> Transition {
        Transition { state: s.to_vec(), action: vec![a], reward: r, next_state: s2.to_vec(), terminal }
    }

    #[test]
    fn zero_discount_target_is_reward() {
        let mut ag = agent(0, &[8]);
        ag.config.gamma = 0.0;
        let t = tr([0.1, 0.2], 0.3, 1.7, [0.5, 0.5], false);
        assert_eq!(ag.critic_targets(&[&t], &mut rng_stream(0, 1)).unwrap(), vec![1.7]);
    }

    #[test]
    fn terminal_target_ignores_next_state() {
        let ag = agent(0, &[8]);
        let a = tr([0.1, 0.2], 0.3, -0.4, [0.5, 0.5], true);
        let b = tr([0.1, 0.2], 0.3, -0.4, [-9.0, 9.0], true);
        let mut rng = rng_stream(0, 1);
        assert_eq!(ag.critic_targets(&[&a, &b], &mut rng).unwrap(), vec![-0.4, -0.4]);
    }

    #[test]
    fn swapped_critics_give_identical_targets() {
        let ag = agent(4, &[8]);
        let mut swapped = ag.clone();
        swapped.critic = ag.critic.swapped();
        let t = tr([0.1, 0.2], 0.3, -0.4, [0.5, -0.5], false);
        let y1 = ag.critic_targets(&[&t], &mut rng_stream(9, 1)).unwrap();
        let y2 = swapped.critic_targets(&[&t], &mut rng_stream(9, 1)).unwrap();
        assert_eq!(y1, y2);
    }

    #[test]
    fn critic_step_matches_scalar_oracle() {
        // Bias-only critics on a zero-width input: Q ≡ b. One Adam step from
        // b toward y moves b by exactly lr · sign(b − y).
        let env = EnvSpec { obs_dim: 0, act_dim: 1, ..spec() };
        let cfg = SacConfig { hidden: vec![], gamma: 0.0, ..SacConfig::default() };
        let mut ag = SacAgent::new(&env, cfg, &mut rng_stream(0, 0)).unwrap();
        ag.critic.q1 = DenseNet::from_layers(&[1, 1], &[(vec![0.0], vec![0.25])]).unwrap();
        ag.critic.q2 = ag.critic.q1.clone();
        let t = Transition { state: vec![], action: vec![0.0], reward: 2.0, next_state: vec![], terminal: false };
        let (loss, _) = ag.critic_update(&[&t], &mut rng_stream(0, 1)).unwrap();
        let lr = ag.config.critic_lr;
        // Independent oracle: grad = b − y; Adam's first step is lr · g / (|g| + eps).
        let g = 0.25 - 2.0;
        let expected = 0.25 - lr * g / (libm::fabs(g) + 1e-8);
        assert!((loss - 2.0 * 0.5 * g * g).abs() < 1e-12);
        assert!((ag.critic.q1.layer_bias(0)[0] - expected).abs() < 1e-12);
        assert!((ag.critic.q2.layer_bias(0)[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn critic_updates_reduce_loss_on_fixed_batch() {
        let mut ag = agent(2, &[16]);
        ag.config.gamma = 0.0;
        let batch: Vec<Transition> = (0..16).map(|i| {
            let x = i as f64 / 16.0;
            tr([x, -x], 0.5 - x, 2.0 * x - 0.5, [0.0, 0.0], false)
        }).collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        let mut rng = rng_stream(2, 1);
        let (first, _) = ag.critic_update(&refs, &mut rng).unwrap();
        let mut last = first;
        for _ in 0..300 {
            last = ag.critic_update(&refs, &mut rng).unwrap().0;
        }
        assert!(last < 0.2 * first, "{first} -> {last}");
    }

    /// Surrogate loss at fixed noise, for finite differences.
    fn surrogate(ag: &SacAgent, states: &[[f64; 2]], noise: &[f64]) -> f64 {
        let alpha = ag.alpha();
        let n = states.len() as f64;
        states
            .iter()
            .zip(noise)
            .map(|(s, e)| {
                let smp = ag.policy.sample_with_noise(s, &[*e]).unwrap();
                (alpha * smp.log_prob - ag.critic.q_min(s, &smp.action).unwrap()) / n
            })
            .sum()
    }

    #[test]
    fn actor_gradient_matches_finite_differences() {
        let mut ag = agent(11, &[5]);
        ag.log_alpha = libm::log(0.3);
        let states = [[0.2, -0.4], [0.9, 0.1], [-0.5, 0.7]];
        let batch: Vec<Transition> = states.iter().map(|s| tr(*s, 0.0, 0.0, *s, false)).collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        // The analytic pass draws one standard normal per state from this stream.
        let mut rng = rng_stream(11, 5);
        let noise: Vec<f64> = (0..3)
            .map(|_| rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, &mut rng))
            .collect();
        let (grads, loss, _) = ag.actor_gradient(&refs, &mut rng_stream(11, 5)).unwrap();
        assert!((loss - surrogate(&ag, &states, &noise)).abs() < 1e-12);
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for i in 0..grads.len() {
            let mut plus = ag.clone();
            plus.policy.net.params_mut()[i] += h;
            let mut minus = ag.clone();
            minus.policy.net.params_mut()[i] -= h;
            let fd = (surrogate(&plus, &states, &noise) - surrogate(&minus, &states, &noise)) / (2.0 * h);
            worst = worst.max(crate::nn::relative_error(grads[i], fd));
        }
        assert!(worst < 1e-3, "worst relative error {worst}");
    }

    #[test]
    fn zero_alpha_flat_critic_gives_zero_actor_gradient() {
        let mut ag = agent(3, &[6]);
        ag.log_alpha = f64::NEG_INFINITY;
        for net in [&mut ag.critic.q1, &mut ag.critic.q2] {
            net.params_mut().iter_mut().for_each(|p| *p = 0.0);
        }
        let t = tr([0.3, 0.3], 0.0, 0.0, [0.3, 0.3], false);
        let (grads, _, _) = ag.actor_gradient(&[&t], &mut rng_stream(3, 1)).unwrap();
        assert!(grads.iter().all(|g| g.abs() < 1e-15));
    }

    #[test]
    fn large_alpha_raises_entropy() {
        let mut ag = agent(5, &[8]);
        ag.log_alpha = libm::log(100.0);
        ag.actor_opt.learning_rate = 1e-2;
        let batch: Vec<Transition> = (0..32).map(|i| {
            let x = (i as f64 / 32.0) - 0.5;
            tr([x, 0.5 * x], 0.0, 0.0, [x, x], false)
        }).collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        let mean_ent = |ag: &SacAgent| batch.iter().map(|t| ag.policy.entropy(&t.state).unwrap()).sum::<f64>();
        let before = mean_ent(&ag);
        let mut rng = rng_stream(5, 1);
        for _ in 0..20 {
            ag.actor_update(&refs, &mut rng).unwrap();
        }
        assert!(mean_ent(&ag) > before);
    }

    #[test]
    fn alpha_sign_behavior() {
        let mut ag = agent(0, &[4]);
        assert_eq!(ag.target_entropy, -1.0);
        let a0 = ag.alpha();
        // Entropy exactly at target: zero gradient.
        ag.alpha_update(1.0).unwrap();
        assert_eq!(ag.alpha(), a0);
        // Entropy below target (log π high): alpha rises.
        ag.alpha_update(3.0).unwrap();
        assert!(ag.alpha() > a0);
        let mut ag2 = agent(0, &[4]);
        ag2.alpha_update(-3.0).unwrap();
        assert!(ag2.alpha() < a0);
    }

    #[test]
    fn target_decays_geometrically_toward_frozen_online() {
        let mut ag = agent(6, &[4]);
        ag.critic.target1.params_mut().iter_mut().for_each(|p| *p += 1.0);
        let gap0: Vec<f64> = ag.critic.target1.params().iter().zip(ag.critic.q1.params()).map(|(t, o)| t - o).collect();
        for _ in 0..50 {
            ag.soft_target_update().unwrap();
        }
        let ratio = libm::pow(0.995, 50.0);
        for ((t, o), g0) in ag.critic.target1.params().iter().zip(ag.critic.q1.params()).zip(&gap0) {
            assert!(((t - o) - g0 * ratio).abs() < 1e-12);
        }
    }

    #[test]
    fn retention_extremes() {
        let mut ag = agent(7, &[4]);
        ag.critic.q1.params_mut()[0] += 3.0;
        let mut keep = ag.clone();
        keep.critic.soft_update(1.0).unwrap();
        assert_eq!(keep.critic.target1, ag.critic.target1);
        ag.critic.soft_update(0.0).unwrap();
        assert_eq!(ag.critic.target1, ag.critic.q1);
    }

    #[test]
    fn full_update_keeps_parameters_finite_and_counts() {
        let mut ag = agent(8, &[8, 8]);
        let batch: Vec<Transition> = (0..8).map(|i| tr([i as f64, 0.0], 0.1, -1.0, [i as f64 + 1.0, 0.0], i == 7)).collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        let mut rng = rng_stream(8, 1);
        for _ in 0..5 {
            let st = ag.update(&refs, &mut rng).unwrap();
            assert!(st.critic_loss.is_finite() && st.actor_loss.is_finite() && st.alpha > 0.0);
        }
        assert_eq!(ag.updates, 5);
        assert!(ag.critic.target1 != ag.critic.q1);
    }

    #[test]
    fn empty_batch_is_rejected() {
        let mut ag = agent(0, &[4]);
        assert!(ag.critic_update(&[], &mut rng_stream(0, 1)).is_err());
    }

    #[test]
    fn tensors_round_trip() {
        let mut ag = agent(9, &[6, 5]);
        let t = tr([0.1, 0.2], 0.3, 1.0, [0.2, 0.3], false);
        ag.update(&[&t], &mut rng_stream(9, 1)).unwrap();
        let snap = ag.to_tensors();
        let mut fresh = agent(10, &[6, 5]);
        fresh.load_tensors(&snap).unwrap();
        assert_eq!(fresh, ag);
        let mut wrong = agent(10, &[7, 5]);
        assert!(wrong.load_tensors(&snap).is_err());
    }
}
