use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::env::EnvSpec;
use crate::error::{contract, ensure_finite};
use crate::math::{self, LN_2PI};
use crate::nn::{DenseNet, Trace};
use crate::Result;

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Tanh-squashed diagonal Gaussian. The trunk emits `[mean; log_std]`; actions
/// are `tanh(u) * scale + offset` with `u ~ N(mean, exp(log_std)^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyHead {
    pub net: DenseNet,
    pub offset: Vec<f64>,
    pub scale: Vec<f64>,
    pub log_std_min: f64,
    pub log_std_max: f64,
}

/// One reparameterized draw and everything its gradient needs.
#[derive(Debug, Clone)]
pub struct PolicySample {
    pub trace: Trace,
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
    /// Whether each raw log_std lay inside the clamp range (gradient passes).
    pub log_std_active: Vec<bool>,
    pub noise: Vec<f64>,
    pub squashed: Vec<f64>,
    pub action: Vec<f64>,
    pub log_prob: f64,
}

impl PolicyHead {
    pub fn new<R: RngCore + ?Sized>(obs_dim: usize, hidden: &[usize], env: &EnvSpec, rng: &mut R) -> Result<Self> {
        let mut dims = vec![obs_dim];
        dims.extend_from_slice(hidden);
        dims.push(2 * env.act_dim);
        let (offset, scale) = env.action_offset_scale();
        Ok(Self {
            net: DenseNet::new(&dims, rng)?,
            offset,
            scale,
            log_std_min: LOG_STD_MIN,
            log_std_max: LOG_STD_MAX,
        })
    }

    pub fn act_dim(&self) -> usize {
        self.offset.len()
    }

    fn split(&self, out: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<bool>)> {
        ensure_finite("policy output", out)?;
        let d = self.act_dim();
        let mean = out[..d].to_vec();
        let mut active = Vec::with_capacity(d);
        let log_std = out[d..]
            .iter()
            .map(|&ls| {
                active.push(ls >= self.log_std_min && ls <= self.log_std_max);
                ls.clamp(self.log_std_min, self.log_std_max)
            })
            .collect();
        Ok((mean, log_std, active))
    }

    /// Pre-squash mean and clamped log-std.
    pub fn distribution(&self, obs: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let out = self.net.forward(obs)?;
        let (mean, log_std, _) = self.split(&out)?;
        Ok((mean, log_std))
    }

    fn squash(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let t: Vec<f64> = u.iter().map(|&x| math::tanh(x)).collect();
        let a = t
            .iter()
            .zip(self.scale.iter().zip(&self.offset))
            .map(|(t, (s, o))| t * s + o)
            .collect();
        (t, a)
    }

    /// Deterministic action `tanh(mean) * scale + offset`.
    pub fn mean_action(&self, obs: &[f64]) -> Result<Vec<f64>> {
        let (mean, _) = self.distribution(obs)?;
        Ok(self.squash(&mean).1)
    }

    /// Log density of the squashed action given pre-squash point `u` and noise.
    fn log_prob_from(&self, u: &[f64], noise: &[f64], log_std: &[f64]) -> f64 {
        let mut lp = 0.0;
        for k in 0..u.len() {
            lp += -0.5 * noise[k] * noise[k] - log_std[k] - 0.5 * LN_2PI - math::ln(self.scale[k])
                - math::ln_one_minus_tanh_sq(u[k]);
        }
        lp
    }

    /// Reparameterized sample; `noise` supplies the standard normal draw.
    pub fn sample_with_noise(&self, obs: &[f64], noise: &[f64]) -> Result<PolicySample> {
        contract!(noise.len() == self.act_dim(), "noise length {} != {}", noise.len(), self.act_dim());
        let trace = self.net.forward_trace(obs)?;
        let (mean, log_std, log_std_active) = self.split(trace.output())?;
        let u: Vec<f64> = (0..mean.len()).map(|k| mean[k] + math::exp(log_std[k]) * noise[k]).collect();
        let (squashed, action) = self.squash(&u);
        let log_prob = self.log_prob_from(&u, noise, &log_std);
        ensure_finite("policy log-probability", &[log_prob])?;
        Ok(PolicySample {
            trace,
            mean,
            log_std,
            log_std_active,
            noise: noise.to_vec(),
            squashed,
            action,
            log_prob,
        })
    }

    pub fn sample<R: RngCore + ?Sized>(&self, obs: &[f64], rng: &mut R) -> Result<PolicySample> {
        let noise: Vec<f64> = (0..self.act_dim()).map(|_| StandardNormal.sample(rng)).collect();
        self.sample_with_noise(obs, &noise)
    }

    /// `(action, log_prob)` of one stochastic draw.
    pub fn sample_action<R: RngCore + ?Sized>(&self, obs: &[f64], rng: &mut R) -> Result<(Vec<f64>, f64)> {
        let s = self.sample(obs, rng)?;
        Ok((s.action, s.log_prob))
    }

    /// Log density of an action strictly inside the bounds.
    pub fn log_prob(&self, obs: &[f64], action: &[f64]) -> Result<f64> {
        contract!(action.len() == self.act_dim(), "action length {} != {}", action.len(), self.act_dim());
        let (mean, log_std) = self.distribution(obs)?;
        let mut u = Vec::with_capacity(action.len());
        let mut noise = Vec::with_capacity(action.len());
        for k in 0..action.len() {
            let t = (action[k] - self.offset[k]) / self.scale[k];
            contract!(t > -1.0 && t < 1.0, "action {} lies on or outside the squash bounds", action[k]);
            let uk = math::atanh(t);
            noise.push((uk - mean[k]) / math::exp(log_std[k]));
            u.push(uk);
        }
        Ok(self.log_prob_from(&u, &noise, &log_std))
    }

    /// Differential entropy of the pre-squash Gaussian.
    pub fn entropy(&self, obs: &[f64]) -> Result<f64> {
        let (_, log_std) = self.distribution(obs)?;
        Ok(log_std.iter().map(|ls| ls + 0.5 * (1.0 + LN_2PI)).sum())
    }

    /// Gradient of `alpha * log_prob - Q(s, a)` with respect to the trunk
    /// outputs, given `dQ/da` at the sampled action.
    pub fn surrogate_output_grad(&self, s: &PolicySample, alpha: f64, dq_da: &[f64]) -> Vec<f64> {
        let d = self.act_dim();
        let mut g = vec![0.0; 2 * d];
        for k in 0..d {
            let t = s.squashed[k];
            let sigma = math::exp(s.log_std[k]);
            let dq_du = dq_da[k] * self.scale[k] * (1.0 - t * t);
            let dlp_dmean = 2.0 * t;
            let dlp_dls = -1.0 + 2.0 * t * sigma * s.noise[k];
            g[k] = alpha * dlp_dmean - dq_du;
            g[d + k] = if s.log_std_active[k] {
                alpha * dlp_dls - dq_du * sigma * s.noise[k]
            } else {
                0.0
            };
        }
        g
    }
}
