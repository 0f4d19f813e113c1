use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;

use crate::error::ensure_finite;
use crate::nn::DenseNet;
use crate::Result;

/// Two independent Q networks over `obs ⊕ action` with trailing target copies.
#[derive(Debug, Clone, PartialEq)]
pub struct TwinCritic {
    pub q1: DenseNet,
    pub q2: DenseNet,
    pub target1: DenseNet,
    pub target2: DenseNet,
}

pub(crate) fn joint_input(obs: &[f64], action: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(obs.len() + action.len());
    x.extend_from_slice(obs);
    x.extend_from_slice(action);
    x
}

fn scalar(net: &DenseNet, x: &[f64]) -> Result<f64> {
    let q = net.forward(x)?[0];
    ensure_finite("critic output", &[q])?;
    Ok(q)
}

impl TwinCritic {
    pub fn new<R: RngCore + ?Sized>(obs_dim: usize, act_dim: usize, hidden: &[usize], rng: &mut R) -> Result<Self> {
        let mut dims = vec![obs_dim + act_dim];
        dims.extend_from_slice(hidden);
        dims.push(1);
        let q1 = DenseNet::new(&dims, rng)?;
        let q2 = DenseNet::new(&dims, rng)?;
        Ok(Self {
            target1: q1.clone(),
            target2: q2.clone(),
            q1,
            q2,
        })
    }

    pub fn q_pair(&self, obs: &[f64], action: &[f64]) -> Result<(f64, f64)> {
        let x = joint_input(obs, action);
        Ok((scalar(&self.q1, &x)?, scalar(&self.q2, &x)?))
    }

    /// Elementwise minimum of the online pair.
    pub fn q_min(&self, obs: &[f64], action: &[f64]) -> Result<f64> {
        let (a, b) = self.q_pair(obs, action)?;
        Ok(a.min(b))
    }

    /// Elementwise minimum of the target pair.
    pub fn target_min(&self, obs: &[f64], action: &[f64]) -> Result<f64> {
        let x = joint_input(obs, action);
        Ok(scalar(&self.target1, &x)?.min(scalar(&self.target2, &x)?))
    }

    /// `target ← retention · target + (1 − retention) · online` for both pairs.
    pub fn soft_update(&mut self, retention: f64) -> Result<()> {
        self.target1.polyak_toward(&self.q1, retention)?;
        self.target2.polyak_toward(&self.q2, retention)
    }

    /// Swaps the roles of the two networks (and their targets).
    pub fn swapped(&self) -> Self {
        Self {
            q1: self.q2.clone(),
            q2: self.q1.clone(),
            target1: self.target2.clone(),
            target2: self.target1.clone(),
        }
    }
}
