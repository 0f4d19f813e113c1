use alloc::vec::Vec;

use crate::error::contract;
use crate::sac::Transition;
use crate::switch::QCritic;
use crate::Result;

/// Linear-interpolation percentile (`k` in `[0, 100]`) of unsorted values.
pub fn percentile(values: &[f64], k: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let pos = (k / 100.0) * (v.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = libm::ceil(pos) as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

/// Task `i`'s training batch extended with peer transitions whose `Q_i(s, a)`
/// reaches the `k`-th percentile of `Q_i` over the own batch. Accepted peer
/// rewards are replaced by `min_reward`; `k = 0` accepts every peer.
pub fn uds_share_batch(
    own: &[&Transition],
    peers: &[&Transition],
    critic: &dyn QCritic,
    k: f64,
    min_reward: f64,
) -> Result<Vec<Transition>> {
    contract!(!own.is_empty(), "data sharing needs a nonempty own batch");
    contract!((0.0..=100.0).contains(&k), "percentile {k} outside [0, 100]");
    let mut out: Vec<Transition> = own.iter().map(|t| (*t).clone()).collect();
    let threshold = if k == 0.0 {
        f64::NEG_INFINITY
    } else {
        let q: Result<Vec<f64>> = own.iter().map(|t| critic.q_value(&t.state, &t.action)).collect();
        percentile(&q?, k)
    };
    for p in peers {
        if k == 0.0 || critic.q_value(&p.state, &p.action)? >= threshold {
            let mut t = (*p).clone();
            t.reward = min_reward;
            out.push(t);
        }
    }
    Ok(out)
}
