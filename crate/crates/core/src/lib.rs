//! Selective behavior sharing for multi-task soft actor-critic.
//!
//! Each task trains its own SAC agent on its own replay buffer. During data
//! collection, the behavioral policy for task `i` is a per-state selection
//! among all task policies, scored by task `i`'s critic (the Q-switch). The
//! training objective of every agent is untouched; only the data changes.
//!
//! The crate is `no_std` (with `alloc`). File formats, configuration parsing
//! and the command-line front end live in the `qmp` crate.
//!
//! Modules:
//! - [`nn`]: dense tanh networks, exact reverse-mode gradients, Adam, gradient checks.
//! - [`env`]: multi-task environments (2D point reaching, multistage point mass, maze).
//! - [`sac`]: squashed-Gaussian actor, twin critics, temperature tuning.
//! - [`switch`]: mixture-switch functions (Q-switch and ablations), hold logic, statistics.
//! - [`tabular`]: exact soft policy iteration with mixture improvement on finite MDPs.
//! - [`trainer`]: the multi-task collection/update loop, baselines and evaluation.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod env;
pub mod error;
pub mod math;
pub mod nn;
pub mod sac;
pub mod switch;
pub mod tabular;
pub mod trainer;

pub use error::{Error, Result};

/// Deterministic generator used throughout the crate.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Builds the generator for `(seed, stream)`. Streams are independent.
pub fn rng_stream(seed: u64, stream: u64) -> Rng {
    use rand::SeedableRng;
    let mut rng = Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
