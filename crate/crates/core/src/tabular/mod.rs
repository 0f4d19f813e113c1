//! Exact tabular soft policy iteration with policy mixtures, plus verifiers
//! for evaluation contraction, mixture improvement and faster convergence.
//!
//! Entropy enters every backup as `−α log π`, so [`soft_improve`] and
//! [`soft_value_iteration_oracle`] share one fixed point.

mod mdp;
mod spi;
mod verify;

pub use mdp::{QTable, TabularMdp, TabularPolicy};
pub use spi::{
    exact_policy_evaluation, hard_value_iteration, mixture_objectives, mixture_policy, mixture_select_tabular,
    mixture_spi, soft_backup, soft_improve, soft_value, soft_value_iteration_oracle, DominanceStats, SpiTrace,
    PROB_FLOOR,
};
pub use verify::{
    contraction_suite, iteration_race, verify_contraction, verify_improvement, ContractionReport, ImprovementReport,
    ImprovementSuite, ImprovementViolation, IterationRace, IterationRaceReport, GAMMAS,
};
