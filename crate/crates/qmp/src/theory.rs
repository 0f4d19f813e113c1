//! Tabular verification suite with a JSON report.

use std::time::Instant;

use serde::Serialize;

use qmp_core::tabular::{
    contraction_suite, iteration_race, verify_improvement, ImprovementSuite, IterationRace, GAMMAS,
};

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryOptions {
    pub seed: u64,
    pub contraction_mdps: usize,
    pub contraction_pairs: usize,
    pub improvement_trials: usize,
    pub race_instances: usize,
    pub gammas: Vec<f64>,
}

impl Default for TheoryOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            contraction_mdps: 200,
            contraction_pairs: 5,
            improvement_trials: 100,
            race_instances: 50,
            gammas: GAMMAS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionSection {
    pub pairs: usize,
    pub violations: usize,
    pub max_ratio: f64,
    pub max_excess: f64,
    pub seconds: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViolationEntry {
    pub trial: usize,
    pub stage: String,
    pub shortfall: f64,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImprovementSection {
    pub trials: usize,
    pub improvement_fraction: f64,
    pub mixture_fraction: f64,
    pub worst_improvement_shortfall: f64,
    pub worst_mixture_shortfall: f64,
    pub violations: Vec<ViolationEntry>,
    pub seconds: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RaceSection {
    pub instances: usize,
    pub not_worse_fraction: f64,
    pub strictly_fewer_fraction: f64,
    pub max_oracle_gap: f64,
    /// `(plain, mixture)` iteration counts per instance.
    pub iterations: Vec<(usize, usize)>,
    pub seconds: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceSection {
    pub checks: usize,
    pub violations: usize,
    pub worst_gap: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryReport {
    pub seed: u64,
    pub gammas: Vec<f64>,
    pub contraction: ContractionSection,
    pub improvement: ImprovementSection,
    pub race: RaceSection,
    pub dominance: DominanceSection,
    pub pass: bool,
}

fn frac(k: usize, n: usize) -> f64 {
    if n == 0 {
        1.0
    } else {
        k as f64 / n as f64
    }
}

/// Runs the three suites on independent streams of `opts.seed`.
pub fn run_theory(opts: &TheoryOptions) -> qmp_core::Result<TheoryReport> {
    let t = Instant::now();
    let c = contraction_suite(
        opts.contraction_mdps,
        opts.contraction_pairs,
        &opts.gammas,
        &mut qmp_core::rng_stream(opts.seed, 0),
    )?;
    let contraction = ContractionSection {
        pairs: c.pairs,
        violations: c.violations,
        max_ratio: c.max_ratio,
        max_excess: c.max_excess,
        seconds: t.elapsed().as_secs_f64(),
        pass: c.violations == 0,
    };

    let t = Instant::now();
    let suite = ImprovementSuite { trials: opts.improvement_trials, gammas: opts.gammas.clone(), ..Default::default() };
    let imp = verify_improvement(&suite, &mut qmp_core::rng_stream(opts.seed, 1))?;
    let improvement = ImprovementSection {
        trials: imp.trials,
        improvement_fraction: frac(imp.improvement_holds, imp.trials),
        mixture_fraction: frac(imp.mixture_holds, imp.trials),
        worst_improvement_shortfall: imp.worst_improvement_shortfall,
        worst_mixture_shortfall: imp.worst_mixture_shortfall,
        violations: imp
            .violations
            .iter()
            .map(|v| ViolationEntry { trial: v.trial, stage: v.stage.into(), shortfall: v.shortfall, note: v.note.into() })
            .collect(),
        seconds: t.elapsed().as_secs_f64(),
        pass: imp.improvement_holds == imp.trials && frac(imp.mixture_holds, imp.trials) >= 0.95,
    };

    let t = Instant::now();
    let race_cfg = IterationRace { instances: opts.race_instances, gammas: opts.gammas.clone(), ..Default::default() };
    let r = iteration_race(&race_cfg, &mut qmp_core::rng_stream(opts.seed, 2))?;
    let race = RaceSection {
        instances: r.instances,
        not_worse_fraction: frac(r.not_worse, r.instances),
        strictly_fewer_fraction: frac(r.strictly_fewer, r.instances),
        max_oracle_gap: r.max_oracle_gap,
        iterations: r.iterations.clone(),
        seconds: t.elapsed().as_secs_f64(),
        pass: r.not_worse == r.instances && r.max_oracle_gap < race_cfg.accuracy,
    };

    let mut dom = imp.dominance;
    dom.merge(&r.dominance);
    let dominance = DominanceSection { checks: dom.checks, violations: dom.violations, worst_gap: dom.worst_gap, pass: dom.violations == 0 };
    let pass = contraction.pass && improvement.pass && race.pass && dominance.pass;
    Ok(TheoryReport { seed: opts.seed, gammas: opts.gammas.clone(), contraction, improvement, race, dominance, pass })
}
