use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};

use clap::{Parser, Subcommand};

use qmp::metrics::{read_metrics, MetricsError};
use qmp::plot::{learning_curves, mixture_series, render};
use qmp::theory::{run_theory, TheoryOptions};
use qmp::{evaluate_checkpoint, output_dir, run_seed, ExperimentFile, RunError};

#[derive(Parser)]
#[command(name = "qmp", version, about = "Multi-task SAC with Q-switch behavior sharing")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train every seed of an experiment file.
    Run {
        config: PathBuf,
        /// Run only this seed (must be listed in the file).
        #[arg(long)]
        seed: Option<u64>,
        /// Seeds run concurrently as child processes.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Overrides `run.output_dir`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Tabular contraction, improvement and convergence checks.
    VerifyTheory {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        contraction_mdps: usize,
        #[arg(long, default_value_t = 5)]
        contraction_pairs: usize,
        #[arg(long, default_value_t = 100)]
        improvement_trials: usize,
        #[arg(long, default_value_t = 50)]
        race_instances: usize,
        /// Discounts used in rotation (default 0.5, 0.9, 0.95).
        #[arg(long, value_delimiter = ',')]
        gamma: Vec<f64>,
        /// JSON report path; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Learning curves and selection proportions from metrics CSVs.
    Plot {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Reload a checkpoint and re-run evaluation.
    Eval {
        config: PathBuf,
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        episodes: Option<usize>,
    },
}

/// Exit status with a message for stderr.
struct Failure(u8, String);

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        Failure(e.exit_code() as u8, e.to_string())
    }
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure(3, e.to_string())
}

fn load(path: &Path) -> Result<ExperimentFile, Failure> {
    ExperimentFile::load(path).map_err(|e| Failure(1, format!("{}: {e}", path.display())))
}

fn cmd_run(config: &Path, seed: Option<u64>, jobs: usize, output: Option<PathBuf>) -> Result<(), Failure> {
    let file = load(config)?;
    let dir = output.unwrap_or_else(|| output_dir(&file));
    let seeds = match seed {
        Some(s) if file.run.seeds.contains(&s) => vec![s],
        Some(s) => return Err(Failure(1, format!("seed {s} is not listed in run.seeds"))),
        None => file.run.seeds.clone(),
    };
    if jobs > 1 && seeds.len() > 1 {
        return run_children(config, &seeds, jobs, &dir);
    }
    for s in seeds {
        let summary = run_seed(&file, s, &dir)?;
        let e = &summary.final_eval;
        println!(
            "{} seed {}: success {:.3} return {:.3} -> {}",
            summary.label,
            s,
            e.mean_success(),
            e.mean_return(),
            summary.metrics.display()
        );
    }
    Ok(())
}

/// One child process per seed, at most `jobs` alive at once.
fn run_children(config: &Path, seeds: &[u64], jobs: usize, dir: &Path) -> Result<(), Failure> {
    let exe = std::env::current_exe().map_err(runtime)?;
    let mut pending = seeds.iter().copied();
    let mut running = Vec::new();
    let mut worst = 0u8;
    loop {
        while running.len() < jobs {
            let Some(s) = pending.next() else { break };
            let child = Command::new(&exe)
                .arg("run")
                .arg(config)
                .args(["--seed", &s.to_string(), "--output"])
                .arg(dir)
                .spawn()
                .map_err(runtime)?;
            running.push((s, child));
        }
        if running.is_empty() {
            break;
        }
        let (s, mut child) = running.remove(0);
        let status = child.wait().map_err(runtime)?;
        if !status.success() {
            let code = status.code().unwrap_or(3).clamp(1, 3) as u8;
            log::error!("seed {s} exited with {code}");
            worst = worst.max(code);
        }
    }
    match worst {
        0 => Ok(()),
        c => Err(Failure(c, "one or more seeds failed".into())),
    }
}

fn cmd_verify(opts: TheoryOptions, out: Option<PathBuf>) -> Result<(), Failure> {
    let report = run_theory(&opts).map_err(|e| match e {
        qmp_core::Error::Contract(_) => Failure(2, e.to_string()),
        _ => runtime(e),
    })?;
    let json = serde_json::to_string_pretty(&report).map_err(runtime)?;
    match out {
        Some(p) => std::fs::write(&p, json + "\n").map_err(runtime)?,
        None => println!("{json}"),
    }
    eprintln!(
        "contraction {} | improvement {} | race {} | dominance {}",
        verdict(report.contraction.pass),
        verdict(report.improvement.pass),
        verdict(report.race.pass),
        verdict(report.dominance.pass)
    );
    if report.pass {
        Ok(())
    } else {
        Err(Failure(2, "theory invariants failed".into()))
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

fn cmd_plot(csvs: &[PathBuf], out: &Path) -> Result<(), Failure> {
    let mut rows = Vec::new();
    let mut width = None;
    for p in csvs {
        let f = std::fs::File::open(p).map_err(|e| Failure(1, format!("{}: {e}", p.display())))?;
        let part = read_metrics(f, &p.display().to_string()).map_err(|e| match e {
            MetricsError::Schema { .. } | MetricsError::Value { .. } => Failure(1, e.to_string()),
            _ => runtime(e),
        })?;
        if let Some(k) = part.first().map(|r| r.selection.len()) {
            if width.is_some_and(|w| w != k) {
                return Err(Failure(1, format!("{}: {k} selection columns, earlier files have {}", p.display(), width.unwrap_or(0))));
            }
            width = Some(k);
        }
        rows.extend(part);
    }
    let svg = render(&learning_curves(&rows), &mixture_series(&rows));
    std::fs::write(out, svg).map_err(runtime)
}

fn cmd_eval(config: &Path, checkpoint: &Path, seed: u64, episodes: Option<usize>) -> Result<(), Failure> {
    let file = load(config)?;
    let report = evaluate_checkpoint(&file, seed, checkpoint, episodes)?;
    for (task, t) in report.tasks.iter().enumerate() {
        println!("task {task}: success {:.3} return {:.3}", t.success_rate, t.mean_return);
    }
    println!("mean: success {:.3} return {:.3}", report.mean_success(), report.mean_return());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Run { config, seed, jobs, output } => cmd_run(&config, seed, jobs.max(1), output),
        Cmd::VerifyTheory { seed, contraction_mdps, contraction_pairs, improvement_trials, race_instances, gamma, out } => {
            let mut opts = TheoryOptions { seed, contraction_mdps, contraction_pairs, improvement_trials, race_instances, ..Default::default() };
            if !gamma.is_empty() {
                opts.gammas = gamma;
            }
            cmd_verify(opts, out)
        }
        Cmd::Plot { csv, out } => cmd_plot(&csv, &out),
        Cmd::Eval { config, checkpoint, seed, episodes } => cmd_eval(&config, &checkpoint, seed, episodes),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
