use std::path::Path;
use std::process::{Command, Output};

fn qmp(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qmp"));
    cmd.args(args).env_remove("QMP_OUTPUT_ROOT");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const TINY: &str = r#"
[env]
name = "multistage"
max_episode_steps = 20

[method]
name = "qmp"
hold = 2

[sac]
hidden = [8]
batch_size = 16
env_steps_per_update = 20
grad_steps_per_update = 3
min_buffer = 20

[run]
epochs = 3
seeds = [4, 5]
eval_interval = 1
eval_episodes = 1
output_dir = "out"
checkpoint_interval = 2
"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn run_plot_and_eval_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "tiny.toml", TINY);
    let out = tmp.path().join("runs");
    let o = qmp(&["run", &cfg, "--output", out.to_str().unwrap()], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 2);

    for seed in [4, 5] {
        assert!(out.join(format!("qmp_seed{seed}.csv")).is_file());
        assert!(out.join(format!("qmp_seed{seed}.ckpt")).is_file());
        assert!(out.join(format!("qmp_seed{seed}_epoch2.ckpt")).is_file());
    }
    let svg = tmp.path().join("curves.svg");
    let o = qmp(
        &["plot", out.join("qmp_seed4.csv").to_str().unwrap(), out.join("qmp_seed5.csv").to_str().unwrap(), "--out", svg.to_str().unwrap()],
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));

    let ckpt = out.join("qmp_seed4.ckpt");
    let o = qmp(&["eval", &cfg, ckpt.to_str().unwrap(), "--seed", "4", "--episodes", "2"], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.starts_with("task ")).count(), 5);
    assert!(text.lines().last().unwrap().starts_with("mean: success"));
}

#[test]
fn parallel_seeds_match_sequential_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "tiny.toml", TINY);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(qmp(&["run", &cfg, "--output", a.to_str().unwrap()], &[]).status.success());
    assert!(qmp(&["run", &cfg, "--jobs", "2", "--output", b.to_str().unwrap()], &[]).status.success());
    for seed in [4, 5] {
        let name = format!("qmp_seed{seed}.csv");
        assert_eq!(std::fs::read(a.join(&name)).unwrap(), std::fs::read(b.join(&name)).unwrap());
    }
}

#[test]
fn output_root_variable_relocates_relative_dirs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "tiny.toml", TINY);
    let o = qmp(&["run", &cfg, "--seed", "5"], &[("QMP_OUTPUT_ROOT", tmp.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(tmp.path().join("out/qmp_seed5.csv").is_file());
    assert!(!tmp.path().join("out/qmp_seed4.csv").exists());
}

#[test]
fn config_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let bad_key = write(tmp.path(), "a.toml", &TINY.replace("hold = 2", "hold = 2\nholdd = 3"));
    let bad_value = write(tmp.path(), "b.toml", &TINY.replace("hold = 2", "hold = 0"));
    let missing = tmp.path().join("missing.toml");
    for cfg in [bad_key.as_str(), bad_value.as_str(), missing.to_str().unwrap()] {
        let o = qmp(&["run", cfg], &[]);
        assert_eq!(o.status.code(), Some(1), "{cfg}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = qmp(&["run", &write(tmp.path(), "c.toml", TINY), "--seed", "9"], &[]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn malformed_metrics_are_rejected_by_plot() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = write(tmp.path(), "bad.csv", "method,seed,epoch\nqmp,0,1\n");
    let o = qmp(&["plot", &csv, "--out", tmp.path().join("x.svg").to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.csv"));
}

#[test]
fn eval_rejects_checkpoint_of_another_shape() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "tiny.toml", TINY);
    let out = tmp.path().join("runs");
    assert!(qmp(&["run", &cfg, "--seed", "4", "--output", out.to_str().unwrap()], &[]).status.success());
    let wide = write(tmp.path(), "wide.toml", &TINY.replace("hidden = [8]", "hidden = [12]"));
    let o = qmp(&["eval", &wide, out.join("qmp_seed4.ckpt").to_str().unwrap(), "--seed", "4"], &[]);
    assert!(!o.status.success());
}

#[test]
fn verify_theory_writes_a_passing_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("theory.json");
    let o = qmp(
        &[
            "verify-theory",
            "--contraction-mdps",
            "10",
            "--improvement-trials",
            "5",
            "--race-instances",
            "3",
            "--gamma",
            "0.5,0.9",
            "--out",
            out.to_str().unwrap(),
        ],
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["pass"], serde_json::Value::Bool(true));
    assert_eq!(report["gammas"], serde_json::json!([0.5, 0.9]));
}
