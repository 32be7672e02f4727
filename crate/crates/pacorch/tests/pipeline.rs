use std::path::{Path, PathBuf};
use std::process::Command;

use pacorch::config::PipelineConfig;
use pacorch::pipeline::{lambda_stage, run_pipeline, StageStatus};

fn small_layout() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/small.lay").display().to_string()
}

const SMALL: &str = "q.episodes = 300
demos.count = 10
irl.rollouts = 10
irl.max_iterations = 4
orch.train_games = 10
eval.games = 10
sweep.lambdas = [0, 0.5, 1]
";

fn small_config(out: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig::from_text(SMALL).unwrap();
    cfg.layout = small_layout();
    cfg.out = out.to_path_buf();
    cfg
}

fn statuses(p: &pacorch::Pipeline) -> Vec<(String, StageStatus)> {
    p.runs().iter().map(|r| (r.stage.clone(), r.status)).collect()
}

#[test]
fn second_run_reuses_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    let (p1, rows1) = run_pipeline(small_config(dir.path())).unwrap();
    assert!(p1.runs().iter().all(|r| r.status == StageStatus::Ran));
    let csv1 = std::fs::read(p1.sweep_csv_path()).unwrap();
    let (p2, rows2) = run_pipeline(small_config(dir.path())).unwrap();
    assert!(p2.runs().iter().all(|r| r.status == StageStatus::Reused), "{:?}", statuses(&p2));
    assert_eq!(rows1, rows2);
    assert_eq!(std::fs::read(p2.sweep_csv_path()).unwrap(), csv1);
}

#[test]
fn deleting_a_stage_reruns_only_that_stage() {
    let dir = tempfile::tempdir().unwrap();
    let (p1, _) = run_pipeline(small_config(dir.path())).unwrap();
    let csv1 = std::fs::read(p1.sweep_csv_path()).unwrap();
    std::fs::remove_dir_all(dir.path().join("train-constrained")).unwrap();
    let (p2, _) = run_pipeline(small_config(dir.path())).unwrap();
    for (stage, status) in statuses(&p2) {
        // Same seeds give identical bytes, so dependents stay valid.
        assert_eq!(status == StageStatus::Ran, stage == "train-constrained", "{stage}");
    }
    assert_eq!(std::fs::read(p2.sweep_csv_path()).unwrap(), csv1);
}

#[test]
fn editing_an_artifact_reruns_its_dependents() {
    let dir = tempfile::tempdir().unwrap();
    run_pipeline(small_config(dir.path())).unwrap();
    let policy = dir.path().join("train-constrained/policy.json");
    let mut p = pacorch::formats::read_policy(&policy).unwrap();
    let mut theta = *p.theta();
    theta[0] += 1.0;
    p = pacorch_core::linear_q::LinearQPolicy::new(theta, p.gamma()).unwrap();
    pacorch::formats::write_policy(&policy, &p).unwrap();
    let (p2, _) = run_pipeline(small_config(dir.path())).unwrap();
    for (stage, status) in statuses(&p2) {
        assert_eq!(status == StageStatus::Ran, stage.starts_with("orchestrate/"), "{stage}");
    }
}

#[test]
fn changing_a_config_key_invalidates_downstream_stages() {
    let dir = tempfile::tempdir().unwrap();
    run_pipeline(small_config(dir.path())).unwrap();
    let mut cfg = small_config(dir.path());
    cfg.orchestrator.cts.r = 50.0;
    let (p, _) = run_pipeline(cfg).unwrap();
    for (stage, status) in statuses(&p) {
        assert_eq!(status == StageStatus::Ran, stage.starts_with("orchestrate/"), "{stage}");
    }
}

#[test]
fn stale_schema_on_resume_names_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    run_pipeline(small_config(dir.path())).unwrap();
    let policy = dir.path().join("train-rl/policy.json");
    let text =
        std::fs::read_to_string(&policy).unwrap().replace("\"featureSchemaId\": \"", "\"featureSchemaId\": \"old-");
    std::fs::write(&policy, text).unwrap();
    let err = run_pipeline(small_config(dir.path())).err().expect("stale schema must fail");
    let msg = format!("{err:#}");
    assert!(msg.contains("stage train-rl") && msg.contains("old-"), "{msg}");
}

#[test]
fn orchestrate_rejects_lambda_outside_unit_interval() {
    let dir = tempfile::tempdir().unwrap();
    let mut p = pacorch::Pipeline::open(small_config(dir.path())).unwrap();
    assert!(p.orchestrate(1.5).is_err());
    assert_eq!(lambda_stage(0.5), "orchestrate/lambda-0.5000");
}

fn cli(out: &Path, args: &[&str]) -> std::process::Output {
    let cfg = out.join("small.cfg");
    std::fs::write(&cfg, SMALL).unwrap();
    Command::new(env!("CARGO_BIN_EXE_pacorch"))
        .args(["--config", cfg.to_str().unwrap(), "--layout", &small_layout(), "--out"])
        .arg(out.join("run"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

#[test]
fn cli_runs_each_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let run: PathBuf = dir.path().join("run");
    for args in [
        &["train-rl"][..],
        &["gen-demos"],
        &["irl"],
        &["irl", "--source", "optimal"],
        &["train-constrained"],
        &["orchestrate", "--lambda", "0.5"],
        &["evaluate", "--policy", "constrained"],
        &["sweep"],
        &["bounds", "--set", "bounds.min_steps=20"],
    ] {
        let out = cli(dir.path(), args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    for artifact in [
        "manifest.json",
        "train-rl/policy.json",
        "train-rl/training_log.csv",
        "gen-demos/demos.jsonl",
        "irl/weights.json",
        "irl-optimal/weights.json",
        "train-constrained/policy.json",
        "orchestrate/lambda-0.5000/bandit.json",
        "orchestrate/lambda-0.5000/trace.jsonl",
        "evaluate/constrained.json",
        "sweep/sweep.csv",
    ] {
        assert!(run.join(artifact).exists(), "{artifact}");
    }
    let csv = std::fs::read_to_string(run.join("sweep/sweep.csv")).unwrap();
    assert!(csv.starts_with("lambda,avg_score,avg_ghosts_eaten,win_rate,games\n"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn cli_errors_exit_nonzero_with_stage_name() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(dir.path(), &["bounds"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage bounds"));
    let out = cli(dir.path(), &["sweep", "--set", "no.such.key=1"]);
    assert!(!out.status.success());
}
