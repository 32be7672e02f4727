use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use pacorch::analysis::{compute_score_upper_bounds, find_tipping_point};
use pacorch::config::PipelineConfig;
use pacorch::formats::{read_policy, write_json, PolicyStatsFile};
use pacorch::pipeline::{load_layout, Pipeline};
use pacorch_core::env::RewardWeights;
use pacorch_core::irl::{cosine, format_weights};

#[derive(Parser)]
#[command(
    name = "pacorch",
    version,
    about = "Learn a ghost-avoidance constraint from demonstrations and blend it with a reward policy"
)]
struct Cli {
    /// Config file with `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Built-in layout name or layout file.
    #[arg(long, global = true)]
    layout: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for stage artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Evaluation games.
    #[arg(long, global = true)]
    games: Option<usize>,
    /// Override any config key, e.g. `--set q.episodes=500`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum IrlSource {
    /// Noisy demos of the ghost-averse expert.
    Constrained,
    /// Demos of the reward policy; checks recovery of the native weights.
    Optimal,
}

#[derive(Subcommand)]
enum Command {
    /// Train the reward policy on the native game points.
    TrainRl,
    /// Train the ghost-averse expert and record demonstrations.
    GenDemos,
    /// Learn reward weights from demonstrations.
    Irl {
        #[arg(long, value_enum, default_value = "constrained")]
        source: IrlSource,
    },
    /// Train the constrained policy on the learned weights.
    TrainConstrained,
    /// Train and evaluate the orchestrator for one lambda.
    Orchestrate {
        #[arg(long)]
        lambda: f64,
    },
    /// Run the lambda sweep and write sweep/sweep.csv.
    Sweep,
    /// Evaluate a policy greedily.
    Evaluate {
        /// `reward`, `constrained` or a policy file.
        #[arg(long, default_value = "reward")]
        policy: String,
    },
    /// Print the score upper bounds of the layout.
    Bounds,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(l) = &cli.layout {
        cfg.layout = l.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(g) = cli.games {
        cfg.eval.games = g;
    }
    for o in &cli.overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| anyhow!("--set expects KEY=VALUE, got {o:?}"))?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_irl(label: &str, w: &RewardWeights, status: &str, iterations: usize) {
    println!("{label}: {} ({status} after {iterations} iterations)", format_weights(&w.w));
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    if let Command::Bounds = cli.command {
        let (layout, id, _) = load_layout(&cfg.layout)?;
        let b = compute_score_upper_bounds(&layout, cfg.min_steps).context("stage bounds")?;
        println!("layout {id}: max_score {} max_score_no_ghosts {}", b.max_score, b.max_score_no_ghosts);
        return Ok(());
    }
    let mut p = Pipeline::open(cfg)?;
    match cli.command {
        Command::TrainRl => {
            p.reward_policy()?;
        }
        Command::GenDemos => {
            let demos = p.constrained_demos()?;
            println!("{} demonstrations in {}", demos.len(), p.stage_dir("gen-demos").display());
        }
        Command::Irl { source } => match source {
            IrlSource::Constrained => {
                let o = p.learned_constraint()?;
                print_irl("learned weights", &o.weights, &o.result.status, o.result.iterations);
            }
            IrlSource::Optimal => {
                let o = p.irl_on_reward_demos()?;
                print_irl("recovered weights", &o.weights, &o.result.status, o.result.iterations);
                let native = pacorch_core::env::NATIVE_WEIGHTS;
                println!("cosine with native weights: {:.4}", cosine(&o.weights.w, &native.w));
            }
        },
        Command::TrainConstrained => {
            p.constrained_policy()?;
        }
        Command::Orchestrate { lambda } => {
            let o = p.orchestrate(lambda)?;
            let m = &o.metrics;
            println!(
                "lambda {lambda:.4}: avg_score {:.2} avg_ghosts_eaten {:.4} win_rate {:.4} over {} games",
                m.avg_score, m.avg_ghosts_eaten, m.win_rate, m.games
            );
        }
        Command::Sweep => {
            let rows = p.sweep()?;
            print!("{}", pacorch::analysis::sweep_csv(&rows)?);
            match find_tipping_point(&rows) {
                Some((lo, hi)) => println!("tipping point between lambda {lo:.4} and {hi:.4}"),
                None => println!("no tipping point in the grid"),
            }
        }
        Command::Evaluate { policy } => {
            let (name, pol) = match policy.as_str() {
                "reward" => ("reward".to_string(), p.reward_policy()?),
                "constrained" => ("constrained".to_string(), p.constrained_policy()?),
                file => {
                    let path = PathBuf::from(file);
                    let pol = read_policy(&path).with_context(|| format!("stage evaluate: {file}"))?;
                    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                    (stem, pol)
                }
            };
            let stats = p.evaluate(&pol)?;
            let path = p.stage_dir("evaluate").join(format!("{name}.json"));
            write_json(&path, &PolicyStatsFile::from(&stats)).context("stage evaluate")?;
            println!(
                "{name}: avg_score {:.2} (min {} max {}) avg_ghosts_eaten {:.4} win_rate {:.4} avg_steps {:.1} over {} games",
                stats.avg_score,
                stats.min_score,
                stats.max_score,
                stats.avg_ghosts_eaten,
                stats.win_rate,
                stats.avg_steps,
                stats.games
            );
        }
        Command::Bounds => unreachable!("handled above"),
    }
    for r in p.runs() {
        log::debug!("{} {:?}", r.stage, r.status);
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
