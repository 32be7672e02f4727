//! Pipeline configuration, read from TOML.
//!
//! ```toml
//! layout = "canonical"
//! seed = 7
//! q.episodes = 5000
//! sweep.lambdas = [0, 0.25, 0.5, 1]
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use pacorch_core::bandit::CtsConfig;
use pacorch_core::irl::{ProjectionConfig, DEFAULT_TARGET_L1};
use pacorch_core::linear_q::QTrainConfig;

use crate::analysis::default_lambda_grid;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("{0}")]
    Syntax(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("`{key}`: cannot parse {value:?}")]
    BadValue { key: String, value: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoSettings {
    pub count: usize,
    pub error_rate: f64,
    pub max_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrlSettings {
    pub gamma: f64,
    pub rollouts: usize,
    pub max_steps: usize,
    pub projection: ProjectionConfig,
    pub target_l1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrchestratorSettings {
    pub train_games: usize,
    pub max_steps: usize,
    pub cts: CtsConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSettings {
    pub games: usize,
    pub max_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// `canonical` or a path to a layout file.
    pub layout: String,
    pub out: PathBuf,
    pub seed: u64,
    /// Shared by every policy trained in the pipeline; the seed field is
    /// ignored in favour of per-stage derived seeds.
    pub q: QTrainConfig,
    pub demos: DemoSettings,
    pub irl: IrlSettings,
    pub orchestrator: OrchestratorSettings,
    pub eval: EvalSettings,
    /// Declared lower bound on the steps needed to clear the maze.
    pub min_steps: usize,
    pub lambda_grid: Vec<f64>,
    pub write_traces: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            layout: pacorch_core::layouts::CANONICAL_NAME.into(),
            out: PathBuf::from("runs/default"),
            seed: 0,
            q: QTrainConfig::default(),
            demos: DemoSettings { count: 100, error_rate: 0.03, max_steps: 1000 },
            irl: IrlSettings {
                gamma: 0.99,
                rollouts: 100,
                max_steps: 400,
                projection: ProjectionConfig::default(),
                target_l1: DEFAULT_TARGET_L1,
            },
            orchestrator: OrchestratorSettings {
                train_games: 100,
                max_steps: 1000,
                cts: CtsConfig { r: 100.0, z: 1.0, gamma: 0.1 },
            },
            eval: EvalSettings { games: 100, max_steps: 1000 },
            min_steps: 100,
            lambda_grid: default_lambda_grid(),
            write_traces: true,
        }
    }
}

const KEYS: &[&str] = &[
    "layout",
    "out",
    "seed",
    "q.alpha",
    "q.alpha_decay_steps",
    "q.epsilon_start",
    "q.epsilon_end",
    "q.epsilon_anneal_fraction",
    "q.episodes",
    "q.gamma",
    "q.max_steps",
    "demos.count",
    "demos.error_rate",
    "demos.max_steps",
    "irl.gamma",
    "irl.rollouts",
    "irl.max_steps",
    "irl.tolerance",
    "irl.max_iterations",
    "irl.patience",
    "irl.target_l1",
    "orch.train_games",
    "orch.max_steps",
    "cts.r",
    "cts.z",
    "cts.gamma",
    "eval.games",
    "eval.max_steps",
    "bounds.min_steps",
    "sweep.lambdas",
    "sweep.write_traces",
];

/// Flattens nested tables into dotted keys with plain string values; arrays
/// become comma lists.
fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, String)>) -> Result<(), ConfigError> {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        let scalar = |v: &toml::Value| match v {
            toml::Value::String(s) => Ok(s.clone()),
            toml::Value::Integer(i) => Ok(i.to_string()),
            toml::Value::Float(f) => Ok(f.to_string()),
            toml::Value::Boolean(b) => Ok(b.to_string()),
            other => Err(ConfigError::BadValue { key: key.clone(), value: other.to_string() }),
        };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out)?,
            toml::Value::Array(items) => {
                let parts = items.iter().map(scalar).collect::<Result<Vec<_>, _>>()?;
                out.push((key.clone(), parts.join(", ")));
            }
            other => out.push((key.clone(), scalar(other)?)),
        }
    }
    Ok(())
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue { key: key.into(), value: value.into() })
}

impl PipelineConfig {
    /// Parses TOML config text on top of the defaults. Keys may be written
    /// dotted (`q.episodes = 500`) or as tables (`[q]` then `episodes = 500`).
    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
        let mut flat = Vec::new();
        flatten("", &table, &mut flat)?;
        let mut cfg = PipelineConfig::default();
        for (key, value) in flat {
            if !KEYS.contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey(key));
            }
            cfg.set(&key, &value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
        PipelineConfig::from_text(&text).map_err(|e| anyhow::anyhow!("config {}: {e}", path.display()))
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        match key {
            "layout" => self.layout = v.into(),
            "out" => self.out = PathBuf::from(v),
            "seed" => self.seed = parse(key, v)?,
            "q.alpha" => self.q.alpha = parse(key, v)?,
            "q.alpha_decay_steps" => self.q.alpha_decay_steps = parse(key, v)?,
            "q.epsilon_start" => self.q.epsilon_start = parse(key, v)?,
            "q.epsilon_end" => self.q.epsilon_end = parse(key, v)?,
            "q.epsilon_anneal_fraction" => self.q.epsilon_anneal_fraction = parse(key, v)?,
            "q.episodes" => self.q.episodes = parse(key, v)?,
            "q.gamma" => self.q.gamma = parse(key, v)?,
            "q.max_steps" => self.q.max_steps = parse(key, v)?,
            "demos.count" => self.demos.count = parse(key, v)?,
            "demos.error_rate" => self.demos.error_rate = parse(key, v)?,
            "demos.max_steps" => self.demos.max_steps = parse(key, v)?,
            "irl.gamma" => self.irl.gamma = parse(key, v)?,
            "irl.rollouts" => self.irl.rollouts = parse(key, v)?,
            "irl.max_steps" => self.irl.max_steps = parse(key, v)?,
            "irl.tolerance" => self.irl.projection.tolerance = parse(key, v)?,
            "irl.max_iterations" => self.irl.projection.max_iterations = parse(key, v)?,
            "irl.patience" => self.irl.projection.patience = parse(key, v)?,
            "irl.target_l1" => self.irl.target_l1 = parse(key, v)?,
            "orch.train_games" => self.orchestrator.train_games = parse(key, v)?,
            "orch.max_steps" => self.orchestrator.max_steps = parse(key, v)?,
            "cts.r" => self.orchestrator.cts.r = parse(key, v)?,
            "cts.z" => self.orchestrator.cts.z = parse(key, v)?,
            "cts.gamma" => self.orchestrator.cts.gamma = parse(key, v)?,
            "eval.games" => self.eval.games = parse(key, v)?,
            "eval.max_steps" => self.eval.max_steps = parse(key, v)?,
            "bounds.min_steps" => self.min_steps = parse(key, v)?,
            "sweep.lambdas" => {
                self.lambda_grid = v
                    .split(',')
                    .map(|s| s.trim())
                    .filter(|s| !s.is_empty())
                    .map(|s| parse(key, s))
                    .collect::<Result<_, _>>()?
            }
            "sweep.write_traces" => self.write_traces = parse(key, v)?,
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.into()));
        self.q.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.orchestrator.cts.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.lambda_grid.is_empty() {
            return bad("sweep.lambdas is empty");
        }
        if !self.lambda_grid.iter().all(|l| (0.0..=1.0).contains(l)) {
            return bad("sweep.lambdas must lie in [0, 1]");
        }
        if !self.lambda_grid.windows(2).all(|w| w[0] < w[1]) {
            return bad("sweep.lambdas must be sorted ascending and distinct");
        }
        if !(0.0..=1.0).contains(&self.demos.error_rate) {
            return bad("demos.error_rate outside [0, 1]");
        }
        if !(self.irl.gamma > 0.0 && self.irl.gamma < 1.0) {
            return bad("irl.gamma outside (0, 1)");
        }
        if self.demos.count == 0 || self.irl.rollouts == 0 || self.eval.games == 0 {
            return bad("counts must be positive");
        }
        if self.demos.max_steps == 0
            || self.irl.max_steps == 0
            || self.orchestrator.max_steps == 0
            || self.eval.max_steps == 0
        {
            return bad("step limits must be positive");
        }
        if !(self.irl.target_l1 > 0.0) {
            return bad("irl.target_l1 must be positive");
        }
        Ok(())
    }

    /// Value of `key` as written by [`to_text`](Self::to_text).
    pub fn get(&self, key: &str) -> String {
        match key {
            "layout" => self.layout.clone(),
            "out" => self.out.display().to_string(),
            "seed" => self.seed.to_string(),
            "q.alpha" => self.q.alpha.to_string(),
            "q.alpha_decay_steps" => self.q.alpha_decay_steps.to_string(),
            "q.epsilon_start" => self.q.epsilon_start.to_string(),
            "q.epsilon_end" => self.q.epsilon_end.to_string(),
            "q.epsilon_anneal_fraction" => self.q.epsilon_anneal_fraction.to_string(),
            "q.episodes" => self.q.episodes.to_string(),
            "q.gamma" => self.q.gamma.to_string(),
            "q.max_steps" => self.q.max_steps.to_string(),
            "demos.count" => self.demos.count.to_string(),
            "demos.error_rate" => self.demos.error_rate.to_string(),
            "demos.max_steps" => self.demos.max_steps.to_string(),
            "irl.gamma" => self.irl.gamma.to_string(),
            "irl.rollouts" => self.irl.rollouts.to_string(),
            "irl.max_steps" => self.irl.max_steps.to_string(),
            "irl.tolerance" => self.irl.projection.tolerance.to_string(),
            "irl.max_iterations" => self.irl.projection.max_iterations.to_string(),
            "irl.patience" => self.irl.projection.patience.to_string(),
            "irl.target_l1" => self.irl.target_l1.to_string(),
            "orch.train_games" => self.orchestrator.train_games.to_string(),
            "orch.max_steps" => self.orchestrator.max_steps.to_string(),
            "cts.r" => self.orchestrator.cts.r.to_string(),
            "cts.z" => self.orchestrator.cts.z.to_string(),
            "cts.gamma" => self.orchestrator.cts.gamma.to_string(),
            "eval.games" => self.eval.games.to_string(),
            "eval.max_steps" => self.eval.max_steps.to_string(),
            "bounds.min_steps" => self.min_steps.to_string(),
            "sweep.lambdas" => self.lambda_grid.iter().map(f64::to_string).collect::<Vec<_>>().join(", "),
            "sweep.write_traces" => self.write_traces.to_string(),
            _ => panic!("unknown config key {key}"),
        }
    }

    /// Every key in canonical order as dotted TOML; parses back to an equal
    /// config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for k in KEYS {
            let v = match *k {
                "layout" | "out" => toml::Value::String(self.get(k)).to_string(),
                "sweep.lambdas" => format!("[{}]", self.get(k)),
                _ => self.get(k),
            };
            writeln!(s, "{k} = {v}").unwrap();
        }
        s
    }

    /// `key = value` lines for the given keys, used to fingerprint stages.
    pub fn slice(&self, keys: &[&str]) -> String {
        keys.iter().map(|k| format!("{k}={}\n", self.get(k))).collect()
    }
}

pub fn all_keys() -> &'static [&'static str] {
    KEYS
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trips() {
        let mut cfg = PipelineConfig::default();
        cfg.seed = 42;
        cfg.q.alpha = 0.1 + 0.2;
        cfg.lambda_grid = vec![0.0, 0.215, 1.0];
        let back = PipelineConfig::from_text(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn bad_text_is_rejected() {
        assert!(matches!(PipelineConfig::from_text("seed = 1\nnope"), Err(ConfigError::Syntax(_))));
        assert!(matches!(PipelineConfig::from_text("seed = 1\nseed = 2"), Err(ConfigError::Syntax(_))));
        assert_eq!(PipelineConfig::from_text("# c\nfoo = 1"), Err(ConfigError::UnknownKey("foo".into())));
        assert_eq!(PipelineConfig::from_text("[q]\nfoo = 1"), Err(ConfigError::UnknownKey("q.foo".into())));
        assert!(matches!(PipelineConfig::from_text("seed = \"x\""), Err(ConfigError::BadValue { .. })));
        assert!(matches!(PipelineConfig::from_text("q.episodes = 2.5"), Err(ConfigError::BadValue { .. })));
    }

    #[test]
    fn tables_and_dotted_keys_agree() {
        let a = PipelineConfig::from_text("[q]\nepisodes = 500\nalpha = 0.1\n[sweep]\nlambdas = [0, 0.5, 1]").unwrap();
        let b = PipelineConfig::from_text("q.episodes = 500\nq.alpha = 0.1\nsweep.lambdas = [0.0, 0.5, 1.0]").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.q.episodes, 500);
        assert_eq!(a.lambda_grid, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn lambda_grid_must_be_sorted() {
        assert!(matches!(PipelineConfig::from_text("sweep.lambdas = [0.5, 0.2]"), Err(ConfigError::Invalid(_))));
        assert!(matches!(PipelineConfig::from_text("sweep.lambdas = [0.2, 0.2]"), Err(ConfigError::Invalid(_))));
        assert!(matches!(PipelineConfig::from_text("sweep.lambdas = [0, 1.5]"), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn every_key_is_settable() {
        let cfg = PipelineConfig::default();
        for k in all_keys() {
            let mut c = cfg.clone();
            c.set(k, &cfg.get(k)).unwrap();
            assert_eq!(c, cfg, "{k}");
        }
    }
}
