//! On-disk records: policies, reward weights, trajectories, bandit
//! snapshots, arm traces and evaluation metrics.
//!
//! Everything is JSON (or JSON lines). Floats are written with the shortest
//! representation that reads back to the same bits.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use pacorch_core::bandit::{BanditArmState, ContextualThompson, CtsConfig};
use pacorch_core::env::{Direction, EventFeatures, Provenance, RewardWeights};
use pacorch_core::irl::IrlResult;
use pacorch_core::linear_q::{LinearQPolicy, FEATURE_SCHEMA_ID};
use pacorch_core::orchestrator::{ArmTrace, EvalMetrics};
use pacorch_core::rollout::{PolicyStats, Trajectory, TrajectoryStep};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Identifies the event vector `(dotsEaten, won, ghostsEaten, lost)`.
pub const EVENT_SCHEMA_ID: &str = "pacman-phi-v1";

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: malformed JSON: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("{path}: stale schema: expected {expected}, found {found}")]
    Schema { path: String, expected: String, found: String },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FormatError + '_ {
    move |source| FormatError::Io { path: path.display().to_string(), source }
}

fn invalid(path: &Path, message: impl Into<String>) -> FormatError {
    FormatError::Invalid { path: path.display().to_string(), message: message.into() }
}

/// Writes `value` as pretty JSON via a temporary file and rename.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|source| FormatError::Json { path: path.display().to_string(), source })?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), FormatError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, FormatError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| FormatError::Json { path: path.display().to_string(), source })
}

fn write_lines<T: Serialize>(path: &Path, records: impl IntoIterator<Item = T>) -> Result<(), FormatError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let tmp = path.with_extension("tmp");
    let mut w = BufWriter::new(File::create(&tmp).map_err(io_err(&tmp))?);
    for r in records {
        serde_json::to_writer(&mut w, &r)
            .map_err(|source| FormatError::Json { path: path.display().to_string(), source })?;
        w.write_all(b"\n").map_err(io_err(&tmp))?;
    }
    w.flush().map_err(io_err(&tmp))?;
    drop(w);
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn read_lines<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, FormatError> {
    let f = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|source| FormatError::Json { path: format!("{}:{}", path.display(), i + 1), source })?,
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PolicyFile {
    pub feature_schema_id: String,
    pub gamma: f64,
    pub theta: Vec<f64>,
}

impl From<&LinearQPolicy> for PolicyFile {
    fn from(p: &LinearQPolicy) -> Self {
        PolicyFile { feature_schema_id: p.schema_id().into(), gamma: p.gamma(), theta: p.theta().to_vec() }
    }
}

pub fn write_policy(path: &Path, policy: &LinearQPolicy) -> Result<(), FormatError> {
    write_json(path, &PolicyFile::from(policy))
}

pub fn read_policy(path: &Path) -> Result<LinearQPolicy, FormatError> {
    let f: PolicyFile = read_json(path)?;
    if f.feature_schema_id != FEATURE_SCHEMA_ID {
        return Err(FormatError::Schema {
            path: path.display().to_string(),
            expected: FEATURE_SCHEMA_ID.into(),
            found: f.feature_schema_id,
        });
    }
    LinearQPolicy::from_parts(&f.feature_schema_id, f.gamma, &f.theta).map_err(|e| invalid(path, e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WeightsFile {
    pub event_schema_id: String,
    pub provenance: String,
    pub weights: Vec<f64>,
}

impl From<&RewardWeights> for WeightsFile {
    fn from(w: &RewardWeights) -> Self {
        WeightsFile {
            event_schema_id: EVENT_SCHEMA_ID.into(),
            provenance: w.provenance.as_str().into(),
            weights: w.w.to_vec(),
        }
    }
}

pub fn write_weights(path: &Path, w: &RewardWeights) -> Result<(), FormatError> {
    write_json(path, &WeightsFile::from(w))
}

pub fn read_weights(path: &Path) -> Result<RewardWeights, FormatError> {
    let f: WeightsFile = read_json(path)?;
    if f.event_schema_id != EVENT_SCHEMA_ID {
        return Err(FormatError::Schema {
            path: path.display().to_string(),
            expected: EVENT_SCHEMA_ID.into(),
            found: f.event_schema_id,
        });
    }
    let provenance = Provenance::parse(&f.provenance)
        .ok_or_else(|| invalid(path, format!("unknown provenance {:?}", f.provenance)))?;
    let w: [f64; 4] = f.weights.as_slice().try_into().map_err(|_| invalid(path, "expected 4 weights"))?;
    let rw = RewardWeights::new(w, provenance);
    if !rw.is_finite() || rw.is_zero() {
        return Err(invalid(path, "weights must be finite and non-zero"));
    }
    Ok(rw)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrajectoryRecord {
    pub layout_id: String,
    pub seed: u64,
    pub actions: Vec<String>,
    pub phi: Vec<[f64; 4]>,
}

impl From<&Trajectory> for TrajectoryRecord {
    fn from(t: &Trajectory) -> Self {
        TrajectoryRecord {
            layout_id: t.layout_id.clone(),
            seed: t.seed,
            actions: t.steps.iter().map(|s| s.action.letter().to_string()).collect(),
            phi: t.steps.iter().map(|s| s.phi.0).collect(),
        }
    }
}

impl TrajectoryRecord {
    pub fn into_trajectory(self) -> Result<Trajectory, String> {
        if self.actions.len() != self.phi.len() {
            return Err(format!("{} actions but {} event vectors", self.actions.len(), self.phi.len()));
        }
        let steps = self
            .actions
            .iter()
            .zip(self.phi)
            .map(|(a, phi)| {
                let mut chars = a.chars();
                match (chars.next().and_then(Direction::from_letter), chars.next()) {
                    (Some(action), None) => Ok(TrajectoryStep { action, phi: EventFeatures(phi) }),
                    _ => Err(format!("bad action {a:?}")),
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Trajectory { layout_id: self.layout_id, seed: self.seed, steps })
    }
}

pub fn write_trajectories(path: &Path, trajectories: &[Trajectory]) -> Result<(), FormatError> {
    write_lines(path, trajectories.iter().map(TrajectoryRecord::from))
}

pub fn read_trajectories(path: &Path) -> Result<Vec<Trajectory>, FormatError> {
    read_lines::<TrajectoryRecord>(path)?
        .into_iter()
        .map(|r| r.into_trajectory().map_err(|m| invalid(path, m)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ArmRecord {
    /// Row-major.
    pub b: Vec<f64>,
    pub f: Vec<f64>,
    pub pull_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BanditSnapshot {
    pub d: usize,
    pub k: usize,
    pub r: f64,
    pub z: f64,
    pub gamma: f64,
    pub arms: Vec<ArmRecord>,
}

impl From<&ContextualThompson> for BanditSnapshot {
    fn from(b: &ContextualThompson) -> Self {
        let c = b.config();
        BanditSnapshot {
            d: b.dim(),
            k: b.arms().len(),
            r: c.r,
            z: c.z,
            gamma: c.gamma,
            arms: b
                .arms()
                .iter()
                .map(|a| ArmRecord { b: a.b().to_vec(), f: a.f().to_vec(), pull_count: a.pull_count() })
                .collect(),
        }
    }
}

impl BanditSnapshot {
    pub fn restore(self) -> Result<ContextualThompson, String> {
        if self.arms.len() != self.k {
            return Err(format!("K = {} but {} arms stored", self.k, self.arms.len()));
        }
        let arms = self
            .arms
            .into_iter()
            .map(|a| BanditArmState::from_parts(self.d, a.b, a.f, a.pull_count))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        ContextualThompson::from_arms(CtsConfig { r: self.r, z: self.z, gamma: self.gamma }, arms)
            .map_err(|e| e.to_string())
    }
}

pub fn write_bandit(path: &Path, bandit: &ContextualThompson) -> Result<(), FormatError> {
    write_json(path, &BanditSnapshot::from(bandit))
}

pub fn read_bandit(path: &Path) -> Result<ContextualThompson, FormatError> {
    read_json::<BanditSnapshot>(path)?.restore().map_err(|m| invalid(path, m))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceRecord {
    pub game: usize,
    pub t: usize,
    pub arm: usize,
    pub scared_present: u8,
    pub context: [f64; 2],
    pub action: String,
    pub phi: [f64; 4],
}

pub fn write_traces(path: &Path, traces: &[ArmTrace]) -> Result<(), FormatError> {
    write_lines(
        path,
        traces.iter().flat_map(|tr| {
            tr.steps.iter().map(move |s| TraceRecord {
                game: tr.game,
                t: s.t,
                arm: s.arm,
                scared_present: s.scared_present as u8,
                context: s.context,
                action: s.action.letter().to_string(),
                phi: s.phi.0,
            })
        }),
    )
}

pub fn read_trace_records(path: &Path) -> Result<Vec<TraceRecord>, FormatError> {
    read_lines(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MetricsFile {
    pub lambda: f64,
    pub games: usize,
    pub avg_score: f64,
    pub avg_ghosts_eaten: f64,
    pub win_rate: f64,
    /// `[scaredPresent][arm]` step counts.
    pub arm_usage: [[u64; 2]; 2],
}

impl MetricsFile {
    pub fn new(lambda: f64, m: &EvalMetrics) -> Self {
        MetricsFile {
            lambda,
            games: m.games,
            avg_score: m.avg_score,
            avg_ghosts_eaten: m.avg_ghosts_eaten,
            win_rate: m.win_rate,
            arm_usage: m.arm_usage,
        }
    }

    pub fn metrics(&self) -> EvalMetrics {
        EvalMetrics {
            games: self.games,
            avg_score: self.avg_score,
            avg_ghosts_eaten: self.avg_ghosts_eaten,
            win_rate: self.win_rate,
            arm_usage: self.arm_usage,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PolicyStatsFile {
    pub games: usize,
    pub avg_score: f64,
    pub max_score: i64,
    pub min_score: i64,
    pub avg_ghosts_eaten: f64,
    pub win_rate: f64,
    pub avg_steps: f64,
}

impl From<&PolicyStats> for PolicyStatsFile {
    fn from(s: &PolicyStats) -> Self {
        PolicyStatsFile {
            games: s.games,
            avg_score: s.avg_score,
            max_score: s.max_score,
            min_score: s.min_score,
            avg_ghosts_eaten: s.avg_ghosts_eaten,
            win_rate: s.win_rate,
            avg_steps: s.avg_steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IrlCandidateRecord {
    pub weights: [f64; 4],
    pub margin: f64,
    pub mu: [f64; 4],
    pub distance: f64,
}

/// Full IRL outcome, kept for inspection next to the selected weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IrlResultFile {
    pub gamma: f64,
    pub expert_mu: [f64; 4],
    pub baseline_mu: [f64; 4],
    pub status: String,
    pub iterations: usize,
    pub final_margin: f64,
    pub selected: usize,
    pub provenance: String,
    pub candidates: Vec<IrlCandidateRecord>,
    pub scaled_weights: [f64; 4],
}

impl IrlResultFile {
    pub fn new(gamma: f64, expert_mu: [f64; 4], r: &IrlResult, scaled: &RewardWeights) -> Self {
        IrlResultFile {
            gamma,
            expert_mu,
            baseline_mu: r.baseline_mu,
            status: r.status.as_str().into(),
            iterations: r.iterations,
            final_margin: r.final_margin,
            selected: r.selected,
            provenance: r.provenance.as_str().into(),
            candidates: r
                .candidates
                .iter()
                .map(|c| IrlCandidateRecord { weights: c.weights, margin: c.margin, mu: c.mu, distance: c.distance })
                .collect(),
            scaled_weights: scaled.w,
        }
    }
}

/// Writes per-episode training records as CSV.
pub fn write_training_log(path: &Path, log: &[pacorch_core::linear_q::EpisodeLog]) -> Result<(), FormatError> {
    let mut out = String::from("episode,epsilon,steps,score,training_return,won,ghosts_eaten\n");
    for e in log {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            e.episode, e.epsilon, e.steps, e.score, e.training_return, e.won as u8, e.ghosts_eaten
        ));
    }
    write_atomic(path, out.as_bytes())
}
