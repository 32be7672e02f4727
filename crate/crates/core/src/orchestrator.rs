//! Two-armed bandit that picks, at every step, whether the constrained
//! policy (arm 0) or the reward policy (arm 1) acts.

use alloc::vec::Vec;
use core::fmt;

use crate::bandit::{BanditError, ContextualThompson, CtsConfig};
use crate::env::{reward_under, step, Direction, EventFeatures, GameState, Layout, RewardWeights, Status};
use crate::linear_q::{LinearQPolicy, QError};
use crate::rollout::episode_seed;
use crate::{rng_from_seed, GameRng};

pub const ARM_CONSTRAINED: usize = 0;
pub const ARM_REWARD: usize = 1;
pub const CONTEXT_DIM: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum OrchestratorError {
    InvalidConfig(&'static str),
    Bandit(BanditError),
    Q(QError),
    /// Blended reward was not finite; carries the offending inputs.
    Diverged {
        game: usize,
        t: usize,
        r_c: f64,
        r_r: f64,
        v_c: f64,
        v_r: f64,
    },
}

impl fmt::Display for OrchestratorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OrchestratorError::InvalidConfig(what) => write!(f, "invalid orchestrator config: {what}"),
            OrchestratorError::Bandit(e) => write!(f, "bandit: {e}"),
            OrchestratorError::Q(e) => write!(f, "policy: {e}"),
            OrchestratorError::Diverged { game, t, r_c, r_r, v_c, v_r } => {
                write!(f, "non-finite blended reward at game {game} step {t} (rC={r_c}, rR={r_r}, vC={v_c}, vR={v_r})")
            }
        }
    }
}

impl core::error::Error for OrchestratorError {}

impl From<BanditError> for OrchestratorError {
    fn from(e: BanditError) -> Self {
        OrchestratorError::Bandit(e)
    }
}

impl From<QError> for OrchestratorError {
    fn from(e: QError) -> Self {
        OrchestratorError::Q(e)
    }
}

impl From<crate::env::EnvError> for OrchestratorError {
    fn from(e: crate::env::EnvError) -> Self {
        OrchestratorError::Q(e.into())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrchestratorConfig {
    pub lambda: f64,
    pub gamma: f64,
    pub train_games: usize,
    pub max_steps: usize,
    pub cts: CtsConfig,
    pub seed: u64,
}

impl Default for OrchestratorConfig {
    fn default() -> Self {
        OrchestratorConfig {
            lambda: 0.5,
            gamma: 0.95,
            train_games: 100,
            max_steps: 1000,
            cts: CtsConfig::default(),
            seed: 0,
        }
    }
}

impl OrchestratorConfig {
    pub fn validate(&self) -> Result<(), OrchestratorError> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(OrchestratorError::InvalidConfig("lambda outside [0, 1]"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(OrchestratorError::InvalidConfig("gamma outside (0, 1)"));
        }
        if self.max_steps == 0 {
            return Err(OrchestratorError::InvalidConfig("max_steps must be positive"));
        }
        self.cts.validate()?;
        Ok(())
    }
}

/// `(1, d)` where `d` is the maze distance to the nearest scared ghost over
/// the layout area, or 1 when no ghost is scared.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrchestratorContext(pub [f64; CONTEXT_DIM]);

impl OrchestratorContext {
    pub fn scared_distance(&self) -> f64 {
        self.0[1]
    }
}

pub fn make_context(layout: &Layout, state: &GameState) -> OrchestratorContext {
    let nearest =
        state.ghosts().iter().filter(|g| g.is_scared()).map(|g| layout.distance(state.pacman(), g.cell)).min();
    let d = match nearest {
        Some(d) => (d as f64 / layout.area() as f64).min(1.0),
        None => 1.0,
    };
    OrchestratorContext([1.0, d])
}

/// `lambda (r_c + gamma v_c) + (1 - lambda)(r_r + gamma v_r)`.
pub fn blended_reward(r_c: f64, r_r: f64, v_c: f64, v_r: f64, lambda: f64, gamma: f64) -> f64 {
    lambda * (r_c + gamma * v_c) + (1.0 - lambda) * (r_r + gamma * v_r)
}

/// One played step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceStep {
    pub t: usize,
    pub arm: usize,
    pub scared_present: bool,
    pub context: [f64; CONTEXT_DIM],
    pub action: Direction,
    pub phi: EventFeatures,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmTrace {
    pub game: usize,
    pub env_seed: u64,
    pub score: i64,
    pub status: Status,
    pub steps: Vec<TraceStep>,
}

impl ArmTrace {
    pub fn ghosts_eaten(&self) -> f64 {
        self.steps.iter().map(|s| s.phi.ghosts_eaten()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameLog {
    pub game: usize,
    pub score: i64,
    pub steps: usize,
    pub ghosts_eaten: u32,
    pub pulls: [u64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalMetrics {
    pub games: usize,
    pub avg_score: f64,
    pub avg_ghosts_eaten: f64,
    pub win_rate: f64,
    /// `arm_usage[scared_present][arm]` step counts.
    pub arm_usage: [[u64; 2]; 2],
}

impl EvalMetrics {
    pub fn from_traces(traces: &[ArmTrace]) -> EvalMetrics {
        let n = traces.len().max(1) as f64;
        let mut arm_usage = [[0u64; 2]; 2];
        for s in traces.iter().flat_map(|t| &t.steps) {
            arm_usage[s.scared_present as usize][s.arm] += 1;
        }
        EvalMetrics {
            games: traces.len(),
            avg_score: traces.iter().map(|t| t.score as f64).sum::<f64>() / n,
            avg_ghosts_eaten: traces.iter().map(ArmTrace::ghosts_eaten).sum::<f64>() / n,
            win_rate: traces.iter().filter(|t| t.status == Status::Won).count() as f64 / n,
            arm_usage,
        }
    }

    /// Share of steps with a scared ghost present on which `arm` played.
    pub fn share_when_scared(&self, arm: usize) -> f64 {
        share(self.arm_usage[1], arm)
    }

    pub fn share_when_not_scared(&self, arm: usize) -> f64 {
        share(self.arm_usage[0], arm)
    }
}

fn share(row: [u64; 2], arm: usize) -> f64 {
    let total = row[0] + row[1];
    if total == 0 {
        0.0
    } else {
        row[arm] as f64 / total as f64
    }
}

fn policies<'a>(pi_c: &'a LinearQPolicy, pi_r: &'a LinearQPolicy) -> [&'a LinearQPolicy; 2] {
    [pi_c, pi_r]
}

/// Trains the orchestrator bandit with Thompson sampling. Game `g` uses
/// environment seed `episode_seed(config.seed, g)`.
pub fn train_orchestrator(
    pi_c: &LinearQPolicy,
    pi_r: &LinearQPolicy,
    r_hat_c: &RewardWeights,
    layout: &Layout,
    config: &OrchestratorConfig,
) -> Result<(ContextualThompson, Vec<GameLog>), OrchestratorError> {
    config.validate()?;
    let arms = policies(pi_c, pi_r);
    let mut bandit = ContextualThompson::new(CONTEXT_DIM, 2, config.cts)?;
    let mut sampler: GameRng = rng_from_seed(episode_seed(config.seed, u64::MAX));
    let mut log = Vec::with_capacity(config.train_games);
    for game in 0..config.train_games {
        let mut env = rng_from_seed(episode_seed(config.seed, game as u64));
        let mut state = GameState::initial(layout);
        let mut pulls = [0u64; 2];
        let mut steps = 0;
        let mut ghosts_eaten = 0;
        while !state.is_terminal() && steps < config.max_steps {
            let ctx = make_context(layout, &state);
            let arm = bandit.choose(&ctx.0, &mut sampler)?;
            let action = arms[arm].greedy_action(layout, &state)?;
            let out = step(layout, &state, action, &mut env)?;
            let r_r = out.phi.game_points() as f64;
            let r_c = reward_under(r_hat_c, &out.phi);
            let v_c = pi_c.value(layout, &out.next);
            let v_r = pi_r.value(layout, &out.next);
            let r = blended_reward(r_c, r_r, v_c, v_r, config.lambda, config.gamma);
            if !r.is_finite() {
                return Err(OrchestratorError::Diverged { game, t: steps, r_c, r_r, v_c, v_r });
            }
            bandit.update(arm, &ctx.0, r)?;
            pulls[arm] += 1;
            ghosts_eaten += out.phi.ghosts_eaten() as u32;
            steps += 1;
            state = out.next;
        }
        log.push(GameLog { game, score: state.score(), steps, ghosts_eaten, pulls });
    }
    Ok((bandit, log))
}

/// Plays one game choosing arms with `select`.
pub fn play_game<F>(
    pi_c: &LinearQPolicy,
    pi_r: &LinearQPolicy,
    layout: &Layout,
    game: usize,
    env_seed: u64,
    max_steps: usize,
    mut select: F,
) -> Result<ArmTrace, OrchestratorError>
where
    F: FnMut(&OrchestratorContext) -> Result<usize, OrchestratorError>,
{
    let arms = policies(pi_c, pi_r);
    let mut env = rng_from_seed(env_seed);
    let mut state = GameState::initial(layout);
    let mut steps = Vec::new();
    while !state.is_terminal() && steps.len() < max_steps {
        let ctx = make_context(layout, &state);
        let arm = select(&ctx)?;
        let action = arms[arm].greedy_action(layout, &state)?;
        let out = step(layout, &state, action, &mut env)?;
        steps.push(TraceStep {
            t: steps.len(),
            arm,
            scared_present: state.any_scared(),
            context: ctx.0,
            action,
            phi: out.phi,
        });
        state = out.next;
    }
    Ok(ArmTrace { game, env_seed, score: state.score(), status: state.status(), steps })
}

/// Evaluates with posterior-mean arm choice. Game `g` uses environment seed
/// `episode_seed(seed, g)`, matching [`crate::rollout::evaluate_policy`].
pub fn evaluate_orchestrator(
    bandit: &ContextualThompson,
    pi_c: &LinearQPolicy,
    pi_r: &LinearQPolicy,
    layout: &Layout,
    games: usize,
    max_steps: usize,
    seed: u64,
) -> Result<(EvalMetrics, Vec<ArmTrace>), OrchestratorError> {
    if games == 0 {
        return Err(OrchestratorError::InvalidConfig("games must be positive"));
    }
    if bandit.dim() != CONTEXT_DIM || bandit.arms().len() != 2 {
        return Err(OrchestratorError::InvalidConfig("bandit must have d = 2 and K = 2"));
    }
    let mut traces = Vec::with_capacity(games);
    for g in 0..games {
        let trace = play_game(pi_c, pi_r, layout, g, episode_seed(seed, g as u64), max_steps, |ctx| {
            Ok(bandit.greedy_arm(&ctx.0)?)
        })?;
        traces.push(trace);
    }
    Ok((EvalMetrics::from_traces(&traces), traces))
}
