//! Q-learning with linear function approximation.
//!
//! `Q(s, a) = theta · psi(s, a)` over seven hand-crafted features. The same
//! trainer produces the reward-maximizing policy (native weights) and the
//! constraint policy (learned weights); only the [`RewardWeights`] differ.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::env::{legal_actions, reward_under, step, CellIndex, Direction, EnvError, GameState, Layout, RewardWeights};
use crate::{rng_from_seed, GameRng};

/// Identifier tying a weight vector to this feature extractor.
pub const FEATURE_SCHEMA_ID: &str = "pacman-psi-v1";
pub const N_FEATURES: usize = 7;

/// Names of the feature components, in vector order.
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "bias",
    "food_will_be_eaten",
    "dist_closest_food",
    "scared_ghost_collision_possible",
    "unscared_ghost_collision_possible",
    "dist_closest_scared_ghost",
    "dist_closest_unscared_ghost",
];

/// `psi(s, a)`. Distances are maze distances from the cell Pac-Man would
/// occupy after the action, divided by the layout area; `1.0` when no
/// target of that kind exists.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateActionFeatures(pub [f64; N_FEATURES]);

impl StateActionFeatures {
    pub fn bias(&self) -> f64 {
        self.0[0]
    }
    pub fn food_will_be_eaten(&self) -> f64 {
        self.0[1]
    }
    pub fn dist_closest_food(&self) -> f64 {
        self.0[2]
    }
    pub fn scared_ghost_collision_possible(&self) -> f64 {
        self.0[3]
    }
    pub fn unscared_ghost_collision_possible(&self) -> f64 {
        self.0[4]
    }
    pub fn dist_closest_scared_ghost(&self) -> f64 {
        self.0[5]
    }
    pub fn dist_closest_unscared_ghost(&self) -> f64 {
        self.0[6]
    }
}

/// Computes `psi(state, action)`.
pub fn extract_features(
    layout: &Layout,
    state: &GameState,
    action: Direction,
) -> Result<StateActionFeatures, EnvError> {
    let legal = legal_actions(layout, state)?;
    if !legal.contains(action) {
        return Err(EnvError::IllegalAction(action));
    }
    let cell = layout.neighbor(state.pacman(), action).expect("legal action");
    Ok(features_at(layout, state, cell))
}

fn features_at(layout: &Layout, state: &GameState, cell: CellIndex) -> StateActionFeatures {
    let area = layout.area() as f64;
    let food = state.remaining_dots().map(|d| layout.distance(cell, d)).min().map_or(1.0, |d| d as f64 / area);

    let mut scared_close = 0.0;
    let mut unscared_close = 0.0;
    let mut scared_dist = usize::MAX;
    let mut unscared_dist = usize::MAX;
    for g in state.ghosts() {
        let d = layout.distance(cell, g.cell);
        if g.is_scared() {
            scared_dist = scared_dist.min(d);
            if d <= 1 {
                scared_close = 1.0;
            }
        } else {
            unscared_dist = unscared_dist.min(d);
            if d <= 1 {
                unscared_close = 1.0;
            }
        }
    }
    let norm = |d: usize| if d == usize::MAX { 1.0 } else { d as f64 / area };
    StateActionFeatures([
        1.0,
        if state.has_dot(cell) { 1.0 } else { 0.0 },
        food,
        scared_close,
        unscared_close,
        norm(scared_dist),
        norm(unscared_dist),
    ])
}

#[derive(Debug, Clone, PartialEq)]
pub enum QError {
    Env(EnvError),
    SchemaMismatch {
        expected: &'static str,
        found: String,
    },
    WrongLength {
        expected: usize,
        found: usize,
    },
    InvalidGamma(f64),
    InvalidConfig(&'static str),
    /// Weights became non-finite during training.
    Diverged {
        episode: usize,
        step: usize,
    },
}

impl fmt::Display for QError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QError::Env(e) => write!(f, "{e}"),
            QError::SchemaMismatch { expected, found } => {
                write!(f, "feature schema mismatch: expected {expected}, found {found}")
            }
            QError::WrongLength { expected, found } => {
                write!(f, "theta has {found} components, schema needs {expected}")
            }
            QError::InvalidGamma(g) => write!(f, "discount {g} outside (0, 1)"),
            QError::InvalidConfig(what) => write!(f, "invalid training config: {what}"),
            QError::Diverged { episode, step } => {
                write!(f, "theta diverged (non-finite) at episode {episode}, step {step}")
            }
        }
    }
}

impl core::error::Error for QError {}

impl From<EnvError> for QError {
    fn from(e: EnvError) -> Self {
        QError::Env(e)
    }
}

/// Linear Q-function; its greedy policy and state values.
///
/// A value of this type always matches [`FEATURE_SCHEMA_ID`]: foreign
/// schemas are rejected by [`LinearQPolicy::from_parts`].
#[derive(Debug, Clone, PartialEq)]
pub struct LinearQPolicy {
    theta: [f64; N_FEATURES],
    gamma: f64,
}

impl LinearQPolicy {
    pub fn new(theta: [f64; N_FEATURES], gamma: f64) -> Result<Self, QError> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(QError::InvalidGamma(gamma));
        }
        Ok(LinearQPolicy { theta, gamma })
    }

    pub fn zeros(gamma: f64) -> Result<Self, QError> {
        Self::new([0.0; N_FEATURES], gamma)
    }

    /// Rebuilds a policy from persisted parts, enforcing the schema.
    pub fn from_parts(schema_id: &str, gamma: f64, theta: &[f64]) -> Result<Self, QError> {
        if schema_id != FEATURE_SCHEMA_ID {
            return Err(QError::SchemaMismatch { expected: FEATURE_SCHEMA_ID, found: schema_id.into() });
        }
        let theta: [f64; N_FEATURES] =
            theta.try_into().map_err(|_| QError::WrongLength { expected: N_FEATURES, found: theta.len() })?;
        Self::new(theta, gamma)
    }

    pub fn schema_id(&self) -> &'static str {
        FEATURE_SCHEMA_ID
    }

    pub fn theta(&self) -> &[f64; N_FEATURES] {
        &self.theta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `theta · psi`.
    pub fn score(&self, psi: &StateActionFeatures) -> f64 {
        self.theta.iter().zip(psi.0.iter()).map(|(t, p)| t * p).sum()
    }

    pub fn q_value(&self, layout: &Layout, state: &GameState, action: Direction) -> Result<f64, QError> {
        Ok(self.score(&extract_features(layout, state, action)?))
    }

    /// Q-values of all legal actions in N, E, S, W order.
    fn action_values<'a>(
        &'a self,
        layout: &'a Layout,
        state: &'a GameState,
    ) -> impl Iterator<Item = (Direction, f64)> + 'a {
        let pacman = state.pacman();
        layout.open_directions(pacman).iter().map(move |d| {
            let cell = layout.neighbor(pacman, d).expect("open direction");
            (d, self.score(&features_at(layout, state, cell)))
        })
    }

    /// `0` at terminal states, else the maximum Q over legal actions.
    pub fn value(&self, layout: &Layout, state: &GameState) -> f64 {
        if state.is_terminal() {
            return 0.0;
        }
        self.action_values(layout, state).map(|(_, q)| q).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Argmax action; ties go to the first direction in N, E, S, W order.
    pub fn greedy_action(&self, layout: &Layout, state: &GameState) -> Result<Direction, QError> {
        if state.is_terminal() {
            return Err(EnvError::Terminal.into());
        }
        let mut best: Option<(Direction, f64)> = None;
        for (d, q) in self.action_values(layout, state) {
            if best.is_none_or(|(_, b)| q > b) {
                best = Some((d, q));
            }
        }
        Ok(best.expect("every open cell has a neighbor").0)
    }

    /// With probability `epsilon` a uniform legal action, else greedy.
    pub fn epsilon_greedy<R: Rng + ?Sized>(
        &self,
        layout: &Layout,
        state: &GameState,
        epsilon: f64,
        rng: &mut R,
    ) -> Result<Direction, QError> {
        let legal = legal_actions(layout, state)?;
        if epsilon > 0.0 && rng.random::<f64>() < epsilon {
            let i = rng.random_range(0..legal.len());
            return Ok(legal.nth(i).expect("index in range"));
        }
        self.greedy_action(layout, state)
    }

    /// One temporal-difference step on raw features:
    /// `difference = reward + gamma * next_value - theta · psi`, then
    /// `theta_i += alpha * difference * psi_i`. Pass `next_value = 0` for a
    /// terminal successor. Returns the difference.
    pub fn td_update(&mut self, psi: &StateActionFeatures, reward: f64, next_value: f64, alpha: f64) -> f64 {
        let difference = reward + self.gamma * next_value - self.score(psi);
        for (t, p) in self.theta.iter_mut().zip(psi.0.iter()) {
            *t += alpha * difference * p;
        }
        difference
    }

    /// Q-learning update for the observed transition `(s, a, r, s')`.
    pub fn q_update(&mut self, layout: &Layout, transition: &Transition<'_>, alpha: f64) -> Result<f64, QError> {
        let psi = extract_features(layout, transition.state, transition.action)?;
        let next_value = self.value(layout, transition.next);
        Ok(self.td_update(&psi, transition.reward, next_value, alpha))
    }
}

/// Observed transition `(s, a, r, s')`.
#[derive(Debug, Clone, Copy)]
pub struct Transition<'a> {
    pub state: &'a GameState,
    pub action: Direction,
    pub reward: f64,
    pub next: &'a GameState,
}

/// Hyperparameters for [`train_q`].
#[derive(Debug, Clone, PartialEq)]
pub struct QTrainConfig {
    /// Initial learning rate; step `t` uses `alpha / (1 + t / alpha_decay_steps)`.
    pub alpha: f64,
    pub alpha_decay_steps: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of episodes over which epsilon is annealed linearly.
    pub epsilon_anneal_fraction: f64,
    pub episodes: usize,
    pub gamma: f64,
    pub max_steps: usize,
    pub seed: u64,
}

impl Default for QTrainConfig {
    fn default() -> Self {
        QTrainConfig {
            alpha: 0.02,
            alpha_decay_steps: 1e5,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_anneal_fraction: 0.8,
            episodes: 5000,
            gamma: 0.95,
            max_steps: 1000,
            seed: 0,
        }
    }
}

impl QTrainConfig {
    pub fn validate(&self) -> Result<(), QError> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(QError::InvalidConfig("alpha must be positive"));
        }
        if !(self.alpha_decay_steps > 0.0) {
            return Err(QError::InvalidConfig("alpha_decay_steps must be positive"));
        }
        for e in [self.epsilon_start, self.epsilon_end] {
            if !(0.0..=1.0).contains(&e) {
                return Err(QError::InvalidConfig("epsilon outside [0, 1]"));
            }
        }
        if !(0.0..=1.0).contains(&self.epsilon_anneal_fraction) {
            return Err(QError::InvalidConfig("epsilon_anneal_fraction outside [0, 1]"));
        }
        if self.max_steps == 0 {
            return Err(QError::InvalidConfig("max_steps must be positive"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(QError::InvalidGamma(self.gamma));
        }
        Ok(())
    }

    /// Exploration rate for a given episode.
    pub fn epsilon_at(&self, episode: usize) -> f64 {
        let horizon = self.epsilon_anneal_fraction * self.episodes as f64;
        if horizon <= 0.0 {
            return self.epsilon_end;
        }
        let frac = episode as f64 / horizon;
        if frac >= 1.0 {
            return self.epsilon_end;
        }
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }

    /// Learning rate after `t` total updates.
    pub fn alpha_at(&self, t: u64) -> f64 {
        self.alpha / (1.0 + t as f64 / self.alpha_decay_steps)
    }
}

/// Per-episode training record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeLog {
    pub episode: usize,
    pub epsilon: f64,
    pub steps: usize,
    /// Native game score.
    pub score: i64,
    /// Undiscounted return under the training weights.
    pub training_return: f64,
    pub won: bool,
    pub ghosts_eaten: u32,
}

#[derive(Debug, Clone)]
pub struct TrainedPolicy {
    pub policy: LinearQPolicy,
    pub log: Vec<EpisodeLog>,
}

/// Trains a policy by epsilon-greedy Q-learning where each step's reward is
/// `reward_under(weights, phi)`.
pub fn train_q(layout: &Layout, weights: &RewardWeights, config: &QTrainConfig) -> Result<TrainedPolicy, QError> {
    config.validate()?;
    let mut policy = LinearQPolicy::zeros(config.gamma)?;
    let mut rng: GameRng = rng_from_seed(config.seed);
    let mut log = Vec::with_capacity(config.episodes);
    let mut t: u64 = 0;
    for episode in 0..config.episodes {
        let epsilon = config.epsilon_at(episode);
        let mut state = GameState::initial(layout);
        let mut steps = 0;
        let mut training_return = 0.0;
        let mut ghosts_eaten = 0;
        while !state.is_terminal() && steps < config.max_steps {
            let action = policy.epsilon_greedy(layout, &state, epsilon, &mut rng)?;
            let psi = extract_features(layout, &state, action)?;
            let outcome = step(layout, &state, action, &mut rng)?;
            let reward = reward_under(weights, &outcome.phi);
            let next_value = policy.value(layout, &outcome.next);
            policy.td_update(&psi, reward, next_value, config.alpha_at(t));
            if !policy.theta.iter().all(|x| x.is_finite()) {
                return Err(QError::Diverged { episode, step: steps });
            }
            t += 1;
            steps += 1;
            training_return += reward;
            ghosts_eaten += outcome.phi.ghosts_eaten() as u32;
            state = outcome.next;
        }
        log.push(EpisodeLog {
            episode,
            epsilon,
            steps,
            score: state.score(),
            training_return,
            won: state.status() == crate::env::Status::Won,
            ghosts_eaten,
        });
    }
    Ok(TrainedPolicy { policy, log })
}
