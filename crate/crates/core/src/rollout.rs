//! Episode playback, trajectories and policy evaluation.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::env::{reward_under, step, Direction, EnvError, EventFeatures, GameState, Layout, RewardWeights, Status};
use crate::linear_q::{LinearQPolicy, QError};
use crate::rng_from_seed;

/// SplitMix64 finalizer; spreads `(base, index)` into an independent seed.
pub fn episode_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x6A09_E667_F3BC_C909);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryStep {
    pub action: Direction,
    pub phi: EventFeatures,
}

/// Recorded episode: the environment seed plus the action sequence, with the
/// event features each step produced. States are not stored; [`replay`]
/// reconstructs them.
///
/// [`replay`]: Trajectory::replay
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub layout_id: String,
    /// Seed of the environment random source (ghost moves).
    pub seed: u64,
    pub steps: Vec<TrajectoryStep>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReplayError {
    Env { step: usize, error: EnvError },
    PhiMismatch { step: usize, recorded: EventFeatures, replayed: EventFeatures },
}

impl fmt::Display for ReplayError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReplayError::Env { step, error } => write!(f, "replay failed at step {step}: {error}"),
            ReplayError::PhiMismatch { step, recorded, replayed } => {
                write!(f, "replay diverged at step {step}: recorded {:?}, replayed {:?}", recorded.0, replayed.0)
            }
        }
    }
}

impl core::error::Error for ReplayError {}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Re-plays the actions from the initial state with the recorded seed and
    /// checks every step's event features. Returns all visited states,
    /// initial state first.
    pub fn replay(&self, layout: &Layout) -> Result<Vec<GameState>, ReplayError> {
        let mut rng = rng_from_seed(self.seed);
        let mut states = Vec::with_capacity(self.steps.len() + 1);
        states.push(GameState::initial(layout));
        for (i, s) in self.steps.iter().enumerate() {
            let cur = states.last().expect("non-empty");
            let out = step(layout, cur, s.action, &mut rng).map_err(|error| ReplayError::Env { step: i, error })?;
            if out.phi != s.phi {
                return Err(ReplayError::PhiMismatch { step: i, recorded: s.phi, replayed: out.phi });
            }
            states.push(out.next);
        }
        Ok(states)
    }

    /// `sum_t gamma^t phi_t`.
    pub fn discounted_features(&self, gamma: f64) -> [f64; 4] {
        let mut acc = [0.0; 4];
        let mut discount = 1.0;
        for s in &self.steps {
            for (a, p) in acc.iter_mut().zip(s.phi.0.iter()) {
                *a += discount * p;
            }
            discount *= gamma;
        }
        acc
    }

    /// `sum_t gamma^t reward_under(w, phi_t)`.
    pub fn discounted_return(&self, weights: &RewardWeights, gamma: f64) -> f64 {
        let mut total = 0.0;
        let mut discount = 1.0;
        for s in &self.steps {
            total += discount * reward_under(weights, &s.phi);
            discount *= gamma;
        }
        total
    }
}

/// Outcome of one played episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSummary {
    pub score: i64,
    pub steps: usize,
    pub status: Status,
    pub dots_eaten: u32,
    pub ghosts_eaten: u32,
}

impl EpisodeSummary {
    pub fn won(&self) -> bool {
        self.status == Status::Won
    }
}

/// Plays one episode from the initial state. `choose` picks each action;
/// the environment draws from its own generator seeded with `env_seed`, so
/// the result can be replayed from `(env_seed, actions)`.
pub fn record_episode<F>(
    layout: &Layout,
    layout_id: &str,
    env_seed: u64,
    max_steps: usize,
    mut choose: F,
) -> Result<(Trajectory, EpisodeSummary), QError>
where
    F: FnMut(&GameState) -> Result<Direction, QError>,
{
    let mut rng = rng_from_seed(env_seed);
    let mut state = GameState::initial(layout);
    let mut steps = Vec::new();
    let mut dots_eaten = 0;
    let mut ghosts_eaten = 0;
    while !state.is_terminal() && steps.len() < max_steps {
        let action = choose(&state)?;
        let out = step(layout, &state, action, &mut rng)?;
        dots_eaten += out.phi.dots_eaten() as u32;
        ghosts_eaten += out.phi.ghosts_eaten() as u32;
        steps.push(TrajectoryStep { action, phi: out.phi });
        state = out.next;
    }
    let summary =
        EpisodeSummary { score: state.score(), steps: steps.len(), status: state.status(), dots_eaten, ghosts_eaten };
    Ok((Trajectory { layout_id: layout_id.into(), seed: env_seed, steps }, summary))
}

/// Aggregate statistics over evaluation games.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyStats {
    pub games: usize,
    pub avg_score: f64,
    pub max_score: i64,
    pub min_score: i64,
    pub avg_ghosts_eaten: f64,
    pub win_rate: f64,
    pub avg_steps: f64,
}

impl PolicyStats {
    pub fn from_summaries(summaries: &[EpisodeSummary]) -> PolicyStats {
        let n = summaries.len().max(1) as f64;
        PolicyStats {
            games: summaries.len(),
            avg_score: summaries.iter().map(|s| s.score as f64).sum::<f64>() / n,
            max_score: summaries.iter().map(|s| s.score).max().unwrap_or(0),
            min_score: summaries.iter().map(|s| s.score).min().unwrap_or(0),
            avg_ghosts_eaten: summaries.iter().map(|s| s.ghosts_eaten as f64).sum::<f64>() / n,
            win_rate: summaries.iter().filter(|s| s.won()).count() as f64 / n,
            avg_steps: summaries.iter().map(|s| s.steps as f64).sum::<f64>() / n,
        }
    }
}

/// Plays `games` greedy episodes; game `i` uses environment seed
/// `episode_seed(seed, i)`.
pub fn evaluate_policy(
    policy: &LinearQPolicy,
    layout: &Layout,
    games: usize,
    max_steps: usize,
    seed: u64,
) -> Result<(PolicyStats, Vec<EpisodeSummary>), QError> {
    let mut summaries = Vec::with_capacity(games);
    for g in 0..games {
        let (_, summary) =
            record_episode(layout, "", episode_seed(seed, g as u64), max_steps, |s| policy.greedy_action(layout, s))?;
        summaries.push(summary);
    }
    Ok((PolicyStats::from_summaries(&summaries), summaries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::NATIVE_WEIGHTS;
    use crate::layouts::CANONICAL;
    use rand::Rng;

    #[test]
    fn recorded_episode_replays() {
        let l = Layout::parse(CANONICAL).unwrap();
        let mut agent = rng_from_seed(99);
        let (traj, summary) = record_episode(&l, "canonical", 1234, 300, |s| {
            let legal = crate::env::legal_actions(&l, s)?;
            Ok(legal.nth(agent.random_range(0..legal.len())).unwrap())
        })
        .unwrap();
        let states = traj.replay(&l).unwrap();
        assert_eq!(states.len(), traj.len() + 1);
        assert_eq!(states.last().unwrap().score(), summary.score);
        let total: i64 = traj.steps.iter().map(|s| s.phi.game_points()).sum();
        assert_eq!(total, summary.score);
    }

    #[test]
    fn tampered_trajectory_fails_replay() {
        let l = Layout::parse("%%%%%%\n%P...%\n%%%%%%").unwrap();
        let (mut traj, _) = record_episode(&l, "t", 5, 10, |_| Ok(Direction::East)).unwrap();
        traj.steps[1].phi = EventFeatures::ZERO;
        assert!(matches!(traj.replay(&l), Err(ReplayError::PhiMismatch { step: 1, .. })));
    }

    #[test]
    fn discounted_sums() {
        let t = Trajectory {
            layout_id: "x".into(),
            seed: 0,
            steps: alloc::vec![
                TrajectoryStep { action: Direction::East, phi: EventFeatures([1.0, 0.0, 0.0, 0.0]) },
                TrajectoryStep { action: Direction::East, phi: EventFeatures([1.0, 0.0, 1.0, 0.0]) },
            ],
        };
        assert_eq!(t.discounted_features(0.5), [1.5, 0.0, 0.5, 0.0]);
        assert_eq!(t.discounted_return(&NATIVE_WEIGHTS, 0.5), 10.0 + 0.5 * 210.0);
    }

    #[test]
    fn seeds_differ_per_index() {
        let a: Vec<u64> = (0..100).map(|i| episode_seed(7, i)).collect();
        let mut b = a.clone();
        b.sort_unstable();
        b.dedup();
        assert_eq!(b.len(), 100);
        assert_ne!(episode_seed(7, 0), episode_seed(8, 0));
    }
}
