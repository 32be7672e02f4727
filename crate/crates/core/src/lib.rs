//! Multi-objective Pac-Man workbench.
//!
//! The crate is `no_std` (with `alloc`) and holds the pure algorithmic parts:
//!
//! - [`env`]: a deterministic, seedable Pac-Man gridworld emitting per-step
//!   event features (dots eaten, won, ghosts eaten, lost).
//! - [`linear_q`]: Q-learning with linear function approximation over
//!   hand-crafted state-action features.
//! - [`irl`]: apprenticeship learning by the projection method, plus the
//!   synthetic constrained-demonstration generator.
//! - [`bandit`]: contextual Thompson sampling over linear-payoff arms.
//! - [`orchestrator`]: a two-armed bandit whose arms are whole policies,
//!   trained on a blended, value-bootstrapped reward.
//!
//! IO, file formats and the CLI live in the `pacorch` companion crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod bandit;
pub mod env;
pub mod irl;
pub mod layouts;
mod linalg;
pub mod linear_q;
pub mod orchestrator;
pub mod rollout;

/// Random source used for every stochastic component. ChaCha8 is portable
/// across platforms, so a seed reproduces the same stream everywhere.
pub type GameRng = rand_chacha::ChaCha8Rng;

/// Builds a [`GameRng`] from a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> GameRng {
    use rand::SeedableRng;
    GameRng::seed_from_u64(seed)
}
