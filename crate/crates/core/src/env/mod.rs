//! Pac-Man gridworld.
//!
//! Resolution order of one [`step`]: Pac-Man moves, eats a dot or capsule,
//! ghosts move, collisions are checked, scared timers tick down. Eating the
//! last dot ends the game immediately with a win.

mod events;
mod game;
mod layout;

use core::fmt;

pub use events::{
    reward_under, EventFeatures, Provenance, RewardWeights, DOT_REWARD, GHOST_REWARD, LOSE_REWARD, NATIVE_WEIGHTS,
    TIME_PENALTY, WIN_REWARD,
};
pub use game::{ghost_policy, legal_actions, step, GameState, Ghost, Status, StepOutcome, SCARED_STEPS};
pub use layout::{Layout, LayoutError};

/// Index of a cell in row-major order (`y * width + x`).
pub type CellIndex = usize;

/// Grid position, `y = 0` is the top row of the layout text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pos {
    pub x: usize,
    pub y: usize,
}

/// Movement direction. The declaration order (N, E, S, W) is the tie-break
/// order used everywhere a deterministic choice among directions is needed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    North,
    East,
    South,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::North, Direction::East, Direction::South, Direction::West];

    pub fn reverse(self) -> Direction {
        match self {
            Direction::North => Direction::South,
            Direction::East => Direction::West,
            Direction::South => Direction::North,
            Direction::West => Direction::East,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Direction> {
        Direction::ALL.get(i).copied()
    }

    /// Single-letter code used in trajectory and trace files.
    pub fn letter(self) -> char {
        match self {
            Direction::North => 'N',
            Direction::East => 'E',
            Direction::South => 'S',
            Direction::West => 'W',
        }
    }

    pub fn from_letter(c: char) -> Option<Direction> {
        match c {
            'N' => Some(Direction::North),
            'E' => Some(Direction::East),
            'S' => Some(Direction::South),
            'W' => Some(Direction::West),
            _ => None,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// A set of directions, iterated in N, E, S, W order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DirectionSet(u8);

impl DirectionSet {
    pub const EMPTY: DirectionSet = DirectionSet(0);

    pub fn insert(&mut self, d: Direction) {
        self.0 |= 1 << d.index();
    }

    pub fn remove(&mut self, d: Direction) {
        self.0 &= !(1 << d.index());
    }

    pub fn contains(self, d: Direction) -> bool {
        self.0 & (1 << d.index()) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// The `n`-th member in N, E, S, W order.
    pub fn nth(self, n: usize) -> Option<Direction> {
        self.iter().nth(n)
    }

    pub fn iter(self) -> impl Iterator<Item = Direction> {
        Direction::ALL.into_iter().filter(move |d| self.contains(*d))
    }
}

impl FromIterator<Direction> for DirectionSet {
    fn from_iter<I: IntoIterator<Item = Direction>>(iter: I) -> Self {
        let mut set = DirectionSet::EMPTY;
        for d in iter {
            set.insert(d);
        }
        set
    }
}

/// Errors raised by game dynamics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EnvError {
    /// The game is already won or lost.
    Terminal,
    /// The direction leads into a wall.
    IllegalAction(Direction),
}

impl fmt::Display for EnvError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnvError::Terminal => write!(f, "game is over"),
            EnvError::IllegalAction(d) => write!(f, "illegal action {d}: wall ahead"),
        }
    }
}

impl core::error::Error for EnvError {}
