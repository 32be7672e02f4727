use core::fmt;
use core::ops::Index;

/// Points for eating a dot.
pub const DOT_REWARD: i64 = 10;
/// Points for eating the last dot.
pub const WIN_REWARD: i64 = 500;
/// Points for eating a scared ghost.
pub const GHOST_REWARD: i64 = 200;
/// Points for colliding with an unscared ghost (negative).
pub const LOSE_REWARD: i64 = -500;
/// Charged on every step, terminal steps included.
pub const TIME_PENALTY: i64 = -1;

/// Per-transition event counts, in the order
/// `(dots_eaten, won, ghosts_eaten, lost)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EventFeatures(pub [f64; 4]);

impl EventFeatures {
    pub const LEN: usize = 4;
    pub const ZERO: EventFeatures = EventFeatures([0.0; 4]);

    pub fn dots_eaten(&self) -> f64 {
        self.0[0]
    }
    pub fn won(&self) -> f64 {
        self.0[1]
    }
    pub fn ghosts_eaten(&self) -> f64 {
        self.0[2]
    }
    pub fn lost(&self) -> f64 {
        self.0[3]
    }

    /// Native game points of the transition, time penalty included.
    pub fn game_points(&self) -> i64 {
        DOT_REWARD * self.0[0] as i64
            + WIN_REWARD * self.0[1] as i64
            + GHOST_REWARD * self.0[2] as i64
            + LOSE_REWARD * self.0[3] as i64
            + TIME_PENALTY
    }
}

impl Index<usize> for EventFeatures {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Where a weight vector came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Native,
    LearnedFromDemos,
    LearnedFromOptimal,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Native => "native",
            Provenance::LearnedFromDemos => "learned-from-demos",
            Provenance::LearnedFromOptimal => "learned-from-optimal",
        }
    }

    pub fn parse(s: &str) -> Option<Provenance> {
        match s {
            "native" => Some(Provenance::Native),
            "learned-from-demos" => Some(Provenance::LearnedFromDemos),
            "learned-from-optimal" => Some(Provenance::LearnedFromOptimal),
            _ => None,
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Linear reward over [`EventFeatures`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardWeights {
    pub w: [f64; 4],
    pub provenance: Provenance,
}

/// The game's own reward weights, time penalty excluded.
pub const NATIVE_WEIGHTS: RewardWeights =
    RewardWeights { w: [10.0, 500.0, 200.0, -500.0], provenance: Provenance::Native };

impl RewardWeights {
    pub fn new(w: [f64; 4], provenance: Provenance) -> Self {
        RewardWeights { w, provenance }
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().all(|x| x.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.w.iter().all(|&x| x == 0.0)
    }

    pub fn l1_norm(&self) -> f64 {
        self.w.iter().map(|x| x.abs()).sum()
    }
}

/// `w · phi`.
pub fn reward_under(weights: &RewardWeights, phi: &EventFeatures) -> f64 {
    weights.w.iter().zip(phi.0.iter()).map(|(w, p)| w * p).sum()
}
