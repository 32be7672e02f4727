//! Learned greedy policy on a tiny corridor against exact value iteration.

use pacorch_core::env::{legal_actions, Direction, GameState, Layout, Status, NATIVE_WEIGHTS};
use pacorch_core::linear_q::{train_q, QTrainConfig};

const GAMMA: f64 = 0.95;

/// Value iteration over Pac-Man's cell in a ghost-free corridor with a
/// single dot at the east end. Returns the optimal first move per cell.
fn oracle(width: usize, dot: usize) -> Vec<Option<Direction>> {
    let reward = |to: usize| if to == dot { 10.0 + 500.0 - 1.0 } else { -1.0 };
    let mut v = vec![0.0; width];
    for _ in 0..1000 {
        let mut next = v.clone();
        for c in 0..width {
            if c == dot {
                continue;
            }
            let mut best = f64::NEG_INFINITY;
            for to in [c.wrapping_sub(1), c + 1] {
                if to < width {
                    let cont = if to == dot { 0.0 } else { v[to] };
                    best = best.max(reward(to) + GAMMA * cont);
                }
            }
            next[c] = best;
        }
        v = next;
    }
    (0..width)
        .map(|c| {
            if c == dot {
                return None;
            }
            let q = |to: usize| reward(to) + GAMMA * if to == dot { 0.0 } else { v[to] };
            let east = q(c + 1);
            let west = if c > 0 { q(c - 1) } else { f64::NEG_INFINITY };
            Some(if east >= west { Direction::East } else { Direction::West })
        })
        .collect()
}

#[test]
fn trained_policy_walks_to_the_dot_from_every_cell() {
    let layout = Layout::parse(" P  .").unwrap();
    let best = oracle(5, 4);
    let cfg = QTrainConfig { episodes: 300, max_steps: 100, seed: 3, ..QTrainConfig::default() };
    let policy = train_q(&layout, &NATIVE_WEIGHTS, &cfg).unwrap().policy;
    for cell in 0..4 {
        let mut s = GameState::initial(&layout);
        s.place_pacman(&layout, cell);
        assert_eq!(s.status(), Status::Ongoing);
        assert!(legal_actions(&layout, &s).unwrap().contains(Direction::East));
        assert_eq!(Some(policy.greedy_action(&layout, &s).unwrap()), best[cell], "cell {cell}");
    }
}
