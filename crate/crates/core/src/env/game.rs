use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{CellIndex, Direction, DirectionSet, EnvError, EventFeatures, Layout};

/// Steps a ghost stays scared after a capsule is eaten.
pub const SCARED_STEPS: u8 = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ongoing,
    Won,
    Lost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ghost {
    pub cell: CellIndex,
    /// Steps of scared time left; zero means dangerous.
    pub scared_timer: u8,
    pub last_move: Option<Direction>,
}

impl Ghost {
    pub fn is_scared(&self) -> bool {
        self.scared_timer > 0
    }
}

/// Full dynamic game situation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GameState {
    pacman: CellIndex,
    ghosts: Vec<Ghost>,
    dots: Vec<bool>,
    dots_left: usize,
    capsules: Vec<bool>,
    capsules_left: usize,
    step_count: u32,
    status: Status,
    score: i64,
}

/// Result of one [`step`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next: GameState,
    /// Native game points of this step, time penalty included.
    pub reward: i64,
    pub phi: EventFeatures,
}

impl GameState {
    pub fn initial(layout: &Layout) -> GameState {
        let mut dots = vec![false; layout.cell_count()];
        for &d in layout.dots() {
            dots[d] = true;
        }
        let mut capsules = vec![false; layout.cell_count()];
        for &c in layout.capsules() {
            capsules[c] = true;
        }
        GameState {
            pacman: layout.pacman_start(),
            ghosts: layout
                .ghost_starts()
                .iter()
                .map(|&cell| Ghost { cell, scared_timer: 0, last_move: None })
                .collect(),
            dots,
            dots_left: layout.dots().len(),
            capsules,
            capsules_left: layout.capsules().len(),
            step_count: 0,
            status: if layout.dots().is_empty() { Status::Won } else { Status::Ongoing },
            score: 0,
        }
    }

    pub fn pacman(&self) -> CellIndex {
        self.pacman
    }

    pub fn ghosts(&self) -> &[Ghost] {
        &self.ghosts
    }

    pub fn has_dot(&self, c: CellIndex) -> bool {
        self.dots[c]
    }

    pub fn has_capsule(&self, c: CellIndex) -> bool {
        self.capsules[c]
    }

    pub fn dots_left(&self) -> usize {
        self.dots_left
    }

    pub fn capsules_left(&self) -> usize {
        self.capsules_left
    }

    /// Cells that still hold a dot, in ascending index order.
    pub fn remaining_dots(&self) -> impl Iterator<Item = CellIndex> + '_ {
        self.dots.iter().enumerate().filter(|(_, d)| **d).map(|(i, _)| i)
    }

    pub fn step_count(&self) -> u32 {
        self.step_count
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn is_terminal(&self) -> bool {
        self.status != Status::Ongoing
    }

    /// Sum of all rewards emitted since the initial state.
    pub fn score(&self) -> i64 {
        self.score
    }

    pub fn any_scared(&self) -> bool {
        self.ghosts.iter().any(Ghost::is_scared)
    }

    /// Moves Pac-Man to an open cell, for building test scenarios.
    ///
    /// # Panics
    /// If `cell` is a wall.
    pub fn place_pacman(&mut self, layout: &Layout, cell: CellIndex) {
        assert!(!layout.is_wall(cell), "cannot place Pac-Man on a wall");
        self.pacman = cell;
    }

    /// Overwrites ghost `i`, for building test scenarios.
    ///
    /// # Panics
    /// If the cell is a wall or the timer exceeds [`SCARED_STEPS`].
    pub fn place_ghost(&mut self, layout: &Layout, i: usize, ghost: Ghost) {
        assert!(!layout.is_wall(ghost.cell), "cannot place a ghost on a wall");
        assert!(ghost.scared_timer <= SCARED_STEPS);
        self.ghosts[i] = ghost;
    }

    /// Removes a dot without scoring it, for building test scenarios.
    pub fn clear_dot(&mut self, c: CellIndex) {
        if self.dots[c] {
            self.dots[c] = false;
            self.dots_left -= 1;
            if self.dots_left == 0 {
                self.status = Status::Won;
            }
        }
    }
}

/// Directions Pac-Man may take. Stop is not an action.
pub fn legal_actions(layout: &Layout, state: &GameState) -> Result<DirectionSet, EnvError> {
    if state.is_terminal() {
        return Err(EnvError::Terminal);
    }
    Ok(layout.open_directions(state.pacman))
}

/// Random ghost move: uniform over open directions other than reversing,
/// unless reversing is the only way out.
pub fn ghost_policy<R: Rng + ?Sized>(layout: &Layout, state: &GameState, ghost: usize, rng: &mut R) -> Direction {
    let g = &state.ghosts[ghost];
    let open = layout.open_directions(g.cell);
    let mut choices = open;
    if let Some(last) = g.last_move {
        choices.remove(last.reverse());
    }
    if choices.is_empty() {
        choices = open;
    }
    match choices.len() {
        0 => panic!("ghost {ghost} is walled in"),
        1 => choices.nth(0).expect("one choice"),
        n => choices.nth(rng.random_range(0..n)).expect("index in range"),
    }
}

/// Advances the game by one Pac-Man move.
pub fn step<R: Rng + ?Sized>(
    layout: &Layout,
    state: &GameState,
    action: Direction,
    rng: &mut R,
) -> Result<StepOutcome, EnvError> {
    if state.is_terminal() {
        return Err(EnvError::Terminal);
    }
    let target = layout.neighbor(state.pacman, action).ok_or(EnvError::IllegalAction(action))?;

    let mut next = state.clone();
    let mut phi = [0.0; 4];
    next.pacman = target;

    if next.dots[target] {
        next.dots[target] = false;
        next.dots_left -= 1;
        phi[0] = 1.0;
    }
    let mut capsule_eaten = false;
    if next.capsules[target] {
        next.capsules[target] = false;
        next.capsules_left -= 1;
        capsule_eaten = true;
        for g in &mut next.ghosts {
            g.scared_timer = SCARED_STEPS;
        }
    }

    if next.dots_left == 0 {
        phi[1] = 1.0;
        next.status = Status::Won;
    } else {
        // Scared ghosts move at half speed: only on even steps.
        let even_step = state.step_count.is_multiple_of(2);
        let mut lost = false;
        for i in 0..next.ghosts.len() {
            let before = next.ghosts[i].cell;
            if !next.ghosts[i].is_scared() || even_step {
                let d = ghost_policy(layout, &next, i, rng);
                let g = &mut next.ghosts[i];
                g.cell = layout.neighbor(before, d).expect("ghost policy picks open cells");
                g.last_move = Some(d);
            }
            // Covers same-cell endings and swaps (Pac-Man entering the cell
            // the ghost just left).
            let g = &mut next.ghosts[i];
            if target == before || target == g.cell {
                if g.is_scared() {
                    phi[2] += 1.0;
                    *g = Ghost { cell: layout.ghost_home(i), scared_timer: 0, last_move: None };
                } else {
                    lost = true;
                }
            }
        }
        if lost {
            phi[3] = 1.0;
            next.status = Status::Lost;
        }
    }

    if !capsule_eaten {
        for g in &mut next.ghosts {
            g.scared_timer = g.scared_timer.saturating_sub(1);
        }
    }
    next.step_count += 1;
    let phi = EventFeatures(phi);
    let reward = phi.game_points();
    next.score += reward;
    Ok(StepOutcome { next, reward, phi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;

    fn corridor_with_ghost_far() -> Layout {
        // Ghost in a separate pocket so it never reaches Pac-Man in one step.
        Layout::parse(
            "%%%%%%%%\n\
             %P..  G%\n\
             %%%%%%%%",
        )
        .unwrap()
    }

    #[test]
    fn dot_step_reward() {
        let l = corridor_with_ghost_far();
        let s = GameState::initial(&l);
        let out = step(&l, &s, Direction::East, &mut rng_from_seed(1)).unwrap();
        assert_eq!(out.reward, 9);
        assert_eq!(out.phi, EventFeatures([1.0, 0.0, 0.0, 0.0]));
        assert_eq!(out.next.status(), Status::Ongoing);
    }

    #[test]
    fn last_dot_wins() {
        let l = corridor_with_ghost_far();
        let mut s = GameState::initial(&l);
        s.clear_dot(l.index(crate::env::Pos { x: 3, y: 1 }));
        let out = step(&l, &s, Direction::East, &mut rng_from_seed(1)).unwrap();
        assert_eq!(out.reward, 509);
        assert_eq!(out.phi, EventFeatures([1.0, 1.0, 0.0, 0.0]));
        assert_eq!(out.next.status(), Status::Won);
        assert_eq!(out.next.dots_left(), 0);
    }

    #[test]
    fn unscared_collision_loses() {
        let l = Layout::parse("%%%%%\n%PG.%\n%%%%%").unwrap();
        let s = GameState::initial(&l);
        // Whichever way the ghost moves, Pac-Man walks into the cell it held.
        let out = step(&l, &s, Direction::East, &mut rng_from_seed(3)).unwrap();
        assert_eq!(out.reward, -501);
        assert_eq!(out.phi, EventFeatures([0.0, 0.0, 0.0, 1.0]));
        assert_eq!(out.next.status(), Status::Lost);
    }

    #[test]
    fn scared_ghost_is_eaten_and_sent_home() {
        let l = Layout::parse("%%%%%%%\n%P  G.%\n%%%%%%%").unwrap();
        let mut s = GameState::initial(&l);
        let home = l.ghost_home(0);
        s.place_ghost(&l, 0, Ghost { cell: 2 + l.width(), scared_timer: 10, last_move: None });
        let out = step(&l, &s, Direction::East, &mut rng_from_seed(0)).unwrap();
        assert_eq!(out.reward, 199);
        assert_eq!(out.phi, EventFeatures([0.0, 0.0, 1.0, 0.0]));
        assert_eq!(out.next.ghosts()[0].cell, home);
        assert_eq!(out.next.ghosts()[0].scared_timer, 0);
        assert_eq!(out.next.status(), Status::Ongoing);
    }

    #[test]
    fn swap_counts_as_collision() {
        // Pac-Man at x=1 moves E, ghost at x=2 in a corridor whose only exit
        // for it is W (reverse excluded otherwise): they swap.
        let l = Layout::parse("%%%%%\n%PG.%\n%%%%%").unwrap();
        let mut s = GameState::initial(&l);
        s.place_ghost(&l, 0, Ghost { cell: 2 + l.width(), scared_timer: 0, last_move: Some(Direction::West) });
        let out = step(&l, &s, Direction::East, &mut rng_from_seed(0)).unwrap();
        assert_eq!(out.next.status(), Status::Lost);
    }

    #[test]
    fn capsule_scares_ghosts_without_points() {
        let l = Layout::parse("%%%%%%%%%\n%Po.   G%\n%%%%%%%%%").unwrap();
        let s = GameState::initial(&l);
        let out = step(&l, &s, Direction::East, &mut rng_from_seed(0)).unwrap();
        assert_eq!(out.reward, -1);
        assert_eq!(out.phi, EventFeatures::ZERO);
        assert_eq!(out.next.ghosts()[0].scared_timer, SCARED_STEPS);
        assert_eq!(out.next.capsules_left(), 0);
        // Next step ticks the timer down.
        let out2 = step(&l, &out.next, Direction::East, &mut rng_from_seed(0)).unwrap();
        assert_eq!(out2.next.ghosts()[0].scared_timer, SCARED_STEPS - 1);
    }

    #[test]
    fn scared_ghosts_move_on_even_steps_only() {
        let l = Layout::parse(
            "%%%%%%%%%%%%\n\
             %P.........%\n\
             %%%%%%%%%%.%\n\
             %G         %\n\
             %%%%%%%%%%%%",
        )
        .unwrap();
        let mut s = GameState::initial(&l);
        s.place_ghost(&l, 0, Ghost { cell: l.ghost_starts()[0], scared_timer: 30, last_move: None });
        let mut rng = rng_from_seed(5);
        let mut cur = s;
        for t in 0..6 {
            let before = cur.ghosts()[0].cell;
            let out = step(&l, &cur, Direction::East, &mut rng).unwrap();
            let moved = out.next.ghosts()[0].cell != before;
            assert_eq!(moved, t % 2 == 0, "step {t}");
            cur = out.next;
        }
    }

    #[test]
    fn legal_actions_shapes() {
        let corridor = Layout::parse("%%%%%\n%.P.%\n%%%%%").unwrap();
        let s = GameState::initial(&corridor);
        let acts: Vec<_> = legal_actions(&corridor, &s).unwrap().iter().collect();
        assert_eq!(acts, vec![Direction::East, Direction::West]);

        let room = Layout::parse("%%%%%\n%...%\n%.P.%\n%...%\n%%%%%").unwrap();
        let s = GameState::initial(&room);
        assert_eq!(legal_actions(&room, &s).unwrap().len(), 4);

        let dead_end = Layout::parse("%%%%\n%P.%\n%%%%").unwrap();
        let s = GameState::initial(&dead_end);
        let acts: Vec<_> = legal_actions(&dead_end, &s).unwrap().iter().collect();
        assert_eq!(acts, vec![Direction::East]);
    }

    #[test]
    fn terminal_state_rejects_moves() {
        let l = Layout::parse("%%%%\n%P.%\n%%%%").unwrap();
        let s = GameState::initial(&l);
        let out = step(&l, &s, Direction::East, &mut rng_from_seed(0)).unwrap();
        assert!(out.next.is_terminal());
        assert_eq!(legal_actions(&l, &out.next), Err(EnvError::Terminal));
        assert_eq!(step(&l, &out.next, Direction::West, &mut rng_from_seed(0)), Err(EnvError::Terminal));
        assert_eq!(
            step(&l, &s, Direction::North, &mut rng_from_seed(0)),
            Err(EnvError::IllegalAction(Direction::North))
        );
    }

    #[test]
    fn ghost_keeps_heading_in_corridor() {
        let l = Layout::parse("%%%%%%%\n%P G .%\n%%%%%%%").unwrap();
        let mut s = GameState::initial(&l);
        s.place_ghost(&l, 0, Ghost { cell: 3 + l.width(), scared_timer: 0, last_move: Some(Direction::East) });
        let mut rng = rng_from_seed(9);
        for _ in 0..50 {
            assert_eq!(ghost_policy(&l, &s, 0, &mut rng), Direction::East);
        }
    }

    #[test]
    fn ghost_reverses_in_dead_end() {
        let l = Layout::parse("%%%%%%\n%P .G%\n%%%%%%").unwrap();
        let mut s = GameState::initial(&l);
        s.place_ghost(&l, 0, Ghost { cell: 4 + l.width(), scared_timer: 0, last_move: Some(Direction::East) });
        assert_eq!(ghost_policy(&l, &s, 0, &mut rng_from_seed(0)), Direction::West);
    }

    #[test]
    fn ghost_t_junction_is_uniform_over_non_reverse() {
        // Ghost at the junction (x=2, y=1) arrived moving North from below.
        let l = Layout::parse(
            "%%%%%\n\
             %.G.%\n\
             %%.%%\n\
             %%P%%\n\
             %%%%%",
        )
        .unwrap();
        let mut s = GameState::initial(&l);
        s.place_ghost(&l, 0, Ghost { cell: 2 + l.width(), scared_timer: 0, last_move: Some(Direction::North) });
        let mut rng = rng_from_seed(11);
        let (mut east, mut west) = (0, 0);
        for _ in 0..10_000 {
            match ghost_policy(&l, &s, 0, &mut rng) {
                Direction::East => east += 1,
                Direction::West => west += 1,
                d => panic!("unexpected {d}"),
            }
        }
        assert!((east as f64 / 10_000.0 - 0.5).abs() < 0.03, "east={east} west={west}");
    }
}
