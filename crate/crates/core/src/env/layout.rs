use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use super::{CellIndex, Direction, DirectionSet, Pos};

const UNREACHABLE: u16 = u16::MAX;

/// Static maze description.
///
/// Built by [`Layout::parse`], which guarantees every open cell is reachable
/// from the Pac-Man start. Cell-to-cell maze distances are precomputed.
#[derive(Debug, Clone)]
pub struct Layout {
    width: usize,
    height: usize,
    walls: Vec<bool>,
    dots: Vec<CellIndex>,
    capsules: Vec<CellIndex>,
    pacman_start: CellIndex,
    ghost_starts: Vec<CellIndex>,
    neighbors: Vec<[Option<CellIndex>; 4]>,
    distances: Vec<u16>,
}

/// Reasons a layout text is rejected. Rows and columns are zero-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayoutError {
    Empty,
    NonRectangular { row: usize, expected: usize, found: usize },
    UnknownChar { row: usize, col: usize, ch: char },
    MissingPacman,
    DuplicatePacman { row: usize, col: usize },
    Unreachable { row: usize, col: usize },
    TooLarge { cells: usize },
}

impl fmt::Display for LayoutError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayoutError::Empty => write!(f, "layout is empty"),
            LayoutError::NonRectangular { row, expected, found } => {
                write!(f, "row {row}: expected {expected} columns, found {found}")
            }
            LayoutError::UnknownChar { row, col, ch } => {
                write!(f, "row {row}, column {col}: unknown character {ch:?}")
            }
            LayoutError::MissingPacman => write!(f, "no Pac-Man start 'P' in layout"),
            LayoutError::DuplicatePacman { row, col } => {
                write!(f, "row {row}, column {col}: second Pac-Man start")
            }
            LayoutError::Unreachable { row, col } => {
                write!(f, "row {row}, column {col}: cell unreachable from Pac-Man start")
            }
            LayoutError::TooLarge { cells } => {
                write!(f, "layout has {cells} cells, at most 65535 supported")
            }
        }
    }
}

impl core::error::Error for LayoutError {}

impl Layout {
    /// Parses an ASCII grid: `%` wall, `.` dot, `o` capsule, `P` Pac-Man,
    /// `G` ghost, space empty. Trailing blank lines and `\r` are ignored.
    pub fn parse(text: &str) -> Result<Layout, LayoutError> {
        let mut rows: Vec<&str> = text.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l)).collect();
        while rows.last().is_some_and(|r| r.is_empty()) {
            rows.pop();
        }
        if rows.is_empty() {
            return Err(LayoutError::Empty);
        }
        let width = rows[0].chars().count();
        if width == 0 {
            return Err(LayoutError::Empty);
        }
        let height = rows.len();
        if width * height >= UNREACHABLE as usize {
            return Err(LayoutError::TooLarge { cells: width * height });
        }

        let mut walls = vec![false; width * height];
        let mut dots = Vec::new();
        let mut capsules = Vec::new();
        let mut pacman = None;
        let mut ghost_starts = Vec::new();
        for (y, row) in rows.iter().enumerate() {
            let found = row.chars().count();
            if found != width {
                return Err(LayoutError::NonRectangular { row: y, expected: width, found });
            }
            for (x, ch) in row.chars().enumerate() {
                let i = y * width + x;
                match ch {
                    '%' => walls[i] = true,
                    '.' => dots.push(i),
                    'o' => capsules.push(i),
                    'G' => ghost_starts.push(i),
                    ' ' => {}
                    'P' => {
                        if pacman.is_some() {
                            return Err(LayoutError::DuplicatePacman { row: y, col: x });
                        }
                        pacman = Some(i);
                    }
                    _ => return Err(LayoutError::UnknownChar { row: y, col: x, ch }),
                }
            }
        }
        let pacman_start = pacman.ok_or(LayoutError::MissingPacman)?;

        let mut neighbors = vec![[None; 4]; width * height];
        for y in 0..height {
            for x in 0..width {
                let i = y * width + x;
                if walls[i] {
                    continue;
                }
                for d in Direction::ALL {
                    let target = match d {
                        Direction::North if y > 0 => Some(i - width),
                        Direction::South if y + 1 < height => Some(i + width),
                        Direction::West if x > 0 => Some(i - 1),
                        Direction::East if x + 1 < width => Some(i + 1),
                        _ => None,
                    };
                    neighbors[i][d.index()] = target.filter(|&t| !walls[t]);
                }
            }
        }

        let mut layout = Layout {
            width,
            height,
            walls,
            dots,
            capsules,
            pacman_start,
            ghost_starts,
            neighbors,
            distances: Vec::new(),
        };
        let from_start = layout.bfs(pacman_start);
        for (i, &d) in from_start.iter().enumerate() {
            if !layout.walls[i] && d == UNREACHABLE {
                return Err(LayoutError::Unreachable { row: i / width, col: i % width });
            }
        }
        let n = width * height;
        let mut distances = vec![UNREACHABLE; n * n];
        for i in 0..n {
            if !layout.walls[i] {
                distances[i * n..(i + 1) * n].copy_from_slice(&layout.bfs(i));
            }
        }
        layout.distances = distances;
        Ok(layout)
    }

    fn bfs(&self, from: CellIndex) -> Vec<u16> {
        let mut dist = vec![UNREACHABLE; self.walls.len()];
        let mut queue = VecDeque::new();
        dist[from] = 0;
        queue.push_back(from);
        while let Some(c) = queue.pop_front() {
            for n in self.neighbors[c].iter().flatten() {
                if dist[*n] == UNREACHABLE {
                    dist[*n] = dist[c] + 1;
                    queue.push_back(*n);
                }
            }
        }
        dist
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// `width * height`, the normalizer for maze distances.
    pub fn area(&self) -> usize {
        self.width * self.height
    }

    pub fn cell_count(&self) -> usize {
        self.walls.len()
    }

    pub fn is_wall(&self, c: CellIndex) -> bool {
        self.walls[c]
    }

    pub fn dots(&self) -> &[CellIndex] {
        &self.dots
    }

    pub fn capsules(&self) -> &[CellIndex] {
        &self.capsules
    }

    pub fn pacman_start(&self) -> CellIndex {
        self.pacman_start
    }

    pub fn ghost_starts(&self) -> &[CellIndex] {
        &self.ghost_starts
    }

    /// Respawn cell of ghost `i` after it is eaten: its start cell.
    pub fn ghost_home(&self, i: usize) -> CellIndex {
        self.ghost_starts[i]
    }

    pub fn pos(&self, c: CellIndex) -> Pos {
        Pos { x: c % self.width, y: c / self.width }
    }

    pub fn index(&self, p: Pos) -> CellIndex {
        p.y * self.width + p.x
    }

    /// Open neighbor of `c` in direction `d`, if any.
    pub fn neighbor(&self, c: CellIndex, d: Direction) -> Option<CellIndex> {
        self.neighbors[c][d.index()]
    }

    /// Directions from `c` that do not lead into a wall.
    pub fn open_directions(&self, c: CellIndex) -> DirectionSet {
        Direction::ALL.into_iter().filter(|d| self.neighbors[c][d.index()].is_some()).collect()
    }

    /// Maze (4-neighbor BFS) distance between two open cells.
    pub fn distance(&self, a: CellIndex, b: CellIndex) -> usize {
        self.distances[a * self.walls.len() + b] as usize
    }

    /// Lower bound on the steps needed to eat every dot from the start: the
    /// weight of a minimum spanning tree over the start and all dot cells
    /// under maze distance. Any clearing walk visits the points in some
    /// order, and that visiting path is itself a spanning tree.
    pub fn clearing_steps_lower_bound(&self) -> usize {
        let mut points: Vec<CellIndex> = Vec::with_capacity(self.dots.len() + 1);
        points.push(self.pacman_start);
        points.extend_from_slice(&self.dots);
        let n = points.len();
        let mut in_tree = vec![false; n];
        let mut best = vec![usize::MAX; n];
        best[0] = 0;
        let mut total = 0;
        for _ in 0..n {
            let (next, _) = best
                .iter()
                .enumerate()
                .filter(|(i, _)| !in_tree[*i])
                .min_by_key(|(_, d)| **d)
                .expect("at least one point left");
            in_tree[next] = true;
            total += best[next];
            for j in 0..n {
                if !in_tree[j] {
                    best[j] = best[j].min(self.distance(points[next], points[j]));
                }
            }
        }
        total
    }
}
