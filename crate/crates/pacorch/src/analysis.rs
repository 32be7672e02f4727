//! Score bounds, lambda-sweep rows and tipping-point detection.

use std::path::Path;

use pacorch_core::env::{Layout, DOT_REWARD, GHOST_REWARD, WIN_REWARD};

use crate::formats::{write_atomic, FormatError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScoreBounds {
    pub max_score: i64,
    pub max_score_no_ghosts: i64,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum BoundsError {
    /// The declared minimum exceeds what the maze provably needs, so the
    /// resulting bound would not be an upper bound.
    #[error("declared minimum of {declared} steps exceeds the proven lower bound of {proven}")]
    Uncertified { declared: usize, proven: usize },
}

/// `10 * dots + 500 + 200 * ghosts * capsules - min_steps`; the no-ghost
/// bound drops the ghost term. `min_steps` must not exceed the maze's
/// clearing lower bound.
pub fn compute_score_upper_bounds(layout: &Layout, min_steps: usize) -> Result<ScoreBounds, BoundsError> {
    let proven = layout.clearing_steps_lower_bound();
    if min_steps > proven {
        return Err(BoundsError::Uncertified { declared: min_steps, proven });
    }
    let base = DOT_REWARD * layout.dots().len() as i64 + WIN_REWARD - min_steps as i64;
    let ghost_events = (layout.ghost_starts().len() * layout.capsules().len()) as i64;
    Ok(ScoreBounds { max_score: base + GHOST_REWARD * ghost_events, max_score_no_ghosts: base })
}

/// 0 to 1 in steps of 0.05 plus 0.21 to 0.24 in steps of 0.01.
pub fn default_lambda_grid() -> Vec<f64> {
    let mut hundredths: Vec<u32> = (0..=20).map(|i| i * 5).chain(21..=24).collect();
    hundredths.sort_unstable();
    hundredths.into_iter().map(|h| h as f64 / 100.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub lambda: f64,
    pub avg_score: f64,
    pub avg_ghosts_eaten: f64,
    pub win_rate: f64,
    pub games: usize,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SweepError {
    #[error("no sweep rows")]
    Empty,
    #[error("rows must be sorted by strictly increasing lambda (row {0})")]
    Unsorted(usize),
    #[error("row {0} has no games or a negative ghost count")]
    InvalidRow(usize),
}

pub const SWEEP_HEADER: &str = "lambda,avg_score,avg_ghosts_eaten,win_rate,games";

pub fn sweep_csv(rows: &[SweepRow]) -> Result<String, SweepError> {
    if rows.is_empty() {
        return Err(SweepError::Empty);
    }
    for (i, r) in rows.iter().enumerate() {
        if r.games == 0 || !(r.avg_ghosts_eaten >= 0.0) {
            return Err(SweepError::InvalidRow(i));
        }
        if i > 0 && !(rows[i - 1].lambda < r.lambda) {
            return Err(SweepError::Unsorted(i));
        }
    }
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{:.4},{:.2},{:.4},{:.4},{}\n",
            r.lambda, r.avg_score, r.avg_ghosts_eaten, r.win_rate, r.games
        ));
    }
    Ok(out)
}

#[derive(Debug, thiserror::Error)]
pub enum EmitError {
    #[error(transparent)]
    Rows(#[from] SweepError),
    #[error(transparent)]
    Write(#[from] FormatError),
}

pub fn emit_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<(), EmitError> {
    let text = sweep_csv(rows)?;
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

/// Ghost count below which behaviour counts as ghost-avoiding.
pub const TIPPING_THRESHOLD: f64 = 0.5;

/// Adjacent lambdas between which `avg_ghosts_eaten` falls below
/// [`TIPPING_THRESHOLD`] for good. `None` if it never does, or if it is
/// below from the first row on.
pub fn find_tipping_point(rows: &[SweepRow]) -> Option<(f64, f64)> {
    let last_high = rows.iter().rposition(|r| r.avg_ghosts_eaten >= TIPPING_THRESHOLD)?;
    let next = rows.get(last_high + 1)?;
    Some((rows[last_high].lambda, next.lambda))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(lambda: f64, ghosts: f64) -> SweepRow {
        SweepRow { lambda, avg_score: 1000.0, avg_ghosts_eaten: ghosts, win_rate: 0.9, games: 100 }
    }

    #[test]
    fn csv_single_row_exact() {
        let r = SweepRow { lambda: 0.4, avg_score: 1500.0, avg_ghosts_eaten: 0.05, win_rate: 0.8, games: 100 };
        assert_eq!(
            sweep_csv(&[r]).unwrap(),
            "lambda,avg_score,avg_ghosts_eaten,win_rate,games\n0.4000,1500.00,0.0500,0.8000,100\n"
        );
    }

    #[test]
    fn csv_rejects_bad_input() {
        assert_eq!(sweep_csv(&[]), Err(SweepError::Empty));
        assert_eq!(sweep_csv(&[row(0.5, 1.0), row(0.2, 1.0)]), Err(SweepError::Unsorted(1)));
        assert_eq!(sweep_csv(&[row(0.2, 1.0), row(0.2, 1.0)]), Err(SweepError::Unsorted(1)));
    }

    #[test]
    fn tipping_point_cases() {
        let shaped = [row(0.0, 1.5), row(0.2, 1.4), row(0.21, 0.6), row(0.22, 0.02), row(1.0, 0.0)];
        assert_eq!(find_tipping_point(&shaped), Some((0.21, 0.22)));
        // A relapse above the threshold moves the crossing later.
        let relapse = [row(0.0, 1.5), row(0.1, 0.1), row(0.2, 0.9), row(0.3, 0.0)];
        assert_eq!(find_tipping_point(&relapse), Some((0.2, 0.3)));
        assert_eq!(find_tipping_point(&[row(0.0, 0.0), row(1.0, 0.0)]), None);
        assert_eq!(find_tipping_point(&[row(0.0, 2.0), row(1.0, 1.0)]), None);
    }

    #[test]
    fn default_grid_shape() {
        let g = default_lambda_grid();
        assert_eq!(g.len(), 25);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!(g.contains(&0.4) && g.contains(&0.21) && g.contains(&0.25));
    }

    #[test]
    fn bounds_examples() {
        let canonical = Layout::parse(pacorch_core::layouts::CANONICAL).unwrap();
        assert_eq!(
            compute_score_upper_bounds(&canonical, 100).unwrap(),
            ScoreBounds { max_score: 2170, max_score_no_ghosts: 1370 }
        );
        let tiny = Layout::parse("P.").unwrap();
        assert_eq!(compute_score_upper_bounds(&tiny, 1).unwrap().max_score, 509);
        assert_eq!(compute_score_upper_bounds(&tiny, 2), Err(BoundsError::Uncertified { declared: 2, proven: 1 }));
    }
}
