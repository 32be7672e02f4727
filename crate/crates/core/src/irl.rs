//! Apprenticeship learning by the projection method.
//!
//! Feature expectations are discounted sums of the per-step event vector
//! averaged over episodes. The projection loop repeatedly trains a policy on
//! `w = mu_E - mu_bar`, measures its feature expectations and moves `mu_bar`
//! to the closest point on the segment toward them.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, RngCore};

use crate::env::{legal_actions, Layout, Provenance, RewardWeights, NATIVE_WEIGHTS};
use crate::linear_q::{train_q, LinearQPolicy, QError, QTrainConfig};
use crate::rollout::{episode_seed, record_episode, Trajectory};
use crate::{rng_from_seed, GameRng};

/// Ghost weight used to build the synthetic constrained expert.
pub const CONSTRAINED_GHOST_PENALTY: f64 = -1000.0;

/// L1 norm of the native weights.
pub const DEFAULT_TARGET_L1: f64 = 1210.0;

#[derive(Debug, Clone, PartialEq)]
pub enum IrlError {
    EmptyInput,
    /// Trajectory at this index has no steps.
    EmptyTrajectory(usize),
    InvalidGamma(f64),
    InvalidConfig(&'static str),
    NonFinite {
        iteration: usize,
    },
    ZeroWeights,
    /// The expert already matches the baseline policy; there is nothing to
    /// learn from.
    Degenerate,
    Q(QError),
}

impl fmt::Display for IrlError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IrlError::EmptyInput => write!(f, "no trajectories"),
            IrlError::EmptyTrajectory(i) => write!(f, "trajectory {i} is empty"),
            IrlError::InvalidGamma(g) => write!(f, "discount {g} outside (0, 1)"),
            IrlError::InvalidConfig(what) => write!(f, "invalid IRL config: {what}"),
            IrlError::NonFinite { iteration } => write!(f, "non-finite values at iteration {iteration}"),
            IrlError::ZeroWeights => write!(f, "weight vector is zero"),
            IrlError::Degenerate => write!(f, "expert feature expectations equal the baseline"),
            IrlError::Q(e) => write!(f, "policy training failed: {e}"),
        }
    }
}

impl core::error::Error for IrlError {}

impl From<QError> for IrlError {
    fn from(e: QError) -> Self {
        IrlError::Q(e)
    }
}

fn check_gamma(gamma: f64) -> Result<(), IrlError> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(IrlError::InvalidGamma(gamma))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureExpectations {
    pub mu: [f64; 4],
    pub gamma: f64,
    pub sample_count: usize,
}

impl FeatureExpectations {
    pub fn dot(&self, w: &RewardWeights) -> f64 {
        self.mu.iter().zip(w.w.iter()).map(|(m, w)| m * w).sum()
    }
}

/// Average over trajectories of `sum_t gamma^t phi_t`.
pub fn empirical_feature_expectations(
    trajectories: &[Trajectory],
    gamma: f64,
) -> Result<FeatureExpectations, IrlError> {
    check_gamma(gamma)?;
    if trajectories.is_empty() {
        return Err(IrlError::EmptyInput);
    }
    let mut mu = [0.0; 4];
    for (i, t) in trajectories.iter().enumerate() {
        if t.is_empty() {
            return Err(IrlError::EmptyTrajectory(i));
        }
        for (m, x) in mu.iter_mut().zip(t.discounted_features(gamma)) {
            *m += x;
        }
    }
    let n = trajectories.len() as f64;
    for m in &mut mu {
        *m /= n;
    }
    Ok(FeatureExpectations { mu, gamma, sample_count: trajectories.len() })
}

fn rollout_expectations<F>(
    layout: &Layout,
    gamma: f64,
    rollouts: usize,
    max_steps: usize,
    base_seed: u64,
    mut choose: F,
) -> Result<FeatureExpectations, IrlError>
where
    F: FnMut(&crate::env::GameState) -> Result<crate::env::Direction, QError>,
{
    check_gamma(gamma)?;
    if rollouts == 0 {
        return Err(IrlError::InvalidConfig("rollouts must be positive"));
    }
    let mut mu = [0.0; 4];
    for i in 0..rollouts {
        let (traj, _) = record_episode(layout, "", episode_seed(base_seed, i as u64), max_steps, &mut choose)?;
        for (m, x) in mu.iter_mut().zip(traj.discounted_features(gamma)) {
            *m += x;
        }
    }
    for m in &mut mu {
        *m /= rollouts as f64;
    }
    Ok(FeatureExpectations { mu, gamma, sample_count: rollouts })
}

/// Monte-Carlo feature expectations of the greedy `policy`.
pub fn policy_feature_expectations<R: RngCore + ?Sized>(
    policy: &LinearQPolicy,
    layout: &Layout,
    gamma: f64,
    rollouts: usize,
    max_steps: usize,
    rng: &mut R,
) -> Result<FeatureExpectations, IrlError> {
    let base = rng.next_u64();
    rollout_expectations(layout, gamma, rollouts, max_steps, base, |s| policy.greedy_action(layout, s))
}

/// Feature expectations of the uniform random policy over legal actions.
pub fn random_policy_feature_expectations<R: RngCore + ?Sized>(
    layout: &Layout,
    gamma: f64,
    rollouts: usize,
    max_steps: usize,
    rng: &mut R,
) -> Result<FeatureExpectations, IrlError> {
    let base = rng.next_u64();
    let mut agent = rng_from_seed(rng.next_u64());
    rollout_expectations(layout, gamma, rollouts, max_steps, base, |s| {
        let legal = legal_actions(layout, s)?;
        Ok(legal.nth(agent.random_range(0..legal.len())).expect("index below len"))
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionConfig {
    /// Stop once `||mu_E - mu_bar||_2` drops below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Give up after this many iterations without a smaller margin.
    pub patience: usize,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig { tolerance: 0.05, max_iterations: 20, patience: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IrlStatus {
    Converged,
    MaxIterations,
    /// Margin stopped improving; the best candidate so far is still returned.
    Stalled,
}

impl IrlStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            IrlStatus::Converged => "converged",
            IrlStatus::MaxIterations => "max-iterations",
            IrlStatus::Stalled => "stalled",
        }
    }
}

/// One projection iteration: the weights tried, the margin
/// `||mu_E - mu_bar||_2` they were built from, the feature expectations of
/// the resulting policy and their distance to the expert.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionStep {
    pub weights: Vec<f64>,
    pub margin: f64,
    pub mu: Vec<f64>,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionOutcome {
    pub steps: Vec<ProjectionStep>,
    pub status: IrlStatus,
    /// Margin after the last update of `mu_bar`.
    pub final_margin: f64,
}

impl ProjectionOutcome {
    /// Index of the step whose policy came closest to the expert; first on
    /// ties.
    pub fn closest(&self) -> usize {
        let mut best = 0;
        for (i, s) in self.steps.iter().enumerate() {
            if s.distance < self.steps[best].distance {
                best = i;
            }
        }
        best
    }
}

fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Projection loop over an arbitrary feature space. `solve(i, w)` must
/// return the feature expectations of a policy (near-)optimal for `w`.
pub fn projection_method<F>(
    expert: &[f64],
    baseline: &[f64],
    config: &ProjectionConfig,
    mut solve: F,
) -> Result<ProjectionOutcome, IrlError>
where
    F: FnMut(usize, &[f64]) -> Result<Vec<f64>, IrlError>,
{
    if !(config.tolerance >= 0.0) || config.max_iterations == 0 || config.patience == 0 {
        return Err(IrlError::InvalidConfig("need tolerance >= 0, iterations >= 1, patience >= 1"));
    }
    if expert.len() != baseline.len() {
        return Err(IrlError::InvalidConfig("expert and baseline dimensions differ"));
    }
    if !expert.iter().chain(baseline).all(|x| x.is_finite()) {
        return Err(IrlError::NonFinite { iteration: 0 });
    }
    let mut mu_bar = baseline.to_vec();
    let mut margin = norm(&sub(expert, &mu_bar));
    if margin < config.tolerance || margin == 0.0 {
        return Err(IrlError::Degenerate);
    }
    let mut steps = Vec::new();
    let mut best = margin;
    let mut stale = 0;
    let mut status = IrlStatus::MaxIterations;
    for i in 0..config.max_iterations {
        let w = sub(expert, &mu_bar);
        let mu = solve(i, &w)?;
        if mu.len() != expert.len() || !mu.iter().all(|x| x.is_finite()) {
            return Err(IrlError::NonFinite { iteration: i });
        }
        let distance = norm(&sub(expert, &mu));
        let d = sub(&mu, &mu_bar);
        let dd: f64 = d.iter().map(|x| x * x).sum();
        if dd > 0.0 {
            let num: f64 = d.iter().zip(&w).map(|(a, b)| a * b).sum();
            let c = (num / dd).clamp(0.0, 1.0);
            for (m, di) in mu_bar.iter_mut().zip(&d) {
                *m += c * di;
            }
        }
        steps.push(ProjectionStep { weights: w, margin, mu, distance });
        margin = norm(&sub(expert, &mu_bar));
        if !margin.is_finite() {
            return Err(IrlError::NonFinite { iteration: i });
        }
        if margin < config.tolerance {
            status = IrlStatus::Converged;
            break;
        }
        if margin < best {
            best = margin;
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                status = IrlStatus::Stalled;
                break;
            }
        }
    }
    Ok(ProjectionOutcome { steps, status, final_margin: margin })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrlConfig {
    /// Discount for feature expectations.
    pub gamma: f64,
    pub rollouts: usize,
    pub max_steps: usize,
    pub projection: ProjectionConfig,
    /// Inner policy training; its seed is replaced per iteration.
    pub train: QTrainConfig,
    pub seed: u64,
}

impl Default for IrlConfig {
    fn default() -> Self {
        IrlConfig {
            gamma: 0.99,
            rollouts: 100,
            max_steps: 400,
            projection: ProjectionConfig::default(),
            train: QTrainConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrlCandidate {
    pub weights: [f64; 4],
    pub margin: f64,
    pub mu: [f64; 4],
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrlResult {
    pub candidates: Vec<IrlCandidate>,
    pub selected: usize,
    pub iterations: usize,
    pub status: IrlStatus,
    pub final_margin: f64,
    pub baseline_mu: [f64; 4],
    pub provenance: Provenance,
}

impl IrlResult {
    pub fn selected_weights(&self) -> RewardWeights {
        RewardWeights::new(self.candidates[self.selected].weights, self.provenance)
    }
}

fn to4(v: &[f64]) -> [f64; 4] {
    let mut a = [0.0; 4];
    a.copy_from_slice(v);
    a
}

/// Projection IRL on the game. Candidate `i` is trained with seed drawn from
/// the config seed, so the whole run is a function of `config`.
pub fn projection_irl(
    expert: &FeatureExpectations,
    layout: &Layout,
    config: &IrlConfig,
    provenance: Provenance,
) -> Result<IrlResult, IrlError> {
    check_gamma(config.gamma)?;
    if (expert.gamma - config.gamma).abs() > 0.0 {
        return Err(IrlError::InvalidConfig("expert feature expectations use a different discount"));
    }
    let mut rng: GameRng = rng_from_seed(config.seed);
    let baseline =
        random_policy_feature_expectations(layout, config.gamma, config.rollouts, config.max_steps, &mut rng)?;
    let outcome = projection_method(&expert.mu, &baseline.mu, &config.projection, |_, w| {
        let weights = RewardWeights::new(to4(w), provenance);
        let train = QTrainConfig { seed: rng.next_u64(), ..config.train.clone() };
        let trained = train_q(layout, &weights, &train)?;
        let fe = policy_feature_expectations(
            &trained.policy,
            layout,
            config.gamma,
            config.rollouts,
            config.max_steps,
            &mut rng,
        )?;
        Ok(fe.mu.to_vec())
    })?;
    let candidates: Vec<IrlCandidate> = outcome
        .steps
        .iter()
        .map(|s| IrlCandidate { weights: to4(&s.weights), margin: s.margin, mu: to4(&s.mu), distance: s.distance })
        .collect();
    Ok(IrlResult {
        selected: outcome.closest(),
        iterations: candidates.len(),
        candidates,
        status: outcome.status,
        final_margin: outcome.final_margin,
        baseline_mu: baseline.mu,
        provenance,
    })
}

/// `w * target_l1 / ||w||_1`.
pub fn scale_weights(w: &RewardWeights, target_l1: f64) -> Result<RewardWeights, IrlError> {
    if !(target_l1 > 0.0 && target_l1.is_finite()) {
        return Err(IrlError::InvalidConfig("target L1 must be positive"));
    }
    if !w.is_finite() {
        return Err(IrlError::NonFinite { iteration: 0 });
    }
    let l1 = w.l1_norm();
    if l1 == 0.0 {
        return Err(IrlError::ZeroWeights);
    }
    let k = target_l1 / l1;
    Ok(RewardWeights::new(w.w.map(|x| x * k), w.provenance))
}

/// Rolls out `count` episodes of `policy` where each step is replaced by a
/// uniform random legal action with probability `error_rate`.
pub fn generate_demos(
    policy: &LinearQPolicy,
    layout: &Layout,
    layout_id: &str,
    count: usize,
    error_rate: f64,
    max_steps: usize,
    seed: u64,
) -> Result<Vec<Trajectory>, IrlError> {
    if !(0.0..=1.0).contains(&error_rate) {
        return Err(IrlError::InvalidConfig("error rate outside [0, 1]"));
    }
    let mut agent = rng_from_seed(episode_seed(seed, u64::MAX));
    let mut demos = Vec::with_capacity(count);
    for i in 0..count {
        let (traj, _) = record_episode(layout, layout_id, episode_seed(seed, i as u64), max_steps, |s| {
            if error_rate > 0.0 && agent.random_bool(error_rate) {
                let legal = legal_actions(layout, s)?;
                Ok(legal.nth(agent.random_range(0..legal.len())).expect("index below len"))
            } else {
                policy.greedy_action(layout, s)
            }
        })?;
        demos.push(traj);
    }
    Ok(demos)
}

/// Native weights with the ghost component replaced by
/// [`CONSTRAINED_GHOST_PENALTY`].
pub fn constrained_expert_weights() -> RewardWeights {
    let mut w = NATIVE_WEIGHTS;
    w.w[2] = CONSTRAINED_GHOST_PENALTY;
    w
}

#[derive(Debug, Clone)]
pub struct ConstrainedDemos {
    pub expert: LinearQPolicy,
    pub demos: Vec<Trajectory>,
}

/// Trains the ghost-averse expert and records noisy demonstrations from it.
pub fn generate_constrained_demos(
    layout: &Layout,
    layout_id: &str,
    count: usize,
    error_rate: f64,
    train: &QTrainConfig,
    max_steps: usize,
    seed: u64,
) -> Result<ConstrainedDemos, IrlError> {
    let expert = train_q(layout, &constrained_expert_weights(), train)?.policy;
    let demos = generate_demos(&expert, layout, layout_id, count, error_rate, max_steps, seed)?;
    Ok(ConstrainedDemos { expert, demos })
}

/// Cosine similarity of two weight vectors.
pub fn cosine(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    dot / (norm(a) * norm(b))
}

/// Short label for a feature index.
pub fn event_name(i: usize) -> &'static str {
    ["dotsEaten", "won", "ghostsEaten", "lost"][i]
}

/// Renders weights as `(a, b, c, d)` with two decimals.
pub fn format_weights(w: &[f64; 4]) -> String {
    alloc::format!("({:.2}, {:.2}, {:.2}, {:.2})", w[0], w[1], w[2], w[3])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Direction, EventFeatures as Phi};
    use crate::rollout::TrajectoryStep;
    use alloc::vec;

    fn traj(phis: &[[f64; 4]]) -> Trajectory {
        Trajectory {
            layout_id: "t".into(),
            seed: 0,
            steps: phis.iter().map(|p| TrajectoryStep { action: Direction::East, phi: Phi(*p) }).collect(),
        }
    }

    #[test]
    fn eq3_examples() {
        let a = empirical_feature_expectations(&[traj(&[[1.0, 0.0, 0.0, 0.0]])], 0.9).unwrap();
        assert_eq!(a.mu, [1.0, 0.0, 0.0, 0.0]);
        let b = empirical_feature_expectations(&[traj(&[[1.0, 0.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0]])], 0.5).unwrap();
        assert_eq!(b.mu, [1.5, 0.0, 0.0, 0.0]);
        let c = empirical_feature_expectations(&[traj(&[[1.0, 0.0, 0.0, 0.0]]), traj(&[[0.0, 0.0, 1.0, 0.0]])], 0.9)
            .unwrap();
        assert_eq!(c.mu, [0.5, 0.0, 0.5, 0.0]);
        assert_eq!(c.sample_count, 2);
    }

    #[test]
    fn eq3_errors() {
        assert_eq!(empirical_feature_expectations(&[], 0.9), Err(IrlError::EmptyInput));
        assert_eq!(empirical_feature_expectations(&[traj(&[])], 0.9), Err(IrlError::EmptyTrajectory(0)));
        assert_eq!(empirical_feature_expectations(&[traj(&[[0.0; 4]])], 1.0), Err(IrlError::InvalidGamma(1.0)));
    }

    #[test]
    fn scale_examples() {
        let w = RewardWeights::new([1.0, 1.0, -1.0, -1.0], Provenance::LearnedFromDemos);
        assert_eq!(scale_weights(&w, 8.0).unwrap().w, [2.0, 2.0, -2.0, -2.0]);
        assert_eq!(scale_weights(&w, 4.0).unwrap().w, w.w);
        let zero = RewardWeights::new([0.0; 4], Provenance::LearnedFromDemos);
        assert_eq!(scale_weights(&zero, 1.0), Err(IrlError::ZeroWeights));
    }

    #[test]
    fn dot_free_corridor_has_zero_expectations() {
        let l = Layout::parse("%%%%%%\n%P   %\n%%%%%%").unwrap();
        let p = LinearQPolicy::zeros(0.9).unwrap();
        let fe = policy_feature_expectations(&p, &l, 0.9, 3, 20, &mut rng_from_seed(1)).unwrap();
        assert_eq!(fe.mu, [0.0; 4]);
    }

    #[test]
    fn deterministic_world_ignores_rollout_count() {
        let l = Layout::parse("%%%%%%%\n%P.. .%\n%%%%%%%").unwrap();
        let p = LinearQPolicy::new([0.0, 1.0, -1.0, 0.0, 0.0, 0.0, 0.0], 0.9).unwrap();
        let one = policy_feature_expectations(&p, &l, 0.9, 1, 50, &mut rng_from_seed(1)).unwrap();
        let ten = policy_feature_expectations(&p, &l, 0.9, 10, 50, &mut rng_from_seed(2)).unwrap();
        for (a, b) in one.mu.iter().zip(ten.mu) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(one.mu[1] > 0.0);
    }

    #[test]
    fn error_rate_extremes() {
        let l = Layout::parse(crate::layouts::CANONICAL).unwrap();
        let p = LinearQPolicy::new([0.0, 1.0, -1.0, 0.0, 0.0, 0.0, -1.0], 0.9).unwrap();
        let demos = generate_demos(&p, &l, "c", 3, 0.0, 50, 9).unwrap();
        for d in &demos {
            let states = d.replay(&l).unwrap();
            for (s, st) in states.iter().zip(&d.steps) {
                assert_eq!(p.greedy_action(&l, s).unwrap(), st.action);
            }
        }
        assert!(generate_demos(&p, &l, "c", 1, 1.5, 50, 9).is_err());
        // Pure random walk still replays.
        let walk = generate_demos(&p, &l, "c", 2, 1.0, 50, 9).unwrap();
        walk[0].replay(&l).unwrap();
    }

    /// Exact discounted state occupancy of a deterministic or stochastic
    /// policy on a 3-state chain, by solving `(I - gamma T^T) mu = d0`.
    fn chain_occupancy(policy: &[[f64; 2]; 3], gamma: f64) -> Vec<f64> {
        // Action 0 moves left, action 1 moves right; the ends reflect.
        let next = |s: usize, a: usize| if a == 0 { s.saturating_sub(1) } else { (s + 1).min(2) };
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        for s in 0..3 {
            for a in 0..2 {
                m[next(s, a)][s] -= gamma * policy[s][a];
            }
        }
        let mut rhs = [1.0, 0.0, 0.0];
        // Gaussian elimination; the system is small and well conditioned.
        for c in 0..3 {
            let p = (c..3).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs())).unwrap();
            m.swap(c, p);
            rhs.swap(c, p);
            for r in 0..3 {
                if r != c {
                    let k = m[r][c] / m[c][c];
                    for j in 0..3 {
                        m[r][j] -= k * m[c][j];
                    }
                    rhs[r] -= k * rhs[c];
                }
            }
        }
        (0..3).map(|i| rhs[i] / m[i][i]).collect()
    }

    fn all_deterministic() -> Vec<[[f64; 2]; 3]> {
        let mut out = Vec::new();
        for code in 0..8 {
            let mut p = [[0.0; 2]; 3];
            for (s, row) in p.iter_mut().enumerate() {
                row[(code >> s) & 1] = 1.0;
            }
            out.push(p);
        }
        out
    }

    fn best_policy(w: &[f64], gamma: f64) -> Vec<f64> {
        all_deterministic()
            .into_iter()
            .map(|p| chain_occupancy(&p, gamma))
            .max_by(|a, b| {
                let va: f64 = a.iter().zip(w).map(|(x, y)| x * y).sum();
                let vb: f64 = b.iter().zip(w).map(|(x, y)| x * y).sum();
                va.total_cmp(&vb)
            })
            .unwrap()
    }

    #[test]
    fn chain_recovers_reward_up_to_constant_shift() {
        let gamma = 0.9;
        let truth = [0.0, 0.0, 1.0];
        let expert = best_policy(&truth, gamma);
        let baseline = chain_occupancy(&[[0.5, 0.5]; 3], gamma);
        let out = projection_method(&expert, &baseline, &ProjectionConfig::default(), |_, w| Ok(best_policy(w, gamma)))
            .unwrap();
        assert_eq!(out.status, IrlStatus::Converged);
        let w = &out.steps[out.closest()].weights;
        // Occupancies of every policy sum to 1 / (1 - gamma), so only the
        // component of the reward orthogonal to (1, 1, 1) is identifiable.
        let centered = [-1.0 / 3.0, -1.0 / 3.0, 2.0 / 3.0];
        let cos = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (norm(a) * norm(b));
        assert!(cos(w, &centered) >= 0.99, "{w:?}");
        assert!(cos(w, &truth) <= libm::sqrt(2.0 / 3.0) + 1e-12);
        // The expert stays optimal under the recovered weights.
        let value = |mu: &[f64]| mu.iter().zip(w).map(|(x, y)| x * y).sum::<f64>();
        assert!((value(&best_policy(w, gamma)) - value(&expert)).abs() < 1e-9);
    }

    #[test]
    fn projection_rejects_degenerate_expert() {
        let r = projection_method(&[1.0, 2.0], &[1.0, 2.0], &ProjectionConfig::default(), |_, _| Ok(vec![0.0, 0.0]));
        assert_eq!(r, Err(IrlError::Degenerate));
    }

    #[test]
    fn projection_stalls_when_solver_is_useless() {
        let cfg = ProjectionConfig { tolerance: 0.01, max_iterations: 20, patience: 3 };
        let out = projection_method(&[1.0, 0.0], &[0.0, 0.0], &cfg, |_, _| Ok(vec![0.0, 0.0])).unwrap();
        assert_eq!(out.status, IrlStatus::Stalled);
        assert_eq!(out.steps.len(), 3);
        assert!(out.steps.iter().all(|s| s.margin == 1.0));
    }

    #[test]
    fn projection_rejects_non_finite() {
        let r =
            projection_method(&[1.0, 0.0], &[0.0, 0.0], &ProjectionConfig::default(), |_, _| Ok(vec![f64::NAN, 0.0]));
        assert_eq!(r, Err(IrlError::NonFinite { iteration: 0 }));
    }

    #[test]
    fn margins_are_nonnegative_and_shrink_with_clamping() {
        let expert = [3.0, 1.0];
        let mut k = 0.0;
        let out = projection_method(&expert, &[0.0, 0.0], &ProjectionConfig::default(), |_, _| {
            k += 1.0;
            Ok(vec![3.0 + 1.0 / k, 0.5])
        })
        .unwrap();
        for pair in out.steps.windows(2) {
            assert!(pair[1].margin >= 0.0 && pair[1].margin <= pair[0].margin + 1e-12);
        }
    }

    #[test]
    fn cosine_of_native_with_itself() {
        assert!((cosine(&NATIVE_WEIGHTS.w, &NATIVE_WEIGHTS.w) - 1.0).abs() < 1e-12);
    }
}
