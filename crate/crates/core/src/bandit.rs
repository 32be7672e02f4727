//! Contextual Thompson sampling with linear payoffs.
//!
//! Each arm keeps `B = I + Σ c cᵀ`, `f = Σ c r` and `mu_hat = B⁻¹ f`. At each
//! round a parameter vector is drawn per arm from `N(mu_hat, v² B⁻¹)` and the
//! arm maximizing `cᵀ mu_tilde` is played; only that arm is updated.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{cholesky, dot, solve_lower, solve_lower_transposed};

#[derive(Debug, Clone, PartialEq)]
pub enum BanditError {
    DimensionMismatch {
        expected: usize,
        found: usize,
    },
    /// `B` failed to factor; the arm state is corrupt.
    NotPositiveDefinite,
    NonFinite,
    InvalidConfig(&'static str),
}

impl fmt::Display for BanditError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BanditError::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            BanditError::NotPositiveDefinite => write!(f, "arm matrix B is not positive definite"),
            BanditError::NonFinite => write!(f, "non-finite context or reward"),
            BanditError::InvalidConfig(what) => write!(f, "invalid bandit config: {what}"),
        }
    }
}

impl core::error::Error for BanditError {}

/// Likelihood and confidence constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CtsConfig {
    /// `R > 0`.
    pub r: f64,
    /// `z` in `(0, 1]`.
    pub z: f64,
    /// Confidence parameter in `(0, 1)`.
    pub gamma: f64,
}

impl Default for CtsConfig {
    fn default() -> Self {
        CtsConfig { r: 1.0, z: 1.0, gamma: 0.1 }
    }
}

impl CtsConfig {
    pub fn validate(&self) -> Result<(), BanditError> {
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(BanditError::InvalidConfig("R must be positive"));
        }
        if !(self.z > 0.0 && self.z <= 1.0) {
            return Err(BanditError::InvalidConfig("z must lie in (0, 1]"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(BanditError::InvalidConfig("gamma must lie in (0, 1)"));
        }
        Ok(())
    }

    /// `v = R sqrt((24 / z) d ln(1 / gamma))`.
    pub fn exploration_scale(&self, d: usize) -> f64 {
        self.r * libm::sqrt(24.0 / self.z * d as f64 * libm::log(1.0 / self.gamma))
    }
}

/// Posterior state of one arm.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditArmState {
    d: usize,
    b: Vec<f64>,
    f: Vec<f64>,
    mu_hat: Vec<f64>,
    pulls: u64,
}

impl BanditArmState {
    pub fn new(d: usize) -> Self {
        let mut b = vec![0.0; d * d];
        for i in 0..d {
            b[i * d + i] = 1.0;
        }
        BanditArmState { d, b, f: vec![0.0; d], mu_hat: vec![0.0; d], pulls: 0 }
    }

    /// Rebuilds an arm from persisted `B` (row-major) and `f`; `mu_hat` is
    /// recomputed.
    pub fn from_parts(d: usize, b: Vec<f64>, f: Vec<f64>, pulls: u64) -> Result<Self, BanditError> {
        if b.len() != d * d {
            return Err(BanditError::DimensionMismatch { expected: d * d, found: b.len() });
        }
        if f.len() != d {
            return Err(BanditError::DimensionMismatch { expected: d, found: f.len() });
        }
        if !b.iter().chain(f.iter()).all(|x| x.is_finite()) {
            return Err(BanditError::NonFinite);
        }
        for i in 0..d {
            for j in 0..i {
                if b[i * d + j] != b[j * d + i] {
                    return Err(BanditError::NotPositiveDefinite);
                }
            }
        }
        let mut arm = BanditArmState { d, b, f, mu_hat: vec![0.0; d], pulls };
        arm.mu_hat = arm.solve_b(&arm.f)?;
        Ok(arm)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// `B`, row-major.
    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    pub fn mu_hat(&self) -> &[f64] {
        &self.mu_hat
    }

    pub fn pull_count(&self) -> u64 {
        self.pulls
    }

    fn solve_b(&self, rhs: &[f64]) -> Result<Vec<f64>, BanditError> {
        let l = cholesky(&self.b, self.d).ok_or(BanditError::NotPositiveDefinite)?;
        Ok(solve_lower_transposed(&l, &solve_lower(&l, rhs, self.d), self.d))
    }

    fn check_context(&self, context: &[f64]) -> Result<(), BanditError> {
        if context.len() != self.d {
            return Err(BanditError::DimensionMismatch { expected: self.d, found: context.len() });
        }
        if !context.iter().all(|x| x.is_finite()) {
            return Err(BanditError::NonFinite);
        }
        Ok(())
    }
}

/// Draws `mu_tilde ~ N(mu_hat, v² B⁻¹)`.
///
/// With `B = L Lᵀ` and `z ~ N(0, I)`, `x = L⁻ᵀ z` has covariance `B⁻¹`.
pub fn sample_parameters<R: Rng + ?Sized>(arm: &BanditArmState, v: f64, rng: &mut R) -> Result<Vec<f64>, BanditError> {
    let l = cholesky(&arm.b, arm.d).ok_or(BanditError::NotPositiveDefinite)?;
    let z: Vec<f64> = (0..arm.d).map(|_| rng.sample(StandardNormal)).collect();
    let x = solve_lower_transposed(&l, &z, arm.d);
    Ok(arm.mu_hat.iter().zip(x).map(|(m, xi)| m + v * xi).collect())
}

/// `argmax_k context · samples[k]`, lowest index on ties.
pub fn select_arm(context: &[f64], samples: &[Vec<f64>]) -> Result<usize, BanditError> {
    let mut best: Option<(usize, f64)> = None;
    for (k, s) in samples.iter().enumerate() {
        if s.len() != context.len() {
            return Err(BanditError::DimensionMismatch { expected: context.len(), found: s.len() });
        }
        let score = dot(context, s);
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((k, score));
        }
    }
    best.map(|(k, _)| k).ok_or(BanditError::DimensionMismatch { expected: 1, found: 0 })
}

/// `B += c cᵀ`, `f += c r`, `mu_hat = B⁻¹ f`.
pub fn update(arm: &mut BanditArmState, context: &[f64], reward: f64) -> Result<(), BanditError> {
    arm.check_context(context)?;
    if !reward.is_finite() {
        return Err(BanditError::NonFinite);
    }
    let d = arm.d;
    for i in 0..d {
        for j in 0..d {
            arm.b[i * d + j] += context[i] * context[j];
        }
        arm.f[i] += context[i] * reward;
    }
    arm.mu_hat = arm.solve_b(&arm.f)?;
    arm.pulls += 1;
    Ok(())
}

/// K-armed contextual Thompson sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextualThompson {
    config: CtsConfig,
    d: usize,
    v: f64,
    arms: Vec<BanditArmState>,
}

impl ContextualThompson {
    pub fn new(d: usize, k: usize, config: CtsConfig) -> Result<Self, BanditError> {
        config.validate()?;
        if d == 0 || k == 0 {
            return Err(BanditError::InvalidConfig("need d >= 1 and K >= 1"));
        }
        Ok(ContextualThompson {
            config,
            d,
            v: config.exploration_scale(d),
            arms: (0..k).map(|_| BanditArmState::new(d)).collect(),
        })
    }

    /// Reassembles a bandit from persisted arms.
    pub fn from_arms(config: CtsConfig, arms: Vec<BanditArmState>) -> Result<Self, BanditError> {
        config.validate()?;
        let d = arms.first().map(|a| a.d).ok_or(BanditError::InvalidConfig("no arms"))?;
        if let Some(bad) = arms.iter().find(|a| a.d != d) {
            return Err(BanditError::DimensionMismatch { expected: d, found: bad.d });
        }
        Ok(ContextualThompson { config, d, v: config.exploration_scale(d), arms })
    }

    pub fn config(&self) -> &CtsConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn exploration_scale(&self) -> f64 {
        self.v
    }

    pub fn arms(&self) -> &[BanditArmState] {
        &self.arms
    }

    /// Thompson step: sample every arm, play the best for `context`.
    pub fn choose<R: Rng + ?Sized>(&self, context: &[f64], rng: &mut R) -> Result<usize, BanditError> {
        self.arms[0].check_context(context)?;
        let samples = self.arms.iter().map(|a| sample_parameters(a, self.v, rng)).collect::<Result<Vec<_>, _>>()?;
        select_arm(context, &samples)
    }

    /// Arm maximizing `context · mu_hat`, no sampling.
    pub fn greedy_arm(&self, context: &[f64]) -> Result<usize, BanditError> {
        self.arms[0].check_context(context)?;
        let means: Vec<Vec<f64>> = self.arms.iter().map(|a| a.mu_hat.clone()).collect();
        select_arm(context, &means)
    }

    pub fn update(&mut self, arm: usize, context: &[f64], reward: f64) -> Result<(), BanditError> {
        let k = self.arms.len();
        let a = self.arms.get_mut(arm).ok_or(BanditError::DimensionMismatch { expected: k, found: arm })?;
        update(a, context, reward)
    }
}
