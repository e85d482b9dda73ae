//! A non-strategic expert who searches at no cost and finds the object with
//! probability `q_e`.
//!
//! Conditioning on whether the expert finds the object splits a searcher's
//! win probability into `(1 − q_e)Φ + q_e Φ̃`, where `Φ̃` is the win
//! probability when one extra finder is certain to be in the draw:
//!
//! ```text
//! Φ̃(ĉ) = q[(n+1)x − 1 + (1−x)^{n+1}] / (n(n+1)x²),   x = qF(ĉ),   Φ̃(c̲) = q/2.
//! ```
//!
//! In the expert-keeps variant the expert claims the prize whenever it finds
//! the object, so a searcher only wins when the expert fails.

use serde::{Deserialize, Serialize};

use crate::distributions::CostDistribution;
use crate::equilibrium::{solve_decreasing_fixed_point, solve_threshold, win_prob_from_cdf, ContestConfig, EquilibriumResult};
use crate::error::{ensure_probability, Error, Result};
use crate::numeric::{one_minus_pow_one_minus, DEFAULT_TOL};

/// Below this value of `n·qF` the generalized binomial series replaces the
/// closed form of `Φ̃`, whose numerator cancels to order `(n·qF)²`.
const TILDE_SERIES_SWITCH: f64 = 0.5;
const TILDE_SERIES_MAX_TERMS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RewardMode {
    /// The prize goes to a uniformly drawn finder, the expert included.
    #[default]
    Shared,
    /// The expert keeps the prize whenever it finds the object.
    ExpertKeeps,
}

impl std::str::FromStr for RewardMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shared" => Ok(Self::Shared),
            "expert-keeps" | "expert_keeps" => Ok(Self::ExpertKeeps),
            other => Err(crate::error::invalid(format!("unknown reward mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpertConfig {
    pub q_e: f64,
    #[serde(default)]
    pub reward_mode: RewardMode,
}

impl ExpertConfig {
    pub fn new(q_e: f64, reward_mode: RewardMode) -> Result<Self> {
        ensure_probability("q_e", q_e)?;
        Ok(Self { q_e, reward_mode })
    }

    pub fn shared(q_e: f64) -> Result<Self> {
        Self::new(q_e, RewardMode::Shared)
    }
}

fn phi_tilde_from_cdf(fc: f64, q: f64, n: f64) -> f64 {
    let x = q * fc;
    if n * x < TILDE_SERIES_SWITCH {
        // Σ_{j≥2} C(n+1, j)(−x)^{j−2}, terminating for integer n
        let mut coeff = (n + 1.0) * n / 2.0;
        let mut power = 1.0;
        let mut sum = coeff;
        for j in 3..TILDE_SERIES_MAX_TERMS {
            coeff *= (n + 2.0 - j as f64) / j as f64;
            power *= -x;
            let term = coeff * power;
            sum += term;
            if term.abs() <= 1e-17 * sum.abs() {
                break;
            }
        }
        return q * sum / (n * (n + 1.0));
    }
    let numerator = (n + 1.0) * x - one_minus_pow_one_minus(x, n + 1.0);
    q * numerator / (n * (n + 1.0) * x * x)
}

fn phi_expert_from_cdf(fc: f64, q: f64, n: f64, expert: &ExpertConfig) -> f64 {
    let base = win_prob_from_cdf(fc, q, n);
    match expert.reward_mode {
        RewardMode::Shared => (1.0 - expert.q_e) * base + expert.q_e * phi_tilde_from_cdf(fc, q, n),
        RewardMode::ExpertKeeps => (1.0 - expert.q_e) * base,
    }
}

/// Win probability of a searcher when the expert is certain to be among the finders.
pub fn phi_tilde(d: &CostDistribution, cfg: &ContestConfig, c_hat: f64) -> Result<f64> {
    d.check_support(c_hat)?;
    Ok(phi_tilde_from_cdf(d.cdf(c_hat), cfg.q, cfg.n))
}

/// `Φᵉ(ĉ)`: a searcher's win probability with the expert present.
pub fn phi_expert(d: &CostDistribution, cfg: &ContestConfig, expert: &ExpertConfig, c_hat: f64) -> Result<f64> {
    ensure_probability("q_e", expert.q_e)?;
    d.check_support(c_hat)?;
    Ok(phi_expert_from_cdf(d.cdf(c_hat), cfg.q, cfg.n, expert))
}

/// Equilibrium threshold `cᵉ` solving `ĉ = VΦᵉ(ĉ)`, clamped to the support
/// when the interiority conditions fail.
///
/// `success_prob` is `Pᵉ = (1 − q_e)P(cᵉ) + q_e` and `win_prob` is `Φᵉ(cᵉ)`.
pub fn solve_threshold_expert(d: &CostDistribution, cfg: &ContestConfig, expert: &ExpertConfig) -> Result<EquilibriumResult> {
    cfg.validate()?;
    ensure_probability("q_e", expert.q_e)?;
    let reward = |c: f64| cfg.prize * phi_expert_from_cdf(d.cdf(c), cfg.q, cfg.n, expert);
    let (threshold, interior) = solve_decreasing_fixed_point(d, reward, DEFAULT_TOL);
    let fc = d.cdf(threshold);
    let win_prob = phi_expert_from_cdf(fc, cfg.q, cfg.n, expert);
    let baseline = one_minus_pow_one_minus(cfg.q * fc, cfg.n);
    Ok(EquilibriumResult {
        threshold,
        success_prob: (1.0 - expert.q_e) * baseline + expert.q_e,
        expected_searchers: cfg.n * fc,
        win_prob,
        interior,
        residual: (threshold - cfg.prize * win_prob).abs(),
    })
}

/// `Pᵉ` at the expert equilibrium.
pub fn success_probability_expert(d: &CostDistribution, cfg: &ContestConfig, expert: &ExpertConfig) -> Result<f64> {
    Ok(solve_threshold_expert(d, cfg, expert)?.success_prob)
}

/// Expertise `q̂ₑ = qF(c*(n+1))` at which the expert displaces exactly one agent.
pub fn critical_expertise(d: &CostDistribution, cfg: &ContestConfig) -> Result<f64> {
    let bigger = solve_threshold(d, &cfg.with_n(cfg.n + 1.0))?;
    if !bigger.interior {
        return Err(Error::NoRoot(format!(
            "the {}-agent equilibrium is not interior (threshold {})",
            cfg.n + 1.0,
            bigger.threshold
        )));
    }
    Ok(cfg.q * d.cdf(bigger.threshold))
}
