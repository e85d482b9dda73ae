//! Symmetric threshold equilibrium of the winner-takes-all crowdsearch game.
//!
//! With every rival searching below the cutoff `ĉ`, a searching agent wins with
//! probability
//!
//! ```text
//! Φ(ĉ) = (1 − (1 − qF(ĉ))ⁿ) / (n F(ĉ)),   Φ(c̲) = q,
//! ```
//!
//! the chance the object is found divided by the expected number of searchers.
//! The equilibrium cutoff solves `ĉ = V Φ(ĉ)`; since `Φ` is strictly decreasing
//! the map `ĉ ↦ ĉ − VΦ(ĉ)` has a single sign change and bisection is safe.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::CostDistribution;
use crate::error::{ensure_finite, ensure_probability, invalid, Error, Result};
use crate::numeric::{self, bisect, one_minus_pow_one_minus, DEFAULT_TOL};

/// Below this value of `qF(ĉ)` the win probability is evaluated by its series.
pub(crate) const SERIES_SWITCH: f64 = 1e-8;
/// The three-term series is only used while `n·qF(ĉ)` is also small; its
/// truncation error is of order `(n·qF)³`.
const SERIES_SWITCH_CROWD: f64 = 1e-4;

/// Baseline contest parameters. `n` is real so that it can be varied continuously.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContestConfig {
    pub n: f64,
    pub q: f64,
    pub prize: f64,
}

impl ContestConfig {
    pub fn new(n: f64, q: f64, prize: f64) -> Result<Self> {
        let cfg = Self { n, q, prize };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("n", self.n)?;
        ensure_finite("prize", self.prize)?;
        ensure_probability("q", self.q)?;
        if self.n < 1.0 {
            return Err(invalid(format!("n must be >= 1, got {}", self.n)));
        }
        if self.prize <= 0.0 {
            return Err(invalid(format!("prize must be > 0, got {}", self.prize)));
        }
        Ok(())
    }

    pub fn with_n(self, n: f64) -> Self {
        Self { n, ..self }
    }

    pub fn with_prize(self, prize: f64) -> Self {
        Self { prize, ..self }
    }

    pub fn with_q(self, q: f64) -> Self {
        Self { q, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub threshold: f64,
    pub success_prob: f64,
    pub expected_searchers: f64,
    pub win_prob: f64,
    pub interior: bool,
    pub residual: f64,
}

/// Win probability of a searcher given the rivals' search rate `F(ĉ) = fc`.
pub(crate) fn win_prob_from_cdf(fc: f64, q: f64, n: f64) -> f64 {
    let x = q * fc;
    if x < SERIES_SWITCH && n * x < SERIES_SWITCH_CROWD {
        let m = n - 1.0;
        return q * (1.0 - m * x / 2.0 + m * (n - 2.0) * x * x / 6.0);
    }
    one_minus_pow_one_minus(x, n) / (n * fc)
}

/// `Φ(ĉ, q, n)`.
pub fn phi(d: &CostDistribution, cfg: &ContestConfig, c_hat: f64) -> Result<f64> {
    d.check_support(c_hat)?;
    Ok(win_prob_from_cdf(d.cdf(c_hat), cfg.q, cfg.n))
}

/// `P(ĉ, q, n) = 1 − (1 − qF(ĉ))ⁿ`.
pub fn success_probability(d: &CostDistribution, cfg: &ContestConfig, c_hat: f64) -> Result<f64> {
    d.check_support(c_hat)?;
    Ok(one_minus_pow_one_minus(cfg.q * d.cdf(c_hat), cfg.n))
}

/// Solve a symmetric fixed point `ĉ = reward(ĉ)` where `reward` is strictly
/// decreasing, clamping to the support ends when no interior crossing exists.
pub(crate) fn solve_decreasing_fixed_point<R>(d: &CostDistribution, reward: R, tol: f64) -> (f64, bool)
where
    R: Fn(f64) -> f64,
{
    let (lo, hi) = d.support();
    if reward(lo) <= lo {
        return (lo, false);
    }
    if reward(hi) >= hi {
        return (hi, false);
    }
    (bisect(|c| c - reward(c), lo, hi, tol, true), true)
}

pub(crate) fn result_at(
    d: &CostDistribution,
    cfg: &ContestConfig,
    threshold: f64,
    interior: bool,
    win_prob: f64,
) -> EquilibriumResult {
    let fc = d.cdf(threshold);
    EquilibriumResult {
        threshold,
        success_prob: one_minus_pow_one_minus(cfg.q * fc, cfg.n),
        expected_searchers: cfg.n * fc,
        win_prob,
        interior,
        residual: (threshold - cfg.prize * win_prob).abs(),
    }
}

/// Unique symmetric equilibrium threshold `c*(V, q, n)`.
pub fn solve_threshold(d: &CostDistribution, cfg: &ContestConfig) -> Result<EquilibriumResult> {
    solve_threshold_with_tol(d, cfg, DEFAULT_TOL)
}

pub fn solve_threshold_with_tol(d: &CostDistribution, cfg: &ContestConfig, tol: f64) -> Result<EquilibriumResult> {
    cfg.validate()?;
    if !(tol > 0.0) {
        return Err(invalid(format!("tolerance must be > 0, got {tol}")));
    }
    let reward = |c: f64| cfg.prize * win_prob_from_cdf(d.cdf(c), cfg.q, cfg.n);
    let (c, interior) = solve_decreasing_fixed_point(d, reward, tol);
    let win = win_prob_from_cdf(d.cdf(c), cfg.q, cfg.n);
    Ok(result_at(d, cfg, c, interior, win))
}

/// The two interiority inequalities at the support ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InteriorityReport {
    /// `qV − c̲`; positive when the lower inequality holds.
    pub lower_margin: f64,
    /// `c̄ − V(1 − (1−q)ⁿ)/n`; positive when the upper inequality holds.
    pub upper_margin: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

impl InteriorityReport {
    pub fn passed(&self) -> bool {
        self.lower_ok && self.upper_ok
    }
}

pub fn check_interiority(d: &CostDistribution, cfg: &ContestConfig) -> InteriorityReport {
    let lower_margin = cfg.q * cfg.prize - d.lower();
    let upper_margin = d.upper() - cfg.prize * one_minus_pow_one_minus(cfg.q, cfg.n) / cfg.n;
    InteriorityReport {
        lower_margin,
        upper_margin,
        lower_ok: lower_margin > 0.0,
        upper_ok: upper_margin > 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: f64,
    pub threshold: f64,
    pub success_prob: f64,
    pub interior: bool,
}

/// Equilibria over a list of crowd sizes; rows keep the input order.
pub fn sweep_n(d: &CostDistribution, q: f64, prize: f64, ns: &[f64]) -> Result<Vec<SweepRow>> {
    ns.par_iter()
        .map(|&n| {
            let r = solve_threshold(d, &ContestConfig::new(n, q, prize)?)?;
            Ok(SweepRow {
                n,
                threshold: r.threshold,
                success_prob: r.success_prob,
                interior: r.interior,
            })
        })
        .collect()
}

/// Whether `dP*/dn ≥ 0` at the equilibrium threshold `c_star`:
///
/// ```text
/// (1−qF) ln(1−qF) / (−qF)  ≥  1 / (1 + F/(c f))
/// ```
pub fn dpdn_holds(d: &CostDistribution, q: f64, c_star: f64) -> Result<bool> {
    ensure_probability("q", q)?;
    d.check_support(c_star)?;
    let fc = d.cdf(c_star);
    if fc <= 0.0 || c_star <= 0.0 {
        return Err(invalid(format!("F(c*) and c* must be positive, got F={fc}, c*={c_star}")));
    }
    let dens = d.pdf(c_star)?;
    if dens <= 0.0 {
        return Err(Error::ZeroDensity(c_star));
    }
    let y = q * fc;
    let lhs = if y >= 1.0 { 0.0 } else { (1.0 - y) * (-y).ln_1p() / (-y) };
    let rhs = 1.0 / (1.0 + fc / (c_star * dens));
    Ok(lhs >= rhs)
}

/// `q† = 1 / (max c f(c) + 1)`: below it the success probability rises with `n`
/// for every prize.
pub fn q_dagger(d: &CostDistribution) -> Result<f64> {
    let (lo, hi) = d.support();
    let elasticity = |c: f64| d.pdf(c).map(|f| c * f).unwrap_or(f64::NAN);
    const GRID: usize = 10_000;
    let h = (hi - lo) / GRID as f64;
    let mut best = (lo, f64::NEG_INFINITY);
    for i in 0..=GRID {
        let c = lo + h * i as f64;
        // unbounded density at an endpoint gives c·f → 0 there for the power family
        let v = match d.pdf(c) {
            Ok(f) => c * f,
            Err(Error::UnboundedDensity(_)) => continue,
            Err(e) => return Err(e),
        };
        if !v.is_finite() {
            return Err(Error::UnboundedDensity(c));
        }
        if v > best.1 {
            best = (c, v);
        }
    }
    let a = (best.0 - h).max(lo);
    let b = (best.0 + h).min(hi);
    let refined = numeric::golden_max(|c| elasticity(c), a, b, 1e-13);
    let mut max = best.1.max(elasticity(refined)).max(elasticity(hi));
    // left-limit slopes at kinks of a piecewise cdf
    for &k in d.kinks() {
        if let Some(s) = d.left_slope_at(k) {
            max = max.max(k * s);
        }
    }
    if !max.is_finite() {
        return Err(Error::UnboundedDensity(best.0));
    }
    Ok(1.0 / (max + 1.0))
}

/// Cutoff `ŷ(α) ∈ (0, 1)` for `F(c) = c^α`: the root of
/// `(1−y) ln(1−y) + yα/(1+α)`. For `q < ŷ` the success probability rises with `n`.
pub fn q_dagger_power(alpha: f64) -> Result<f64> {
    ensure_finite("alpha", alpha)?;
    if alpha <= 0.0 {
        return Err(invalid(format!("alpha must be > 0, got {alpha}")));
    }
    let h = |y: f64| power_cutoff_residual(alpha, y);
    Ok(bisect(h, 0.0, 1.0, 1e-16, true))
}

/// `(1−y) ln(1−y) + yα/(1+α)` with the continuous extension at `y = 1`.
pub fn power_cutoff_residual(alpha: f64, y: f64) -> f64 {
    let l = if y >= 1.0 { 0.0 } else { (1.0 - y) * (-y).ln_1p() };
    l + y * alpha / (1.0 + alpha)
}
