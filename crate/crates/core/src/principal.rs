//! Optimal prize for the principal.
//!
//! Choosing the prize is recast as choosing the equilibrium threshold `ĉ`,
//! maximizing `𝒲(ĉ) = −W(1−qF(ĉ))ⁿ − nĉF(ĉ)` on the support. When `F/f` is
//! nondecreasing the maximizer is the fixed point of
//! `Ω(ĉ) = Wq(1−qF(ĉ))^{n−1} − F(ĉ)/f(ĉ)`, clamped to `c̲` for `W ≤ c̲/q`
//! and to `c̄` for `W ≥ (c̄ + 1/f(c̄))/(q(1−q)^{n−1})`. The prize that
//! implements `ĉ*` is `ĉ*/Φ(ĉ*)`.

use serde::Serialize;

use crate::distributions::CostDistribution;
use crate::equilibrium::win_prob_from_cdf;
use crate::error::{ensure_finite, ensure_probability, invalid, Result};
use crate::numeric::{bisect, golden_max, pow_one_minus, DEFAULT_TOL};

const ASSUMPTION4_GRID: usize = 1_000;
const FALLBACK_GRID: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrincipalConfig {
    pub w: f64,
    pub n: f64,
    pub q: f64,
}

impl PrincipalConfig {
    pub fn new(w: f64, n: f64, q: f64) -> Result<Self> {
        check(q, n, w)?;
        Ok(Self { w, n, q })
    }
}

fn check(q: f64, n: f64, w: f64) -> Result<()> {
    ensure_probability("q", q)?;
    ensure_finite("n", n)?;
    ensure_finite("W", w)?;
    if n < 1.0 {
        return Err(invalid(format!("n must be >= 1, got {n}")));
    }
    if w <= 0.0 {
        return Err(invalid(format!("W must be > 0, got {w}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrizeRegime {
    Interior,
    LowerBoundary,
    UpperBoundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrizeSolution {
    pub threshold: f64,
    pub prize: f64,
    pub regime: PrizeRegime,
    pub objective_value: f64,
    /// False when `F/f` failed the monotonicity check and the answer came
    /// from global grid search instead of the fixed point.
    pub certified: bool,
}

/// `𝒲(ĉ) = −W(1−qF(ĉ))ⁿ − nĉF(ĉ)`.
pub fn objective(d: &CostDistribution, q: f64, n: f64, w: f64, c_hat: f64) -> Result<f64> {
    d.check_support(c_hat)?;
    Ok(objective_unchecked(d, q, n, w, c_hat))
}

fn objective_unchecked(d: &CostDistribution, q: f64, n: f64, w: f64, c: f64) -> f64 {
    let fc = d.cdf(c);
    -w * pow_one_minus(q * fc, n) - n * c * fc
}

/// `Ω(ĉ) = Wq(1−qF(ĉ))^{n−1} − F(ĉ)/f(ĉ)`.
pub fn omega(d: &CostDistribution, q: f64, n: f64, w: f64, c_hat: f64) -> Result<f64> {
    let ratio = d.reverse_hazard_ratio(c_hat)?;
    Ok(w * q * pow_one_minus(q * d.cdf(c_hat), n - 1.0) - ratio)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WBounds {
    /// `W̲ = c̲/q`.
    pub lower: f64,
    /// `W̄ = (c̄ + 1/f(c̄))/(q(1−q)^{n−1})`, `+∞` when `(1−q)^{n−1} = 0`.
    pub upper: f64,
}

pub fn w_bounds(d: &CostDistribution, q: f64, n: f64) -> Result<WBounds> {
    ensure_probability("q", q)?;
    let lower = d.lower() / q;
    let hi = d.upper();
    let tail = pow_one_minus(q, n - 1.0);
    let upper = if tail == 0.0 {
        f64::INFINITY
    } else {
        let dens = d.pdf(hi)?;
        (hi + 1.0 / dens) / (q * tail)
    };
    Ok(WBounds { lower, upper })
}

/// Prize implementing threshold `c` as an equilibrium: `c/Φ(c)`.
pub fn prize_for_threshold(d: &CostDistribution, q: f64, n: f64, c: f64) -> f64 {
    c / win_prob_from_cdf(d.cdf(c), q, n)
}

pub fn optimal_prize(d: &CostDistribution, q: f64, n: f64, w: f64) -> Result<PrizeSolution> {
    check(q, n, w)?;
    let certified = d.check_assumption4(ASSUMPTION4_GRID)?.passed;
    if !certified {
        return Ok(grid_optimum(d, q, n, w));
    }
    let bounds = w_bounds(d, q, n)?;
    let (lo, hi) = d.support();
    let (threshold, regime) = if w <= bounds.lower {
        (lo, PrizeRegime::LowerBoundary)
    } else if w >= bounds.upper {
        (hi, PrizeRegime::UpperBoundary)
    } else {
        let gap = |c: f64| omega(d, q, n, w, c).map(|o| o - c).unwrap_or(f64::NAN);
        (bisect(gap, lo, hi, DEFAULT_TOL, false), PrizeRegime::Interior)
    };
    Ok(solution_at(d, q, n, w, threshold, regime, true))
}

fn solution_at(
    d: &CostDistribution,
    q: f64,
    n: f64,
    w: f64,
    threshold: f64,
    regime: PrizeRegime,
    certified: bool,
) -> PrizeSolution {
    PrizeSolution {
        threshold,
        prize: prize_for_threshold(d, q, n, threshold),
        regime,
        objective_value: objective_unchecked(d, q, n, w, threshold),
        certified,
    }
}

/// Smallest global maximizer of `𝒲` on a grid, refined by golden section.
fn grid_optimum(d: &CostDistribution, q: f64, n: f64, w: f64) -> PrizeSolution {
    let (lo, hi) = d.support();
    let (best, _) = grid_argmax(d, q, n, w, FALLBACK_GRID);
    let h = (hi - lo) / FALLBACK_GRID as f64;
    let (a, b) = ((best - h).max(lo), (best + h).min(hi));
    let refined = golden_max(|c| objective_unchecked(d, q, n, w, c), a, b, 1e-12);
    let c = if objective_unchecked(d, q, n, w, refined) > objective_unchecked(d, q, n, w, best) {
        refined
    } else {
        best
    };
    let regime = if c <= lo {
        PrizeRegime::LowerBoundary
    } else if c >= hi {
        PrizeRegime::UpperBoundary
    } else {
        PrizeRegime::Interior
    };
    solution_at(d, q, n, w, c, regime, false)
}

/// First (smallest) grid point attaining the maximum of `𝒲`, and the grid spacing.
pub fn grid_argmax(d: &CostDistribution, q: f64, n: f64, w: f64, grid_size: usize) -> (f64, f64) {
    let (lo, hi) = d.support();
    let h = (hi - lo) / grid_size as f64;
    let mut best = (lo, f64::NEG_INFINITY);
    for i in 0..=grid_size {
        let c = if i == grid_size { hi } else { lo + h * i as f64 };
        let v = objective_unchecked(d, q, n, w, c);
        if v > best.1 {
            best = (c, v);
        }
    }
    (best.0, h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridCheck {
    pub grid_threshold: f64,
    pub solver_threshold: f64,
    pub spacing: f64,
    pub agrees: bool,
}

/// Brute-force check of [`optimal_prize`] against a grid maximization of `𝒲`.
pub fn verify_against_grid(d: &CostDistribution, q: f64, n: f64, w: f64, grid_size: usize) -> Result<GridCheck> {
    if grid_size < 100 {
        return Err(invalid("grid_size must be at least 100"));
    }
    let sol = optimal_prize(d, q, n, w)?;
    let (grid_threshold, spacing) = grid_argmax(d, q, n, w, grid_size);
    Ok(GridCheck {
        grid_threshold,
        solver_threshold: sol.threshold,
        spacing,
        agrees: (grid_threshold - sol.threshold).abs() <= 2.0 * spacing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::fixtures::kinked;
    use crate::equilibrium::{solve_threshold, ContestConfig};
    use proptest::prelude::*;

    fn unit() -> CostDistribution {
        CostDistribution::uniform(0.0, 1.0).unwrap()
    }

    #[test]
    fn objective_examples() {
        let d = CostDistribution::uniform(0.25, 1.25).unwrap();
        assert_eq!(objective(&d, 0.5, 3.0, 2.0, 0.25).unwrap(), -2.0);
        assert!((objective(&d, 1.0, 3.0, 2.0, 1.25).unwrap() + 3.75).abs() < 1e-15);
        assert!((objective(&unit(), 1.0, 2.0, 2.0, 0.5).unwrap() + 1.0).abs() < 1e-15);
        assert!(objective(&unit(), 1.0, 2.0, 2.0, 1.5).is_err());
    }

    #[test]
    fn omega_examples() {
        let d = CostDistribution::uniform(0.25, 1.25).unwrap();
        assert!((omega(&d, 0.5, 4.0, 3.0, 0.25).unwrap() - 1.5).abs() < 1e-15);
        assert!((omega(&unit(), 1.0, 2.0, 2.0, 0.5).unwrap() - 0.5).abs() < 1e-15);
        let top = omega(&unit(), 0.5, 3.0, 2.0, 1.0).unwrap();
        assert!((top - (2.0 * 0.5 * 0.25 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn w_bounds_examples() {
        let b = w_bounds(&unit(), 0.5, 2.0).unwrap();
        assert_eq!(b.lower, 0.0);
        assert!((b.upper - 8.0).abs() < 1e-12);
        let b = w_bounds(&CostDistribution::uniform(0.25, 1.25).unwrap(), 0.5, 2.0).unwrap();
        assert_eq!(b.lower, 0.5);
        assert!(w_bounds(&unit(), 1.0, 3.0).unwrap().upper.is_infinite());
        assert!(w_bounds(&unit(), 1.0, 1.0).unwrap().upper.is_finite());
    }

    #[test]
    fn optimal_prize_regimes() {
        let d = unit();
        let s = optimal_prize(&d, 0.5, 2.0, 1e-9).unwrap();
        assert!(s.threshold < 1e-6, "{s:?}");
        let ab = CostDistribution::uniform(0.25, 1.25).unwrap();
        let s = optimal_prize(&ab, 0.5, 2.0, 0.4).unwrap();
        assert_eq!(s.regime, PrizeRegime::LowerBoundary);
        assert_eq!(s.threshold, 0.25);
        assert!((s.prize - 0.5).abs() < 1e-15);

        let s = optimal_prize(&d, 0.5, 2.0, 10.0).unwrap();
        assert_eq!(s.regime, PrizeRegime::UpperBoundary);
        assert_eq!(s.threshold, 1.0);
        assert!((s.prize - 8.0 / 3.0).abs() < 1e-12);

        // uniform: 4·0.5·(1 − ĉ/2) − ĉ = ĉ gives ĉ* = 2/3
        let s = optimal_prize(&d, 0.5, 2.0, 4.0).unwrap();
        assert_eq!(s.regime, PrizeRegime::Interior);
        assert!((s.threshold - 2.0 / 3.0).abs() < 1e-11);
        let phi = (1.0 - (1.0 - 1.0 / 3.0f64).powi(2)) / (2.0 * 2.0 / 3.0);
        assert!((s.prize - (2.0 / 3.0) / phi).abs() < 1e-10);
        assert!(s.certified);
    }

    #[test]
    fn grid_oracle_examples() {
        let d = unit();
        let g = verify_against_grid(&d, 0.5, 2.0, 4.0, 10_000).unwrap();
        assert!(g.agrees && (g.grid_threshold - 2.0 / 3.0).abs() <= 2e-4, "{g:?}");
        let ab = CostDistribution::uniform(0.25, 1.25).unwrap();
        let g = verify_against_grid(&ab, 0.5, 2.0, 0.4, 1_000).unwrap();
        assert_eq!(g.grid_threshold, 0.25);
        let g = verify_against_grid(&d, 0.5, 2.0, 10.0, 1_000).unwrap();
        assert_eq!(g.grid_threshold, 1.0);
        assert!(verify_against_grid(&d, 0.5, 2.0, 4.0, 10).is_err());
    }

    #[test]
    fn failing_assumption4_falls_back_to_grid() {
        let d = kinked();
        let s = optimal_prize(&d, 0.8, 3.0, 2.0).unwrap();
        assert!(!s.certified);
        let (g, h) = grid_argmax(&d, 0.8, 3.0, 2.0, 50_000);
        assert!((s.threshold - g).abs() <= 2.0 * h);
        assert!(s.objective_value >= objective(&d, 0.8, 3.0, 2.0, g).unwrap() - 1e-12);
    }

    #[test]
    fn prize_reproduces_threshold() {
        let d = CostDistribution::power(2.0).unwrap();
        for &w in &[0.5, 1.0, 3.0, 8.0] {
            let s = optimal_prize(&d, 0.6, 5.0, w).unwrap();
            let r = solve_threshold(&d, &ContestConfig::new(5.0, 0.6, s.prize).unwrap()).unwrap();
            assert!((r.threshold - s.threshold).abs() < 1e-8);
        }
    }

    #[test]
    fn threshold_nondecreasing_in_valuation() {
        let d = CostDistribution::uniform(0.1, 1.1).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for i in 1..80 {
            let s = optimal_prize(&d, 0.4, 4.0, 0.1 * i as f64).unwrap();
            assert!(s.threshold >= prev);
            prev = s.threshold;
        }
    }

    proptest! {
        #[test]
        fn omega_decreasing_when_ratio_monotone(alpha in 0.3..10.0f64, q in 0.05..1.0f64, n in 1.0..30.0f64,
                                                w in 0.1..10.0f64, s in 0.01..0.98f64, ds in 0.001..0.02f64) {
            let d = CostDistribution::power(alpha).unwrap();
            prop_assume!(d.check_assumption4(100).unwrap().passed);
            prop_assert!(omega(&d, q, n, w, s + ds).unwrap() < omega(&d, q, n, w, s).unwrap());
        }
    }
}
