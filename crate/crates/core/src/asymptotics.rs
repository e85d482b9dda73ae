//! Large-crowd limits: the limiting expected number of searchers `κ`, the
//! limiting success probability, convergence-rate fits, and the limiting
//! optimal prize.

use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::CostDistribution;
use crate::equilibrium::{solve_threshold, ContestConfig};
use crate::error::{ensure_finite, ensure_probability, invalid, Error, Result};
use crate::numeric::{bisect, least_squares};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitRegime {
    /// `c̲ = 0`: the crowd of searchers grows without bound.
    LowerBoundZero,
    /// `c̲ > 0`: the expected number of searchers settles at `κ`.
    LowerBoundPositive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitResult {
    /// `+∞` when `c̲ = 0`.
    pub kappa: f64,
    pub p_infinity: f64,
    pub regime: LimitRegime,
}

fn check_common(c_lo: f64, q: f64, prize: f64) -> Result<()> {
    ensure_finite("c_lo", c_lo)?;
    ensure_finite("prize", prize)?;
    ensure_probability("q", q)?;
    if prize <= 0.0 {
        return Err(invalid(format!("prize must be > 0, got {prize}")));
    }
    if c_lo < 0.0 {
        return Err(invalid(format!("c_lo must be >= 0, got {c_lo}")));
    }
    Ok(())
}

/// `V(1 − e^{−qκ})/κ`, strictly decreasing from `qV` (at `κ → 0`) to 0.
fn searcher_reward(kappa: f64, q: f64, prize: f64) -> f64 {
    -prize * (-q * kappa).exp_m1() / kappa
}

/// Unique positive root of `c̲ = V(1 − e^{−qκ})/κ`.
pub fn solve_kappa(c_lo: f64, q: f64, prize: f64) -> Result<f64> {
    check_common(c_lo, q, prize)?;
    if c_lo <= 0.0 {
        return Err(invalid("kappa needs c_lo > 0"));
    }
    if c_lo >= q * prize {
        return Err(Error::NoRoot(format!(
            "c_lo = {c_lo} >= qV = {}: no positive kappa",
            q * prize
        )));
    }
    // the reward is at most V/κ, so the root lies below V/c̲
    let hi = prize / c_lo + 1.0;
    Ok(bisect(|k| searcher_reward(k, q, prize) - c_lo, 1e-12, hi, 1e-13, false))
}

/// `P∞ = 1 − e^{−qκ}`, or exactly 1 when `c̲ = 0`.
pub fn p_infinity(c_lo: f64, q: f64, prize: f64) -> Result<f64> {
    check_common(c_lo, q, prize)?;
    if c_lo == 0.0 {
        return Ok(1.0);
    }
    let kappa = solve_kappa(c_lo, q, prize)?;
    Ok(-(-q * kappa).exp_m1())
}

pub fn limit(d: &CostDistribution, q: f64, prize: f64) -> Result<LimitResult> {
    let c_lo = d.lower();
    if c_lo == 0.0 {
        check_common(c_lo, q, prize)?;
        return Ok(LimitResult {
            kappa: f64::INFINITY,
            p_infinity: 1.0,
            regime: LimitRegime::LowerBoundZero,
        });
    }
    let kappa = solve_kappa(c_lo, q, prize)?;
    Ok(LimitResult {
        kappa,
        p_infinity: -(-q * kappa).exp_m1(),
        regime: LimitRegime::LowerBoundPositive,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateQuantity {
    /// `c_n F(c_n)`
    CfProduct,
    /// `F(c_n)`
    FAlone,
    /// `c_n − c̲`
    CGap,
}

impl std::str::FromStr for RateQuantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cF_product" | "cf_product" => Ok(Self::CfProduct),
            "F_alone" | "f_alone" => Ok(Self::FAlone),
            "c_gap" => Ok(Self::CGap),
            other => Err(invalid(format!("unknown rate quantity {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateEstimate {
    pub quantity: RateQuantity,
    /// Fitted exponent of `n`.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: Vec<(f64, f64)>,
}

/// Log-log least-squares slope of `quantity` against `n`.
pub fn estimate_rate(
    d: &CostDistribution,
    q: f64,
    prize: f64,
    n_grid: &[f64],
    quantity: RateQuantity,
) -> Result<RateEstimate> {
    if n_grid.len() < 3 {
        return Err(invalid("rate estimation needs at least 3 grid points"));
    }
    let c_lo = d.lower();
    let points: Vec<(f64, f64)> = n_grid
        .par_iter()
        .map(|&n| {
            let r = solve_threshold(d, &ContestConfig::new(n, q, prize)?)?;
            let c = r.threshold;
            let y = match quantity {
                RateQuantity::CfProduct => c * d.cdf(c),
                RateQuantity::FAlone => d.cdf(c),
                RateQuantity::CGap => c - c_lo,
            };
            Ok((n, y))
        })
        .collect::<Result<_>>()?;
    if let Some(&(n, y)) = points.iter().find(|p| !(p.1 > 0.0)) {
        return Err(invalid(format!("quantity vanished at n = {n} (value {y}); cannot take logs")));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let fit = least_squares(&xs, &ys);
    Ok(RateEstimate {
        quantity,
        slope: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        points,
    })
}

/// Limit of the optimal prize as the crowd grows:
/// `W c̲ (ln Wq − ln c̲)/(Wq − c̲)`, with value `W` when `Wq = c̲` and 0 when `c̲ = 0`.
pub fn optimal_prize_limit(c_lo: f64, q: f64, w: f64) -> Result<f64> {
    ensure_finite("c_lo", c_lo)?;
    ensure_finite("W", w)?;
    ensure_probability("q", q)?;
    if w * q <= 0.0 {
        return Err(invalid(format!("Wq must be > 0, got {}", w * q)));
    }
    if c_lo < 0.0 {
        return Err(invalid(format!("c_lo must be >= 0, got {c_lo}")));
    }
    if c_lo == 0.0 {
        return Ok(0.0);
    }
    let x = w * q;
    let rel = x / c_lo - 1.0;
    if rel.abs() < 1e-8 {
        // (ln x − ln a)/(x − a) = (1/a)·ln(1+r)/r
        return Ok(w * (1.0 - rel / 2.0 + rel * rel / 3.0));
    }
    Ok(w * c_lo * (x.ln() - c_lo.ln()) / (x - c_lo))
}

/// Geometric grid `10^lo_exp ..= 10^hi_exp` with `per_decade` points per decade.
pub fn geometric_grid(lo_exp: i32, hi_exp: i32, per_decade: usize) -> Vec<f64> {
    let steps = ((hi_exp - lo_exp) as usize) * per_decade;
    (0..=steps)
        .map(|i| 10f64.powf(lo_exp as f64 + i as f64 / per_decade as f64).round())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::principal;

    #[test]
    fn kappa_examples() {
        let k = solve_kappa(0.25, 0.5, 1.0).unwrap();
        // independently: 1/4 = (1 − e^{−κ/2})/κ has its root at 3.18725
        assert!((k - 3.187_248_520).abs() < 1e-8, "{k}");
        let constructed = 1.0 - (-0.5f64).exp();
        assert!((solve_kappa(0.5 * constructed, 0.5, 0.5).unwrap() - 1.0).abs() < 1e-10);
        let near = solve_kappa(0.5 * (1.0 - 1e-6), 0.5, 1.0).unwrap();
        assert!(near > 0.0 && near < 1e-4);
        assert!(matches!(solve_kappa(0.5, 0.5, 1.0), Err(Error::NoRoot(_))));
        assert!(solve_kappa(0.0, 0.5, 1.0).is_err());
    }

    #[test]
    fn p_infinity_examples() {
        let p = p_infinity(0.25, 0.5, 1.0).unwrap();
        assert!((p - 0.797).abs() < 5e-4);
        assert_eq!(p_infinity(0.0, 0.5, 1.0).unwrap(), 1.0);
        let d = CostDistribution::uniform(0.25, 1.25).unwrap();
        let r = solve_threshold(&d, &ContestConfig::new(2000.0, 0.5, 1.0).unwrap()).unwrap();
        assert!((r.success_prob - 0.7936).abs() < 5e-5);
        assert!((r.success_prob - p).abs() < 0.01);
    }

    #[test]
    fn limit_result_invariants() {
        let d = CostDistribution::uniform(0.25, 1.25).unwrap();
        let l = limit(&d, 0.5, 1.0).unwrap();
        assert_eq!(l.regime, LimitRegime::LowerBoundPositive);
        assert!((searcher_reward(l.kappa, 0.5, 1.0) - 0.25).abs() < 1e-12);
        assert_eq!(l.p_infinity, 1.0 - (-0.5 * l.kappa).exp());
        let z = limit(&CostDistribution::uniform(0.0, 1.0).unwrap(), 0.5, 1.0).unwrap();
        assert_eq!(z.regime, LimitRegime::LowerBoundZero);
        assert!(z.kappa.is_infinite());
        assert_eq!(z.p_infinity, 1.0);
    }

    #[test]
    fn expected_searchers_bounded_and_converging() {
        let d = CostDistribution::uniform(0.25, 1.25).unwrap();
        let kappa = solve_kappa(0.25, 0.5, 1.0).unwrap();
        let mut prev_gap = f64::INFINITY;
        for n in geometric_grid(1, 6, 1) {
            let r = solve_threshold(&d, &ContestConfig::new(n, 0.5, 1.0).unwrap()).unwrap();
            assert!(r.expected_searchers <= 1.0 / 0.25);
            let gap = (r.expected_searchers - kappa).abs();
            assert!(gap < prev_gap);
            prev_gap = gap;
        }
        let big = solve_threshold(&d, &ContestConfig::new(1e6, 0.5, 1.0).unwrap()).unwrap();
        assert!((big.success_prob - p_infinity(0.25, 0.5, 1.0).unwrap()).abs() < 1e-3);
    }

    #[test]
    fn rate_examples() {
        let grid = geometric_grid(2, 6, 1);
        let u = CostDistribution::uniform(0.0, 1.0).unwrap();
        let fit = estimate_rate(&u, 0.5, 1.0, &grid, RateQuantity::CGap).unwrap();
        assert!((fit.slope + 0.5).abs() < 0.03 && fit.r_squared >= 0.999, "{fit:?}");
        let s = CostDistribution::uniform(0.25, 1.25).unwrap();
        let fit = estimate_rate(&s, 0.5, 1.0, &grid, RateQuantity::CGap).unwrap();
        assert!((fit.slope + 1.0).abs() < 0.05 && fit.r_squared >= 0.999, "{fit:?}");
        let fit = estimate_rate(&s, 0.5, 1.0, &grid, RateQuantity::FAlone).unwrap();
        assert!((fit.slope + 1.0).abs() < 0.05);
        for d in [&u, &s, &CostDistribution::power(3.0).unwrap()] {
            let fit = estimate_rate(d, 0.5, 1.0, &grid, RateQuantity::CfProduct).unwrap();
            assert!((fit.slope + 1.0).abs() < 0.05, "{fit:?}");
        }
        let p = CostDistribution::power(3.0).unwrap();
        let fit = estimate_rate(&p, 0.5, 1.0, &grid, RateQuantity::CGap).unwrap();
        assert!((fit.slope + 0.25).abs() < 0.03, "{fit:?}");
        assert!(estimate_rate(&u, 0.5, 1.0, &grid[..2], RateQuantity::CGap).is_err());
    }

    #[test]
    fn optimal_prize_limit_examples() {
        assert_eq!(optimal_prize_limit(0.0, 0.5, 2.0).unwrap(), 0.0);
        assert!((optimal_prize_limit(0.5, 0.5, 1.0).unwrap() - 1.0).abs() < 1e-12);
        let v = optimal_prize_limit(0.25, 0.5, 2.0).unwrap();
        assert!((v - 0.5 * 4f64.ln() / 0.75).abs() < 1e-14);
        // continuity across the removable point
        let a = optimal_prize_limit(0.5 * (1.0 + 1e-7), 0.5, 1.0).unwrap();
        assert!((a - 1.0).abs() < 1e-6);
        assert!(optimal_prize_limit(0.1, 0.5, 0.0).is_err());
        // finite-n solver approaches the limit
        let d = CostDistribution::uniform(0.25, 1.25).unwrap();
        let sol = principal::optimal_prize(&d, 0.5, 1e5, 2.0).unwrap();
        assert!((sol.prize - v).abs() < 1e-2, "{} vs {v}", sol.prize);
    }
}
