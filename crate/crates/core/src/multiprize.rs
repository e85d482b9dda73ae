//! Rank-order prizes `v¹ ≥ v² ≥ … ≥ vⁿ ≥ 0` summing to a budget `V`.
//!
//! Finders are ranked uniformly at random and the finder ranked `m` receives
//! `vᵐ`. With all agents searching below `ĉ`, a searcher collects the rank-`m`
//! prize with probability `Φᵐ(ĉ)`, and at least `m` agents find the object
//! with probability `Pᵐ(ĉ)`. The two are linked by `Φᵐ = Pᵐ/(nF)`.
//!
//! The principal's payoff at the induced threshold `c` is
//! `W·P(c) − Σ vᵐPᵐ(c) = W·P(c) − n·c·F(c)`, so prize design reduces to
//! choosing a threshold in the achievable interval `[Vq/n, c*(V)]`.

use serde::{Deserialize, Serialize};

use crate::distributions::CostDistribution;
use crate::equilibrium::{solve_threshold, ContestConfig};
use crate::error::{ensure_finite, ensure_probability, invalid, Error, Result};
use crate::numeric::{binomial_pmf, bisect, golden_max, one_minus_pow_one_minus, pow_one_minus, DEFAULT_TOL};
use crate::principal::omega;

const SUM_TOL: f64 = 1e-12;
const ROOT_SCAN: usize = 400;
const DAMPED_STEP: f64 = 0.5;
const DAMPED_MAX_ITERS: usize = 10_000;
const ASSUMPTION4_GRID: usize = 1_000;
const FALLBACK_GRID: usize = 20_000;

/// A monotone prize vector, serialized as a plain JSON array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PrizeStructure {
    v: Vec<f64>,
}

impl PrizeStructure {
    pub fn new(v: Vec<f64>) -> Result<Self> {
        if v.is_empty() {
            return Err(invalid("prize structure needs at least one prize"));
        }
        for &x in &v {
            ensure_finite("prize", x)?;
            if x < 0.0 {
                return Err(invalid(format!("prizes must be >= 0, got {x}")));
            }
        }
        if v.windows(2).any(|w| w[1] > w[0]) {
            return Err(invalid("prizes must be nonincreasing in rank"));
        }
        if v.iter().sum::<f64>() <= 0.0 {
            return Err(invalid("total prize must be > 0"));
        }
        Ok(Self { v })
    }

    /// Validates the structure and that it spends exactly `budget`.
    pub fn with_budget(v: Vec<f64>, budget: f64) -> Result<Self> {
        let s = Self::new(v)?;
        let total = s.total();
        if (total - budget).abs() > SUM_TOL * budget.max(1.0) {
            return Err(invalid(format!("prizes sum to {total}, expected {budget}")));
        }
        Ok(s)
    }

    pub fn winner_takes_all(budget: f64, n: usize) -> Result<Self> {
        let mut v = vec![0.0; n.max(1)];
        v[0] = budget;
        Self::new(v)
    }

    pub fn equal_split(budget: f64, n: usize) -> Result<Self> {
        Self::new(vec![budget / n.max(1) as f64; n.max(1)])
    }

    /// `λ·(V, 0, …, 0) + (1 − λ)·(V/n, …, V/n)`.
    pub fn mix(lambda: f64, budget: f64, n: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(invalid(format!("mixing weight must lie in [0, 1], got {lambda}")));
        }
        let share = (1.0 - lambda) * budget / n as f64;
        let mut v = vec![share; n];
        v[0] += lambda * budget;
        Self::new(v)
    }

    pub fn prizes(&self) -> &[f64] {
        &self.v
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.v.iter().sum()
    }
}

fn check_rank(n: usize, m: usize) -> Result<()> {
    if n == 0 {
        return Err(invalid("n must be >= 1"));
    }
    if m == 0 || m > n {
        return Err(invalid(format!("rank m must lie in 1..={n}, got {m}")));
    }
    Ok(())
}

fn p_m_from_cdf(fc: f64, q: f64, n: usize, m: usize) -> f64 {
    let searchers = binomial_pmf(n, fc);
    let mut total = 0.0;
    for (k, &pk) in searchers.iter().enumerate().skip(m) {
        if pk == 0.0 {
            continue;
        }
        let finders = binomial_pmf(k, q);
        total += pk * finders[m..].iter().sum::<f64>();
    }
    total
}

/// Probability that at least `m` agents find the object.
pub fn p_m(d: &CostDistribution, q: f64, n: usize, m: usize, c_hat: f64) -> Result<f64> {
    check_rank(n, m)?;
    ensure_probability("q", q)?;
    d.check_support(c_hat)?;
    Ok(p_m_from_cdf(d.cdf(c_hat), q, n, m))
}

/// `Φᵐ = Pᵐ/(nF)`, with the boundary values `Φ¹(c̲) = q` and `Φᵐ(c̲) = 0` for `m > 1`.
pub fn phi_m(d: &CostDistribution, q: f64, n: usize, m: usize, c_hat: f64) -> Result<f64> {
    check_rank(n, m)?;
    ensure_probability("q", q)?;
    d.check_support(c_hat)?;
    let fc = d.cdf(c_hat);
    if fc == 0.0 {
        return Ok(if m == 1 { q } else { 0.0 });
    }
    Ok(p_m_from_cdf(fc, q, n, m) / (n as f64 * fc))
}

/// `Φᵐ` as the double sum over the number `k` of searching rivals and the
/// number `t` of those who find the object.
pub fn phi_m_direct(d: &CostDistribution, q: f64, n: usize, m: usize, c_hat: f64) -> Result<f64> {
    check_rank(n, m)?;
    ensure_probability("q", q)?;
    d.check_support(c_hat)?;
    let rivals = binomial_pmf(n - 1, d.cdf(c_hat));
    let mut total = 0.0;
    for (k, &pk) in rivals.iter().enumerate() {
        if k + 1 < m || pk == 0.0 {
            continue;
        }
        let finders = binomial_pmf(k, q);
        let inner: f64 = (m - 1..=k).map(|t| finders[t] / (t + 1) as f64).sum();
        total += pk * inner;
    }
    Ok(q * total)
}

/// All of `Φ¹ … Φⁿ` at once: `Φᵐ = q Σ_{t ≥ m−1} b(t; n−1, qF)/(t+1)`.
fn phi_all_from_cdf(fc: f64, q: f64, n: usize) -> Vec<f64> {
    let rivals = binomial_pmf(n - 1, q * fc);
    let mut out = vec![0.0; n];
    let mut acc = 0.0;
    for t in (0..n).rev() {
        acc += rivals[t] / (t + 1) as f64;
        out[t] = q * acc;
    }
    out
}

fn aggregate_reward(v: &[f64], fc: f64, q: f64) -> f64 {
    phi_all_from_cdf(fc, q, v.len()).iter().zip(v).map(|(p, x)| p * x).sum()
}

/// Equilibrium under a prize structure. `roots` lists every interior crossing
/// found by the scan; more than one signals that uniqueness failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiEquilibrium {
    pub threshold: f64,
    pub success_prob: f64,
    pub expected_searchers: f64,
    /// `Σ vᵐΦᵐ(ĉ)`, the expected prize of a searcher.
    pub expected_reward: f64,
    pub interior: bool,
    pub residual: f64,
    pub roots: Vec<f64>,
}

/// Symmetric threshold solving `ĉ = Σ vᵐΦᵐ(ĉ)`.
pub fn solve_threshold_multi(d: &CostDistribution, q: f64, v: &PrizeStructure) -> Result<MultiEquilibrium> {
    ensure_probability("q", q)?;
    let n = v.len();
    let prizes = v.prizes();
    let reward = |c: f64| aggregate_reward(prizes, d.cdf(c), q);
    let gap = |c: f64| c - reward(c);
    let (lo, hi) = d.support();

    let step = (hi - lo) / ROOT_SCAN as f64;
    let mut roots = Vec::new();
    let mut prev = (lo, gap(lo));
    for i in 1..=ROOT_SCAN {
        let c = if i == ROOT_SCAN { hi } else { lo + step * i as f64 };
        let g = gap(c);
        if g == 0.0 && c > lo && c < hi {
            roots.push(c);
        } else if prev.1 < 0.0 && g > 0.0 {
            roots.push(bisect(gap, prev.0, c, DEFAULT_TOL, true));
        } else if prev.1 > 0.0 && g < 0.0 {
            roots.push(bisect(gap, prev.0, c, DEFAULT_TOL, false));
        }
        prev = (c, g);
    }

    let (threshold, interior) = match roots.len() {
        0 if gap(lo) >= 0.0 => (lo, false),
        0 => (hi, false),
        1 => (roots[0], true),
        _ => (damped_fixed_point(&reward, lo, hi, &roots)?, true),
    };
    let fc = d.cdf(threshold);
    let expected_reward = reward(threshold);
    Ok(MultiEquilibrium {
        threshold,
        success_prob: one_minus_pow_one_minus(q * fc, n as f64),
        expected_searchers: n as f64 * fc,
        expected_reward,
        interior,
        residual: (threshold - expected_reward).abs(),
        roots,
    })
}

/// Damped iteration `c ← (1−θ)c + θ·reward(c)` from the middle of the root range;
/// the result is snapped to the nearest scanned root.
fn damped_fixed_point<R: Fn(f64) -> f64>(reward: &R, lo: f64, hi: f64, roots: &[f64]) -> Result<f64> {
    let mut c = 0.5 * (roots[0] + roots[roots.len() - 1]);
    for _ in 0..DAMPED_MAX_ITERS {
        let next = ((1.0 - DAMPED_STEP) * c + DAMPED_STEP * reward(c)).clamp(lo, hi);
        if (next - c).abs() < DEFAULT_TOL {
            let nearest = roots
                .iter()
                .copied()
                .min_by(|a, b| (a - next).abs().total_cmp(&(b - next).abs()))
                .unwrap_or(next);
            return Ok(nearest);
        }
        c = next;
    }
    Err(Error::NonConvergence(format!(
        "damped iteration did not settle among {} candidate thresholds",
        roots.len()
    )))
}

/// Principal's payoff `W·P(c^v) − Σ vᵐPᵐ(c^v)` at the induced equilibrium.
pub fn principal_value_multi(d: &CostDistribution, q: f64, w: f64, v: &PrizeStructure) -> Result<f64> {
    ensure_finite("W", w)?;
    let eq = solve_threshold_multi(d, q, v)?;
    let n = v.len();
    let fc = d.cdf(eq.threshold);
    let paid: f64 = v
        .prizes()
        .iter()
        .enumerate()
        .filter(|(_, &x)| x != 0.0)
        .map(|(i, &x)| x * p_m_from_cdf(fc, q, n, i + 1))
        .sum();
    Ok(w * eq.success_prob - paid)
}

/// Interval of thresholds implementable with budget `V`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Achievable {
    /// Equal split, `Vq/n` clamped into the support.
    pub lower: f64,
    /// Winner-takes-all, `c*(V)`.
    pub upper: f64,
}

impl Achievable {
    pub fn contains(&self, c: f64) -> bool {
        c >= self.lower && c <= self.upper
    }
}

pub fn achievable_set(d: &CostDistribution, q: f64, n: usize, budget: f64) -> Result<Achievable> {
    if n == 0 {
        return Err(invalid("n must be >= 1"));
    }
    let cfg = ContestConfig::new(n as f64, q, budget)?;
    let upper = solve_threshold(d, &cfg)?.threshold;
    let lower = (budget * q / n as f64).clamp(d.lower(), d.upper());
    Ok(Achievable { lower, upper })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StructureRegime {
    EqualSplit,
    Mixed,
    WinnerTakesAll,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalStructure {
    pub threshold: f64,
    pub structure: PrizeStructure,
    pub regime: StructureRegime,
    /// Weight on winner-takes-all in the two-point mix.
    pub lambda: f64,
    pub value: f64,
    /// Valuation at or below which the equal split is optimal.
    pub w_lower: f64,
    /// Valuation at or above which winner-takes-all is optimal.
    pub w_upper: f64,
    /// False when `F/f` failed the monotonicity check and the threshold came
    /// from a grid search over the achievable interval.
    pub certified: bool,
}

/// Valuation whose Ω fixed point sits at `c`: `(c + F/f)/(q(1−qF)^{n−1})`.
fn valuation_with_fixed_point_at(d: &CostDistribution, q: f64, n: f64, c: f64) -> Result<f64> {
    let tail = pow_one_minus(q * d.cdf(c), n - 1.0);
    if tail == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((c + d.reverse_hazard_ratio(c)?) / (q * tail))
}

fn payoff_at(d: &CostDistribution, q: f64, n: f64, w: f64, c: f64) -> f64 {
    let fc = d.cdf(c);
    w * one_minus_pow_one_minus(q * fc, n) - n * c * fc
}

/// Best prize structure for valuation `W` and budget `V`.
pub fn optimal_prize_structure(d: &CostDistribution, q: f64, n: usize, w: f64, budget: f64) -> Result<OptimalStructure> {
    ensure_finite("W", w)?;
    if w <= 0.0 {
        return Err(invalid(format!("W must be > 0, got {w}")));
    }
    let set = achievable_set(d, q, n, budget)?;
    let nf = n as f64;
    let w_lower = valuation_with_fixed_point_at(d, q, nf, set.lower)?;
    let w_upper = valuation_with_fixed_point_at(d, q, nf, set.upper)?;
    let certified = d.check_assumption4(ASSUMPTION4_GRID)?.passed;

    let target = if set.upper - set.lower <= DEFAULT_TOL {
        set.lower
    } else if !certified {
        grid_best(d, q, nf, w, set)
    } else if w <= w_lower {
        set.lower
    } else if w >= w_upper {
        set.upper
    } else {
        let gap = |c: f64| omega(d, q, nf, w, c).map(|o| o - c).unwrap_or(f64::NAN);
        bisect(gap, set.lower, set.upper, DEFAULT_TOL, false)
    };

    let (regime, lambda) = if target <= set.lower {
        (StructureRegime::EqualSplit, 0.0)
    } else if target >= set.upper {
        (StructureRegime::WinnerTakesAll, 1.0)
    } else {
        let base = budget * q / nf;
        let top = budget * aggregate_reward(&PrizeStructure::winner_takes_all(1.0, n)?.v, d.cdf(target), q);
        let lambda = (target - base) / (top - base);
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::NoRoot(format!("mixing weight {lambda} outside [0, 1] at threshold {target}")));
        }
        (StructureRegime::Mixed, lambda)
    };
    let structure = match regime {
        StructureRegime::EqualSplit => PrizeStructure::equal_split(budget, n)?,
        StructureRegime::WinnerTakesAll => PrizeStructure::winner_takes_all(budget, n)?,
        StructureRegime::Mixed => PrizeStructure::mix(lambda, budget, n)?,
    };
    Ok(OptimalStructure {
        threshold: target,
        value: payoff_at(d, q, nf, w, target),
        structure,
        regime,
        lambda,
        w_lower,
        w_upper,
        certified,
    })
}

fn grid_best(d: &CostDistribution, q: f64, n: f64, w: f64, set: Achievable) -> f64 {
    let h = (set.upper - set.lower) / FALLBACK_GRID as f64;
    let mut best = (set.lower, f64::NEG_INFINITY);
    for i in 0..=FALLBACK_GRID {
        let c = if i == FALLBACK_GRID { set.upper } else { set.lower + h * i as f64 };
        let val = payoff_at(d, q, n, w, c);
        if val > best.1 {
            best = (c, val);
        }
    }
    let (a, b) = ((best.0 - h).max(set.lower), (best.0 + h).min(set.upper));
    let refined = golden_max(|c| payoff_at(d, q, n, w, c), a, b, 1e-12);
    if payoff_at(d, q, n, w, refined) > best.1 {
        refined
    } else {
        best.0
    }
}
