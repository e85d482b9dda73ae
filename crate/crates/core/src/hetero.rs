//! Agents that differ in their discovery probability `qᵢ`.
//!
//! Agent `i`, searching, wins with probability
//! `Ψᵢ(ĉ₋ᵢ) = qᵢ·E[1/(T+1)]`, where `T` counts the rivals who find the object.
//! `T` is Poisson-binomial with success probabilities `πⱼ = qⱼF(ĉⱼ)`, so `Ψᵢ`
//! is evaluated exactly by convolving the rivals one at a time.
//!
//! An equilibrium satisfies `ĉᵢ = VΨᵢ(ĉ₋ᵢ)` for every agent. The own threshold
//! does not enter the right-hand side, so a best response is a single
//! evaluation followed by clamping into the support.

use serde::Serialize;

use crate::distributions::CostDistribution;
use crate::equilibrium::{solve_threshold, ContestConfig};
use crate::error::{ensure_finite, ensure_probability, invalid, Error, Result};
use crate::numeric::{bisect, DEFAULT_TOL};
use crate::principal;

const SWEEP_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 10_000;
const PRIZE_AGREEMENT_TOL: f64 = 1e-8;
const SCAN_TOL: f64 = 1e-9;
const NEWTON_TOL: f64 = 1e-13;
const NEWTON_STEP: f64 = 1e-7;
const NEWTON_MAX_ITERS: usize = 100;

/// A contest with heterogeneous abilities. Abilities are stored sorted from
/// highest to lowest; `order[k]` is the caller's index of sorted agent `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeteroContest {
    d: CostDistribution,
    q: Vec<f64>,
    order: Vec<usize>,
    prize: f64,
}

impl HeteroContest {
    pub fn new(d: CostDistribution, q_vec: &[f64], prize: f64) -> Result<Self> {
        if q_vec.is_empty() {
            return Err(invalid("q_vec must not be empty"));
        }
        for &qi in q_vec {
            ensure_probability("q_i", qi)?;
        }
        ensure_finite("prize", prize)?;
        if prize <= 0.0 {
            return Err(invalid(format!("prize must be > 0, got {prize}")));
        }
        let mut order: Vec<usize> = (0..q_vec.len()).collect();
        order.sort_by(|&a, &b| q_vec[b].total_cmp(&q_vec[a]));
        let q = order.iter().map(|&i| q_vec[i]).collect();
        Ok(Self { d, q, order, prize })
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    /// Abilities in nonincreasing order.
    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn prize(&self) -> f64 {
        self.prize
    }

    pub fn distribution(&self) -> &CostDistribution {
        &self.d
    }

    pub fn with_prize(&self, prize: f64) -> Result<Self> {
        let mut out = self.clone();
        ensure_finite("prize", prize)?;
        if prize <= 0.0 {
            return Err(invalid(format!("prize must be > 0, got {prize}")));
        }
        out.prize = prize;
        Ok(out)
    }

    /// Map a per-agent vector in sorted order back to the caller's order.
    pub fn unsort(&self, sorted: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; sorted.len()];
        for (k, &orig) in self.order.iter().enumerate() {
            out[orig] = sorted[k];
        }
        out
    }

    fn check_vector(&self, c_vec: &[f64]) -> Result<()> {
        if c_vec.len() != self.n() {
            return Err(invalid(format!("expected {} thresholds, got {}", self.n(), c_vec.len())));
        }
        c_vec.iter().try_for_each(|&c| self.d.check_support(c))
    }

    fn find_probs(&self, c_vec: &[f64]) -> Vec<f64> {
        self.q.iter().zip(c_vec).map(|(qi, &c)| qi * self.d.cdf(c)).collect()
    }
}

/// Distribution of the number of successes among independent trials.
pub fn poisson_binomial_pmf(probs: &[f64]) -> Vec<f64> {
    let mut pmf = vec![0.0; probs.len() + 1];
    pmf[0] = 1.0;
    for (j, &p) in probs.iter().enumerate() {
        for k in (1..=j + 1).rev() {
            pmf[k] = pmf[k] * (1.0 - p) + pmf[k - 1] * p;
        }
        pmf[0] *= 1.0 - p;
    }
    pmf
}

fn psi_from_probs(q_i: f64, i: usize, pi: &[f64]) -> f64 {
    let rivals: Vec<f64> = pi.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &p)| p).collect();
    let pmf = poisson_binomial_pmf(&rivals);
    q_i * pmf.iter().enumerate().map(|(t, p)| p / (t + 1) as f64).sum::<f64>()
}

/// `Ψᵢ`: win probability of sorted agent `i` when searching, given everyone's
/// thresholds. Entry `i` of `c_vec` is ignored.
pub fn psi_i(contest: &HeteroContest, i: usize, c_vec: &[f64]) -> Result<f64> {
    if i >= contest.n() {
        return Err(invalid(format!("agent index {i} out of range for n = {}", contest.n())));
    }
    contest.check_vector(c_vec)?;
    Ok(psi_from_probs(contest.q[i], i, &contest.find_probs(c_vec)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdVector {
    /// Thresholds in sorted-ability order.
    pub c_vec: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Largest `|cᵢ − clamp(VΨᵢ)|` at the returned point.
    pub max_residual: f64,
}

fn best_response_residual(contest: &HeteroContest, c: &[f64]) -> f64 {
    let (lo, hi) = contest.d.support();
    let pi = contest.find_probs(c);
    (0..contest.n())
        .map(|i| (c[i] - (contest.prize * psi_from_probs(contest.q[i], i, &pi)).clamp(lo, hi)).abs())
        .fold(0.0, f64::max)
}

/// One equilibrium, reached by Gauss–Seidel best responses from the symmetric
/// solution at the mean ability. Equilibria need not be unique.
pub fn solve_thresholds(contest: &HeteroContest) -> Result<ThresholdVector> {
    let n = contest.n();
    let mean_q = contest.q.iter().sum::<f64>() / n as f64;
    let start = solve_threshold(&contest.d, &ContestConfig::new(n as f64, mean_q, contest.prize)?)?;
    let (lo, hi) = contest.d.support();
    let mut c = vec![start.threshold; n];
    let mut pi = contest.find_probs(&c);
    for sweep in 1..=MAX_SWEEPS {
        let mut change: f64 = 0.0;
        for i in 0..n {
            let next = (contest.prize * psi_from_probs(contest.q[i], i, &pi)).clamp(lo, hi);
            change = change.max((next - c[i]).abs());
            c[i] = next;
            pi[i] = contest.q[i] * contest.d.cdf(next);
        }
        if change < SWEEP_TOL {
            let max_residual = best_response_residual(contest, &c);
            return Ok(ThresholdVector {
                c_vec: c,
                converged: true,
                iterations: sweep,
                max_residual,
            });
        }
    }
    let max_residual = best_response_residual(contest, &c);
    Ok(ThresholdVector {
        c_vec: c,
        converged: false,
        iterations: MAX_SWEEPS,
        max_residual,
    })
}

/// Newton's method on `ĉᵢ − VΨᵢ(ĉ₋ᵢ) = 0` from `start`, with a central-difference
/// Jacobian. Unlike best-response sweeps it stays near equilibria that are
/// unstable under best-response dynamics, so it can follow one equilibrium as
/// abilities are perturbed.
pub fn solve_thresholds_newton(contest: &HeteroContest, start: &[f64]) -> Result<ThresholdVector> {
    contest.check_vector(start)?;
    let n = contest.n();
    let (lo, hi) = contest.d.support();
    let residual = |c: &[f64]| -> Vec<f64> {
        let pi = contest.find_probs(c);
        (0..n).map(|i| c[i] - contest.prize * psi_from_probs(contest.q[i], i, &pi)).collect()
    };
    let mut c = start.to_vec();
    for iter in 1..=NEWTON_MAX_ITERS {
        let r = residual(&c);
        if r.iter().all(|x| x.abs() < NEWTON_TOL) {
            return Ok(ThresholdVector {
                max_residual: best_response_residual(contest, &c),
                c_vec: c,
                converged: true,
                iterations: iter - 1,
            });
        }
        let mut jac = vec![vec![0.0; n]; n];
        for j in 0..n {
            let h = NEWTON_STEP * (hi - lo);
            let (mut up, mut down) = (c.clone(), c.clone());
            up[j] = (c[j] + h).min(hi);
            down[j] = (c[j] - h).max(lo);
            let (ru, rd) = (residual(&up), residual(&down));
            for i in 0..n {
                jac[i][j] = (ru[i] - rd[i]) / (up[j] - down[j]);
            }
        }
        let step = solve_linear(jac, r).ok_or_else(|| Error::NonConvergence("singular Jacobian in Newton step".into()))?;
        for i in 0..n {
            c[i] = (c[i] - step[i]).clamp(lo, hi);
        }
    }
    Ok(ThresholdVector {
        max_residual: best_response_residual(contest, &c),
        c_vec: c,
        converged: false,
        iterations: NEWTON_MAX_ITERS,
    })
}

/// Gaussian elimination with partial pivoting.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Some(x)
}

/// `1 − Π(1 − qᵢF(ĉᵢ))`.
pub fn success_probability_hetero(contest: &HeteroContest, c_vec: &[f64]) -> Result<f64> {
    contest.check_vector(c_vec)?;
    Ok(1.0 - contest.find_probs(c_vec).iter().map(|p| 1.0 - p).product::<f64>())
}

/// Principal's payoff in threshold space, `W·P(ĉ) − Σ ĉᵢF(ĉᵢ)`.
pub fn principal_objective_hetero(contest: &HeteroContest, w: f64, c_vec: &[f64]) -> Result<f64> {
    let p = success_probability_hetero(contest, c_vec)?;
    let cost: f64 = c_vec.iter().map(|&c| c * contest.d.cdf(c)).sum();
    Ok(w * p - cost)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeteroPrizeSolution {
    pub thresholds: ThresholdVector,
    pub prize: f64,
    /// `ĉᵢ/Ψᵢ` for every agent; all equal when a single prize implements the thresholds.
    pub implied_prizes: Vec<f64>,
}

/// Solve the per-agent system `ĉᵢ = Wqᵢ Π_{j≠i}(1 − qⱼF(ĉⱼ)) − F(ĉᵢ)/f(ĉᵢ)`
/// by Gauss–Seidel and recover the prize from each agent's indifference.
///
/// Fails with [`Error::PrizeDisagreement`] when the implied prizes differ by
/// more than `1e-8`, which is the generic outcome once abilities differ.
pub fn solve_principal_hetero(contest: &HeteroContest, w: f64) -> Result<HeteroPrizeSolution> {
    ensure_finite("W", w)?;
    if w <= 0.0 {
        return Err(invalid(format!("W must be > 0, got {w}")));
    }
    let n = contest.n();
    let d = &contest.d;
    let (lo, hi) = d.support();
    let mean_q = contest.q.iter().sum::<f64>() / n as f64;
    let start = principal::optimal_prize(d, mean_q, n as f64, w)?;
    let mut c = vec![start.threshold; n];
    let mut pi = contest.find_probs(&c);

    let own_fixed_point = |a: f64| -> Result<f64> {
        if a <= lo {
            return Ok(lo);
        }
        if a - d.reverse_hazard_ratio(hi)? - hi >= 0.0 {
            return Ok(hi);
        }
        let g = |x: f64| a - d.reverse_hazard_ratio(x).unwrap_or(f64::NAN) - x;
        Ok(bisect(g, lo, hi, DEFAULT_TOL, false))
    };

    let mut converged = false;
    let mut iterations = MAX_SWEEPS;
    for sweep in 1..=MAX_SWEEPS {
        let mut change: f64 = 0.0;
        for i in 0..n {
            let others: f64 = pi.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, p)| 1.0 - p).product();
            let next = own_fixed_point(w * contest.q[i] * others)?;
            change = change.max((next - c[i]).abs());
            c[i] = next;
            pi[i] = contest.q[i] * d.cdf(next);
        }
        if change < SWEEP_TOL {
            converged = true;
            iterations = sweep;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence(format!(
            "principal system did not settle in {MAX_SWEEPS} sweeps"
        )));
    }

    let implied_prizes: Vec<f64> = (0..n).map(|i| c[i] / psi_from_probs(contest.q[i], i, &pi)).collect();
    let max = implied_prizes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = implied_prizes.iter().copied().fold(f64::INFINITY, f64::min);
    if max - min > PRIZE_AGREEMENT_TOL {
        return Err(Error::PrizeDisagreement {
            spread: max - min,
            thresholds: c,
            implied_prizes,
        });
    }
    let prize = implied_prizes.iter().sum::<f64>() / n as f64;
    let max_residual = best_response_residual(&contest.with_prize(prize)?, &c);
    Ok(HeteroPrizeSolution {
        thresholds: ThresholdVector {
            c_vec: c,
            converged,
            iterations,
            max_residual,
        },
        prize,
        implied_prizes,
    })
}

/// Interior equilibria of the two-agent game with common ability `q`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanResult {
    /// Every fixed pair `(ĉ₁, ĉ₂)` found.
    pub pairs: Vec<(f64, f64)>,
    /// Connected ranges of `ĉ₁` over which every grid point is a fixed pair;
    /// isolated equilibria appear as single-point ranges.
    pub segments: Vec<(f64, f64)>,
    /// The symmetric equilibrium, when it is interior.
    pub symmetric: Option<(f64, f64)>,
    pub spacing: f64,
}

/// Scan `ĉ₁` over a grid, set `ĉ₂ = BR(ĉ₁)` and keep the pairs with
/// `|ĉ₁ − BR(ĉ₂)| ≤ 1e-9`, where `BR(c) = qV(1 − (q/2)F(c))` clamped into the support.
pub fn best_response_scan_n2(d: &CostDistribution, q: f64, prize: f64, grid: usize) -> Result<ScanResult> {
    ensure_probability("q", q)?;
    ensure_finite("prize", prize)?;
    if grid < 2 {
        return Err(invalid("scan grid needs at least two cells"));
    }
    let (lo, hi) = d.support();
    let br = |c: f64| (q * prize * (1.0 - 0.5 * q * d.cdf(c))).clamp(lo, hi);
    let gap = |c: f64| c - br(br(c));
    let interior = |c: f64| c > lo && c < hi;
    let spacing = (hi - lo) / grid as f64;
    let point = |k: usize| if k == grid { hi } else { lo + spacing * k as f64 };

    let mut pairs = Vec::new();
    let mut segments: Vec<(f64, f64)> = Vec::new();
    let mut run: Option<(f64, f64)> = None;
    let mut prev: Option<(f64, f64)> = None;
    for k in 0..=grid {
        let c1 = point(k);
        let g = gap(c1);
        let on_grid = g.abs() <= SCAN_TOL && interior(c1) && interior(br(c1));
        if on_grid {
            pairs.push((c1, br(c1)));
            run = Some(run.map_or((c1, c1), |(s, _)| (s, c1)));
        } else {
            if let Some(seg) = run.take() {
                segments.push(seg);
            }
            // an isolated crossing strictly between two grid points
            if let Some((c0, g0)) = prev {
                if g0.abs() > SCAN_TOL && g0 * g < 0.0 {
                    let r = bisect(gap, c0, c1, DEFAULT_TOL, g0 < 0.0);
                    if interior(r) && interior(br(r)) && gap(r).abs() <= SCAN_TOL {
                        pairs.push((r, br(r)));
                        segments.push((r, r));
                    }
                }
            }
        }
        prev = Some((c1, g));
    }
    if let Some(seg) = run {
        segments.push(seg);
    }

    let sym = solve_threshold(d, &ContestConfig::new(2.0, q, prize)?)?;
    let symmetric = (sym.interior && (br(sym.threshold) - sym.threshold).abs() <= SCAN_TOL)
        .then_some((sym.threshold, sym.threshold));
    Ok(ScanResult {
        pairs,
        segments,
        symmetric,
        spacing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::fixtures::kinked;
    use crate::equilibrium::phi;
    use proptest::prelude::*;

    fn unit() -> CostDistribution {
        CostDistribution::uniform(0.0, 1.0).unwrap()
    }

    /// `qᵢ Σ_{S ⊆ rivals} Π_{j∈S} πⱼ Π_{j∉S}(1 − πⱼ) / (|S| + 1)`.
    fn psi_by_subsets(q_i: f64, rivals: &[f64]) -> f64 {
        let r = rivals.len();
        let mut total = 0.0;
        for mask in 0u32..(1 << r) {
            let mut prob = 1.0;
            for (j, &p) in rivals.iter().enumerate() {
                prob *= if mask & (1 << j) != 0 { p } else { 1.0 - p };
            }
            total += prob / (mask.count_ones() + 1) as f64;
        }
        q_i * total
    }

    fn pmf_by_subsets(probs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; probs.len() + 1];
        for mask in 0u32..(1 << probs.len()) {
            let mut prob = 1.0;
            for (j, &p) in probs.iter().enumerate() {
                prob *= if mask & (1 << j) != 0 { p } else { 1.0 - p };
            }
            out[mask.count_ones() as usize] += prob;
        }
        out
    }

    #[test]
    fn contest_sorts_and_unsorts() {
        let h = HeteroContest::new(unit(), &[0.3, 0.9, 0.5], 1.0).unwrap();
        assert_eq!(h.q(), &[0.9, 0.5, 0.3]);
        assert_eq!(h.order(), &[1, 2, 0]);
        assert_eq!(h.unsort(&[1.0, 2.0, 3.0]), vec![3.0, 1.0, 2.0]);
        assert!(HeteroContest::new(unit(), &[], 1.0).is_err());
        assert!(HeteroContest::new(unit(), &[0.5, 1.2], 1.0).is_err());
    }

    #[test]
    fn psi_examples() {
        let h = HeteroContest::new(unit(), &[0.6; 4], 1.0).unwrap();
        let cfg = ContestConfig::new(4.0, 0.6, 1.0).unwrap();
        let got = psi_i(&h, 2, &[0.35; 4]).unwrap();
        assert!((got - phi(&unit(), &cfg, 0.35).unwrap()).abs() < 1e-14);

        let h = HeteroContest::new(unit(), &[0.9, 0.5, 0.2], 1.0).unwrap();
        for i in 0..3 {
            assert_eq!(psi_i(&h, i, &[0.0; 3]).unwrap(), h.q()[i]);
        }
        let c = [0.8, 0.3, 0.6];
        let pi = [0.9 * 0.8, 0.5 * 0.3, 0.2 * 0.6];
        let want = psi_by_subsets(0.5, &[pi[0], pi[2]]);
        assert!((psi_i(&h, 1, &c).unwrap() - want).abs() < 1e-14);
        assert!(psi_i(&h, 3, &c).is_err());
        assert!(psi_i(&h, 0, &[0.5, 0.5]).is_err());
    }

    #[test]
    fn symmetric_reduction() {
        let h = HeteroContest::new(unit(), &[0.5; 5], 1.0).unwrap();
        let t = solve_thresholds(&h).unwrap();
        let base = solve_threshold(&unit(), &ContestConfig::new(5.0, 0.5, 1.0).unwrap()).unwrap();
        assert!(t.converged);
        for &c in &t.c_vec {
            assert!((c - base.threshold).abs() < 1e-10);
        }
        let p = success_probability_hetero(&h, &t.c_vec).unwrap();
        assert!((p - base.success_prob).abs() < 1e-10);
        assert_eq!(success_probability_hetero(&h, &[0.0; 5]).unwrap(), 0.0);
    }

    #[test]
    fn small_ability_perturbation_is_continuous() {
        let d = CostDistribution::power(20.0).unwrap();
        let base = solve_threshold(&d, &ContestConfig::new(3.0, 1.0, 1.0).unwrap()).unwrap();
        for eps in [1e-3, 1e-4] {
            let h = HeteroContest::new(d.clone(), &[1.0, 1.0 - eps, 1.0 - 2.0 * eps], 1.0).unwrap();
            let t = solve_thresholds_newton(&h, &[base.threshold; 3]).unwrap();
            assert!(t.converged && t.max_residual < 1e-9);
            let p = success_probability_hetero(&h, &t.c_vec).unwrap();
            assert!((p - base.success_prob).abs() < 50.0 * eps, "{eps}: {p}");
        }
    }

    #[test]
    fn sweeps_can_leave_an_unstable_symmetric_equilibrium() {
        // with steep F the symmetric point repels best responses; the sweep
        // settles on a different, asymmetric equilibrium
        let d = CostDistribution::power(20.0).unwrap();
        let h = HeteroContest::new(d, &[1.0, 0.999, 0.998], 1.0).unwrap();
        let t = solve_thresholds(&h).unwrap();
        assert!(t.converged && t.max_residual < 1e-9);
        assert!(t.c_vec[0] > 0.99 && t.c_vec[2] < 0.6, "{t:?}");
    }

    #[test]
    fn ordering_can_fail_when_best_responses_are_steep() {
        // best-response slopes pass through 1/V here, and the interior
        // equilibrium Newton finds near the symmetric point is not ordered by ability
        let d = CostDistribution::power(20.0).unwrap();
        let h = HeteroContest::new(d, &[1.0, 0.999, 0.998], 1.0).unwrap();
        let t = solve_thresholds_newton(&h, &[0.8951; 3]).unwrap();
        assert!(t.converged && t.max_residual < 1e-12);
        assert!(t.c_vec.iter().all(|&c| c > 0.0 && c < 1.0));
        assert!(!(t.c_vec[0] > t.c_vec[1] && t.c_vec[1] > t.c_vec[2]), "{t:?}");
    }

    #[test]
    fn newton_agrees_with_sweeps_when_stable() {
        let h = HeteroContest::new(unit(), &[0.9, 0.6, 0.4, 0.2], 1.0).unwrap();
        let gs = solve_thresholds(&h).unwrap();
        let nt = solve_thresholds_newton(&h, &[0.3; 4]).unwrap();
        assert!(gs.converged && nt.converged);
        for (a, b) in gs.c_vec.iter().zip(&nt.c_vec) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn principal_symmetric_reduction() {
        let h = HeteroContest::new(unit(), &[0.5; 3], 1.0).unwrap();
        let sol = solve_principal_hetero(&h, 2.0).unwrap();
        let sym = principal::optimal_prize(&unit(), 0.5, 3.0, 2.0).unwrap();
        assert!((sol.prize - sym.prize).abs() < 1e-8);
        for &c in &sol.thresholds.c_vec {
            assert!((c - sym.threshold).abs() < 1e-9);
        }
        assert!(sol.thresholds.max_residual < 1e-9);
    }

    #[test]
    fn principal_heterogeneous_system() {
        let h = HeteroContest::new(unit(), &[0.5, 0.9], 1.0).unwrap();
        let err = solve_principal_hetero(&h, 2.0).unwrap_err();
        let Error::PrizeDisagreement { thresholds, implied_prizes, spread } = err else {
            panic!("expected a prize disagreement, got {err:?}");
        };
        assert!(spread > 1e-8 && implied_prizes.len() == 2);
        assert!(thresholds[0] > thresholds[1]);
        // the system's solution maximizes the threshold-space objective
        let grid = 1000;
        let mut best = (0.0, 0.0, f64::NEG_INFINITY);
        for a in 0..=grid {
            for b in 0..=grid {
                let c = [a as f64 / grid as f64, b as f64 / grid as f64];
                let v = principal_objective_hetero(&h, 2.0, &c).unwrap();
                if v > best.2 {
                    best = (c[0], c[1], v);
                }
            }
        }
        let h_grid = 1.0 / grid as f64;
        assert!((best.0 - thresholds[0]).abs() <= 2.0 * h_grid);
        assert!((best.1 - thresholds[1]).abs() <= 2.0 * h_grid);
    }

    #[test]
    fn scan_recovers_segment() {
        let scan = best_response_scan_n2(&kinked(), 1.0, 5.0 / 7.0, 10_000).unwrap();
        assert_eq!(scan.segments.len(), 1, "{:?}", scan.segments);
        let (a, b) = scan.segments[0];
        assert!((a - 3.0 / 7.0).abs() <= 2e-4 && (b - 4.0 / 7.0).abs() <= 2e-4);
        for &(c1, c2) in &scan.pairs {
            assert!((c1 + c2 - 1.0).abs() < 1e-9);
        }
        let (s1, s2) = scan.symmetric.unwrap();
        assert!((s1 - 0.5).abs() < 1e-10 && (s2 - 0.5).abs() < 1e-10);
    }

    #[test]
    fn scan_unique_and_empty_cases() {
        let scan = best_response_scan_n2(&unit(), 0.5, 1.0, 1000).unwrap();
        let base = solve_threshold(&unit(), &ContestConfig::new(2.0, 0.5, 1.0).unwrap()).unwrap();
        assert_eq!(scan.pairs.len(), 1);
        assert!((scan.pairs[0].0 - base.threshold).abs() < 1e-9);
        assert!((scan.pairs[0].1 - base.threshold).abs() < 1e-9);

        let d = CostDistribution::uniform(0.6, 1.0).unwrap();
        let none = best_response_scan_n2(&d, 0.5, 1.0, 1000).unwrap();
        assert!(none.pairs.is_empty() && none.segments.is_empty() && none.symmetric.is_none());
    }

    proptest! {
        #[test]
        fn convolution_matches_enumeration(probs in prop::collection::vec(0.0..1.0f64, 0..=12)) {
            let dp = poisson_binomial_pmf(&probs);
            let brute = pmf_by_subsets(&probs);
            prop_assert!((dp.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (a, b) in dp.iter().zip(&brute) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            let direct = psi_by_subsets(0.7, &probs);
            let conv = 0.7 * dp.iter().enumerate().map(|(t, p)| p / (t + 1) as f64).sum::<f64>();
            prop_assert!((direct - conv).abs() < 1e-12);
        }

        #[test]
        fn success_decomposes(q in prop::collection::vec(0.05..1.0f64, 1..=10), c in prop::collection::vec(0.0..1.0f64, 10)) {
            let h = HeteroContest::new(unit(), &q, 1.0).unwrap();
            let cv = &c[..q.len()];
            let p = success_probability_hetero(&h, cv).unwrap();
            let sum: f64 = (0..q.len()).map(|i| unit().cdf(cv[i]) * psi_i(&h, i, cv).unwrap()).sum();
            prop_assert!((p - sum).abs() < 1e-10);
        }

        #[test]
        fn higher_ability_searches_more(mut q in prop::collection::vec(0.1..1.0f64, 2..=6), prize in 0.3..1.5f64) {
            q.sort_by(|a, b| b.total_cmp(a));
            prop_assume!(q.windows(2).all(|w| w[0] - w[1] > 1e-3));
            let h = HeteroContest::new(unit(), &q, prize).unwrap();
            let t = solve_thresholds(&h).unwrap();
            prop_assume!(t.converged);
            prop_assert!(t.max_residual <= 1e-9);
            for w in t.c_vec.windows(2) {
                prop_assert!(w[0] > w[1]);
            }
        }
    }
}
