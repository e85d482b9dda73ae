//! Seeded simulation of the contest itself.
//!
//! Each replication draws every agent's cost, lets agents at or below their
//! threshold search, resolves discovery independently and hands out the
//! prize(s) among the finders. Replications are split into fixed-size chunks;
//! chunk `k` uses the ChaCha8 stream `k` of the master seed, and chunk totals
//! are combined in chunk order. Results therefore depend only on the seed,
//! the replication count and the configuration, never on the thread count.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::CostDistribution;
use crate::equilibrium::ContestConfig;
use crate::error::{ensure_probability, invalid, Result};
use crate::expert::{ExpertConfig, RewardMode};
use crate::multiprize::PrizeStructure;

const CHUNK: u64 = 1 << 14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Variant {
    Baseline,
    Expert(ExpertConfig),
    Multiprize { v: PrizeStructure },
    Hetero { q_vec: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Thresholds {
    Symmetric(f64),
    PerAgent(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub replications: u64,
    pub seed: u64,
    pub variant: Variant,
    pub thresholds: Thresholds,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    /// Whether `target` lies within `k` standard errors of the estimate.
    pub fn covers(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.std_error
    }

    fn proportion(hits: u64, trials: u64) -> Self {
        if trials == 0 {
            return Self {
                value: f64::NAN,
                std_error: f64::NAN,
            };
        }
        let p = hits as f64 / trials as f64;
        let var = if trials > 1 {
            p * (1.0 - p) * trials as f64 / (trials - 1) as f64
        } else {
            0.0
        };
        Self {
            value: p,
            std_error: (var / trials as f64).sqrt(),
        }
    }

    fn mean(sum: f64, sum_sq: f64, count: u64) -> Self {
        let m = sum / count as f64;
        let var = if count > 1 {
            ((sum_sq - count as f64 * m * m) / (count - 1) as f64).max(0.0)
        } else {
            0.0
        };
        Self {
            value: m,
            std_error: (var / count as f64).sqrt(),
        }
    }

    /// `ΣY/ΣX` over replications with a delta-method standard error.
    fn ratio(r: &RatioSums, reps: u64) -> Self {
        if r.x == 0.0 {
            return Self {
                value: f64::NAN,
                std_error: f64::NAN,
            };
        }
        let est = r.y / r.x;
        let n = reps as f64;
        let x_bar = r.x / n;
        let resid_sq = (r.yy - 2.0 * est * r.xy + est * est * r.xx).max(0.0);
        let var = if reps > 1 { resid_sq / (n - 1.0) / (n * x_bar * x_bar) } else { 0.0 };
        Self {
            value: est,
            std_error: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimEstimate {
    pub replications: u64,
    /// Share of replications in which somebody found the object.
    pub success_rate: Estimate,
    /// Prizes of rank 1 won per search, pooled over agents.
    pub searcher_win_rate: Estimate,
    /// Per agent, the share of its searches that won the rank-1 prize.
    pub win_rate_per_agent: Vec<Estimate>,
    /// Per agent, the share of replications in which it searched.
    pub search_rate_per_agent: Vec<Estimate>,
    /// Average of `prize received − own threshold` over searches: the payoff
    /// of a searching agent whose cost sits exactly at its threshold.
    pub mean_payoff_at_threshold: Estimate,
    /// `rank_win_rates[i][m]`: share of agent `i`'s searches that took rank `m + 1`.
    pub rank_win_rates: Option<Vec<Vec<Estimate>>>,
}

#[derive(Debug, Clone, Default)]
struct RatioSums {
    x: f64,
    y: f64,
    xx: f64,
    yy: f64,
    xy: f64,
}

impl RatioSums {
    fn push(&mut self, x: f64, y: f64) {
        self.x += x;
        self.y += y;
        self.xx += x * x;
        self.yy += y * y;
        self.xy += x * y;
    }

    fn absorb(&mut self, o: &Self) {
        self.x += o.x;
        self.y += o.y;
        self.xx += o.xx;
        self.yy += o.yy;
        self.xy += o.xy;
    }
}

#[derive(Debug, Clone)]
struct ChunkStats {
    successes: u64,
    searched: Vec<u64>,
    won: Vec<u64>,
    ranks: Option<Vec<u64>>,
    wins_per_search: RatioSums,
    payoff_per_search: RatioSums,
}

impl ChunkStats {
    fn new(n: usize, with_ranks: bool) -> Self {
        Self {
            successes: 0,
            searched: vec![0; n],
            won: vec![0; n],
            ranks: with_ranks.then(|| vec![0; n * n]),
            wins_per_search: RatioSums::default(),
            payoff_per_search: RatioSums::default(),
        }
    }

    fn absorb(&mut self, o: &Self) {
        self.successes += o.successes;
        for (a, b) in self.searched.iter_mut().zip(&o.searched) {
            *a += b;
        }
        for (a, b) in self.won.iter_mut().zip(&o.won) {
            *a += b;
        }
        if let (Some(a), Some(b)) = (self.ranks.as_mut(), o.ranks.as_ref()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self.wins_per_search.absorb(&o.wins_per_search);
        self.payoff_per_search.absorb(&o.payoff_per_search);
    }
}

/// Everything a replication needs, validated once.
struct Game<'a> {
    d: &'a CostDistribution,
    q: Vec<f64>,
    thresholds: Vec<f64>,
    /// Prize by rank; length 1 outside the multi-prize variant.
    prizes: Vec<f64>,
    expert: Option<ExpertConfig>,
}

impl<'a> Game<'a> {
    fn new(d: &'a CostDistribution, cfg: &ContestConfig, sim: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        if sim.replications == 0 {
            return Err(invalid("replications must be >= 1"));
        }
        if cfg.n.fract() != 0.0 {
            return Err(invalid(format!("simulation needs an integer n, got {}", cfg.n)));
        }
        let n = cfg.n as usize;
        let thresholds = match &sim.thresholds {
            Thresholds::Symmetric(c) => vec![*c; n],
            Thresholds::PerAgent(v) => v.clone(),
        };
        if thresholds.len() != n {
            return Err(invalid(format!("expected {n} thresholds, got {}", thresholds.len())));
        }
        for &c in &thresholds {
            d.check_support(c)?;
        }
        let mut q = vec![cfg.q; n];
        let mut prizes = vec![cfg.prize];
        let mut expert = None;
        match &sim.variant {
            Variant::Baseline => {}
            Variant::Expert(e) => {
                ensure_probability("q_e", e.q_e)?;
                expert = Some(*e);
            }
            Variant::Multiprize { v } => {
                if v.len() != n {
                    return Err(invalid(format!("prize structure has {} ranks for n = {n}", v.len())));
                }
                prizes = v.prizes().to_vec();
            }
            Variant::Hetero { q_vec } => {
                if q_vec.len() != n {
                    return Err(invalid(format!("q_vec has {} entries for n = {n}", q_vec.len())));
                }
                for &qi in q_vec {
                    ensure_probability("q_i", qi)?;
                }
                q = q_vec.clone();
            }
        }
        Ok(Self {
            d,
            q,
            thresholds,
            prizes,
            expert,
        })
    }

    fn n(&self) -> usize {
        self.q.len()
    }

    fn searches(&self, i: usize, rng: &mut ChaCha8Rng) -> bool {
        let cost = self.d.quantile(open_unit(rng));
        let c = self.thresholds[i];
        cost <= c && c > self.d.lower()
    }

    /// Play one replication. `forced` makes that agent search regardless of
    /// cost. Fills `ranked` with the finders in prize order and returns
    /// whether anyone (the expert included) found the object.
    fn play(&self, rng: &mut ChaCha8Rng, forced: Option<usize>, searching: &mut Vec<usize>, ranked: &mut Vec<usize>) -> bool {
        searching.clear();
        ranked.clear();
        for i in 0..self.n() {
            let s = self.searches(i, rng);
            if s || forced == Some(i) {
                searching.push(i);
                if open_unit(rng) < self.q[i] {
                    ranked.push(i);
                }
            }
        }
        let expert_found = match self.expert {
            Some(e) => open_unit(rng) < e.q_e,
            None => false,
        };
        let found = expert_found || !ranked.is_empty();
        if self.prizes.len() > 1 {
            ranked.shuffle(rng);
            return found;
        }
        let winner = if expert_found && self.expert.map(|e| e.reward_mode) == Some(RewardMode::ExpertKeeps) {
            None
        } else {
            // reservoir choice among the finders, the expert counted last
            let mut pick = None;
            let mut seen = 0u64;
            for &i in ranked.iter() {
                seen += 1;
                if rng.random_range(0..seen) == 0 {
                    pick = Some(i);
                }
            }
            if expert_found {
                seen += 1;
                if rng.random_range(0..seen) == 0 {
                    pick = None;
                }
            }
            pick
        };
        ranked.clear();
        ranked.extend(winner);
        found
    }

    fn prize_of_rank(&self, m: usize) -> f64 {
        self.prizes.get(m).copied().unwrap_or(0.0)
    }
}

/// Uniform draw on the open interval `(0, 1)`.
fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.random::<u64>() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

fn chunk_ranges(reps: u64) -> Vec<(u64, u64)> {
    (0..reps.div_ceil(CHUNK)).map(|k| (k, CHUNK.min(reps - k * CHUNK))).collect()
}

pub fn simulate(d: &CostDistribution, cfg: &ContestConfig, sim: &SimConfig) -> Result<SimEstimate> {
    let game = Game::new(d, cfg, sim)?;
    let n = game.n();
    let with_ranks = game.prizes.len() > 1;

    let chunks: Vec<ChunkStats> = chunk_ranges(sim.replications)
        .into_par_iter()
        .map(|(k, reps)| {
            let mut rng = chunk_rng(sim.seed, k);
            let mut stats = ChunkStats::new(n, with_ranks);
            let (mut searching, mut ranked) = (Vec::with_capacity(n), Vec::with_capacity(n));
            for _ in 0..reps {
                let found = game.play(&mut rng, None, &mut searching, &mut ranked);
                stats.successes += found as u64;
                let mut payoff = -searching.iter().map(|&i| game.thresholds[i]).sum::<f64>();
                for &i in searching.iter() {
                    stats.searched[i] += 1;
                }
                for (m, &i) in ranked.iter().enumerate() {
                    payoff += game.prize_of_rank(m);
                    if let Some(r) = stats.ranks.as_mut() {
                        r[i * n + m] += 1;
                    }
                }
                let top = ranked.first().copied();
                if let Some(i) = top {
                    stats.won[i] += 1;
                }
                stats.wins_per_search.push(searching.len() as f64, top.is_some() as u64 as f64);
                stats.payoff_per_search.push(searching.len() as f64, payoff);
            }
            stats
        })
        .collect();

    let mut total = ChunkStats::new(n, with_ranks);
    for c in &chunks {
        total.absorb(c);
    }
    let reps = sim.replications;
    let rank_win_rates = total.ranks.as_ref().map(|r| {
        (0..n)
            .map(|i| (0..n).map(|m| Estimate::proportion(r[i * n + m], total.searched[i])).collect())
            .collect()
    });
    Ok(SimEstimate {
        replications: reps,
        success_rate: Estimate::proportion(total.successes, reps),
        searcher_win_rate: Estimate::ratio(&total.wins_per_search, reps),
        win_rate_per_agent: (0..n).map(|i| Estimate::proportion(total.won[i], total.searched[i])).collect(),
        search_rate_per_agent: (0..n).map(|i| Estimate::proportion(total.searched[i], reps)).collect(),
        mean_payoff_at_threshold: Estimate::ratio(&total.payoff_per_search, reps),
        rank_win_rates,
    })
}

/// Expected gain from searching over staying out for agent 0 when its cost
/// is `at_cost` and everyone else plays their threshold.
pub fn deviation_gain(d: &CostDistribution, cfg: &ContestConfig, sim: &SimConfig, at_cost: f64) -> Result<Estimate> {
    d.check_support(at_cost)?;
    let game = Game::new(d, cfg, sim)?;
    let n = game.n();
    let sums: Vec<(f64, f64)> = chunk_ranges(sim.replications)
        .into_par_iter()
        .map(|(k, reps)| {
            let mut rng = chunk_rng(sim.seed, k);
            let (mut searching, mut ranked) = (Vec::with_capacity(n), Vec::with_capacity(n));
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for _ in 0..reps {
                game.play(&mut rng, Some(0), &mut searching, &mut ranked);
                let prize = ranked.iter().position(|&i| i == 0).map_or(0.0, |m| game.prize_of_rank(m));
                let gain = prize - at_cost;
                sum += gain;
                sum_sq += gain * gain;
            }
            (sum, sum_sq)
        })
        .collect();
    let (sum, sum_sq) = sums.iter().fold((0.0, 0.0), |acc, s| (acc.0 + s.0, acc.1 + s.1));
    Ok(Estimate::mean(sum, sum_sq, sim.replications))
}
