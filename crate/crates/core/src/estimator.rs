//! Empirical false-alarm estimators.
//!
//! Everything here works on observed scores only: per-pair FA rates, the
//! zero-effort (random impostor) estimate, the worst-case estimate where
//! each trial scores a random target against the closest of `N` randomly
//! drawn impostors, percentile-bootstrap confidence intervals, and
//! DCF-minimizing thresholds.
//!
//! Trials are independent; each derives its own RNG stream from
//! `(seed, trial index)`, so estimates are identical for any thread count.

use rand::Rng;
use rayon::prelude::*;

use crate::data::{quantile_sorted, PairScoreTable, ScoreSet};
use crate::error::{Error, Result};
use crate::rng::stream;

/// A worst-case FA query: impostor population size and threshold.
#[derive(Debug, Clone, Copy)]
pub struct FaQuery {
    pub n: usize,
    pub tau: f64,
}

/// Monte-Carlo simulation settings.
#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    /// Number of target draws (trials).
    pub trials: usize,
    pub seed: u64,
    /// Draw impostor sets with replacement instead of as distinct subsets.
    pub with_replacement: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            trials: 1000,
            seed: 0,
            with_replacement: false,
        }
    }
}

/// Result of [`worst_case_fa_empirical`]: the averaged estimate plus the
/// per-trial FA rates it was averaged from.
#[derive(Debug, Clone)]
pub struct WorstCaseFa {
    pub p_fa: f64,
    pub per_trial: Vec<f64>,
}

/// Fraction of scores strictly above `tau`.
pub fn fa_rate(scores: &ScoreSet, tau: f64) -> f64 {
    fa_rate_slice(scores.scores(), tau)
}

pub fn fa_rate_slice(scores: &[f64], tau: f64) -> f64 {
    debug_assert!(!scores.is_empty());
    let hits = scores.iter().filter(|&&s| s > tau).count();
    hits as f64 / scores.len() as f64
}

/// Speaker-pair similarity: the mean score of the pair.
pub fn pair_similarity(scores: &ScoreSet) -> f64 {
    scores.mean()
}

/// Zero-effort FA estimate: equal-weight average of per-pair FA rates.
pub fn zero_effort_fa(table: &PairScoreTable, tau: f64) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (_, _, set) in table.iter_pairs() {
        sum += fa_rate(set, tau);
        count += 1;
    }
    sum / count as f64
}

// domain tags for RNG stream derivation
const DOMAIN_TRIAL: u64 = 1;

/// Worst-case FA estimate with `N` impostors.
///
/// Each trial draws a uniform random target from the enroll-side speakers
/// and `N` impostors from the test-side speakers (distinct unless
/// `with_replacement`), selects the impostor with the largest mean score
/// against the target (ties broken by smallest speaker token) and records
/// that pair's FA rate at `tau`. Deterministic given the seed.
pub fn worst_case_fa_empirical(
    table: &PairScoreTable,
    query: &FaQuery,
    cfg: &SimConfig,
) -> Result<WorstCaseFa> {
    if query.n == 0 {
        return Err(Error::Invalid("impostor count N must be >= 1".into()));
    }
    if cfg.trials == 0 {
        return Err(Error::Invalid("trial count must be >= 1".into()));
    }
    let targets = table.enroll_ids();
    if targets.is_empty() {
        return Err(Error::EmptyResult("table has no enroll speakers".into()));
    }

    let per_trial: Vec<f64> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| -> Result<f64> {
            let mut rng = stream(cfg.seed, &[DOMAIN_TRIAL, trial as u64]);
            let target = targets[rng.gen_range(0..targets.len())];
            let eligible: Vec<u32> = table
                .test_ids()
                .iter()
                .copied()
                .filter(|&t| t != target)
                .collect();
            let chosen = draw_impostors(&eligible, query.n, cfg.with_replacement, &mut rng)?;

            let mut best: Option<(f64, u32)> = None;
            for imp in chosen {
                let set =
                    table
                        .scores_by_index(target, imp)
                        .ok_or_else(|| Error::MissingPair {
                            enroll: table.speaker(target).to_string(),
                            test: table.speaker(imp).to_string(),
                        })?;
                let sim = pair_similarity(set);
                let better = match best {
                    None => true,
                    Some((b_sim, b_imp)) => {
                        sim > b_sim
                            || (sim == b_sim && table.speaker(imp) < table.speaker(b_imp))
                    }
                };
                if better {
                    best = Some((sim, imp));
                }
            }
            let (_, selected) = best.expect("N >= 1 yields a selection");
            let set = table.scores_by_index(target, selected).unwrap();
            Ok(fa_rate(set, query.tau))
        })
        .collect::<Result<Vec<f64>>>()?;

    // fixed trial order keeps the reduction deterministic
    let p_fa = per_trial.iter().sum::<f64>() / per_trial.len() as f64;
    Ok(WorstCaseFa { p_fa, per_trial })
}

/// Draws `n` impostor indices from `eligible`, distinct unless
/// `with_replacement`.
pub(crate) fn draw_impostors(
    eligible: &[u32],
    n: usize,
    with_replacement: bool,
    rng: &mut impl Rng,
) -> Result<Vec<u32>> {
    if with_replacement {
        if eligible.is_empty() {
            return Err(Error::NotEnoughImpostors {
                requested: n,
                available: 0,
            });
        }
        return Ok((0..n)
            .map(|_| eligible[rng.gen_range(0..eligible.len())])
            .collect());
    }
    if eligible.len() < n {
        return Err(Error::NotEnoughImpostors {
            requested: n,
            available: eligible.len(),
        });
    }
    // partial Fisher-Yates over a scratch copy
    let mut pool: Vec<u32> = eligible.to_vec();
    for i in 0..n {
        let j = rng.gen_range(i..pool.len());
        pool.swap(i, j);
    }
    pool.truncate(n);
    Ok(pool)
}

/// Percentile-bootstrap confidence interval for the mean of `per_trial`.
///
/// Draws `b` resamples with replacement and returns the
/// `((1-level)/2, 1-(1-level)/2)` empirical quantiles of the resample means.
pub fn bootstrap_ci(per_trial: &[f64], level: f64, b: usize, rng: &mut impl Rng) -> (f64, f64) {
    assert!(!per_trial.is_empty(), "per-trial list must be non-empty");
    assert!(level > 0.0 && level < 1.0, "level must be in (0,1)");
    assert!(b >= 1);
    let n = per_trial.len();
    let mut means = Vec::with_capacity(b);
    for _ in 0..b {
        let mut sum = 0.0;
        for _ in 0..n {
            sum += per_trial[rng.gen_range(0..n)];
        }
        means.push(sum / n as f64);
    }
    means.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let alpha = (1.0 - level) / 2.0;
    let lo = quantile_sorted(&means, alpha);
    let hi = quantile_sorted(&means, 1.0 - alpha);
    (lo, hi)
}

/// Threshold minimizing the detection cost function
/// `p_target*c_miss*P_miss(tau) + (1-p_target)*c_fa*P_FA(tau)`.
///
/// Candidates are the midpoints between adjacent pooled sorted scores plus
/// infinite sentinels on both sides; ties resolve to the smallest
/// minimizing threshold. A trial is accepted when its score is strictly
/// above the threshold, so `P_miss` counts target scores `<= tau`.
pub fn min_dcf_threshold(
    target_scores: &[f64],
    nontarget_scores: &[f64],
    c_miss: f64,
    c_fa: f64,
    p_target: f64,
) -> f64 {
    assert!(!target_scores.is_empty() && !nontarget_scores.is_empty());
    assert!(c_miss > 0.0 && c_fa > 0.0);
    assert!(p_target > 0.0 && p_target < 1.0);

    let mut tar = target_scores.to_vec();
    let mut non = nontarget_scores.to_vec();
    tar.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    non.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());

    let mut pooled: Vec<f64> = tar.iter().chain(non.iter()).copied().collect();
    pooled.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());

    let mut candidates = Vec::with_capacity(pooled.len() + 1);
    candidates.push(f64::NEG_INFINITY);
    for w in pooled.windows(2) {
        candidates.push(0.5 * (w[0] + w[1]));
    }
    candidates.push(f64::INFINITY);

    let frac_le = |sorted: &[f64], tau: f64| {
        // count of scores <= tau
        sorted.partition_point(|&s| s <= tau) as f64 / sorted.len() as f64
    };

    let mut best_tau = f64::NEG_INFINITY;
    let mut best_dcf = f64::INFINITY;
    for &tau in &candidates {
        let p_miss = frac_le(&tar, tau);
        let p_fa = 1.0 - frac_le(&non, tau);
        let dcf = p_target * c_miss * p_miss + (1.0 - p_target) * c_fa * p_fa;
        if dcf < best_dcf {
            best_dcf = dcf;
            best_tau = tau;
        }
    }
    best_tau
}
