//! Location-scale score generators.
//!
//! A speaker pair is represented implicitly by a location-scale pair
//! `(mu, sigma)`: its scores are `mu + sigma * F_inv(u)` for a base
//! distribution given by its quantile `F_inv` — the standard normal
//! quantile or a learnable monotone piecewise-linear one. Pairs are drawn
//! from a bivariate Gaussian hyper-distribution over `(mu, log sigma)`,
//! the worst-case impostor is the candidate with the largest location,
//! and an optional monotone warp reshapes the emitted scores.

use rand::Rng;

use crate::autodiff::{softmax, Scope, ValueScope};
use crate::data::{PairScoreTable, ScoreSet};
use crate::error::{Error, Result};
use crate::model::{
    CoreInit, Family, LsTrialNoise, ModelSpec, Selection, CHOL_FLOOR, U_CLAMP,
};
use crate::pwl::{std_normal_quantile, MonotonePwl, PwlRef};

/// Base distribution of a location-scale model, as a quantile function.
#[derive(Debug, Clone)]
pub enum ScoreBase {
    Gaussian,
    Quantile(MonotonePwl),
}

/// Realized location-scale model parameters.
#[derive(Debug, Clone)]
pub struct LocScaleParams {
    /// Mean of `(mu, log sigma)`.
    pub hyper_mean: [f64; 2],
    /// Lower-triangular Cholesky factor `[l11, l21, l22]` of the
    /// `(mu, log sigma)` covariance; diagonal entries positive.
    pub hyper_chol: [f64; 3],
    pub base: ScoreBase,
    pub warp: Option<MonotonePwl>,
}

/// One worst-case draw: the emitted scores plus the selected pair.
#[derive(Debug, Clone)]
pub struct WorstCaseSample {
    pub scores: ScoreSet,
    pub selected_mu: f64,
    pub selected_sigma: f64,
}

/// Scope view of a location-scale model: the five core values plus live
/// knot values for the optional quantile and warp.
pub struct LocScaleView<'a, V> {
    pub mean_mu: V,
    pub mean_log_sigma: V,
    pub l11: V,
    pub l21: V,
    pub l22: V,
    pub base: BaseView<'a, V>,
    pub warp: Option<PwlRef<'a, V>>,
}

pub enum BaseView<'a, V> {
    Gaussian,
    Quantile(PwlRef<'a, V>),
}

impl LocScaleParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.hyper_chol[0] > 0.0 && self.hyper_chol[2] > 0.0) {
            return Err(Error::Invalid(
                "hyper Cholesky diagonal must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Plain-`f64` view for evaluation-time sampling.
    pub fn view(&self) -> LocScaleView<'_, f64> {
        let mut s = ValueScope;
        LocScaleView {
            mean_mu: self.hyper_mean[0],
            mean_log_sigma: self.hyper_mean[1],
            l11: self.hyper_chol[0],
            l21: self.hyper_chol[1],
            l22: self.hyper_chol[2],
            base: match &self.base {
                ScoreBase::Gaussian => BaseView::Gaussian,
                ScoreBase::Quantile(q) => BaseView::Quantile(PwlRef {
                    shape: q,
                    ys: q.realize(&mut s, q.raw_offsets()),
                }),
            },
            warp: self.warp.as_ref().map(|w| PwlRef {
                shape: w,
                ys: w.realize(&mut s, w.raw_offsets()),
            }),
        }
    }

    /// Structural spec plus flat raw vector equivalent to these parameters.
    pub fn to_spec_and_raw(&self) -> Result<(ModelSpec, Vec<f64>)> {
        self.validate()?;
        let spec = ModelSpec {
            family: match self.base {
                ScoreBase::Gaussian => Family::GaussianLs,
                ScoreBase::Quantile(_) => Family::PwlLs,
            },
            dim: 0,
            quantile: match &self.base {
                ScoreBase::Quantile(q) => Some(q.clone()),
                ScoreBase::Gaussian => None,
            },
            warp: self.warp.clone(),
        };
        let raw = spec.initial_params(&CoreInit::LocScale {
            mean: self.hyper_mean,
            chol: self.hyper_chol,
        })?;
        Ok((spec, raw))
    }

    /// Draws `count` reparameterized `(mu, sigma)` pairs.
    pub fn sample_pair_params(&self, count: usize, rng: &mut impl Rng) -> Vec<(f64, f64)> {
        let noise = LsTrialNoise::generate(count, 0, rng);
        noise
            .pair_eps
            .iter()
            .map(|&[e1, e2]| {
                let mu = self.hyper_mean[0] + self.hyper_chol[0] * e1;
                let log_sigma = self.hyper_mean[1] + self.hyper_chol[1] * e1 + self.hyper_chol[2] * e2;
                (mu, log_sigma.exp())
            })
            .collect()
    }
}

/// Worst-case score generation shared by the hard (`f64`) and
/// differentiable (tape) paths.
///
/// Draws `N` pairs from the hyper-distribution, selects by location (hard
/// argmax with ties to the lowest index, or softmax over standardized
/// locations) and emits one score per uniform draw via inverse transform
/// sampling, warped last if a warp is present.
pub fn sample_worst_case_ls<S: Scope>(
    s: &mut S,
    view: &LocScaleView<'_, S::V>,
    noise: &LsTrialNoise,
    selection: Selection,
) -> (Vec<S::V>, S::V, S::V) {
    let n = noise.pair_eps.len();
    assert!(n >= 1, "need at least one candidate impostor");

    let mut mus = Vec::with_capacity(n);
    let mut sigmas = Vec::with_capacity(n);
    for &[e1, e2] in &noise.pair_eps {
        let mu = s.mul_add_c(view.l11, e1, view.mean_mu);
        let ls1 = s.mul_add_c(view.l21, e1, view.mean_log_sigma);
        let log_sigma = s.mul_add_c(view.l22, e2, ls1);
        mus.push(mu);
        sigmas.push(s.exp(log_sigma));
    }

    let (mu_sel, sigma_sel) = match selection {
        Selection::Hard => {
            let mut k = 0;
            for j in 1..n {
                if s.value(mus[j]) > s.value(mus[k]) {
                    k = j;
                }
            }
            (mus[k], sigmas[k])
        }
        Selection::Soft { beta } => {
            // standardize locations so beta is scale-free
            let mut sum = mus[0];
            for &m in &mus[1..] {
                sum = s.add(sum, m);
            }
            let mean = s.mul_c(sum, 1.0 / n as f64);
            let mut var_sum: Option<S::V> = None;
            let centered: Vec<S::V> = mus
                .iter()
                .map(|&m| {
                    let c = s.sub(m, mean);
                    let c2 = s.mul(c, c);
                    var_sum = Some(match var_sum {
                        Some(v) => s.add(v, c2),
                        None => c2,
                    });
                    c
                })
                .collect();
            let var = s.mul_c(var_sum.unwrap(), 1.0 / n as f64);
            let var_safe = s.add_c(var, 1e-12);
            let sd = s.sqrt(var_safe);
            let args: Vec<S::V> = centered
                .iter()
                .map(|&c| {
                    let z = s.div(c, sd);
                    s.mul_c(z, beta)
                })
                .collect();
            let w = softmax(s, &args);
            let mut mu_sel = s.mul(w[0], mus[0]);
            let mut sigma_sel = s.mul(w[0], sigmas[0]);
            for j in 1..n {
                let tm = s.mul(w[j], mus[j]);
                mu_sel = s.add(mu_sel, tm);
                let ts = s.mul(w[j], sigmas[j]);
                sigma_sel = s.add(sigma_sel, ts);
            }
            (mu_sel, sigma_sel)
        }
    };

    let mut scores = Vec::with_capacity(noise.u.len());
    for &u in &noise.u {
        let u = u.clamp(U_CLAMP, 1.0 - U_CLAMP);
        let mut score = match &view.base {
            BaseView::Gaussian => {
                let z = std_normal_quantile(u);
                s.mul_add_c(sigma_sel, z, mu_sel)
            }
            BaseView::Quantile(q) => {
                let qv = q.eval_at(s, u);
                let scaled = s.mul(sigma_sel, qv);
                s.add(mu_sel, scaled)
            }
        };
        if let Some(w) = &view.warp {
            score = w.eval_of(s, score);
        }
        scores.push(score);
    }
    (scores, mu_sel, sigma_sel)
}

/// Draws one worst-case score set with `N` candidate impostors and `L`
/// scores.
pub fn ls_sample_worst_case_scores(
    params: &LocScaleParams,
    n: usize,
    l: usize,
    rng: &mut impl Rng,
    selection: Selection,
) -> Result<WorstCaseSample> {
    if n == 0 || l == 0 {
        return Err(Error::Invalid("need N >= 1 and L >= 1".into()));
    }
    params.validate()?;
    let noise = LsTrialNoise::generate(n, l, rng);
    let view = params.view();
    let mut scope = ValueScope;
    let (scores, mu, sigma) = sample_worst_case_ls(&mut scope, &view, &noise, selection);
    Ok(WorstCaseSample {
        scores: ScoreSet::new(scores)?,
        selected_mu: mu,
        selected_sigma: sigma,
    })
}

/// Moment-matching Gaussian baseline: per-pair sample mean and standard
/// deviation (population form, floored at 1e-6), then the sample mean and
/// covariance of the `(mean, log std)` cloud as the hyper-distribution.
pub fn fit_generative_gaussian_baseline(table: &PairScoreTable) -> Result<LocScaleParams> {
    if table.n_pairs() < 2 {
        return Err(Error::Invalid(
            "moment-matching needs at least two speaker pairs".into(),
        ));
    }
    let mut points: Vec<[f64; 2]> = Vec::with_capacity(table.n_pairs());
    for (e, t, set) in table.iter_pairs() {
        if set.len() < 2 {
            return Err(Error::Invalid(format!(
                "pair ({}, {}) has fewer than two scores; per-pair spread is undefined",
                table.speaker(e),
                table.speaker(t)
            )));
        }
        let mean = set.mean();
        let var = set
            .scores()
            .iter()
            .map(|s| (s - mean) * (s - mean))
            .sum::<f64>()
            / set.len() as f64;
        let sd = var.sqrt().max(1e-6);
        points.push([mean, sd.ln()]);
    }
    let n = points.len() as f64;
    let mut mean = [0.0; 2];
    for p in &points {
        mean[0] += p[0];
        mean[1] += p[1];
    }
    mean[0] /= n;
    mean[1] /= n;
    let (mut c00, mut c01, mut c11) = (0.0, 0.0, 0.0);
    for p in &points {
        let d0 = p[0] - mean[0];
        let d1 = p[1] - mean[1];
        c00 += d0 * d0;
        c01 += d0 * d1;
        c11 += d1 * d1;
    }
    c00 /= n;
    c01 /= n;
    c11 /= n;

    let l11 = c00.max(0.0).sqrt().max(CHOL_FLOOR);
    let l21 = c01 / l11;
    let l22 = (c11 - l21 * l21).max(0.0).sqrt().max(CHOL_FLOOR);

    Ok(LocScaleParams {
        hyper_mean: mean,
        hyper_chol: [l11, l21, l22],
        base: ScoreBase::Gaussian,
        warp: None,
    })
}
