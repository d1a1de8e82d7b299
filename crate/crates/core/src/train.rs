//! Discriminative training and model-based estimation.
//!
//! A generative score model is kept inside the prediction pipeline and its
//! relaxed worst-case FA estimates are regressed onto empirical
//! Monte-Carlo targets by MSE. The relaxation replaces the threshold
//! indicator with a scaled sigmoid and the impostor argmax with a softmax
//! mixture; evaluation-time estimates are always hard (no relaxations).
//!
//! Per step, empirical targets and model noise are drawn fresh (stochastic
//! optimization); within a step the noise is fixed, so the gradient and any
//! finite-difference probe see the same randomness.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifact::{config_hash, ModelArtifact, Provenance};
use crate::autodiff::{
    value_and_grad_with, Node, Objective, Scope, Tape, TapeScope, ValueScope,
};
use crate::curve::{CurveRow, FaCurve};
use crate::data::PairScoreTable;
use crate::error::{Error, Result};
use crate::estimator::{
    bootstrap_ci, fa_rate_slice, worst_case_fa_empirical, FaQuery, SimConfig,
};
use crate::locscale::{fit_generative_gaussian_baseline, sample_worst_case_ls};
use crate::model::{Family, ModelSpec, ModelView, QueryNoise, RealizedModel, Selection, TrialNoise};
use crate::optim::AdamState;
use crate::plda::sample_worst_case_plda;
use crate::rng::{derive_seed, stream};

use rand::Rng;

// stream domains
const DOM_BATCH: u64 = 10;
const DOM_TARGET: u64 = 11;
const DOM_NOISE: u64 = 12;
const DOM_VAL_QUERY: u64 = 13;
const DOM_VAL_MODEL: u64 = 14;
const DOM_VAL_EMP: u64 = 15;
const DOM_CURVE: u64 = 16;
const DOM_CI: u64 = 17;

/// Training configuration; defaults follow the experimental protocol
/// (mini-batches of 20, learning rate 1e-3, Adam).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Trials per FA estimate during training.
    pub t_train: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub steps: usize,
    /// Sigmoid scale, applied to scores standardized by `score_std`.
    pub alpha: f64,
    /// Soft-argmax scale.
    pub beta: f64,
    /// Queries draw `N` uniformly from `[1, n_train_max)`.
    pub n_train_max: usize,
    pub tau_min: f64,
    pub tau_max: f64,
    /// Scores emitted per sampled worst-case pair.
    pub scores_per_pair: usize,
    /// Standard deviation used to standardize sigmoid arguments.
    pub score_std: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            t_train: 300,
            batch_size: 20,
            lr: 1e-3,
            steps: 2000,
            alpha: 20.0,
            beta: 10.0,
            n_train_max: 660,
            tau_min: -1.0,
            tau_max: 1.0,
            scores_per_pair: 10,
            score_std: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Fills the data-dependent fields (threshold range from the 0.1% and
    /// 99.9% pooled score quantiles, standardization from the pooled std).
    pub fn calibrated_to(mut self, table: &PairScoreTable) -> Self {
        self.tau_min = table.pooled_quantile(0.001);
        self.tau_max = table.pooled_quantile(0.999);
        self.score_std = table.pooled_std().max(1e-9);
        self
    }

    fn validate(&self) -> Result<()> {
        let ok = self.t_train >= 1
            && self.batch_size >= 1
            && self.lr > 0.0
            && self.steps >= 1
            && self.alpha > 0.0
            && self.beta >= 0.0
            && self.n_train_max >= 2
            && self.tau_min < self.tau_max
            && self.scores_per_pair >= 1
            && self.score_std > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid(format!("invalid training config: {self:?}")))
        }
    }
}

/// One regression target: a query plus its empirical estimate.
#[derive(Debug, Clone)]
pub struct TrainTarget {
    pub query: FaQuery,
    pub empirical_p_fa: f64,
}

/// Draws one mini-batch of `(N, tau)` queries and computes their empirical
/// targets with per-target derived seeds.
pub fn make_training_batch(
    table: &PairScoreTable,
    cfg: &TrainConfig,
    step: u64,
) -> Result<Vec<TrainTarget>> {
    cfg.validate()?;
    let mut rng = stream(cfg.seed, &[DOM_BATCH, step]);
    let queries: Vec<FaQuery> = (0..cfg.batch_size)
        .map(|_| FaQuery {
            n: rng.gen_range(1..cfg.n_train_max),
            tau: rng.gen_range(cfg.tau_min..cfg.tau_max),
        })
        .collect();
    queries
        .into_par_iter()
        .enumerate()
        .map(|(j, query)| -> Result<TrainTarget> {
            let sim = SimConfig {
                trials: cfg.t_train,
                seed: derive_seed(cfg.seed, &[DOM_TARGET, step, j as u64]),
                with_replacement: false,
            };
            let est = worst_case_fa_empirical(table, &query, &sim)?;
            Ok(TrainTarget {
                query,
                empirical_p_fa: est.p_fa,
            })
        })
        .collect()
}

/// Relaxed (differentiable) worst-case FA estimate on fixed noise:
/// mean over trials and scores of `sigmoid(alpha * (s - tau) / score_std)`
/// with soft impostor selection.
pub fn relaxed_fa_estimate_scoped<S: Scope>(
    s: &mut S,
    view: &ModelView<'_, S::V>,
    tau: f64,
    noise: &QueryNoise,
    alpha_over_std: f64,
    beta: f64,
) -> S::V {
    relaxed_or_hard_estimate(s, view, tau, noise, alpha_over_std, Selection::Soft { beta })
}

fn relaxed_or_hard_estimate<S: Scope>(
    s: &mut S,
    view: &ModelView<'_, S::V>,
    tau: f64,
    noise: &QueryNoise,
    alpha_over_std: f64,
    selection: Selection,
) -> S::V {
    let mut total: Option<S::V> = None;
    for trial in &noise.trials {
        let scores = match (view, trial) {
            (ModelView::LocScale(v), TrialNoise::Ls(n)) => {
                sample_worst_case_ls(s, v, n, selection).0
            }
            (ModelView::Plda(v), TrialNoise::Plda(n)) => sample_worst_case_plda(s, v, n, selection),
            _ => panic!("noise does not match the model family"),
        };
        let inv_l = 1.0 / scores.len() as f64;
        let mut trial_sum: Option<S::V> = None;
        for score in scores {
            let shifted = s.add_c(score, -tau);
            let arg = s.mul_c(shifted, alpha_over_std);
            let sig = s.sigmoid(arg);
            trial_sum = Some(match trial_sum {
                Some(acc) => s.add(acc, sig),
                None => sig,
            });
        }
        let trial_mean = s.mul_c(trial_sum.expect("L >= 1"), inv_l);
        total = Some(match total {
            Some(acc) => s.add(acc, trial_mean),
            None => trial_mean,
        });
    }
    s.mul_c(total.expect("T >= 1"), 1.0 / noise.trials.len() as f64)
}

/// Relaxed estimate as a plain number (soft selection, sigmoid indicator).
pub fn relaxed_fa_estimate(
    spec: &ModelSpec,
    raw: &[f64],
    query: &FaQuery,
    cfg: &TrainConfig,
    noise: &QueryNoise,
) -> f64 {
    let mut s = ValueScope;
    let view = spec.view(&mut s, raw);
    relaxed_fa_estimate_scoped(
        &mut s,
        &view,
        query.tau,
        noise,
        cfg.alpha / cfg.score_std,
        cfg.beta,
    )
}

/// Hard (indicator, hard-selection) estimate on the same fixed noise the
/// relaxed estimate would see; the relaxation's sharp-limit target.
pub fn hard_fa_estimate_on_noise(
    spec: &ModelSpec,
    raw: &[f64],
    tau: f64,
    noise: &QueryNoise,
) -> f64 {
    let mut s = ValueScope;
    let view = spec.view(&mut s, raw);
    let mut total = 0.0;
    for trial in &noise.trials {
        let scores = match (&view, trial) {
            (ModelView::LocScale(v), TrialNoise::Ls(n)) => {
                sample_worst_case_ls(&mut s, v, n, Selection::Hard).0
            }
            (ModelView::Plda(v), TrialNoise::Plda(n)) => {
                sample_worst_case_plda(&mut s, v, n, Selection::Hard)
            }
            _ => panic!("noise does not match the model family"),
        };
        total += fa_rate_slice(&scores, tau);
    }
    total / noise.trials.len() as f64
}

/// MSE objective over one batch: queries, targets and fixed per-element
/// noise. Element order is fixed, so the loss is deterministic.
pub struct BatchObjective<'a> {
    pub spec: &'a ModelSpec,
    pub items: Vec<BatchItem>,
    pub alpha_over_std: f64,
    pub beta: f64,
}

pub struct BatchItem {
    pub query: FaQuery,
    pub target: f64,
    pub noise: QueryNoise,
}

impl BatchObjective<'_> {
    fn element_loss(&self, tape: &mut Tape, params: &[Node], item: &BatchItem) -> Node {
        let mut s = TapeScope(tape);
        let view = self.spec.view(&mut s, params);
        let est = relaxed_fa_estimate_scoped(
            &mut s,
            &view,
            item.query.tau,
            &item.noise,
            self.alpha_over_std,
            self.beta,
        );
        let diff = s.add_c(est, -item.target);
        s.mul(diff, diff)
    }

    /// Mean loss and gradient, elements evaluated in parallel and combined
    /// in element order.
    pub fn value_and_grad(&self, params: &[f64]) -> (f64, Vec<f64>) {
        let per_element: Vec<(f64, Vec<f64>)> = self
            .items
            .par_iter()
            .map_init(Tape::new, |tape, item| {
                let single = SingleObjective { batch: self, item };
                value_and_grad_with(tape, &single, params)
            })
            .collect();
        let inv = 1.0 / self.items.len() as f64;
        let mut loss = 0.0;
        let mut grad = vec![0.0; params.len()];
        for (v, g) in &per_element {
            loss += v;
            for (acc, gi) in grad.iter_mut().zip(g) {
                *acc += gi;
            }
        }
        (loss * inv, grad.iter().map(|g| g * inv).collect())
    }
}

struct SingleObjective<'a, 'b> {
    batch: &'a BatchObjective<'b>,
    item: &'a BatchItem,
}

impl Objective for SingleObjective<'_, '_> {
    fn eval_tape(&self, tape: &mut Tape, params: &[Node]) -> Node {
        self.batch.element_loss(tape, params, self.item)
    }
}

impl Objective for BatchObjective<'_> {
    /// Whole-batch evaluation on one tape (used by gradient verification).
    fn eval_tape(&self, tape: &mut Tape, params: &[Node]) -> Node {
        let mut acc: Option<Node> = None;
        for item in &self.items {
            let loss = self.element_loss(tape, params, item);
            acc = Some(match acc {
                Some(a) => tape.add(a, loss),
                None => loss,
            });
        }
        let total = acc.expect("batch must be non-empty");
        tape.mul_c(total, 1.0 / self.items.len() as f64)
    }
}

/// Builds the fixed noise for a batch of queries at a given step.
pub fn batch_noise(
    spec: &ModelSpec,
    targets: &[TrainTarget],
    cfg: &TrainConfig,
    step: u64,
) -> Vec<QueryNoise> {
    targets
        .iter()
        .enumerate()
        .map(|(j, t)| {
            QueryNoise::generate(
                spec.family,
                spec.dim,
                cfg.t_train,
                t.query.n,
                cfg.scores_per_pair,
                cfg.seed,
                &[DOM_NOISE, step, j as u64],
            )
        })
        .collect()
}

/// One training-log line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainLogRecord {
    pub step: usize,
    pub loss: f64,
    pub grad_norm: f64,
    pub wall_ms: f64,
}

/// Initial raw parameters for a family: moment matching for the
/// location-scale families, unit within-class variances for PLDA.
pub fn initial_raw(spec: &ModelSpec, table: &PairScoreTable) -> Result<Vec<f64>> {
    use crate::model::CoreInit;
    match spec.family {
        Family::GaussianLs | Family::PwlLs => {
            let baseline = fit_generative_gaussian_baseline(table)?;
            spec.initial_params(&CoreInit::LocScale {
                mean: baseline.hyper_mean,
                chol: baseline.hyper_chol,
            })
        }
        Family::Plda => spec.initial_params(&CoreInit::Plda {
            d: vec![1.0; spec.dim],
        }),
    }
}

/// Minimizes batch MSE with Adam; returns the best-loss parameters seen.
///
/// Targets and model noise are redrawn every step from step-derived
/// streams; the returned artifact records the configuration hash and seed.
pub fn train_discriminative(
    spec: &ModelSpec,
    table: &PairScoreTable,
    cfg: &TrainConfig,
) -> Result<(ModelArtifact, Vec<TrainLogRecord>)> {
    cfg.validate()?;
    let mut params = initial_raw(spec, table)?;
    let mut adam = AdamState::new(params.len(), cfg.lr);
    let mut log = Vec::with_capacity(cfg.steps);
    let mut best = (f64::INFINITY, params.clone());
    let started = Instant::now();

    for step in 0..cfg.steps {
        let t0 = started.elapsed();
        let targets = make_training_batch(table, cfg, step as u64)?;
        let noises = batch_noise(spec, &targets, cfg, step as u64);
        let objective = BatchObjective {
            spec,
            items: targets
                .iter()
                .zip(noises)
                .map(|(t, noise)| BatchItem {
                    query: t.query,
                    target: t.empirical_p_fa,
                    noise,
                })
                .collect(),
            alpha_over_std: cfg.alpha / cfg.score_std,
            beta: cfg.beta,
        };
        let (loss, grad) = objective.value_and_grad(&params);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { step });
        }
        if loss < best.0 {
            best = (loss, params.clone());
        }
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        adam.step(&mut params, &grad)?;
        log.push(TrainLogRecord {
            step,
            loss,
            grad_norm,
            wall_ms: (started.elapsed() - t0).as_secs_f64() * 1e3,
        });
    }

    let artifact = ModelArtifact::from_spec(
        spec,
        best.1,
        Provenance {
            config_hash: config_hash(cfg),
            seed: cfg.seed,
        },
    )?;
    Ok((artifact, log))
}

/// Hard (indicator, hard-selection) model-based estimate of `P_FA^N(tau)`
/// from `trials` simulated worst-case score sets.
pub fn model_fa_estimate(
    model: &RealizedModel,
    query: &FaQuery,
    trials: usize,
    scores_per_pair: usize,
    seed: u64,
    tag: u64,
) -> (f64, Vec<f64>) {
    let per_trial: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let scores =
                sample_model_trial(model, query.n, scores_per_pair, seed, &[tag, trial as u64]);
            fa_rate_slice(&scores, query.tau)
        })
        .collect();
    let p_fa = per_trial.iter().sum::<f64>() / per_trial.len() as f64;
    (p_fa, per_trial)
}

/// One hard worst-case trial sampled from a realized model.
fn sample_model_trial(
    model: &RealizedModel,
    n: usize,
    l: usize,
    seed: u64,
    tags: &[u64],
) -> Vec<f64> {
    let mut rng = stream(seed, tags);
    let mut s = ValueScope;
    match model {
        RealizedModel::LocScale(p) => {
            let noise = crate::model::LsTrialNoise::generate(n, l, &mut rng);
            sample_worst_case_ls(&mut s, &p.view(), &noise, Selection::Hard).0
        }
        RealizedModel::Plda(p) => {
            let noise = crate::model::PldaTrialNoise::generate(p.dim(), n, l, &mut rng);
            sample_worst_case_plda(&mut s, &p.view(), &noise, Selection::Hard)
        }
    }
}

/// Hard model-based curve over an `(N, tau)` grid with percentile-bootstrap
/// confidence intervals. Scores are sampled once per `(N, trial)` and
/// thresholded at every `tau`, so the curve is exactly non-increasing in
/// `tau` for each `N`.
pub fn model_curve(
    model: &RealizedModel,
    n_grid: &[usize],
    taus: &[f64],
    trials: usize,
    scores_per_pair: usize,
    ci_level: f64,
    seed: u64,
) -> Result<FaCurve> {
    let mut curve = FaCurve::new();
    for &n in n_grid {
        if n == 0 {
            return Err(Error::Invalid("N must be >= 1".into()));
        }
        let per_trial_scores: Vec<Vec<f64>> = (0..trials)
            .into_par_iter()
            .map(|trial| {
                sample_model_trial(
                    model,
                    n,
                    scores_per_pair,
                    seed,
                    &[DOM_CURVE, n as u64, trial as u64],
                )
            })
            .collect();
        for (ti, &tau) in taus.iter().enumerate() {
            let per_trial: Vec<f64> = per_trial_scores
                .iter()
                .map(|scores| fa_rate_slice(scores, tau))
                .collect();
            let p_fa = per_trial.iter().sum::<f64>() / per_trial.len() as f64;
            let mut rng = stream(seed, &[DOM_CI, n as u64, ti as u64]);
            let (lo, hi) = bootstrap_ci(&per_trial, ci_level, 1000, &mut rng);
            curve.push(CurveRow {
                n: n as u64,
                tau,
                p_fa,
                ci_lo: lo.min(p_fa).max(0.0),
                ci_hi: hi.max(p_fa).min(1.0),
            })?;
        }
    }
    Ok(curve)
}

/// Extrapolates a fitted model over an `N` grid that may far exceed any
/// observed population.
pub fn extrapolate(
    artifact: &ModelArtifact,
    n_grid: &[usize],
    taus: &[f64],
    trials: usize,
    scores_per_pair: usize,
    seed: u64,
) -> Result<FaCurve> {
    let model = artifact.realized()?;
    model_curve(&model, n_grid, taus, trials, scores_per_pair, 0.99, seed)
}

/// Evaluation settings for [`validate_mae`].
#[derive(Debug, Clone, Copy)]
pub struct EvalConfig {
    pub trials: usize,
    pub scores_per_pair: usize,
    pub seed: u64,
}

/// Held-out mean absolute error, in percent: hard model estimates vs
/// empirical estimates on queries drawn uniformly from the given ranges,
/// both sides using independent seeds.
pub fn validate_mae(
    model: &RealizedModel,
    table: &PairScoreTable,
    n_range: (usize, usize),
    tau_range: (f64, f64),
    queries: usize,
    cfg: &EvalConfig,
) -> Result<f64> {
    if n_range.0 < 1 || n_range.0 > n_range.1 {
        return Err(Error::Invalid(format!("bad N range {n_range:?}")));
    }
    if queries == 0 {
        return Err(Error::Invalid("need at least one query".into()));
    }
    let mut rng = stream(cfg.seed, &[DOM_VAL_QUERY]);
    let mut abs_err_sum = 0.0;
    for qi in 0..queries {
        let query = FaQuery {
            n: rng.gen_range(n_range.0..=n_range.1),
            tau: rng.gen_range(tau_range.0..tau_range.1),
        };
        let (model_p, _) = model_fa_estimate(
            model,
            &query,
            cfg.trials,
            cfg.scores_per_pair,
            derive_seed(cfg.seed, &[DOM_VAL_MODEL, qi as u64]),
            0,
        );
        let emp = worst_case_fa_empirical(
            table,
            &query,
            &SimConfig {
                trials: cfg.trials,
                seed: derive_seed(cfg.seed, &[DOM_VAL_EMP, qi as u64]),
                with_replacement: false,
            },
        )?;
        abs_err_sum += (model_p - emp.p_fa).abs();
    }
    Ok(100.0 * abs_err_sum / queries as f64)
}
