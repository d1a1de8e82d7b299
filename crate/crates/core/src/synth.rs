//! Synthetic ground truth: score tables generated from known model
//! parameters, plus brute-force reference curves computed directly from
//! the generating process. Together they allow end-to-end validation of
//! the fit/extrapolate pipeline without any speech data.

use serde::{Deserialize, Serialize};

use crate::autodiff::ValueScope;
use crate::data::{PairScoreTable, ScoreRecord, SpeakerId};
use crate::error::{Error, Result};
use crate::locscale::{sample_worst_case_ls, LocScaleParams, ScoreBase};
use crate::model::{LsTrialNoise, PldaTrialNoise, RealizedModel, Selection};
use crate::plda::{sample_worst_case_plda, PldaScoreParams};
use crate::pwl::MonotonePwl;
use crate::rng::stream;
use crate::train::model_curve;

const DOM_SPEAKER: u64 = 20;
const DOM_PAIR: u64 = 21;

/// A known generating model plus corpus dimensions.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub model: RealizedModel,
    pub n_speakers: usize,
    pub scores_per_pair: usize,
    pub seed: u64,
}

impl GroundTruth {
    fn validate(&self) -> Result<()> {
        if self.n_speakers < 2 {
            return Err(Error::Invalid("need at least two speakers".into()));
        }
        if self.scores_per_pair < 1 {
            return Err(Error::Invalid("need at least one score per pair".into()));
        }
        Ok(())
    }
}

/// Generates the full ordered-pair score table of a synthetic corpus.
///
/// Speaker-level state is fixed once per speaker (PLDA latents) or once
/// per ordered pair (location-scale `(mu, sigma)`), then every pair emits
/// `scores_per_pair` scores from fresh draws. Deterministic given the seed.
pub fn generate_synthetic_table(gt: &GroundTruth) -> Result<PairScoreTable> {
    gt.validate()?;
    let width = (gt.n_speakers as f64).log10().ceil().max(1.0) as usize + 1;
    let name = |i: usize| SpeakerId::new(format!("s{i:0width$}"));
    let l = gt.scores_per_pair;
    let mut records = Vec::with_capacity(gt.n_speakers * (gt.n_speakers - 1) * l);
    let mut scope = ValueScope;

    match &gt.model {
        RealizedModel::Plda(p) => {
            let dim = p.dim();
            let latents: Vec<Vec<f64>> = (0..gt.n_speakers)
                .map(|i| {
                    let mut rng = stream(gt.seed, &[DOM_SPEAKER, i as u64]);
                    (0..dim)
                        .map(|_| rand::Rng::sample(&mut rng, rand_distr::StandardNormal))
                        .collect()
                })
                .collect();
            let view = p.view();
            for e in 0..gt.n_speakers {
                for t in 0..gt.n_speakers {
                    if e == t {
                        continue;
                    }
                    let mut rng = stream(gt.seed, &[DOM_PAIR, e as u64, t as u64]);
                    let fresh = PldaTrialNoise::generate(dim, 0, l, &mut rng);
                    let noise = PldaTrialNoise {
                        y_target: latents[e].clone(),
                        y_impostors: latents[t].clone(),
                        eps_enroll: fresh.eps_enroll,
                        eps_test: fresh.eps_test,
                    };
                    let scores =
                        sample_worst_case_plda(&mut scope, &view, &noise, Selection::Hard);
                    for score in scores {
                        records.push(ScoreRecord {
                            enroll: name(e),
                            test: name(t),
                            score,
                            partition: None,
                        });
                    }
                }
            }
        }
        RealizedModel::LocScale(p) => {
            let view = p.view();
            for e in 0..gt.n_speakers {
                for t in 0..gt.n_speakers {
                    if e == t {
                        continue;
                    }
                    let mut rng = stream(gt.seed, &[DOM_PAIR, e as u64, t as u64]);
                    let noise = LsTrialNoise::generate(1, l, &mut rng);
                    let (scores, _, _) =
                        sample_worst_case_ls(&mut scope, &view, &noise, Selection::Hard);
                    for score in scores {
                        records.push(ScoreRecord {
                            enroll: name(e),
                            test: name(t),
                            score,
                            partition: None,
                        });
                    }
                }
            }
        }
    }
    PairScoreTable::from_records(records)
}

/// Reference curve straight from the generating process: hard-selection
/// worst-case simulation with unlimited fresh speakers per trial. This is
/// the target a fitted model's extrapolation should match.
pub fn oracle_curve(
    gt: &GroundTruth,
    n_grid: &[usize],
    taus: &[f64],
    trials: usize,
    seed: u64,
) -> Result<crate::curve::FaCurve> {
    gt.validate()?;
    model_curve(
        &gt.model,
        n_grid,
        taus,
        trials,
        gt.scores_per_pair,
        0.99,
        seed,
    )
}

/// On-disk ground-truth description for the `simulate` subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum GroundTruthFile {
    #[serde(rename = "plda")]
    Plda {
        d: Vec<f64>,
        n_speakers: usize,
        scores_per_pair: usize,
        seed: u64,
        #[serde(default)]
        warp: Option<MonotonePwl>,
    },
    #[serde(rename = "gaussian-ls")]
    GaussianLs {
        hyper_mean: [f64; 2],
        /// `[l11, l21, l22]`
        hyper_chol: [f64; 3],
        n_speakers: usize,
        scores_per_pair: usize,
        seed: u64,
        #[serde(default)]
        warp: Option<MonotonePwl>,
    },
    #[serde(rename = "pwl-ls")]
    PwlLs {
        hyper_mean: [f64; 2],
        hyper_chol: [f64; 3],
        quantile: MonotonePwl,
        n_speakers: usize,
        scores_per_pair: usize,
        seed: u64,
        #[serde(default)]
        warp: Option<MonotonePwl>,
    },
}

impl GroundTruthFile {
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<GroundTruth> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: GroundTruthFile =
            serde_json::from_str(&text).map_err(|e| Error::Invalid(e.to_string()))?;
        file.into_ground_truth()
    }

    pub fn into_ground_truth(self) -> Result<GroundTruth> {
        Ok(match self {
            GroundTruthFile::Plda {
                d,
                n_speakers,
                scores_per_pair,
                seed,
                warp,
            } => GroundTruth {
                model: RealizedModel::Plda(PldaScoreParams::new(d, warp)?),
                n_speakers,
                scores_per_pair,
                seed,
            },
            GroundTruthFile::GaussianLs {
                hyper_mean,
                hyper_chol,
                n_speakers,
                scores_per_pair,
                seed,
                warp,
            } => GroundTruth {
                model: RealizedModel::LocScale(LocScaleParams {
                    hyper_mean,
                    hyper_chol,
                    base: ScoreBase::Gaussian,
                    warp,
                }),
                n_speakers,
                scores_per_pair,
                seed,
            },
            GroundTruthFile::PwlLs {
                hyper_mean,
                hyper_chol,
                quantile,
                n_speakers,
                scores_per_pair,
                seed,
                warp,
            } => GroundTruth {
                model: RealizedModel::LocScale(LocScaleParams {
                    hyper_mean,
                    hyper_chol,
                    base: ScoreBase::Quantile(quantile),
                    warp,
                }),
                n_speakers,
                scores_per_pair,
                seed,
            },
        })
    }
}
