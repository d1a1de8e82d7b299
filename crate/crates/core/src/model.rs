//! Shared machinery for the generative score models: family tags,
//! structural metadata, flat raw-parameter packing, and the fixed noise
//! containers that implement common random numbers.
//!
//! All trainable state lives in one flat vector of unconstrained reals.
//! Positivity (Cholesky diagonal, within-class variances, piecewise-linear
//! increments) is realized through floored softplus maps, so both the
//! optimizer and the persistence layer only ever see the raw vector.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::autodiff::Scope;
use crate::error::{Error, Result};
use crate::locscale::{BaseView, LocScaleParams, LocScaleView, ScoreBase};
use crate::plda::{PldaScoreParams, PldaView};
use crate::pwl::{MonotonePwl, PwlDomain, PwlRef};
use crate::rng::stream;

/// Floor for realized Cholesky diagonal entries.
pub const CHOL_FLOOR: f64 = 1e-6;
/// Floor for realized within-class variances.
pub const WITHIN_VAR_FLOOR: f64 = 1e-8;
/// Uniform draws for inverse transform sampling are clamped to
/// `(U_CLAMP, 1 - U_CLAMP)` to avoid infinite Gaussian quantiles.
pub const U_CLAMP: f64 = 1e-6;

/// Softplus shifted by a floor; strictly positive everywhere.
pub fn pos_floored(raw: f64, floor: f64) -> f64 {
    raw.max(0.0) + (-raw.abs()).exp().ln_1p() + floor
}

/// Inverse of [`pos_floored`] (up to the floor).
pub fn pos_floored_inv(value: f64, floor: f64) -> f64 {
    let y = (value - floor).max(1e-12);
    if y > 30.0 {
        y
    } else {
        y.exp_m1().ln()
    }
}

pub(crate) fn pos_floored_scoped<S: Scope>(s: &mut S, raw: S::V, floor: f64) -> S::V {
    let sp = s.softplus(raw);
    s.add_c(sp, floor)
}

/// Model family tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    GaussianLs,
    PwlLs,
    Plda,
}

impl Family {
    pub fn tag(&self) -> &'static str {
        match self {
            Family::GaussianLs => "gaussian-ls",
            Family::PwlLs => "pwl-ls",
            Family::Plda => "plda",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Family> {
        match tag {
            "gaussian-ls" => Ok(Family::GaussianLs),
            "pwl-ls" => Ok(Family::PwlLs),
            "plda" => Ok(Family::Plda),
            other => Err(Error::Invalid(format!("unknown model family {other:?}"))),
        }
    }
}

/// Impostor selection mode. Hard selection picks the argmax similarity
/// (ties to the lowest index); soft selection mixes candidates with
/// softmax weights so gradients flow through the choice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Selection {
    Hard,
    Soft { beta: f64 },
}

/// Structural description of one model: which family, its dimensions and
/// the piecewise-linear grids. Templates carry initialization values in
/// their raw offsets; live parameters come from the flat raw vector.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub family: Family,
    /// Latent dimension (PLDA only).
    pub dim: usize,
    /// Learnable base quantile template (pwl-ls only).
    pub quantile: Option<MonotonePwl>,
    /// Score warp template, identity-initialized.
    pub warp: Option<MonotonePwl>,
}

impl ModelSpec {
    pub fn gaussian_ls(warp: Option<MonotonePwl>) -> Self {
        ModelSpec {
            family: Family::GaussianLs,
            dim: 0,
            quantile: None,
            warp,
        }
    }

    pub fn pwl_ls(quantile_segments: usize, warp: Option<MonotonePwl>) -> Result<Self> {
        Ok(ModelSpec {
            family: Family::PwlLs,
            dim: 0,
            quantile: Some(MonotonePwl::standard_normal_quantile(quantile_segments)?),
            warp,
        })
    }

    pub fn plda(dim: usize, warp: Option<MonotonePwl>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid("PLDA dimension must be >= 1".into()));
        }
        Ok(ModelSpec {
            family: Family::Plda,
            dim,
            quantile: None,
            warp,
        })
    }

    /// Score warp spanning the empirical range extended by 10%.
    pub fn warp_for_range(score_min: f64, score_max: f64, segments: usize) -> Result<MonotonePwl> {
        let span = (score_max - score_min).max(1e-6);
        let lo = score_min - 0.1 * span;
        let hi = score_max + 0.1 * span;
        MonotonePwl::identity(lo, hi, segments)
    }

    fn core_len(&self) -> usize {
        match self.family {
            Family::GaussianLs | Family::PwlLs => 5,
            Family::Plda => self.dim,
        }
    }

    pub fn param_len(&self) -> usize {
        self.core_len()
            + self.quantile.as_ref().map_or(0, MonotonePwl::n_knots)
            + self.warp.as_ref().map_or(0, MonotonePwl::n_knots)
    }

    /// Named, non-overlapping slices covering the raw vector exactly.
    pub fn segments(&self) -> Vec<(&'static str, std::ops::Range<usize>)> {
        let mut out = Vec::new();
        let mut at = 0;
        match self.family {
            Family::GaussianLs | Family::PwlLs => {
                out.push(("hyper_mean", at..at + 2));
                at += 2;
                out.push(("hyper_chol", at..at + 3));
                at += 3;
            }
            Family::Plda => {
                out.push(("within_var", at..at + self.dim));
                at += self.dim;
            }
        }
        if let Some(q) = &self.quantile {
            out.push(("quantile", at..at + q.n_knots()));
            at += q.n_knots();
        }
        if let Some(w) = &self.warp {
            out.push(("warp", at..at + w.n_knots()));
            at += w.n_knots();
        }
        debug_assert_eq!(at, self.param_len());
        out
    }

    /// Initial raw vector: template values for the piecewise-linear parts
    /// and the core values packed from the realized model.
    pub fn initial_params(&self, core: &CoreInit) -> Result<Vec<f64>> {
        let mut raw = Vec::with_capacity(self.param_len());
        match (self.family, core) {
            (Family::GaussianLs | Family::PwlLs, CoreInit::LocScale { mean, chol }) => {
                raw.extend_from_slice(mean);
                raw.push(pos_floored_inv(chol[0], CHOL_FLOOR));
                raw.push(chol[1]);
                raw.push(pos_floored_inv(chol[2], CHOL_FLOOR));
            }
            (Family::Plda, CoreInit::Plda { d }) => {
                if d.len() != self.dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.dim,
                        got: d.len(),
                    });
                }
                raw.extend(d.iter().map(|&v| pos_floored_inv(v, WITHIN_VAR_FLOOR)));
            }
            _ => {
                return Err(Error::Invalid(
                    "core initialization does not match the model family".into(),
                ))
            }
        }
        if let Some(q) = &self.quantile {
            raw.extend_from_slice(q.raw_offsets());
        }
        if let Some(w) = &self.warp {
            raw.extend_from_slice(w.raw_offsets());
        }
        Ok(raw)
    }

    /// Builds a scope view over bound raw parameters (training path).
    pub fn view<'a, S: Scope>(&'a self, s: &mut S, raw: &[S::V]) -> ModelView<'a, S::V> {
        assert_eq!(raw.len(), self.param_len(), "raw vector length mismatch");
        let core = self.core_len();
        let mut at = core;
        let quantile_ys = self.quantile.as_ref().map(|q| {
            let ys = q.realize(s, &raw[at..at + q.n_knots()]);
            at += q.n_knots();
            ys
        });
        let warp = self.warp.as_ref().map(|w| {
            let ys = w.realize(s, &raw[at..at + w.n_knots()]);
            PwlRef { shape: w, ys }
        });
        match self.family {
            Family::GaussianLs | Family::PwlLs => {
                let base = match (&self.quantile, quantile_ys) {
                    (Some(q), Some(ys)) => BaseView::Quantile(PwlRef { shape: q, ys }),
                    _ => BaseView::Gaussian,
                };
                ModelView::LocScale(LocScaleView {
                    mean_mu: raw[0],
                    mean_log_sigma: raw[1],
                    l11: pos_floored_scoped(s, raw[2], CHOL_FLOOR),
                    l21: raw[3],
                    l22: pos_floored_scoped(s, raw[4], CHOL_FLOOR),
                    base,
                    warp,
                })
            }
            Family::Plda => {
                let d: Vec<S::V> = raw[..core]
                    .iter()
                    .map(|&r| pos_floored_scoped(s, r, WITHIN_VAR_FLOOR))
                    .collect();
                ModelView::Plda(PldaView::from_variances(s, d, warp))
            }
        }
    }

    /// Realizes plain-`f64` model parameters from a raw vector.
    pub fn realized(&self, raw: &[f64]) -> Result<RealizedModel> {
        if raw.len() != self.param_len() {
            return Err(Error::StructureMismatch(format!(
                "raw vector has length {}, structure requires {}",
                raw.len(),
                self.param_len()
            )));
        }
        let core = self.core_len();
        let mut at = core;
        let quantile = match &self.quantile {
            Some(q) => {
                let pwl = MonotonePwl::new(
                    PwlDomain::UnitInterval,
                    q.knot_inputs().to_vec(),
                    raw[at..at + q.n_knots()].to_vec(),
                )?;
                at += q.n_knots();
                Some(pwl)
            }
            None => None,
        };
        let warp = match &self.warp {
            Some(w) => Some(MonotonePwl::new(
                PwlDomain::RealLine,
                w.knot_inputs().to_vec(),
                raw[at..at + w.n_knots()].to_vec(),
            )?),
            None => None,
        };
        match self.family {
            Family::GaussianLs | Family::PwlLs => Ok(RealizedModel::LocScale(LocScaleParams {
                hyper_mean: [raw[0], raw[1]],
                hyper_chol: [
                    pos_floored(raw[2], CHOL_FLOOR),
                    raw[3],
                    pos_floored(raw[4], CHOL_FLOOR),
                ],
                base: match quantile {
                    Some(q) => ScoreBase::Quantile(q),
                    None => ScoreBase::Gaussian,
                },
                warp,
            })),
            Family::Plda => Ok(RealizedModel::Plda(PldaScoreParams::new(
                raw[..core]
                    .iter()
                    .map(|&r| pos_floored(r, WITHIN_VAR_FLOOR))
                    .collect(),
                warp,
            )?)),
        }
    }
}

/// Family-specific core initialization values (realized scale).
#[derive(Debug, Clone)]
pub enum CoreInit {
    LocScale {
        /// mean of `(mu, log sigma)`
        mean: [f64; 2],
        /// lower-triangular Cholesky `[l11, l21, l22]`
        chol: [f64; 3],
    },
    Plda {
        d: Vec<f64>,
    },
}

/// A realized (plain `f64`) model of either family.
#[derive(Debug, Clone)]
pub enum RealizedModel {
    LocScale(LocScaleParams),
    Plda(PldaScoreParams),
}

/// Scope view of either family.
pub enum ModelView<'a, V> {
    LocScale(LocScaleView<'a, V>),
    Plda(PldaView<'a, V>),
}

/// Fixed noise for one worst-case trial of a location-scale model.
#[derive(Debug, Clone)]
pub struct LsTrialNoise {
    /// `(eps1, eps2)` standard-normal pair per candidate impostor.
    pub pair_eps: Vec<[f64; 2]>,
    /// Uniform draws in `(U_CLAMP, 1-U_CLAMP)`, one per emitted score.
    pub u: Vec<f64>,
}

impl LsTrialNoise {
    pub fn generate(n: usize, l: usize, rng: &mut impl Rng) -> Self {
        let pair_eps = (0..n)
            .map(|_| [rng.sample(StandardNormal), rng.sample(StandardNormal)])
            .collect();
        let u = (0..l)
            .map(|_| rng.gen::<f64>().clamp(U_CLAMP, 1.0 - U_CLAMP))
            .collect();
        LsTrialNoise { pair_eps, u }
    }
}

/// Fixed noise for one worst-case trial of the PLDA model.
#[derive(Debug, Clone)]
pub struct PldaTrialNoise {
    /// Target latent, length `dim`.
    pub y_target: Vec<f64>,
    /// Impostor latents, length `n * dim`, row-major per impostor.
    pub y_impostors: Vec<f64>,
    /// Enrollment residual draws, length `l * dim`.
    pub eps_enroll: Vec<f64>,
    /// Test residual draws, length `l * dim`.
    pub eps_test: Vec<f64>,
}

impl PldaTrialNoise {
    pub fn generate(dim: usize, n: usize, l: usize, rng: &mut impl Rng) -> Self {
        let mut normals = |count: usize| -> Vec<f64> {
            (0..count).map(|_| rng.sample(StandardNormal)).collect()
        };
        PldaTrialNoise {
            y_target: normals(dim),
            y_impostors: normals(n * dim),
            eps_enroll: normals(l * dim),
            eps_test: normals(l * dim),
        }
    }
}

/// Fixed noise for one trial of either family.
#[derive(Debug, Clone)]
pub enum TrialNoise {
    Ls(LsTrialNoise),
    Plda(PldaTrialNoise),
}

/// All noise for one `(N, tau)` query: `T` trials, each with its own
/// derived stream so trial order and thread count cannot matter.
#[derive(Debug, Clone)]
pub struct QueryNoise {
    pub trials: Vec<TrialNoise>,
}

impl QueryNoise {
    pub fn generate(
        family: Family,
        dim: usize,
        trials: usize,
        n: usize,
        l: usize,
        seed: u64,
        tag_prefix: &[u64],
    ) -> Self {
        let make = |trial: usize| {
            let mut tags = tag_prefix.to_vec();
            tags.push(trial as u64);
            let mut rng = stream(seed, &tags);
            match family {
                Family::GaussianLs | Family::PwlLs => {
                    TrialNoise::Ls(LsTrialNoise::generate(n, l, &mut rng))
                }
                Family::Plda => TrialNoise::Plda(PldaTrialNoise::generate(dim, n, l, &mut rng)),
            }
        };
        QueryNoise {
            trials: (0..trials).map(make).collect(),
        }
    }
}
