//! Score-space PLDA generator in its minimal parametrization.
//!
//! An invertible linear transform of the feature space never changes the
//! order of log-likelihood-ratio scores, so a centered two-covariance
//! model is fully described (for scoring purposes) by the identity
//! between-class covariance and a diagonal within-class covariance: `D`
//! nonnegative numbers. Scores are produced by sampling latent speakers,
//! drawing noisy features around them, and evaluating the closed-form
//! two-covariance LLR; the closest impostor is the candidate whose
//! noise-free latent LLR against the target is largest.
//!
//! With `B = I` and `W = diag(d)` the LLR decomposes per dimension as
//! `C_k + A_k (e_k^2 + t_k^2) + B_k e_k t_k` with
//! `A_k = ((1+d_k)^{-1} - (1+d_k)/(d_k(d_k+2)))/2`,
//! `B_k = 1/(d_k(d_k+2))` and
//! `C_k = log((1+d_k)^2 / (d_k(d_k+2)))/2`,
//! which is what's evaluated here on both the hard and the tape path.

use nalgebra::DMatrix;
use rand::Rng;

use crate::autodiff::{softmax, Scope, ValueScope};
use crate::data::ScoreSet;
use crate::error::{Error, Result};
use crate::model::{
    pos_floored_inv, CoreInit, Family, ModelSpec, PldaTrialNoise, Selection, WITHIN_VAR_FLOOR,
};
use crate::pwl::{MonotonePwl, PwlRef};

/// Realized PLDA score-model parameters: diagonal within-class variances
/// (between-class is the identity, center is zero) plus an optional warp.
#[derive(Debug, Clone)]
pub struct PldaScoreParams {
    d: Vec<f64>,
    pub warp: Option<MonotonePwl>,
}

impl PldaScoreParams {
    /// Builds parameters from nonnegative within-class variances; values
    /// are floored at `WITHIN_VAR_FLOOR` to keep the LLR finite.
    pub fn new(d: Vec<f64>, warp: Option<MonotonePwl>) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::Invalid("PLDA needs at least one dimension".into()));
        }
        if d.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::Invalid(
                "within-class variances must be finite and nonnegative".into(),
            ));
        }
        Ok(PldaScoreParams {
            d: d.into_iter().map(|v| v.max(WITHIN_VAR_FLOOR)).collect(),
            warp,
        })
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    pub fn within_variances(&self) -> &[f64] {
        &self.d
    }

    /// Plain-`f64` view for evaluation-time sampling.
    pub fn view(&self) -> PldaView<'_, f64> {
        let mut s = ValueScope;
        let warp = self.warp.as_ref().map(|w| PwlRef {
            shape: w,
            ys: w.realize(&mut s, w.raw_offsets()),
        });
        PldaView::from_variances(&mut s, self.d.clone(), warp)
    }

    /// Structural spec plus flat raw vector equivalent to these parameters.
    pub fn to_spec_and_raw(&self) -> Result<(ModelSpec, Vec<f64>)> {
        let spec = ModelSpec {
            family: Family::Plda,
            dim: self.dim(),
            quantile: None,
            warp: self.warp.clone(),
        };
        let raw = spec.initial_params(&CoreInit::Plda { d: self.d.clone() })?;
        Ok((spec, raw))
    }

    /// Raw (unconstrained) values that realize these variances.
    pub fn raw_d(&self) -> Vec<f64> {
        self.d
            .iter()
            .map(|&v| pos_floored_inv(v, WITHIN_VAR_FLOOR))
            .collect()
    }
}

/// Per-dimension LLR coefficients; see the module docs.
pub struct LlrCoeffs<V> {
    pub a: Vec<V>,
    pub b: Vec<V>,
    pub c_sum: V,
}

pub(crate) fn llr_coeffs<S: Scope>(s: &mut S, d: &[S::V]) -> LlrCoeffs<S::V> {
    let one = s.constant(1.0);
    let mut a = Vec::with_capacity(d.len());
    let mut b = Vec::with_capacity(d.len());
    let mut c_sum: Option<S::V> = None;
    for &dk in d {
        let dp1 = s.add_c(dk, 1.0);
        let dp2 = s.add_c(dk, 2.0);
        let denom = s.mul(dk, dp2);
        let inv_dp1 = s.div(one, dp1);
        let ratio = s.div(dp1, denom);
        let gap = s.sub(inv_dp1, ratio);
        a.push(s.mul_c(gap, 0.5));
        b.push(s.div(one, denom));
        let ln_dp1 = s.ln(dp1);
        let two_ln = s.mul_c(ln_dp1, 2.0);
        let ln_denom = s.ln(denom);
        let diff = s.sub(two_ln, ln_denom);
        let ck = s.mul_c(diff, 0.5);
        c_sum = Some(match c_sum {
            Some(acc) => s.add(acc, ck),
            None => ck,
        });
    }
    LlrCoeffs {
        a,
        b,
        c_sum: c_sum.expect("at least one dimension"),
    }
}

/// LLR of a fixed (non-differentiated) feature pair against live coefficients.
pub(crate) fn llr_apply_const<S: Scope>(
    s: &mut S,
    coeffs: &LlrCoeffs<S::V>,
    e: &[f64],
    t: &[f64],
) -> S::V {
    let mut acc = coeffs.c_sum;
    for k in 0..coeffs.a.len() {
        let sq = e[k] * e[k] + t[k] * t[k];
        acc = s.mul_add_c(coeffs.a[k], sq, acc);
        acc = s.mul_add_c(coeffs.b[k], e[k] * t[k], acc);
    }
    acc
}

/// LLR of a live feature pair.
pub(crate) fn llr_apply<S: Scope>(
    s: &mut S,
    coeffs: &LlrCoeffs<S::V>,
    e: &[S::V],
    t: &[S::V],
) -> S::V {
    let mut acc = coeffs.c_sum;
    for k in 0..coeffs.a.len() {
        let e2 = s.mul(e[k], e[k]);
        let t2 = s.mul(t[k], t[k]);
        let sq = s.add(e2, t2);
        let ta = s.mul(coeffs.a[k], sq);
        acc = s.add(acc, ta);
        let et = s.mul(e[k], t[k]);
        let tb = s.mul(coeffs.b[k], et);
        acc = s.add(acc, tb);
    }
    acc
}

/// Two-covariance log-likelihood-ratio score for a feature pair; symmetric
/// in its arguments and additive over dimensions.
pub fn plda_llr(params: &PldaScoreParams, phi_e: &[f64], phi_t: &[f64]) -> Result<f64> {
    if phi_e.len() != params.dim() || phi_t.len() != params.dim() {
        return Err(Error::DimensionMismatch {
            expected: params.dim(),
            got: phi_e.len().min(phi_t.len()),
        });
    }
    let mut s = ValueScope;
    let coeffs = llr_coeffs(&mut s, params.within_variances());
    Ok(llr_apply_const(&mut s, &coeffs, phi_e, phi_t))
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations: returns the
/// eigenvalues and the orthogonal matrix of eigenvector columns. Jacobi is
/// slower than tridiagonalization but very accurate, and the matrices here
/// are tiny.
fn jacobi_eigen(mut m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let mut vectors = DMatrix::identity(n, n);
    let scale = m.amax().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m[(p, q)] * m[(p, q)];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = vectors[(k, p)];
                    let vkq = vectors[(k, q)];
                    vectors[(k, p)] = c * vkp - s * vkq;
                    vectors[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| m[(i, i)]).collect(), vectors)
}

/// Congruence transform simultaneously diagonalizing two SPD matrices.
///
/// Returns `(A, d)` with `A * B * A^T = I` and `A * W * A^T = diag(d)`,
/// `d` sorted descending.
pub fn simultaneous_diagonalize(b: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let n = b.nrows();
    if !b.is_square() || !w.is_square() || w.nrows() != n {
        return Err(Error::Invalid(
            "matrices must be square and of equal size".into(),
        ));
    }
    let sym_tol = 1e-9 * (1.0 + b.amax().max(w.amax()));
    if (b - b.transpose()).amax() > sym_tol || (w - w.transpose()).amax() > sym_tol {
        return Err(Error::NotSpd);
    }
    let chol = b.clone().cholesky().ok_or(Error::NotSpd)?;
    w.clone().cholesky().ok_or(Error::NotSpd)?;
    let l = chol.l();

    // M = L^-1 W L^-T, forced symmetric against roundoff
    let li_w = l
        .solve_lower_triangular(w)
        .ok_or(Error::NotSpd)?;
    let m = l
        .solve_lower_triangular(&li_w.transpose())
        .ok_or(Error::NotSpd)?;
    let m = (&m + m.transpose()) * 0.5;

    let (eigenvalues, eigenvectors) = jacobi_eigen(m);
    let l_inv = l
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or(Error::NotSpd)?;
    let transform = eigenvectors.transpose() * l_inv;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eigenvalues[j].partial_cmp(&eigenvalues[i]).unwrap());
    let mut sorted = DMatrix::zeros(n, n);
    let mut d = Vec::with_capacity(n);
    for (row, &src) in order.iter().enumerate() {
        sorted.set_row(row, &transform.row(src));
        d.push(eigenvalues[src].max(0.0));
    }
    Ok((sorted, d))
}

/// Softmax-weighted combination of candidate latents; `beta = 0` averages
/// uniformly and large `beta` approaches the argmax candidate.
pub fn soft_select(candidates: &[Vec<f64>], similarities: &[f64], beta: f64) -> Result<Vec<f64>> {
    if candidates.is_empty() || candidates.len() != similarities.len() {
        return Err(Error::DimensionMismatch {
            expected: candidates.len(),
            got: similarities.len(),
        });
    }
    let mut s = ValueScope;
    let args: Vec<f64> = similarities.iter().map(|&x| beta * x).collect();
    let w = softmax(&mut s, &args);
    let dim = candidates[0].len();
    let mut out = vec![0.0; dim];
    for (wj, cand) in w.iter().zip(candidates) {
        if cand.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: cand.len(),
            });
        }
        for k in 0..dim {
            out[k] += wj * cand[k];
        }
    }
    Ok(out)
}

/// Scope view of a PLDA model: live variances, their square roots, the
/// LLR coefficients and the optional warp.
pub struct PldaView<'a, V> {
    pub d: Vec<V>,
    pub sqrt_d: Vec<V>,
    pub coeffs: LlrCoeffs<V>,
    pub warp: Option<PwlRef<'a, V>>,
}

impl<'a, V: Copy + std::fmt::Debug> PldaView<'a, V> {
    pub fn from_variances<S: Scope<V = V>>(
        s: &mut S,
        d: Vec<V>,
        warp: Option<PwlRef<'a, V>>,
    ) -> Self {
        let sqrt_d = d.iter().map(|&v| s.sqrt(v)).collect();
        let coeffs = llr_coeffs(s, &d);
        PldaView {
            d,
            sqrt_d,
            coeffs,
            warp,
        }
    }
}

/// Worst-case score generation shared by the hard (`f64`) and
/// differentiable (tape) paths.
///
/// Candidate similarity is the noise-free latent LLR against the target;
/// selection is a hard argmax (ties to the lowest index) or a softmax
/// mixture of latents. Each emitted score redraws both features around
/// the selected latents, scores them with the closed-form LLR and warps
/// last if a warp is present.
pub fn sample_worst_case_plda<S: Scope>(
    s: &mut S,
    view: &PldaView<'_, S::V>,
    noise: &PldaTrialNoise,
    selection: Selection,
) -> Vec<S::V> {
    let dim = view.d.len();
    let n = noise.y_impostors.len() / dim;
    assert!(n >= 1, "need at least one candidate impostor");
    let y_target = &noise.y_target;

    let impostor = |j: usize| &noise.y_impostors[j * dim..(j + 1) * dim];
    let sims: Vec<S::V> = (0..n)
        .map(|j| llr_apply_const(s, &view.coeffs, y_target, impostor(j)))
        .collect();

    // selected latent: a fixed row under hard selection, a mixture otherwise
    enum Picked<V> {
        Fixed(usize),
        Mixed(Vec<V>),
    }
    let picked = match selection {
        Selection::Hard => {
            let mut k = 0;
            for j in 1..n {
                if s.value(sims[j]) > s.value(sims[k]) {
                    k = j;
                }
            }
            Picked::Fixed(k)
        }
        Selection::Soft { beta } => {
            let args: Vec<S::V> = sims.iter().map(|&x| s.mul_c(x, beta)).collect();
            let w = softmax(s, &args);
            let mut mixed = Vec::with_capacity(dim);
            for k in 0..dim {
                let mut acc = s.mul_c(w[0], impostor(0)[k]);
                for (j, &wj) in w.iter().enumerate().skip(1) {
                    acc = s.mul_add_c(wj, impostor(j)[k], acc);
                }
                mixed.push(acc);
            }
            Picked::Mixed(mixed)
        }
    };

    let l = noise.eps_enroll.len() / dim;
    let mut scores = Vec::with_capacity(l);
    let mut phi_e = Vec::with_capacity(dim);
    let mut phi_t = Vec::with_capacity(dim);
    for ell in 0..l {
        phi_e.clear();
        phi_t.clear();
        for k in 0..dim {
            let ee = noise.eps_enroll[ell * dim + k];
            let scaled = s.mul_c(view.sqrt_d[k], ee);
            phi_e.push(s.add_c(scaled, y_target[k]));

            let et = noise.eps_test[ell * dim + k];
            let scaled_t = s.mul_c(view.sqrt_d[k], et);
            let phi = match &picked {
                Picked::Fixed(j) => s.add_c(scaled_t, impostor(*j)[k]),
                Picked::Mixed(y) => s.add(scaled_t, y[k]),
            };
            phi_t.push(phi);
        }
        let mut score = llr_apply(s, &view.coeffs, &phi_e, &phi_t);
        if let Some(w) = &view.warp {
            score = w.eval_of(s, score);
        }
        scores.push(score);
    }
    scores
}

/// Draws one worst-case score set with `N` candidate impostors and `L`
/// scores.
pub fn plda_sample_worst_case_scores(
    params: &PldaScoreParams,
    n: usize,
    l: usize,
    rng: &mut impl Rng,
    selection: Selection,
) -> Result<ScoreSet> {
    if n == 0 || l == 0 {
        return Err(Error::Invalid("need N >= 1 and L >= 1".into()));
    }
    let noise = PldaTrialNoise::generate(params.dim(), n, l, rng);
    let view = params.view();
    let mut scope = ValueScope;
    let scores = sample_worst_case_plda(&mut scope, &view, &noise, selection);
    ScoreSet::new(scores)
}
