//! Worst-case false-alarm (FA) rate estimation and extrapolation for
//! black-box detection systems, working purely in detection score space.
//!
//! Given a table of nontarget scores grouped by ordered speaker pair, this
//! crate estimates the worst-case FA rate `P_FA^N(tau)` — the FA rate when
//! each target is scored against the closest of `N` candidate impostors —
//! and extrapolates it to impostor populations far beyond the observed
//! speakers by fitting implicit generative score models discriminatively
//! against empirical Monte-Carlo estimates.
//!
//! The main pieces:
//!
//! * [`data`] — score ingestion, validation and grouping ([`data::PairScoreTable`]).
//! * [`estimator`] — empirical FA rates, worst-case simulation, bootstrap
//!   confidence intervals and min-DCF thresholds.
//! * [`pwl`] — learnable monotone piecewise-linear functions (quantile
//!   approximators and score warps).
//! * [`autodiff`] / [`optim`] — scalar reverse-mode gradients over a recorded
//!   tape, finite-difference verification and the Adam optimizer.
//! * [`locscale`] — location-scale score generators (Gaussian or learnable
//!   base quantile).
//! * [`plda`] — score-space PLDA generator in its minimal diagonal
//!   parametrization, with closed-form LLR scoring.
//! * [`train`] — discriminative MSE training against empirical targets,
//!   held-out validation and curve extrapolation.
//! * [`synth`] — synthetic ground-truth tables and brute-force reference
//!   curves for end-to-end validation.
//! * [`artifact`] / [`curve`] — versioned model persistence and result
//!   curve output (CSV/JSON/SVG).

pub mod artifact;
pub mod autodiff;
pub mod curve;
pub mod data;
pub mod error;
pub mod estimator;
pub mod locscale;
pub mod model;
pub mod optim;
pub mod plda;
pub mod pwl;
pub mod rng;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
