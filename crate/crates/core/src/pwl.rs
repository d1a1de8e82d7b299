//! Learnable monotone non-decreasing piecewise-linear functions.
//!
//! Used in two roles: as a base-distribution quantile on the unit interval
//! (inverse transform sampling through learnable knot values) and as a
//! score warp on the real line. Knot abscissae are a fixed grid; only the
//! knot values are learned, parameterized so the realized function is
//! strictly increasing for every raw vector: the first raw entry is the
//! value at the left knot and each further entry maps through a floored
//! softplus to a positive value increment.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::autodiff::Scope;
use crate::error::{Error, Result};

/// Floor added to softplus so no segment is numerically flat.
pub const INCREMENT_FLOOR: f64 = 1e-6;

fn pos(raw: f64) -> f64 {
    raw.max(0.0) + (-raw.abs()).exp().ln_1p() + INCREMENT_FLOOR
}

fn pos_inv(increment: f64) -> f64 {
    // inverse softplus of the part above the floor
    let y = (increment - INCREMENT_FLOOR).max(1e-12);
    if y > 30.0 {
        y
    } else {
        y.exp_m1().ln()
    }
}

/// Standard normal quantile (inverse CDF).
pub(crate) fn std_normal_quantile(p: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).unwrap();
    n.inverse_cdf(p.clamp(1e-16, 1.0 - 1e-16))
}

/// Input domain of a [`MonotonePwl`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PwlDomain {
    /// Quantile use: evaluated only on (0,1); inversion clamps to the grid.
    UnitInterval,
    /// Warp use: linear extrapolation with the boundary slopes outside the grid.
    RealLine,
}

/// Monotone non-decreasing piecewise-linear function on a fixed knot grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonotonePwl {
    domain: PwlDomain,
    knot_inputs: Vec<f64>,
    raw_offsets: Vec<f64>,
}

impl MonotonePwl {
    pub fn new(domain: PwlDomain, knot_inputs: Vec<f64>, raw_offsets: Vec<f64>) -> Result<Self> {
        if knot_inputs.len() < 2 {
            return Err(Error::Invalid("need at least two knots".into()));
        }
        if !knot_inputs.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Invalid(
                "knot inputs must be strictly increasing".into(),
            ));
        }
        if raw_offsets.len() != knot_inputs.len() {
            return Err(Error::DimensionMismatch {
                expected: knot_inputs.len(),
                got: raw_offsets.len(),
            });
        }
        Ok(MonotonePwl {
            domain,
            knot_inputs,
            raw_offsets,
        })
    }

    /// Identity function sampled on an even grid over `[lo, hi]`.
    pub fn identity(lo: f64, hi: f64, segments: usize) -> Result<Self> {
        // NaN bounds must fail too, so compare through partial_cmp
        if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) || segments == 0 {
            return Err(Error::Invalid("need lo < hi and segments >= 1".into()));
        }
        let knots = linspace(lo, hi, segments + 1);
        Self::from_values(PwlDomain::RealLine, knots.clone(), knots)
    }

    /// Standard normal quantile sampled on an even grid over `[0, 1]`
    /// (endpoints clamped away from 0 and 1).
    pub fn standard_normal_quantile(segments: usize) -> Result<Self> {
        if segments == 0 {
            return Err(Error::Invalid("segments must be >= 1".into()));
        }
        let knots = linspace(0.0, 1.0, segments + 1);
        let values: Vec<f64> = knots
            .iter()
            .map(|&u| std_normal_quantile(u.clamp(1e-6, 1.0 - 1e-6)))
            .collect();
        Self::from_values(PwlDomain::UnitInterval, knots, values)
    }

    /// Builds the raw parametrization that realizes the given knot values.
    pub fn from_values(domain: PwlDomain, knot_inputs: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != knot_inputs.len() {
            return Err(Error::DimensionMismatch {
                expected: knot_inputs.len(),
                got: values.len(),
            });
        }
        let mut raw = Vec::with_capacity(values.len());
        raw.push(values[0]);
        for w in values.windows(2) {
            let inc = w[1] - w[0];
            if inc <= 0.0 {
                return Err(Error::Invalid(
                    "knot values must be strictly increasing".into(),
                ));
            }
            raw.push(pos_inv(inc));
        }
        Self::new(domain, knot_inputs, raw)
    }

    pub fn domain(&self) -> PwlDomain {
        self.domain
    }

    pub fn knot_inputs(&self) -> &[f64] {
        &self.knot_inputs
    }

    pub fn raw_offsets(&self) -> &[f64] {
        &self.raw_offsets
    }

    pub fn n_knots(&self) -> usize {
        self.knot_inputs.len()
    }

    /// Realizes knot values from an arbitrary raw vector of matching length.
    pub fn constrain(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.knot_inputs.len() {
            return Err(Error::DimensionMismatch {
                expected: self.knot_inputs.len(),
                got: raw.len(),
            });
        }
        let mut ys = Vec::with_capacity(raw.len());
        ys.push(raw[0]);
        for &r in &raw[1..] {
            let prev = *ys.last().unwrap();
            ys.push(prev + pos(r));
        }
        Ok(ys)
    }

    /// Realized knot values of this function's own raw parameters.
    pub fn knot_values(&self) -> Vec<f64> {
        self.constrain(&self.raw_offsets).unwrap()
    }

    /// Scope-generic realization, for tape-recorded knot values.
    pub fn realize<S: Scope>(&self, s: &mut S, raw: &[S::V]) -> Vec<S::V> {
        debug_assert_eq!(raw.len(), self.knot_inputs.len());
        let mut ys = Vec::with_capacity(raw.len());
        ys.push(raw[0]);
        for &r in &raw[1..] {
            let sp = s.softplus(r);
            let inc = s.add_c(sp, INCREMENT_FLOOR);
            let prev = *ys.last().unwrap();
            ys.push(s.add(prev, inc));
        }
        ys
    }

    /// Segment index whose span covers `x` (boundary segments cover the
    /// outside on the real line).
    fn segment(&self, x: f64) -> usize {
        let k = self.knot_inputs.partition_point(|&k| k <= x);
        k.saturating_sub(1).min(self.knot_inputs.len() - 2)
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if self.domain == PwlDomain::UnitInterval && !(x > 0.0 && x < 1.0) {
            return Err(Error::Invalid(format!(
                "quantile input {x} outside (0,1)"
            )));
        }
        let ys = self.knot_values();
        Ok(self.eval_with(&ys, x))
    }

    /// Evaluation against precomputed knot values (hot path).
    pub fn eval_with(&self, ys: &[f64], x: f64) -> f64 {
        let k = self.segment(x);
        let (x0, x1) = (self.knot_inputs[k], self.knot_inputs[k + 1]);
        let t = (x - x0) / (x1 - x0);
        ys[k] + (ys[k + 1] - ys[k]) * t
    }

    /// Scope evaluation at a fixed abscissa (quantile at a noise draw).
    pub fn eval_at<S: Scope>(&self, s: &mut S, ys: &[S::V], x: f64) -> S::V {
        let k = self.segment(x);
        let (x0, x1) = (self.knot_inputs[k], self.knot_inputs[k + 1]);
        let t = (x - x0) / (x1 - x0);
        let diff = s.sub(ys[k + 1], ys[k]);
        s.mul_add_c(diff, t, ys[k])
    }

    /// Scope evaluation of a scope value (warping a generated score).
    /// Piecewise-smooth: the segment is chosen by the current value.
    pub fn eval_of<S: Scope>(&self, s: &mut S, ys: &[S::V], x: S::V) -> S::V {
        let k = self.segment(s.value(x));
        let (x0, x1) = (self.knot_inputs[k], self.knot_inputs[k + 1]);
        let inv_dx = 1.0 / (x1 - x0);
        let shifted = s.add_c(x, -x0);
        let t = s.mul_c(shifted, inv_dx);
        let diff = s.sub(ys[k + 1], ys[k]);
        let term = s.mul(diff, t);
        s.add(ys[k], term)
    }

    /// Preimage of `y`. Positive realized slopes make the function strictly
    /// increasing, so the preimage is unique; on the real line values beyond
    /// the knot range invert the boundary extrapolation, on the unit
    /// interval the result clamps to the grid.
    pub fn inverse(&self, y: f64) -> f64 {
        let ys = self.knot_values();
        let k = ys.partition_point(|&v| v <= y);
        let k = k.saturating_sub(1).min(self.knot_inputs.len() - 2);
        let (x0, x1) = (self.knot_inputs[k], self.knot_inputs[k + 1]);
        let slope = (ys[k + 1] - ys[k]) / (x1 - x0);
        let x = x0 + (y - ys[k]) / slope;
        match self.domain {
            PwlDomain::RealLine => x,
            PwlDomain::UnitInterval => x.clamp(
                self.knot_inputs[0],
                *self.knot_inputs.last().unwrap(),
            ),
        }
    }
}

/// A piecewise-linear shape paired with live (possibly tape-recorded)
/// knot values, ready for evaluation in some scope.
pub struct PwlRef<'a, V> {
    pub shape: &'a MonotonePwl,
    pub ys: Vec<V>,
}

impl<'a, V: Copy> PwlRef<'a, V> {
    pub fn eval_at<S: Scope<V = V>>(&self, s: &mut S, x: f64) -> V {
        self.shape.eval_at(s, &self.ys, x)
    }

    pub fn eval_of<S: Scope<V = V>>(&self, s: &mut S, x: V) -> V {
        self.shape.eval_of(s, &self.ys, x)
    }
}

pub(crate) fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{finite_difference_check, Node, Tape, TapeScope};
    use rand::Rng;

    fn ramp() -> MonotonePwl {
        MonotonePwl::from_values(
            PwlDomain::RealLine,
            vec![0.0, 0.5, 1.0],
            vec![-1.0, 0.0, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn linear_interpolation_between_knots() {
        let f = ramp();
        assert!((f.eval(0.25).unwrap() - (-0.5)).abs() < 1e-12);
        assert!((f.eval(0.5).unwrap() - 0.0).abs() < 1e-12);
        assert!((f.eval(1.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_initialization_is_identity() {
        let f = MonotonePwl::identity(-2.0, 3.0, 16).unwrap();
        for x in [-2.0, -1.3, 0.0, 0.77, 2.9, 3.0] {
            assert!((f.eval(x).unwrap() - x).abs() < 1e-9, "at {x}");
        }
        // extrapolation keeps the identity slopes
        assert!((f.eval(-5.0).unwrap() + 5.0).abs() < 1e-9);
        assert!((f.eval(10.0).unwrap() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn inverse_matches_hand_solved_point() {
        let f = ramp();
        assert!((f.inverse(-0.5) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn inverse_roundtrip_within_1e10() {
        let f = ramp();
        let mut rng = crate::rng::stream(4, &[0]);
        for _ in 0..200 {
            let x = rng.gen_range(0.0..1.0);
            let y = f.eval_with(&f.knot_values(), x);
            assert!((f.inverse(y) - x).abs() < 1e-10);
        }
    }

    #[test]
    fn inverse_extrapolates_on_boundary_slope() {
        // beyond the last knot the slope is (1-0)/(1-0.5) = 2,
        // so y = 3 solves 1 + 2*(x-1) = 3 at x = 2
        let f = ramp();
        assert!((f.inverse(3.0) - 2.0).abs() < 1e-12);
        // before the first knot the slope is 2 as well: y=-3 at x=-1
        assert!((f.inverse(-3.0) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn quantile_clamps_inverse_to_grid() {
        let q = MonotonePwl::standard_normal_quantile(8).unwrap();
        assert_eq!(q.inverse(-100.0), 0.0);
        assert_eq!(q.inverse(100.0), 1.0);
        // median of the standard normal is zero
        assert!(q.eval(0.5).unwrap().abs() < 1e-9);
    }

    #[test]
    fn constrain_realizes_strict_increase() {
        let f = ramp();
        let mut rng = crate::rng::stream(5, &[1]);
        for _ in 0..100 {
            let raw: Vec<f64> = (0..3).map(|_| rng.gen_range(-20.0..20.0)).collect();
            let ys = f.constrain(&raw).unwrap();
            assert!(ys.windows(2).all(|w| w[1] > w[0]), "{ys:?}");
        }
    }

    #[test]
    fn constant_raw_gives_uniform_increments() {
        let f = MonotonePwl::new(
            PwlDomain::RealLine,
            vec![0.0, 1.0, 2.0, 3.0],
            vec![0.5, 0.3, 0.3, 0.3],
        )
        .unwrap();
        let ys = f.knot_values();
        let incs: Vec<f64> = ys.windows(2).map(|w| w[1] - w[0]).collect();
        for w in incs.windows(2) {
            assert!((w[0] - w[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn shifting_base_raw_translates_all_values() {
        let f = ramp();
        let mut raw = f.raw_offsets().to_vec();
        let before = f.constrain(&raw).unwrap();
        raw[0] += 2.5;
        let after = f.constrain(&raw).unwrap();
        for (b, a) in before.iter().zip(&after) {
            assert!((a - b - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn length_mismatch_rejected() {
        let f = ramp();
        assert!(f.constrain(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn eval_gradients_match_finite_differences() {
        // objective: f(raw) = pwl(0.31) + 2 * pwl(0.83), away from knots
        let shape = ramp();
        let obj = move |t: &mut Tape, p: &[Node]| {
            let mut s = TapeScope(t);
            let ys = shape.realize(&mut s, p);
            let a = shape.eval_at(&mut s, &ys, 0.31);
            let b = shape.eval_at(&mut s, &ys, 0.83);
            s.mul_add_c(b, 2.0, a)
        };
        let report =
            finite_difference_check(&obj, &[-1.0, 0.2, -0.4], 1e-6, 1e-5).unwrap();
        assert!(report.passing, "max rel err {}", report.max_rel_err);
    }

    #[test]
    fn warped_value_gradients_match_finite_differences() {
        // raw params feed both the warp shape and (via an affine map) its input
        let shape = MonotonePwl::identity(-2.0, 2.0, 4).unwrap();
        let obj = move |t: &mut Tape, p: &[Node]| {
            let mut s = TapeScope(t);
            let ys = shape.realize(&mut s, &p[..5]);
            let x = s.mul_add_c(p[5], 0.7, p[6]);
            shape.eval_of(&mut s, &ys, x)
        };
        let params = [-2.0, 0.4, 0.4, 0.4, 0.4, 0.3, -0.2];
        let report = finite_difference_check(&obj, &params, 1e-6, 1e-5).unwrap();
        assert!(report.passing, "max rel err {}", report.max_rel_err);
    }

    #[test]
    fn unit_interval_domain_enforced() {
        let q = MonotonePwl::standard_normal_quantile(4).unwrap();
        assert!(q.eval(0.0).is_err());
        assert!(q.eval(1.0).is_err());
        assert!(q.eval(0.5).is_ok());
    }
}
