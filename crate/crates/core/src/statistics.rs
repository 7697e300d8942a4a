//! Level-set measures, non-increasing rearrangements, trimmed integrals,
//! moments and `L^p` norms on quadrature grids.
//!
//! All quantities are computed from node values and weights. The measure of
//! the domain is the total grid weight, so `λ★(s) <= Σ w` holds exactly.

use crate::error::{invalid, Error, Result};
use crate::geometry::QuadratureGrid;
use crate::potential::PotentialField;

/// Node values of a field together with the grid weights.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    values: Vec<f64>,
    weights: Vec<f64>,
}

/// `λ★(s)` tabulated at increasing thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetProfile {
    pub thresholds: Vec<f64>,
    pub measures: Vec<f64>,
    pub domain_measure: f64,
}

/// Expectation and deviation under the normalized measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSummary {
    pub expectation: f64,
    pub deviation: f64,
    pub second_moment: f64,
}

impl FieldSample {
    pub fn new(v: &PotentialField, grid: &QuadratureGrid) -> Self {
        Self { values: grid.sample(|x| v.eval(x)), weights: grid.weights().to_vec() }
    }

    pub fn from_values(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.len() != weights.len() || values.is_empty() {
            return Err(invalid("values and weights must be nonempty and of equal length"));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(invalid("weights must be positive"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("field values must be finite"));
        }
        Ok(Self { values, weights })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Total weight, the discrete measure of the domain.
    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// `λ★(s) = Σ { w_i : v_i >= s }`.
    pub fn level_measure(&self, s: f64) -> f64 {
        self.values.iter().zip(&self.weights).filter(|(v, _)| **v >= s).fold(0.0, |acc, (_, w)| acc + w)
    }

    pub fn level_profile(&self, thresholds: &[f64]) -> LevelSetProfile {
        let sorted = self.sorted();
        let mut thresholds = thresholds.to_vec();
        thresholds.sort_by(f64::total_cmp);
        let measures = thresholds.iter().map(|&s| sorted.level_measure(s)).collect();
        LevelSetProfile { thresholds, measures, domain_measure: sorted.total }
    }

    /// Values in non-increasing order with cumulative weights, for repeated
    /// rearrangement queries.
    pub fn sorted(&self) -> SortedSample {
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        idx.sort_by(|&a, &b| self.values[b].total_cmp(&self.values[a]).then(a.cmp(&b)));
        let values: Vec<f64> = idx.iter().map(|&i| self.values[i]).collect();
        let mut cumulative = Vec::with_capacity(idx.len());
        let mut acc = 0.0;
        for &i in &idx {
            acc += self.weights[i];
            cumulative.push(acc);
        }
        let weights = idx.iter().map(|&i| self.weights[i]).collect();
        SortedSample { values, weights, cumulative, total: acc }
    }

    /// `W★(t) = sup{s > 0 : λ★(s) >= t}`, zero when the set is empty.
    pub fn rearrangement(&self, t: f64) -> Result<f64> {
        self.sorted().rearrangement(t)
    }

    /// `∫V` minus the integral of `V` over its highest-value set of measure
    /// `δ`. Requires `V >= 0`.
    pub fn trimmed_integral(&self, delta: f64) -> Result<f64> {
        let min = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        if min < 0.0 {
            return Err(Error::NegativeValues { min });
        }
        self.sorted().trimmed(delta, false)
    }

    /// Variant for signed fields: removes only the positive mass of the top
    /// set, which is the infimum over sets of measure at most `δ`.
    pub fn trimmed_integral_signed(&self, delta: f64) -> Result<f64> {
        self.sorted().trimmed(delta, true)
    }

    pub fn moments(&self) -> MomentSummary {
        let total = self.measure();
        let e = self.integral() / total;
        let e2 = self.values.iter().zip(&self.weights).map(|(v, w)| v * v * w).sum::<f64>() / total;
        // Centered form avoids cancellation when the deviation is small.
        let var = self.values.iter().zip(&self.weights).map(|(v, w)| (v - e) * (v - e) * w).sum::<f64>() / total;
        MomentSummary { expectation: e, deviation: var.max(0.0).sqrt(), second_moment: e2 }
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0) {
            return Err(invalid(format!("L^p norm needs p >= 1, got {p}")));
        }
        if p.is_infinite() {
            return Ok(self.values.iter().fold(0.0, |m, v| m.max(v.abs())));
        }
        let s: f64 = self.values.iter().zip(&self.weights).map(|(v, w)| v.abs().powf(p) * w).sum();
        Ok(s.powf(1.0 / p))
    }
}

/// Sorted view of a [`FieldSample`].
#[derive(Debug, Clone)]
pub struct SortedSample {
    values: Vec<f64>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
    total: f64,
}

impl SortedSample {
    pub fn measure(&self) -> f64 {
        self.total
    }

    pub fn max(&self) -> f64 {
        self.values[0]
    }

    pub fn min(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn level_measure(&self, s: f64) -> f64 {
        let k = self.values.partition_point(|&v| v >= s);
        if k == 0 {
            0.0
        } else {
            self.cumulative[k - 1]
        }
    }

    /// Bisection on `s` against [`SortedSample::level_measure`], bracketed
    /// by `[max(0, min V), max V]`, to relative tolerance `1e-6`. The grid
    /// field is a step function, so the result is then snapped to the node
    /// value inside the final bracket, which is the exact discrete answer.
    pub fn rearrangement(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(invalid(format!("rearrangement needs t > 0, got {t}")));
        }
        if t > self.total * (1.0 + 1e-12) {
            return Err(Error::OutOfRange { t, measure: self.total });
        }
        let t = t.min(self.total);
        let mut hi = self.max();
        if hi <= 0.0 {
            return Ok(0.0);
        }
        if self.level_measure(hi) >= t {
            return Ok(hi);
        }
        let mut lo = self.min().max(0.0);
        if lo > 0.0 && self.level_measure(lo) < t {
            return Ok(0.0);
        }
        // Invariant: λ★(lo) >= t (or lo = 0), λ★(hi) < t.
        // Stops after 200 halvings when the answer is 0 and hi shrinks to 0.
        let mut iterations = 0;
        while hi - lo > 1e-6 * hi && iterations < 200 {
            iterations += 1;
            let mid = 0.5 * (lo + hi);
            if self.level_measure(mid) >= t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let k = self.cumulative.partition_point(|&c| c < t).min(self.values.len() - 1);
        let exact = self.values[k];
        Ok(if exact >= lo && exact <= hi && exact > 0.0 { exact } else { lo })
    }

    fn trimmed(&self, delta: f64, positive_only: bool) -> Result<f64> {
        if !(delta >= 0.0) {
            return Err(invalid(format!("trim measure must be nonnegative, got {delta}")));
        }
        if delta > self.total * (1.0 + 1e-12) {
            return Err(Error::OutOfRange { t: delta, measure: self.total });
        }
        let total: f64 = self.values.iter().zip(&self.weights).map(|(v, w)| v * w).sum();
        let mut left = delta;
        let mut removed = 0.0;
        for (v, w) in self.values.iter().zip(&self.weights) {
            if left <= 0.0 || (positive_only && *v <= 0.0) {
                break;
            }
            let take = w.min(left);
            removed += v * take;
            left -= take;
        }
        Ok(total - removed)
    }
}

/// `λ★(s, V, Ω)` on the grid.
pub fn level_measure(v: &PotentialField, s: f64, grid: &QuadratureGrid) -> f64 {
    FieldSample::new(v, grid).level_measure(s)
}

/// `V★(t, Ω)` on the grid.
pub fn rearrangement(v: &PotentialField, t: f64, grid: &QuadratureGrid) -> Result<f64> {
    FieldSample::new(v, grid).rearrangement(t)
}

/// Trimmed integral of a nonnegative field.
pub fn trimmed_integral(v: &PotentialField, delta: f64, grid: &QuadratureGrid) -> Result<f64> {
    FieldSample::new(v, grid).trimmed_integral(delta)
}

pub fn moments(v: &PotentialField, grid: &QuadratureGrid) -> MomentSummary {
    FieldSample::new(v, grid).moments()
}

pub fn lp_norm(v: &PotentialField, p: f64, grid: &QuadratureGrid) -> Result<f64> {
    FieldSample::new(v, grid).lp_norm(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_grid, Ball, Domain};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn unit_ball(h: f64) -> QuadratureGrid {
        make_grid(&Domain::Ball(Ball::centered(3, 1.0).unwrap()), h).unwrap()
    }

    #[test]
    fn constant_field() {
        let g = unit_ball(1.0 / 16.0);
        let v = PotentialField::constant(3, 2.5);
        let s = FieldSample::new(&v, &g);
        assert_eq!(s.level_measure(2.5), s.measure());
        assert_eq!(s.level_measure(2.6), 0.0);
        assert_eq!(s.rearrangement(s.measure()).unwrap(), 2.5);
        assert_eq!(s.rearrangement(0.1).unwrap(), 2.5);
        let m = s.moments();
        assert!((m.expectation - 2.5).abs() < 1e-12 && m.deviation < 1e-12);
        assert!(s.rearrangement(s.measure() * 1.01).is_err());
    }

    #[test]
    fn shell_measure() {
        let g = unit_ball(1.0 / 32.0);
        let v = PotentialField::radial(3, "|x|", |r| r);
        let exact = 4.0 * PI / 3.0 * (1.0 - 0.125);
        assert!((level_measure(&v, 0.5, &g) - exact).abs() < 0.03 * exact);
    }

    #[test]
    fn two_level_field() {
        let weights = vec![0.25; 8];
        let values = vec![3.0, 3.0, 3.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let s = FieldSample::from_values(values, weights).unwrap();
        assert_eq!(s.rearrangement(0.5).unwrap(), 3.0);
        assert_eq!(s.rearrangement(1.0).unwrap(), 0.0);
        assert_eq!(s.trimmed_integral(0.0).unwrap(), 2.25);
        assert_eq!(s.trimmed_integral(0.5).unwrap(), 3.0 * (0.75 - 0.5));
        assert_eq!(s.trimmed_integral(2.0).unwrap(), 0.0);
    }

    #[test]
    fn plus_minus_moments() {
        let s = FieldSample::from_values(vec![1.0, -1.0, 1.0, -1.0], vec![0.5; 4]).unwrap();
        let m = s.moments();
        assert!(m.expectation.abs() < 1e-15 && (m.deviation - 1.0).abs() < 1e-15);
        assert!(s.trimmed_integral(0.1).is_err());
        assert_eq!(s.trimmed_integral_signed(0.5).unwrap(), -0.5);
        assert_eq!(s.trimmed_integral_signed(2.0).unwrap(), -1.0);
    }

    #[test]
    fn lp_of_constant() {
        let g = unit_ball(1.0 / 16.0);
        let v = PotentialField::constant(3, 1.0);
        let n = lp_norm(&v, 1.5, &g).unwrap();
        assert!((n - g.total_weight().powf(2.0 / 3.0)).abs() < 1e-12);
        assert!((n - (4.0 * PI / 3.0f64).powf(2.0 / 3.0)).abs() < 0.03);
        assert!(lp_norm(&v, 0.5, &g).is_err());
    }

    fn piecewise_field() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..60).prop_flat_map(|n| (prop::collection::vec(0.0f64..50.0, n), prop::collection::vec(0.01f64..1.0, n)))
    }

    proptest! {
        #[test]
        fn rearrangement_is_nonincreasing((v, w) in piecewise_field(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let s = FieldSample::from_values(v, w).unwrap();
            let m = s.measure();
            let (t1, t2) = (m * a.min(b).max(1e-9), m * a.max(b).max(1e-9));
            prop_assert!(s.rearrangement(t1).unwrap() >= s.rearrangement(t2).unwrap());
        }

        #[test]
        fn equimeasurable((v, w) in piecewise_field(), frac in 0.0f64..1.0) {
            let s = FieldSample::from_values(v.clone(), w).unwrap();
            let sorted = s.sorted();
            let level = v[((v.len() - 1) as f64 * frac) as usize];
            // mes{t : V★(t) >= s} estimated on a fine t grid.
            let m = sorted.measure();
            let n = 20_000;
            let dt = m / n as f64;
            let star_measure: f64 = (0..n)
                .filter(|i| sorted.rearrangement((*i as f64 + 0.5) * dt).unwrap() >= level * (1.0 - 2e-6))
                .count() as f64 * dt;
            let lam = s.level_measure(level);
            prop_assert!((star_measure - lam).abs() <= 2.0 * dt + 1e-9 * m, "{} vs {}", star_measure, lam);
        }

        #[test]
        fn layer_cake((v, w) in piecewise_field()) {
            let s = FieldSample::from_values(v, w).unwrap();
            let sorted = s.sorted();
            let m = sorted.measure();
            let n = 4000;
            let dt = m / n as f64;
            let cake: f64 = (0..n).map(|i| sorted.rearrangement((i as f64 + 0.5) * dt).unwrap()).sum::<f64>() * dt;
            let direct = s.integral();
            prop_assert!((cake - direct).abs() <= 0.02 * direct.abs() + 1e-12);
        }

        #[test]
        fn scaling_identities((v, w) in piecewise_field(), alpha in 0.1f64..20.0, frac in 0.01f64..1.0) {
            let s = FieldSample::from_values(v.clone(), w.clone()).unwrap();
            let sa = FieldSample::from_values(v.iter().map(|x| alpha * x).collect(), w).unwrap();
            let t = frac * s.measure();
            let (r, ra) = (s.rearrangement(t).unwrap(), sa.rearrangement(t).unwrap());
            prop_assert!((ra - alpha * r).abs() <= 1e-10 * (alpha * r).abs().max(1e-12));
            let (m, ma) = (s.moments(), sa.moments());
            prop_assert!((ma.expectation - alpha * m.expectation).abs() <= 1e-10 * (1.0 + ma.expectation.abs()));
            prop_assert!((ma.deviation - alpha * m.deviation).abs() <= 1e-10 * (1.0 + ma.deviation.abs()));
        }

        #[test]
        fn trimmed_is_nonincreasing((v, w) in piecewise_field(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let s = FieldSample::from_values(v, w).unwrap();
            let m = s.measure();
            let (d1, d2) = (m * a.min(b), m * a.max(b));
            let (t1, t2) = (s.trimmed_integral(d1).unwrap(), s.trimmed_integral(d2).unwrap());
            prop_assert!(t1 >= t2 - 1e-12 * t1.abs().max(1.0));
            prop_assert!(t1 <= s.integral() + 1e-12 * t1.abs().max(1.0));
        }
    }
}
