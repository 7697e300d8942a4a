//! Integral-inequality sets behind the Riccati argument: grid measures of
//!
//! `E = {(s, t) ∈ Δ_r : u(t) - u(s) > ∫_s^t u² + λ (t - s)}` and
//! `X = {t ∈ [t0, r] : u(t) >= ∫_{t0}^t u² + λ (t - t0)}`,
//!
//! and the blow-up comparator `w(z) = √λ tan(√λ z)`.

use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::geometry::triangle_grid;
use crate::potential::{tent_train, Fn1d};
use crate::quadrature::{adaptive, gauss_legendre};

/// Grid estimate of `mes₂ E` on the triangle `Δ_r`.
#[derive(Debug, Clone)]
pub struct TriangleSublevel {
    pub r: f64,
    pub m: usize,
    /// Membership of each triangle node, in grid order.
    pub indicator: Vec<bool>,
    pub measure: f64,
    /// Relative change against the estimate at `m / 2`, when refined.
    pub refinement_change: Option<f64>,
}

/// Cumulative `P(t) = ∫_0^t u²` from knots at spacing `r / n` plus a
/// three-point Gauss rule on the last partial interval.
struct SquareIntegral<'a> {
    u: &'a (dyn Fn(f64) -> f64 + Sync),
    h: f64,
    knots: Vec<f64>,
    x: Vec<f64>,
    w: Vec<f64>,
}

impl<'a> SquareIntegral<'a> {
    fn new(u: &'a (dyn Fn(f64) -> f64 + Sync), r: f64, n: usize) -> Self {
        let (x, w) = gauss_legendre(3);
        let h = r / n as f64;
        let mut s = Self { u, h, knots: Vec::with_capacity(n + 1), x, w };
        let mut acc = 0.0;
        s.knots.push(0.0);
        for k in 0..n {
            acc += s.piece(k as f64 * h, (k + 1) as f64 * h);
            s.knots.push(acc);
        }
        s
    }

    fn piece(&self, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.x.iter().zip(&self.w).map(|(xi, wi)| wi * (self.u)(mid + half * xi).powi(2)).sum::<f64>() * half
    }

    fn at(&self, t: f64) -> f64 {
        let k = ((t / self.h).floor() as usize).min(self.knots.len() - 1);
        let a = k as f64 * self.h;
        self.knots[k] + if t > a { self.piece(a, t) } else { 0.0 }
    }
}

/// `mes₂ E(λ)` on the `m × m` triangle grid, with `∫u²` at resolution `4m`.
/// The inequality is strict, so nodes on the boundary are excluded.
pub fn en_measure(u: &(dyn Fn(f64) -> f64 + Sync), lambda: f64, r: f64, m: usize) -> Result<TriangleSublevel> {
    let tri = triangle_grid(r, m)?;
    let p = SquareIntegral::new(u, r, 4 * m);
    let indicator: Vec<bool> =
        tri.nodes.iter().map(|&(s, t)| u(t) - u(s) > p.at(t) - p.at(s) + lambda * (t - s)).collect();
    let measure = indicator.iter().zip(&tri.weights).filter(|(b, _)| **b).fold(0.0, |acc, (_, w)| acc + w);
    Ok(TriangleSublevel { r, m, indicator, measure, refinement_change: None })
}

/// Doubles `m` from `m0` until two successive estimates differ by less than
/// 2% (or by less than `1e-6 r²`), up to `max_m`.
pub fn en_measure_refined(
    u: &(dyn Fn(f64) -> f64 + Sync),
    lambda: f64,
    r: f64,
    m0: usize,
    max_m: usize,
) -> Result<TriangleSublevel> {
    let mut prev = en_measure(u, lambda, r, m0)?;
    let mut m = 2 * m0;
    while m <= max_m {
        let mut next = en_measure(u, lambda, r, m)?;
        let diff = (next.measure - prev.measure).abs();
        let scale = next.measure.max(prev.measure);
        next.refinement_change = Some(if scale > 0.0 { diff / scale } else { 0.0 });
        if diff <= 0.02 * scale || diff <= 1e-6 * r * r {
            return Ok(next);
        }
        prev = next;
        m *= 2;
    }
    Ok(prev)
}

/// `mes₁ X(λ)` on `m` midpoints of `[t0, r]`.
pub fn xn_measure(u: &(dyn Fn(f64) -> f64 + Sync), lambda: f64, t0: f64, r: f64, m: usize) -> Result<f64> {
    if !(t0 >= 0.0 && r > t0) || m < 1 {
        return Err(invalid("xn_measure needs 0 <= t0 < r and m >= 1"));
    }
    let p = SquareIntegral::new(u, r, 4 * m);
    let p0 = p.at(t0);
    let h = (r - t0) / m as f64;
    let count = (0..m).map(|i| t0 + (i as f64 + 0.5) * h).filter(|&t| u(t) >= p.at(t) - p0 + lambda * (t - t0)).count();
    Ok(count as f64 * h)
}

/// Solution of `w(z) = ∫_0^z w² + λ z` and its blow-up time.
#[derive(Clone)]
pub struct Comparator {
    pub lambda: f64,
    pub w: Fn1d,
    pub z_blowup: f64,
}

impl std::fmt::Debug for Comparator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Comparator").field("lambda", &self.lambda).field("z_blowup", &self.z_blowup).finish()
    }
}

pub fn blowup_comparator(lambda: f64) -> Result<Comparator> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(invalid(format!("comparator needs lambda > 0, got {lambda}")));
    }
    let k = lambda.sqrt();
    Ok(Comparator { lambda, w: Arc::new(move |z: f64| k * (k * z).tan()), z_blowup: std::f64::consts::FRAC_PI_2 / k })
}

impl Comparator {
    /// Largest `|w(z) - ∫_0^z w² - λ z| / max(1, |w(z)|)` over `n` points of
    /// `(0, 0.9 z_blowup]`, with `∫w²` by adaptive quadrature.
    pub fn residual(&self, n: usize) -> f64 {
        let w = &self.w;
        let sq = |z: f64| w(z).powi(2);
        let zmax = 0.9 * self.z_blowup;
        let mut acc = 0.0;
        let mut prev = 0.0;
        let mut worst: f64 = 0.0;
        for i in 1..=n {
            let z = zmax * i as f64 / n as f64;
            acc += adaptive(&sq, prev, z, &[], 1e-14);
            prev = z;
            let wz = w(z);
            worst = worst.max((wz - acc - self.lambda * z).abs() / wz.abs().max(1.0));
        }
        worst
    }
}

/// Outcome of the discrete comparison against the comparator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domination {
    /// `u(z) >= ∫_0^z u² + λ z` at every checked point.
    pub satisfies_inequality: bool,
    /// `u >= w` at every checked point.
    pub dominates: bool,
    /// `min (u - w)` over the checked points.
    pub min_gap: f64,
}

/// Checks on `m` points of `(0, min(z_end, 0.9 z_blowup)]` whether `u`
/// satisfies the integral inequality and lies above the comparator.
pub fn comparator_domination(u: &(dyn Fn(f64) -> f64 + Sync), lambda: f64, z_end: f64, m: usize) -> Result<Domination> {
    let c = blowup_comparator(lambda)?;
    let zmax = z_end.min(0.9 * c.z_blowup);
    if !(zmax > 0.0) || m < 1 {
        return Err(invalid("domination check needs a positive interval and m >= 1"));
    }
    let p = SquareIntegral::new(u, zmax, 8 * m);
    let mut out = Domination { satisfies_inequality: true, dominates: true, min_gap: f64::INFINITY };
    for i in 1..=m {
        let z = zmax * i as f64 / m as f64;
        let uz = u(z);
        // Roundoff slack for functions that satisfy the equation exactly.
        let slack = 1e-9 * uz.abs().max(1.0);
        if uz + slack < p.at(z) + lambda * z {
            out.satisfies_inequality = false;
        }
        let gap = uz - (c.w)(z);
        out.min_gap = out.min_gap.min(gap);
        if gap < -slack {
            out.dominates = false;
        }
    }
    Ok(out)
}

/// The bounded continuous test family: zero, a constant, `sin(10 t)`, `5 t`
/// and a tent train.
pub fn test_family() -> Vec<(&'static str, Fn1d)> {
    vec![
        ("zero", Arc::new(|_| 0.0)),
        ("constant", Arc::new(|_| 3.0)),
        ("sin", Arc::new(|t: f64| (10.0 * t).sin())),
        ("linear", Arc::new(|t: f64| 5.0 * t)),
        ("tents", Arc::new(|t: f64| 2.0 * tent_train(6.0 * t + 2.0 / 3.0))),
    ]
}

/// `mes₂ E(λ)` for each `λ`, in order.
pub fn en_sweep(u: &(dyn Fn(f64) -> f64 + Sync), lambdas: &[f64], r: f64, m: usize) -> Result<Vec<f64>> {
    lambdas.iter().map(|&l| en_measure(u, l, r, m).map(|s| s.measure)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_function() {
        let zero = |_: f64| 0.0;
        assert_eq!(en_measure(&zero, 1.0, 1.0, 50).unwrap().measure, 0.0);
        let all = en_measure(&zero, -1.0, 2.0, 50).unwrap();
        assert!((all.measure - 2.0).abs() < 1e-12);
        assert_eq!(xn_measure(&zero, 1.0, 0.0, 1.0, 100).unwrap(), 0.0);
    }

    #[test]
    fn constant_exit_time() {
        // M >= (M² + λ) z  iff  z <= M / (M² + λ).
        let m_const = 3.0;
        let u = |_: f64| m_const;
        for lambda in [1.0, 10.0, 100.0] {
            let exact = m_const / (m_const * m_const + lambda);
            let got = xn_measure(&u, lambda, 0.1, 1.0, 4000).unwrap();
            assert!((got - exact).abs() < 1e-3, "{lambda}: {got} vs {exact}");
        }
    }

    #[test]
    fn comparator_formula() {
        let c = blowup_comparator(1.0).unwrap();
        assert!((c.z_blowup - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!(((c.w)(0.3) - 0.3f64.tan()).abs() < 1e-15);
        assert!((blowup_comparator(100.0).unwrap().z_blowup - std::f64::consts::PI / 20.0).abs() < 1e-15);
        assert!(blowup_comparator(0.0).is_err());
        for lambda in [1.0, 100.0, 1e4] {
            assert!(blowup_comparator(lambda).unwrap().residual(100) < 1e-8);
        }
    }

    #[test]
    fn faster_riccati_solution_dominates() {
        // √μ tan(√μ z) solves the equation with μ > λ, so it satisfies the
        // inequality for λ and lies above the comparator.
        let (lambda, mu) = (4.0, 9.0);
        let k = f64::sqrt(mu);
        let u = move |z: f64| k * (k * z).tan();
        let d = comparator_domination(&u, lambda, 0.45, 200).unwrap();
        assert!(d.satisfies_inequality && d.dominates, "{d:?}");
        let below = |z: f64| 0.5 * z;
        let d = comparator_domination(&below, lambda, 0.45, 200).unwrap();
        assert!(!d.satisfies_inequality && !d.dominates);
    }
}
