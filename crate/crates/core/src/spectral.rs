//! Smallest Dirichlet eigenvalues `λ₀(y, r)` on balls and their radial and
//! one-dimensional counterparts.
//!
//! The ball operator is the finite-difference `-Δ + V` on the masked lattice
//! of [`make_grid`]. Rows next to the boundary use the Shortley–Weller
//! stencil: the missing neighbor is replaced by the boundary point on the
//! grid line, at its true distance, where the eigenfunction vanishes. The
//! resulting matrix is a nonsymmetric M-matrix, so the smallest eigenvalue
//! is real and simple with a positive eigenvector.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::geometry::{make_grid, Ball, CoveringCenter, Domain, QuadratureGrid};
use crate::potential::{Fn1d, PotentialField};
use crate::trend::{classify_points, SeriesPoint, TrendRule, TrendSummary};

/// Smallest Dirichlet eigenvalue on a grid together with its eigenvector.
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub lambda0: f64,
    /// Ground state at the grid nodes, positive, unit Euclidean norm.
    pub ground_state: Vec<f64>,
    /// `‖Hu - λ₀u‖₂ / ‖u‖₂` on the grid.
    pub residual: f64,
    pub h: f64,
    pub iterations: usize,
}

/// Controls for the inverse iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    /// Relative change of the eigenvalue between iterations at convergence.
    pub tol: f64,
    pub max_iter: usize,
    /// Relative residual for the inner linear solves.
    pub inner_tol: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 300, inner_tol: 1e-10 }
    }
}

/// Sparse matrix in compressed rows with a separate diagonal.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    diag: Vec<f64>,
    ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl SparseOperator {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// `y = (A - shift·I) x`.
    pub fn apply(&self, x: &[f64], shift: f64, y: &mut [f64]) {
        for i in 0..self.diag.len() {
            let mut s = (self.diag[i] - shift) * x[i];
            for k in self.ptr[i]..self.ptr[i + 1] {
                s += self.vals[k] * x[self.cols[k] as usize];
            }
            y[i] = s;
        }
    }

    /// Lower bound `min_i (a_ii - Σ_j |a_ij|)` on the real spectrum.
    pub fn gershgorin_lower(&self) -> f64 {
        (0..self.diag.len())
            .map(|i| self.diag[i] - self.vals[self.ptr[i]..self.ptr[i + 1]].iter().map(|v| v.abs()).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Assembles `-Δ + diag(V)` on a lattice grid with Shortley–Weller rows at
/// the boundary.
pub fn assemble_dirichlet(grid: &QuadratureGrid, potential: &[f64]) -> Result<SparseOperator> {
    let lattice = grid.lattice().ok_or_else(|| invalid("the Dirichlet operator needs a lattice grid"))?;
    let dim = grid.dim();
    let h = grid.spacing();
    let n = grid.len();
    let domain = grid.domain();
    let mut diag = vec![0.0; n];
    let mut ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(2 * dim * n);
    let mut vals = Vec::with_capacity(2 * dim * n);
    ptr.push(0);
    for i in 0..n {
        let x = grid.node(i);
        let mut d = potential[i];
        for axis in 0..dim {
            let mut side = [(None, h), (None, h)];
            for (s, dir) in [(0usize, -1i32), (1, 1)] {
                match lattice.neighbor(i, axis, dir) {
                    Some(j) => side[s] = (Some(j), h),
                    None => {
                        let dist = domain.boundary_distance(x, axis, dir as f64);
                        side[s] = (None, dist.clamp(1e-3 * h, h));
                    }
                }
            }
            let (hl, hr) = (side[0].1, side[1].1);
            d += 2.0 / (hl * hr);
            if let Some(j) = side[0].0 {
                cols.push(j as u32);
                vals.push(-2.0 / (hl * (hl + hr)));
            }
            if let Some(j) = side[1].0 {
                cols.push(j as u32);
                vals.push(-2.0 / (hr * (hl + hr)));
            }
        }
        diag[i] = d;
        ptr.push(cols.len());
    }
    Ok(SparseOperator { diag, ptr, cols, vals })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Jacobi-preconditioned BiCGSTAB for `(A - shift) x = b`, starting from `x`.
/// Returns the number of iterations, or `None` on breakdown or when the
/// iteration cap is reached.
fn bicgstab(op: &SparseOperator, shift: f64, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Option<usize> {
    let n = b.len();
    let inv: Vec<f64> = op.diag.iter().map(|d| 1.0 / (d - shift)).collect();
    let bnorm = norm2(b).max(1e-300);
    let mut r = vec![0.0; n];
    op.apply(x, shift, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    if norm2(&r) <= tol * bnorm {
        return Some(0);
    }
    let r0 = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    for it in 1..=max_iter {
        let rho_new = dot(&r0, &r);
        if rho_new == 0.0 || omega == 0.0 {
            return None;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            y[i] = inv[i] * p[i];
        }
        op.apply(&y, shift, &mut v);
        let r0v = dot(&r0, &v);
        if r0v == 0.0 {
            return None;
        }
        alpha = rho / r0v;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm2(&s) <= tol * bnorm {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            return Some(it);
        }
        for i in 0..n {
            z[i] = inv[i] * s[i];
        }
        op.apply(&z, shift, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            return None;
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        if norm2(&r) <= tol * bnorm {
            return Some(it);
        }
    }
    None
}

/// Smallest eigenvalue of an assembled operator by shifted inverse
/// iteration.
///
/// The shift starts below the Gershgorin bound. Once the iterate is positive
/// the Collatz–Wielandt quotient `min_i (Au)_i / u_i` is a lower bound for
/// `λ₀`, and the shift is raised to a quarter of `gap` below it.
pub fn smallest_eigen(op: &SparseOperator, h: f64, gap: f64, opts: &EigenOptions) -> Result<EigenResult> {
    let n = op.len();
    if n == 0 {
        return Err(invalid("empty operator"));
    }
    let g = op.gershgorin_lower();
    let mut shift = g - 1e-3 * (1.0 + g.abs());
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut ax = vec![0.0; n];
    let mut lambda = f64::NAN;
    let mut residual = f64::INFINITY;
    let max_inner = 20 * n.max(100);
    for it in 1..=opts.max_iter {
        let mut y: Vec<f64> = if lambda.is_finite() {
            let scale = 1.0 / (lambda - shift).max(1e-300);
            x.iter().map(|v| v * scale).collect()
        } else {
            x.clone()
        };
        if bicgstab(op, shift, &x, &mut y, opts.inner_tol, max_inner).is_none() {
            return Err(Error::EigenNotConverged(Box::new(EigenResult {
                lambda0: lambda,
                ground_state: x,
                residual,
                h,
                iterations: it,
            })));
        }
        let sign = if y.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
        let ny = norm2(&y) * sign;
        x.iter_mut().zip(&y).for_each(|(xi, yi)| *xi = yi / ny);
        op.apply(&x, 0.0, &mut ax);
        let new_lambda = dot(&x, &ax);
        residual = ax.iter().zip(&x).map(|(a, v)| (a - new_lambda * v).powi(2)).sum::<f64>().sqrt();
        let change = (new_lambda - lambda).abs();
        lambda = new_lambda;
        if x.iter().all(|&v| v > 0.0) {
            let cw = ax.iter().zip(&x).map(|(a, v)| a / v).fold(f64::INFINITY, f64::min);
            if cw.is_finite() {
                shift = shift.max(cw.min(lambda) - 0.25 * gap);
            }
        }
        let scale = lambda.abs().max(1.0);
        if change <= opts.tol * scale && residual <= 1e-6 * scale {
            return Ok(EigenResult { lambda0: lambda, ground_state: x, residual, h, iterations: it });
        }
    }
    Err(Error::EigenNotConverged(Box::new(EigenResult {
        lambda0: lambda,
        ground_state: x,
        residual,
        h,
        iterations: opts.max_iter,
    })))
}

/// Grid, operator and eigenpair for `-Δ + V` on a ball.
pub fn dirichlet_problem(v: &PotentialField, ball: &Ball, h: f64) -> Result<(QuadratureGrid, SparseOperator)> {
    if v.dim() != ball.dim() {
        return Err(invalid("potential and ball dimensions differ"));
    }
    if !(h > 0.0 && h <= ball.radius() / 8.0) {
        return Err(invalid(format!("grid spacing {h} must be at most radius/8 = {}", ball.radius() / 8.0)));
    }
    let grid = make_grid(&Domain::Ball(ball.clone()), h)?;
    let values = grid.sample(|x| v.eval(x));
    if let Some(bad) = values.iter().find(|x| !x.is_finite()) {
        return Err(invalid(format!("potential is not finite on the grid ({bad})")));
    }
    let op = assemble_dirichlet(&grid, &values)?;
    Ok((grid, op))
}

/// `λ₀(B)` for `-Δ + V` with zero boundary values.
pub fn dirichlet_lambda0(v: &PotentialField, ball: &Ball, h: f64) -> Result<EigenResult> {
    dirichlet_lambda0_with(v, ball, h, &EigenOptions::default())
}

pub fn dirichlet_lambda0_with(v: &PotentialField, ball: &Ball, h: f64, opts: &EigenOptions) -> Result<EigenResult> {
    let (_, op) = dirichlet_problem(v, ball, h)?;
    let gap = std::f64::consts::PI.powi(2) / (ball.radius() * ball.radius());
    smallest_eigen(&op, h, gap, opts)
}

/// `λ₀(y, r)` at every center, with the trend of the series.
#[derive(Debug, Clone)]
pub struct LocalizationScan {
    pub radius: f64,
    pub h: f64,
    pub points: Vec<SeriesPoint>,
    pub trend: TrendSummary,
}

/// Computes `λ₀(B_r(y))` for every center; failures are recorded per center.
/// Centers are processed in parallel and reported in input order.
pub fn localization_scan(
    v: &PotentialField,
    centers: &[Vec<f64>],
    r: f64,
    h: f64,
    rule: &TrendRule,
) -> LocalizationScan {
    let points: Vec<SeriesPoint> = centers
        .par_iter()
        .map(|c| match Ball::new(c.clone(), r).and_then(|b| dirichlet_lambda0(v, &b, h)) {
            Ok(res) => SeriesPoint::ok(c.clone(), res.lambda0),
            Err(e) => SeriesPoint::failed(c.clone(), e),
        })
        .collect();
    let trend = classify_points(&points, rule);
    LocalizationScan { radius: r, h, points, trend }
}

/// Point list of covering centers.
pub fn center_points(centers: &[CoveringCenter]) -> Vec<Vec<f64>> {
    centers.iter().map(|c| c.point.clone()).collect()
}

/// Per-center eigenvalues of the two split operators `-Δ + V_k / θ_k`.
#[derive(Debug, Clone)]
pub struct SplitScan {
    pub theta: (f64, f64),
    pub first: Vec<SeriesPoint>,
    pub second: Vec<SeriesPoint>,
    /// `θ₁λ₀⁽¹⁾ + θ₂λ₀⁽²⁾`.
    pub combined: Vec<SeriesPoint>,
    /// `λ₀` of the unsplit operator, when the full potential was supplied.
    pub full: Option<Vec<SeriesPoint>>,
}

/// Splitting lower bound `λ₀(V) >= θ₁λ₀(V₁/θ₁) + θ₂λ₀(V₂/θ₂)` on every ball.
///
/// When `full` is given, `V₁ + V₂ = V` is checked at the grid nodes of every
/// ball and `λ₀(V)` is reported alongside.
#[allow(clippy::too_many_arguments)]
pub fn split_operator_scan(
    v1: &PotentialField,
    v2: &PotentialField,
    theta1: f64,
    theta2: f64,
    full: Option<&PotentialField>,
    centers: &[Vec<f64>],
    r: f64,
    h: f64,
) -> Result<SplitScan> {
    if !(theta1 > 0.0 && theta2 > 0.0 && (theta1 + theta2 - 1.0).abs() < 1e-12) {
        return Err(invalid(format!("need θ₁, θ₂ > 0 with θ₁ + θ₂ = 1, got {theta1}, {theta2}")));
    }
    let w1 = v1.scaled(1.0 / theta1);
    let w2 = v2.scaled(1.0 / theta2);
    let rows: Vec<[SeriesPoint; 4]> = centers
        .par_iter()
        .map(|c| {
            let run = |v: &PotentialField| -> Result<f64> {
                let ball = Ball::new(c.clone(), r)?;
                Ok(dirichlet_lambda0(v, &ball, h)?.lambda0)
            };
            let check = full.map(|v| -> Result<()> {
                let grid = make_grid(&Domain::Ball(Ball::new(c.clone(), r)?), h)?;
                for x in grid.nodes() {
                    let (a, b) = (v1.eval(x) + v2.eval(x), v.eval(x));
                    if (a - b).abs() > 1e-9 * (1.0 + b.abs()) {
                        return Err(invalid(format!("V1 + V2 differs from V at {x:?}")));
                    }
                }
                Ok(())
            });
            let point = |r: Result<f64>| match r {
                Ok(v) => SeriesPoint::ok(c.clone(), v),
                Err(e) => SeriesPoint::failed(c.clone(), e),
            };
            if let Some(Err(e)) = check {
                let msg = e.to_string();
                return [0, 1, 2, 3].map(|_| SeriesPoint::failed(c.clone(), &msg));
            }
            let a = run(&w1);
            let b = run(&w2);
            let combined = match (&a, &b) {
                (Ok(x), Ok(y)) => Ok(theta1 * x + theta2 * y),
                (Err(e), _) | (_, Err(e)) => Err(invalid(e.to_string())),
            };
            let f = match full {
                Some(v) => run(v),
                None => Err(invalid("not requested")),
            };
            [point(a), point(b), point(combined), point(f)]
        })
        .collect();
    let mut first = Vec::with_capacity(rows.len());
    let mut second = Vec::with_capacity(rows.len());
    let mut combined = Vec::with_capacity(rows.len());
    let mut whole = Vec::with_capacity(rows.len());
    for [a, b, c, f] in rows {
        first.push(a);
        second.push(b);
        combined.push(c);
        whole.push(f);
    }
    Ok(SplitScan { theta: (theta1, theta2), first, second, combined, full: full.map(|_| whole) })
}

/// Result of the radial shooting bisection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiccatiThreshold {
    pub lambda_hat: f64,
    /// Width of the final bracket `[lambda_hat - w/2, lambda_hat + w/2]`.
    pub bracket_width: f64,
}

/// Fixed-step RK4 integration of `u'' + ((d-1)/ρ) u' = (V - λ) u` from the
/// regular series start at `ρ = 0`. The pair `(u, u')` is rescaled whenever
/// its size leaves `[1e-12, 1e12]`, with the logarithm of the accumulated
/// factor tracked separately; this is the log-derivative substitution in
/// disguise and keeps the sign pattern of `u` intact.
struct Shooter<'a> {
    v: &'a (dyn Fn(f64) -> f64 + Send + Sync),
    dim: f64,
    r: f64,
    steps: usize,
}

#[derive(Debug, Clone, Copy)]
struct ShotState {
    rho: f64,
    u: f64,
    du: f64,
    log_scale: f64,
}

impl Shooter<'_> {
    fn rhs(&self, rho: f64, u: f64, du: f64, lambda: f64) -> (f64, f64) {
        (du, ((self.v)(rho) - lambda) * u - (self.dim - 1.0) / rho * du)
    }

    /// Calls `visit` after every step; stops early when `visit` returns false.
    fn shoot(&self, lambda: f64, mut visit: impl FnMut(&ShotState) -> bool) {
        let step = self.r / self.steps as f64;
        // Series start one hundredth of a step from the origin.
        let rho0 = 1e-2 * step;
        let c = ((self.v)(0.0) - lambda) / (2.0 * self.dim);
        let mut st = ShotState { rho: rho0, u: 1.0 + c * rho0 * rho0, du: 2.0 * c * rho0, log_scale: 0.0 };
        if !visit(&st) {
            return;
        }
        for i in 0..self.steps {
            let target = (i + 1) as f64 * step;
            let hs = target - st.rho;
            let (k1u, k1d) = self.rhs(st.rho, st.u, st.du, lambda);
            let (k2u, k2d) = self.rhs(st.rho + hs / 2.0, st.u + hs / 2.0 * k1u, st.du + hs / 2.0 * k1d, lambda);
            let (k3u, k3d) = self.rhs(st.rho + hs / 2.0, st.u + hs / 2.0 * k2u, st.du + hs / 2.0 * k2d, lambda);
            let (k4u, k4d) = self.rhs(target, st.u + hs * k3u, st.du + hs * k3d, lambda);
            st.u += hs / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
            st.du += hs / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
            st.rho = target;
            let size = st.u.abs().max(st.du.abs() * self.r);
            if !(1e-12..=1e12).contains(&size) && size > 0.0 {
                st.u /= size;
                st.du /= size;
                st.log_scale += size.ln();
            }
            if !visit(&st) {
                return;
            }
        }
    }

    fn vanishes(&self, lambda: f64) -> bool {
        let mut hit = false;
        self.shoot(lambda, |s| {
            hit = s.u <= 0.0;
            !hit
        });
        hit
    }
}

fn sample_range(v: &(dyn Fn(f64) -> f64 + Send + Sync), r: f64) -> (f64, f64) {
    (0..=1000)
        .map(|i| v(r * i as f64 / 1000.0))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)))
}

/// Threshold `λ̂` such that the radial solution with `u(0) = 1` stays positive
/// on `[0, r]` exactly for `λ < λ̂`; it equals `λ₀(B_r)` for radial `V`.
pub fn riccati_threshold(v: &Fn1d, r: f64, dim: usize) -> Result<RiccatiThreshold> {
    riccati_threshold_steps(v, r, dim, 4000)
}

pub fn riccati_threshold_steps(v: &Fn1d, r: f64, dim: usize, steps: usize) -> Result<RiccatiThreshold> {
    if !(r > 0.0) || dim == 0 || steps < 10 {
        return Err(invalid("shooting needs r > 0, d >= 1 and at least 10 steps"));
    }
    let (vmin, vmax) = sample_range(v.as_ref(), r);
    if !vmin.is_finite() || !vmax.is_finite() {
        return Err(invalid("radial potential is not finite on [0, r]"));
    }
    let sh = Shooter { v: v.as_ref(), dim: dim as f64, r, steps };
    let mut lo = vmin - 1.0;
    if sh.vanishes(lo) {
        return Err(Error::Bracket(format!("solution already vanishes at λ = {lo}")));
    }
    let mut hi = vmax + (std::f64::consts::PI * (dim as f64 / 2.0 + 1.0) / r).powi(2);
    let mut tries = 0;
    while !sh.vanishes(hi) {
        lo = hi;
        hi = hi + (hi - vmin).abs().max(1.0);
        tries += 1;
        if tries > 60 {
            return Err(Error::Bracket("no zero found in [0, r] for any trial λ".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-6 * mid.abs().max(1.0) {
            break;
        }
        if sh.vanishes(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(RiccatiThreshold { lambda_hat: 0.5 * (lo + hi), bracket_width: hi - lo })
}

/// Radial solution `v = -ln u` of `-Δv + |∇v|² + λ = V`.
#[derive(Debug, Clone)]
pub struct RiccatiProfile {
    pub lambda: f64,
    pub rho: Vec<f64>,
    pub v: Vec<f64>,
    /// Max-norm residual of the radial equation by central differences.
    pub residual: f64,
}

/// Riccati profile for `λ` below the threshold, sampled at step `step`.
pub fn riccati_solution(v: &Fn1d, r: f64, dim: usize, lambda: f64, step: f64) -> Result<RiccatiProfile> {
    if !(step > 0.0 && step < r) {
        return Err(invalid("step must lie in (0, r)"));
    }
    let steps = (r / step).round() as usize;
    let sh = Shooter { v: v.as_ref(), dim: dim as f64, r, steps };
    let mut rho = Vec::with_capacity(steps + 1);
    let mut vals = Vec::with_capacity(steps + 1);
    let mut positive = true;
    sh.shoot(lambda, |s| {
        if s.u <= 0.0 {
            positive = false;
            return false;
        }
        rho.push(s.rho);
        vals.push(-(s.u.ln() + s.log_scale));
        true
    });
    if !positive {
        return Err(invalid(format!("λ = {lambda} is not below the threshold: u vanishes in [0, r]")));
    }
    let d = dim as f64;
    let hs = r / steps as f64;
    let mut residual: f64 = 0.0;
    // Index 0 sits at the series start; skip it and the last point.
    for i in 2..vals.len() - 1 {
        let dv = (vals[i + 1] - vals[i - 1]) / (2.0 * hs);
        let d2v = (vals[i + 1] - 2.0 * vals[i] + vals[i - 1]) / (hs * hs);
        let res = -d2v - (d - 1.0) / rho[i] * dv + dv * dv + lambda - v(rho[i]);
        residual = residual.max(res.abs());
    }
    Ok(RiccatiProfile { lambda, rho, v: vals, residual })
}

/// Smallest Dirichlet eigenvalue of `-d²/dx² + V` on `(a, b)`, three-point
/// differences with step `min((b - a)/200, 1e-4)` (at most two million
/// nodes), by Sturm-sequence bisection.
pub fn interval_lambda0_1d(v: &Fn1d, a: f64, b: f64) -> Result<f64> {
    if !(b > a) {
        return Err(invalid("interval must have positive length"));
    }
    let len = b - a;
    let n = ((len / 1e-4).ceil() as usize).clamp(200, 2_000_000);
    let h = len / (n + 1) as f64;
    let off = 1.0 / (h * h);
    let diag: Vec<f64> = (1..=n).map(|i| 2.0 * off + v(a + i as f64 * h)).collect();
    if diag.iter().any(|d| !d.is_finite()) {
        return Err(invalid("potential is not finite on the interval"));
    }
    let count_below = |x: f64| -> usize {
        let mut q = diag[0] - x;
        let mut count = usize::from(q < 0.0);
        for d in &diag[1..] {
            let prev = if q == 0.0 { 1e-300 } else { q };
            q = d - x - off * off / prev;
            count += usize::from(q < 0.0);
        }
        count
    };
    let mut lo = diag.iter().copied().fold(f64::INFINITY, f64::min) - 2.0 * off;
    let mut hi = diag.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 2.0 * off;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-12 * mid.abs().max(1.0) {
            break;
        }
        if count_below(mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn unit_ball() -> Ball {
        Ball::centered(3, 1.0).unwrap()
    }

    #[test]
    fn free_ball_eigenvalue() {
        let v = PotentialField::constant(3, 0.0);
        let res = dirichlet_lambda0(&v, &unit_ball(), 1.0 / 16.0).unwrap();
        let pi2 = PI * PI;
        assert!((res.lambda0 - pi2).abs() < 0.01 * pi2, "{}", res.lambda0);
        assert!(res.ground_state.iter().all(|&u| u > 0.0));
        assert!(res.residual < 1e-5 * pi2);
    }

    #[test]
    fn constant_shift_is_exact() {
        let ball = unit_ball();
        let a = dirichlet_lambda0(&PotentialField::constant(3, 0.0), &ball, 0.125).unwrap();
        let b = dirichlet_lambda0(&PotentialField::constant(3, 7.5), &ball, 0.125).unwrap();
        assert!((b.lambda0 - a.lambda0 - 7.5).abs() < 1e-7 * b.lambda0);
    }

    #[test]
    fn monotone_in_potential_and_domain() {
        let ball = unit_ball();
        let h = 0.125;
        let low = dirichlet_lambda0(&PotentialField::quadratic(3), &ball, h).unwrap().lambda0;
        let high = dirichlet_lambda0(&PotentialField::quadratic(3).shifted(0.5), &ball, h).unwrap().lambda0;
        let higher =
            dirichlet_lambda0(&PotentialField::radial(3, "2r^2+1", |r| 2.0 * r * r + 1.0), &ball, h).unwrap().lambda0;
        assert!(low <= high && high <= higher);
        let small = dirichlet_lambda0(&PotentialField::constant(3, 0.0), &Ball::centered(3, 0.7).unwrap(), 0.7 / 12.0)
            .unwrap()
            .lambda0;
        let big = dirichlet_lambda0(&PotentialField::constant(3, 0.0), &ball, 1.0 / 12.0).unwrap().lambda0;
        assert!(small >= big);
    }

    #[test]
    fn rejects_coarse_grid() {
        assert!(dirichlet_lambda0(&PotentialField::constant(3, 0.0), &unit_ball(), 0.2).is_err());
    }

    #[test]
    fn shooting_free_ball() {
        let zero: Fn1d = Arc::new(|_| 0.0);
        let t = riccati_threshold(&zero, 1.0, 3).unwrap();
        assert!((t.lambda_hat - PI * PI).abs() < 1e-5 * PI * PI);
        assert!(t.bracket_width <= 1e-6 * t.lambda_hat);
        let c: Fn1d = Arc::new(|_| 4.0);
        let tc = riccati_threshold(&c, 1.0, 3).unwrap();
        assert!((tc.lambda_hat - t.lambda_hat - 4.0).abs() < 1e-4);
    }

    #[test]
    fn shooting_survives_large_potential() {
        let big: Fn1d = Arc::new(|r| 1e4 * r * r);
        let t = riccati_threshold(&big, 1.0, 3).unwrap();
        // Harmonic oscillator ground state 3·sqrt(1e4) = 300 fits well inside.
        assert!((t.lambda_hat - 300.0).abs() < 0.5, "{}", t.lambda_hat);
    }

    #[test]
    fn riccati_profiles() {
        let zero: Fn1d = Arc::new(|_| 0.0);
        let p = riccati_solution(&zero, 1.0, 3, 0.0, 1e-3).unwrap();
        assert!(p.v.iter().all(|v| v.abs() < 1e-12));
        let lam = PI * PI / 4.0;
        let p = riccati_solution(&zero, 1.0, 3, lam, 1e-4).unwrap();
        assert!(p.residual < 1e-4, "{}", p.residual);
        for (rho, v) in p.rho.iter().zip(&p.v).skip(1).step_by(997) {
            let x = PI * rho / 2.0;
            let exact = -(x.sin() / x).ln();
            assert!((v - exact).abs() < 1e-8, "{rho}: {v} vs {exact}");
        }
        assert!(riccati_solution(&zero, 1.0, 3, PI * PI + 1.0, 1e-3).is_err());
    }

    #[test]
    fn interval_free_and_constant() {
        let zero: Fn1d = Arc::new(|_| 0.0);
        let l = interval_lambda0_1d(&zero, 0.0, 2.0).unwrap();
        assert!((l - PI * PI / 4.0).abs() < 1e-6);
        let c: Fn1d = Arc::new(|_| 3.0);
        let l = interval_lambda0_1d(&c, 1.0, 1.5).unwrap();
        assert!((l - 3.0 - PI * PI / 0.25).abs() < 1e-4);
    }

    #[test]
    fn split_scan_bounds() {
        let v = PotentialField::quadratic(3);
        let v1 = v.scaled(0.5);
        let centers = vec![vec![0.0; 3], vec![1.0, 0.0, 0.0]];
        let s = split_operator_scan(&v1, &v1, 0.5, 0.5, Some(&v), &centers, 1.0, 0.125).unwrap();
        let full = s.full.unwrap();
        for i in 0..2 {
            assert!((s.first[i].value - full[i].value).abs() < 1e-6 * full[i].value);
            assert!(s.combined[i].value <= full[i].value * (1.0 + 1e-6));
        }
        assert!(split_operator_scan(&v1, &v1, 0.6, 0.6, None, &centers, 1.0, 0.125).is_err());
    }
}
