//! One-dimensional quadrature rules and a few closed-form measures.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, computed by Newton
/// iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let pn = if n == 0 { 1.0 } else { p1 };
    let dpn = n as f64 * (x * pn - p0) / (x * x - 1.0);
    (pn, dpn)
}

/// Fixed Gauss–Legendre rule of `n` points on `[a, b]`.
pub fn gauss(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    x.iter().zip(&w).map(|(xi, wi)| wi * f(mid + half * xi)).sum::<f64>() * half
}

/// Adaptive Gauss–Legendre integration on `[a, b]`.
///
/// Each panel is accepted when the 7- and 14-point rules agree to `tol`
/// (scaled by the panel width); otherwise it is bisected. `breaks` are
/// points where the integrand may be discontinuous; they are always panel
/// boundaries.
pub fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64], tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut edges = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    inner.sort_by(f64::total_cmp);
    edges.extend(inner);
    edges.push(b);
    let lo = gauss_legendre(7);
    let hi = gauss_legendre(14);
    edges.windows(2).map(|w| adaptive_panel(f, w[0], w[1], tol, &lo, &hi, 0)).sum()
}

fn rule(f: &dyn Fn(f64) -> f64, a: f64, b: f64, r: &(Vec<f64>, Vec<f64>)) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    r.0.iter().zip(&r.1).map(|(xi, wi)| wi * f(mid + half * xi)).sum::<f64>() * half
}

fn adaptive_panel(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
    lo: &(Vec<f64>, Vec<f64>),
    hi: &(Vec<f64>, Vec<f64>),
    depth: usize,
) -> f64 {
    let coarse = rule(f, a, b, lo);
    let fine = rule(f, a, b, hi);
    if (fine - coarse).abs() <= tol.max(1e-15 * fine.abs()) || depth >= 40 {
        return fine;
    }
    let m = 0.5 * (a + b);
    adaptive_panel(f, a, m, 0.5 * tol, lo, hi, depth + 1) + adaptive_panel(f, m, b, 0.5 * tol, lo, hi, depth + 1)
}

/// Surface area `ω_d` of the unit sphere in `R^d`.
pub fn unit_sphere_area(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    2.0 * PI.powf(h) / libm::tgamma(h)
}

/// Volume of the ball of radius `r` in `R^d`.
pub fn ball_volume(d: usize, r: f64) -> f64 {
    unit_sphere_area(d) / d as f64 * r.powi(d as i32)
}
