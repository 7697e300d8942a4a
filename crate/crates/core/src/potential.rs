//! Potential fields and the generators for the worked examples.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::quadrature::{adaptive, ball_volume, unit_sphere_area};

/// Shared one-dimensional function handle.
pub type Fn1d = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

type FnNd = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Evaluation handle for a potential `V: R^d -> R`.
///
/// Cloning is cheap; the handle is pure and can be evaluated from many
/// threads at once.
#[derive(Clone)]
pub struct PotentialField {
    dim: usize,
    radial: bool,
    description: String,
    eval: FnNd,
}

impl fmt::Debug for PotentialField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PotentialField")
            .field("dim", &self.dim)
            .field("radial", &self.radial)
            .field("description", &self.description)
            .finish()
    }
}

impl PotentialField {
    pub fn new(dim: usize, description: impl Into<String>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { dim, radial: false, description: description.into(), eval: Arc::new(f) }
    }

    /// `V(x) = g(|x|)`.
    pub fn radial(dim: usize, description: impl Into<String>, g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { dim, radial: true, description: description.into(), eval: Arc::new(move |x: &[f64]| g(norm(x))) }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        let mut v = Self::new(dim, format!("constant {c}"), move |_| c);
        v.radial = true;
        v
    }

    /// `V(x) = |x|^2`.
    pub fn quadratic(dim: usize) -> Self {
        Self::radial(dim, "|x|^2", |r| r * r)
    }

    /// `V(x) = sqrt(|x|)`.
    pub fn sqrt_norm(dim: usize) -> Self {
        Self::radial(dim, "sqrt|x|", f64::sqrt)
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// True when `V` depends on `|x|` only.
    pub fn is_radial(&self) -> bool {
        self.radial
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    /// `alpha · V`.
    pub fn scaled(&self, alpha: f64) -> Self {
        let f = self.eval.clone();
        Self {
            dim: self.dim,
            radial: self.radial,
            description: format!("{alpha} * ({})", self.description),
            eval: Arc::new(move |x: &[f64]| alpha * f(x)),
        }
    }

    /// `V + c`.
    pub fn shifted(&self, c: f64) -> Self {
        let f = self.eval.clone();
        Self {
            dim: self.dim,
            radial: self.radial,
            description: format!("({}) + {c}", self.description),
            eval: Arc::new(move |x: &[f64]| f(x) + c),
        }
    }

    /// Pointwise sum of two fields of the same dimension.
    pub fn add(&self, other: &PotentialField) -> Result<Self> {
        if self.dim != other.dim {
            return Err(invalid("cannot add fields of different dimensions"));
        }
        let (f, g) = (self.eval.clone(), other.eval.clone());
        Ok(Self {
            dim: self.dim,
            radial: self.radial && other.radial,
            description: format!("({}) + ({})", self.description, other.description),
            eval: Arc::new(move |x: &[f64]| f(x) + g(x)),
        })
    }

    /// `x ↦ V(x + shift)`; used to recenter a field on a ball.
    pub fn translated(&self, shift: Vec<f64>) -> Self {
        let f = self.eval.clone();
        Self {
            dim: self.dim,
            radial: false,
            description: format!("({}) shifted", self.description),
            eval: Arc::new(move |x: &[f64]| {
                let y: Vec<f64> = x.iter().zip(&shift).map(|(a, b)| a + b).collect();
                f(&y)
            }),
        }
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `(V₊, V₋)` with `V₊ = max(V, 0)` and `V₋ = max(-V, 0)`.
pub fn positive_negative_parts(v: &PotentialField) -> (PotentialField, PotentialField) {
    let f = v.eval.clone();
    let g = v.eval.clone();
    let plus = PotentialField {
        dim: v.dim,
        radial: v.radial,
        description: format!("({})_+", v.description),
        eval: Arc::new(move |x: &[f64]| f(x).max(0.0)),
    };
    let minus = PotentialField {
        dim: v.dim,
        radial: v.radial,
        description: format!("({})_-", v.description),
        eval: Arc::new(move |x: &[f64]| (-g(x)).max(0.0)),
    };
    (plus, minus)
}

/// `sign(a)|a|^alpha`.
pub fn signed_pow(a: f64, alpha: f64) -> f64 {
    a.signum() * a.abs().powf(alpha)
}

/// Lattice point `ℓ` of the half-open cube `Q_{1/2}(ℓ)` containing `x`.
fn cube_index(x: &[f64]) -> Vec<i64> {
    x.iter().map(|v| (v + 0.5).floor() as i64).collect()
}

fn linf(l: &[i64]) -> usize {
    l.iter().map(|v| v.unsigned_abs() as usize).max().unwrap_or(0)
}

/// Cumulative profile of the first example on `[0, r0]`.
///
/// `S_n` is linear with slope `-n²/r0` up to `r0/n` and then rises linearly
/// back to zero at `r0`, so `S_n(r0/n) = -n` and `S_n(r0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SawProfile {
    pub r0: f64,
    pub n: usize,
}

impl SawProfile {
    pub fn rise_slope(&self) -> f64 {
        let n = self.n as f64;
        n * n / (self.r0 * (n - 1.0))
    }

    pub fn value(&self, x: f64) -> f64 {
        let n = self.n as f64;
        let knee = self.r0 / n;
        if x < knee {
            -n * n / self.r0 * x
        } else {
            -self.rise_slope() * (self.r0 - x)
        }
    }

    pub fn slope(&self, x: f64) -> f64 {
        let n = self.n as f64;
        if x < self.r0 / n {
            -n * n / self.r0
        } else {
            self.rise_slope()
        }
    }
}

fn tile_radial_profiles(
    dim: usize,
    r0: f64,
    description: String,
    slope: impl Fn(usize, f64) -> f64 + Send + Sync + 'static,
) -> PotentialField {
    let omega = unit_sphere_area(dim);
    PotentialField::new(dim, description, move |x: &[f64]| {
        let l = cube_index(x);
        let n = linf(&l).max(2);
        let rho = x.iter().zip(&l).map(|(a, b)| (a - *b as f64).powi(2)).sum::<f64>().sqrt();
        // The density is singular like rho^{1-d} at the center; clamp so
        // evaluation stays finite.
        let rho = rho.clamp(1e-9 * r0, r0);
        slope(n, rho) / (omega * rho.powi(dim as i32 - 1))
    })
}

/// Potential of the first example: on each cube `Q_{1/2}(ℓ)` it is the radial
/// density whose ball integrals are `S_n`, `n = max(|ℓ|_∞, 2)`, and the
/// constant `Ṽ_n(r0)` outside `B_{r0}(ℓ)`.
pub fn example1_potential(dim: usize, r0: f64) -> Result<PotentialField> {
    if dim < 3 {
        return Err(invalid("the first example needs d >= 3"));
    }
    if !(r0 > 0.0 && r0 < 0.5) {
        return Err(invalid(format!("the first example needs 0 < r0 < 1/2, got {r0}")));
    }
    Ok(tile_radial_profiles(dim, r0, format!("example1(r0={r0})"), move |n, rho| SawProfile { r0, n }.slope(rho)))
}

/// Kink radius `r0/n` of the first example around the lattice point nearest
/// to `center`.
pub fn example1_breaks(center: &[f64], r0: f64) -> Vec<f64> {
    let n = linf(&cube_index(center)).max(2);
    vec![r0 / n as f64, r0]
}

/// Tent function: `3x` on `[0,1/3)`, `1` on `[1/3,2/3)`, `3(1-x)` on
/// `[2/3,1]`, zero elsewhere.
pub fn tent(x: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) {
        0.0
    } else if x < 1.0 / 3.0 {
        3.0 * x
    } else if x < 2.0 / 3.0 {
        1.0
    } else {
        3.0 * (1.0 - x)
    }
}

fn tent_slope(x: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) {
        0.0
    } else if x < 1.0 / 3.0 {
        3.0
    } else if x < 2.0 / 3.0 {
        0.0
    } else {
        -3.0
    }
}

/// Tent train `U(x) = Σ_{k>=1} T(x - k + 1/3)`.
pub fn tent_train(x: f64) -> f64 {
    tent_train_terms(x, tent)
}

fn tent_train_terms(x: f64, f: fn(f64) -> f64) -> f64 {
    // Only the terms with 0 <= x - k + 1/3 <= 1 can be nonzero.
    let lo = (x - 2.0 / 3.0).floor().max(1.0) as i64;
    let hi = (x + 1.0 / 3.0).ceil() as i64;
    (lo..=hi).map(|k| f(x - k as f64 + 1.0 / 3.0)).sum()
}

/// Candidate potential built from `S_n(x) = A_n U(n x / r0)` and tiled like
/// the first example. Its spectral classification is not asserted.
pub fn remark_candidate_potential(dim: usize, r0: f64, amplitude: Fn1d) -> Result<PotentialField> {
    if dim < 3 {
        return Err(invalid("the candidate construction needs d >= 3"));
    }
    if !(r0 > 0.0 && r0 < 0.5) {
        return Err(invalid(format!("the candidate construction needs 0 < r0 < 1/2, got {r0}")));
    }
    Ok(tile_radial_profiles(dim, r0, format!("tent-train candidate(r0={r0})"), move |n, rho| {
        let nf = n as f64;
        amplitude(nf) * nf / r0 * tent_train_terms(nf * rho / r0, tent_slope)
    }))
}

/// How the lengths of the two negative sub-intervals of each block are fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Example2Lengths {
    /// `l_{2k} - l_{2k-1}` uses `α_k` and `m_{k+1} - l_{2k}` uses `α_{k+1}`,
    /// which is what the eigenfunction branches need to join smoothly.
    #[default]
    Matched,
    /// Both lengths use `α_k`.
    AsPrinted,
}

/// Interval structure of the one-dimensional second example.
#[derive(Debug, Clone, PartialEq)]
pub struct Example2Layout {
    pub a: f64,
    /// `α_1, α_2, ...`
    pub alpha: Vec<f64>,
    /// `m_1, ..., m_K` with `m_1 = 0`.
    pub m: Vec<f64>,
    /// `l_1, l_3, ...`: `l_{2k-1} = m_k + a`.
    pub l_odd: Vec<f64>,
    /// `l_2, l_4, ...`
    pub l_even: Vec<f64>,
    pub lengths: Example2Lengths,
}

/// `(π/2 - arctan(tanh(√α a))) / √α`.
pub fn example2_well_length(alpha: f64, a: f64) -> f64 {
    let s = alpha.sqrt();
    (std::f64::consts::FRAC_PI_2 - (s * a).tanh().atan()) / s
}

impl Example2Layout {
    pub fn new(a: f64, alpha: Vec<f64>, lengths: Example2Lengths) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(invalid("interval length a must be positive"));
        }
        if alpha.len() < 2 {
            return Err(invalid("need at least two values of alpha"));
        }
        if alpha[0] <= 0.0 || alpha.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("alpha must be positive and strictly increasing"));
        }
        let ratio: Vec<f64> = alpha.windows(2).map(|w| w[0] / (w[0].sqrt() + w[1].sqrt())).collect();
        if ratio.windows(2).any(|w| w[1] < w[0]) {
            return Err(invalid("alpha_k / (sqrt(alpha_k) + sqrt(alpha_k+1)) must be nondecreasing"));
        }
        let blocks = alpha.len() - 1;
        let mut m = vec![0.0];
        let mut l_odd = Vec::with_capacity(blocks);
        let mut l_even = Vec::with_capacity(blocks);
        for k in 0..blocks {
            let lo = m[k] + a;
            let le = lo + example2_well_length(alpha[k], a);
            let next = match lengths {
                Example2Lengths::Matched => example2_well_length(alpha[k + 1], a),
                Example2Lengths::AsPrinted => example2_well_length(alpha[k], a),
            };
            l_odd.push(lo);
            l_even.push(le);
            m.push(le + next);
        }
        Ok(Self { a, alpha, m, l_odd, l_even, lengths })
    }

    /// Number of complete blocks `(m_k, m_{k+1}]`.
    pub fn blocks(&self) -> usize {
        self.l_odd.len()
    }

    /// Number of eigenfunction windows; window `k` needs block `k+1`'s
    /// positive part.
    pub fn windows(&self) -> usize {
        self.blocks()
    }

    /// `(c_k, c_{k+1}) = (m_k, m_{k+1} + a)`, for `k = 1..=windows()`.
    pub fn window(&self, k: usize) -> Result<(f64, f64)> {
        if k == 0 || k > self.windows() {
            return Err(invalid(format!("window index {k} outside 1..={}", self.windows())));
        }
        Ok((self.m[k - 1], self.m[k] + self.a))
    }

    /// Center of the negative part `(l_{2k-1}, m_{k+1}]` of block `k`.
    pub fn well_center(&self, k: usize) -> Result<f64> {
        if k == 0 || k > self.blocks() {
            return Err(invalid(format!("block index {k} outside 1..={}", self.blocks())));
        }
        Ok(0.5 * (self.l_odd[k - 1] + self.m[k]))
    }

    /// The one-dimensional potential, mirrored to `x < 0` and continued by
    /// the last `α` beyond the final block.
    pub fn value(&self, x: f64) -> f64 {
        let x = x.abs();
        let last = *self.m.last().unwrap();
        if x > last {
            return *self.alpha.last().unwrap();
        }
        // Block k (0-based) is (m[k], m[k+1]].
        let k = self.m.partition_point(|&mk| mk < x).saturating_sub(1);
        if x <= self.l_odd[k] {
            self.alpha[k]
        } else if x <= self.l_even[k] {
            -self.alpha[k]
        } else {
            -self.alpha[k + 1]
        }
    }

    /// Eigenfunction `φ_k` on the window `(c_k, c_{k+1}]`, zero outside.
    pub fn eigenfunction(&self, k: usize) -> Result<Fn1d> {
        let (ck, ck1) = self.window(k)?;
        let a = self.a;
        let (s0, s1) = (self.alpha[k - 1].sqrt(), self.alpha[k].sqrt());
        let (lo, le, mk1) = (self.l_odd[k - 1], self.l_even[k - 1], self.m[k]);
        let n0 = ((s0 * a).sinh().powi(2) + (s0 * a).cosh().powi(2)).sqrt();
        let n1 = ((s1 * a).sinh().powi(2) + (s1 * a).cosh().powi(2)).sqrt();
        let (t0, t1) = ((s0 * a).tanh().atan(), (s1 * a).tanh().atan());
        Ok(Arc::new(move |x: f64| {
            if x <= ck || x > ck1 {
                0.0
            } else if x <= lo {
                (s0 * (x - ck)).sinh() / n0
            } else if x <= le {
                (s0 * (x - ck - a) + t0).sin()
            } else if x <= mk1 {
                (s1 * (ck1 - a - x) + t1).sin()
            } else {
                (s1 * (ck1 - x)).sinh() / n1
            }
        }))
    }
}

/// Second example: the one-dimensional potential, its separated-variables
/// extension `W(x) = V(x_1) + Σ_{j>=2} U(x_j)` and the layout.
pub fn example2_potential(
    dim: usize,
    a: f64,
    alpha: Vec<f64>,
    u: Option<Fn1d>,
    lengths: Example2Lengths,
) -> Result<(Fn1d, PotentialField, Arc<Example2Layout>)> {
    if dim == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    let layout = Arc::new(Example2Layout::new(a, alpha, lengths)?);
    let u = u.unwrap_or_else(|| Arc::new(|x: f64| x * x + 1.0));
    let lay = layout.clone();
    let v1d: Fn1d = Arc::new(move |x| lay.value(x));
    let v = v1d.clone();
    let field = PotentialField::new(dim, format!("example2(a={a})"), move |x: &[f64]| {
        v(x[0]) + x[1..].iter().map(|&t| u(t)).sum::<f64>()
    });
    Ok((v1d, field, layout))
}

/// `φ_k` from the layout.
pub fn example2_eigenfunction(layout: &Example2Layout, k: usize) -> Result<Fn1d> {
    layout.eigenfunction(k)
}

/// Amplitude rule `ℓ ↦ A_ℓ` of the third example.
#[derive(Clone, Default)]
pub enum Amplitude {
    /// `A_ℓ = E_{ℓ,r0}(√|x|) · ρ0^{d-1}`.
    #[default]
    Standard,
    /// The standard amplitude times `|ℓ|^power`.
    Scaled {
        power: f64,
    },
    Custom(Arc<dyn Fn(&[i64]) -> f64 + Send + Sync>),
}

impl fmt::Debug for Amplitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Amplitude::Standard => write!(f, "Standard"),
            Amplitude::Scaled { power } => write!(f, "Scaled({power})"),
            Amplitude::Custom(_) => write!(f, "Custom"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Example3Params {
    pub r0: f64,
    pub rho0: f64,
    pub amplitude: Amplitude,
}

impl Default for Example3Params {
    fn default() -> Self {
        Self { r0: 0.9, rho0: 0.1, amplitude: Amplitude::Standard }
    }
}

impl Example3Params {
    pub fn validate(&self) -> Result<()> {
        let half_diag = 3f64.sqrt() / 2.0;
        if !(self.rho0 > 0.0 && self.rho0 < 1.0 - half_diag) {
            return Err(invalid(format!("rho0 must lie in (0, 1 - sqrt(3)/2), got {}", self.rho0)));
        }
        if !(self.r0 > half_diag) {
            return Err(invalid(format!("r0 must exceed sqrt(3)/2, got {}", self.r0)));
        }
        if self.r0 + self.rho0 > 1.0 + 1e-12 {
            return Err(invalid("r0 + rho0 must not exceed 1, otherwise neighbouring balls overlap the supports"));
        }
        Ok(())
    }

    /// Oscillation count `n_ℓ = floor(|ℓ|)`; the frequency is `2π n_ℓ / ρ0`.
    pub fn oscillations(l: &[i64]) -> usize {
        let n2: i64 = l.iter().map(|v| v * v).sum();
        (n2 as f64).sqrt().floor() as usize
    }

    pub fn amplitude(&self, l: &[i64]) -> f64 {
        let standard =
            || mean_sqrt_norm_on_ball(&l.iter().map(|&v| v as f64).collect::<Vec<_>>(), self.r0) * self.rho0.powi(2);
        match &self.amplitude {
            Amplitude::Standard => standard(),
            Amplitude::Scaled { power } => {
                let n = l.iter().map(|v| (v * v) as f64).sum::<f64>().sqrt();
                standard() * n.powf(*power)
            }
            Amplitude::Custom(f) => f(l),
        }
    }

    /// Profile `W̃^{(ℓ)}` for the given amplitude and oscillation count.
    pub fn profile(&self, amplitude: f64, n: usize) -> Fn1d {
        oscillating_profile(3, amplitude, n, self.rho0)
    }
}

/// `ρ ↦ A sign(sin(2π n ρ / ρ0)) / ρ^{d-1}` on `[ρ0/n, ρ0]`, zero elsewhere.
/// Integrates to zero against `ρ^{d-1}` over `[0, ρ0]`.
pub fn oscillating_profile(dim: usize, amplitude: f64, n: usize, rho0: f64) -> Fn1d {
    if n <= 1 {
        return Arc::new(|_| 0.0);
    }
    let psi = 2.0 * std::f64::consts::PI * n as f64 / rho0;
    let start = rho0 / n as f64;
    Arc::new(move |rho: f64| {
        if rho < start || rho > rho0 {
            0.0
        } else {
            // sign(sin) from the half-period index avoids roundoff at zeros.
            let half = (rho * psi / std::f64::consts::PI).floor() as i64;
            let s = if half % 2 == 0 { 1.0 } else { -1.0 };
            amplitude * s / rho.powi(dim as i32 - 1)
        }
    })
}

/// Breakpoints of [`oscillating_profile`]: the half periods `k ρ0 / (2n)`.
pub fn oscillating_breaks(n: usize, rho0: f64) -> Vec<f64> {
    if n <= 1 {
        return Vec::new();
    }
    (2..=2 * n).map(|k| k as f64 * rho0 / (2 * n) as f64).collect()
}

/// Area of the part of the sphere `|x| = t` inside `B_r(c)`, `|c| = dist`, in
/// three dimensions.
fn sphere_in_ball_area(t: f64, dist: f64, r: f64) -> f64 {
    if t + dist <= r {
        4.0 * std::f64::consts::PI * t * t
    } else if (t - dist).abs() >= r || dist == 0.0 {
        0.0
    } else {
        std::f64::consts::PI * t * (r * r - (t - dist).powi(2)) / dist
    }
}

/// Mean of `√|x|` over `B_r(c)` in three dimensions, reduced to a one
/// dimensional integral over `|x|`.
pub fn mean_sqrt_norm_on_ball(c: &[f64], r: f64) -> f64 {
    let dist = norm(c);
    let lo = (dist - r).max(0.0);
    let hi = dist + r;
    let f = |t: f64| t.sqrt() * sphere_in_ball_area(t, dist, r);
    let breaks = [(r - dist).abs()];
    adaptive(&f, lo, hi, &breaks, 1e-13) / ball_volume(3, r)
}

/// Third example: `V(x) = √|x| + W(x)` in three dimensions, with the radial
/// mean-zero oscillation `W̃^{(ℓ)}` around every lattice point.
pub fn example3_potential(p: &Example3Params) -> Result<PotentialField> {
    p.validate()?;
    let p = p.clone();
    let rho0 = p.rho0;
    Ok(PotentialField::new(3, format!("example3(r0={}, rho0={})", p.r0, rho0), move |x: &[f64]| {
        let v0 = norm(x).sqrt();
        let l: Vec<i64> = x.iter().map(|v| v.round() as i64).collect();
        let rho = x.iter().zip(&l).map(|(a, b)| (a - *b as f64).powi(2)).sum::<f64>().sqrt();
        if rho >= rho0 {
            return v0;
        }
        let n = Example3Params::oscillations(&l);
        if n <= 1 {
            return v0;
        }
        v0 + oscillating_profile(3, p.amplitude(&l), n, rho0)(rho)
    }))
}

/// The oscillating part `W` of the third example alone.
pub fn example3_oscillation(p: &Example3Params) -> Result<PotentialField> {
    let full = example3_potential(p)?;
    let v0 = PotentialField::sqrt_norm(3).scaled(-1.0);
    full.add(&v0)
}

/// Potential sampled on scattered nodes, evaluated by nearest-node lookup.
pub struct GridTable {
    dim: usize,
    points: Vec<f64>,
    values: Vec<f64>,
    lo: Vec<f64>,
    cell: f64,
    shape: Vec<usize>,
    buckets: Vec<Vec<u32>>,
}

impl GridTable {
    pub fn new(dim: usize, points: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.is_empty() || points.len() != dim * values.len() {
            return Err(invalid("grid table needs d coordinates per value and at least one node"));
        }
        let n = values.len();
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for p in points.chunks_exact(dim) {
            for k in 0..dim {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let extent = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max).max(1e-12);
        let cell = extent / (n as f64).powf(1.0 / dim as f64).max(1.0);
        let shape: Vec<usize> = lo.iter().zip(&hi).map(|(a, b)| ((b - a) / cell).floor() as usize + 1).collect();
        let mut buckets = vec![Vec::new(); shape.iter().product()];
        let mut table = Self { dim, points, values, lo, cell, shape, buckets: Vec::new() };
        for i in 0..n {
            let b = table.bucket_of(&table.points[i * dim..(i + 1) * dim]);
            buckets[table.flat(&b)].push(i as u32);
        }
        table.buckets = buckets;
        Ok(table)
    }

    fn bucket_of(&self, x: &[f64]) -> Vec<i64> {
        x.iter()
            .zip(&self.lo)
            .zip(&self.shape)
            .map(|((v, l), &s)| (((v - l) / self.cell).floor() as i64).clamp(0, s as i64 - 1))
            .collect()
    }

    fn flat(&self, b: &[i64]) -> usize {
        b.iter().zip(&self.shape).fold(0, |acc, (&i, &s)| acc * s + i as usize)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at the node nearest to `x`.
    pub fn nearest(&self, x: &[f64]) -> f64 {
        let center = self.bucket_of(x);
        let mut best = (f64::INFINITY, 0usize);
        let max_ring = *self.shape.iter().max().unwrap() as i64;
        for ring in 0..=max_ring {
            self.visit_ring(&center, ring, &mut |i| {
                let p = &self.points[i * self.dim..(i + 1) * self.dim];
                let d2: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                if d2 < best.0 || (d2 == best.0 && i < best.1) {
                    best = (d2, i);
                }
            });
            // Every point outside ring `k` is farther than k·cell from x's bucket.
            if best.0.is_finite() && best.0.sqrt() <= ring as f64 * self.cell {
                break;
            }
        }
        self.values[best.1]
    }

    fn visit_ring(&self, center: &[i64], ring: i64, f: &mut dyn FnMut(usize)) {
        let dim = self.dim;
        let side = 2 * ring + 1;
        let total = (side as usize).pow(dim as u32);
        let mut b = vec![0i64; dim];
        for flat in 0..total {
            let mut rem = flat as i64;
            let mut on_shell = false;
            let mut inside = true;
            for k in 0..dim {
                let off = rem % side - ring;
                rem /= side;
                on_shell |= off.abs() == ring;
                b[k] = center[k] + off;
                inside &= b[k] >= 0 && b[k] < self.shape[k] as i64;
            }
            if on_shell && inside {
                for &i in &self.buckets[self.flat(&b)] {
                    f(i as usize);
                }
            }
        }
    }
}

/// Parses a table with one node per line: `d` coordinates followed by the
/// value, separated by whitespace or commas. Blank lines and lines starting
/// with `#` are skipped.
pub fn parse_table(text: &str, dim: usize) -> Result<GridTable> {
    let mut points = Vec::new();
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let nums: Vec<f64> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })?;
        if nums.len() != dim + 1 {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("expected {} numbers, found {}", dim + 1, nums.len()),
            });
        }
        if nums.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse { line: i + 1, msg: "non-finite number".into() });
        }
        points.extend_from_slice(&nums[..dim]);
        values.push(nums[dim]);
    }
    GridTable::new(dim, points, values)
}

/// Loads a gridded potential from a text table.
pub fn load_table(path: &Path, dim: usize) -> Result<PotentialField> {
    let text = std::fs::read_to_string(path)?;
    let table = Arc::new(parse_table(&text, dim)?);
    Ok(PotentialField::new(dim, format!("table {}", path.display()), move |x: &[f64]| table.nearest(x)))
}
