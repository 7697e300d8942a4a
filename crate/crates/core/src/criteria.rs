//! Ball-by-ball checks of the sufficient and necessary conditions, each
//! reported as a series over the scanned centers with a trend.
//!
//! A verdict is evidence over the scanned range only: every condition is a
//! limit as the centers go to infinity.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::geometry::{
    make_grid, monte_carlo_grid, spherical_grid, triangle_grid, uniform_edges, Ball, Domain, QuadratureGrid,
};
use crate::potential::{Fn1d, PotentialField};
use crate::quadrature::ball_volume;
use crate::statistics::FieldSample;
use crate::transport::{d_bound, radial_neumann_solve};
use crate::trend::{classify_points, SeriesPoint, Trend, TrendRule, TrendSummary};

/// Disclaimer attached to every verdict.
pub const EVIDENCE_NOTE: &str = "trend evidence at the scanned range, not a proof";

/// Sobolev and isocapacity constants of `R^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobolevConstants {
    pub d: usize,
    /// `C(d) = √(1/(π d (d-2))) (Γ(d)/Γ(d/2))^{1/d}`.
    pub c: f64,
    /// `K(d) = 1/C(d)²`.
    pub k: f64,
    /// `c_d = (d (d-2) mes_d(B_1)^{2/d})^{-d/(d-2)}`.
    pub c_iso: f64,
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function by the Lanczos series (g = 7, nine terms) with the
/// reflection formula below 1/2.
pub fn lanczos_gamma(x: f64) -> f64 {
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return pi / ((pi * x).sin() * lanczos_gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}

fn sobolev_c_with(d: usize, gamma: impl Fn(f64) -> f64) -> f64 {
    let df = d as f64;
    (1.0 / (std::f64::consts::PI * df * (df - 2.0))).sqrt() * (gamma(df) / gamma(df / 2.0)).powf(1.0 / df)
}

/// `C(d)` with the Lanczos Gamma.
pub fn sobolev_c_lanczos(d: usize) -> f64 {
    sobolev_c_with(d, lanczos_gamma)
}

pub fn sobolev_constants(d: usize) -> Result<SobolevConstants> {
    if d < 3 {
        return Err(invalid(format!("Sobolev constants need d >= 3, got {d}")));
    }
    let c = sobolev_c_with(d, libm::tgamma);
    let df = d as f64;
    let c_iso = (df * (df - 2.0) * ball_volume(d, 1.0).powf(2.0 / df)).powf(-df / (df - 2.0));
    Ok(SobolevConstants { d, c, k: 1.0 / (c * c), c_iso })
}

/// Quadrature used on every scanned ball.
#[derive(Debug, Clone, PartialEq)]
pub enum BallRule {
    /// Masked lattice of spacing `h`.
    Lattice { h: f64 },
    /// Product rule in spherical coordinates (d <= 3) with `shells` uniform
    /// shells plus any breakpoints supplied with the context.
    Spherical { shells: usize, radial_points: usize, n_polar: usize, n_azimuth: usize },
    /// Seeded Monte Carlo; center `k` uses seed `seed + k`.
    MonteCarlo { samples: usize, seed: u64 },
}

impl Default for BallRule {
    fn default() -> Self {
        BallRule::Spherical { shells: 32, radial_points: 4, n_polar: 16, n_azimuth: 32 }
    }
}

impl BallRule {
    pub fn describe(&self) -> String {
        match self {
            BallRule::Lattice { h } => format!("lattice h={h}"),
            BallRule::Spherical { shells, radial_points, n_polar, n_azimuth } => {
                format!("spherical shells={shells} radial={radial_points} polar={n_polar} azimuth={n_azimuth}")
            }
            BallRule::MonteCarlo { samples, seed } => format!("monte-carlo n={samples} seed={seed}"),
        }
    }

    /// Grid on `ball`; `breaks` are radii (from the ball center) where the
    /// field has kinks, inserted as extra shell edges.
    pub fn grid(&self, ball: &Ball, breaks: &[f64], index: usize) -> Result<QuadratureGrid> {
        match *self {
            BallRule::Lattice { h } => make_grid(&Domain::Ball(ball.clone()), h),
            BallRule::Spherical { shells, radial_points, n_polar, n_azimuth } => {
                let edges = merge_edges(&uniform_edges(ball.radius(), shells.max(1)), breaks, ball.radius());
                spherical_grid(ball, &edges, radial_points, n_polar, n_azimuth)
            }
            BallRule::MonteCarlo { samples, seed } => {
                monte_carlo_grid(&Domain::Ball(ball.clone()), samples, seed.wrapping_add(index as u64))
            }
        }
    }
}

fn merge_edges(edges: &[f64], breaks: &[f64], r: f64) -> Vec<f64> {
    let mut all: Vec<f64> = edges.iter().chain(breaks.iter().filter(|&&b| b > 0.0 && b < r)).copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * r);
    all
}

/// Radial breakpoints of the field around a center, for shell placement.
pub type BreakFn = Arc<dyn Fn(&[f64], f64) -> Vec<f64> + Send + Sync>;

/// Shared settings of the checks.
#[derive(Clone, Default)]
pub struct CheckContext {
    pub rule: BallRule,
    pub breaks: Option<BreakFn>,
    pub trend: TrendRule,
    /// Fixed `γ` replacing the default `γ(r) = min(r^{d/(d-2)}, 0.99)`.
    pub gamma: Option<f64>,
}

impl std::fmt::Debug for CheckContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CheckContext")
            .field("rule", &self.rule)
            .field("breaks", &self.breaks.is_some())
            .field("trend", &self.trend)
            .field("gamma", &self.gamma)
            .finish()
    }
}

impl CheckContext {
    pub fn gamma(&self, r: f64, d: usize) -> f64 {
        match self.gamma {
            Some(g) => g,
            None => default_gamma(r, d),
        }
    }

    fn sample(&self, v: &PotentialField, center: &[f64], r: f64, index: usize) -> Result<FieldSample> {
        let ball = Ball::new(center.to_vec(), r)?;
        let breaks = self.breaks.as_ref().map(|f| f(center, r)).unwrap_or_default();
        let grid = self.rule.grid(&ball, &breaks, index)?;
        FieldSample::from_values(grid.sample(|x| v.eval(x)), grid.weights().to_vec())
    }

    /// Evaluates `f` on the sample of every ball, in parallel, keeping order.
    fn series(
        &self,
        v: &PotentialField,
        centers: &[Vec<f64>],
        r: f64,
        f: impl Fn(&FieldSample) -> Result<f64> + Sync,
    ) -> Vec<SeriesPoint> {
        centers
            .par_iter()
            .enumerate()
            .map(|(k, c)| match self.sample(v, c, r, k).and_then(|s| f(&s)) {
                Ok(x) => SeriesPoint::ok(c.clone(), x),
                Err(e) => SeriesPoint::failed(c.clone(), e),
            })
            .collect()
    }
}

/// `γ(r) = r^{d/(d-2)}` clipped to `(0, 0.99]`.
pub fn default_gamma(r: f64, d: usize) -> f64 {
    let df = d as f64;
    r.powf(df / (df - 2.0)).clamp(f64::MIN_POSITIVE, 0.99)
}

/// One criterion evaluated along a series of centers at one radius.
#[derive(Debug, Clone)]
pub struct CriterionVerdict {
    pub name: String,
    pub radius: f64,
    pub points: Vec<SeriesPoint>,
    /// Present for threshold criteria: the tail must stay below it.
    pub threshold: Option<f64>,
    pub trend: Trend,
    pub summary: TrendSummary,
    pub caveats: Vec<String>,
    pub resolution: String,
    /// Nominal accuracy of each value.
    pub tolerance: f64,
}

impl CriterionVerdict {
    fn build(name: &str, radius: f64, points: Vec<SeriesPoint>, ctx: &CheckContext, threshold: Option<f64>) -> Self {
        let summary = classify_points(&points, &ctx.trend);
        let trend = match threshold {
            Some(t) if summary.trend != Trend::Inconclusive => {
                if summary.tail_max >= t {
                    Trend::Violating
                } else {
                    Trend::Bounded
                }
            }
            _ => summary.trend,
        };
        let mut caveats = vec![EVIDENCE_NOTE.to_string()];
        let failed = points.iter().filter(|p| p.error.is_some()).count();
        if failed > 0 {
            caveats.push(format!("{failed} of {} centers failed and were left out of the trend", points.len()));
        }
        Self {
            name: name.to_string(),
            radius,
            points,
            threshold,
            trend,
            summary,
            caveats,
            resolution: ctx.rule.describe(),
            tolerance: tolerance_of(&ctx.rule),
        }
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    /// True when a threshold criterion stayed below its threshold.
    pub fn passes_threshold(&self) -> bool {
        self.threshold.is_some() && self.trend == Trend::Bounded
    }
}

fn tolerance_of(rule: &BallRule) -> f64 {
    match rule {
        BallRule::Lattice { h } => *h,
        BallRule::Spherical { shells, .. } => 1.0 / *shells as f64,
        BallRule::MonteCarlo { samples, .. } => 1.0 / (*samples as f64).sqrt(),
    }
}

fn has_negative(v: &PotentialField, centers: &[Vec<f64>], r: f64, ctx: &CheckContext) -> bool {
    centers
        .par_iter()
        .enumerate()
        .any(|(k, c)| ctx.sample(v, c, r, k).map(|s| s.values().iter().any(|x| *x < 0.0)).unwrap_or(false))
}

fn positive_part(s: &FieldSample) -> Result<FieldSample> {
    FieldSample::from_values(s.values().iter().map(|v| v.max(0.0)).collect(), s.weights().to_vec())
}

/// `(∫_B V₋^{d/2})^{2/d}` per center against `K(d)`.
pub fn check_negative_part(
    v: &PotentialField,
    centers: &[Vec<f64>],
    r0: f64,
    ctx: &CheckContext,
) -> Result<CriterionVerdict> {
    let d = v.dim();
    let consts = sobolev_constants(d)?;
    let half = d as f64 / 2.0;
    let points = ctx.series(v, centers, r0, |s| {
        let neg: f64 = s.values().iter().zip(s.weights()).map(|(x, w)| (-x).max(0.0).powf(half) * w).sum();
        Ok(neg.powf(1.0 / half))
    });
    Ok(CriterionVerdict::build("negative-part", r0, points, ctx, Some(consts.k)))
}

/// `I_y(N) = ∫_B (V + N)₋^{d/2}` for every center and every `N`.
#[derive(Debug, Clone)]
pub struct UniformTail {
    pub n_list: Vec<f64>,
    /// `values[j][k] = I_{y_k}(N_j)`.
    pub values: Vec<Vec<f64>>,
    /// `sup_y I_y(N_j)`.
    pub sups: Vec<f64>,
    /// `K(d)^{d/2}`.
    pub threshold: f64,
    /// First `N` whose supremum is below the threshold.
    pub first_passing: Option<f64>,
    /// Series at the first passing `N`, or at the largest `N` otherwise.
    pub verdict: CriterionVerdict,
}

pub fn check_uniform_tail(
    v: &PotentialField,
    centers: &[Vec<f64>],
    r0: f64,
    n_list: &[f64],
    ctx: &CheckContext,
) -> Result<UniformTail> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("N list must be nonempty and strictly increasing"));
    }
    let d = v.dim();
    let half = d as f64 / 2.0;
    let threshold = sobolev_constants(d)?.k.powf(half);
    let samples: Vec<Result<FieldSample>> =
        centers.par_iter().enumerate().map(|(k, c)| ctx.sample(v, c, r0, k)).collect();
    let mut values = Vec::with_capacity(n_list.len());
    let mut series = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let row: Vec<SeriesPoint> = samples
            .iter()
            .zip(centers)
            .map(|(s, c)| match s {
                Ok(s) => {
                    let i = s.values().iter().zip(s.weights()).map(|(x, w)| (-(x + n)).max(0.0).powf(half) * w).sum();
                    SeriesPoint::ok(c.clone(), i)
                }
                Err(e) => SeriesPoint::failed(c.clone(), e),
            })
            .collect();
        values.push(row.iter().map(|p| p.value).collect::<Vec<f64>>());
        series.push(row);
    }
    let sups: Vec<f64> =
        values.iter().map(|row| row.iter().copied().filter(|x| x.is_finite()).fold(0.0, f64::max)).collect();
    let pass = sups.iter().position(|s| *s < threshold);
    let pick = pass.unwrap_or(n_list.len() - 1);
    let mut verdict = CriterionVerdict::build("uniform-tail", r0, series.swap_remove(pick), ctx, Some(threshold));
    verdict.trend = if pass.is_some() { Trend::Bounded } else { Trend::Violating };
    verdict.caveats.push(format!("series shown at N = {}", n_list[pick]));
    Ok(UniformTail {
        n_list: n_list.to_vec(),
        values,
        sups,
        threshold,
        first_passing: pass.map(|i| n_list[i]),
        verdict,
    })
}

fn caveat_if_negative(verdict: &mut CriterionVerdict, negative: bool) {
    if negative {
        verdict.caveats.push("V takes negative values on the scanned balls; evaluated on its positive part".into());
    }
}

/// `V₊★(γ(r) mes(B_r), y, r)` for every radius.
pub fn check_rearrangement(
    v: &PotentialField,
    centers: &[Vec<f64>],
    r_list: &[f64],
    ctx: &CheckContext,
) -> Result<Vec<CriterionVerdict>> {
    let d = v.dim();
    r_list
        .iter()
        .map(|&r| {
            let gamma = ctx.gamma(r, d);
            let points = ctx.series(v, centers, r, |s| {
                let p = positive_part(s)?;
                p.rearrangement(gamma * p.measure())
            });
            let mut out = CriterionVerdict::build("rearrangement", r, points, ctx, None);
            out.caveats.push(format!("gamma = {gamma}"));
            caveat_if_negative(&mut out, has_negative(v, centers, r, ctx));
            Ok(out)
        })
        .collect()
}

/// `E_{y,r}(V₊) - √γ(r) Dev_{y,r}(V₊)` for every radius.
pub fn check_expectation_deviation(
    v: &PotentialField,
    centers: &[Vec<f64>],
    r_list: &[f64],
    ctx: &CheckContext,
) -> Result<Vec<CriterionVerdict>> {
    let d = v.dim();
    r_list
        .iter()
        .map(|&r| {
            let gamma = ctx.gamma(r, d);
            let points = ctx.series(v, centers, r, |s| {
                let m = positive_part(s)?.moments();
                Ok(m.expectation - gamma.sqrt() * m.deviation)
            });
            let mut out = CriterionVerdict::build("expectation-deviation", r, points, ctx, None);
            out.caveats.push(format!("gamma = {gamma}"));
            caveat_if_negative(&mut out, has_negative(v, centers, r, ctx));
            Ok(out)
        })
        .collect()
}

/// How the trimmed integral treats negative values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrimMode {
    /// Trim the positive part `V₊`.
    #[default]
    PositivePart,
    /// Trim the signed field, removing only positive mass.
    Signed,
}

/// `inf_F ∫_{B \ F} V` over sets of measure `γ(r) mes(B)` for every radius.
pub fn check_trimmed_integral(
    v: &PotentialField,
    centers: &[Vec<f64>],
    r_list: &[f64],
    mode: TrimMode,
    ctx: &CheckContext,
) -> Result<Vec<CriterionVerdict>> {
    let d = v.dim();
    r_list
        .iter()
        .map(|&r| {
            let gamma = ctx.gamma(r, d);
            let points = ctx.series(v, centers, r, |s| match mode {
                TrimMode::PositivePart => {
                    let p = positive_part(s)?;
                    p.trimmed_integral(gamma * p.measure())
                }
                TrimMode::Signed => s.trimmed_integral_signed(gamma * s.measure()),
            });
            let mut out = CriterionVerdict::build("trimmed-integral", r, points, ctx, None);
            out.caveats.push(format!("gamma = {gamma}"));
            match mode {
                TrimMode::PositivePart => caveat_if_negative(&mut out, has_negative(v, centers, r, ctx)),
                TrimMode::Signed => out.caveats.push("signed field, only positive mass trimmed".into()),
            }
            Ok(out)
        })
        .collect()
}

/// `∫_{B_r(y)} V` for every radius.
pub fn necessary_molchanov(
    v: &PotentialField,
    centers: &[Vec<f64>],
    r_list: &[f64],
    ctx: &CheckContext,
) -> Result<Vec<CriterionVerdict>> {
    r_list
        .iter()
        .map(|&r| {
            let points = ctx.series(v, centers, r, |s| Ok(s.integral()));
            let mut out = CriterionVerdict::build("molchanov", r, points, ctx, None);
            if has_negative(v, centers, r, ctx) {
                out.caveats.push("necessity holds for V >= 0; V takes negative values here".into());
            }
            Ok(out)
        })
        .collect()
}

/// Radial source term of the transport check: `W̃` on `[0, r0]` and its
/// breakpoints, for the part of `V` that is radial around the center.
pub type RadialPart = Arc<dyn Fn(&[f64]) -> Option<(Fn1d, Vec<f64>)> + Send + Sync>;

/// How `W^{(y)} = V - E_{y,r0}(V)` is handed to the transport solver.
#[derive(Clone)]
pub enum TransportSource {
    /// Whole source on a cell grid of spacing `h`.
    Grid { h: f64 },
    /// `V = smooth + radial`, where `radial` is mean zero on every ball and
    /// radial around its center. The smooth part goes on the grid, the
    /// radial part is solved in closed form; the estimate is the sum of the
    /// two norms, since the two fields add to a feasible field.
    Split { h: f64, smooth: PotentialField, radial: RadialPart },
}

impl std::fmt::Debug for TransportSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TransportSource::Grid { h } => write!(f, "Grid {{ h: {h} }}"),
            TransportSource::Split { h, smooth, .. } => {
                write!(f, "Split {{ h: {h}, smooth: {} }}", smooth.description())
            }
        }
    }
}

impl TransportSource {
    fn h(&self) -> f64 {
        match self {
            TransportSource::Grid { h } | TransportSource::Split { h, .. } => *h,
        }
    }
}

/// What the transport check supports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportEvidence {
    /// Bound satisfied and `E` bounded below.
    SemiBounded,
    /// Bound satisfied and `E` diverging.
    Discrete,
    Inconclusive,
}

impl TransportEvidence {
    pub fn as_str(&self) -> &'static str {
        match self {
            TransportEvidence::SemiBounded => "semi-bounded",
            TransportEvidence::Discrete => "discrete-and-semi-bounded",
            TransportEvidence::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TransportVerdict {
    /// Upper estimates of `D_d(W^{(y)}, y, r0)` against `1/(2C(d))`.
    pub bound: CriterionVerdict,
    /// `E_{y,r0}(V)`.
    pub expectation: CriterionVerdict,
    pub evidence: TransportEvidence,
}

/// Transport bound of `W^{(y)} = V - E_{y,r0}(V)` on every ball, with the
/// expectation series.
pub fn check_transport(
    v: &PotentialField,
    centers: &[Vec<f64>],
    r0: f64,
    source: &TransportSource,
    ctx: &CheckContext,
) -> Result<TransportVerdict> {
    let d = v.dim();
    let limit = 1.0 / (2.0 * sobolev_constants(d)?.c);
    let h = source.h();
    let solved: Vec<(SeriesPoint, bool)> = centers
        .par_iter()
        .map(|c| {
            let run = || -> Result<(f64, bool)> {
                let dom = Domain::Ball(Ball::new(c.clone(), r0)?);
                match source {
                    TransportSource::Grid { h } => {
                        let est = d_bound(&|x: &[f64]| v.eval(x), &dom, *h, true)?;
                        Ok((est.value, est.converged))
                    }
                    TransportSource::Split { h, smooth, radial } => {
                        let est = d_bound(&|x: &[f64]| smooth.eval(x), &dom, *h, true)?;
                        let radial_part = match radial(c) {
                            Some((w, breaks)) => radial_neumann_solve(&w, r0, d, &breaks, 400)?.bound,
                            None => 0.0,
                        };
                        Ok((est.value + radial_part, est.converged))
                    }
                }
            };
            match run() {
                Ok((x, conv)) => (SeriesPoint::ok(c.clone(), x), conv),
                Err(e) => (SeriesPoint::failed(c.clone(), e), true),
            }
        })
        .collect();
    let stalled = solved.iter().filter(|(_, conv)| !conv).count();
    let points: Vec<SeriesPoint> = solved.into_iter().map(|(p, _)| p).collect();
    let mut bound = CriterionVerdict::build("transport", r0, points, ctx, Some(limit));
    bound.resolution = format!("{source:?}");
    bound.tolerance = h;
    bound.caveats.push("values are upper estimates of the transport bound (no-flux minimizer)".into());
    if stalled > 0 {
        bound.caveats.push(format!(
            "{stalled} of {} minimizer solves hit the iteration cap before the residual test passed",
            centers.len()
        ));
    }
    let e_points = ctx.series(v, centers, r0, |s| Ok(s.integral() / s.measure()));
    let expectation = CriterionVerdict::build("expectation", r0, e_points, ctx, None);
    let evidence = if bound.trend != Trend::Bounded {
        TransportEvidence::Inconclusive
    } else {
        match expectation.trend {
            Trend::Diverging => TransportEvidence::Discrete,
            Trend::Bounded => TransportEvidence::SemiBounded,
            _ => TransportEvidence::Inconclusive,
        }
    };
    Ok(TransportVerdict { bound, expectation, evidence })
}

/// `W_y(t) = ∫_{B_t(y)} V` tabulated at increasing radii.
#[derive(Debug, Clone)]
pub struct BallIntegralProfile {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
}

impl BallIntegralProfile {
    /// Linear interpolation between tabulated radii.
    pub fn at(&self, t: f64) -> f64 {
        let k = self.radii.partition_point(|&x| x < t);
        if k == 0 {
            return self.values[0];
        }
        if k >= self.radii.len() {
            return *self.values.last().unwrap();
        }
        let (a, b) = (self.radii[k - 1], self.radii[k]);
        let (fa, fb) = (self.values[k - 1], self.values[k]);
        fa + (fb - fa) * (t - a) / (b - a)
    }
}

/// Ball integrals around `y` for `t` in `[0, r]`, exact at shell edges.
///
/// For `d <= 3` a spherical rule with `shells` uniform shells (plus
/// `breaks`) is used; otherwise node distances on a lattice of spacing
/// `r / shells` are sorted.
pub fn ball_integral_profile(
    v: &PotentialField,
    y: &[f64],
    r: f64,
    shells: usize,
    breaks: &[f64],
) -> Result<BallIntegralProfile> {
    let ball = Ball::new(y.to_vec(), r)?;
    let d = ball.dim();
    if d <= 3 {
        let edges = merge_edges(&uniform_edges(r, shells.max(1)), breaks, r);
        let grid = spherical_grid(&ball, &edges, 4, 12, 24)?;
        let mut sums = vec![0.0; edges.len() - 1];
        let crate::geometry::GridLayout::Shells(layout) = grid.layout() else {
            return Err(invalid("spherical grid without shell layout"));
        };
        for ((x, w), s) in grid.nodes().zip(grid.weights()).zip(&layout.node_shell) {
            sums[*s as usize] += v.eval(x) * w;
        }
        let mut values = Vec::with_capacity(edges.len());
        let mut acc = 0.0;
        values.push(0.0);
        for s in sums {
            acc += s;
            values.push(acc);
        }
        Ok(BallIntegralProfile { radii: edges, values })
    } else {
        let grid = make_grid(&Domain::Ball(ball), r / shells as f64)?;
        let mut pairs: Vec<(f64, f64)> = grid
            .nodes()
            .zip(grid.weights())
            .map(|(x, w)| (x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt(), v.eval(x) * w))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut radii = vec![0.0];
        let mut values = vec![0.0];
        let mut acc = 0.0;
        for (dist, val) in pairs {
            acc += val;
            radii.push(dist);
            values.push(acc);
        }
        Ok(BallIntegralProfile { radii, values })
    }
}

/// `mes₁{t ∈ (0, r) : W_y(t) <= A}` on `m` midpoints.
pub fn sublevel_measure_1d(profile: &BallIntegralProfile, r: f64, a: f64, m: usize) -> f64 {
    let h = r / m as f64;
    (0..m).filter(|&i| profile.at((i as f64 + 0.5) * h) <= a).count() as f64 * h
}

/// `mes₂{(s, t) ∈ Δ_r : W_y(t) - W_y(s) <= A}` on the triangle grid.
pub fn sublevel_measure_2d(profile: &BallIntegralProfile, r: f64, a: f64, m: usize) -> Result<f64> {
    let tri = triangle_grid(r, m)?;
    Ok(tri
        .nodes
        .iter()
        .zip(&tri.weights)
        .filter(|((s, t), _)| profile.at(*t) - profile.at(*s) <= a)
        .fold(0.0, |acc, (_, w)| acc + w))
}

/// Both sublevel measures at one level `A`.
#[derive(Debug, Clone)]
pub struct MeasureSeries {
    pub a: f64,
    /// `mes₁` series (first claim).
    pub mes1: CriterionVerdict,
    /// `mes₂` series (second claim).
    pub mes2: CriterionVerdict,
}

/// Sublevel measures of `W_y` and `V_y(s, t) = W_y(t) - W_y(s)` for every
/// center and level. Declining series are necessary evidence; a series that
/// does not decline is evidence against the pair (discrete, bounded below).
pub fn necessary_measure_conditions(
    v: &PotentialField,
    centers: &[Vec<f64>],
    r: f64,
    a_list: &[f64],
    m: usize,
    ctx: &CheckContext,
) -> Result<Vec<MeasureSeries>> {
    if !(r > 0.0) || m < 2 || a_list.is_empty() {
        return Err(invalid("measure conditions need r > 0, m >= 2 and at least one level"));
    }
    let profiles: Vec<Result<BallIntegralProfile>> = centers
        .par_iter()
        .map(|c| {
            let breaks = ctx.breaks.as_ref().map(|f| f(c, r)).unwrap_or_default();
            ball_integral_profile(v, c, r, 4 * m, &breaks)
        })
        .collect();
    let mut out = Vec::with_capacity(a_list.len());
    for &a in a_list {
        let (p1, p2): (Vec<SeriesPoint>, Vec<SeriesPoint>) = profiles
            .iter()
            .zip(centers)
            .map(|(p, c)| match p {
                Ok(p) => (
                    SeriesPoint::ok(c.clone(), sublevel_measure_1d(p, r, a, m)),
                    match sublevel_measure_2d(p, r, a, m) {
                        Ok(x) => SeriesPoint::ok(c.clone(), x),
                        Err(e) => SeriesPoint::failed(c.clone(), e),
                    },
                ),
                Err(e) => (SeriesPoint::failed(c.clone(), e), SeriesPoint::failed(c.clone(), e)),
            })
            .unzip();
        let mut mes1 = CriterionVerdict::build("sublevel-mes1", r, p1, ctx, None);
        let mut mes2 = CriterionVerdict::build("sublevel-mes2", r, p2, ctx, None);
        for verdict in [&mut mes1, &mut mes2] {
            mark_decline(verdict);
            verdict.resolution = format!("shells={} m={m}", 4 * m);
            verdict.tolerance = r / m as f64;
            verdict.caveats.push(format!("A = {a}"));
        }
        out.push(MeasureSeries { a, mes1, mes2 });
    }
    Ok(out)
}

/// A measure series tending to zero declines in its head quartile too, so
/// the spread margin would hide it; here a tail lying wholly below the head
/// with a nonpositive slope counts as declining.
fn mark_decline(v: &mut CriterionVerdict) {
    let s = &v.summary;
    if v.trend == Trend::Bounded && s.tail_max < s.head_min && s.tail_slope <= 0.0 {
        v.trend = Trend::Decreasing;
        v.caveats.push("decline: tail quartile below head quartile, no margin".into());
    }
}

/// Index of the level with the largest final measure, the worst case
/// reported for the first and second claim respectively.
pub fn worst_levels(series: &[MeasureSeries]) -> (usize, usize) {
    let last =
        |v: &CriterionVerdict| v.points.iter().rev().find(|p| p.error.is_none()).map_or(f64::NEG_INFINITY, |p| p.value);
    let pick = |f: &dyn Fn(&MeasureSeries) -> f64| {
        (0..series.len()).fold(0, |best, i| if f(&series[i]) > f(&series[best]) { i } else { best })
    };
    (pick(&|s| last(&s.mes1)), pick(&|s| last(&s.mes2)))
}
