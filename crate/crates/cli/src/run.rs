//! Builds the potential and centers from a config and runs the selected
//! criteria. A failing criterion is recorded and the others still run.

use std::sync::Arc;

use discspec::criteria::{
    check_expectation_deviation, check_negative_part, check_rearrangement, check_transport, check_trimmed_integral,
    check_uniform_tail, necessary_measure_conditions, necessary_molchanov, sobolev_constants, BallRule, BreakFn,
    CheckContext, RadialPart, TransportSource, TrimMode,
};
use discspec::geometry::LatticeCovering;
use discspec::potential::{
    example1_breaks, example1_potential, example2_potential, example3_potential, load_table, oscillating_breaks,
    Example3Params,
};
use discspec::spectral::localization_scan;
use discspec::{PotentialField, TrendRule};

use crate::config::{validate, CenterMode, CriterionKind, PotentialSpec, RuleKind, ScanConfig, TrimSpec};
use crate::report::{Constants, Report};
use crate::CliError;

/// Potential, centers and the pieces the checks need.
pub struct Setup {
    pub field: PotentialField,
    pub centers: Vec<Vec<f64>>,
    pub breaks: Option<BreakFn>,
    pub transport: TransportSource,
    pub center_note: Option<String>,
}

fn core(e: discspec::Error) -> CliError {
    CliError::Core(e.to_string())
}

fn nearest_lattice(c: &[f64]) -> Vec<i64> {
    c.iter().map(|v| v.round() as i64).collect()
}

fn example3_parts(p: &Example3Params) -> (BreakFn, RadialPart) {
    let rho0 = p.rho0;
    let breaks: BreakFn = Arc::new(move |c: &[f64], _r: f64| {
        let n = Example3Params::oscillations(&nearest_lattice(c));
        let mut b = oscillating_breaks(n, rho0);
        if n > 1 {
            b.push(rho0 / n as f64);
        }
        b.push(rho0);
        b
    });
    let params = p.clone();
    let radial: RadialPart = Arc::new(move |c: &[f64]| {
        let l = nearest_lattice(c);
        let n = Example3Params::oscillations(&l);
        if n <= 1 {
            return None;
        }
        let mut b = oscillating_breaks(n, params.rho0);
        b.push(params.rho0 / n as f64);
        Some((params.profile(params.amplitude(&l), n), b))
    });
    (breaks, radial)
}

pub fn build_setup(cfg: &ScanConfig) -> Result<Setup, CliError> {
    let d = cfg.dim;
    let h = cfg.scan.transport_h;
    let grid = TransportSource::Grid { h };
    let (field, breaks, transport) = match &cfg.potential {
        PotentialSpec::Example1 { r0 } => {
            let r0 = *r0;
            let b: BreakFn = Arc::new(move |c: &[f64], _| example1_breaks(c, r0));
            (example1_potential(d, r0).map_err(core)?, Some(b), grid)
        }
        PotentialSpec::Example2 { a, alpha_power, blocks, lengths } => {
            let alpha = crate::config::example2_alpha(*alpha_power, *blocks);
            let (_, f, _) = example2_potential(d, *a, alpha, None, (*lengths).into()).map_err(core)?;
            (f, None, grid)
        }
        PotentialSpec::Example3 { .. } => {
            let p = cfg.example3_params().expect("example3 params");
            let (b, radial) = example3_parts(&p);
            let f = example3_potential(&p).map_err(core)?;
            (f, Some(b), TransportSource::Split { h, smooth: PotentialField::sqrt_norm(3), radial })
        }
        PotentialSpec::Quadratic => (PotentialField::quadratic(d), None, grid),
        PotentialSpec::SqrtNorm => (PotentialField::sqrt_norm(d), None, grid),
        PotentialSpec::Constant { value } => (PotentialField::constant(d, *value), None, grid),
        PotentialSpec::Table { path } => (load_table(path, d).map_err(core)?, None, grid),
    };

    let c = &cfg.centers;
    let (centers, center_note) = match c.mode {
        CenterMode::Full => {
            let cov = LatticeCovering::new(d, c.spacing, c.r0, c.index_bound).map_err(core)?;
            let mut pts: Vec<Vec<f64>> = cov.centers().into_iter().map(|p| p.point).collect();
            // Series run outward, so the trend compares near and far balls.
            pts.sort_by(|a, b| {
                let na: f64 = a.iter().map(|x| x * x).sum();
                let nb: f64 = b.iter().map(|x| x * x).sum();
                na.total_cmp(&nb)
                    .then_with(|| a.iter().zip(b).fold(std::cmp::Ordering::Equal, |o, (x, y)| o.then(x.total_cmp(y))))
            });
            (pts, None)
        }
        CenterMode::Axis => {
            let pts = (0..=c.index_bound)
                .map(|k| {
                    let mut p = vec![0.0; d];
                    p[0] = k as f64 * c.spacing;
                    p
                })
                .collect();
            (pts, Some("axis scan: centers along the first axis, not a covering".to_string()))
        }
        CenterMode::Wells => {
            let layout = cfg.example2_layout().expect("wells need example2").map_err(core)?;
            let n = c.index_bound.min(layout.blocks());
            let pts = (1..=n)
                .map(|k| {
                    let mut p = vec![0.0; d];
                    p[0] = layout.well_center(k).expect("block index in range");
                    p
                })
                .collect();
            (pts, Some("well centers of the second example along the first axis".to_string()))
        }
    };
    Ok(Setup { field, centers, breaks, transport, center_note })
}

pub fn check_context(cfg: &ScanConfig, breaks: Option<BreakFn>) -> CheckContext {
    let s = &cfg.scan;
    let rule = match s.rule {
        RuleKind::Spherical => BallRule::Spherical { shells: s.shells, radial_points: 4, n_polar: 16, n_azimuth: 32 },
        RuleKind::Lattice => BallRule::Lattice { h: s.lattice_h },
        RuleKind::MonteCarlo => BallRule::MonteCarlo { samples: s.samples, seed: cfg.seed },
    };
    CheckContext { rule, breaks, trend: TrendRule::default(), gamma: s.gamma }
}

/// Runs every selected criterion. Invalid configs are refused before any
/// computation.
pub fn run_scan(cfg: &ScanConfig) -> Result<Report, CliError> {
    let violations = validate(cfg);
    if !violations.is_empty() {
        return Err(CliError::Invalid(violations));
    }
    let setup = build_setup(cfg)?;
    let consts = sobolev_constants(cfg.dim).map_err(core)?;
    let constants = Constants {
        sobolev_c: consts.c,
        k: consts.k,
        isocapacity: consts.c_iso,
        transport_limit: 1.0 / (2.0 * consts.c),
    };
    let mut report = Report::new(cfg, setup.field.description().to_string(), setup.centers.len(), constants);
    report.center_note = setup.center_note.clone();
    let ctx = check_context(cfg, setup.breaks.clone());
    let (v, centers, s) = (&setup.field, &setup.centers, &cfg.scan);
    let r0 = cfg.centers.r0;

    for kind in CriterionKind::ALL.into_iter().filter(|k| cfg.wants(*k)) {
        let name = kind.as_str();
        let outcome: Result<(), discspec::Error> = (|| {
            match kind {
                CriterionKind::NegativePart => {
                    let out = check_negative_part(v, centers, r0, &ctx)?;
                    report.push_verdict(format!("{name}-r{r0}"), &out);
                }
                CriterionKind::UniformTail => {
                    let out = check_uniform_tail(v, centers, r0, &s.n_list, &ctx)?;
                    report.push_verdict(format!("{name}-r{r0}"), &out.verdict);
                }
                CriterionKind::Rearrangement => {
                    for out in check_rearrangement(v, centers, &s.r_list, &ctx)? {
                        report.push_verdict(format!("{name}-r{}", out.radius), &out);
                    }
                }
                CriterionKind::ExpectationDeviation => {
                    for out in check_expectation_deviation(v, centers, &s.r_list, &ctx)? {
                        report.push_verdict(format!("{name}-r{}", out.radius), &out);
                    }
                }
                CriterionKind::TrimmedIntegral => {
                    let mode = match s.trim {
                        TrimSpec::PositivePart => TrimMode::PositivePart,
                        TrimSpec::Signed => TrimMode::Signed,
                    };
                    for out in check_trimmed_integral(v, centers, &s.r_list, mode, &ctx)? {
                        report.push_verdict(format!("{name}-r{}", out.radius), &out);
                    }
                }
                CriterionKind::Molchanov => {
                    for out in necessary_molchanov(v, centers, &s.r_list, &ctx)? {
                        report.push_verdict(format!("{name}-r{}", out.radius), &out);
                    }
                }
                CriterionKind::Transport => {
                    let out = check_transport(v, centers, r0, &setup.transport, &ctx)?;
                    report.push_verdict(format!("{name}-r{r0}"), &out.bound);
                    report.push_verdict(format!("expectation-r{r0}"), &out.expectation);
                    report.transport_evidence = Some(out.evidence.as_str().into());
                }
                CriterionKind::Measure => {
                    for r in &s.r_list {
                        for m in necessary_measure_conditions(v, centers, *r, &s.a_list, s.m, &ctx)? {
                            report.push_verdict(format!("mes1-a{}-r{r}", m.a), &m.mes1);
                            report.push_verdict(format!("mes2-a{}-r{r}", m.a), &m.mes2);
                        }
                    }
                }
                CriterionKind::Eigen => {
                    let scan = localization_scan(v, centers, cfg.eigen_radius(), s.h, &ctx.trend);
                    report.push_scan(&scan);
                }
            }
            Ok(())
        })();
        if let Err(e) = outcome {
            report.fail(name, e);
        }
    }
    Ok(report)
}

/// Runs `f` on a pool sized by `DISCSPEC_WORKERS` when set.
pub fn with_workers<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match std::env::var("DISCSPEC_WORKERS") {
        Ok(n) => {
            let n: usize =
                n.trim().parse().map_err(|_| CliError::Config(format!("DISCSPEC_WORKERS={n} is not a count")))?;
            let pool =
                rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| CliError::Config(e.to_string()))?;
            Ok(pool.install(f))
        }
        Err(_) => Ok(f()),
    }
}
