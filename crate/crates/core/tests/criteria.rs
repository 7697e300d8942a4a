use std::sync::Arc;

use discspec::criteria::*;
use discspec::geometry::{spherical_grid, uniform_edges};
use discspec::potential::{example1_breaks, example1_potential, SawProfile};
use discspec::{Ball, PotentialField, Trend, TrendRule};
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn axis(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|k| vec![k as f64, 0.0, 0.0]).collect()
}

#[test]
fn sobolev_inequality_holds_on_random_pairs() {
    // |∫W u²| <= C² ‖W‖_{3/2} ∫|∇u|² for u = (1-|x|²)² q(x), q affine.
    let c = sobolev_constants(3).unwrap().c;
    let ball = Ball::centered(3, 1.0).unwrap();
    let grid = spherical_grid(&ball, &uniform_edges(1.0, 24), 4, 16, 32).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for trial in 0..50 {
        let a: Vec<f64> = (0..4).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
        let (mut lhs, mut grad2, mut wnorm) = (0.0, 0.0, 0.0);
        for (x, wt) in grid.nodes().zip(grid.weights()) {
            let s = 1.0 - x.iter().map(|v| v * v).sum::<f64>();
            let phi = s * s;
            let q = a[0] + a[1] * x[0] + a[2] * x[1] + a[3] * x[2];
            let u = phi * q;
            let g2: f64 = (0..3).map(|i| (-4.0 * s * x[i] * q + phi * a[i + 1]).powi(2)).sum();
            // Half the trials use the Hölder-extremal W = u⁴, the rest noise.
            let w = if trial % 2 == 0 { u.powi(4) } else { 2.0 * rng.random::<f64>() - 1.0 };
            lhs += w * u * u * wt;
            grad2 += g2 * wt;
            wnorm += w.abs().powf(1.5) * wt;
        }
        let ratio = lhs.abs() / (c * c * wnorm.powf(2.0 / 3.0) * grad2);
        worst = worst.max(ratio);
    }
    assert!(worst <= 1.05, "{worst}");
}

#[test]
fn quadratic_potential_diverges_and_constant_stays_flat() {
    let ctx = CheckContext::default();
    let centers = axis(12);
    let q = PotentialField::quadratic(3);
    for v in check_rearrangement(&q, &centers, &[0.5], &ctx).unwrap() {
        assert_eq!(v.trend, Trend::Diverging);
    }
    for v in check_expectation_deviation(&q, &centers, &[0.5], &ctx).unwrap() {
        assert_eq!(v.trend, Trend::Diverging);
    }
    let flat = PotentialField::constant(3, 2.0);
    for v in check_trimmed_integral(&flat, &centers, &[0.5], TrimMode::PositivePart, &ctx).unwrap() {
        assert_eq!(v.trend, Trend::Bounded);
    }
    let m = necessary_molchanov(&q, &centers, &[0.5, 1.0], &ctx).unwrap();
    assert!(m.iter().all(|v| v.trend == Trend::Diverging));
}

#[test]
fn negative_constant_violates_with_large_depth() {
    let ctx = CheckContext::default();
    let k = sobolev_constants(3).unwrap().k;
    let shallow = check_negative_part(&PotentialField::constant(3, -0.1), &axis(6), 0.5, &ctx).unwrap();
    assert!(shallow.passes_threshold());
    let deep = check_negative_part(&PotentialField::constant(3, -10.0 * k), &axis(6), 0.5, &ctx).unwrap();
    assert_eq!(deep.trend, Trend::Violating);
    assert!(deep.caveats.iter().any(|c| c == EVIDENCE_NOTE));
}

#[test]
fn caveat_for_signed_fields() {
    let ctx = CheckContext::default();
    let v = PotentialField::quadratic(3).shifted(-0.5);
    let out = check_rearrangement(&v, &axis(4), &[0.5], &ctx).unwrap();
    assert!(out[0].caveats.iter().any(|c| c.contains("negative values")));
}

#[test]
fn transport_check_on_quadratic_potential() {
    let ctx = CheckContext::default();
    let centers = axis(6);
    let out =
        check_transport(&PotentialField::quadratic(3), &centers, 0.5, &TransportSource::Grid { h: 0.5 / 8.0 }, &ctx)
            .unwrap();
    // W^{(y)} = |x|² - E on B_{1/2}(y) grows linearly in |y|, so does the bound.
    let vals = out.bound.values();
    assert!(vals.iter().all(|v| v.is_finite() && *v > 0.0));
    assert!(vals[5] > 3.0 * vals[1]);
    assert_eq!(out.expectation.trend, Trend::Diverging);
}

#[test]
fn example1_sublevel_series() {
    let r0 = 0.4;
    let v = example1_potential(3, r0).unwrap();
    let ctx = CheckContext {
        breaks: Some(Arc::new(move |c: &[f64], _| example1_breaks(c, r0))),
        trend: TrendRule::default(),
        ..Default::default()
    };
    let centers = axis(21);
    let series = necessary_measure_conditions(&v, &centers, r0, &[0.0, 1.0], 100, &ctx).unwrap();
    let mes1 = series[0].mes1.values();
    let mes2 = series[1].mes2.values();
    eprintln!("mes1(A=0) {mes1:?}");
    eprintln!("mes2(A=1) {mes2:?}");
    assert!(mes1.iter().all(|m| *m > 0.9 * r0));
    assert!(mes2.last().unwrap() < &(0.25 * mes2[0]));
    assert_eq!(series[1].mes2.trend, Trend::Decreasing);
}

#[test]
fn ball_profile_matches_saw() {
    let r0 = 0.4;
    let v = example1_potential(3, r0).unwrap();
    for n in [2usize, 5, 13] {
        let c = [n as f64, 0.0, 0.0];
        let prof = ball_integral_profile(&v, &c, r0, 64, &example1_breaks(&c, r0)).unwrap();
        let saw = SawProfile { r0, n };
        for t in [0.01, r0 / n as f64, 0.3, r0] {
            assert!((prof.at(t) - saw.value(t)).abs() < 1e-6 * n as f64, "{n} {t}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn sublevel_measures_grow_with_level(a in -2.0f64..2.0, da in 0.0f64..2.0, n in 2usize..15) {
        let r0 = 0.4;
        let v = example1_potential(3, r0).unwrap();
        let c = [n as f64, 0.0, 0.0];
        let prof = ball_integral_profile(&v, &c, r0, 80, &example1_breaks(&c, r0)).unwrap();
        prop_assert!(sublevel_measure_1d(&prof, r0, a, 40) <= sublevel_measure_1d(&prof, r0, a + da, 40));
        let lo = sublevel_measure_2d(&prof, r0, a, 40).unwrap();
        let hi = sublevel_measure_2d(&prof, r0, a + da, 40).unwrap();
        prop_assert!(lo <= hi && hi <= r0 * r0 / 2.0 + 1e-12);
    }

    #[test]
    fn trimming_never_exceeds_integral(c in 0.0f64..5.0, shift in 0.0f64..3.0) {
        let ctx = CheckContext::default();
        let v = PotentialField::quadratic(3).shifted(c);
        let centers = vec![vec![shift, 0.0, 0.0]];
        let full = necessary_molchanov(&v, &centers, &[0.5], &ctx).unwrap()[0].points[0].value;
        let trimmed = check_trimmed_integral(&v, &centers, &[0.5], TrimMode::PositivePart, &ctx).unwrap()[0].points[0].value;
        prop_assert!(trimmed <= full + 1e-12 && trimmed >= 0.0);
    }
}
