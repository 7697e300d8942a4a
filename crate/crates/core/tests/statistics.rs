use std::f64::consts::PI;

use discspec::geometry::{spherical_grid, uniform_edges};
use discspec::potential::positive_negative_parts;
use discspec::statistics::{level_measure, lp_norm, moments, rearrangement, trimmed_integral, FieldSample};
use discspec::{Ball, PotentialField, QuadratureGrid};

fn ball_grid(center: Vec<f64>, r: f64, edges: &[f64]) -> QuadratureGrid {
    spherical_grid(&Ball::new(center, r).unwrap(), edges, 4, 16, 32).unwrap()
}

#[test]
fn shell_level_set_is_exact_on_a_matching_rule() {
    let g = ball_grid(vec![0.0; 3], 1.0, &uniform_edges(1.0, 8));
    let v = PotentialField::radial(3, "|x|", |r| r);
    let exact = 4.0 * PI / 3.0 * (1.0 - 0.125);
    assert!((level_measure(&v, 0.5, &g) - exact).abs() < 1e-12 * exact);
}

#[test]
fn indicator_rearrangement_and_trimming() {
    // c on B_0.5, 0 on the rest of B_1
    let c = 4.0;
    let g = ball_grid(vec![0.0; 3], 1.0, &[0.0, 0.5, 1.0]);
    let v = PotentialField::radial(3, "step", move |r| if r <= 0.5 { c } else { 0.0 });
    let a = 4.0 * PI / 3.0 * 0.125;
    assert_eq!(rearrangement(&v, 0.5 * a, &g).unwrap(), c);
    assert_eq!(rearrangement(&v, 1.5 * a, &g).unwrap(), 0.0);
    for delta in [0.0, 0.25 * a, 0.9 * a] {
        let t = trimmed_integral(&v, delta, &g).unwrap();
        assert!((t - c * (a - delta)).abs() < 1e-12, "{t}");
    }
    assert!(trimmed_integral(&v, g.total_weight(), &g).unwrap().abs() < 1e-12);
}

#[test]
fn trimming_refuses_negative_fields() {
    let g = ball_grid(vec![0.0; 3], 1.0, &uniform_edges(1.0, 2));
    let v = PotentialField::constant(3, -1.0);
    assert!(trimmed_integral(&v, 0.1, &g).is_err());
    let (plus, minus) = positive_negative_parts(&v);
    assert_eq!(trimmed_integral(&plus, 0.1, &g).unwrap(), 0.0);
    assert!((trimmed_integral(&minus, 0.0, &g).unwrap() - g.total_weight()).abs() < 1e-12);
}

#[test]
fn half_and_half_moments() {
    // +1 on the upper half ball, -1 on the lower
    let g = ball_grid(vec![0.0; 3], 1.0, &uniform_edges(1.0, 4));
    let v = PotentialField::new(3, "sign", |x: &[f64]| if x[2] >= 0.0 { 1.0 } else { -1.0 });
    let m = moments(&v, &g);
    assert!(m.expectation.abs() < 1e-12);
    assert!((m.deviation - 1.0).abs() < 1e-12);
}

#[test]
fn lp_norm_of_constant_and_domain_monotonicity() {
    let g = ball_grid(vec![0.0; 3], 1.0, &uniform_edges(1.0, 4));
    let one = PotentialField::constant(3, 1.0);
    let exact = (4.0 * PI / 3.0).powf(2.0 / 3.0);
    assert!((lp_norm(&one, 1.5, &g).unwrap() - exact).abs() < 1e-12);

    let v = PotentialField::sqrt_norm(3);
    let small = ball_grid(vec![2.0, 0.0, 0.0], 0.5, &uniform_edges(0.5, 8));
    let large = ball_grid(vec![2.0, 0.0, 0.0], 1.0, &uniform_edges(1.0, 16));
    assert!(lp_norm(&v, 1.5, &small).unwrap() < lp_norm(&v, 1.5, &large).unwrap());
}

#[test]
fn sqrt_norm_expectation_grows_like_sqrt_distance() {
    let v = PotentialField::sqrt_norm(3);
    for l in [16.0, 64.0, 256.0] {
        let g = ball_grid(vec![l, 0.0, 0.0], 0.9, &uniform_edges(0.9, 8));
        let e = FieldSample::new(&v, &g).moments().expectation;
        assert!((e / f64::sqrt(l) - 1.0).abs() < 0.01, "{l}: {e}");
    }
}
