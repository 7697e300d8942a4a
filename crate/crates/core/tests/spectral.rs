use std::f64::consts::PI;
use std::sync::Arc;

use discspec::potential::Fn1d;
use discspec::spectral::{dirichlet_lambda0, localization_scan, riccati_threshold};
use discspec::trend::TrendRule;
use discspec::{Ball, PotentialField, Trend};

#[test]
fn free_ball_converges_at_second_order() {
    let v = PotentialField::constant(3, 0.0);
    let ball = Ball::centered(3, 1.0).unwrap();
    let exact = PI * PI;
    let l16 = dirichlet_lambda0(&v, &ball, 1.0 / 16.0).unwrap().lambda0;
    let l32 = dirichlet_lambda0(&v, &ball, 1.0 / 32.0).unwrap().lambda0;
    assert!((l32 - exact).abs() < 0.02 * exact, "{l32}");
    let order = ((l16 - exact) / (l32 - exact)).abs().log2();
    eprintln!("h=1/16 {l16} h=1/32 {l32} order {order}");
    assert!(order >= 1.8, "observed order {order}");
}

#[test]
fn eigen_and_shooting_agree_on_radial_potentials() {
    let ball = Ball::centered(3, 1.0).unwrap();
    let cases: Vec<(PotentialField, Fn1d)> = vec![
        (PotentialField::constant(3, 0.0), Arc::new(|_| 0.0)),
        (PotentialField::quadratic(3), Arc::new(|r| r * r)),
        (PotentialField::sqrt_norm(3), Arc::new(|r: f64| r.sqrt())),
    ];
    for (field, radial) in cases {
        let eig = dirichlet_lambda0(&field, &ball, 1.0 / 32.0).unwrap().lambda0;
        let shot = riccati_threshold(&radial, 1.0, 3).unwrap().lambda_hat;
        eprintln!("{}: eigen {eig} shooting {shot}", field.description());
        assert!((eig - shot).abs() <= 0.02 * shot.abs());
    }
}

#[test]
fn quadratic_potential_scan_diverges() {
    let v = PotentialField::quadratic(3);
    let centers: Vec<Vec<f64>> = (0..8).map(|k| vec![k as f64, 0.0, 0.0]).collect();
    let scan = localization_scan(&v, &centers, 1.0, 0.125, &TrendRule::default());
    assert_eq!(scan.trend.trend, Trend::Diverging);
    for p in &scan.points {
        let y = p.distance();
        // V lies between (|y| - 1)² and (|y| + 1)² on the ball.
        let free = PI * PI;
        assert!(p.value >= free * 0.95 + (y - 1.0).max(0.0).powi(2) - 1e-9);
        assert!(p.value <= free * 1.05 + (y + 1.0).powi(2));
    }
    let flat = localization_scan(&PotentialField::constant(3, 0.0), &centers, 1.0, 0.125, &TrendRule::default());
    assert_eq!(flat.trend.trend, Trend::Bounded);
}
