use std::sync::Arc;

use discspec::geometry::{Ball, CellComplex, Domain};
use discspec::potential::{oscillating_breaks, oscillating_profile, Example3Params, Fn1d};
use discspec::quadrature::adaptive;
use discspec::transport::{
    center_load, d_bound, divergence_residual_load, dual_energy, grid_plaplace_minimize_with, quadrature_load,
    radial_neumann_solve, PLaplaceOptions, PLaplaceSolution,
};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

const R0: f64 = 0.9;

fn radial_source(w: &Fn1d) -> impl Fn(&[f64]) -> f64 + Sync + '_ {
    move |x: &[f64]| w(x.iter().map(|v| v * v).sum::<f64>().sqrt())
}

fn solve(w: &Fn1d, h: f64) -> (CellComplex, Vec<f64>, PLaplaceSolution) {
    let grid = CellComplex::new(&Domain::Ball(Ball::centered(3, R0).unwrap()), h).unwrap();
    let mut load = quadrature_load(&grid, &radial_source(w), 4);
    center_load(&grid, &mut load);
    let sol = grid_plaplace_minimize_with(&load, 3.0, &grid, &PLaplaceOptions::default()).unwrap();
    (grid, load, sol)
}

fn two_step() -> (Fn1d, Vec<f64>) {
    let rho1: f64 = 0.4;
    let c2 = rho1.powi(3) / (R0.powi(3) - rho1.powi(3));
    (Arc::new(move |r| if r <= rho1 { 1.0 } else { -c2 }), vec![rho1])
}

fn bumps() -> (Fn1d, Vec<f64>) {
    let bump = |c: f64, w: f64| {
        move |r: f64| {
            let t = (r - c) / w;
            if t.abs() < 1.0 {
                (1.0 - t * t).powi(2)
            } else {
                0.0
            }
        }
    };
    let (b1, b2) = (bump(0.0, 0.4), bump(0.6, 0.25));
    let k = adaptive(&|r| b1(r) * r * r, 0.0, R0, &[0.4], 1e-13)
        / adaptive(&|r| b2(r) * r * r, 0.0, R0, &[0.35, 0.85], 1e-13);
    (Arc::new(move |r| b1(r) - k * b2(r)), vec![0.35, 0.4, 0.6, 0.85])
}

#[test]
fn grid_matches_radial_on_coarse_grid() {
    let p = Example3Params::default();
    let a = p.amplitude(&[2, 0, 0]);
    let cases = [two_step(), bumps(), (oscillating_profile(3, a, 2, R0), oscillating_breaks(2, R0))];
    for (w, breaks) in cases {
        let radial = radial_neumann_solve(&w, R0, 3, &breaks, 1000).unwrap().bound;
        let (_, _, sol) = solve(&w, R0 / 12.0);
        assert!(sol.converged, "{} iterations", sol.iterations);
        eprintln!("iters {} norm {} radial {radial}", sol.iterations, sol.norm);
        assert!((sol.norm - radial).abs() < 0.08 * radial, "{} vs {radial}", sol.norm);
    }
}

#[test]
fn minimizer_is_stationary_and_optimal() {
    let (w, _) = two_step();
    let (grid, load, sol) = solve(&w, R0 / 10.0);
    let res = divergence_residual_load(&sol.field, &load, &grid).unwrap();
    eprintln!("residual {res} iters {}", sol.iterations);
    assert!(res < 1e-6);
    let j = dual_energy(&sol.u, &load, 3.0, &grid, sol.epsilon);
    assert!((j - sol.energy).abs() <= 1e-12 * j.abs());
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let scale = sol.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for _ in 0..20 {
        let mut dir: Vec<f64> = (0..grid.n_nodes()).map(|_| rng.random::<f64>() - 0.5).collect();
        let mean = dir.iter().zip(grid.lumped()).map(|(a, b)| a * b).sum::<f64>() / grid.measure();
        dir.iter_mut().for_each(|x| *x -= mean);
        for t in [1e-2, 1e-3] {
            let trial: Vec<f64> = sol.u.iter().zip(&dir).map(|(u, d)| u + t * scale * d).collect();
            let jt = dual_energy(&trial, &load, 3.0, &grid, sol.epsilon);
            assert!(jt >= j - 1e-10 * j.abs(), "energy dropped from {j} to {jt}");
        }
    }
}

#[test]
fn bound_is_homogeneous() {
    let (w, _) = bumps();
    let ball = Domain::Ball(Ball::centered(3, R0).unwrap());
    let f = radial_source(&w);
    let base = d_bound(&f, &ball, R0 / 8.0, true).unwrap().value;
    let scaled = d_bound(&|x: &[f64]| 7.0 * f(x), &ball, R0 / 8.0, true).unwrap().value;
    assert!((scaled - 7.0 * base).abs() < 1e-6 * scaled, "{scaled} vs {}", 7.0 * base);
    let zero = d_bound(&|_: &[f64]| 0.0, &ball, R0 / 8.0, false).unwrap().value;
    assert_eq!(zero, 0.0);
    assert!(d_bound(&|_: &[f64]| 1.0, &ball, R0 / 8.0, false).is_err());
}

#[test]
fn radial_bound_is_dilation_invariant_in_three_dimensions() {
    let a = 0.3;
    for n in [2, 5] {
        let small =
            radial_neumann_solve(&oscillating_profile(3, a, n, 0.1), R0, 3, &oscillating_breaks(n, 0.1), 1000).unwrap();
        let wide =
            radial_neumann_solve(&oscillating_profile(3, a, n, R0), R0, 3, &oscillating_breaks(n, R0), 1000).unwrap();
        assert!((small.bound - wide.bound).abs() < 1e-8 * wide.bound);
    }
}
