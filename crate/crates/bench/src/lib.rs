//! Fixtures shared by the benchmarks.

use discspec::geometry::{spherical_grid, uniform_edges};
use discspec::statistics::FieldSample;
use discspec::{Ball, PotentialField};

/// `|x|²` sampled on a spherical grid over `B_r(y)`.
pub fn quadratic_sample(y: &[f64], r: f64, shells: usize) -> FieldSample {
    let ball = Ball::new(y.to_vec(), r).expect("valid ball");
    let grid = spherical_grid(&ball, &uniform_edges(r, shells), 4, 16, 32).expect("valid grid");
    FieldSample::new(&PotentialField::quadratic(y.len()), &grid)
}
