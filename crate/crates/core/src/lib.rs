//! Numerical criteria for semi-boundedness and discreteness of the spectrum
//! of the Schrödinger operator `H = -Δ + V` on `R^d`.
//!
//! The crate is organized bottom-up:
//!
//! * [`geometry`]: balls, spherical layers, cubes, lattice coverings and the
//!   quadrature grids every integral in the crate is computed on.
//! * [`potential`]: the [`PotentialField`] handle and generators for the
//!   three worked example potentials (plus the tent-train candidate).
//! * [`statistics`]: level-set measures, non-increasing rearrangements,
//!   trimmed integrals, moments and `L^p` norms over domains.
//! * [`spectral`]: smallest Dirichlet eigenvalues on balls, localization
//!   scans, radial shooting and the Riccati substitution `v = -ln u`.
//! * [`transport`]: divergence-constrained transport bounds through the
//!   `q`-Laplace Neumann problem, radial closed form and grid minimizer.
//! * [`criteria`]: one checker per spectral criterion, each producing a
//!   [`CriterionVerdict`](criteria::CriterionVerdict).
//! * [`riccati_lab`]: measures of the Riccati-type integral inequality sets.
//!
//! Every verdict produced here is trend evidence over a finite scanned range;
//! the underlying conditions are limits as the centers go to infinity.

pub mod criteria;
pub mod error;
pub mod geometry;
pub mod potential;
pub mod quadrature;
pub mod riccati_lab;
pub mod spectral;
pub mod statistics;
pub mod transport;
pub mod trend;

pub use error::{Error, Result};
pub use geometry::{Ball, Cube, Domain, LatticeCovering, QuadratureGrid, SphericalLayer};
pub use potential::PotentialField;
pub use spectral::EigenResult;
pub use transport::RadialSolution;
pub use trend::{SeriesPoint, Trend, TrendRule};
