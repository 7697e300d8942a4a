//! Domains, lattice coverings and quadrature grids.
//!
//! Only balls, spherical layers and cubes are supported. Every integral in
//! the crate is a weighted sum over a [`QuadratureGrid`]; the grids are
//! immutable once built and can be shared read-only between workers.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::quadrature::{ball_volume, gauss_legendre};

const NO_NODE: u32 = u32::MAX;

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_point(center: &[f64]) -> Result<()> {
    if center.is_empty() {
        return Err(invalid("dimension must be at least 1"));
    }
    if center.iter().any(|c| !c.is_finite()) {
        return Err(invalid("center coordinates must be finite"));
    }
    Ok(())
}

/// Open ball `B_r(y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    center: Vec<f64>,
    radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        check_point(&center)?;
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Self { center, radius })
    }

    /// Ball of radius `radius` centered at the origin of `R^dim`.
    pub fn centered(dim: usize, radius: f64) -> Result<Self> {
        Self::new(vec![0.0; dim], radius)
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        dist2(x, &self.center) < self.radius * self.radius
    }

    pub fn measure(&self) -> f64 {
        ball_volume(self.dim(), self.radius)
    }
}

/// Spherical layer `L_{s,t}(y) = B_t(y) \ closure(B_s(y))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalLayer {
    center: Vec<f64>,
    inner: f64,
    outer: f64,
}

impl SphericalLayer {
    pub fn new(center: Vec<f64>, inner: f64, outer: f64) -> Result<Self> {
        check_point(&center)?;
        if !(inner > 0.0 && inner < outer && outer.is_finite()) {
            return Err(invalid(format!("layer needs 0 < s < t, got s={inner}, t={outer}")));
        }
        Ok(Self { center, inner, outer })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn inner(&self) -> f64 {
        self.inner
    }

    pub fn outer(&self) -> f64 {
        self.outer
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let r2 = dist2(x, &self.center);
        r2 > self.inner * self.inner && r2 < self.outer * self.outer
    }

    pub fn measure(&self) -> f64 {
        ball_volume(self.dim(), self.outer) - ball_volume(self.dim(), self.inner)
    }
}

/// Open axis-aligned cube `{x : |x_i - c_i| < half_side}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cube {
    center: Vec<f64>,
    half_side: f64,
}

impl Cube {
    pub fn new(center: Vec<f64>, half_side: f64) -> Result<Self> {
        check_point(&center)?;
        if !(half_side > 0.0 && half_side.is_finite()) {
            return Err(invalid(format!("cube half side must be positive, got {half_side}")));
        }
        Ok(Self { center, half_side })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn half_side(&self) -> f64 {
        self.half_side
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.center).all(|(a, c)| (a - c).abs() < self.half_side)
    }

    pub fn measure(&self) -> f64 {
        (2.0 * self.half_side).powi(self.dim() as i32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Ball(Ball),
    Layer(SphericalLayer),
    Cube(Cube),
}

impl From<Ball> for Domain {
    fn from(b: Ball) -> Self {
        Domain::Ball(b)
    }
}

impl From<SphericalLayer> for Domain {
    fn from(l: SphericalLayer) -> Self {
        Domain::Layer(l)
    }
}

impl From<Cube> for Domain {
    fn from(c: Cube) -> Self {
        Domain::Cube(c)
    }
}

impl Domain {
    pub fn dim(&self) -> usize {
        self.center().len()
    }

    pub fn center(&self) -> &[f64] {
        match self {
            Domain::Ball(b) => b.center(),
            Domain::Layer(l) => l.center(),
            Domain::Cube(c) => c.center(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::Ball(b) => b.contains(x),
            Domain::Layer(l) => l.contains(x),
            Domain::Cube(c) => c.contains(x),
        }
    }

    /// Exact Lebesgue measure `mes_d`.
    pub fn measure(&self) -> f64 {
        match self {
            Domain::Ball(b) => b.measure(),
            Domain::Layer(l) => l.measure(),
            Domain::Cube(c) => c.measure(),
        }
    }

    /// Smallest length scale of the domain; grid spacings must stay below it.
    pub fn extent(&self) -> f64 {
        match self {
            Domain::Ball(b) => b.radius(),
            Domain::Layer(l) => l.outer() - l.inner(),
            Domain::Cube(c) => c.half_side(),
        }
    }

    /// Half width of the smallest centered box containing the domain.
    pub fn bounding_half_width(&self) -> f64 {
        match self {
            Domain::Ball(b) => b.radius(),
            Domain::Layer(l) => l.outer(),
            Domain::Cube(c) => c.half_side(),
        }
    }

    /// Distance from the interior point `x` to the boundary along the ray
    /// `x + t * sign * e_axis`, `t > 0`.
    pub fn boundary_distance(&self, x: &[f64], axis: usize, sign: f64) -> f64 {
        let c = self.center();
        let offset = sign * (x[axis] - c[axis]);
        let r2 = dist2(x, c);
        // First positive root of |x + t s e - c|^2 = R^2 for x inside.
        let exit = |radius: f64| -> f64 {
            let disc = offset * offset - (r2 - radius * radius);
            -offset + disc.max(0.0).sqrt()
        };
        match self {
            Domain::Ball(b) => exit(b.radius()),
            Domain::Layer(l) => {
                let out = exit(l.outer());
                let s = l.inner();
                let disc = offset * offset - (r2 - s * s);
                if disc > 0.0 {
                    let t = -offset - disc.sqrt();
                    if t > 0.0 {
                        return t.min(out);
                    }
                }
                out
            }
            Domain::Cube(cube) => cube.half_side() - offset,
        }
    }
}

/// Regular lattice masked to a domain: maps box indices to node indices.
#[derive(Debug, Clone)]
pub struct MaskedLattice {
    origin: Vec<f64>,
    h: f64,
    shape: Vec<usize>,
    strides: Vec<usize>,
    slot: Vec<u32>,
    box_index: Vec<usize>,
}

impl MaskedLattice {
    fn new(origin: Vec<f64>, h: f64, shape: Vec<usize>) -> Self {
        let mut strides = vec![1; shape.len()];
        for k in (0..shape.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * shape[k + 1];
        }
        let total = shape.iter().product();
        Self { origin, h, shape, strides, slot: vec![NO_NODE; total], box_index: Vec::new() }
    }

    fn position(&self, flat: usize, out: &mut [f64]) {
        let mut rem = flat;
        for k in 0..self.shape.len() {
            let i = rem / self.strides[k];
            rem %= self.strides[k];
            out[k] = self.origin[k] + self.h * i as f64;
        }
    }

    fn multi_index(&self, flat: usize) -> Vec<usize> {
        let mut rem = flat;
        self.strides
            .iter()
            .map(|s| {
                let i = rem / s;
                rem %= s;
                i
            })
            .collect()
    }

    fn push(&mut self, flat: usize) -> usize {
        let id = self.box_index.len();
        self.slot[flat] = id as u32;
        self.box_index.push(flat);
        id
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.box_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.box_index.is_empty()
    }

    /// Neighbor of `node` one step along `axis` in direction `dir` (±1).
    pub fn neighbor(&self, node: usize, axis: usize, dir: i32) -> Option<usize> {
        let flat = self.box_index[node];
        let i = (flat / self.strides[axis]) % self.shape[axis];
        let j = i as i64 + dir as i64;
        if j < 0 || j >= self.shape[axis] as i64 {
            return None;
        }
        let target = (flat as i64 + dir as i64 * self.strides[axis] as i64) as usize;
        match self.slot[target] {
            NO_NODE => None,
            id => Some(id as usize),
        }
    }
}

/// Radial shell structure of a grid built in spherical coordinates.
#[derive(Debug, Clone)]
pub struct ShellLayout {
    pub edges: Vec<f64>,
    pub node_shell: Vec<u32>,
}

#[derive(Debug, Clone)]
pub enum GridLayout {
    Lattice(MaskedLattice),
    Shells(ShellLayout),
    Scattered,
}

/// Nodes and positive weights approximating Lebesgue measure on a domain.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    spacing: f64,
    domain: Domain,
    layout: GridLayout,
}

impl QuadratureGrid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> {
        self.nodes.chunks_exact(self.dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Characteristic spacing: lattice step, largest shell width, or the
    /// mean inter-sample distance for scattered grids.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn layout(&self) -> &GridLayout {
        &self.layout
    }

    pub fn lattice(&self) -> Option<&MaskedLattice> {
        match &self.layout {
            GridLayout::Lattice(l) => Some(l),
            _ => None,
        }
    }

    /// Evaluates `f` at every node.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        self.nodes().map(f).collect()
    }

    /// `Σ w_i f(x_i)` for node values `values`.
    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

/// Midpoint grid on the domain: the cube lattice `center + h·Z^d`, keeping
/// the nodes (cell centers) that lie inside the domain, with weights `h^d`.
pub fn make_grid(domain: &Domain, h: f64) -> Result<QuadratureGrid> {
    let extent = domain.extent();
    if !(h > 0.0 && h < extent) {
        return Err(Error::DegenerateGrid { h, extent });
    }
    let dim = domain.dim();
    let n = (domain.bounding_half_width() / h).ceil() as usize;
    let side = 2 * n + 1;
    let origin: Vec<f64> = domain.center().iter().map(|c| c - h * n as f64).collect();
    let mut lattice = MaskedLattice::new(origin, h, vec![side; dim]);
    let total = lattice.slot.len();
    let mut nodes = Vec::new();
    let mut x = vec![0.0; dim];
    for flat in 0..total {
        lattice.position(flat, &mut x);
        if domain.contains(&x) {
            lattice.push(flat);
            nodes.extend_from_slice(&x);
        }
    }
    let count = lattice.len();
    if count == 0 {
        return Err(Error::DegenerateGrid { h, extent });
    }
    Ok(QuadratureGrid {
        dim,
        nodes,
        weights: vec![h.powi(dim as i32); count],
        spacing: h,
        domain: domain.clone(),
        layout: GridLayout::Lattice(lattice),
    })
}

/// Uniform radial shell edges `0 = r_0 < ... < r_m = r`.
pub fn uniform_edges(r: f64, m: usize) -> Vec<f64> {
    (0..=m).map(|i| r * i as f64 / m as f64).collect()
}

/// Product rule in spherical coordinates on a ball.
///
/// Radial shells are bounded by `edges` (starting at 0, ending at the ball
/// radius) and integrated with `radial_points` Gauss nodes each; the sphere
/// uses Gauss–Legendre in `cos θ` times a uniform azimuthal rule for
/// `d = 3`, a uniform rule for `d = 2`, and the two points `±1` for `d = 1`.
/// Integrals of radial functions that are polynomial between edges are exact.
pub fn spherical_grid(
    ball: &Ball,
    edges: &[f64],
    radial_points: usize,
    n_polar: usize,
    n_azimuth: usize,
) -> Result<QuadratureGrid> {
    let dim = ball.dim();
    if edges.len() < 2 || edges[0] != 0.0 || (edges[edges.len() - 1] - ball.radius()).abs() > 1e-12 * ball.radius() {
        return Err(invalid("shell edges must run from 0 to the ball radius"));
    }
    if edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("shell edges must be strictly increasing"));
    }
    if radial_points == 0 || (dim == 3 && (n_polar == 0 || n_azimuth == 0)) || (dim == 2 && n_azimuth == 0) {
        return Err(invalid("spherical rule needs positive node counts"));
    }
    let directions: Vec<(Vec<f64>, f64)> = match dim {
        1 => vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)],
        2 => (0..n_azimuth)
            .map(|j| {
                let phi = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / n_azimuth as f64;
                (vec![phi.cos(), phi.sin()], 2.0 * std::f64::consts::PI / n_azimuth as f64)
            })
            .collect(),
        3 => {
            let (mu, wmu) = gauss_legendre(n_polar);
            let mut dirs = Vec::with_capacity(n_polar * n_azimuth);
            for (m, wm) in mu.iter().zip(&wmu) {
                let s = (1.0 - m * m).sqrt();
                for j in 0..n_azimuth {
                    let phi = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / n_azimuth as f64;
                    dirs.push((
                        vec![s * phi.cos(), s * phi.sin(), *m],
                        wm * 2.0 * std::f64::consts::PI / n_azimuth as f64,
                    ));
                }
            }
            dirs
        }
        _ => return Err(invalid("spherical grids are implemented for d <= 3")),
    };
    let (gx, gw) = gauss_legendre(radial_points);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let mut node_shell = Vec::new();
    let mut widest: f64 = 0.0;
    for (s, w) in edges.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        widest = widest.max(b - a);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (xi, wi) in gx.iter().zip(&gw) {
            let rho = mid + half * xi;
            let radial_w = wi * half * rho.powi(dim as i32 - 1);
            for (dir, dw) in &directions {
                nodes.extend(dir.iter().zip(ball.center()).map(|(u, c)| c + rho * u));
                weights.push(radial_w * dw);
                node_shell.push(s as u32);
            }
        }
    }
    Ok(QuadratureGrid {
        dim,
        nodes,
        weights,
        spacing: widest,
        domain: Domain::Ball(ball.clone()),
        layout: GridLayout::Shells(ShellLayout { edges: edges.to_vec(), node_shell }),
    })
}

/// Seeded Monte Carlo grid: `n` uniform samples of the domain, each with
/// weight `mes_d / n`.
pub fn monte_carlo_grid(domain: &Domain, n: usize, seed: u64) -> Result<QuadratureGrid> {
    if n == 0 {
        return Err(invalid("need at least one sample"));
    }
    let dim = domain.dim();
    let half = domain.bounding_half_width();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = Vec::with_capacity(n * dim);
    let mut x = vec![0.0; dim];
    let mut accepted = 0;
    while accepted < n {
        for (xi, c) in x.iter_mut().zip(domain.center()) {
            *xi = c + half * (2.0 * rng.random::<f64>() - 1.0);
        }
        if domain.contains(&x) {
            nodes.extend_from_slice(&x);
            accepted += 1;
        }
    }
    let measure = domain.measure();
    Ok(QuadratureGrid {
        dim,
        nodes,
        weights: vec![measure / n as f64; n],
        spacing: (measure / n as f64).powf(1.0 / dim as f64),
        domain: domain.clone(),
        layout: GridLayout::Scattered,
    })
}

/// Uniform quadrature on the triangle `Δ_r = {(s, t) : 0 < s < t < r}`.
#[derive(Debug, Clone)]
pub struct TriangleGrid {
    pub r: f64,
    pub m: usize,
    pub nodes: Vec<(f64, f64)>,
    pub weights: Vec<f64>,
}

impl TriangleGrid {
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Splits `(0, r)^2` into `m × m` squares. Squares above the diagonal
/// contribute their center; diagonal squares contribute the centroid of their
/// upper triangle with half the weight, so the weights sum to `r²/2` exactly.
pub fn triangle_grid(r: f64, m: usize) -> Result<TriangleGrid> {
    if !(r > 0.0) || m < 2 {
        return Err(invalid("triangle grid needs r > 0 and m >= 2"));
    }
    let h = r / m as f64;
    let mut nodes = Vec::with_capacity(m * (m + 1) / 2);
    let mut weights = Vec::with_capacity(m * (m + 1) / 2);
    for i in 0..m {
        let s0 = i as f64 * h;
        nodes.push((s0 + h / 3.0, s0 + 2.0 * h / 3.0));
        weights.push(0.5 * h * h);
        for j in i + 1..m {
            nodes.push((s0 + 0.5 * h, (j as f64 + 0.5) * h));
            weights.push(h * h);
        }
    }
    Ok(TriangleGrid { r, m, nodes, weights })
}

/// Mesh of lattice cells (axis-aligned cubes of side `h`) whose centers lie in
/// the domain, with nodes at the cell corners. Cell centers coincide with the
/// nodes of [`make_grid`] for the same domain and spacing.
///
/// Local corner `b` of a cell has offset `+h/2` along axis `k` when bit `k` of
/// `b` is set and `-h/2` otherwise.
#[derive(Debug, Clone)]
pub struct CellComplex {
    dim: usize,
    h: f64,
    domain: Domain,
    nodes: Vec<f64>,
    cells: Vec<u32>,
    centers: Vec<f64>,
    lumped: Vec<f64>,
}

impl CellComplex {
    pub fn new(domain: &Domain, h: f64) -> Result<Self> {
        let extent = domain.extent();
        if !(h > 0.0 && h < extent) {
            return Err(Error::DegenerateGrid { h, extent });
        }
        let dim = domain.dim();
        let n = (domain.bounding_half_width() / h).ceil() as usize;
        let cell_side = 2 * n + 1;
        let corner_side = cell_side + 1;
        let c = domain.center();
        let corner_origin: Vec<f64> = c.iter().map(|ci| ci - h * (n as f64 + 0.5)).collect();
        let mut corners = MaskedLattice::new(corner_origin, h, vec![corner_side; dim]);
        let cell_origin: Vec<f64> = c.iter().map(|ci| ci - h * n as f64).collect();
        let cell_lattice = MaskedLattice::new(cell_origin, h, vec![cell_side; dim]);
        let nc = 1usize << dim;
        let mut nodes = Vec::new();
        let mut cells = Vec::new();
        let mut centers = Vec::new();
        let mut x = vec![0.0; dim];
        let mut corner_pos = vec![0.0; dim];
        for flat in 0..cell_lattice.slot.len() {
            cell_lattice.position(flat, &mut x);
            if !domain.contains(&x) {
                continue;
            }
            centers.extend_from_slice(&x);
            let idx = cell_lattice.multi_index(flat);
            for b in 0..nc {
                let cflat: usize = (0..dim).map(|k| (idx[k] + ((b >> k) & 1)) * corners.strides[k]).sum();
                let id = match corners.slot[cflat] {
                    NO_NODE => {
                        corners.position(cflat, &mut corner_pos);
                        nodes.extend_from_slice(&corner_pos);
                        corners.push(cflat)
                    }
                    id => id as usize,
                };
                cells.push(id as u32);
            }
        }
        let n_nodes = corners.len();
        if centers.is_empty() {
            return Err(Error::DegenerateGrid { h, extent });
        }
        let share = h.powi(dim as i32) / nc as f64;
        let mut lumped = vec![0.0; n_nodes];
        for &id in &cells {
            lumped[id as usize] += share;
        }
        Ok(Self { dim, h, domain: domain.clone(), nodes, cells, centers, lumped })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn n_nodes(&self) -> usize {
        self.lumped.len()
    }

    pub fn n_cells(&self) -> usize {
        self.centers.len() / self.dim
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn cell_center(&self, c: usize) -> &[f64] {
        &self.centers[c * self.dim..(c + 1) * self.dim]
    }

    /// Corner node indices of cell `c`, in local corner order.
    pub fn cell(&self, c: usize) -> &[u32] {
        let nc = 1 << self.dim;
        &self.cells[c * nc..(c + 1) * nc]
    }

    /// Lumped node masses: each cell gives `h^d / 2^d` to each corner.
    pub fn lumped(&self) -> &[f64] {
        &self.lumped
    }

    /// Total measure of the cell union.
    pub fn measure(&self) -> f64 {
        self.n_cells() as f64 * self.h.powi(self.dim as i32)
    }

    /// Node values of `f`.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        self.nodes.chunks_exact(self.dim).map(f).collect()
    }

    /// Quadrature view: corner nodes with lumped weights.
    pub fn quadrature(&self) -> QuadratureGrid {
        QuadratureGrid {
            dim: self.dim,
            nodes: self.nodes.clone(),
            weights: self.lumped.clone(),
            spacing: self.h,
            domain: self.domain.clone(),
            layout: GridLayout::Scattered,
        }
    }
}

/// Integer lattice `spacing · Z^d` restricted to `|ℓ|_∞ <= index_bound`,
/// with balls of radius `r0` around every lattice point.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeCovering {
    dim: usize,
    spacing: f64,
    r0: f64,
    index_bound: usize,
}

/// A covering center together with its integer lattice index.
#[derive(Debug, Clone, PartialEq)]
pub struct CoveringCenter {
    pub index: Vec<i64>,
    pub point: Vec<f64>,
}

impl CoveringCenter {
    pub fn norm(&self) -> f64 {
        self.point.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

impl LatticeCovering {
    /// Parameters are range-checked only; whether the balls actually cover
    /// `R^d` is reported by [`LatticeCovering::is_rho_covering`].
    pub fn new(dim: usize, spacing: f64, r0: f64, index_bound: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if !(spacing > 0.0 && spacing.is_finite()) || !(r0 > 0.0 && r0.is_finite()) {
            return Err(invalid("covering spacing and radius must be positive"));
        }
        if index_bound == 0 {
            return Err(invalid("index bound must be positive"));
        }
        Ok(Self { dim, spacing, r0, index_bound })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn index_bound(&self) -> usize {
        self.index_bound
    }

    /// Every lattice point with `|ℓ|_∞ <= index_bound`, sorted by distance
    /// from the origin and then lexicographically by index.
    pub fn centers(&self) -> Vec<CoveringCenter> {
        let b = self.index_bound as i64;
        let side = (2 * b + 1) as usize;
        let total = side.pow(self.dim as u32);
        let mut idx: Vec<Vec<i64>> = (0..total)
            .map(|mut flat| {
                let mut v = vec![0i64; self.dim];
                for k in (0..self.dim).rev() {
                    v[k] = (flat % side) as i64 - b;
                    flat /= side;
                }
                v
            })
            .collect();
        idx.sort_by(|a, c| {
            let na: i64 = a.iter().map(|x| x * x).sum();
            let nc: i64 = c.iter().map(|x| x * x).sum();
            na.cmp(&nc).then_with(|| a.cmp(c))
        });
        idx.into_iter().map(|index| self.center_of(index)).collect()
    }

    /// Lattice points `n · e_axis`, `n = 0..=index_bound`.
    pub fn axis_centers(&self, axis: usize) -> Vec<CoveringCenter> {
        (0..=self.index_bound as i64)
            .map(|n| {
                let mut index = vec![0; self.dim];
                index[axis] = n;
                self.center_of(index)
            })
            .collect()
    }

    fn center_of(&self, index: Vec<i64>) -> CoveringCenter {
        let point = index.iter().map(|&i| i as f64 * self.spacing).collect();
        CoveringCenter { index, point }
    }

    /// Returns `(r0 > spacing·√d/2, r0 - spacing·√d/2)`: a cube cell's corner
    /// is the point farthest from every lattice point, so the balls cover
    /// with margin `ρ` exactly when this difference is positive.
    pub fn is_rho_covering(&self) -> (bool, f64) {
        let corner = self.spacing * (self.dim as f64).sqrt() / 2.0;
        let rho = self.r0 - corner;
        (rho > 0.0, rho)
    }
}

/// Plain point list of [`LatticeCovering::centers`].
pub fn covering_centers(cov: &LatticeCovering) -> Vec<Vec<f64>> {
    cov.centers().into_iter().map(|c| c.point).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn covering_enumeration() {
        let cov = LatticeCovering::new(1, 1.0, 0.6, 1).unwrap();
        assert_eq!(covering_centers(&cov), vec![vec![0.0], vec![-1.0], vec![1.0]]);
        let cov = LatticeCovering::new(3, 1.0, 0.9, 2).unwrap();
        let centers = cov.centers();
        assert_eq!(centers.len(), 125);
        assert!(centers.windows(2).all(|w| w[0].norm() <= w[1].norm() + 1e-15));
        assert_eq!(centers, cov.centers());
    }

    #[test]
    fn rho_covering_threshold() {
        let f = |d, r0| LatticeCovering::new(d, 1.0, r0, 1).unwrap().is_rho_covering();
        assert!(!f(3, 0.8).0);
        let (ok, rho) = f(3, 1.0);
        assert!(ok && (rho - (1.0 - 3f64.sqrt() / 2.0)).abs() < 1e-15);
        let (ok, rho) = f(1, 0.6);
        assert!(ok && (rho - 0.1).abs() < 1e-12);
        let (ok, rho) = f(3, 0.9);
        assert!(ok && (rho - (0.9 - 3f64.sqrt() / 2.0)).abs() < 1e-15);
    }

    // Brute-force check of the covering margin: every sampled point of the
    // unit cell has its ρ-ball inside the ball around the nearest corner.
    #[test]
    fn rho_covering_geometric_oracle() {
        let cov = LatticeCovering::new(3, 1.0, 0.9, 1).unwrap();
        let (_, rho) = cov.is_rho_covering();
        let m = 12;
        for i in 0..=m {
            for j in 0..=m {
                for k in 0..=m {
                    let p = [i as f64 / m as f64, j as f64 / m as f64, k as f64 / m as f64];
                    let nearest = p.map(|x| x.round());
                    let d = dist2(&p, &nearest).sqrt();
                    assert!(d + rho <= 0.9 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn ball_grid_volume() {
        let ball: Domain = Ball::centered(3, 1.0).unwrap().into();
        let g = make_grid(&ball, 1.0 / 32.0).unwrap();
        let exact = 4.0 * PI / 3.0;
        assert!((g.total_weight() - exact).abs() < 0.03 * exact);
        assert!(g.nodes().all(|x| ball.contains(x)));
    }

    #[test]
    fn layer_grid_volume() {
        let layer: Domain = SphericalLayer::new(vec![0.0; 3], 0.5, 1.0).unwrap().into();
        let g = make_grid(&layer, 1.0 / 32.0).unwrap();
        let exact = 4.0 * PI / 3.0 * (1.0 - 0.125);
        assert!((g.total_weight() - exact).abs() < 0.03 * exact);
    }

    #[test]
    fn degenerate_spacing_rejected() {
        let ball: Domain = Ball::centered(3, 0.5).unwrap().into();
        assert!(matches!(make_grid(&ball, 1.0), Err(Error::DegenerateGrid { .. })));
        assert!(make_grid(&ball, 0.0).is_err());
    }

    #[test]
    fn grid_error_shrinks_under_refinement() {
        let ball: Domain = Ball::centered(3, 1.0).unwrap().into();
        let exact = ball.measure();
        let errs: Vec<f64> = [8.0, 16.0, 32.0]
            .iter()
            .map(|n| (make_grid(&ball, 1.0 / n).unwrap().total_weight() - exact).abs())
            .collect();
        assert!(errs[2] < errs[0]);
        assert!(errs[2] < 4.0 / 32.0 * exact);
    }

    #[test]
    fn triangle_weights() {
        for (r, want) in [(1.0, 0.5), (2.0, 2.0)] {
            let t = triangle_grid(r, 64).unwrap();
            assert!((t.total_weight() - want).abs() < 1e-12);
            assert!(t.nodes.iter().all(|&(s, tt)| 0.0 < s && s < tt && tt < r));
        }
        assert!(triangle_grid(1.0, 1).is_err());
    }

    #[test]
    fn spherical_grid_is_exact_for_radial_polynomials() {
        let ball = Ball::new(vec![0.3, -0.2, 1.0], 0.7).unwrap();
        let g = spherical_grid(&ball, &uniform_edges(0.7, 4), 3, 6, 12).unwrap();
        assert!((g.total_weight() - ball.measure()).abs() < 1e-12);
        let c = ball.center().to_vec();
        let vals = g.sample(|x| dist2(x, &c));
        // ∫ ρ² over the ball = 4π r^5 / 5
        let exact = 4.0 * PI * 0.7f64.powi(5) / 5.0;
        assert!((g.integrate_values(&vals) - exact).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_is_seeded() {
        let ball: Domain = Ball::centered(3, 1.0).unwrap().into();
        let a = monte_carlo_grid(&ball, 1000, 7).unwrap();
        let b = monte_carlo_grid(&ball, 1000, 7).unwrap();
        assert_eq!(a.node(999), b.node(999));
        assert!(a.nodes().all(|x| ball.contains(x)));
    }

    #[test]
    fn cell_complex_matches_grid() {
        let ball: Domain = Ball::centered(3, 1.0).unwrap().into();
        let h = 1.0 / 8.0;
        let cc = CellComplex::new(&ball, h).unwrap();
        let g = make_grid(&ball, h).unwrap();
        assert_eq!(cc.n_cells(), g.len());
        assert!((cc.measure() - g.total_weight()).abs() < 1e-12);
        assert!((cc.lumped().iter().sum::<f64>() - cc.measure()).abs() < 1e-12);
        // Corner b of a cell sits at center + h(b_k - 1/2).
        let cell = cc.cell(5);
        let center = cc.cell_center(5).to_vec();
        for (b, &id) in cell.iter().enumerate() {
            for k in 0..3 {
                let off = if (b >> k) & 1 == 1 { 0.5 } else { -0.5 };
                assert!((cc.node(id as usize)[k] - center[k] - off * h).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn boundary_distances() {
        let ball: Domain = Ball::centered(3, 1.0).unwrap().into();
        assert!((ball.boundary_distance(&[0.5, 0.0, 0.0], 0, 1.0) - 0.5).abs() < 1e-14);
        assert!((ball.boundary_distance(&[0.5, 0.0, 0.0], 0, -1.0) - 1.5).abs() < 1e-14);
        let layer: Domain = SphericalLayer::new(vec![0.0; 3], 0.5, 1.0).unwrap().into();
        assert!((layer.boundary_distance(&[0.75, 0.0, 0.0], 0, -1.0) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn lattice_neighbors() {
        let ball: Domain = Ball::centered(2, 1.0).unwrap().into();
        let g = make_grid(&ball, 0.25).unwrap();
        let lat = g.lattice().unwrap();
        for i in 0..g.len() {
            if let Some(j) = lat.neighbor(i, 0, 1) {
                assert!((g.node(j)[0] - g.node(i)[0] - 0.25).abs() < 1e-12);
                assert_eq!(lat.neighbor(j, 0, -1), Some(i));
            }
        }
    }
}
