//! Divergence-constrained transport: fields `F` with `div F = W` and zero
//! normal flux, of small `L^p` norm.
//!
//! The radial solver integrates the flux in closed form. The grid solver
//! minimizes the dual energy
//!
//! `J(u) = c_q ∫ (|∇u|² + ε²)^{q/2} + ∫ W u`,  `c_q = (1 - 1/p) p^{1-q}`,
//!
//! over continuous trilinear (Q1) functions on a [`CellComplex`]. Its
//! stationarity condition is `∫ F·∇φ + ∫ W φ = 0` for every hat function `φ`
//! with `F = p^{-1/(p-1)} |∇u|^{q-2} ∇u`, i.e. `div F = W` weakly with no
//! flux through the boundary.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::geometry::{CellComplex, Domain};
use crate::potential::{signed_pow, Fn1d};
use crate::quadrature::{adaptive, gauss_legendre, unit_sphere_area};

/// Closed-form radial flux for a radial source on `B_{r0}`.
#[derive(Debug, Clone)]
pub struct RadialSolution {
    pub dim: usize,
    pub r0: f64,
    pub rho: Vec<f64>,
    /// `|u'|^{d'-2} u'`, vanishing at `r0`.
    pub v: Vec<f64>,
    pub uprime: Vec<f64>,
    /// `∫_B |∇u|^{d'}`.
    pub energy: f64,
    /// `‖F‖_d` of the radial flux `F = G(r) r^{1-d} e_r`.
    pub bound: f64,
    /// `(energy / d^{1/(d-1)})^{1/d}`, which equals `d^{1/d} · bound`.
    pub corollary_quantity: f64,
    /// `∫_0^{r0} W̃ ρ^{d-1} dρ`, zero up to tolerance.
    pub defect: f64,
}

fn cumulative(f: &dyn Fn(f64) -> f64, rho: &[f64], breaks: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(rho.len());
    let mut acc = 0.0;
    let mut prev = 0.0;
    for &r in rho {
        if r > prev {
            let inner: Vec<f64> = breaks.iter().copied().filter(|&b| b > prev && b < r).collect();
            acc += adaptive(f, prev, r, &inner, 1e-14);
        }
        out.push(acc);
        prev = r;
    }
    out
}

/// Radial `d'`-Laplace Neumann problem
/// `-(r^{d-1} v)' / r^{d-1} = d^{1/(d-1)} W̃`, `v(r0) = 0`, regular at 0.
///
/// `breaks` lists the points where `W̃` is not smooth; `samples` is the
/// number of output points on `(0, r0]`.
pub fn radial_neumann_solve(
    wtilde: &Fn1d,
    r0: f64,
    dim: usize,
    breaks: &[f64],
    samples: usize,
) -> Result<RadialSolution> {
    if dim < 2 || !(r0 > 0.0) || samples < 2 {
        return Err(invalid("radial solve needs d >= 2, r0 > 0 and at least two samples"));
    }
    let d = dim as f64;
    let weight = move |rho: f64| rho.powi(dim as i32 - 1);
    let src = |rho: f64| wtilde(rho) * weight(rho);
    let abs_src = |rho: f64| src(rho).abs();
    let inside: Vec<f64> = breaks.iter().copied().filter(|&b| b > 0.0 && b < r0).collect();
    let defect = adaptive(&src, 0.0, r0, &inside, 1e-14);
    let scale = adaptive(&abs_src, 0.0, r0, &inside, 1e-12);
    if defect.abs() > 1e-8 * scale.max(1.0) {
        return Err(Error::Compatibility { defect });
    }
    let rho: Vec<f64> = (1..=samples).map(|i| r0 * i as f64 / samples as f64).collect();
    let g = cumulative(&src, &rho, &inside);
    let c = d.powf(1.0 / (d - 1.0));
    let v: Vec<f64> = rho
        .iter()
        .zip(&g)
        .enumerate()
        .map(|(i, (r, gi))| if i + 1 == samples { 0.0 } else { -c * gi / weight(*r) })
        .collect();
    let uprime: Vec<f64> = v.iter().map(|&x| signed_pow(x, d - 1.0)).collect();

    // ∫|F|^d over the ball with |F| = |G| / r^{d-1}; G between samples by
    // local quadrature from the nearest sample on the left.
    let g_at = |r: f64| -> f64 {
        let k = ((r / r0) * samples as f64).floor() as usize;
        let (base, gb) = if k == 0 { (0.0, 0.0) } else { (rho[k.min(samples) - 1], g[k.min(samples) - 1]) };
        if r <= base {
            return gb;
        }
        let inner: Vec<f64> = inside.iter().copied().filter(|&b| b > base && b < r).collect();
        gb + adaptive(&src, base, r, &inner, 1e-14)
    };
    let integrand = |r: f64| {
        if r <= 0.0 {
            return 0.0;
        }
        let f = g_at(r).abs() / weight(r);
        f.powi(dim as i32) * weight(r)
    };
    let mut pts = inside.clone();
    pts.extend(rho.iter().copied().step_by((samples / 64).max(1)).filter(|&x| x < r0));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let flux_power = unit_sphere_area(dim) * adaptive(&integrand, 0.0, r0, &pts, 1e-13);
    let bound = flux_power.powf(1.0 / d);
    // |∇u|^{d'} = |v|^d = c^d |F|^d.
    let energy = c.powf(d) * flux_power;
    let corollary_quantity = (energy / c).powf(1.0 / d);
    Ok(RadialSolution { dim, r0, rho, v, uprime, energy, bound, corollary_quantity, defect })
}

/// A vector field at the Gauss points of a cell complex.
#[derive(Debug, Clone)]
pub struct VectorFieldGrid {
    pub dim: usize,
    /// Point coordinates, `dim` per point.
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    /// Field components, `dim` per point.
    pub values: Vec<f64>,
}

impl VectorFieldGrid {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn norm(&self, p: f64) -> f64 {
        let s: f64 = self
            .values
            .chunks_exact(self.dim)
            .zip(&self.weights)
            .map(|(f, w)| w * f.iter().map(|x| x * x).sum::<f64>().sqrt().powf(p))
            .sum();
        s.powf(1.0 / p)
    }

    /// `‖F‖_d` with `d` the space dimension.
    pub fn norm_d(&self) -> f64 {
        self.norm(self.dim as f64)
    }
}

/// Reference Q1 data for a cell of side `h` with `2^d` Gauss points.
struct Q1 {
    dim: usize,
    nc: usize,
    /// `∇φ_b` at Gauss point `g`: index `(g * nc + b) * dim + k`.
    grads: Vec<f64>,
    /// `∇φ_a · ∇φ_b` at `g`: index `(g * nc + a) * nc + b`.
    products: Vec<f64>,
    /// Gauss point offsets from the cell center.
    offsets: Vec<f64>,
    weight: f64,
}

impl Q1 {
    fn new(dim: usize, h: f64) -> Self {
        let nc = 1usize << dim;
        let gp = h / (2.0 * 3f64.sqrt());
        let mut offsets = Vec::with_capacity(nc * dim);
        for g in 0..nc {
            for k in 0..dim {
                offsets.push(if (g >> k) & 1 == 1 { gp } else { -gp });
            }
        }
        let mut grads = vec![0.0; nc * nc * dim];
        for g in 0..nc {
            for b in 0..nc {
                for k in 0..dim {
                    let mut v = 1.0;
                    for j in 0..dim {
                        let s = if (b >> j) & 1 == 1 { 1.0 } else { -1.0 };
                        v *= if j == k { s / h } else { 0.5 + s * offsets[g * dim + j] / h };
                    }
                    grads[(g * nc + b) * dim + k] = v;
                }
            }
        }
        let mut products = vec![0.0; nc * nc * nc];
        for g in 0..nc {
            for a in 0..nc {
                for b in 0..nc {
                    products[(g * nc + a) * nc + b] =
                        (0..dim).map(|k| grads[(g * nc + a) * dim + k] * grads[(g * nc + b) * dim + k]).sum();
                }
            }
        }
        Self { dim, nc, grads, products, offsets, weight: h.powi(dim as i32) / nc as f64 }
    }

    /// Gradient of the Q1 interpolant of `u` at every Gauss point of cell `c`.
    fn cell_gradients(&self, grid: &CellComplex, u: &[f64], c: usize, out: &mut [f64]) {
        let corners = grid.cell(c);
        out.iter_mut().for_each(|x| *x = 0.0);
        for g in 0..self.nc {
            for (b, &node) in corners.iter().enumerate() {
                let ub = u[node as usize];
                for k in 0..self.dim {
                    out[g * self.dim + k] += ub * self.grads[(g * self.nc + b) * self.dim + k];
                }
            }
        }
    }
}

/// Symmetric sparse matrix on the node graph of a cell complex.
struct Stiffness {
    ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    /// Position in `vals` of local entry `(a, b)` of every cell.
    slots: Vec<u32>,
    diag: Vec<u32>,
}

impl Stiffness {
    fn new(grid: &CellComplex) -> Self {
        let n = grid.n_nodes();
        let nc = 1usize << grid.dim();
        let mut rows: Vec<Vec<u32>> = vec![Vec::new(); n];
        for c in 0..grid.n_cells() {
            let corners = grid.cell(c);
            for &a in corners {
                rows[a as usize].extend_from_slice(corners);
            }
        }
        let mut ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        ptr.push(0);
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
            cols.extend_from_slice(row);
            ptr.push(cols.len());
        }
        let find = |a: usize, b: u32| -> u32 { (ptr[a] + cols[ptr[a]..ptr[a + 1]].binary_search(&b).unwrap()) as u32 };
        let mut slots = Vec::with_capacity(grid.n_cells() * nc * nc);
        for c in 0..grid.n_cells() {
            let corners = grid.cell(c);
            for &a in corners {
                for &b in corners {
                    slots.push(find(a as usize, b));
                }
            }
        }
        let diag = (0..n).map(|i| find(i, i as u32)).collect();
        let vals = vec![0.0; cols.len()];
        Self { ptr, cols, vals, slots, diag }
    }

    /// `K_ab = Σ_g w κ_{c,g} ∇φ_a·∇φ_b` with `κ` given per Gauss point.
    fn assemble(&mut self, q1: &Q1, kappa: &[f64]) {
        self.vals.iter_mut().for_each(|v| *v = 0.0);
        let nc = q1.nc;
        let mut local = vec![0.0; nc * nc];
        for c in 0..self.slots.len() / (nc * nc) {
            local.iter_mut().for_each(|v| *v = 0.0);
            for g in 0..nc {
                let kw = kappa[c * nc + g] * q1.weight;
                let prod = &q1.products[g * nc * nc..(g + 1) * nc * nc];
                local.iter_mut().zip(prod).for_each(|(l, p)| *l += kw * p);
            }
            for (slot, l) in self.slots[c * nc * nc..(c + 1) * nc * nc].iter().zip(&local) {
                self.vals[*slot as usize] += l;
            }
        }
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let mut s = 0.0;
            for k in self.ptr[i]..self.ptr[i + 1] {
                s += self.vals[k] * x[self.cols[k] as usize];
            }
            *yi = s;
        });
    }

    fn diagonal(&self) -> Vec<f64> {
        self.diag.iter().map(|&k| self.vals[k as usize]).collect()
    }
}

// Fixed chunks summed in order keep results independent of thread count.
const CHUNK: usize = 4096;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let parts: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect();
    parts.iter().sum()
}

/// Jacobi-preconditioned CG for the singular Neumann system `K x = b` with
/// `Σ b = 0`. Returns the iteration count or `None` when the cap is hit.
fn pcg(k: &Stiffness, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Option<usize> {
    let n = b.len();
    let inv: Vec<f64> = k.diagonal().iter().map(|d| if *d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Some(0);
    }
    let mut r = vec![0.0; n];
    k.apply(x, &mut r);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    let mut z: Vec<f64> = r.iter().zip(&inv).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];
    for it in 0..max_iter {
        if dot(&r, &r).sqrt() <= tol * bnorm {
            return Some(it);
        }
        k.apply(&p, &mut q);
        let pq = dot(&p, &q);
        if pq <= 0.0 {
            return None;
        }
        let alpha = rz / pq;
        x.par_iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.par_iter_mut().zip(&q).for_each(|(ri, qi)| *ri -= alpha * qi);
        z.par_iter_mut().zip(r.par_iter().zip(&inv)).for_each(|(zi, (ri, ii))| *zi = ri * ii);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.par_iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    None
}

/// Controls for [`grid_plaplace_minimize_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PLaplaceOptions {
    /// Stop when the relative energy decrease falls below this.
    pub tol: f64,
    pub max_iter: usize,
    /// `ε` relative to the gradient scale of the problem.
    pub epsilon: f64,
    /// Weak divergence residual required at convergence, relative to
    /// `max |W|`.
    pub stationarity: f64,
    /// Re-solve with `100 ε` and report the relative change of `‖F‖_p`.
    pub sensitivity: bool,
}

impl Default for PLaplaceOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 300, epsilon: 1e-8, stationarity: 1e-7, sensitivity: true }
    }
}

/// Minimizer of the dual energy and the field built from it.
#[derive(Debug, Clone)]
pub struct PLaplaceSolution {
    pub p: f64,
    /// Node values, zero mean with respect to the lumped masses.
    pub u: Vec<f64>,
    pub field: VectorFieldGrid,
    /// `‖F‖_p`.
    pub norm: f64,
    /// Value of the dual energy `J` at `u`.
    pub energy: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Absolute regularization used.
    pub epsilon: f64,
    /// `|‖F‖(100ε) - ‖F‖(ε)| / ‖F‖(ε)`, when requested.
    pub epsilon_sensitivity: Option<f64>,
}

/// Load vector `∫ W φ_i` from node values with lumped masses.
pub fn nodal_load(grid: &CellComplex, w: &[f64]) -> Vec<f64> {
    w.iter().zip(grid.lumped()).map(|(a, m)| a * m).collect()
}

/// Load vector `∫ W φ_i` by tensor Gauss quadrature with `points` nodes per
/// axis in every cell; suited to sources that vary inside a cell.
pub fn quadrature_load(grid: &CellComplex, w: &(dyn Fn(&[f64]) -> f64 + Sync), points: usize) -> Vec<f64> {
    let dim = grid.dim();
    let h = grid.spacing();
    let nc = 1usize << dim;
    let (gx, gw) = gauss_legendre(points.max(1));
    let total = gx.len().pow(dim as u32);
    let per_cell: Vec<Vec<(u32, f64)>> = (0..grid.n_cells())
        .into_par_iter()
        .map(|c| {
            let center = grid.cell_center(c);
            let mut acc = vec![0.0; nc];
            let mut x = vec![0.0; dim];
            for flat in 0..total {
                let mut rem = flat;
                let mut wt = 1.0;
                let mut local = vec![0.0; dim];
                for k in 0..dim {
                    let j = rem % gx.len();
                    rem /= gx.len();
                    local[k] = 0.5 * gx[j];
                    x[k] = center[k] + h * local[k];
                    wt *= 0.5 * gw[j];
                }
                let val = w(&x) * wt * h.powi(dim as i32);
                for (b, a) in acc.iter_mut().enumerate() {
                    let mut phi = 1.0;
                    for k in 0..dim {
                        let s = if (b >> k) & 1 == 1 { 1.0 } else { -1.0 };
                        phi *= 0.5 + s * local[k];
                    }
                    *a += val * phi;
                }
            }
            grid.cell(c).iter().copied().zip(acc).collect()
        })
        .collect();
    let mut load = vec![0.0; grid.n_nodes()];
    for cell in per_cell {
        for (node, v) in cell {
            load[node as usize] += v;
        }
    }
    load
}

/// Relative compatibility defect `|Σ b| / Σ |b|` of a load vector.
pub fn load_defect(load: &[f64]) -> f64 {
    let s: f64 = load.iter().sum();
    let a: f64 = load.iter().map(|x| x.abs()).sum();
    if a == 0.0 {
        0.0
    } else {
        s.abs() / a
    }
}

/// Subtracts the mean of the source from a load vector, so that `Σ b = 0`.
pub fn center_load(grid: &CellComplex, load: &mut [f64]) -> f64 {
    let mean = load.iter().sum::<f64>() / grid.measure();
    load.iter_mut().zip(grid.lumped()).for_each(|(b, m)| *b -= mean * m);
    mean
}

/// Minimizer for node values `w` (lumped load) with default options.
pub fn grid_plaplace_minimize(w: &[f64], p: f64, grid: &CellComplex) -> Result<PLaplaceSolution> {
    if w.len() != grid.n_nodes() {
        return Err(invalid("source length differs from node count"));
    }
    grid_plaplace_minimize_with(&nodal_load(grid, w), p, grid, &PLaplaceOptions::default())
}

struct Energy {
    q: f64,
    cq: f64,
    flux: f64,
}

impl Energy {
    fn new(p: f64) -> Self {
        let q = p / (p - 1.0);
        Self { q, cq: (1.0 - 1.0 / p) * p.powf(1.0 - q), flux: p.powf(-1.0 / (p - 1.0)) }
    }

    fn value(&self, q1: &Q1, grid: &CellComplex, load: &[f64], u: &[f64], eps: f64) -> f64 {
        self.value_with_scale(q1, grid, load, u, eps).0
    }

    /// Energy and the magnitude of its terms, which bounds its roundoff.
    fn value_with_scale(&self, q1: &Q1, grid: &CellComplex, load: &[f64], u: &[f64], eps: f64) -> (f64, f64) {
        let nc = q1.nc;
        let dim = q1.dim;
        let grad_part: f64 = (0..grid.n_cells())
            .into_par_iter()
            .map(|c| {
                let mut gr = vec![0.0; nc * dim];
                q1.cell_gradients(grid, u, c, &mut gr);
                gr.chunks_exact(dim)
                    .map(|g| (g.iter().map(|x| x * x).sum::<f64>() + eps * eps).powf(self.q / 2.0))
                    .sum::<f64>()
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum();
        let a = self.cq * q1.weight * grad_part;
        let b: f64 = load.iter().zip(u).map(|(x, y)| (x * y).abs()).sum();
        (a + dot(load, u), a + b)
    }

    fn weights(&self, q1: &Q1, grid: &CellComplex, u: &[f64], eps: f64) -> Vec<f64> {
        let nc = q1.nc;
        let dim = q1.dim;
        let mut kappa = vec![0.0; grid.n_cells() * nc];
        kappa.par_chunks_mut(nc).enumerate().for_each(|(c, out)| {
            let mut gr = vec![0.0; nc * dim];
            q1.cell_gradients(grid, u, c, &mut gr);
            for (o, g) in out.iter_mut().zip(gr.chunks_exact(dim)) {
                *o = self.flux * (g.iter().map(|x| x * x).sum::<f64>() + eps * eps).powf((self.q - 2.0) / 2.0);
            }
        });
        kappa
    }
}

/// Dual energy `J(u)` with absolute regularization `eps`.
pub fn dual_energy(u: &[f64], load: &[f64], p: f64, grid: &CellComplex, eps: f64) -> f64 {
    Energy::new(p).value(&Q1::new(grid.dim(), grid.spacing()), grid, load, u, eps)
}

fn zero_mean(grid: &CellComplex, u: &mut [f64]) {
    let m: f64 = u.iter().zip(grid.lumped()).map(|(a, b)| a * b).sum::<f64>() / grid.measure();
    u.iter_mut().for_each(|x| *x -= m);
}

struct Minimizer<'a> {
    grid: &'a CellComplex,
    q1: Q1,
    k: Stiffness,
    energy: Energy,
    load: &'a [f64],
}

impl Minimizer<'_> {
    /// Majorize-minimize (Kačanov) iterations from `u`, each checked for
    /// descent with step halving along the update direction. Stops once the
    /// relative energy decrease is below `tol` and the weak divergence
    /// residual is below `stat` (absolute, in units of the source).
    fn run(&mut self, u: &mut Vec<f64>, eps: f64, tol: f64, stat: f64, max_iter: usize) -> Result<(f64, usize, bool)> {
        let rhs: Vec<f64> = self.load.iter().map(|b| -b).collect();
        let n = u.len();
        let (mut j, mut scale) = self.energy.value_with_scale(&self.q1, self.grid, self.load, u, eps);
        let mut small_decrease = false;
        let mut grad = vec![0.0; n];
        for it in 1..=max_iter {
            let kappa = self.energy.weights(&self.q1, self.grid, u, eps);
            self.k.assemble(&self.q1, &kappa);
            // K(κ(u)) u + b is the gradient of J at u.
            self.k.apply(u, &mut grad);
            let residual = grad
                .iter()
                .zip(self.load)
                .zip(self.grid.lumped())
                .map(|((g, b), m)| (g + b).abs() / m)
                .fold(0.0, f64::max);
            if small_decrease && residual <= stat {
                return Ok((j, it - 1, true));
            }
            let mut target = u.clone();
            if pcg(&self.k, &rhs, &mut target, 1e-12, 20 * n.max(200)).is_none() {
                return Err(Error::NotConverged { what: "inner conjugate gradients", iterations: 20 * n.max(200) });
            }
            zero_mean(self.grid, &mut target);
            let dir: Vec<f64> = target.iter().zip(u.iter()).map(|(a, b)| a - b).collect();
            let mut step = 1.0;
            let mut accepted = None;
            for _ in 0..40 {
                let trial: Vec<f64> = u.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
                let (jt, st) = self.energy.value_with_scale(&self.q1, self.grid, self.load, &trial, eps);
                // Increases below the roundoff of J are invisible to the
                // line search; the residual test decides convergence there.
                if jt <= j + 1e-13 * scale.max(st) {
                    accepted = Some((trial, jt, st));
                    break;
                }
                step *= 0.5;
            }
            let Some((next, jn, sn)) = accepted else {
                // No descent along the update: stationary up to roundoff.
                return Ok((j, it, true));
            };
            let decrease = j - jn;
            *u = next;
            j = jn;
            scale = sn;
            small_decrease = decrease <= tol * j.abs().max(1e-300);
        }
        Ok((j, max_iter, false))
    }

    fn field(&self, u: &[f64], eps: f64) -> VectorFieldGrid {
        let q1 = &self.q1;
        let (nc, dim) = (q1.nc, q1.dim);
        let cells = self.grid.n_cells();
        let mut points = Vec::with_capacity(cells * nc * dim);
        let mut values = vec![0.0; cells * nc * dim];
        for c in 0..cells {
            let center = self.grid.cell_center(c);
            for g in 0..nc {
                for k in 0..dim {
                    points.push(center[k] + q1.offsets[g * dim + k]);
                }
            }
        }
        values.par_chunks_mut(nc * dim).enumerate().for_each(|(c, out)| {
            q1.cell_gradients(self.grid, u, c, out);
            for g in out.chunks_exact_mut(dim) {
                let s = g.iter().map(|x| x * x).sum::<f64>() + eps * eps;
                let f = self.energy.flux * s.powf((self.energy.q - 2.0) / 2.0);
                g.iter_mut().for_each(|x| *x *= f);
            }
        });
        VectorFieldGrid { dim, points, weights: vec![q1.weight; cells * nc], values }
    }
}

/// Minimizer for an explicit load vector `b_i = ∫ W φ_i`.
///
/// The load must satisfy `|Σ b| <= 1e-8 Σ |b|`; the remaining defect is
/// removed before solving.
pub fn grid_plaplace_minimize_with(
    load: &[f64],
    p: f64,
    grid: &CellComplex,
    opts: &PLaplaceOptions,
) -> Result<PLaplaceSolution> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(invalid(format!("exponent p must lie in (1, ∞), got {p}")));
    }
    if load.len() != grid.n_nodes() {
        return Err(invalid("load length differs from node count"));
    }
    let defect = load_defect(load);
    if defect > 1e-8 {
        return Err(Error::Compatibility { defect: load.iter().sum() });
    }
    let mut load = load.to_vec();
    center_load(grid, &mut load);
    let n = grid.n_nodes();
    let q1 = Q1::new(grid.dim(), grid.spacing());
    let energy = Energy::new(p);
    let q = energy.q;
    if load.iter().all(|b| *b == 0.0) {
        let u = vec![0.0; n];
        let m = Minimizer { grid, q1, k: Stiffness::new(grid), energy, load: &load };
        let field = m.field(&u, 0.0);
        return Ok(PLaplaceSolution {
            p,
            u,
            norm: 0.0,
            field,
            energy: 0.0,
            iterations: 0,
            converged: true,
            epsilon: 0.0,
            epsilon_sensitivity: Some(0.0),
        });
    }

    // Gradient scale from |F| ~ |W| R and |F| = p^{-1/(p-1)} |∇u|^{q-1}.
    let wmax = load.iter().zip(grid.lumped()).map(|(b, m)| (b / m).abs()).fold(0.0, f64::max);
    let extent = grid.domain().bounding_half_width();
    let scale = (wmax * extent / energy.flux).powf(1.0 / (q - 1.0));
    let eps = opts.epsilon * scale;

    let mut m = Minimizer { grid, q1, k: Stiffness::new(grid), energy, load: &load };
    // Start from the Poisson solution rescaled along its ray to the optimum
    // of the unregularized energy.
    let ones = vec![1.0; grid.n_cells() * m.q1.nc];
    m.k.assemble(&m.q1, &ones);
    let rhs: Vec<f64> = load.iter().map(|b| -b).collect();
    let mut u = vec![0.0; n];
    if pcg(&m.k, &rhs, &mut u, 1e-10, 20 * n.max(200)).is_none() {
        return Err(Error::NotConverged { what: "initial Poisson solve", iterations: 20 * n.max(200) });
    }
    zero_mean(grid, &mut u);
    let a = m.energy.value(&m.q1, grid, &vec![0.0; n], &u, 0.0) / m.energy.cq;
    let lin = dot(&load, &u);
    if a > 0.0 && lin < 0.0 {
        let t = (-lin / (q * m.energy.cq * a)).powf(1.0 / (q - 1.0));
        u.iter_mut().for_each(|x| *x *= t);
    }

    let (j, iterations, converged) = m.run(&mut u, eps, opts.tol, opts.stationarity * wmax, opts.max_iter)?;
    let field = m.field(&u, eps);
    let norm = field.norm(p);
    let epsilon_sensitivity = if opts.sensitivity {
        let mut v = u.clone();
        let (_, _, _) = m.run(&mut v, 100.0 * eps, opts.tol, opts.stationarity * wmax, opts.max_iter.min(50))?;
        let other = m.field(&v, 100.0 * eps).norm(p);
        Some(((other - norm) / norm).abs())
    } else {
        None
    };
    Ok(PLaplaceSolution { p, u, field, norm, energy: j, iterations, converged, epsilon: eps, epsilon_sensitivity })
}

/// `∫ F·∇φ_i` for every hat function `φ_i`; `F` must live on the Gauss points
/// of `grid`.
fn flux_pairing(f: &VectorFieldGrid, grid: &CellComplex) -> Result<Vec<f64>> {
    let dim = grid.dim();
    let nc = 1usize << dim;
    if f.dim != dim || f.len() != grid.n_cells() * nc {
        return Err(invalid("vector field does not live on this grid's Gauss points"));
    }
    let q1 = Q1::new(dim, grid.spacing());
    let mut out = vec![0.0; grid.n_nodes()];
    for c in 0..grid.n_cells() {
        for (b, &node) in grid.cell(c).iter().enumerate() {
            let mut s = 0.0;
            for g in 0..nc {
                let idx = c * nc + g;
                let fv = f.value(idx);
                let gr = &q1.grads[(g * nc + b) * dim..(g * nc + b + 1) * dim];
                s += f.weights[idx] * fv.iter().zip(gr).map(|(a, b)| a * b).sum::<f64>();
            }
            out[node as usize] += s;
        }
    }
    Ok(out)
}

/// `max_i |∫ F·∇φ_i + ∫ W φ_i| / ∫ φ_i` over the hat functions of the grid,
/// boundary nodes included (which encodes the zero normal flux).
pub fn divergence_residual(f: &VectorFieldGrid, w: &[f64], grid: &CellComplex) -> Result<f64> {
    if w.len() != grid.n_nodes() {
        return Err(invalid("source length differs from node count"));
    }
    let pairing = flux_pairing(f, grid)?;
    Ok(pairing.iter().zip(w).zip(grid.lumped()).map(|((fp, wi), m)| (fp + wi * m).abs() / m).fold(0.0, f64::max))
}

/// [`divergence_residual`] for a source given by its load vector `∫ W φ_i`.
pub fn divergence_residual_load(f: &VectorFieldGrid, load: &[f64], grid: &CellComplex) -> Result<f64> {
    if load.len() != grid.n_nodes() {
        return Err(invalid("load length differs from node count"));
    }
    let pairing = flux_pairing(f, grid)?;
    Ok(pairing.iter().zip(load).zip(grid.lumped()).map(|((fp, b), m)| (fp + b).abs() / m).fold(0.0, f64::max))
}

/// Node values `W` with `∫ F·∇φ_i + ∫ W φ_i = 0` for every hat function
/// (lumped masses), the weak divergence of `F` with zero normal flux.
pub fn discrete_divergence(f: &VectorFieldGrid, grid: &CellComplex) -> Result<Vec<f64>> {
    let pairing = flux_pairing(f, grid)?;
    Ok(pairing.iter().zip(grid.lumped()).map(|(a, m)| -a / m).collect())
}

/// Upper estimate of the transport bound `D_d(W, Ω)`: `‖F‖_d` of the
/// computed minimizer with `p = d`.
#[derive(Debug, Clone)]
pub struct TransportEstimate {
    pub value: f64,
    /// Mean of `W` removed before solving.
    pub removed_mean: f64,
    pub h: f64,
    pub iterations: usize,
    pub converged: bool,
    pub epsilon_sensitivity: Option<f64>,
}

/// `‖F‖_d` for the source `w` on `domain` at spacing `h`, loads by 3-point
/// Gauss quadrature per axis.
///
/// With `center = true` the mean of `w` over the discrete domain is
/// subtracted first (the source becomes `w - E(w)`); otherwise a source with
/// nonzero mean is an error.
pub fn d_bound(w: &(dyn Fn(&[f64]) -> f64 + Sync), domain: &Domain, h: f64, center: bool) -> Result<TransportEstimate> {
    let grid = CellComplex::new(domain, h)?;
    let mut load = quadrature_load(&grid, w, 3);
    let removed_mean = if center { center_load(&grid, &mut load) } else { 0.0 };
    let opts = PLaplaceOptions { sensitivity: false, ..Default::default() };
    let sol = grid_plaplace_minimize_with(&load, grid.dim() as f64, &grid, &opts)?;
    Ok(TransportEstimate {
        value: sol.norm,
        removed_mean,
        h,
        iterations: sol.iterations,
        converged: sol.converged,
        epsilon_sensitivity: sol.epsilon_sensitivity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Ball, Cube};
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn two_step(dim: usize, r0: f64, rho1: f64, c: f64) -> (Fn1d, f64) {
        let d = dim as i32;
        let c2 = c * rho1.powi(d) / (r0.powi(d) - rho1.powi(d));
        (Arc::new(move |r| if r <= rho1 { c } else { -c2 }), c2)
    }

    #[test]
    fn radial_zero_source() {
        let z: Fn1d = Arc::new(|_| 0.0);
        let s = radial_neumann_solve(&z, 1.0, 3, &[], 100).unwrap();
        assert_eq!(s.bound, 0.0);
        assert!(s.v.iter().chain(&s.uprime).all(|x| *x == 0.0));
    }

    #[test]
    fn radial_two_step_matches_antiderivative() {
        let (r0, rho1, c) = (0.9, 0.4, 2.0);
        let (w, c2) = two_step(3, r0, rho1, c);
        let s = radial_neumann_solve(&w, r0, 3, &[rho1], 90).unwrap();
        let k = 3f64.sqrt();
        for (r, v) in s.rho.iter().zip(&s.v) {
            let g = if *r <= rho1 {
                c * r.powi(3) / 3.0
            } else {
                c * rho1.powi(3) / 3.0 - c2 * (r.powi(3) - rho1.powi(3)) / 3.0
            };
            let exact = -k * g / (r * r);
            assert!((v - exact).abs() < 1e-8, "{r}: {v} vs {exact}");
        }
        for (u, v) in s.uprime.iter().zip(&s.v) {
            assert!((u - v * v.abs()).abs() < 1e-12);
        }
        assert!(s.v.last().unwrap().abs() < 1e-12);
        assert!((s.corollary_quantity - 3f64.powf(1.0 / 3.0) * s.bound).abs() < 1e-10 * s.bound);
    }

    #[test]
    fn radial_rejects_nonzero_mean() {
        let w: Fn1d = Arc::new(|_| 1.0);
        assert!(matches!(radial_neumann_solve(&w, 1.0, 3, &[], 10), Err(Error::Compatibility { .. })));
    }

    #[test]
    fn grid_zero_source() {
        let grid = CellComplex::new(&Domain::Ball(Ball::centered(3, 1.0).unwrap()), 0.25).unwrap();
        let sol = grid_plaplace_minimize(&vec![0.0; grid.n_nodes()], 3.0, &grid).unwrap();
        assert_eq!(sol.norm, 0.0);
        assert!(sol.u.iter().all(|x| *x == 0.0));
        assert_eq!(divergence_residual(&sol.field, &vec![0.0; grid.n_nodes()], &grid).unwrap(), 0.0);
    }

    #[test]
    fn grid_rejects_nonzero_mean() {
        let grid = CellComplex::new(&Domain::Ball(Ball::centered(3, 1.0).unwrap()), 0.25).unwrap();
        assert!(grid_plaplace_minimize(&vec![1.0; grid.n_nodes()], 3.0, &grid).is_err());
    }

    #[test]
    fn random_field_divergence_is_exact() {
        let grid = CellComplex::new(&Domain::Ball(Ball::centered(3, 1.0).unwrap()), 0.2).unwrap();
        let nc = 8;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let len = grid.n_cells() * nc;
        let field = VectorFieldGrid {
            dim: 3,
            points: vec![0.0; len * 3],
            weights: vec![0.2f64.powi(3) / 8.0; len],
            values: (0..len * 3).map(|_| rng.random::<f64>() - 0.5).collect(),
        };
        let w = discrete_divergence(&field, &grid).unwrap();
        assert!(divergence_residual(&field, &w, &grid).unwrap() < 1e-10);
    }

    #[test]
    fn poisson_on_cube_matches_fourier_mode() {
        // p = 2: div(∇u) = 2W, F = ∇u / 2. For W = cos(πx/L) on [0, L]^3
        // the no-flux field is F = (L/π) sin(πx/L) e_1.
        let n = 8;
        let l = 1.0;
        let h = l / (2 * n + 1) as f64;
        let cube = Cube::new(vec![l / 2.0; 3], l / 2.0).unwrap();
        let grid = CellComplex::new(&Domain::Cube(cube), h).unwrap();
        let w = |x: &[f64]| (std::f64::consts::PI * x[0] / l).cos();
        let load = quadrature_load(&grid, &w, 3);
        let sol = grid_plaplace_minimize_with(&load, 2.0, &grid, &PLaplaceOptions::default()).unwrap();
        let exact = (l / std::f64::consts::PI) * (l.powi(3) / 2.0).sqrt();
        assert!((sol.norm - exact).abs() < 0.01 * exact, "{} vs {exact}", sol.norm);
    }
}
