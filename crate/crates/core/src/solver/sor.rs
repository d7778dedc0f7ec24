//! Red-black successive over-relaxation on 5-point systems.
//!
//! Nodes are two-coloured by `(i + j) % 2`. Every stencil neighbour of a
//! node has the opposite colour, so all nodes of one colour can be relaxed
//! concurrently. Internally the two colours are stored in separate planes:
//! a colour sweep mutates one plane while only reading the other, which makes
//! the absence of write conflicts a property of the borrow structure rather
//! than of scheduling.

use thiserror::Error;

use crate::exec::Executor;

/// One row `center*x_P + east*x_E + west*x_W + north*x_N + south*x_S = rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StencilRow {
    pub center: f64,
    pub east: f64,
    pub west: f64,
    pub north: f64,
    pub south: f64,
    pub rhs: f64,
    /// Inactive rows are never relaxed; their `x` acts as a fixed (Dirichlet)
    /// value for active neighbours.
    pub active: bool,
}

impl StencilRow {
    pub fn identity(value: f64) -> Self {
        Self {
            center: 1.0,
            rhs: value,
            active: true,
            ..Self::default()
        }
    }

    pub fn inactive() -> Self {
        Self::default()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error("active node ({i}, {j}) has a zero center coefficient")]
    ZeroCenter { i: usize, j: usize },
    #[error("node ({i}, {j}) couples to a neighbour outside the array")]
    DanglingNeighbour { i: usize, j: usize },
    #[error("node ({i}, {j}) shares a parity class with a stencil neighbour")]
    ParityClash { i: usize, j: usize },
}

/// Natural-layout 5-point system over an `nx x ny` array.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystemView {
    pub nx: usize,
    pub ny: usize,
    pub rows: Vec<StencilRow>,
}

impl LinearSystemView {
    pub fn new(nx: usize, ny: usize) -> Self {
        Self {
            nx,
            ny,
            rows: vec![StencilRow::inactive(); nx * ny],
        }
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Red (0) / black (1) colour of node `(i, j)`.
    #[inline]
    pub fn parity(i: usize, j: usize) -> usize {
        (i + j) & 1
    }

    /// Structural checks: nonzero centers on active rows, no couplings off
    /// the array, and every coupled neighbour of the opposite colour.
    pub fn validate(&self) -> Result<(), SystemError> {
        for j in 0..self.ny {
            for i in 0..self.nx {
                let r = &self.rows[self.idx(i, j)];
                if !r.active {
                    continue;
                }
                if r.center == 0.0 {
                    return Err(SystemError::ZeroCenter { i, j });
                }
                let nbs = [
                    (r.east, i + 1 < self.nx, (i + 1, j)),
                    (r.west, i > 0, (i.wrapping_sub(1), j)),
                    (r.north, j + 1 < self.ny, (i, j + 1)),
                    (r.south, j > 0, (i, j.wrapping_sub(1))),
                ];
                for (coef, exists, (ni, nj)) in nbs {
                    if coef == 0.0 {
                        continue;
                    }
                    if !exists {
                        return Err(SystemError::DanglingNeighbour { i, j });
                    }
                    if Self::parity(ni, nj) == Self::parity(i, j) {
                        return Err(SystemError::ParityClash { i, j });
                    }
                }
            }
        }
        Ok(())
    }

    /// `A x` in natural layout (zero on inactive rows).
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        for j in 0..self.ny {
            for i in 0..self.nx {
                let k = self.idx(i, j);
                let r = &self.rows[k];
                if !r.active {
                    continue;
                }
                let mut s = r.center * x[k];
                if i + 1 < self.nx {
                    s += r.east * x[k + 1];
                }
                if i > 0 {
                    s += r.west * x[k - 1];
                }
                if j + 1 < self.ny {
                    s += r.north * x[k + self.nx];
                }
                if j > 0 {
                    s += r.south * x[k - self.nx];
                }
                out[k] = s;
            }
        }
        out
    }

    /// Max-norm of `rhs - A x` over active rows.
    pub fn residual_max(&self, x: &[f64]) -> f64 {
        let ax = self.apply(x);
        self.rows
            .iter()
            .zip(ax)
            .filter(|(r, _)| r.active)
            .map(|(r, a)| (r.rhs - a).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SorReport {
    /// Completed red+black sweep pairs.
    pub iterations: usize,
    /// Max-norm residual after the last sweep pair.
    pub residual: f64,
    pub converged: bool,
}

/// One colour's coefficients and unknowns. Each row holds the colour's
/// nodes at positions `1..=half` with a zero ghost entry on either side, so
/// that west/east neighbours of a whole row are plain offset slices.
struct Plane {
    c: Vec<f64>,
    c_inv: Vec<f64>,
    e: Vec<f64>,
    w: Vec<f64>,
    n: Vec<f64>,
    s: Vec<f64>,
    rhs: Vec<f64>,
    relax: Vec<f64>,
    x: Vec<f64>,
}

impl Plane {
    fn new(len: usize) -> Self {
        let z = || vec![0.0; len];
        Self {
            c: z(),
            c_inv: z(),
            e: z(),
            w: z(),
            n: z(),
            s: z(),
            rhs: z(),
            relax: z(),
            x: z(),
        }
    }
}

#[derive(Clone, Copy)]
struct Layout {
    nx: usize,
    ny: usize,
    /// Padded row length, `ceil(nx / 2) + 2`.
    width: usize,
}

impl Layout {
    /// First natural column of `color` in row `j`.
    #[inline]
    fn start(color: usize, j: usize) -> usize {
        (color + j) & 1
    }

    /// Number of `color` nodes in row `j`.
    #[inline]
    fn count(&self, color: usize, j: usize) -> usize {
        (self.nx + 1 - Self::start(color, j)) / 2
    }

    /// Natural column `2k + s0` has its west neighbour at padded position
    /// `k + s0` of the other plane and its east neighbour at `k + s0 + 1`.
    fn neighbours<'a>(&self, other: &'a [f64], color: usize, j: usize, n: usize) -> RowNeighbours<'a> {
        let w = self.width;
        let s0 = Self::start(color, j);
        let mid = &other[j * w..(j + 1) * w];
        let north = if j + 1 < self.ny { &other[(j + 1) * w..(j + 2) * w] } else { mid };
        let south = if j > 0 { &other[(j - 1) * w..j * w] } else { mid };
        RowNeighbours {
            east: &mid[s0 + 1..s0 + 1 + n],
            west: &mid[s0..s0 + n],
            north: &north[1..1 + n],
            south: &south[1..1 + n],
        }
    }
}

struct Colored {
    layout: Layout,
    planes: [Plane; 2],
}

/// Borrowed coefficient rows of one colour.
struct RowCoefs<'a> {
    c: &'a [f64],
    c_inv: &'a [f64],
    e: &'a [f64],
    w: &'a [f64],
    n: &'a [f64],
    s: &'a [f64],
    rhs: &'a [f64],
    relax: &'a [f64],
}

/// Neighbour values of one colour row, aligned with its entries.
struct RowNeighbours<'a> {
    east: &'a [f64],
    west: &'a [f64],
    north: &'a [f64],
    south: &'a [f64],
}

impl Colored {
    fn gather(sys: &LinearSystemView, x: &[f64], omega: f64) -> Self {
        let (nx, ny) = (sys.nx, sys.ny);
        let width = nx.div_ceil(2) + 2;
        let mut planes = [Plane::new(width * ny), Plane::new(width * ny)];
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                let r = &sys.rows[k];
                let p = &mut planes[LinearSystemView::parity(i, j)];
                let q = j * width + 1 + i / 2;
                p.x[q] = x[k];
                if r.active {
                    p.c[q] = r.center;
                    p.c_inv[q] = 1.0 / r.center;
                    p.e[q] = r.east;
                    p.w[q] = r.west;
                    p.n[q] = r.north;
                    p.s[q] = r.south;
                    p.rhs[q] = r.rhs;
                    // Decoupled rows are solved exactly by one Gauss-Seidel update.
                    let coupled = r.east != 0.0 || r.west != 0.0 || r.north != 0.0 || r.south != 0.0;
                    p.relax[q] = if coupled { omega } else { 1.0 };
                }
            }
        }
        Self {
            layout: Layout { nx, ny, width },
            planes,
        }
    }

    fn scatter(&self, x: &mut [f64]) {
        let Layout { nx, ny, width } = self.layout;
        for j in 0..ny {
            for i in 0..nx {
                let p = &self.planes[LinearSystemView::parity(i, j)];
                x[j * nx + i] = p.x[j * width + 1 + i / 2];
            }
        }
    }

    fn coefs(plane: &Plane, lo: usize, n: usize) -> RowCoefs<'_> {
        let r = lo..lo + n;
        RowCoefs {
            c: &plane.c[r.clone()],
            c_inv: &plane.c_inv[r.clone()],
            e: &plane.e[r.clone()],
            w: &plane.w[r.clone()],
            n: &plane.n[r.clone()],
            s: &plane.s[r.clone()],
            rhs: &plane.rhs[r.clone()],
            relax: &plane.relax[r],
        }
    }

    fn sweep(&mut self, exec: &Executor, color: usize) {
        let layout = self.layout;
        let width = layout.width;
        let (a, b) = self.planes.split_at_mut(1);
        let (mine, other) = if color == 0 { (&mut a[0], &b[0]) } else { (&mut b[0], &a[0]) };
        let mut x = std::mem::take(&mut mine.x);
        let coefs: &Plane = mine;
        exec.parallel_for_rows(&mut x, width, |j, row| {
            let n = layout.count(color, j);
            let cf = Self::coefs(coefs, j * width + 1, n);
            let nb = layout.neighbours(&other.x, color, j, n);
            let xs = &mut row[1..1 + n];
            for k in 0..n {
                let sum = cf.e[k] * nb.east[k] + cf.w[k] * nb.west[k] + cf.n[k] * nb.north[k] + cf.s[k] * nb.south[k];
                let gs = (cf.rhs[k] - sum) * cf.c_inv[k];
                xs[k] += cf.relax[k] * (gs - xs[k]);
            }
        });
        mine.x = x;
    }

    fn residual(&self, exec: &Executor) -> f64 {
        let layout = self.layout;
        let width = layout.width;
        exec.max(0..layout.ny, 4, |j| {
            let mut m = 0.0_f64;
            for color in 0..2 {
                let mine = &self.planes[color];
                let n = layout.count(color, j);
                let cf = Self::coefs(mine, j * width + 1, n);
                let nb = layout.neighbours(&self.planes[1 - color].x, color, j, n);
                let xs = &mine.x[j * width + 1..j * width + 1 + n];
                for k in 0..n {
                    if cf.relax[k] == 0.0 {
                        continue;
                    }
                    let sum = cf.e[k] * nb.east[k] + cf.w[k] * nb.west[k] + cf.n[k] * nb.north[k] + cf.s[k] * nb.south[k];
                    let r = (cf.rhs[k] - cf.c[k] * xs[k] - sum).abs();
                    // NaN must not be swallowed by max
                    if r.is_nan() {
                        return f64::NAN;
                    }
                    m = m.max(r);
                }
            }
            m
        })
    }
}

/// Solves `system` in place starting from `x`.
///
/// One iteration is a red sweep followed by a black sweep; the max-norm
/// residual over active rows is checked after every pair. Since nodes of one
/// colour never read each other, the iterates are identical for every
/// worker count.
pub fn red_black_sor(
    exec: &Executor,
    system: &LinearSystemView,
    x: &mut [f64],
    omega: f64,
    tol: f64,
    max_iters: usize,
) -> SorReport {
    assert_eq!(x.len(), system.nx * system.ny, "initial guess has wrong length");
    if system.nx == 0 || system.ny == 0 {
        return SorReport {
            iterations: 0,
            residual: 0.0,
            converged: true,
        };
    }
    let mut col = Colored::gather(system, x, omega);
    let mut residual = col.residual(exec);
    let mut iterations = 0;
    while iterations < max_iters {
        col.sweep(exec, 0);
        col.sweep(exec, 1);
        iterations += 1;
        residual = col.residual(exec);
        if residual <= tol || residual.is_nan() {
            break;
        }
    }
    col.scatter(x);
    SorReport {
        iterations,
        residual,
        converged: residual <= tol,
    }
}

/// Residual trace of successive sweep pairs; used to study convergence.
pub fn sor_residual_history(
    exec: &Executor,
    system: &LinearSystemView,
    x: &mut [f64],
    omega: f64,
    pairs: usize,
) -> Vec<f64> {
    let mut col = Colored::gather(system, x, omega);
    let mut hist = Vec::with_capacity(pairs + 1);
    hist.push(col.residual(exec));
    for _ in 0..pairs {
        col.sweep(exec, 0);
        col.sweep(exec, 1);
        hist.push(col.residual(exec));
    }
    col.scatter(x);
    hist
}
