//! Finite-volume operators on the staggered grid: viscous Laplacian
//! stencils, central convection, divergence and pressure gradients.

use crate::classify::{NodeTag, TagField};
use crate::exec::Executor;
use crate::field::Field;
use crate::grid::StaggeredGrid;

use super::{BoundaryConditions, WestBoundary};

/// Laplacian stencil `L f_P = e f_E + w f_W + n f_N + s f_S - diag f_P`.
/// A zero coefficient means no coupling (Neumann side); `diag` may exceed
/// the neighbour sum when a Dirichlet ghost value of zero sits off-array.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Lap {
    pub e: f64,
    pub w: f64,
    pub n: f64,
    pub s: f64,
    pub diag: f64,
}

impl Lap {
    #[inline]
    pub fn apply(&self, f: &Field<f64>, i: usize, j: usize) -> f64 {
        let mut acc = -self.diag * f[(i, j)];
        if self.e != 0.0 {
            acc += self.e * f[(i + 1, j)];
        }
        if self.w != 0.0 {
            acc += self.w * f[(i - 1, j)];
        }
        if self.n != 0.0 {
            acc += self.n * f[(i, j + 1)];
        }
        if self.s != 0.0 {
            acc += self.s * f[(i, j - 1)];
        }
        acc
    }
}

/// Viscous stencil at interior `u` node `(i, j)`, `1 <= i < nx`.
#[inline]
pub fn u_laplacian(grid: &StaggeredGrid, bc: &BoundaryConditions, i: usize, j: usize) -> Lap {
    let (nx, ny) = (grid.nx, grid.ny);
    let width = grid.dxc[i];
    let height = grid.dy[j];
    let e = if i + 1 == nx && bc.outlet() {
        0.0
    } else {
        1.0 / (grid.dx[i] * width)
    };
    let w = 1.0 / (grid.dx[i - 1] * width);
    let n = if j + 1 < ny { 1.0 / (grid.dyc[j + 1] * height) } else { 0.0 };
    let s = if j > 0 { 1.0 / (grid.dyc[j] * height) } else { 0.0 };
    Lap {
        e,
        w,
        n,
        s,
        diag: e + w + n + s,
    }
}

/// Viscous stencil at interior `v` node `(i, j)`, `1 <= j < ny`.
#[inline]
pub fn v_laplacian(grid: &StaggeredGrid, bc: &BoundaryConditions, i: usize, j: usize) -> Lap {
    let nx = grid.nx;
    let width = grid.dx[i];
    let height = grid.dyc[j];
    let n = 1.0 / (grid.dy[j] * height);
    let s = 1.0 / (grid.dy[j - 1] * height);
    let e = if i + 1 < nx { 1.0 / (grid.dxc[i + 1] * width) } else { 0.0 };
    let (w, ghost) = if i > 0 {
        (1.0 / (grid.dxc[i] * width), 0.0)
    } else {
        match bc.west {
            // v = 0 on the inlet plane, half a cell away
            WestBoundary::Inlet { .. } => (0.0, 1.0 / (grid.dxc[0] * width)),
            WestBoundary::Slip => (0.0, 0.0),
        }
    };
    Lap {
        e,
        w,
        n,
        s,
        diag: e + w + n + s + ghost,
    }
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

/// `d(uu)/dx + d(uv)/dy` at `u` node `(i, j)`, `1 <= i < nx`.
#[inline]
pub fn u_convection(grid: &StaggeredGrid, u: &Field<f64>, v: &Field<f64>, i: usize, j: usize) -> f64 {
    let ny = grid.ny;
    let ue = 0.5 * (u[(i, j)] + u[(i + 1, j)]);
    let uw = 0.5 * (u[(i - 1, j)] + u[(i, j)]);
    let cx = (ue * ue - uw * uw) / grid.dxc[i];
    // v interpolated to x_i between the centers xc[i-1] and xc[i]
    let tx = grid.dx[i - 1] * 0.5 / grid.dxc[i];
    let flux_n = if j + 1 < ny {
        let ty = (grid.yv()[j + 1] - grid.yc[j]) / grid.dyc[j + 1];
        lerp(u[(i, j)], u[(i, j + 1)], ty) * lerp(v[(i - 1, j + 1)], v[(i, j + 1)], tx)
    } else {
        0.0
    };
    let flux_s = if j > 0 {
        let ty = (grid.yv()[j] - grid.yc[j - 1]) / grid.dyc[j];
        lerp(u[(i, j - 1)], u[(i, j)], ty) * lerp(v[(i - 1, j)], v[(i, j)], tx)
    } else {
        0.0
    };
    cx + (flux_n - flux_s) / grid.dy[j]
}

/// `d(uv)/dx + d(vv)/dy` at `v` node `(i, j)`, `1 <= j < ny`.
#[inline]
pub fn v_convection(
    grid: &StaggeredGrid,
    bc: &BoundaryConditions,
    u: &Field<f64>,
    v: &Field<f64>,
    i: usize,
    j: usize,
) -> f64 {
    let nx = grid.nx;
    let vn = 0.5 * (v[(i, j)] + v[(i, j + 1)]);
    let vs = 0.5 * (v[(i, j - 1)] + v[(i, j)]);
    let cy = (vn * vn - vs * vs) / grid.dyc[j];
    // u interpolated to y_j between the centers yc[j-1] and yc[j]
    let ty = grid.dy[j - 1] * 0.5 / grid.dyc[j];
    let ue = lerp(u[(i + 1, j - 1)], u[(i + 1, j)], ty);
    let uw = lerp(u[(i, j - 1)], u[(i, j)], ty);
    let ve = if i + 1 < nx {
        let tx = (grid.xu()[i + 1] - grid.xc[i]) / grid.dxc[i + 1];
        lerp(v[(i, j)], v[(i + 1, j)], tx)
    } else {
        v[(i, j)]
    };
    let vw = if i > 0 {
        let tx = (grid.xu()[i] - grid.xc[i - 1]) / grid.dxc[i];
        lerp(v[(i - 1, j)], v[(i, j)], tx)
    } else {
        match bc.west {
            WestBoundary::Inlet { .. } => 0.0,
            WestBoundary::Slip => v[(i, j)],
        }
    };
    (ue * ve - uw * vw) / grid.dx[i] + cy
}

/// Central second-order convection on fluid and forcing nodes; zero on
/// solid nodes and on boundary nodes.
pub fn convection_terms(
    exec: &Executor,
    grid: &StaggeredGrid,
    bc: &BoundaryConditions,
    u: &Field<f64>,
    v: &Field<f64>,
    tags: &TagField,
) -> (Field<f64>, Field<f64>) {
    let (nx, ny) = (grid.nx, grid.ny);
    let mut cu = vec![0.0; (nx + 1) * ny];
    exec.parallel_for_rows(&mut cu, nx + 1, |j, row| {
        for i in 1..nx {
            if tags.u[(i, j)] != NodeTag::Solid {
                row[i] = u_convection(grid, u, v, i, j);
            }
        }
    });
    let mut cv = vec![0.0; nx * (ny + 1)];
    exec.parallel_for_rows(&mut cv, nx, |j, row| {
        if j == 0 || j == ny {
            return;
        }
        for (i, c) in row.iter_mut().enumerate() {
            if tags.v[(i, j)] != NodeTag::Solid {
                *c = v_convection(grid, bc, u, v, i, j);
            }
        }
    });
    (Field::from_vec(nx + 1, ny, cu), Field::from_vec(nx, ny + 1, cv))
}

/// Discrete divergence of cell `(i, j)`.
#[inline]
pub fn cell_divergence(grid: &StaggeredGrid, u: &Field<f64>, v: &Field<f64>, i: usize, j: usize) -> f64 {
    (u[(i + 1, j)] - u[(i, j)]) / grid.dx[i] + (v[(i, j + 1)] - v[(i, j)]) / grid.dy[j]
}

pub fn divergence(exec: &Executor, grid: &StaggeredGrid, u: &Field<f64>, v: &Field<f64>) -> Field<f64> {
    let nx = grid.nx;
    let mut d = vec![0.0; nx * grid.ny];
    exec.parallel_for_rows(&mut d, nx, |j, row| {
        for (i, x) in row.iter_mut().enumerate() {
            *x = cell_divergence(grid, u, v, i, j);
        }
    });
    Field::from_vec(nx, grid.ny, d)
}

/// `dp/dx` at interior `u` node `(i, j)`.
#[inline]
pub fn grad_x(grid: &StaggeredGrid, p: &Field<f64>, i: usize, j: usize) -> f64 {
    (p[(i, j)] - p[(i - 1, j)]) / grid.dxc[i]
}

/// `dp/dy` at interior `v` node `(i, j)`.
#[inline]
pub fn grad_y(grid: &StaggeredGrid, p: &Field<f64>, i: usize, j: usize) -> f64 {
    (p[(i, j)] - p[(i, j - 1)]) / grid.dyc[j]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tg_fields(g: &StaggeredGrid) -> (Field<f64>, Field<f64>) {
        let s = super::super::FlowState::from_fn(
            g,
            |x, y| x.sin() * y.cos(),
            |x, y| -x.cos() * y.sin(),
            |_, _| 0.0,
        );
        (s.u, s.v)
    }

    fn convection_error(n: usize) -> f64 {
        let g = StaggeredGrid::uniform((0.0, PI), (0.0, PI), n, n).unwrap();
        let (u, v) = tg_fields(&g);
        let tags = TagField::all_fluid(&g);
        let bc = BoundaryConditions::slip_box();
        let (cu, cv) = convection_terms(&Executor::sequential(), &g, &bc, &u, &v, &tags);
        let mut err: f64 = 0.0;
        for j in 0..n {
            for i in 1..n {
                let x = g.xu()[i];
                err = err.max((cu[(i, j)] - x.sin() * x.cos()).abs());
            }
        }
        for j in 1..n {
            for i in 0..n {
                let y = g.yv()[j];
                err = err.max((cv[(i, j)] - y.sin() * y.cos()).abs());
            }
        }
        err
    }

    #[test]
    fn uniform_flow_has_no_convection() {
        let g = StaggeredGrid::uniform((0.0, 2.0), (0.0, 1.0), 12, 7).unwrap();
        let u = Field::filled(13, 7, 1.0);
        let v = Field::zeros(12, 8);
        let bc = BoundaryConditions::free_stream();
        let (cu, cv) = convection_terms(&Executor::sequential(), &g, &bc, &u, &v, &TagField::all_fluid(&g));
        assert_eq!(cu.max_abs(), 0.0);
        assert_eq!(cv.max_abs(), 0.0);
    }

    #[test]
    fn linear_shear_with_zero_v() {
        let g = StaggeredGrid::uniform((0.0, 1.0), (0.0, 1.0), 8, 8).unwrap();
        let s = super::super::FlowState::from_fn(&g, |_, y| y, |_, _| 0.0, |_, _| 0.0);
        let bc = BoundaryConditions::free_stream();
        let (cu, _) = convection_terms(&Executor::sequential(), &g, &bc, &s.u, &s.v, &TagField::all_fluid(&g));
        assert!(cu.max_abs() < 1e-14);
    }

    #[test]
    fn taylor_green_convection_is_second_order() {
        let e: Vec<f64> = [32, 64, 128].iter().map(|&n| convection_error(n)).collect();
        for w in e.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.2..=4.8).contains(&ratio), "errors {e:?}");
        }
    }

    #[test]
    fn laplacian_exact_on_quadratics() {
        // non-uniform spacing; the u stencil is exact for quadratics in y
        let ax = crate::grid::build_axis(0.0, 3.0, 1.0, 2.0, 0.1, 1.1).unwrap();
        let ay = crate::grid::build_axis(0.0, 3.0, 1.0, 2.0, 0.1, 1.1).unwrap();
        let g = StaggeredGrid::new(ax, ay);
        let bc = BoundaryConditions::slip_box();
        let u = Field::from_fn(g.nx + 1, g.ny, |i, j| g.xu()[i] + 3.0 * g.yc[j]);
        for j in 1..g.ny - 1 {
            for i in 1..g.nx {
                let l = u_laplacian(&g, &bc, i, j);
                assert!(l.apply(&u, i, j).abs() < 1e-9);
            }
        }
    }
}
