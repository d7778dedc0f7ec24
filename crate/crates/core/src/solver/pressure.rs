//! Mass source, pressure-correction Poisson system, and projection.
//!
//! A face is *open* when its velocity is free to be corrected: an interior
//! fluid face, or the outlet face. Cells with at least one open face are
//! active in the Poisson system. Rows are scaled so that the solver
//! residual equals `dt * (div u - q)` after projection, i.e. the continuity
//! defect in the units of `dt^2 D G phi = dt (div u* - q)`.

use crate::classify::{NodeTag, TagField};
use crate::exec::Executor;
use crate::field::Field;
use crate::grid::StaggeredGrid;

use super::operators::cell_divergence;
use super::sor::{red_black_sor, LinearSystemView, SorReport, StencilRow};
use super::{momentum, BoundaryConditions, SolverError, SolverParams};

/// Which faces of every cell are open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CellFaces {
    pub east: bool,
    pub west: bool,
    pub north: bool,
    pub south: bool,
}

impl CellFaces {
    pub fn any(&self) -> bool {
        self.east || self.west || self.north || self.south
    }
}

#[inline]
pub fn u_face_open(grid: &StaggeredGrid, bc: &BoundaryConditions, tags: &TagField, i: usize, j: usize) -> bool {
    let interior = i > 0 && i < grid.nx;
    let outlet = i == grid.nx && bc.outlet();
    (interior || outlet) && tags.u[(i, j)] == NodeTag::Fluid
}

#[inline]
pub fn v_face_open(grid: &StaggeredGrid, tags: &TagField, i: usize, j: usize) -> bool {
    j > 0 && j < grid.ny && tags.v[(i, j)] == NodeTag::Fluid
}

#[inline]
pub fn cell_faces(grid: &StaggeredGrid, bc: &BoundaryConditions, tags: &TagField, i: usize, j: usize) -> CellFaces {
    CellFaces {
        east: u_face_open(grid, bc, tags, i + 1, j),
        west: u_face_open(grid, bc, tags, i, j),
        north: v_face_open(grid, tags, i, j + 1),
        south: v_face_open(grid, tags, i, j),
    }
}

/// Net flux through body-tagged interior faces per unit cell volume, for
/// cells that also have an open face; zero elsewhere. Face velocities are
/// taken relative to the body velocity `body_vel`, so the fluid faces of a
/// cut cell carry the volume the body sweeps through it.
pub fn mass_source_field(
    exec: &Executor,
    grid: &StaggeredGrid,
    bc: &BoundaryConditions,
    u: &Field<f64>,
    v: &Field<f64>,
    tags: &TagField,
    body_vel: (f64, f64),
) -> Field<f64> {
    let (ub, vb) = body_vel;
    let (nx, ny) = (grid.nx, grid.ny);
    let mut q = vec![0.0; nx * ny];
    exec.parallel_for_rows(&mut q, nx, |j, row| {
        for (i, out) in row.iter_mut().enumerate() {
            if !cell_faces(grid, bc, tags, i, j).any() {
                continue;
            }
            let mut s = 0.0;
            if i + 1 < nx && tags.u[(i + 1, j)].is_body() {
                s += (u[(i + 1, j)] - ub) / grid.dx[i];
            }
            if i > 0 && tags.u[(i, j)].is_body() {
                s -= (u[(i, j)] - ub) / grid.dx[i];
            }
            if j + 1 < ny && tags.v[(i, j + 1)].is_body() {
                s += (v[(i, j + 1)] - vb) / grid.dy[j];
            }
            if j > 0 && tags.v[(i, j)].is_body() {
                s -= (v[(i, j)] - vb) / grid.dy[j];
            }
            *out = s;
        }
    });
    Field::from_vec(nx, ny, q)
}

/// Pressure-correction system; `rhs = -dt (div u* - q)` so the centre
/// coefficients are positive.
pub fn assemble_pressure_system(
    exec: &Executor,
    grid: &StaggeredGrid,
    bc: &BoundaryConditions,
    dt: f64,
    u: &Field<f64>,
    v: &Field<f64>,
    q: &Field<f64>,
    tags: &TagField,
) -> LinearSystemView {
    let (nx, ny) = (grid.nx, grid.ny);
    let dt2 = dt * dt;
    let mut rows = vec![StencilRow::inactive(); nx * ny];
    exec.parallel_for_rows(&mut rows, nx, |j, row| {
        for (i, r) in row.iter_mut().enumerate() {
            let f = cell_faces(grid, bc, tags, i, j);
            if !f.any() {
                continue;
            }
            let mut center = 0.0;
            let mut east = 0.0;
            if f.east {
                let a = dt2 / (grid.dx[i] * grid.dxc[i + 1]);
                center += a;
                // the outlet ghost value is zero
                if i + 1 < nx {
                    east = -a;
                }
            }
            let mut west = 0.0;
            if f.west {
                let a = dt2 / (grid.dx[i] * grid.dxc[i]);
                center += a;
                west = -a;
            }
            let mut north = 0.0;
            if f.north {
                let a = dt2 / (grid.dy[j] * grid.dyc[j + 1]);
                center += a;
                north = -a;
            }
            let mut south = 0.0;
            if f.south {
                let a = dt2 / (grid.dy[j] * grid.dyc[j]);
                center += a;
                south = -a;
            }
            *r = StencilRow {
                center,
                east,
                west,
                north,
                south,
                rhs: -dt * (cell_divergence(grid, u, v, i, j) - q[(i, j)]),
                active: true,
            };
        }
    });
    LinearSystemView { nx, ny, rows }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PressureSolve {
    pub phi: Field<f64>,
    pub report: SorReport,
}

/// Solves for the correction `phi`, starting from `guess`.
#[allow(clippy::too_many_arguments)]
pub fn pressure_poisson(
    exec: &Executor,
    grid: &StaggeredGrid,
    bc: &BoundaryConditions,
    params: &SolverParams,
    u: &Field<f64>,
    v: &Field<f64>,
    q: &Field<f64>,
    tags: &TagField,
    guess: &Field<f64>,
) -> Result<PressureSolve, SolverError> {
    let sys = assemble_pressure_system(exec, grid, bc, params.dt, u, v, q, tags);
    let mut phi = guess.clone();
    for (x, r) in phi.as_mut_slice().iter_mut().zip(&sys.rows) {
        if !r.active {
            *x = 0.0;
        }
    }
    let report = red_black_sor(
        exec,
        &sys,
        phi.as_mut_slice(),
        params.sor_omega,
        params.sor_tol,
        params.sor_max_iters,
    );
    momentum::check(params, "pressure", &report)?;
    Ok(PressureSolve { phi, report })
}

/// `u = u* - dt grad(phi)` on open faces and `p += phi` on active cells.
/// Inactive cells bordering active ones take the mean pressure of those
/// neighbours so that pressure gradients at forcing nodes stay bounded.
#[allow(clippy::too_many_arguments)]
pub fn project_and_correct(
    exec: &Executor,
    grid: &StaggeredGrid,
    bc: &BoundaryConditions,
    dt: f64,
    u: &mut Field<f64>,
    v: &mut Field<f64>,
    p: &mut Field<f64>,
    phi: &Field<f64>,
    tags: &TagField,
) {
    let (nx, ny) = (grid.nx, grid.ny);
    exec.parallel_for_rows(u.as_mut_slice(), nx + 1, |j, row| {
        for (i, x) in row.iter_mut().enumerate() {
            if !u_face_open(grid, bc, tags, i, j) {
                continue;
            }
            let east = if i < nx { phi[(i, j)] } else { 0.0 };
            *x -= dt * (east - phi[(i - 1, j)]) / grid.dxc[i];
        }
    });
    exec.parallel_for_rows(v.as_mut_slice(), nx, |j, row| {
        for (i, x) in row.iter_mut().enumerate() {
            if v_face_open(grid, tags, i, j) {
                *x -= dt * (phi[(i, j)] - phi[(i, j - 1)]) / grid.dyc[j];
            }
        }
    });

    let active: Vec<bool> = (0..nx * ny)
        .map(|k| cell_faces(grid, bc, tags, k % nx, k / nx).any())
        .collect();
    exec.parallel_for_rows(p.as_mut_slice(), nx, |j, row| {
        for (i, x) in row.iter_mut().enumerate() {
            if active[j * nx + i] {
                *x += phi[(i, j)];
            }
        }
    });
    let snapshot = p.clone();
    exec.parallel_for_rows(p.as_mut_slice(), nx, |j, row| {
        for (i, x) in row.iter_mut().enumerate() {
            if active[j * nx + i] {
                continue;
            }
            let mut sum = 0.0;
            let mut n = 0;
            let mut add = |ii: usize, jj: usize| {
                if active[jj * nx + ii] {
                    sum += snapshot[(ii, jj)];
                    n += 1;
                }
            };
            if i > 0 {
                add(i - 1, j);
            }
            if i + 1 < nx {
                add(i + 1, j);
            }
            if j > 0 {
                add(i, j - 1);
            }
            if j + 1 < ny {
                add(i, j + 1);
            }
            if n > 0 {
                *x = sum / n as f64;
            }
        }
    });
}

/// Max of `|div u - q|` over active cells.
pub fn continuity_defect(
    exec: &Executor,
    grid: &StaggeredGrid,
    bc: &BoundaryConditions,
    u: &Field<f64>,
    v: &Field<f64>,
    q: &Field<f64>,
    tags: &TagField,
) -> f64 {
    let nx = grid.nx;
    exec.max(0..nx * grid.ny, 1024, |k| {
        let (i, j) = (k % nx, k / nx);
        if cell_faces(grid, bc, tags, i, j).any() {
            (cell_divergence(grid, u, v, i, j) - q[(i, j)]).abs()
        } else {
            0.0
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::classify_all;
    use crate::kinematics::{FoilGeometry, FoilState};
    use std::f64::consts::PI;

    #[test]
    fn no_body_no_source() {
        let g = StaggeredGrid::uniform((0.0, 1.0), (0.0, 1.0), 8, 8).unwrap();
        let s = crate::solver::FlowState::from_fn(&g, |x, y| x * y, |x, y| x - y, |_, _| 0.0);
        let q = mass_source_field(
            &Executor::sequential(),
            &g,
            &BoundaryConditions::free_stream(),
            &s.u,
            &s.v,
            &TagField::all_fluid(&g),
            (0.0, 0.0),
        );
        assert_eq!(q.max_abs(), 0.0);
    }

    #[test]
    fn source_matches_face_flux_sum() {
        let g = StaggeredGrid::uniform((-1.0, 1.0), (-0.5, 0.5), 40, 20).unwrap();
        let foil = FoilState {
            geometry: FoilGeometry::default(),
            y_disp: 0.01,
            y_vel: 0.4,
            t_bar: 0.0,
        };
        let exec = Executor::sequential();
        let bc = BoundaryConditions::free_stream();
        let tags = classify_all(&exec, &g, &foil);
        let s = crate::solver::FlowState::from_fn(&g, |x, y| (3.0 * x).sin() + y, |x, y| x * y, |_, _| 0.0);
        let q = mass_source_field(&exec, &g, &bc, &s.u, &s.v, &tags, (0.0, 0.4));
        let mut n_src = 0;
        for j in 0..g.ny {
            for i in 0..g.nx {
                // faces: (tag, flux out of the cell)
                let faces = [
                    (tags.u[(i + 1, j)], s.u[(i + 1, j)] * g.dy[j], i + 1 < g.nx),
                    (tags.u[(i, j)], -s.u[(i, j)] * g.dy[j], i > 0),
                    (tags.v[(i, j + 1)], (s.v[(i, j + 1)] - 0.4) * g.dx[i], j + 1 < g.ny),
                    (tags.v[(i, j)], -(s.v[(i, j)] - 0.4) * g.dx[i], j > 0),
                ];
                let n_fluid = faces.iter().filter(|f| f.2 && f.0 == NodeTag::Fluid).count();
                let flux: f64 = faces.iter().filter(|f| f.2 && f.0 != NodeTag::Fluid).map(|f| f.1).sum();
                let expect = if n_fluid > 0 { flux / (g.dx[i] * g.dy[j]) } else { 0.0 };
                assert!((q[(i, j)] - expect).abs() < 1e-12);
                if expect != 0.0 {
                    n_src += 1;
                }
                let all_body = faces.iter().all(|f| f.0.is_body());
                if all_body {
                    assert_eq!(q[(i, j)], 0.0);
                }
            }
        }
        assert!(n_src > 10);
    }

    #[test]
    fn divergence_free_field_gives_zero_correction() {
        let g = StaggeredGrid::uniform((0.0, PI), (0.0, PI), 24, 24).unwrap();
        let exec = Executor::sequential();
        let bc = BoundaryConditions::slip_box();
        // discrete stream function gives an exactly solenoidal field
        let psi = |x: f64, y: f64| x.sin() * y.sin();
        let mut u = Field::zeros(25, 24);
        let mut v = Field::zeros(24, 25);
        let xs = g.x_axis.coords();
        let ys = g.y_axis.coords();
        for j in 0..24 {
            for i in 0..25 {
                u[(i, j)] = (psi(xs[i], ys[j + 1]) - psi(xs[i], ys[j])) / g.dy[j];
            }
        }
        for j in 0..25 {
            for i in 0..24 {
                v[(i, j)] = -(psi(xs[i + 1], ys[j]) - psi(xs[i], ys[j])) / g.dx[i];
            }
        }
        let tags = TagField::all_fluid(&g);
        let q = Field::zeros(24, 24);
        let params = SolverParams::default();
        let sol = pressure_poisson(&exec, &g, &bc, &params, &u, &v, &q, &tags, &Field::zeros(24, 24)).unwrap();
        assert!(sol.phi.max_abs() < 1e-10);
        assert!(sol.report.iterations <= 1);
    }

    /// Manufactured correction on a closed box: `phi = cos(x) cos(y)`.
    fn manufactured_error(n: usize) -> f64 {
        let g = StaggeredGrid::uniform((0.0, PI), (0.0, PI), n, n).unwrap();
        let exec = Executor::sequential();
        let bc = BoundaryConditions::slip_box();
        let dt = 1.0;
        // u* = dt grad(phi) analytic on open faces so div u* = dt lap(phi)
        let mut u = Field::zeros(n + 1, n);
        let mut v = Field::zeros(n, n + 1);
        for j in 0..n {
            for i in 1..n {
                u[(i, j)] = -g.xu()[i].sin() * g.yc[j].cos();
            }
        }
        for j in 1..n {
            for i in 0..n {
                v[(i, j)] = -g.xc[i].cos() * g.yv()[j].sin();
            }
        }
        let tags = TagField::all_fluid(&g);
        let params = SolverParams {
            dt,
            sor_omega: 1.9,
            sor_tol: 1e-10,
            sor_max_iters: 200_000,
            ..SolverParams::default()
        };
        let q = Field::zeros(n, n);
        let sol = pressure_poisson(&exec, &g, &bc, &params, &u, &v, &q, &tags, &Field::zeros(n, n)).unwrap();
        // compare after removing the mean (pure Neumann problem)
        let exact = Field::from_fn(n, n, |i, j| g.xc[i].cos() * g.yc[j].cos());
        let mean = |f: &Field<f64>| f.iter().sum::<f64>() / (n * n) as f64;
        let (ms, me) = (mean(&sol.phi), mean(&exact));
        sol.phi
            .iter()
            .zip(exact.iter())
            .map(|(a, b)| ((a - ms) - (b - me)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn manufactured_solution_is_second_order() {
        let e: Vec<f64> = [16, 32, 64].iter().map(|&n| manufactured_error(n)).collect();
        for w in e.windows(2) {
            let r = w[0] / w[1];
            assert!((3.2..=4.8).contains(&r), "errors {e:?}");
        }
    }

    #[test]
    fn projection_removes_divergence() {
        let g = StaggeredGrid::uniform((-1.0, 2.0), (-1.0, 1.0), 48, 32).unwrap();
        let exec = Executor::sequential();
        let bc = BoundaryConditions::free_stream();
        let foil = FoilState {
            geometry: FoilGeometry::default(),
            y_disp: 0.0,
            y_vel: 0.3,
            t_bar: 0.0,
        };
        let tags = classify_all(&exec, &g, &foil);
        let mut s = crate::solver::FlowState::from_fn(&g, |x, y| 1.0 + 0.2 * (x * y).sin(), |x, _| 0.1 * x, |_, _| 0.0);
        let q = mass_source_field(&exec, &g, &bc, &s.u, &s.v, &tags, (0.0, foil.y_vel));
        let params = SolverParams {
            dt: 0.01,
            sor_omega: 1.8,
            ..SolverParams::default()
        };
        let sol = pressure_poisson(&exec, &g, &bc, &params, &s.u, &s.v, &q, &tags, &Field::zeros(g.nx, g.ny)).unwrap();
        project_and_correct(&exec, &g, &bc, params.dt, &mut s.u, &mut s.v, &mut s.p, &sol.phi, &tags);
        let d = continuity_defect(&exec, &g, &bc, &s.u, &s.v, &q, &tags);
        assert!(d * params.dt <= params.sor_tol * (1.0 + 1e-9), "defect {d}");
        assert!(d <= 10.0 * params.sor_tol / params.dt);
    }

    #[test]
    fn zero_correction_changes_nothing() {
        let g = StaggeredGrid::uniform((0.0, 1.0), (0.0, 1.0), 6, 5).unwrap();
        let mut s = crate::solver::FlowState::from_fn(&g, |x, _| x, |_, y| y, |x, y| x * y);
        let before = s.clone();
        let tags = TagField::all_fluid(&g);
        let phi = Field::zeros(6, 5);
        project_and_correct(
            &Executor::sequential(),
            &g,
            &BoundaryConditions::free_stream(),
            0.1,
            &mut s.u,
            &mut s.v,
            &mut s.p,
            &phi,
            &tags,
        );
        assert_eq!(s, before);
    }
}
