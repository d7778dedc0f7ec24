//! Crank-Nicolson / Adams-Bashforth predictor systems for `u*` and `v*`.

use crate::classify::{NodeTag, TagField};
use crate::exec::Executor;
use crate::field::Field;
use crate::grid::StaggeredGrid;

use super::forcing::ForcingTargets;
use super::operators::{grad_x, grad_y, u_laplacian, v_laplacian};
use super::sor::{red_black_sor, LinearSystemView, SorReport, StencilRow};
use super::{BoundaryConditions, ConvergencePolicy, FlowState, SolverError, SolverParams};

/// Predictor systems plus the unforced explicit estimate used to recover
/// the momentum forcing.
#[derive(Debug, Clone)]
pub struct MomentumSystems {
    pub u: LinearSystemView,
    pub v: LinearSystemView,
    /// `u^n + dt (-AB2 - grad p + L u^n / Re)`.
    pub u_hat: Field<f64>,
    pub v_hat: Field<f64>,
}

/// Assembles, on fluid nodes,
/// `(I - dt/(2Re) L) u* = u^n + dt [-(3/2 C - 1/2 C_prev) - grad p^n] + dt/(2Re) L u^n`.
/// Body nodes get identity rows holding their targets and boundary nodes are
/// inactive.
#[allow(clippy::too_many_arguments)]
pub fn assemble_momentum_system(
    exec: &Executor,
    grid: &StaggeredGrid,
    bc: &BoundaryConditions,
    params: &SolverParams,
    state: &FlowState,
    tags: &TagField,
    conv: (&Field<f64>, &Field<f64>),
    targets: &ForcingTargets,
) -> Result<MomentumSystems, SolverError> {
    let (conv_u_prev, conv_v_prev) = match (&state.conv_u_prev, &state.conv_v_prev) {
        (Some(cu), Some(cv)) => (cu, cv),
        _ if state.step == 0 => conv,
        _ => return Err(SolverError::MissingHistory(state.step)),
    };
    let (nx, ny) = (grid.nx, grid.ny);
    let dt = params.dt;
    let c = 0.5 * dt / params.re;

    let mut u_rows = vec![(StencilRow::inactive(), 0.0); (nx + 1) * ny];
    exec.parallel_for_rows(&mut u_rows, nx + 1, |j, row| {
        for (i, out) in row.iter_mut().enumerate().take(nx).skip(1) {
            let lap = u_laplacian(grid, bc, i, j);
            let lu = lap.apply(&state.u, i, j);
            let explicit = -(1.5 * conv.0[(i, j)] - 0.5 * conv_u_prev[(i, j)]) - grad_x(grid, &state.p, i, j);
            let u_hat = state.u[(i, j)] + dt * (explicit + 2.0 * c / dt * lu);
            let r = match tags.u[(i, j)] {
                NodeTag::Fluid => StencilRow {
                    center: 1.0 + c * lap.diag,
                    east: -c * lap.e,
                    west: -c * lap.w,
                    north: -c * lap.n,
                    south: -c * lap.s,
                    rhs: state.u[(i, j)] + dt * explicit + c * lu,
                    active: true,
                },
                _ => StencilRow::identity(targets.u[(i, j)]),
            };
            *out = (r, u_hat);
        }
    });

    let mut v_rows = vec![(StencilRow::inactive(), 0.0); nx * (ny + 1)];
    exec.parallel_for_rows(&mut v_rows, nx, |j, row| {
        if j == 0 || j == ny {
            return;
        }
        for (i, out) in row.iter_mut().enumerate() {
            let lap = v_laplacian(grid, bc, i, j);
            let lv = lap.apply(&state.v, i, j);
            let explicit = -(1.5 * conv.1[(i, j)] - 0.5 * conv_v_prev[(i, j)]) - grad_y(grid, &state.p, i, j);
            let v_hat = state.v[(i, j)] + dt * (explicit + 2.0 * c / dt * lv);
            let r = match tags.v[(i, j)] {
                NodeTag::Fluid => StencilRow {
                    center: 1.0 + c * lap.diag,
                    east: -c * lap.e,
                    west: -c * lap.w,
                    north: -c * lap.n,
                    south: -c * lap.s,
                    rhs: state.v[(i, j)] + dt * explicit + c * lv,
                    active: true,
                },
                _ => StencilRow::identity(targets.v[(i, j)]),
            };
            *out = (r, v_hat);
        }
    });

    let split = |rows: Vec<(StencilRow, f64)>, nx: usize, ny: usize| {
        let (r, h): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
        (
            LinearSystemView { nx, ny, rows: r },
            Field::from_vec(nx, ny, h),
        )
    };
    let (u, u_hat) = split(u_rows, nx + 1, ny);
    let (v, v_hat) = split(v_rows, nx, ny + 1);
    Ok(MomentumSystems { u, v, u_hat, v_hat })
}

/// Initial guesses for the predictor solve: `u^n` with boundary values.
pub fn boundary_guess(grid: &StaggeredGrid, bc: &BoundaryConditions, state: &FlowState) -> (Field<f64>, Field<f64>) {
    let (nx, ny) = (grid.nx, grid.ny);
    let mut u = state.u.clone();
    for j in 0..ny {
        u[(0, j)] = bc.west_u();
        if !bc.outlet() {
            u[(nx, j)] = 0.0;
        }
    }
    let mut v = state.v.clone();
    for i in 0..nx {
        v[(i, 0)] = 0.0;
        v[(i, ny)] = 0.0;
    }
    (u, v)
}

/// Solves both predictor systems and applies the outflow condition.
pub fn solve_momentum(
    exec: &Executor,
    grid: &StaggeredGrid,
    bc: &BoundaryConditions,
    params: &SolverParams,
    state: &FlowState,
    systems: &MomentumSystems,
) -> Result<(Field<f64>, Field<f64>, [SorReport; 2]), SolverError> {
    let (mut u, mut v) = boundary_guess(grid, bc, state);
    let ru = red_black_sor(exec, &systems.u, u.as_mut_slice(), params.uv_omega, params.uv_tol, params.uv_max_iters);
    check(params, "u momentum", &ru)?;
    let rv = red_black_sor(exec, &systems.v, v.as_mut_slice(), params.uv_omega, params.uv_tol, params.uv_max_iters);
    check(params, "v momentum", &rv)?;
    if bc.outlet() {
        let nx = grid.nx;
        for j in 0..grid.ny {
            u[(nx, j)] = u[(nx - 1, j)];
        }
    }
    Ok((u, v, [ru, rv]))
}

pub(crate) fn check(params: &SolverParams, system: &'static str, r: &SorReport) -> Result<(), SolverError> {
    if r.converged {
        return Ok(());
    }
    if params.on_nonconvergence == ConvergencePolicy::Abort || !r.residual.is_finite() {
        return Err(SolverError::NotConverged {
            system,
            iterations: r.iterations,
            residual: r.residual,
        });
    }
    log::warn!(
        "{system} solve stopped at residual {:e} after {} iterations",
        r.residual,
        r.iterations
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::operators::convection_terms;

    fn no_targets(grid: &StaggeredGrid) -> ForcingTargets {
        ForcingTargets {
            u: Field::zeros(grid.nx + 1, grid.ny),
            v: Field::zeros(grid.nx, grid.ny + 1),
        }
    }

    /// Dense matrix for the u-system built directly from cell geometry.
    fn dense_u(grid: &StaggeredGrid, c: f64) -> Vec<Vec<f64>> {
        let (nx, ny) = (grid.nx, grid.ny);
        let n = (nx + 1) * ny;
        let mut a = vec![vec![0.0; n]; n];
        let xu = grid.xu();
        for j in 0..ny {
            for i in 1..nx {
                let k = j * (nx + 1) + i;
                let vol_w = 0.5 * (xu[i + 1] - xu[i - 1]);
                let vol_h = grid.y_axis.coords()[j + 1] - grid.y_axis.coords()[j];
                a[k][k] = 1.0;
                let mut couple = |kk: usize, coef: f64| {
                    a[k][kk] -= c * coef;
                    a[k][k] += c * coef;
                };
                // east face: outlet has zero gradient
                if i + 1 < nx {
                    couple(k + 1, 1.0 / ((xu[i + 1] - xu[i]) * vol_w));
                }
                couple(k - 1, 1.0 / ((xu[i] - xu[i - 1]) * vol_w));
                if j + 1 < ny {
                    couple(k + nx + 1, 1.0 / ((grid.yc[j + 1] - grid.yc[j]) * vol_h));
                }
                if j > 0 {
                    couple(k - nx - 1, 1.0 / ((grid.yc[j] - grid.yc[j - 1]) * vol_h));
                }
            }
        }
        a
    }

    #[test]
    fn matches_dense_assembly() {
        let ax = crate::grid::build_axis(0.0, 1.0, 0.3, 0.6, 0.1, 1.2).unwrap();
        let ay = crate::grid::build_axis(0.0, 1.0, 0.4, 0.6, 0.1, 1.3).unwrap();
        let g = StaggeredGrid::new(ax, ay);
        assert!(g.nx >= 6 && g.ny >= 6);
        let params = SolverParams {
            dt: 0.05,
            re: 10.0,
            ..SolverParams::default()
        };
        let bc = BoundaryConditions::free_stream();
        let state = FlowState::uniform(&g, 1.0);
        let tags = TagField::all_fluid(&g);
        let z = (Field::zeros(g.nx + 1, g.ny), Field::zeros(g.nx, g.ny + 1));
        let sys = assemble_momentum_system(
            &Executor::sequential(),
            &g,
            &bc,
            &params,
            &state,
            &tags,
            (&z.0, &z.1),
            &no_targets(&g),
        )
        .unwrap();
        sys.u.validate().unwrap();
        let dense = dense_u(&g, 0.5 * params.dt / params.re);
        let nxu = g.nx + 1;
        for j in 0..g.ny {
            for i in 1..g.nx {
                let k = j * nxu + i;
                let r = &sys.u.rows[k];
                let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + b.abs());
                assert!(close(r.center, dense[k][k]));
                assert!(close(r.west, dense[k][k - 1]));
                if i + 1 <= g.nx {
                    assert!(close(r.east, dense[k][k + 1]));
                }
                if j > 0 {
                    assert!(close(r.south, dense[k][k - nxu]));
                }
                if j + 1 < g.ny {
                    assert!(close(r.north, dense[k][k + nxu]));
                }
            }
        }
    }

    #[test]
    fn uniform_flow_is_exact_solution() {
        let g = StaggeredGrid::uniform((0.0, 2.0), (0.0, 1.0), 16, 8).unwrap();
        let params = SolverParams::default();
        let bc = BoundaryConditions::free_stream();
        let state = FlowState::uniform(&g, 1.0);
        let tags = TagField::all_fluid(&g);
        let exec = Executor::sequential();
        let conv = convection_terms(&exec, &g, &bc, &state.u, &state.v, &tags);
        let sys = assemble_momentum_system(&exec, &g, &bc, &params, &state, &tags, (&conv.0, &conv.1), &no_targets(&g)).unwrap();
        assert!(sys.u.residual_max(state.u.as_slice()) < 1e-14);
        assert!(sys.v.residual_max(state.v.as_slice()) < 1e-14);
        let (u, v, _) = solve_momentum(&exec, &g, &bc, &params, &state, &sys).unwrap();
        assert!(u.max_abs_diff(&state.u) < 1e-12);
        assert!(v.max_abs() < 1e-12);
    }

    #[test]
    fn vanishing_dt_gives_identity() {
        let g = StaggeredGrid::uniform((0.0, 1.0), (0.0, 1.0), 8, 8).unwrap();
        let params = SolverParams {
            dt: 1e-14,
            ..SolverParams::default()
        };
        let bc = BoundaryConditions::free_stream();
        let state = FlowState::from_fn(&g, |x, y| x * y, |x, _| x, |x, y| x + y);
        let tags = TagField::all_fluid(&g);
        let exec = Executor::sequential();
        let conv = convection_terms(&exec, &g, &bc, &state.u, &state.v, &tags);
        let sys = assemble_momentum_system(&exec, &g, &bc, &params, &state, &tags, (&conv.0, &conv.1), &no_targets(&g)).unwrap();
        for (k, r) in sys.u.rows.iter().enumerate().filter(|(_, r)| r.active) {
            assert!((r.center - 1.0).abs() < 1e-10);
            assert!((r.rhs - state.u.as_slice()[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn missing_history_after_first_step() {
        let g = StaggeredGrid::uniform((0.0, 1.0), (0.0, 1.0), 4, 4).unwrap();
        let mut state = FlowState::zeros(&g);
        state.step = 3;
        let tags = TagField::all_fluid(&g);
        let z = (Field::zeros(5, 4), Field::zeros(4, 5));
        let r = assemble_momentum_system(
            &Executor::sequential(),
            &g,
            &BoundaryConditions::free_stream(),
            &SolverParams::default(),
            &state,
            &tags,
            (&z.0, &z.1),
            &no_targets(&g),
        );
        assert!(matches!(r, Err(SolverError::MissingHistory(3))));
    }
}
