//! Analytic reference flows for convergence studies.

use std::f64::consts::PI;

use ibmflow::exec::Executor;
use ibmflow::grid::StaggeredGrid;
use ibmflow::solver::{BoundaryConditions, FlowState, Solver, SolverParams};

/// Decaying Taylor-Green vortex on the free-slip box `[0, pi]^2`.
pub struct TaylorGreen {
    pub re: f64,
}

impl TaylorGreen {
    fn decay(&self, t: f64) -> f64 {
        (-2.0 * t / self.re).exp()
    }

    pub fn u(&self, x: f64, y: f64, t: f64) -> f64 {
        x.sin() * y.cos() * self.decay(t)
    }

    pub fn v(&self, x: f64, y: f64, t: f64) -> f64 {
        -x.cos() * y.sin() * self.decay(t)
    }

    pub fn p(&self, x: f64, y: f64, t: f64) -> f64 {
        0.25 * ((2.0 * x).cos() + (2.0 * y).cos()) * self.decay(t).powi(2)
    }
}

/// Max-norm differences between two flow states; pressure means removed.
pub struct TgErrors {
    pub velocity: f64,
    pub pressure: f64,
}

impl TgErrors {
    pub fn between(a: &FlowState, b: &FlowState) -> Self {
        let velocity = a.u.max_abs_diff(&b.u).max(a.v.max_abs_diff(&b.v));
        let mean = |f: &ibmflow::field::Field<f64>| f.iter().sum::<f64>() / f.iter().count() as f64;
        let (ma, mb) = (mean(&a.p), mean(&b.p));
        let pressure = a
            .p
            .iter()
            .zip(b.p.iter())
            .map(|(x, y)| ((x - ma) - (y - mb)).abs())
            .fold(0.0, f64::max);
        Self { velocity, pressure }
    }
}

/// Runs the vortex on an `n x n` grid to `t_end`; returns the grid and the
/// final state.
pub fn taylor_green_run(n: usize, dt: f64, t_end: f64, re: f64) -> (StaggeredGrid, FlowState) {
    let tg = TaylorGreen { re };
    let grid = StaggeredGrid::uniform((0.0, PI), (0.0, PI), n, n).unwrap();
    let params = SolverParams {
        re,
        dt,
        sor_omega: 1.9,
        sor_tol: 1e-12,
        sor_max_iters: 200_000,
        uv_tol: 1e-13,
        uv_max_iters: 10_000,
        ..SolverParams::default()
    };
    let mut solver = Solver::new(grid, BoundaryConditions::slip_box(), params, None, Executor::sequential()).unwrap();
    let mut state = FlowState::from_fn(&solver.grid, |x, y| tg.u(x, y, 0.0), |x, y| tg.v(x, y, 0.0), |x, y| tg.p(x, y, 0.0));
    for _ in 0..(t_end / dt).round() as usize {
        solver.advance(&mut state).unwrap();
    }
    (solver.grid, state)
}

/// Error of the final state against the exact vortex.
pub fn taylor_green_errors(n: usize, dt: f64, t_end: f64, re: f64) -> TgErrors {
    let tg = TaylorGreen { re };
    let (grid, state) = taylor_green_run(n, dt, t_end, re);
    let t = state.t_bar;
    let exact = FlowState::from_fn(&grid, |x, y| tg.u(x, y, t), |x, y| tg.v(x, y, t), |x, y| tg.p(x, y, t));
    TgErrors::between(&state, &exact)
}
