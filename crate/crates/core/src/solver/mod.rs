//! Fractional-step solver for the immersed-boundary-modified incompressible
//! Navier-Stokes equations on the staggered grid.
//!
//! Per step: AB2 convection + Crank-Nicolson diffusion predictor with the
//! previous pressure gradient, direct momentum forcing imposed as prescribed
//! rows at body nodes, a mass source in body-cut cells, a pressure-correction
//! Poisson solve, and a projection.

pub mod forcing;
pub mod momentum;
pub mod operators;
pub mod pressure;
pub mod sor;
mod step;

pub use forcing::{forcing_targets, momentum_forcing_field, ForcingTargets};
pub use momentum::{assemble_momentum_system, MomentumSystems};
pub use operators::convection_terms;
pub use pressure::{mass_source_field, pressure_poisson, project_and_correct, PressureSolve};
pub use sor::{red_black_sor, LinearSystemView, SorReport, StencilRow};
pub use step::{Body, Solver, StepDiagnostics};

use thiserror::Error;

use crate::classify::{ClassifyError, Family};
use crate::field::Field;
use crate::grid::StaggeredGrid;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("{system} solve did not converge: residual {residual:e} after {iterations} iterations")]
    NotConverged {
        system: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("non-finite value in `{field}` after step {step}")]
    NonFinite { field: &'static str, step: usize },
    #[error("convection history missing at step {0}")]
    MissingHistory(usize),
    #[error("forcing node ({i}, {j}) of family {family:?} has no fluid neighbour")]
    IsolatedForcingNode { family: Family, i: usize, j: usize },
    #[error(transparent)]
    Geometry(#[from] ClassifyError),
    #[error("invalid solver parameter: {0}")]
    BadParameter(String),
}

/// What to do when an iterative solve hits its iteration cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergencePolicy {
    Abort,
    Warn,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    pub re: f64,
    pub dt: f64,
    pub sor_omega: f64,
    /// Tolerance on the max-norm of `dt * (div(u) - q)` left after projection.
    pub sor_tol: f64,
    pub sor_max_iters: usize,
    pub uv_omega: f64,
    pub uv_tol: f64,
    pub uv_max_iters: usize,
    pub on_nonconvergence: ConvergencePolicy,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            re: 500.0,
            dt: 0.0025,
            sor_omega: 1.5,
            sor_tol: 1e-6,
            sor_max_iters: 10_000,
            uv_omega: 1.2,
            uv_tol: 1e-8,
            uv_max_iters: 1_000,
            on_nonconvergence: ConvergencePolicy::Abort,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: &str| Err(SolverError::BadParameter(m.to_string()));
        if !(self.re > 0.0 && self.re.is_finite()) {
            return bad("Re must be positive");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        for (name, w) in [("sor_omega", self.sor_omega), ("uv_omega", self.uv_omega)] {
            if !(1.0..2.0).contains(&w) {
                return Err(SolverError::BadParameter(format!("{name} must lie in [1, 2)")));
            }
        }
        if !(self.sor_tol > 0.0 && self.uv_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.sor_max_iters == 0 || self.uv_max_iters == 0 {
            return bad("iteration caps must be positive");
        }
        Ok(())
    }
}

/// Left (x = x_min) boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WestBoundary {
    /// `u = u_in`, `v = 0`.
    Inlet { u_in: f64 },
    /// `u = 0`, `dv/dx = 0`.
    Slip,
}

/// Right (x = x_max) boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EastBoundary {
    /// Zero-gradient velocity, pressure correction pinned to zero.
    Outlet,
    /// `u = 0`, `dv/dx = 0`.
    Slip,
}

/// Top and bottom are always slip walls (`v = 0`, `du/dy = 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryConditions {
    pub west: WestBoundary,
    pub east: EastBoundary,
}

impl BoundaryConditions {
    /// Free stream from the left, outflow on the right.
    pub fn free_stream() -> Self {
        Self {
            west: WestBoundary::Inlet { u_in: 1.0 },
            east: EastBoundary::Outlet,
        }
    }

    /// Closed free-slip box.
    pub fn slip_box() -> Self {
        Self {
            west: WestBoundary::Slip,
            east: EastBoundary::Slip,
        }
    }

    pub fn west_u(&self) -> f64 {
        match self.west {
            WestBoundary::Inlet { u_in } => u_in,
            WestBoundary::Slip => 0.0,
        }
    }

    pub fn outlet(&self) -> bool {
        self.east == EastBoundary::Outlet
    }
}

/// Velocity, pressure and the immersed-boundary source fields.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub u: Field<f64>,
    pub v: Field<f64>,
    pub p: Field<f64>,
    pub conv_u_prev: Option<Field<f64>>,
    pub conv_v_prev: Option<Field<f64>>,
    /// Momentum forcing; nonzero only at body (forcing and solid) nodes.
    pub f_u: Field<f64>,
    pub f_v: Field<f64>,
    /// Mass source; nonzero only in body-cut pressure cells.
    pub q: Field<f64>,
    pub t_bar: f64,
    pub step: usize,
}

impl FlowState {
    /// Quiescent fluid.
    pub fn zeros(grid: &StaggeredGrid) -> Self {
        let (nx, ny) = (grid.nx, grid.ny);
        Self {
            u: Field::zeros(nx + 1, ny),
            v: Field::zeros(nx, ny + 1),
            p: Field::zeros(nx, ny),
            conv_u_prev: None,
            conv_v_prev: None,
            f_u: Field::zeros(nx + 1, ny),
            f_v: Field::zeros(nx, ny + 1),
            q: Field::zeros(nx, ny),
            t_bar: 0.0,
            step: 0,
        }
    }

    /// Uniform stream `u = u_inf`, `v = 0`, `p = 0`.
    pub fn uniform(grid: &StaggeredGrid, u_inf: f64) -> Self {
        let mut s = Self::zeros(grid);
        s.u = Field::filled(grid.nx + 1, grid.ny, u_inf);
        s
    }

    /// Initialise velocity and pressure from analytic functions of position.
    pub fn from_fn(
        grid: &StaggeredGrid,
        u: impl Fn(f64, f64) -> f64,
        v: impl Fn(f64, f64) -> f64,
        p: impl Fn(f64, f64) -> f64,
    ) -> Self {
        let mut s = Self::zeros(grid);
        s.u = Field::from_fn(grid.nx + 1, grid.ny, |i, j| {
            let (x, y) = Family::U.position(grid, i, j);
            u(x, y)
        });
        s.v = Field::from_fn(grid.nx, grid.ny + 1, |i, j| {
            let (x, y) = Family::V.position(grid, i, j);
            v(x, y)
        });
        s.p = Field::from_fn(grid.nx, grid.ny, |i, j| {
            let (x, y) = Family::P.position(grid, i, j);
            p(x, y)
        });
        s
    }

    pub fn check_finite(&self) -> Result<(), SolverError> {
        let fields: [(&'static str, &Field<f64>); 6] = [
            ("u", &self.u),
            ("v", &self.v),
            ("p", &self.p),
            ("f_u", &self.f_u),
            ("f_v", &self.f_v),
            ("q", &self.q),
        ];
        for (name, f) in fields {
            if !f.all_finite() {
                return Err(SolverError::NonFinite {
                    field: name,
                    step: self.step,
                });
            }
        }
        Ok(())
    }

    /// Largest elementwise difference over `u`, `v` and `p`.
    pub fn max_field_difference(&self, other: &FlowState) -> f64 {
        self.u
            .max_abs_diff(&other.u)
            .max(self.v.max_abs_diff(&other.v))
            .max(self.p.max_abs_diff(&other.p))
    }
}
