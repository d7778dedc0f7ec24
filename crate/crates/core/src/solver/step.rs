use crate::classify::{classify_all, NodeTag, TagField};
use crate::exec::Executor;
use crate::field::Field;
use crate::forces::{compute_coefficients, ForceSample};
use crate::grid::StaggeredGrid;
use crate::kinematics::{FoilGeometry, FoilState, PlungeParams};
use crate::profile::{Profiler, Region, Stopwatch, TimingReport};

use super::forcing::{forcing_targets, momentum_forcing_field, ForcingTargets};
use super::momentum::{assemble_momentum_system, solve_momentum};
use super::operators::convection_terms;
use super::pressure::{continuity_defect, mass_source_field, pressure_poisson, project_and_correct};
use super::{BoundaryConditions, FlowState, SolverError, SolverParams};

/// Prescribed-motion body.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Body {
    pub geometry: FoilGeometry,
    pub plunge: PlungeParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub t_bar: f64,
    pub uv_iterations: [usize; 2],
    pub pressure_iterations: usize,
    pub pressure_residual: f64,
    /// Max `|div u - q|` over active cells after projection.
    pub continuity_defect: f64,
    /// Max `|u - target|` over forcing nodes after the step.
    pub no_slip_error: f64,
    pub force: Option<ForceSample>,
}

pub struct Solver {
    pub grid: StaggeredGrid,
    pub bc: BoundaryConditions,
    pub params: SolverParams,
    pub body: Option<Body>,
    exec: Executor,
    profiler: Profiler,
    phi: Field<f64>,
    tags: TagField,
}

impl Solver {
    pub fn new(
        grid: StaggeredGrid,
        bc: BoundaryConditions,
        params: SolverParams,
        body: Option<Body>,
        exec: Executor,
    ) -> Result<Self, SolverError> {
        params.validate()?;
        let tags = TagField::all_fluid(&grid);
        Ok(Self {
            phi: Field::zeros(grid.nx, grid.ny),
            tags,
            grid,
            bc,
            params,
            body,
            exec,
            profiler: Profiler::new(),
        })
    }

    pub fn executor(&self) -> &Executor {
        &self.exec
    }

    /// Tags used in the most recent step.
    pub fn tags(&self) -> &TagField {
        &self.tags
    }

    pub fn foil_at(&self, t_bar: f64) -> Option<FoilState> {
        self.body.map(|b| FoilState::at(b.geometry, &b.plunge, t_bar))
    }

    pub fn timing_report(&self) -> TimingReport {
        self.profiler.report()
    }

    pub fn reset_timers(&mut self) {
        self.profiler.reset();
    }

    /// Initial state: uniform stream at the inlet speed with body nodes set
    /// to the body velocity.
    pub fn initial_state(&mut self) -> FlowState {
        let mut s = FlowState::uniform(&self.grid, self.bc.west_u());
        if let Some(foil) = self.foil_at(0.0) {
            self.tags = classify_all(&self.exec, &self.grid, &foil);
            set_body_velocity(&mut s, &self.tags, foil.y_vel);
        }
        s
    }

    /// Advances `state` by one step of `params.dt`.
    pub fn advance(&mut self, state: &mut FlowState) -> Result<StepDiagnostics, SolverError> {
        let total = Stopwatch::start();
        let dt = self.params.dt;
        let t_new = state.t_bar + dt;
        let (grid, bc, exec) = (&self.grid, &self.bc, &self.exec);

        let watch = Stopwatch::start();
        let foil = self.body.map(|b| FoilState::at(b.geometry, &b.plunge, t_new));
        if let Some(foil) = &foil {
            self.tags = classify_all(exec, grid, foil);
        }
        let tags = &self.tags;
        self.profiler.stop(Region::Flagging, watch);

        let watch = Stopwatch::start();
        let targets = match &foil {
            Some(foil) => forcing_targets(exec, grid, tags, &state.u, &state.v, foil)?,
            None => ForcingTargets {
                u: Field::zeros(grid.nx + 1, grid.ny),
                v: Field::zeros(grid.nx, grid.ny + 1),
            },
        };
        self.profiler.stop(Region::BodyForceInterpolation, watch);

        let watch = Stopwatch::start();
        let conv = convection_terms(exec, grid, bc, &state.u, &state.v, tags);
        let systems = assemble_momentum_system(exec, grid, bc, &self.params, state, tags, (&conv.0, &conv.1), &targets)?;
        let (mut u, mut v, uv_reports) = solve_momentum(exec, grid, bc, &self.params, state, &systems)?;
        self.profiler.stop(Region::UvSolver, watch);

        let watch = Stopwatch::start();
        let (f_u, f_v) = if foil.is_some() {
            (
                momentum_forcing_field(&systems.u_hat, &targets.u, &tags.u, dt),
                momentum_forcing_field(&systems.v_hat, &targets.v, &tags.v, dt),
            )
        } else {
            (Field::zeros(grid.nx + 1, grid.ny), Field::zeros(grid.nx, grid.ny + 1))
        };
        self.profiler.stop(Region::BodyForceInterpolation, watch);

        let watch = Stopwatch::start();
        let body_vel = foil.map_or((0.0, 0.0), |f| f.body_velocity());
        let q = mass_source_field(exec, grid, bc, &u, &v, tags, body_vel);
        let sol = pressure_poisson(exec, grid, bc, &self.params, &u, &v, &q, tags, &self.phi)?;
        self.profiler.stop(Region::PressureSolver, watch);

        let watch = Stopwatch::start();
        let mut p = state.p.clone();
        project_and_correct(exec, grid, bc, dt, &mut u, &mut v, &mut p, &sol.phi, tags);
        let defect = continuity_defect(exec, grid, bc, &u, &v, &q, tags);
        let no_slip = forcing_error(&u, &targets.u, &tags.u).max(forcing_error(&v, &targets.v, &tags.v));

        let prev = std::mem::replace(
            state,
            FlowState {
                u,
                v,
                p,
                conv_u_prev: Some(conv.0),
                conv_v_prev: Some(conv.1),
                f_u,
                f_v,
                q,
                t_bar: t_new,
                step: state.step + 1,
            },
        );
        self.phi = sol.phi;
        state.check_finite()?;
        self.profiler.stop(Region::Other, watch);

        let watch = Stopwatch::start();
        let force = foil.map(|_| compute_coefficients(state, &prev, grid, tags, dt));
        self.profiler.stop(Region::BodyForceInterpolation, watch);

        self.profiler.stop(Region::Total, total);
        self.profiler.add_steps(1);
        Ok(StepDiagnostics {
            step: state.step,
            t_bar: state.t_bar,
            uv_iterations: [uv_reports[0].iterations, uv_reports[1].iterations],
            pressure_iterations: sol.report.iterations,
            pressure_residual: sol.report.residual,
            continuity_defect: defect,
            no_slip_error: no_slip,
            force,
        })
    }
}

fn set_body_velocity(s: &mut FlowState, tags: &TagField, y_vel: f64) {
    for (x, t) in s.u.as_mut_slice().iter_mut().zip(tags.u.iter()) {
        if t.is_body() {
            *x = 0.0;
        }
    }
    for (x, t) in s.v.as_mut_slice().iter_mut().zip(tags.v.iter()) {
        if t.is_body() {
            *x = y_vel;
        }
    }
}

fn forcing_error(vel: &Field<f64>, targets: &Field<f64>, tags: &Field<NodeTag>) -> f64 {
    vel.iter()
        .zip(targets.iter())
        .zip(tags.iter())
        .filter(|(_, t)| **t == NodeTag::Forcing)
        .map(|((a, b), _)| (a - b).abs())
        .fold(0.0, f64::max)
}
