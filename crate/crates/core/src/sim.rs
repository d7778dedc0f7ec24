//! Run orchestration: the time loop, artifact writing, the built-in
//! validation scenario, hotspot reports and scaling sweeps.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

use crate::classify::{Family, NodeTag, TagField};
use crate::config::{ConfigError, SimConfig};
use crate::exec::{BackendSpec, ExecError, Executor};
use crate::forces::{periodicity, write_force_history, ForceSample, Periodicity};
use crate::grid::{build_grid, GridError, MeshPreset, StaggeredGrid};
use crate::io::{write_field_snapshot, write_grid_dump, write_tag_dump};
use crate::profile::scaling::{scaling_harness, ScalingReport};
use crate::profile::{amdahl_speedup, parallel_fraction, Cores, Region, SpeedupModel, TimingReport};
use crate::solver::{Body, BoundaryConditions, FlowState, Solver, SolverError, StepDiagnostics};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("grid: {0}")]
    Grid(#[from] GridError),
    #[error("backend: {0}")]
    Exec(#[from] ExecError),
    #[error("solver failed at step {step}: {source}")]
    Solver { step: usize, source: SolverError },
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl RunError {
    /// 2 configuration, 3 solver divergence, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Grid(_) | RunError::Exec(_) => 2,
            RunError::Solver { .. } => 3,
            RunError::Io { .. } => 4,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Solver plus the evolving state for one configuration.
pub struct Simulation {
    pub solver: Solver,
    pub state: FlowState,
}

impl Simulation {
    pub fn new(config: &SimConfig) -> Result<Self, RunError> {
        config.validate()?;
        let grid = build_grid(&config.grid)?;
        let body = Body {
            geometry: config.foil,
            plunge: config.plunge,
        };
        let exec = Executor::new(config.backend)?;
        let mut solver = Solver::new(grid, BoundaryConditions::free_stream(), config.solver, Some(body), exec)
            .map_err(|source| RunError::Solver { step: 0, source })?;
        let state = solver.initial_state();
        Ok(Self { solver, state })
    }

    pub fn step(&mut self) -> Result<StepDiagnostics, RunError> {
        let step = self.state.step + 1;
        self.solver
            .advance(&mut self.state)
            .map_err(|source| RunError::Solver { step, source })
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub steps: usize,
    pub forces: Vec<ForceSample>,
    pub timing: TimingReport,
    pub wall_s: f64,
    pub out_dir: PathBuf,
}

/// Runs `config.time.n_steps` steps and writes the enabled artifacts under
/// `config.output.dir`: `forces.csv`, `field_<step>.txt`, `timing.txt`,
/// `timing.csv`, `grid_{x,y}.txt` and `tags_<family>_<step>.txt`.
pub fn run_simulation(config: &SimConfig) -> Result<RunSummary, RunError> {
    let mut sim = Simulation::new(config)?;
    let out = &config.output;
    fs::create_dir_all(&out.dir).map_err(io_err(&out.dir))?;
    if out.grid {
        write_grid_dump(&sim.solver.grid, &out.dir).map_err(io_err(&out.dir))?;
    }
    write_step_artifacts(config, &sim, true)?;

    let start = Instant::now();
    let mut forces = Vec::new();
    let mut failure = None;
    for _ in 0..config.time.n_steps {
        match sim.step() {
            Ok(diag) => {
                if diag.step % config.time.output_interval == 0 {
                    forces.extend(diag.force);
                }
                write_step_artifacts(config, &sim, false)?;
            }
            Err(e) => {
                log::error!("{e}");
                failure = Some(e);
                break;
            }
        }
    }
    let wall_s = start.elapsed().as_secs_f64();

    if out.forces {
        let path = out.dir.join("forces.csv");
        write_force_history(&forces, &path).map_err(io_err(&path))?;
    }
    let timing = sim.solver.timing_report();
    if out.timing {
        write_timing(&timing, &out.dir)?;
    }
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(RunSummary {
        steps: sim.state.step,
        forces,
        timing,
        wall_s,
        out_dir: out.dir.clone(),
    })
}

fn write_step_artifacts(config: &SimConfig, sim: &Simulation, initial: bool) -> Result<(), RunError> {
    let out = &config.output;
    let step = sim.state.step;
    let every = config.time.snapshot_interval;
    if !initial && (every == 0 || step % every != 0) {
        return Ok(());
    }
    if out.snapshots {
        let path = out.dir.join(format!("field_{step:06}.txt"));
        write_field_snapshot(&sim.state, &sim.solver.grid, sim.solver.tags(), &path).map_err(io_err(&path))?;
    }
    if out.tags {
        write_tag_dump(sim.solver.tags(), step, &out.dir).map_err(io_err(&out.dir))?;
    }
    Ok(())
}

pub fn write_timing(report: &TimingReport, dir: &Path) -> Result<(), RunError> {
    for (name, text) in [("timing.txt", report.to_kv_text()), ("timing.csv", report.to_csv())] {
        let path = dir.join(name);
        fs::write(&path, text).map_err(io_err(&path))?;
    }
    Ok(())
}

/// Area of the pressure cells tagged as body, an estimate of the foil area.
pub fn body_area_estimate(grid: &StaggeredGrid, tags: &TagField) -> f64 {
    let p = tags.family(Family::P);
    let mut area = 0.0;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            if p[(i, j)] != NodeTag::Fluid {
                area += grid.dx[i] * grid.dy[j];
            }
        }
    }
    area
}

/// Worst per-step values of the invariants checked during validation.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantLog {
    pub steps: usize,
    pub max_continuity_defect: f64,
    pub continuity_bound: f64,
    pub max_no_slip_error: f64,
    pub no_slip_bound: f64,
    pub max_area_error: f64,
    pub area_bound: f64,
}

impl InvariantLog {
    pub fn new(config: &SimConfig) -> Self {
        Self {
            steps: 0,
            max_continuity_defect: 0.0,
            continuity_bound: 10.0 * config.solver.sor_tol / config.solver.dt,
            max_no_slip_error: 0.0,
            no_slip_bound: 1e-8,
            max_area_error: 0.0,
            area_bound: 0.05,
        }
    }

    pub fn record(&mut self, sim: &Simulation, diag: &StepDiagnostics) {
        self.steps += 1;
        self.max_continuity_defect = self.max_continuity_defect.max(diag.continuity_defect);
        self.max_no_slip_error = self.max_no_slip_error.max(diag.no_slip_error);
        if let Some(body) = sim.solver.body {
            let exact = body.geometry.area();
            let est = body_area_estimate(&sim.solver.grid, sim.solver.tags());
            self.max_area_error = self.max_area_error.max((est - exact).abs() / exact);
        }
    }

    pub fn continuity_ok(&self) -> bool {
        self.max_continuity_defect <= self.continuity_bound
    }

    pub fn no_slip_ok(&self) -> bool {
        self.max_no_slip_error <= self.no_slip_bound
    }

    pub fn area_ok(&self) -> bool {
        self.max_area_error <= self.area_bound
    }
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub invariants: InvariantLog,
    pub periodicity: Periodicity,
    pub forces: Vec<ForceSample>,
    pub wall_s: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        let i = &self.invariants;
        i.continuity_ok() && i.no_slip_ok() && i.area_ok() && self.periodicity.passed()
    }

    pub fn to_text(&self) -> String {
        let i = &self.invariants;
        let mark = |ok: bool| if ok { "PASS" } else { "FAIL" };
        let mut s = format!("steps={} wall_s={:.1}\n", i.steps, self.wall_s);
        s += &format!(
            "{} continuity max={:.3e} bound={:.3e}\n",
            mark(i.continuity_ok()),
            i.max_continuity_defect,
            i.continuity_bound
        );
        s += &format!(
            "{} no_slip max={:.3e} bound={:.3e}\n",
            mark(i.no_slip_ok()),
            i.max_no_slip_error,
            i.no_slip_bound
        );
        s += &format!(
            "{} body_area max_rel_error={:.4} bound={:.2}\n",
            mark(i.area_ok()),
            i.max_area_error,
            i.area_bound
        );
        s += &self.periodicity.to_text();
        s
    }
}

/// Runs the configured plunging case, checking invariants after every step,
/// then analyses the lift history for periodicity.
pub fn run_validation(config: &SimConfig) -> Result<ValidationReport, RunError> {
    let mut sim = Simulation::new(config)?;
    let mut log = InvariantLog::new(config);
    let mut forces = Vec::new();
    let start = Instant::now();
    for _ in 0..config.time.n_steps {
        let diag = sim.step()?;
        log.record(&sim, &diag);
        forces.extend(diag.force);
    }
    Ok(ValidationReport {
        invariants: log,
        periodicity: periodicity(&forces, config.plunge.period(), 3),
        forces,
        wall_s: start.elapsed().as_secs_f64(),
    })
}

/// Hotspot report of the first `steps` steps.
#[derive(Debug, Clone)]
pub struct BenchReport {
    pub timing: TimingReport,
    pub backend: BackendSpec,
    pub cells: usize,
    pub parallel_fraction: f64,
    pub amdahl_limit: f64,
}

impl BenchReport {
    pub fn to_text(&self) -> String {
        format!(
            "backend={} cells={} steps={}\n{}parallel_fraction={:.4}\namdahl_limit={:.1}\n",
            self.backend,
            self.cells,
            self.timing.steps,
            self.timing.hotspot_table(),
            self.parallel_fraction,
            self.amdahl_limit
        )
    }
}

pub fn run_bench(config: &SimConfig, steps: usize) -> Result<BenchReport, RunError> {
    let mut sim = Simulation::new(config)?;
    sim.solver.reset_timers();
    for _ in 0..steps {
        sim.step()?;
    }
    let timing = sim.solver.timing_report();
    let names: Vec<&str> = Region::PARALLEL.iter().map(|r| r.name()).collect();
    let p = parallel_fraction(&timing, &names).unwrap_or(0.0);
    let limit = SpeedupModel::new(p, Cores::Infinite)
        .map(|m| amdahl_speedup(&m))
        .unwrap_or(f64::NAN);
    Ok(BenchReport {
        timing,
        backend: config.backend,
        cells: sim.solver.grid.nx * sim.solver.grid.ny,
        parallel_fraction: p,
        amdahl_limit: limit,
    })
}

/// Wall time of `steps` steps of `config` on `mesh` with `backend`,
/// excluding setup.
pub fn time_steps(config: &SimConfig, mesh: MeshPreset, backend: BackendSpec, steps: usize) -> Result<f64, RunError> {
    let mut c = config.on_mesh(mesh)?;
    c.backend = backend;
    let mut sim = Simulation::new(&c)?;
    let start = Instant::now();
    for _ in 0..steps {
        sim.step()?;
    }
    Ok(start.elapsed().as_secs_f64())
}

pub fn run_scaling(
    config: &SimConfig,
    meshes: &[MeshPreset],
    step_counts: &[usize],
    backends: &[BackendSpec],
) -> ScalingReport {
    scaling_harness(meshes, step_counts, backends, |m, b, n| {
        log::info!("scaling: {} {b} {n} steps", m.name());
        time_steps(config, m, b, n).map_err(|e| e.to_string())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(dir: &Path) -> SimConfig {
        let mut c = SimConfig::default();
        c.grid.x_domain = (-1.5, 2.0);
        c.grid.y_domain = (-1.0, 1.0);
        c.grid.h_min = 0.04;
        c.solver.dt = 0.005;
        c.time.n_steps = 10;
        c.time.output_interval = 2;
        c.time.snapshot_interval = 5;
        c.output.dir = dir.to_path_buf();
        c
    }

    #[test]
    fn zero_steps_writes_only_the_initial_snapshot() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small_config(dir.path());
        c.time.n_steps = 0;
        let s = run_simulation(&c).unwrap();
        assert_eq!(s.steps, 0);
        let mut names: Vec<String> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        assert_eq!(names, ["field_000000.txt", "forces.csv", "timing.csv", "timing.txt"]);
        assert_eq!(fs::read_to_string(dir.path().join("forces.csv")).unwrap(), "t_bar,cl,cd\n");
    }

    #[test]
    fn ten_steps_write_sampled_forces() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small_config(dir.path());
        c.output.grid = true;
        c.output.tags = true;
        let s = run_simulation(&c).unwrap();
        assert_eq!(s.forces.len(), 10 / 2);
        let csv = fs::read_to_string(dir.path().join("forces.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + 5);
        for f in ["field_000005.txt", "field_000010.txt", "grid_x.txt", "tags_p_000010.txt"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let timing = fs::read_to_string(dir.path().join("timing.txt")).unwrap();
        assert!(TimingReport::from_kv_text(&timing).is_ok());
    }

    #[test]
    fn sequential_runs_are_byte_identical() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_simulation(&small_config(a.path())).unwrap();
        run_simulation(&small_config(b.path())).unwrap();
        let read = |d: &Path| fs::read(d.join("forces.csv")).unwrap();
        assert_eq!(read(a.path()), read(b.path()));
    }

    #[test]
    fn unwritable_output_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let mut c = small_config(&blocker.join("sub"));
        c.time.n_steps = 0;
        let e = run_simulation(&c).unwrap_err();
        assert_eq!(e.exit_code(), 4);
    }

    #[test]
    fn divergence_reports_the_step() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small_config(dir.path());
        c.solver.dt = 1e3;
        c.solver.sor_max_iters = 5;
        c.solver.uv_max_iters = 5;
        c.solver.on_nonconvergence = crate::solver::ConvergencePolicy::Warn;
        let e = run_simulation(&c).unwrap_err();
        assert_eq!(e.exit_code(), 3);
        assert!(matches!(e, RunError::Solver { step, .. } if step >= 1));
    }

    #[test]
    fn area_estimate_on_the_desk_grid() {
        let c = SimConfig::default();
        let sim = Simulation::new(&c).unwrap();
        let est = body_area_estimate(&sim.solver.grid, sim.solver.tags());
        let exact = c.foil.area();
        assert!((est - exact).abs() / exact < 0.05, "{est} vs {exact}");
    }

    #[test]
    fn bench_report_covers_the_hotspots() {
        let dir = tempfile::tempdir().unwrap();
        let r = run_bench(&small_config(dir.path()), 3).unwrap();
        assert_eq!(r.timing.steps, 3);
        let text = r.to_text();
        for region in Region::ALL {
            assert!(text.contains(region.name()), "{}", region.name());
        }
        assert!(r.parallel_fraction > 0.5 && r.parallel_fraction <= 1.0);
    }
}
