use ibmflow::config::SimConfig;
use ibmflow::exec::{BackendSpec, Executor};
use ibmflow::grid::StaggeredGrid;
use ibmflow::sim::Simulation;
use ibmflow::solver::{BoundaryConditions, FlowState, Solver, SolverParams};

fn small_config() -> SimConfig {
    let mut c = SimConfig::default();
    c.grid.x_domain = (-1.5, 2.0);
    c.grid.y_domain = (-1.0, 1.0);
    c.grid.h_min = 0.04;
    c.solver.dt = 0.005;
    c
}

#[test]
fn stationary_foil_flow_is_mirror_symmetric() {
    let mut c = small_config();
    c.plunge.h_bar = 0.0;
    // Keeps nodes off the foil surface, where the tag would hinge on rounding.
    c.grid.h_min = 0.03;
    c.solver.sor_tol = 1e-13;
    c.solver.sor_max_iters = 200_000;
    let mut sim = Simulation::new(&c).unwrap();
    for _ in 0..5 {
        sim.step().unwrap();
    }
    let (u, v) = (&sim.state.u, &sim.state.v);
    let (nu_x, nu_y) = u.shape();
    let (nv_x, nv_y) = v.shape();
    let mut worst = 0.0f64;
    for j in 0..nu_y {
        for i in 0..nu_x {
            worst = worst.max((u[(i, j)] - u[(i, nu_y - 1 - j)]).abs());
        }
    }
    for j in 0..nv_y {
        for i in 0..nv_x {
            worst = worst.max((v[(i, j)] + v[(i, nv_y - 1 - j)]).abs());
        }
    }
    assert!(worst <= 1e-8, "mirror defect {worst:e}");
}

#[test]
fn uniform_stream_without_body_is_a_fixed_point() {
    let grid = StaggeredGrid::uniform((0.0, 4.0), (-1.0, 1.0), 40, 20).unwrap();
    let params = SolverParams {
        dt: 0.01,
        ..SolverParams::default()
    };
    let mut solver = Solver::new(grid, BoundaryConditions::free_stream(), params, None, Executor::sequential()).unwrap();
    let mut state = FlowState::uniform(&solver.grid, 1.0);
    let start = state.clone();
    for _ in 0..20 {
        solver.advance(&mut state).unwrap();
    }
    assert!(state.max_field_difference(&start) <= 1e-12);
}

#[test]
fn moving_body_runs_agree_across_backends() {
    let c = small_config();
    let run = |backend: BackendSpec| {
        let mut c = c.clone();
        c.backend = backend;
        let mut sim = Simulation::new(&c).unwrap();
        let forces: Vec<_> = (0..12).map(|_| sim.step().unwrap().force).collect();
        (sim.state, forces)
    };
    let (seq, f_seq) = run(BackendSpec::sequential());
    for w in [3, 5] {
        let (par, f_par) = run(BackendSpec::parallel(w).unwrap());
        assert!(seq.max_field_difference(&par) <= 1e-12, "{w} workers");
        assert_eq!(f_seq, f_par);
    }
}

#[test]
fn body_displacement_follows_plunge() {
    let c = small_config();
    let mut sim = Simulation::new(&c).unwrap();
    for _ in 0..20 {
        sim.step().unwrap();
    }
    let foil = sim.solver.foil_at(sim.state.t_bar).unwrap();
    let expected = c.plunge.h_bar * (c.plunge.k * sim.state.t_bar).sin();
    assert!((foil.y_disp - expected).abs() < 1e-14);
}
