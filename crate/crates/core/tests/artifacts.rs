use std::fs;

use ibmflow::config::{parse_config_file, serialize_config, SimConfig};
use ibmflow::forces::read_force_history;
use ibmflow::io::read_field_snapshot;
use ibmflow::profile::TimingReport;
use ibmflow::sim::run_simulation;

fn small_config(dir: &std::path::Path) -> SimConfig {
    let mut c = SimConfig::default();
    c.grid.x_domain = (-1.5, 2.0);
    c.grid.y_domain = (-1.0, 1.0);
    c.grid.h_min = 0.04;
    c.solver.dt = 0.005;
    c.time.n_steps = 6;
    c.time.output_interval = 2;
    c.time.snapshot_interval = 3;
    c.output.dir = dir.to_path_buf();
    c.output.grid = true;
    c.output.tags = true;
    c
}

#[test]
fn run_artifacts_parse_back() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let c = small_config(&out);
    let cfg_path = dir.path().join("run.cfg");
    fs::write(&cfg_path, serialize_config(&c)).unwrap();
    let c = parse_config_file(&cfg_path).unwrap();
    let summary = run_simulation(&c).unwrap();
    assert_eq!(summary.steps, 6);

    let forces = read_force_history(&out.join("forces.csv")).unwrap();
    assert_eq!(forces, summary.forces);
    let times: Vec<f64> = forces.iter().map(|f| f.t_bar).collect();
    assert_eq!(times.len(), 3);
    for (t, n) in times.iter().zip([2.0, 4.0, 6.0]) {
        assert!((t - n * 0.005).abs() < 1e-12);
    }
    assert!(forces.iter().all(|f| f.cl.is_finite() && f.cd.is_finite()));

    let mut snaps: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .filter_map(|e| e.ok()?.file_name().into_string().ok())
        .filter(|n| n.starts_with("field_"))
        .collect();
    snaps.sort();
    assert_eq!(snaps.len(), 3);
    let last = read_field_snapshot(&out.join(snaps.last().unwrap())).unwrap();
    assert_eq!(last.rows.len(), last.nx * last.ny);
    assert!((last.t_bar - 6.0 * 0.005).abs() < 1e-12);

    let timing = TimingReport::from_kv_text(&fs::read_to_string(out.join("timing.txt")).unwrap()).unwrap();
    assert_eq!(timing.steps, 6);
    assert!(timing.region("pressure_solver").is_some());
    assert!(out.join("timing.csv").exists());
    assert!(out.join("grid_x.txt").exists());
    assert!(out.join("tags_p_000000.txt").exists());
}
