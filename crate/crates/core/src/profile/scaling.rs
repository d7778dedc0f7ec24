//! Wall-time sweeps over meshes, backends and step counts.

use std::fmt::Write as _;

use crate::exec::BackendSpec;
use crate::grid::MeshPreset;

use super::measured_speedup;

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingCell {
    pub mesh: MeshPreset,
    pub backend: BackendSpec,
    pub steps: usize,
    /// Wall seconds, or the failure message of the run.
    pub wall_s: Result<f64, String>,
    /// Against the first backend of the sweep on the same mesh and step count.
    pub speedup: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScalingReport {
    pub cells: Vec<ScalingCell>,
    pub backends: Vec<BackendSpec>,
    pub meshes: Vec<MeshPreset>,
    pub step_counts: Vec<usize>,
}

/// Runs every `(mesh, backend, steps)` combination through `run`, which
/// returns the wall time in seconds. A failing cell is recorded and the sweep
/// continues.
pub fn scaling_harness<R>(
    meshes: &[MeshPreset],
    step_counts: &[usize],
    backends: &[BackendSpec],
    mut run: R,
) -> ScalingReport
where
    R: FnMut(MeshPreset, BackendSpec, usize) -> Result<f64, String>,
{
    let mut cells = Vec::new();
    for &mesh in meshes {
        for &steps in step_counts {
            let start = cells.len();
            for &backend in backends {
                let wall_s = run(mesh, backend, steps);
                if let Err(e) = &wall_s {
                    log::warn!("{} {backend} {steps} steps failed: {e}", mesh.name());
                }
                cells.push(ScalingCell {
                    mesh,
                    backend,
                    steps,
                    wall_s,
                    speedup: None,
                });
            }
            let reference = cells[start].wall_s.clone().ok();
            for cell in &mut cells[start..] {
                cell.speedup = match (reference, &cell.wall_s) {
                    (Some(r), Ok(w)) => measured_speedup(r, *w).ok(),
                    _ => None,
                };
            }
        }
    }
    ScalingReport {
        cells,
        backends: backends.to_vec(),
        meshes: meshes.to_vec(),
        step_counts: step_counts.to_vec(),
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "failed".to_string(), |v| format!("{v:?}"))
}

impl ScalingReport {
    pub fn cell(&self, mesh: MeshPreset, backend: BackendSpec, steps: usize) -> Option<&ScalingCell> {
        self.cells
            .iter()
            .find(|c| c.mesh == mesh && c.backend == backend && c.steps == steps)
    }

    /// Speedup of `backend` on each mesh, in sweep order.
    pub fn speedup_vs_mesh(&self, backend: BackendSpec, steps: usize) -> Vec<Option<f64>> {
        self.meshes
            .iter()
            .map(|&m| self.cell(m, backend, steps).and_then(|c| c.speedup))
            .collect()
    }

    /// Speedup of `backend` at each step count, in sweep order.
    pub fn speedup_vs_steps(&self, mesh: MeshPreset, backend: BackendSpec) -> Vec<Option<f64>> {
        self.step_counts
            .iter()
            .map(|&s| self.cell(mesh, backend, s).and_then(|c| c.speedup))
            .collect()
    }

    /// `mesh,backend,workers,steps,wall_s,speedup`; failed cells read `failed`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("mesh,backend,workers,steps,wall_s,speedup\n");
        for c in &self.cells {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                c.mesh.name(),
                c.backend.kind,
                c.backend.workers,
                c.steps,
                fmt_opt(c.wall_s.clone().ok()),
                fmt_opt(c.speedup)
            );
        }
        s
    }

    /// Human-readable speedup-vs-steps and speedup-vs-mesh tables.
    pub fn tables(&self) -> String {
        let label = |b: &BackendSpec| format!("{}x{}", b.kind, b.workers);
        let cell = |x: Option<f64>| x.map_or_else(|| "failed".to_string(), |v| format!("{v:.3}"));
        let mut s = String::from("speedup vs steps\n");
        let _ = write!(s, "{:<10} {:<14}", "mesh", "backend");
        for n in &self.step_counts {
            let _ = write!(s, " {n:>10}");
        }
        s.push('\n');
        for &m in &self.meshes {
            for b in &self.backends {
                let _ = write!(s, "{:<10} {:<14}", m.name(), label(b));
                for x in self.speedup_vs_steps(m, *b) {
                    let _ = write!(s, " {:>10}", cell(x));
                }
                s.push('\n');
            }
        }
        s.push_str("\nspeedup vs mesh\n");
        let _ = write!(s, "{:<10} {:<14}", "steps", "backend");
        for m in &self.meshes {
            let _ = write!(s, " {:>10}", m.name());
        }
        s.push('\n');
        for &n in &self.step_counts {
            for b in &self.backends {
                let _ = write!(s, "{:<10} {:<14}", n, label(b));
                for x in self.speedup_vs_mesh(*b, n) {
                    let _ = write!(s, " {:>10}", cell(x));
                }
                s.push('\n');
            }
        }
        s
    }
}
