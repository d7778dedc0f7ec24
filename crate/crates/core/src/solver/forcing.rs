//! Direct-forcing targets at body nodes and the diagnostic momentum
//! forcing field.

use crate::classify::{boundary_intercept, Family, NodeTag, TagField};
use crate::exec::Executor;
use crate::field::Field;
use crate::grid::StaggeredGrid;
use crate::kinematics::FoilState;

use super::SolverError;

/// Prescribed velocities at body nodes: interpolated targets at forcing
/// nodes, body velocity at solid nodes, zero at fluid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingTargets {
    pub u: Field<f64>,
    pub v: Field<f64>,
}

const DIRS: [(isize, isize); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// Targets for both velocity families from the explicit velocity `(u, v)`.
pub fn forcing_targets(
    exec: &Executor,
    grid: &StaggeredGrid,
    tags: &TagField,
    u: &Field<f64>,
    v: &Field<f64>,
    foil: &FoilState,
) -> Result<ForcingTargets, SolverError> {
    let y_vel = foil.y_vel;
    Ok(ForcingTargets {
        u: family_targets(exec, grid, Family::U, &tags.u, u, foil, |_, _| 0.0)?,
        v: family_targets(exec, grid, Family::V, &tags.v, v, foil, |_, _| y_vel)?,
    })
}

/// Targets for one family with an arbitrary body velocity `body(x, y)`.
pub fn family_targets<B>(
    exec: &Executor,
    grid: &StaggeredGrid,
    family: Family,
    tags: &Field<NodeTag>,
    vel: &Field<f64>,
    foil: &FoilState,
    body: B,
) -> Result<Field<f64>, SolverError>
where
    B: Fn(f64, f64) -> f64 + Sync,
{
    let (nx, ny) = tags.shape();
    let mut out = vec![0.0; nx * ny];
    exec.parallel_for_rows(&mut out, nx, |j, row| {
        for (i, t) in row.iter_mut().enumerate() {
            *t = match tags[(i, j)] {
                NodeTag::Fluid => 0.0,
                NodeTag::Solid => {
                    let (x, y) = family.position(grid, i, j);
                    body(x, y)
                }
                NodeTag::Forcing => {
                    node_target(grid, family, tags, vel, foil, &body, i, j).unwrap_or(f64::NAN)
                }
            };
        }
    });
    // Failures were marked NaN; rerun those nodes to recover the error.
    if let Some(k) = out.iter().position(|t| t.is_nan()) {
        let (i, j) = (k % nx, k / nx);
        node_target(grid, family, tags, vel, foil, &body, i, j)?;
        return Err(SolverError::BadParameter(format!(
            "non-finite forcing target at {} node ({i}, {j})",
            family.name()
        )));
    }
    Ok(Field::from_vec(nx, ny, out))
}

fn neighbour(tags: &Field<NodeTag>, i: usize, j: usize, d: (isize, isize), k: isize) -> Option<(usize, usize)> {
    let (nx, ny) = tags.shape();
    let ii = i as isize + d.0 * k;
    let jj = j as isize + d.1 * k;
    if ii < 0 || jj < 0 || ii >= nx as isize || jj >= ny as isize {
        return None;
    }
    let (ii, jj) = (ii as usize, jj as usize);
    tags[(ii, jj)].is_fluid().then_some((ii, jj))
}

/// Average of the per-direction linear extrapolations through the boundary
/// intercept. When the intercept is closer to the fluid neighbour than to
/// the node, the next fluid node out is used instead if available.
#[allow(clippy::too_many_arguments)]
fn node_target<B: Fn(f64, f64) -> f64>(
    grid: &StaggeredGrid,
    family: Family,
    tags: &Field<NodeTag>,
    vel: &Field<f64>,
    foil: &FoilState,
    body: &B,
    i: usize,
    j: usize,
) -> Result<f64, SolverError> {
    let p = family.position(grid, i, j);
    let mut sum = 0.0;
    let mut count = 0usize;
    for d in DIRS {
        let Some(f) = neighbour(tags, i, j, d, 1) else {
            continue;
        };
        let pf = family.position(grid, f.0, f.1);
        let b = boundary_intercept(pf, p, foil)?;
        let ub = body(b.0, b.1);
        let d_pb = (p.0 - b.0).abs() + (p.1 - b.1).abs();
        let mut d_fb = (pf.0 - b.0).abs() + (pf.1 - b.1).abs();
        let mut uf = vel[f];
        if d_fb < d_pb {
            if let Some(f2) = neighbour(tags, i, j, d, 2) {
                let p2 = family.position(grid, f2.0, f2.1);
                d_fb = (p2.0 - b.0).abs() + (p2.1 - b.1).abs();
                uf = vel[f2];
            }
        }
        sum += if d_fb > 0.0 { ub - (uf - ub) * d_pb / d_fb } else { ub };
        count += 1;
    }
    if count == 0 {
        return Err(SolverError::IsolatedForcingNode { family, i, j });
    }
    Ok(sum / count as f64)
}

/// `f = (target - u_hat) / dt` at body nodes (forcing and solid), zero at
/// fluid nodes, where `u_hat` is the unforced predictor estimate. Solid nodes
/// are prescribed too, so they carry forcing as well.
pub fn momentum_forcing_field(
    u_hat: &Field<f64>,
    targets: &Field<f64>,
    tags: &Field<NodeTag>,
    dt: f64,
) -> Field<f64> {
    let (nx, ny) = tags.shape();
    Field::from_fn(nx, ny, |i, j| {
        if tags[(i, j)].is_body() {
            (targets[(i, j)] - u_hat[(i, j)]) / dt
        } else {
            0.0
        }
    })
}
