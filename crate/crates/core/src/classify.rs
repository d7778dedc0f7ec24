//! Fluid / solid / forcing classification of every staggered node.

use thiserror::Error;

use crate::exec::Executor;
use crate::field::Field;
use crate::grid::StaggeredGrid;
use crate::kinematics::FoilState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum NodeTag {
    #[default]
    Fluid,
    Solid,
    /// Inside the body with at least one fluid 4-neighbor of the same family.
    Forcing,
}

impl NodeTag {
    pub fn code(self) -> u8 {
        match self {
            NodeTag::Fluid => 0,
            NodeTag::Solid => 1,
            NodeTag::Forcing => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(NodeTag::Fluid),
            1 => Some(NodeTag::Solid),
            2 => Some(NodeTag::Forcing),
            _ => None,
        }
    }

    pub fn is_fluid(self) -> bool {
        self == NodeTag::Fluid
    }

    /// Solid or forcing.
    pub fn is_body(self) -> bool {
        self != NodeTag::Fluid
    }
}

/// Staggered variable family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    U,
    V,
    P,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::U => "u",
            Family::V => "v",
            Family::P => "p",
        }
    }

    /// Array shape of the family on `grid`.
    pub fn shape(self, grid: &StaggeredGrid) -> (usize, usize) {
        match self {
            Family::U => (grid.nx + 1, grid.ny),
            Family::V => (grid.nx, grid.ny + 1),
            Family::P => (grid.nx, grid.ny),
        }
    }

    /// Physical location of node `(i, j)`.
    #[inline]
    pub fn position(self, grid: &StaggeredGrid, i: usize, j: usize) -> (f64, f64) {
        match self {
            Family::U => (grid.xu()[i], grid.yc[j]),
            Family::V => (grid.xc[i], grid.yv()[j]),
            Family::P => (grid.xc[i], grid.yc[j]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TagField {
    pub u: Field<NodeTag>,
    pub v: Field<NodeTag>,
    pub p: Field<NodeTag>,
}

impl TagField {
    /// Everything fluid.
    pub fn all_fluid(grid: &StaggeredGrid) -> Self {
        let mk = |f: Family| {
            let (nx, ny) = f.shape(grid);
            Field::filled(nx, ny, NodeTag::Fluid)
        };
        Self {
            u: mk(Family::U),
            v: mk(Family::V),
            p: mk(Family::P),
        }
    }

    pub fn family(&self, family: Family) -> &Field<NodeTag> {
        match family {
            Family::U => &self.u,
            Family::V => &self.v,
            Family::P => &self.p,
        }
    }

    /// `(fluid, solid, forcing)` counts for one family.
    pub fn counts(&self, family: Family) -> (usize, usize, usize) {
        let mut c = (0, 0, 0);
        for t in self.family(family).iter() {
            match t {
                NodeTag::Fluid => c.0 += 1,
                NodeTag::Solid => c.1 += 1,
                NodeTag::Forcing => c.2 += 1,
            }
        }
        c
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("segment ({x0}, {y0}) -> ({x1}, {y1}) does not cross the body boundary")]
    NoIntersection { x0: f64, y0: f64, x1: f64, y1: f64 },
    #[error("segment ({x0}, {y0}) -> ({x1}, {y1}) is not axis-aligned")]
    NotAxisAligned { x0: f64, y0: f64, x1: f64, y1: f64 },
}

/// Boundary-inclusive point-in-ellipse test.
#[inline]
pub fn inside_body(x: f64, y: f64, state: &FoilState) -> bool {
    let (cx, cy) = state.center();
    let (a, b) = (state.geometry.a(), state.geometry.b());
    let rx = (x - cx) / a;
    let ry = (y - cy) / b;
    rx * rx + ry * ry <= 1.0
}

/// Classifies all three families for the instantaneous foil position.
pub fn classify_all(exec: &Executor, grid: &StaggeredGrid, state: &FoilState) -> TagField {
    TagField {
        u: classify_family(exec, grid, state, Family::U),
        v: classify_family(exec, grid, state, Family::V),
        p: classify_family(exec, grid, state, Family::P),
    }
}

pub fn classify_family(
    exec: &Executor,
    grid: &StaggeredGrid,
    state: &FoilState,
    family: Family,
) -> Field<NodeTag> {
    let (nx, ny) = family.shape(grid);
    let mut inside = vec![false; nx * ny];
    exec.parallel_for_rows(&mut inside, nx, |j, row| {
        for (i, cell) in row.iter_mut().enumerate() {
            let (x, y) = family.position(grid, i, j);
            *cell = inside_body(x, y, state);
        }
    });
    let mut tags = vec![NodeTag::Fluid; nx * ny];
    exec.parallel_for_rows(&mut tags, nx, |j, row| {
        for (i, tag) in row.iter_mut().enumerate() {
            let k = j * nx + i;
            if !inside[k] {
                continue;
            }
            let fluid_nb = (i > 0 && !inside[k - 1])
                || (i + 1 < nx && !inside[k + 1])
                || (j > 0 && !inside[k - nx])
                || (j + 1 < ny && !inside[k + nx]);
            *tag = if fluid_nb { NodeTag::Forcing } else { NodeTag::Solid };
        }
    });
    Field::from_vec(nx, ny, tags)
}

/// Closed-form intersection of an axis-aligned segment with the ellipse.
/// `from_fluid` must be outside (or on) the boundary, `to_forcing` inside.
pub fn boundary_intercept(
    from_fluid: (f64, f64),
    to_forcing: (f64, f64),
    state: &FoilState,
) -> Result<(f64, f64), ClassifyError> {
    let (x0, y0) = from_fluid;
    let (x1, y1) = to_forcing;
    let (cx, cy) = state.center();
    let (a, b) = (state.geometry.a(), state.geometry.b());
    let err_none = ClassifyError::NoIntersection { x0, y0, x1, y1 };

    // Solve along the varying coordinate s in [s0, s1] with the other fixed.
    let (fixed, s0, s1, center_fixed, center_s, semi_fixed, semi_s, horizontal) = if y0 == y1 {
        (y0, x0, x1, cy, cx, b, a, true)
    } else if x0 == x1 {
        (x0, y0, y1, cx, cy, a, b, false)
    } else {
        return Err(ClassifyError::NotAxisAligned { x0, y0, x1, y1 });
    };
    let r = (fixed - center_fixed) / semi_fixed;
    let disc = 1.0 - r * r;
    if disc < 0.0 {
        return Err(err_none);
    }
    let half = semi_s * disc.sqrt();
    let (lo, hi) = if s0 <= s1 { (s0, s1) } else { (s1, s0) };
    let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
    let candidates = [center_s - half, center_s + half];
    // Prefer the root nearer the forcing end when both lie on the segment.
    let root = candidates
        .iter()
        .copied()
        .filter(|&s| s >= lo - slack && s <= hi + slack)
        .min_by(|p, q| (p - s1).abs().total_cmp(&(q - s1).abs()))
        .ok_or(err_none)?
        .clamp(lo, hi);
    Ok(if horizontal { (root, fixed) } else { (fixed, root) })
}
