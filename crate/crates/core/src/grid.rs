//! Stretched staggered Cartesian mesh.
//!
//! Each axis is uniform (spacing `h_min`) inside a configurable patch that
//! encloses the body's range of motion, and grows geometrically by `ratio`
//! per cell towards both domain boundaries. The last cell on each side is
//! clamped so the outermost node lands exactly on the domain boundary.
//!
//! Variables are staggered: `u` lives on vertical faces `(x_i, yc_j)`, `v` on
//! horizontal faces `(xc_i, y_j)` and `p` at cell centers `(xc_i, yc_j)`.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("axis bounds must satisfy domain_lo <= uniform_lo < uniform_hi <= domain_hi (got {domain_lo}, {uniform_lo}, {uniform_hi}, {domain_hi})")]
    NonMonotoneBounds {
        domain_lo: f64,
        uniform_lo: f64,
        uniform_hi: f64,
        domain_hi: f64,
    },
    #[error("h_min must be positive and finite (got {0})")]
    BadSpacing(f64),
    #[error("h_min = {h_min} exceeds the uniform span {span}")]
    SpacingExceedsUniformSpan { h_min: f64, span: f64 },
    #[error("stretch ratio must be >= 1 (got {0})")]
    BadRatio(f64),
    #[error("uniform patch of {cells} cells of width {h_min} does not fit in the domain")]
    UniformPatchTooLarge { cells: usize, h_min: f64 },
    #[error("point ({x}, {y}) lies outside the domain")]
    OutOfDomain { x: f64, y: f64 },
    #[error("unknown mesh preset `{0}`")]
    UnknownPreset(String),
}

/// One coordinate direction of the mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    coords: Vec<f64>,
    uniform_range: (f64, f64),
    h_min: f64,
    ratio: f64,
}

impl Axis {
    /// Node coordinates, strictly increasing.
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Extent of the uniform patch actually realised. It can exceed the
    /// requested patch slightly when the requested span is not a whole number
    /// of `h_min` cells; the extension is centered on the requested patch.
    pub fn uniform_range(&self) -> (f64, f64) {
        self.uniform_range
    }

    pub fn h_min(&self) -> f64 {
        self.h_min
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn n_cells(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn lo(&self) -> f64 {
        self.coords[0]
    }

    pub fn hi(&self) -> f64 {
        *self.coords.last().unwrap()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.coords.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.coords.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Index of the cell containing `x`, lower-inclusive and upper-exclusive
    /// except for the last cell which also owns the upper boundary.
    pub fn locate(&self, x: f64) -> Option<usize> {
        if !(x >= self.lo() && x <= self.hi()) {
            return None;
        }
        let n = self.n_cells();
        let above = self.coords.partition_point(|&c| c <= x);
        Some((above - 1).min(n - 1))
    }
}

pub fn build_axis(
    domain_lo: f64,
    domain_hi: f64,
    uniform_lo: f64,
    uniform_hi: f64,
    h_min: f64,
    ratio: f64,
) -> Result<Axis, GridError> {
    let bounds_ok = [domain_lo, domain_hi, uniform_lo, uniform_hi]
        .iter()
        .all(|v| v.is_finite())
        && domain_lo <= uniform_lo
        && uniform_lo < uniform_hi
        && uniform_hi <= domain_hi;
    if !bounds_ok {
        return Err(GridError::NonMonotoneBounds {
            domain_lo,
            uniform_lo,
            uniform_hi,
            domain_hi,
        });
    }
    if !(h_min > 0.0 && h_min.is_finite()) {
        return Err(GridError::BadSpacing(h_min));
    }
    if !(ratio >= 1.0 && ratio.is_finite()) {
        return Err(GridError::BadRatio(ratio));
    }
    let span = uniform_hi - uniform_lo;
    if h_min > span * (1.0 + 1e-12) {
        return Err(GridError::SpacingExceedsUniformSpan { h_min, span });
    }

    let domain_span = domain_hi - domain_lo;
    let snap = 1e-9 * domain_span.max(1.0);
    let n_uniform = ((span / h_min) - 1e-9).ceil().max(1.0) as usize;
    let extent = n_uniform as f64 * h_min;
    if extent > domain_span + snap {
        return Err(GridError::UniformPatchTooLarge {
            cells: n_uniform,
            h_min,
        });
    }
    let mut lo = 0.5 * (uniform_lo + uniform_hi) - 0.5 * extent;
    if lo < domain_lo {
        lo = domain_lo;
    }
    if lo + extent > domain_hi {
        lo = domain_hi - extent;
    }
    if (lo - uniform_lo).abs() <= snap {
        lo = uniform_lo;
    }
    if (lo - domain_lo).abs() <= snap {
        lo = domain_lo;
    }

    let mut uniform: Vec<f64> = (0..=n_uniform).map(|k| lo + k as f64 * h_min).collect();
    let mut hi = uniform[n_uniform];
    if (uniform_hi - hi).abs() <= snap {
        uniform[n_uniform] = uniform_hi;
        hi = uniform_hi;
    }
    if (domain_hi - hi).abs() <= snap {
        uniform[n_uniform] = domain_hi;
        hi = domain_hi;
    }

    let right = stretch(hi, domain_hi, h_min, ratio);
    let left = stretch(-lo, -domain_lo, h_min, ratio);

    let mut coords = Vec::with_capacity(left.len() + uniform.len() + right.len());
    coords.extend(left.iter().rev().map(|&c| -c));
    coords.extend_from_slice(&uniform);
    coords.extend_from_slice(&right);

    Ok(Axis {
        coords,
        uniform_range: (lo, hi),
        h_min,
        ratio,
    })
}

/// Nodes strictly beyond `start` up to and including `end`, with widths
/// `h*ratio, h*ratio^2, ...`. A leftover sliver narrower than half the next
/// width is merged into the previous stretched cell.
fn stretch(start: f64, end: f64, h: f64, ratio: f64) -> Vec<f64> {
    let mut nodes = Vec::new();
    if end <= start {
        return nodes;
    }
    let mut x = start;
    let mut w = h;
    loop {
        w *= ratio;
        if x + w < end {
            x += w;
            nodes.push(x);
            continue;
        }
        let remaining = end - x;
        if remaining >= 0.5 * w || nodes.is_empty() {
            nodes.push(end);
        } else {
            *nodes.last_mut().unwrap() = end;
        }
        return nodes;
    }
}

/// Axis-by-axis mesh description.
#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub x_domain: (f64, f64),
    pub y_domain: (f64, f64),
    pub x_uniform: (f64, f64),
    pub y_uniform: (f64, f64),
    pub h_min: f64,
    pub ratio: f64,
}

impl Default for GridConfig {
    /// Desk-scale validation mesh: a shrunk domain around the foil with a
    /// uniform patch of chord + plunge envelope + 0.5c margin.
    fn default() -> Self {
        Self {
            x_domain: (-3.0, 6.0),
            y_domain: (-3.0, 3.0),
            x_uniform: (-1.0, 1.0),
            y_uniform: (-0.72, 0.72),
            h_min: 0.02,
            ratio: 1.05,
        }
    }
}

impl GridConfig {
    /// Full-size computational domain `[-7.5, 24] x [-12.5, 12.5]` chords.
    pub fn full_domain(h_min: f64) -> Self {
        Self {
            x_domain: (-7.5, 24.0),
            y_domain: (-12.5, 12.5),
            h_min,
            ..Self::default()
        }
    }

    /// Uniform patch covering the chord, the plunge envelope `±h_bar`, the
    /// half-thickness and a margin, centered on the foil's initial position.
    pub fn uniform_patch(
        center: (f64, f64),
        chord: f64,
        thickness_ratio: f64,
        h_bar: f64,
        margin: f64,
    ) -> ((f64, f64), (f64, f64)) {
        let a = 0.5 * chord;
        let b = 0.5 * thickness_ratio * chord;
        let half_y = b + h_bar + margin;
        (
            (center.0 - a - margin, center.0 + a + margin),
            (center.1 - half_y, center.1 + half_y),
        )
    }

    pub fn x_axis(&self) -> Result<Axis, GridError> {
        build_axis(
            self.x_domain.0,
            self.x_domain.1,
            self.x_uniform.0,
            self.x_uniform.1,
            self.h_min,
            self.ratio,
        )
    }

    pub fn y_axis(&self) -> Result<Axis, GridError> {
        build_axis(
            self.y_domain.0,
            self.y_domain.1,
            self.y_uniform.0,
            self.y_uniform.1,
            self.h_min,
            self.ratio,
        )
    }

    /// Cell count this configuration produces.
    pub fn cell_count(&self) -> Result<usize, GridError> {
        Ok(self.x_axis()?.n_cells() * self.y_axis()?.n_cells())
    }

    /// Copy of `self` with `h_min` chosen so the cell count is as close as
    /// possible to `target`.
    pub fn with_target_cells(&self, target: usize) -> Result<Self, GridError> {
        let count = |h: f64| {
            let mut cfg = self.clone();
            cfg.h_min = h;
            cfg.cell_count().ok()
        };
        let min_span = (self.x_uniform.1 - self.x_uniform.0).min(self.y_uniform.1 - self.y_uniform.0);
        // Coarse end: one uniform cell. Fine end: shrink until the target is exceeded.
        let mut coarse = min_span;
        let mut fine = min_span;
        while count(fine).is_none_or(|c| c < target) {
            fine *= 0.5;
            if fine < 1e-6 {
                return Err(GridError::BadSpacing(fine));
            }
        }
        if count(coarse).is_some_and(|c| c >= target) {
            coarse = fine;
        }
        for _ in 0..80 {
            let mid = 0.5 * (coarse + fine);
            match count(mid) {
                Some(c) if c >= target => fine = mid,
                _ => coarse = mid,
            }
        }
        let dist = |h: f64| count(h).map_or(usize::MAX, |c| c.abs_diff(target));
        let h = if dist(fine) <= dist(coarse) { fine } else { coarse };
        let mut cfg = self.clone();
        cfg.h_min = h;
        Ok(cfg)
    }
}

/// Desk-scale mesh levels mirroring the 1:2:3 cell-count progression of the
/// production M1/M2/M3 meshes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MeshPreset {
    M1Desk,
    M2Desk,
    M3Desk,
}

impl MeshPreset {
    pub const ALL: [MeshPreset; 3] = [MeshPreset::M1Desk, MeshPreset::M2Desk, MeshPreset::M3Desk];

    pub fn name(self) -> &'static str {
        match self {
            MeshPreset::M1Desk => "M1-desk",
            MeshPreset::M2Desk => "M2-desk",
            MeshPreset::M3Desk => "M3-desk",
        }
    }

    /// Target cell count; M1 is at least a 256x256-equivalent mesh.
    pub fn target_cells(self) -> usize {
        match self {
            MeshPreset::M1Desk => 66_000,
            MeshPreset::M2Desk => 132_000,
            MeshPreset::M3Desk => 198_000,
        }
    }

    pub fn parse(name: &str) -> Result<Self, GridError> {
        match name {
            "M1-desk" | "D1" => Ok(MeshPreset::M1Desk),
            "M2-desk" | "D2" => Ok(MeshPreset::M2Desk),
            "M3-desk" | "D3" => Ok(MeshPreset::M3Desk),
            other => Err(GridError::UnknownPreset(other.to_string())),
        }
    }

    /// Resolve against the desk domain of `base`.
    pub fn grid_config(self, base: &GridConfig) -> Result<GridConfig, GridError> {
        base.with_target_cells(self.target_cells())
    }
}

/// Immutable staggered grid.
#[derive(Debug, Clone)]
pub struct StaggeredGrid {
    pub x_axis: Axis,
    pub y_axis: Axis,
    /// Cell-center coordinates.
    pub xc: Vec<f64>,
    pub yc: Vec<f64>,
    /// Cell widths.
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
    /// Center-to-center distances across interior faces; entry `i` spans
    /// `xc[i-1]..xc[i]`. The boundary entries hold the half-cell distances.
    pub dxc: Vec<f64>,
    pub dyc: Vec<f64>,
    pub nx: usize,
    pub ny: usize,
}

impl StaggeredGrid {
    pub fn new(x_axis: Axis, y_axis: Axis) -> Self {
        let xc = x_axis.centers();
        let yc = y_axis.centers();
        let dx = x_axis.widths();
        let dy = y_axis.widths();
        let dxc = center_distances(x_axis.coords(), &xc);
        let dyc = center_distances(y_axis.coords(), &yc);
        Self {
            nx: dx.len(),
            ny: dy.len(),
            x_axis,
            y_axis,
            xc,
            yc,
            dx,
            dy,
            dxc,
            dyc,
        }
    }

    /// Uniform `nx x ny` grid on a rectangle.
    pub fn uniform(x: (f64, f64), y: (f64, f64), nx: usize, ny: usize) -> Result<Self, GridError> {
        let ax = build_axis(x.0, x.1, x.0, x.1, (x.1 - x.0) / nx as f64, 1.0)?;
        let ay = build_axis(y.0, y.1, y.0, y.1, (y.1 - y.0) / ny as f64, 1.0)?;
        Ok(Self::new(ax, ay))
    }

    /// x coordinates of `u` nodes (the x nodes).
    pub fn xu(&self) -> &[f64] {
        self.x_axis.coords()
    }

    /// y coordinates of `v` nodes (the y nodes).
    pub fn yv(&self) -> &[f64] {
        self.y_axis.coords()
    }

    pub fn cell_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn cell_volume(&self, i: usize, j: usize) -> f64 {
        self.dx[i] * self.dy[j]
    }

    /// Control-volume width of the `u` node on x-node `i`.
    pub fn u_volume_width(&self, i: usize) -> f64 {
        self.dxc[i]
    }

    /// Control-volume height of the `v` node on y-node `j`.
    pub fn v_volume_height(&self, j: usize) -> f64 {
        self.dyc[j]
    }

    pub fn locate_cell(&self, x: f64, y: f64) -> Result<(usize, usize), GridError> {
        match (self.x_axis.locate(x), self.y_axis.locate(y)) {
            (Some(i), Some(j)) => Ok((i, j)),
            _ => Err(GridError::OutOfDomain { x, y }),
        }
    }
}

pub fn build_grid(config: &GridConfig) -> Result<StaggeredGrid, GridError> {
    Ok(StaggeredGrid::new(config.x_axis()?, config.y_axis()?))
}

fn center_distances(nodes: &[f64], centers: &[f64]) -> Vec<f64> {
    let n = centers.len();
    let mut d = Vec::with_capacity(n + 1);
    d.push(centers[0] - nodes[0]);
    for i in 1..n {
        d.push(centers[i] - centers[i - 1]);
    }
    d.push(nodes[n] - centers[n - 1]);
    d
}
