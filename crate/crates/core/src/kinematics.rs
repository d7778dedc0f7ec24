//! Elliptic foil geometry and prescribed sinusoidal plunging.
//!
//! All quantities are nondimensional: lengths in chords, velocities in units
//! of the free stream, time in convective units `t U / c`.

use std::f64::consts::PI;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("at least 8 boundary markers are required (got {0})")]
    TooFewMarkers(usize),
    #[error("thickness ratio must lie in (0, 1) (got {0})")]
    BadThickness(f64),
    #[error("plunge parameters require h_bar >= 0 and k > 0 (got h_bar={h_bar}, k={k})")]
    BadPlunge { h_bar: f64, k: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoilGeometry {
    pub chord: f64,
    pub thickness_ratio: f64,
    /// Foil center at `t = 0`.
    pub center0: (f64, f64),
}

impl Default for FoilGeometry {
    fn default() -> Self {
        Self {
            chord: 1.0,
            thickness_ratio: 0.12,
            center0: (0.0, 0.0),
        }
    }
}

impl FoilGeometry {
    pub fn new(thickness_ratio: f64, center0: (f64, f64)) -> Result<Self, KinematicsError> {
        if !(thickness_ratio > 0.0 && thickness_ratio < 1.0) {
            return Err(KinematicsError::BadThickness(thickness_ratio));
        }
        Ok(Self {
            chord: 1.0,
            thickness_ratio,
            center0,
        })
    }

    /// Streamwise semi-axis.
    pub fn a(&self) -> f64 {
        0.5 * self.chord
    }

    /// Cross-stream semi-axis.
    pub fn b(&self) -> f64 {
        0.5 * self.thickness_ratio * self.chord
    }

    pub fn area(&self) -> f64 {
        PI * self.a() * self.b()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlungeParams {
    pub h_bar: f64,
    pub k: f64,
}

impl Default for PlungeParams {
    fn default() -> Self {
        Self {
            h_bar: 0.16,
            k: 2.0 * PI,
        }
    }
}

impl PlungeParams {
    pub fn new(h_bar: f64, k: f64) -> Result<Self, KinematicsError> {
        if !(h_bar >= 0.0 && k > 0.0 && h_bar.is_finite() && k.is_finite()) {
            return Err(KinematicsError::BadPlunge { h_bar, k });
        }
        Ok(Self { h_bar, k })
    }

    /// Peak plunge velocity `k h_bar`.
    pub fn peak_velocity(&self) -> f64 {
        self.k * self.h_bar
    }

    /// Plunge period `2 pi / k` in convective time.
    pub fn period(&self) -> f64 {
        2.0 * PI / self.k
    }
}

pub fn plunge_displacement(t_bar: f64, params: &PlungeParams) -> f64 {
    params.h_bar * (params.k * t_bar).sin()
}

pub fn plunge_velocity(t_bar: f64, params: &PlungeParams) -> f64 {
    params.k * params.h_bar * (params.k * t_bar).cos()
}

/// Instantaneous foil state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoilState {
    pub geometry: FoilGeometry,
    pub y_disp: f64,
    pub y_vel: f64,
    pub t_bar: f64,
}

impl FoilState {
    pub fn at(geometry: FoilGeometry, params: &PlungeParams, t_bar: f64) -> Self {
        Self {
            geometry,
            y_disp: plunge_displacement(t_bar, params),
            y_vel: plunge_velocity(t_bar, params),
            t_bar,
        }
    }

    /// Current foil center.
    pub fn center(&self) -> (f64, f64) {
        let (x0, y0) = self.geometry.center0;
        (x0, y0 + self.y_disp)
    }

    /// Rigid-body velocity `(u, v)`; the foil only plunges.
    pub fn body_velocity(&self) -> (f64, f64) {
        (0.0, self.y_vel)
    }
}

/// Output-only Lagrangian markers, uniformly spaced in the ellipse angle.
pub fn boundary_markers(state: &FoilState, n_markers: usize) -> Result<Vec<(f64, f64)>, KinematicsError> {
    if n_markers < 8 {
        return Err(KinematicsError::TooFewMarkers(n_markers));
    }
    let (a, b) = (state.geometry.a(), state.geometry.b());
    let (cx, cy) = state.center();
    Ok((0..n_markers)
        .map(|m| {
            let theta = 2.0 * PI * m as f64 / n_markers as f64;
            (cx + a * theta.cos(), cy + b * theta.sin())
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper() -> PlungeParams {
        PlungeParams::new(0.16, 2.0 * PI).unwrap()
    }

    #[test]
    fn displacement_examples() {
        let p = paper();
        assert_eq!(plunge_displacement(0.0, &p), 0.0);
        let peak = plunge_displacement(PI / (2.0 * p.k), &p);
        assert!((peak - p.h_bar).abs() < 1e-15);
        let d = plunge_displacement(0.1, &p);
        assert!((d - 0.16 * (0.2 * PI).sin()).abs() < 1e-15);
    }

    #[test]
    fn velocity_examples() {
        let p = paper();
        assert_eq!(plunge_velocity(0.0, &p), p.k * p.h_bar);
        assert!(plunge_velocity(PI / (2.0 * p.k), &p).abs() < 1e-15);
        // k h_bar = 2 pi * 0.16 = 1.00531, quoted as 1.0
        assert!((plunge_velocity(0.0, &p) - 1.0).abs() < 0.006);
    }

    #[test]
    fn central_difference_matches_velocity() {
        let p = paper();
        let dt = 1e-4;
        for &t in &[0.03, 0.21, 0.4, 0.77, 1.3] {
            let fd = (plunge_displacement(t + dt, &p) - plunge_displacement(t - dt, &p)) / (2.0 * dt);
            let exact = plunge_velocity(t, &p);
            assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "t={t}");
        }
    }

    #[test]
    fn periodic_in_time() {
        let p = paper();
        for &t in &[0.0, 0.13, 0.5, 0.91] {
            let t2 = t + p.period();
            assert!((plunge_displacement(t, &p) - plunge_displacement(t2, &p)).abs() < 1e-12);
            assert!((plunge_velocity(t, &p) - plunge_velocity(t2, &p)).abs() < 1e-12);
        }
    }

    #[test]
    fn markers_lie_on_ellipse() {
        let geom = FoilGeometry::default();
        let s = FoilState::at(geom, &paper(), 0.1);
        let m = boundary_markers(&s, 64).unwrap();
        assert_eq!(m[0], (geom.a(), s.y_disp));
        let (a, b) = (geom.a(), geom.b());
        for &(x, y) in &m {
            let r = (x / a).powi(2) + ((y - s.y_disp) / b).powi(2) - 1.0;
            assert!(r.abs() < 1e-12);
        }
        let n = m.len() as f64;
        let cx: f64 = m.iter().map(|p| p.0).sum::<f64>() / n;
        let cy: f64 = m.iter().map(|p| p.1).sum::<f64>() / n;
        assert!(cx.abs() < 1e-12);
        assert!((cy - s.y_disp).abs() < 1e-12);
    }

    #[test]
    fn marker_count_and_params_validated() {
        let s = FoilState::at(FoilGeometry::default(), &paper(), 0.0);
        assert_eq!(boundary_markers(&s, 7), Err(KinematicsError::TooFewMarkers(7)));
        assert!(PlungeParams::new(-0.1, 1.0).is_err());
        assert!(PlungeParams::new(0.1, 0.0).is_err());
        assert!(FoilGeometry::new(1.2, (0.0, 0.0)).is_err());
    }
}
