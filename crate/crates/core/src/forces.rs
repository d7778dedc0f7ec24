//! Lift and drag from the momentum forcing and the momentum change of the
//! fluid carried inside the body.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::classify::TagField;
use crate::field::Field;
use crate::grid::StaggeredGrid;
use crate::solver::FlowState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceSample {
    pub t_bar: f64,
    pub cl: f64,
    pub cd: f64,
}

#[derive(Debug, Error)]
pub enum ForceIoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// `F = -sum f dV + sum (u^{n+1} - u^n)/dt dV` over the current body nodes;
/// `cd = 2 F_x`, `cl = 2 F_y` (unit chord and free stream).
///
/// With `f` present on every body node the sum reduces to the body-region
/// integral of the explicit momentum right-hand side, whose pressure part
/// telescopes along grid lines to the surface pressure integral.
pub fn compute_coefficients(
    state: &FlowState,
    state_prev: &FlowState,
    grid: &StaggeredGrid,
    tags: &TagField,
    dt: f64,
) -> ForceSample {
    let fx = family_force(&state.f_u, &state.u, &state_prev.u, &tags.u, dt, |i, j| {
        grid.dxc[i] * grid.dy[j]
    });
    let fy = family_force(&state.f_v, &state.v, &state_prev.v, &tags.v, dt, |i, j| {
        grid.dx[i] * grid.dyc[j]
    });
    ForceSample {
        t_bar: state.t_bar,
        cl: 2.0 * fy,
        cd: 2.0 * fx,
    }
}

fn family_force(
    f: &Field<f64>,
    now: &Field<f64>,
    prev: &Field<f64>,
    tags: &Field<crate::classify::NodeTag>,
    dt: f64,
    vol: impl Fn(usize, usize) -> f64,
) -> f64 {
    let (nx, ny) = tags.shape();
    let mut total = 0.0;
    for j in 0..ny {
        for i in 0..nx {
            let t = tags[(i, j)];
            if t.is_body() {
                let dv = vol(i, j);
                total += (now[(i, j)] - prev[(i, j)]) / dt * dv - f[(i, j)] * dv;
            }
        }
    }
    total
}

/// CSV with header `t_bar,cl,cd`; values use the shortest round-trip form.
pub fn write_force_history(samples: &[ForceSample], path: &Path) -> io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(force_history_text(samples).as_bytes())?;
    w.flush()
}

pub fn force_history_text(samples: &[ForceSample]) -> String {
    let mut s = String::from("t_bar,cl,cd\n");
    for x in samples {
        s.push_str(&format!("{:?},{:?},{:?}\n", x.t_bar, x.cl, x.cd));
    }
    s
}

pub fn parse_force_history(text: &str) -> Result<Vec<ForceSample>, ForceIoError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "t_bar,cl,cd" => {}
        _ => {
            return Err(ForceIoError::Parse {
                line: 1,
                msg: "expected header `t_bar,cl,cd`".into(),
            })
        }
    }
    let mut out = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Result<Vec<f64>, _> = line.split(',').map(|t| t.trim().parse::<f64>()).collect();
        match vals {
            Ok(v) if v.len() == 3 => out.push(ForceSample {
                t_bar: v[0],
                cl: v[1],
                cd: v[2],
            }),
            _ => {
                return Err(ForceIoError::Parse {
                    line: n + 1,
                    msg: format!("expected three numbers, got `{line}`"),
                })
            }
        }
    }
    Ok(out)
}

pub fn read_force_history(path: &Path) -> Result<Vec<ForceSample>, ForceIoError> {
    parse_force_history(&fs::read_to_string(path)?)
}

/// Summary of one complete plunge cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleStats {
    pub index: usize,
    pub cl_max: f64,
    pub cl_min: f64,
    pub cd_mean: f64,
}

/// Periodicity analysis of a force history sampled at a uniform interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Periodicity {
    pub period: f64,
    /// Lag of the autocorrelation maximum of `cl` after the first cycle.
    pub measured_period: Option<f64>,
    pub cycles: Vec<CycleStats>,
    /// Cycles treated as start-up transient.
    pub skip: usize,
    /// Largest relative change of the `cl` extrema between consecutive cycles
    /// past the transient.
    pub peak_deviation: Option<f64>,
    /// Largest relative change of the cycle-mean `cd` between consecutive
    /// cycles past the transient.
    pub cd_drift: Option<f64>,
}

impl Periodicity {
    pub const PERIOD_TOL: f64 = 0.02;
    pub const PEAK_TOL: f64 = 0.05;
    pub const CD_TOL: f64 = 0.05;

    pub fn period_ok(&self) -> bool {
        self.measured_period
            .is_some_and(|p| ((p - self.period) / self.period).abs() <= Self::PERIOD_TOL)
    }

    pub fn peaks_ok(&self) -> bool {
        self.peak_deviation.is_some_and(|d| d < Self::PEAK_TOL)
    }

    pub fn cd_ok(&self) -> bool {
        self.cycles.iter().all(|c| c.cd_mean.is_finite()) && self.cd_drift.is_some_and(|d| d < Self::CD_TOL)
    }

    pub fn passed(&self) -> bool {
        self.period_ok() && self.peaks_ok() && self.cd_ok()
    }

    pub fn to_text(&self) -> String {
        let mark = |ok: bool| if ok { "PASS" } else { "FAIL" };
        let opt = |x: Option<f64>| x.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
        let mut s = String::new();
        for c in &self.cycles {
            s.push_str(&format!(
                "cycle {} cl_max={:.4} cl_min={:.4} cd_mean={:.5}\n",
                c.index + 1,
                c.cl_max,
                c.cl_min,
                c.cd_mean
            ));
        }
        s.push_str(&format!(
            "{} period measured={} expected={:.4}\n",
            mark(self.period_ok()),
            opt(self.measured_period),
            self.period
        ));
        s.push_str(&format!(
            "{} cl_peak_deviation={} bound={}\n",
            mark(self.peaks_ok()),
            opt(self.peak_deviation),
            Self::PEAK_TOL
        ));
        s.push_str(&format!("{} cd_mean_drift={} bound={}\n", mark(self.cd_ok()), opt(self.cd_drift), Self::CD_TOL));
        s
    }
}

/// Splits `samples` into cycles `(c T, (c + 1) T]` and compares consecutive
/// cycles whose index is at least `skip`.
pub fn periodicity(samples: &[ForceSample], period: f64, skip: usize) -> Periodicity {
    let mut cycles: Vec<CycleStats> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    let eps = 1e-9 * period;
    for s in samples {
        let index = ((s.t_bar - eps) / period).floor().max(0.0) as usize;
        if cycles.last().is_none_or(|c| c.index != index) {
            cycles.push(CycleStats {
                index,
                cl_max: f64::NEG_INFINITY,
                cl_min: f64::INFINITY,
                cd_mean: 0.0,
            });
            counts.push(0);
        }
        let c = cycles.last_mut().unwrap();
        c.cl_max = c.cl_max.max(s.cl);
        c.cl_min = c.cl_min.min(s.cl);
        c.cd_mean += s.cd;
        *counts.last_mut().unwrap() += 1;
    }
    for (c, n) in cycles.iter_mut().zip(&counts) {
        c.cd_mean /= *n as f64;
    }
    // Only complete cycles count.
    let spacing = sample_spacing(samples);
    if let (Some(last), Some(h)) = (cycles.last(), spacing) {
        let end = samples.last().map_or(0.0, |s| s.t_bar);
        if end < (last.index + 1) as f64 * period - 0.5 * h {
            cycles.pop();
        }
    }

    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    let mut peak_deviation: Option<f64> = None;
    let mut cd_drift: Option<f64> = None;
    for w in cycles.windows(2) {
        if w[1].index < skip.max(1) || w[1].index != w[0].index + 1 {
            continue;
        }
        let d = rel(w[1].cl_max, w[0].cl_max).max(rel(w[1].cl_min, w[0].cl_min));
        peak_deviation = Some(peak_deviation.map_or(d, |x| x.max(d)));
        let c = rel(w[1].cd_mean, w[0].cd_mean);
        cd_drift = Some(cd_drift.map_or(c, |x| x.max(c)));
    }

    Periodicity {
        period,
        measured_period: spacing.and_then(|h| autocorrelation_period(samples, period, h)),
        cycles,
        skip,
        peak_deviation,
        cd_drift,
    }
}

fn sample_spacing(samples: &[ForceSample]) -> Option<f64> {
    (samples.len() >= 2).then(|| (samples[samples.len() - 1].t_bar - samples[0].t_bar) / (samples.len() - 1) as f64)
}

/// Lag in `[T/2, 3T/2]` maximising the normalised autocorrelation of `cl`
/// past the first cycle, refined by a parabola through the peak.
fn autocorrelation_period(samples: &[ForceSample], period: f64, h: f64) -> Option<f64> {
    let x: Vec<f64> = samples.iter().filter(|s| s.t_bar > period).map(|s| s.cl).collect();
    let mean = x.iter().sum::<f64>() / x.len().max(1) as f64;
    let x: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let lo = (0.5 * period / h).round() as usize;
    let hi = ((1.5 * period / h).round() as usize).min(x.len().saturating_sub(2));
    if lo < 1 || hi <= lo + 1 {
        return None;
    }
    let corr = |lag: usize| {
        let (a, b) = (&x[..x.len() - lag], &x[lag..]);
        let ab: f64 = a.iter().zip(b).map(|(p, q)| p * q).sum();
        let aa: f64 = a.iter().map(|p| p * p).sum();
        let bb: f64 = b.iter().map(|q| q * q).sum();
        ab / (aa * bb).sqrt()
    };
    let r: Vec<f64> = (lo - 1..=hi + 1).map(corr).collect();
    let k = (1..r.len() - 1).max_by(|&a, &b| r[a].total_cmp(&r[b]))?;
    let (ym, y0, yp) = (r[k - 1], r[k], r[k + 1]);
    let denom = ym - 2.0 * y0 + yp;
    let shift = if denom < 0.0 { 0.5 * (ym - yp) / denom } else { 0.0 };
    Some(((lo - 1 + k) as f64 + shift) * h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{classify_all, NodeTag};
    use crate::exec::Executor;
    use crate::kinematics::{FoilGeometry, FoilState};

    fn setup() -> (StaggeredGrid, TagField) {
        let g = StaggeredGrid::uniform((-1.0, 1.0), (-0.5, 0.5), 50, 25).unwrap();
        let foil = FoilState {
            geometry: FoilGeometry::default(),
            y_disp: 0.0,
            y_vel: 0.0,
            t_bar: 0.0,
        };
        let tags = classify_all(&Executor::sequential(), &g, &foil);
        (g, tags)
    }

    #[test]
    fn quiescent_gives_zero() {
        let (g, tags) = setup();
        let s = FlowState::zeros(&g);
        let f = compute_coefficients(&s, &s, &g, &tags, 0.01);
        assert_eq!((f.cl, f.cd), (0.0, 0.0));
    }

    #[test]
    fn zero_forcing_leaves_momentum_change() {
        let (g, tags) = setup();
        let prev = FlowState::zeros(&g);
        let mut s = FlowState::zeros(&g);
        s.v = Field::filled(g.nx, g.ny + 1, 0.5);
        let f = compute_coefficients(&s, &prev, &g, &tags, 0.1);
        let mut vol = 0.0;
        for j in 0..=g.ny {
            for i in 0..g.nx {
                if tags.v[(i, j)] != NodeTag::Fluid {
                    vol += g.dx[i] * g.dyc[j];
                }
            }
        }
        assert!((f.cl - 2.0 * 5.0 * vol).abs() < 1e-12);
        assert_eq!(f.cd, 0.0);
    }

    #[test]
    fn forcing_sign_convention() {
        let (g, tags) = setup();
        let prev = FlowState::zeros(&g);
        let mut s = FlowState::zeros(&g);
        // forcing that holds the fluid back pushes the body downstream
        for j in 0..g.ny {
            for i in 0..=g.nx {
                if tags.u[(i, j)] == NodeTag::Forcing {
                    s.f_u[(i, j)] = -1.0;
                }
            }
        }
        let f = compute_coefficients(&s, &prev, &g, &tags, 0.1);
        assert!(f.cd > 0.0);
        // pressure offset has no effect
        s.p = Field::filled(g.nx, g.ny, 7.0);
        assert_eq!(compute_coefficients(&s, &prev, &g, &tags, 0.1), f);
    }

    #[test]
    fn history_round_trip() {
        let samples = vec![
            ForceSample {
                t_bar: 0.0025,
                cl: -1.234567890123e-3,
                cd: 0.1 + 0.2,
            },
            ForceSample {
                t_bar: 1.0 / 3.0,
                cl: 1e300,
                cd: -0.0,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("forces.csv");
        write_force_history(&samples, &p).unwrap();
        let back = read_force_history(&p).unwrap();
        assert_eq!(back, samples);
        assert!(fs::read_to_string(&p).unwrap().starts_with("t_bar,cl,cd\n"));
    }

    #[test]
    fn malformed_history_reports_line() {
        let e = parse_force_history("t_bar,cl,cd\n1,2,3\n1,2\n").unwrap_err();
        assert!(matches!(e, ForceIoError::Parse { line: 3, .. }));
    }

    fn synthetic(n_cycles: usize, period: f64, growth: f64) -> Vec<ForceSample> {
        let h = period / 400.0;
        (1..=n_cycles * 400)
            .map(|n| {
                let t = n as f64 * h;
                let amp = 1.0 + growth * t;
                ForceSample {
                    t_bar: t,
                    cl: amp * (2.0 * std::f64::consts::PI * t / period).sin(),
                    cd: 0.2 + 0.1 * (4.0 * std::f64::consts::PI * t / period).cos(),
                }
            })
            .collect()
    }

    #[test]
    fn periodic_signal_passes() {
        let p = periodicity(&synthetic(5, 0.8, 0.0), 0.8, 3);
        assert_eq!(p.cycles.len(), 5);
        assert!((p.measured_period.unwrap() - 0.8).abs() < 1e-3);
        assert!(p.peak_deviation.unwrap() < 1e-9);
        assert!(p.passed(), "{}", p.to_text());
    }

    #[test]
    fn growing_signal_fails_peaks() {
        let p = periodicity(&synthetic(5, 1.0, 0.1), 1.0, 3);
        assert!(p.period_ok());
        assert!(!p.peaks_ok());
        assert!(!p.passed());
    }

    #[test]
    fn incomplete_cycle_is_dropped() {
        let mut s = synthetic(3, 1.0, 0.0);
        s.truncate(1000);
        let p = periodicity(&s, 1.0, 1);
        assert_eq!(p.cycles.len(), 2);
    }
}
