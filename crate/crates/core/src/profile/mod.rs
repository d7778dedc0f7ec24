//! Region timing and speedup analytics.
//!
//! Timers are only started and stopped on the orchestrating thread at phase
//! boundaries, never inside parallel bodies.

pub mod scaling;

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("unknown timing region `{0}`")]
    UnknownRegion(String),
    #[error("times must be positive (got {0})")]
    NonPositiveTime(f64),
    #[error("speedups must be positive (got {0})")]
    NonPositiveSpeedup(f64),
    #[error("parallel fraction must lie in [0, 1] (got {0})")]
    BadFraction(f64),
    #[error("malformed timing line `{0}`")]
    Malformed(String),
}

/// Instrumented regions: the four per-step hotspots, everything else, and
/// the enclosing total.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    PressureSolver,
    Flagging,
    UvSolver,
    BodyForceInterpolation,
    Other,
    Total,
}

impl Region {
    pub const ALL: [Region; 6] = [
        Region::PressureSolver,
        Region::Flagging,
        Region::UvSolver,
        Region::BodyForceInterpolation,
        Region::Other,
        Region::Total,
    ];

    /// The regions that the parallel backends accelerate.
    pub const PARALLEL: [Region; 4] = [
        Region::PressureSolver,
        Region::Flagging,
        Region::UvSolver,
        Region::BodyForceInterpolation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Region::PressureSolver => "pressure_solver",
            Region::Flagging => "flagging",
            Region::UvSolver => "uv_solver",
            Region::BodyForceInterpolation => "body_force_interpolation",
            Region::Other => "other",
            Region::Total => "total",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.name() == name)
    }

    fn slot(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionTimer {
    pub name: String,
    pub total_s: f64,
    pub count: u64,
}

/// Start time of an open region.
#[derive(Debug, Clone, Copy)]
pub struct Stopwatch(Instant);

impl Stopwatch {
    pub fn start() -> Self {
        Stopwatch(Instant::now())
    }

    pub fn elapsed(&self) -> Duration {
        self.0.elapsed()
    }
}

#[derive(Debug, Clone)]
pub struct Profiler {
    totals: [Duration; 6],
    counts: [u64; 6],
    steps: u64,
}

impl Default for Profiler {
    fn default() -> Self {
        Self::new()
    }
}

impl Profiler {
    pub fn new() -> Self {
        Self {
            totals: [Duration::ZERO; 6],
            counts: [0; 6],
            steps: 0,
        }
    }

    pub fn stop(&mut self, region: Region, watch: Stopwatch) {
        self.record(region, watch.elapsed());
    }

    pub fn record(&mut self, region: Region, elapsed: Duration) {
        self.totals[region.slot()] += elapsed;
        self.counts[region.slot()] += 1;
    }

    pub fn add_steps(&mut self, n: u64) {
        self.steps += n;
    }

    pub fn reset(&mut self) {
        *self = Self::new();
    }

    pub fn report(&self) -> TimingReport {
        let regions = Region::ALL
            .iter()
            .map(|r| RegionTimer {
                name: r.name().to_string(),
                total_s: self.totals[r.slot()].as_secs_f64(),
                count: self.counts[r.slot()],
            })
            .collect();
        TimingReport {
            regions,
            total_s: self.totals[Region::Total.slot()].as_secs_f64(),
            steps: self.steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingReport {
    pub regions: Vec<RegionTimer>,
    pub total_s: f64,
    pub steps: u64,
}

impl TimingReport {
    pub fn region(&self, name: &str) -> Option<&RegionTimer> {
        self.regions.iter().find(|r| r.name == name)
    }

    pub fn per_step(&self, timer: &RegionTimer) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            timer.total_s / self.steps as f64
        }
    }

    /// Sum over all regions except `total`.
    pub fn accounted_s(&self) -> f64 {
        self.regions
            .iter()
            .filter(|r| r.name != Region::Total.name())
            .map(|r| r.total_s)
            .sum()
    }

    /// `region=<name> total_s=<float> per_step_s=<float> count=<int>` lines.
    pub fn to_kv_text(&self) -> String {
        let mut s = String::new();
        for r in &self.regions {
            let _ = writeln!(
                s,
                "region={} total_s={} per_step_s={} count={}",
                r.name,
                r.total_s,
                self.per_step(r),
                r.count
            );
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("region,total_s,per_step_s,count\n");
        for r in &self.regions {
            let _ = writeln!(s, "{},{},{},{}", r.name, r.total_s, self.per_step(r), r.count);
        }
        s
    }

    /// Parses the key-value form back; `steps` is recovered from total/per-step.
    pub fn from_kv_text(text: &str) -> Result<Self, ProfileError> {
        let mut regions = Vec::new();
        let mut steps = 0u64;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let bad = || ProfileError::Malformed(line.to_string());
            let mut name = None;
            let mut total = None;
            let mut per_step = None;
            let mut count = None;
            for field in line.split_whitespace() {
                let (k, v) = field.split_once('=').ok_or_else(bad)?;
                match k {
                    "region" => name = Some(v.to_string()),
                    "total_s" => total = Some(v.parse::<f64>().map_err(|_| bad())?),
                    "per_step_s" => per_step = Some(v.parse::<f64>().map_err(|_| bad())?),
                    "count" => count = Some(v.parse::<u64>().map_err(|_| bad())?),
                    _ => return Err(bad()),
                }
            }
            let (name, total, per_step, count) = match (name, total, per_step, count) {
                (Some(a), Some(b), Some(c), Some(d)) => (a, b, c, d),
                _ => return Err(bad()),
            };
            if Region::from_name(&name).is_none() {
                return Err(ProfileError::UnknownRegion(name));
            }
            if !(total >= 0.0 && per_step >= 0.0) {
                return Err(bad());
            }
            if per_step > 0.0 {
                steps = (total / per_step).round() as u64;
            }
            regions.push(RegionTimer {
                name,
                total_s: total,
                count,
            });
        }
        let total_s = regions
            .iter()
            .find(|r| r.name == Region::Total.name())
            .map(|r| r.total_s)
            .unwrap_or(0.0);
        Ok(Self {
            regions,
            total_s,
            steps,
        })
    }

    /// Table-shaped hotspot summary, largest per-step cost first.
    pub fn hotspot_table(&self) -> String {
        let mut rows: Vec<&RegionTimer> = self.regions.iter().filter(|r| r.name != "total").collect();
        rows.sort_by(|a, b| b.total_s.total_cmp(&a.total_s));
        let mut s = String::new();
        let _ = writeln!(s, "{:<28} {:>16} {:>8}", "region", "per_step_s", "share");
        for r in rows {
            let share = if self.total_s > 0.0 { r.total_s / self.total_s } else { 0.0 };
            let _ = writeln!(s, "{:<28} {:>16.6e} {:>7.2}%", r.name, self.per_step(r), 100.0 * share);
        }
        let _ = writeln!(s, "{:<28} {:>16.6e}", "total", self.total_s / self.steps.max(1) as f64);
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cores {
    Finite(u64),
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedupModel {
    pub parallel_fraction: f64,
    pub cores: Cores,
}

impl SpeedupModel {
    pub fn new(parallel_fraction: f64, cores: Cores) -> Result<Self, ProfileError> {
        if !(0.0..=1.0).contains(&parallel_fraction) {
            return Err(ProfileError::BadFraction(parallel_fraction));
        }
        Ok(Self {
            parallel_fraction,
            cores,
        })
    }
}

/// Amdahl bound `1 / ((1 - p) + p / n)`.
pub fn amdahl_speedup(model: &SpeedupModel) -> f64 {
    let p = model.parallel_fraction;
    let scaled = match model.cores {
        Cores::Finite(n) => p / n as f64,
        Cores::Infinite => 0.0,
    };
    1.0 / ((1.0 - p) + scaled)
}

/// Share of the total wall time spent in `parallel_regions`.
pub fn parallel_fraction(report: &TimingReport, parallel_regions: &[&str]) -> Result<f64, ProfileError> {
    let mut t_par = 0.0;
    for name in parallel_regions {
        let r = report
            .region(name)
            .ok_or_else(|| ProfileError::UnknownRegion(name.to_string()))?;
        t_par += r.total_s;
    }
    if report.total_s <= 0.0 {
        return Ok(0.0);
    }
    Ok((t_par / report.total_s).clamp(0.0, 1.0))
}

/// `t_ref / t_test`.
pub fn measured_speedup(t_ref: f64, t_test: f64) -> Result<f64, ProfileError> {
    for t in [t_ref, t_test] {
        if !(t > 0.0) {
            return Err(ProfileError::NonPositiveTime(t));
        }
    }
    Ok(t_ref / t_test)
}

/// `s_a / s_b`.
pub fn relative_speedup(s_a: f64, s_b: f64) -> Result<f64, ProfileError> {
    for s in [s_a, s_b] {
        if !(s > 0.0) {
            return Err(ProfileError::NonPositiveSpeedup(s));
        }
    }
    Ok(s_a / s_b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn synthetic(par: f64, ser: f64) -> TimingReport {
        TimingReport {
            regions: vec![
                RegionTimer {
                    name: "pressure_solver".into(),
                    total_s: par,
                    count: 1,
                },
                RegionTimer {
                    name: "other".into(),
                    total_s: ser,
                    count: 1,
                },
                RegionTimer {
                    name: "total".into(),
                    total_s: par + ser,
                    count: 1,
                },
            ],
            total_s: par + ser,
            steps: 1,
        }
    }

    #[test]
    fn amdahl_examples() {
        let inf = SpeedupModel::new(0.998, Cores::Infinite).unwrap();
        assert!((amdahl_speedup(&inf) - 500.0).abs() < 1e-9);
        let none = SpeedupModel::new(0.0, Cores::Finite(64)).unwrap();
        assert_eq!(amdahl_speedup(&none), 1.0);
        let gpu = SpeedupModel::new(0.998, Cores::Finite(5120)).unwrap();
        assert!((amdahl_speedup(&gpu) - 455.597_081_331_197_7).abs() < 1e-9);
        assert!(SpeedupModel::new(1.2, Cores::Infinite).is_err());
    }

    #[test]
    fn fraction_examples() {
        let r = synthetic(99.8, 0.2);
        assert_eq!(parallel_fraction(&r, &["pressure_solver"]).unwrap(), 0.998);
        assert_eq!(parallel_fraction(&r, &[]).unwrap(), 0.0);
        assert_eq!(parallel_fraction(&synthetic(3.0, 0.0), &["pressure_solver"]).unwrap(), 1.0);
        assert_eq!(
            parallel_fraction(&r, &["nope"]),
            Err(ProfileError::UnknownRegion("nope".into()))
        );
    }

    #[test]
    fn speedup_examples() {
        assert!((measured_speedup(13140.0, 244.4).unwrap() - 53.764_320_785_597).abs() < 1e-9);
        assert_eq!(measured_speedup(5.0, 5.0).unwrap(), 1.0);
        assert!((measured_speedup(39994.0, 368.3).unwrap() - 108.590_822_698_887).abs() < 1e-9);
        assert!(measured_speedup(0.0, 1.0).is_err());
        let s2 = measured_speedup(13140.0, 244.4).unwrap();
        let s1 = measured_speedup(13140.0, 4232.0).unwrap();
        assert!((relative_speedup(s2, s1).unwrap() - 17.315_875_613_748).abs() < 1e-9);
        assert_eq!(relative_speedup(3.5, 1.0).unwrap(), 3.5);
        assert_eq!(relative_speedup(2.0, 2.0).unwrap(), 1.0);
        assert!(relative_speedup(1.0, -1.0).is_err());
    }

    #[test]
    fn report_text_round_trip() {
        let mut p = Profiler::new();
        p.record(Region::PressureSolver, Duration::from_millis(30));
        p.record(Region::Flagging, Duration::from_millis(20));
        p.record(Region::Total, Duration::from_millis(60));
        p.add_steps(4);
        let rep = p.report();
        assert!(rep.accounted_s() <= rep.total_s);
        let text = rep.to_kv_text();
        assert!(text.lines().all(|l| l.starts_with("region=")));
        let back = TimingReport::from_kv_text(&text).unwrap();
        assert_eq!(back.regions, rep.regions);
        assert_eq!(back.steps, 4);
        assert!(rep.to_csv().starts_with("region,total_s,per_step_s,count\n"));
        assert!(TimingReport::from_kv_text("region=total total_s=x").is_err());
    }

    proptest! {
        #[test]
        fn amdahl_monotone(p in 0.0f64..1.0, dp in 0.0f64..0.5, n in 1u64..10_000, dn in 1u64..100) {
            let s = |p: f64, n: u64| amdahl_speedup(&SpeedupModel { parallel_fraction: p, cores: Cores::Finite(n) });
            let p2 = (p + dp).min(1.0);
            prop_assert!(s(p2, n) >= s(p, n) * (1.0 - 1e-12));
            prop_assert!(s(p, n + dn) >= s(p, n) * (1.0 - 1e-12));
            let s_inf = amdahl_speedup(&SpeedupModel { parallel_fraction: p, cores: Cores::Infinite });
            prop_assert!(s_inf >= s(p, n) * (1.0 - 1e-12));
        }

        #[test]
        fn speedup_composes(a in 1e-3f64..1e5, b in 1e-3f64..1e5, c in 1e-3f64..1e5) {
            let ab = measured_speedup(a, b).unwrap();
            let bc = measured_speedup(b, c).unwrap();
            let ac = measured_speedup(a, c).unwrap();
            prop_assert!((ab * bc - ac).abs() <= 1e-12 * ac);
        }
    }
}
