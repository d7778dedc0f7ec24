//! Line-oriented `section.key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Every key is
//! optional; missing keys keep the default of the chosen preset. A leading
//! `preset = desk | paper_validation` line selects the base configuration.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::exec::{BackendKind, BackendSpec};
use crate::grid::{GridConfig, GridError, MeshPreset};
use crate::kinematics::{FoilGeometry, PlungeParams};
use crate::solver::{ConvergencePolicy, SolverParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    DuplicateKey { line: usize, key: String },
    #[error("invalid `{key}`: {msg}")]
    Invalid { key: String, msg: String },
}

impl ConfigError {
    fn invalid(key: &str, msg: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key: key.to_string(),
            msg: msg.into(),
        }
    }

    /// Name of the offending key, when there is one.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::UnknownKey { key, .. }
            | ConfigError::DuplicateKey { key, .. }
            | ConfigError::Invalid { key, .. } => Some(key),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeConfig {
    pub n_steps: usize,
    /// A force sample is written every this many steps.
    pub output_interval: usize,
    /// A field snapshot is written every this many steps; 0 keeps only the
    /// initial one.
    pub snapshot_interval: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub forces: bool,
    pub snapshots: bool,
    pub timing: bool,
    pub grid: bool,
    pub tags: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub grid: GridConfig,
    pub foil: FoilGeometry,
    pub plunge: PlungeParams,
    /// Includes `Re` and `dt`.
    pub solver: SolverParams,
    pub time: TimeConfig,
    pub backend: BackendSpec,
    pub output: OutputConfig,
}

impl Default for SimConfig {
    /// Desk-scale plunging-foil case: Re 500, k = 2 pi, h_bar = 0.16 on the
    /// shrunk domain with h_min = 0.02, five plunge periods.
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            foil: FoilGeometry::default(),
            plunge: PlungeParams::default(),
            solver: SolverParams {
                sor_omega: 1.99,
                ..SolverParams::default()
            },
            time: TimeConfig {
                n_steps: 2000,
                output_interval: 1,
                snapshot_interval: 400,
            },
            backend: BackendSpec::sequential(),
            output: OutputConfig {
                dir: PathBuf::from("out"),
                forces: true,
                snapshots: true,
                timing: true,
                grid: false,
                tags: false,
            },
        }
    }
}

impl SimConfig {
    /// Production-resolution case: full domain, h_min = 0.004, dt = 1e-4,
    /// four plunge periods.
    pub fn paper_validation() -> Self {
        let mut c = Self {
            grid: GridConfig::full_domain(0.004),
            ..Self::default()
        };
        c.solver.dt = 1e-4;
        c.time.n_steps = 40_000;
        c.time.snapshot_interval = 10_000;
        c.time.output_interval = 10;
        c
    }

    /// This case on `mesh`, with `dt` scaled by the refinement ratio
    /// `r = h_min / mesh h_min` to hold the CFL number. SOR iteration counts
    /// grow with the linear resolution, so `2 - sor_omega` shrinks and
    /// `sor_max_iters` grows by `r` as well.
    pub fn on_mesh(&self, mesh: MeshPreset) -> Result<Self, GridError> {
        let mut c = self.clone();
        c.grid = mesh.grid_config(&self.grid)?;
        let r = self.grid.h_min / c.grid.h_min;
        if r > 1.0 {
            c.solver.dt = self.solver.dt / r;
            c.solver.sor_omega = 2.0 - (2.0 - self.solver.sor_omega) / r;
            c.solver.sor_max_iters = (self.solver.sor_max_iters as f64 * r).ceil() as usize;
        }
        Ok(c)
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "desk" => Some(Self::default()),
            "paper_validation" => Some(Self::paper_validation()),
            _ => None,
        }
    }

    /// Checks every numeric constraint, naming the offending key.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let g = &self.grid;
        if !(g.h_min > 0.0 && g.h_min.is_finite()) {
            return Err(ConfigError::invalid("grid.h_min", format!("must be positive, got {}", g.h_min)));
        }
        if !(g.ratio >= 1.0 && g.ratio.is_finite()) {
            return Err(ConfigError::invalid("grid.ratio", format!("must be >= 1, got {}", g.ratio)));
        }
        for (axis, res) in [("x", g.x_axis()), ("y", g.y_axis())] {
            if let Err(e) = res {
                let key = match e {
                    GridError::BadSpacing(_) | GridError::SpacingExceedsUniformSpan { .. } => "grid.h_min".to_string(),
                    GridError::BadRatio(_) => "grid.ratio".to_string(),
                    _ => format!("grid.{axis}_*"),
                };
                return Err(ConfigError::invalid(&key, e.to_string()));
            }
        }
        FoilGeometry::new(self.foil.thickness_ratio, self.foil.center0)
            .map_err(|e| ConfigError::invalid("foil.thickness_ratio", e.to_string()))?;
        if !(self.plunge.h_bar >= 0.0 && self.plunge.h_bar.is_finite()) {
            return Err(ConfigError::invalid("kinematics.h_bar", "must be non-negative"));
        }
        if !(self.plunge.k > 0.0 && self.plunge.k.is_finite()) {
            return Err(ConfigError::invalid("kinematics.k", "must be positive"));
        }
        let s = &self.solver;
        let positive = [
            ("flow.Re", s.re),
            ("time.dt", s.dt),
            ("solver.sor_tol", s.sor_tol),
            ("solver.uv_tol", s.uv_tol),
        ];
        for (key, x) in positive {
            if !(x > 0.0 && x.is_finite()) {
                return Err(ConfigError::invalid(key, format!("must be positive, got {x}")));
            }
        }
        for (key, w) in [("solver.sor_omega", s.sor_omega), ("solver.uv_omega", s.uv_omega)] {
            if !(1.0..2.0).contains(&w) {
                return Err(ConfigError::invalid(key, format!("must lie in [1, 2), got {w}")));
            }
        }
        for (key, n) in [
            ("solver.sor_max_iters", s.sor_max_iters),
            ("solver.uv_max_iters", s.uv_max_iters),
            ("time.output_interval", self.time.output_interval),
        ] {
            if n == 0 {
                return Err(ConfigError::invalid(key, "must be at least 1"));
            }
        }
        self.backend
            .validate()
            .map_err(|e| ConfigError::invalid("backend.workers", e.to_string()))?;
        Ok(())
    }
}

fn value<T: FromStr>(key: &str, raw: &str, line: usize) -> Result<T, ConfigError> {
    raw.parse().map_err(|_| ConfigError::Syntax {
        line,
        msg: format!("cannot parse `{raw}` for `{key}`"),
    })
}

fn apply(c: &mut SimConfig, key: &str, raw: &str, line: usize) -> Result<(), ConfigError> {
    macro_rules! set {
        ($($field:expr),+) => {{ $( $field = value(key, raw, line)?; )+ }};
    }
    match key {
        "grid.x_min" => set!(c.grid.x_domain.0),
        "grid.x_max" => set!(c.grid.x_domain.1),
        "grid.y_min" => set!(c.grid.y_domain.0),
        "grid.y_max" => set!(c.grid.y_domain.1),
        "grid.x_uniform_min" => set!(c.grid.x_uniform.0),
        "grid.x_uniform_max" => set!(c.grid.x_uniform.1),
        "grid.y_uniform_min" => set!(c.grid.y_uniform.0),
        "grid.y_uniform_max" => set!(c.grid.y_uniform.1),
        "grid.h_min" => set!(c.grid.h_min),
        "grid.ratio" => set!(c.grid.ratio),
        "foil.thickness_ratio" => set!(c.foil.thickness_ratio),
        "foil.center_x" => set!(c.foil.center0.0),
        "foil.center_y" => set!(c.foil.center0.1),
        "kinematics.h_bar" => set!(c.plunge.h_bar),
        "kinematics.k" => set!(c.plunge.k),
        "flow.Re" => set!(c.solver.re),
        "time.dt" => set!(c.solver.dt),
        "time.n_steps" => set!(c.time.n_steps),
        "time.output_interval" => set!(c.time.output_interval),
        "time.snapshot_interval" => set!(c.time.snapshot_interval),
        "solver.sor_omega" => set!(c.solver.sor_omega),
        "solver.sor_tol" => set!(c.solver.sor_tol),
        "solver.sor_max_iters" => set!(c.solver.sor_max_iters),
        "solver.uv_omega" => set!(c.solver.uv_omega),
        "solver.uv_tol" => set!(c.solver.uv_tol),
        "solver.uv_max_iters" => set!(c.solver.uv_max_iters),
        "solver.on_nonconvergence" => {
            c.solver.on_nonconvergence = match raw {
                "abort" => ConvergencePolicy::Abort,
                "warn" => ConvergencePolicy::Warn,
                _ => {
                    return Err(ConfigError::Syntax {
                        line,
                        msg: format!("`{key}` must be `abort` or `warn`, got `{raw}`"),
                    })
                }
            }
        }
        "backend.kind" => {
            c.backend.kind = raw
                .parse::<BackendKind>()
                .map_err(|e| ConfigError::Syntax { line, msg: e.to_string() })?
        }
        "backend.workers" => set!(c.backend.workers),
        "output.dir" => c.output.dir = PathBuf::from(raw),
        "output.forces" => set!(c.output.forces),
        "output.snapshots" => set!(c.output.snapshots),
        "output.timing" => set!(c.output.timing),
        "output.grid" => set!(c.output.grid),
        "output.tags" => set!(c.output.tags),
        _ => {
            return Err(ConfigError::UnknownKey {
                line,
                key: key.to_string(),
            })
        }
    }
    Ok(())
}

/// Parses and validates configuration text.
pub fn parse_config_str(text: &str) -> Result<SimConfig, ConfigError> {
    let mut config = SimConfig::default();
    let mut seen = HashSet::new();
    let mut any_key = false;
    for (n, raw_line) in text.lines().enumerate() {
        let line = n + 1;
        let trimmed = raw_line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((key, raw)) = trimmed.split_once('=') else {
            return Err(ConfigError::Syntax {
                line,
                msg: format!("expected `key = value`, got `{trimmed}`"),
            });
        };
        let (key, raw) = (key.trim(), raw.trim());
        if key.is_empty() {
            return Err(ConfigError::Syntax {
                line,
                msg: "missing key".into(),
            });
        }
        if !seen.insert(key.to_string()) {
            return Err(ConfigError::DuplicateKey {
                line,
                key: key.to_string(),
            });
        }
        if key == "preset" {
            if any_key {
                return Err(ConfigError::Syntax {
                    line,
                    msg: "`preset` must precede all other keys".into(),
                });
            }
            config = SimConfig::preset(raw).ok_or_else(|| ConfigError::Syntax {
                line,
                msg: format!("unknown preset `{raw}`"),
            })?;
        } else {
            apply(&mut config, key, raw, line)?;
        }
        any_key = true;
    }
    config.validate()?;
    Ok(config)
}

pub fn parse_config_file(path: &Path) -> Result<SimConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text)
}

/// Every key with its value, in a form `parse_config_str` reads back exactly.
pub fn serialize_config(c: &SimConfig) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    kv("grid.x_min", format!("{:?}", c.grid.x_domain.0));
    kv("grid.x_max", format!("{:?}", c.grid.x_domain.1));
    kv("grid.y_min", format!("{:?}", c.grid.y_domain.0));
    kv("grid.y_max", format!("{:?}", c.grid.y_domain.1));
    kv("grid.x_uniform_min", format!("{:?}", c.grid.x_uniform.0));
    kv("grid.x_uniform_max", format!("{:?}", c.grid.x_uniform.1));
    kv("grid.y_uniform_min", format!("{:?}", c.grid.y_uniform.0));
    kv("grid.y_uniform_max", format!("{:?}", c.grid.y_uniform.1));
    kv("grid.h_min", format!("{:?}", c.grid.h_min));
    kv("grid.ratio", format!("{:?}", c.grid.ratio));
    kv("foil.thickness_ratio", format!("{:?}", c.foil.thickness_ratio));
    kv("foil.center_x", format!("{:?}", c.foil.center0.0));
    kv("foil.center_y", format!("{:?}", c.foil.center0.1));
    kv("kinematics.h_bar", format!("{:?}", c.plunge.h_bar));
    kv("kinematics.k", format!("{:?}", c.plunge.k));
    kv("flow.Re", format!("{:?}", c.solver.re));
    kv("time.dt", format!("{:?}", c.solver.dt));
    kv("time.n_steps", c.time.n_steps.to_string());
    kv("time.output_interval", c.time.output_interval.to_string());
    kv("time.snapshot_interval", c.time.snapshot_interval.to_string());
    kv("solver.sor_omega", format!("{:?}", c.solver.sor_omega));
    kv("solver.sor_tol", format!("{:?}", c.solver.sor_tol));
    kv("solver.sor_max_iters", c.solver.sor_max_iters.to_string());
    kv("solver.uv_omega", format!("{:?}", c.solver.uv_omega));
    kv("solver.uv_tol", format!("{:?}", c.solver.uv_tol));
    kv("solver.uv_max_iters", c.solver.uv_max_iters.to_string());
    kv(
        "solver.on_nonconvergence",
        match c.solver.on_nonconvergence {
            ConvergencePolicy::Abort => "abort",
            ConvergencePolicy::Warn => "warn",
        }
        .to_string(),
    );
    kv("backend.kind", c.backend.kind.to_string());
    kv("backend.workers", c.backend.workers.to_string());
    kv("output.dir", c.output.dir.display().to_string());
    kv("output.forces", c.output.forces.to_string());
    kv("output.snapshots", c.output.snapshots.to_string());
    kv("output.timing", c.output.timing.to_string());
    kv("output.grid", c.output.grid.to_string());
    kv("output.tags", c.output.tags.to_string());
    s
}
