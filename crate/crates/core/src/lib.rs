//! Two-dimensional discrete-forcing immersed boundary solver for a plunging
//! elliptic foil, with sequential and data-parallel execution backends and
//! speedup analysis tooling.

pub mod classify;
pub mod config;
pub mod exec;
pub mod field;
pub mod forces;
pub mod grid;
pub mod io;
pub mod kinematics;
pub mod profile;
pub mod sim;
pub mod solver;
