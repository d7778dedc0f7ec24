//! Plain-text field snapshots and tag and grid dumps.
//!
//! Floats are written in the shortest form that parses back to the same bits.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::classify::{Family, NodeTag, TagField};
use crate::grid::StaggeredGrid;
use crate::solver::FlowState;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotRow {
    pub x: f64,
    pub y: f64,
    pub u: f64,
    pub v: f64,
    pub p: f64,
    pub tag: NodeTag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub nx: usize,
    pub ny: usize,
    pub t_bar: f64,
    /// Cell centers, row-major.
    pub rows: Vec<SnapshotRow>,
}

/// Cell-centered view of `state`: face velocities averaged to the center,
/// the pressure-cell tag alongside.
pub fn snapshot(state: &FlowState, grid: &StaggeredGrid, tags: &TagField) -> Snapshot {
    let mut rows = Vec::with_capacity(grid.nx * grid.ny);
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            rows.push(SnapshotRow {
                x: grid.xc[i],
                y: grid.yc[j],
                u: 0.5 * (state.u[(i, j)] + state.u[(i + 1, j)]),
                v: 0.5 * (state.v[(i, j)] + state.v[(i, j + 1)]),
                p: state.p[(i, j)],
                tag: tags.p[(i, j)],
            });
        }
    }
    Snapshot {
        nx: grid.nx,
        ny: grid.ny,
        t_bar: state.t_bar,
        rows,
    }
}

impl Snapshot {
    /// Header `nx ny t_bar`, then one `x y u v p tag` line per cell.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {} {:?}\n", self.nx, self.ny, self.t_bar);
        for r in &self.rows {
            let _ = writeln!(s, "{:?} {:?} {:?} {:?} {:?} {}", r.x, r.y, r.u, r.v, r.p, r.tag.code());
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, SnapshotError> {
        let err = |line: usize, msg: String| SnapshotError::Parse { line, msg };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty snapshot".into()))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        let (nx, ny, t_bar) = match h.as_slice() {
            [a, b, c] => match (a.parse(), b.parse(), c.parse()) {
                (Ok(a), Ok(b), Ok(c)) => (a, b, c),
                _ => return Err(err(1, format!("bad header `{header}`"))),
            },
            _ => return Err(err(1, "expected header `nx ny t_bar`".into())),
        };
        let mut rows = Vec::with_capacity(nx * ny);
        for (n, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let tok: Vec<&str> = line.split_whitespace().collect();
            let bad = || err(n + 1, format!("expected `x y u v p tag`, got `{line}`"));
            if tok.len() != 6 {
                return Err(bad());
            }
            let mut vals = [0.0; 5];
            for (v, t) in vals.iter_mut().zip(&tok) {
                *v = t.parse().map_err(|_| bad())?;
            }
            let tag = tok[5].parse().ok().and_then(NodeTag::from_code).ok_or_else(bad)?;
            rows.push(SnapshotRow {
                x: vals[0],
                y: vals[1],
                u: vals[2],
                v: vals[3],
                p: vals[4],
                tag,
            });
        }
        if rows.len() != nx * ny {
            return Err(err(0, format!("expected {} rows, found {}", nx * ny, rows.len())));
        }
        Ok(Self { nx, ny, t_bar, rows })
    }
}

fn write_text(path: &Path, text: &str) -> io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(text.as_bytes())?;
    w.flush()
}

pub fn write_field_snapshot(state: &FlowState, grid: &StaggeredGrid, tags: &TagField, path: &Path) -> io::Result<()> {
    write_text(path, &snapshot(state, grid, tags).to_text())
}

pub fn read_field_snapshot(path: &Path) -> Result<Snapshot, SnapshotError> {
    Snapshot::parse(&fs::read_to_string(path)?)
}

/// Header lines `nx ny` and the family name, then one line of codes per row
/// (0 fluid, 1 solid, 2 forcing).
pub fn tag_dump_text(tags: &TagField, family: Family) -> String {
    let f = tags.family(family);
    let (nx, ny) = f.shape();
    let mut s = format!("{nx} {ny}\n{}\n", family.name());
    for j in 0..ny {
        let row: Vec<String> = f.row(j).iter().map(|t| t.code().to_string()).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

/// Writes `tags_{u,v,p}_{step}.txt` under `dir`.
pub fn write_tag_dump(tags: &TagField, step: usize, dir: &Path) -> io::Result<()> {
    for family in [Family::U, Family::V, Family::P] {
        let path = dir.join(format!("tags_{}_{step:06}.txt", family.name()));
        write_text(&path, &tag_dump_text(tags, family))?;
    }
    Ok(())
}

/// Node coordinates, one per line, in `grid_x.txt` and `grid_y.txt`.
pub fn write_grid_dump(grid: &StaggeredGrid, dir: &Path) -> io::Result<()> {
    for (name, axis) in [("grid_x.txt", &grid.x_axis), ("grid_y.txt", &grid.y_axis)] {
        let mut s = String::new();
        for x in axis.coords() {
            let _ = writeln!(s, "{x:?}");
        }
        write_text(&dir.join(name), &s)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::classify_all;
    use crate::exec::Executor;
    use crate::kinematics::{FoilGeometry, FoilState};

    #[test]
    fn two_by_two_has_four_rows() {
        let g = StaggeredGrid::uniform((0.0, 1.0), (0.0, 1.0), 2, 2).unwrap();
        let s = FlowState::uniform(&g, 1.0);
        let snap = snapshot(&s, &g, &TagField::all_fluid(&g));
        assert_eq!(snap.rows.len(), 4);
        assert_eq!(snap.to_text().lines().count(), 5);
    }

    #[test]
    fn uniform_flow_interpolates_exactly() {
        let g = StaggeredGrid::uniform((-1.0, 2.0), (0.0, 1.0), 7, 5).unwrap();
        let s = FlowState::uniform(&g, 1.0);
        let snap = snapshot(&s, &g, &TagField::all_fluid(&g));
        assert!(snap.rows.iter().all(|r| r.u == 1.0 && r.v == 0.0));
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let g = StaggeredGrid::uniform((-1.0, 1.0), (-0.5, 0.5), 40, 20).unwrap();
        let foil = FoilState {
            geometry: FoilGeometry::default(),
            y_disp: 0.01,
            y_vel: 0.0,
            t_bar: 0.0,
        };
        let tags = classify_all(&Executor::sequential(), &g, &foil);
        let mut s = FlowState::from_fn(&g, |x, _| (x * 3.1).sin() / 7.0, |x, y| x * y / 3.0, |x, y| (x + y).exp());
        s.t_bar = 0.1 + 0.2;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.txt");
        write_field_snapshot(&s, &g, &tags, &path).unwrap();
        let back = read_field_snapshot(&path).unwrap();
        let direct = snapshot(&s, &g, &tags);
        assert_eq!(back.t_bar.to_bits(), direct.t_bar.to_bits());
        for (a, b) in back.rows.iter().zip(&direct.rows) {
            for (x, y) in [(a.x, b.x), (a.y, b.y), (a.u, b.u), (a.v, b.v), (a.p, b.p)] {
                assert_eq!(x.to_bits(), y.to_bits());
            }
            assert_eq!(a.tag, b.tag);
        }
        assert!(back.rows.iter().any(|r| r.tag == NodeTag::Forcing));
    }

    #[test]
    fn malformed_snapshot_reports_line() {
        let e = Snapshot::parse("1 1 0.0\n0 0 1 0 0 7\n").unwrap_err();
        assert!(matches!(e, SnapshotError::Parse { line: 2, .. }));
    }

    #[test]
    fn tag_dump_layout() {
        let g = StaggeredGrid::uniform((0.0, 1.0), (0.0, 1.0), 3, 2).unwrap();
        let text = tag_dump_text(&TagField::all_fluid(&g), Family::U);
        assert_eq!(text, "4 2\nu\n0 0 0 0\n0 0 0 0\n");
    }

    #[test]
    fn grid_dump_lists_nodes() {
        let g = StaggeredGrid::uniform((0.0, 1.0), (0.0, 2.0), 4, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_grid_dump(&g, dir.path()).unwrap();
        let x = fs::read_to_string(dir.path().join("grid_x.txt")).unwrap();
        assert_eq!(x, "0.0\n0.25\n0.5\n0.75\n1.0\n");
        let y = fs::read_to_string(dir.path().join("grid_y.txt")).unwrap();
        assert_eq!(y.lines().count(), 3);
    }
}
