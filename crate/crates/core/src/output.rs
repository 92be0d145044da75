//! File output: time series CSV, key–value reports and OBJ meshes.
//!
//! Files are registered with an [`OutputSet`] before they are written; if
//! the set is dropped without [`OutputSet::commit`], everything it wrote is
//! removed so a failed command leaves no partial results.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::flow::FlowRecord;
use crate::geometry::RadialGraph;
use crate::Dimension;

pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const LIMIT_REPORT_FILE: &str = "limit_report.txt";
pub const INEQUALITY_FILE: &str = "inequality_report.txt";
pub const NORM_CHECK_FILE: &str = "norm_check.txt";
pub const VARIATION_FILE: &str = "variation_check.csv";

/// `snapshot_<t>.obj` with `t` at fixed precision.
pub fn snapshot_file_name(t: f64) -> String {
    format!("snapshot_{t:.6}.obj")
}

/// Files written by one command.
#[derive(Debug)]
pub struct OutputSet {
    dir: PathBuf,
    created_dir: bool,
    written: Vec<PathBuf>,
    committed: bool,
}

impl OutputSet {
    pub fn new(dir: &Path) -> Result<Self> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(OutputSet { dir: dir.to_path_buf(), created_dir, written: Vec::new(), committed: false })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        self.written.push(path.clone());
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn files(&self) -> &[PathBuf] {
        &self.written
    }

    /// Keeps the files.
    pub fn commit(mut self) -> Vec<PathBuf> {
        self.committed = true;
        std::mem::take(&mut self.written)
    }
}

impl Drop for OutputSet {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

pub fn timeseries_csv(records: &[FlowRecord]) -> String {
    let mut out = String::with_capacity(200 * (records.len() + 1));
    out.push_str(FlowRecord::CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.to_csv_row());
        out.push('\n');
    }
    out
}

/// Mesh of the graph with vertices `ρ(x)·x`.
///
/// On S² the lat–long grid is split into two triangles per cell plus a fan
/// at each pole, all oriented outward; on S¹ the curve is a closed polyline.
pub fn obj_text(graph: &RadialGraph) -> String {
    let grid = graph.grid();
    let rho = graph.radius();
    let mut out = String::new();
    let _ = writeln!(out, "# {} vertices", grid.len());
    for (x, r) in grid.directions().iter().zip(&rho) {
        let p = x * *r;
        let _ = writeln!(out, "v {:.16e} {:.16e} {:.16e}", p[0], p[1], p[2]);
    }
    match grid.dimension() {
        Dimension::Curve => {
            out.push('l');
            for i in 1..=grid.len() {
                let _ = write!(out, " {i}");
            }
            out.push_str(" 1\n");
        }
        Dimension::Surface => {
            let (n_theta, n_phi) = grid.lat_long_shape().expect("surface grids are lat-long");
            let v = |row: usize, col: usize| grid.node(row, col % n_phi) + 1;
            let north = 1;
            let south = grid.len();
            for j in 0..n_phi {
                let _ = writeln!(out, "f {} {} {}", north, v(1, j), v(1, j + 1));
            }
            for r in 1..n_theta {
                for j in 0..n_phi {
                    let (a, b, c, d) = (v(r, j), v(r, j + 1), v(r + 1, j), v(r + 1, j + 1));
                    let _ = writeln!(out, "f {a} {c} {d}");
                    let _ = writeln!(out, "f {a} {d} {b}");
                }
            }
            for j in 0..n_phi {
                let _ = writeln!(out, "f {} {} {}", south, v(n_theta, j + 1), v(n_theta, j));
            }
        }
    }
    out
}
