//! Snapshot files: two columns `x,h` with a header line.
//!
//! Values are written with 17 significant digits so that reading a snapshot
//! back reproduces an `f64` field exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Field, PeriodicGrid};
use crate::scalar::Scalar;

/// Formats a value with 17 significant digits.
pub fn format_exact(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_snapshot<T: Scalar>(path: &Path, grid: &PeriodicGrid<T>, u: &Field<T>) -> Result<()> {
    grid.check(u)?;
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "x,h")?;
    for (i, v) in u.iter().enumerate() {
        writeln!(w, "{},{}", format_exact(grid.x(i).as_f64()), format_exact(v.as_f64()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an `x,h` CSV with one header line.
pub fn read_xy(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path).map_err(csv_err)?;
    let (mut xs, mut hs) = (Vec::new(), Vec::new());
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(csv_err)?;
        if row.len() < 2 {
            return Err(Error::Profile(format!("row {}: expected two columns", line + 2)));
        }
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|e| Error::Profile(format!("row {}: `{s}`: {e}", line + 2)))
        };
        xs.push(parse(&row[0])?);
        hs.push(parse(&row[1])?);
    }
    Ok((xs, hs))
}

/// Reads a snapshot written by [`write_snapshot`] and checks that its nodes
/// match `grid`.
pub fn read_snapshot<T: Scalar>(path: &Path, grid: &PeriodicGrid<T>) -> Result<Field<T>> {
    let (xs, hs) = read_xy(path)?;
    if hs.len() != grid.n_points() {
        return Err(Error::LengthMismatch { expected: grid.n_points(), got: hs.len() });
    }
    let tol = 1e-9 * grid.length().as_f64();
    for (i, &x) in xs.iter().enumerate() {
        if (x - grid.x(i).as_f64()).abs() > tol {
            return Err(Error::Profile(format!("snapshot node {i} at x = {x} does not match the grid")));
        }
    }
    Ok(Field::new(hs.into_iter().map(T::lit).collect()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Profile(e.to_string())
}
