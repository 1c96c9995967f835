//! Grid-function CSV files and contour-data JSON exports.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fdops::{interpolate, FdError, GridFunction};
use crate::grid::{Grid, GridError};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Fd(#[from] FdError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("missing or malformed header line, expected \"x1,...,xd,value\"")]
    BadHeader,
    #[error("line {line}: malformed number")]
    BadNumber { line: usize },
    #[error("line {line}: coordinates do not lie on the mesh")]
    NotOnGrid { line: usize },
    #[error("row count {0} is not (n+1)^d for any mesh with d = {1}")]
    NoMatchingMesh(usize, usize),
    #[error("contour export requires a two-dimensional grid")]
    NotPlanar,
}

/// CSV layout: header `x1,...,xd,value`, one row per node in node order,
/// coordinates as the exact decimal expansion of `i/n`, values with 17
/// significant digits.
pub fn write_grid(u: &GridFunction, mut w: impl Write) -> Result<(), IoError> {
    let grid = u.grid();
    let d = grid.dim();
    let header: Vec<String> = (1..=d).map(|a| format!("x{a}")).collect();
    writeln!(w, "{},value", header.join(","))?;
    for k in grid.nodes() {
        for c in grid.coords(k) {
            write!(w, "{c:?},")?;
        }
        writeln!(w, "{:.16e}", u.value(k))?;
    }
    Ok(())
}

pub fn read_grid(r: impl BufRead) -> Result<GridFunction, IoError> {
    let mut lines = r.lines();
    let header = lines.next().ok_or(IoError::BadHeader)??;
    let cols: Vec<&str> = header.trim().split(',').collect();
    let d = cols.len().checked_sub(1).ok_or(IoError::BadHeader)?;
    if d == 0 || cols[d] != "value" {
        return Err(IoError::BadHeader);
    }
    for (a, c) in cols[..d].iter().enumerate() {
        if *c != format!("x{}", a + 1) {
            return Err(IoError::BadHeader);
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let nums: Result<Vec<f64>, _> = line.trim().split(',').map(str::parse).collect();
        let nums = nums.map_err(|_| IoError::BadNumber { line: i + 2 })?;
        if nums.len() != d + 1 {
            return Err(IoError::BadNumber { line: i + 2 });
        }
        rows.push((i + 2, nums));
    }
    let count = rows.len();
    // Recover n from the row count (n+1)^d.
    let n = (2..=count)
        .find(|n| (n + 1).pow(d as u32) == count)
        .ok_or(IoError::NoMatchingMesh(count, d))?;
    let grid = Grid::new(d, n)?;
    let mut values = vec![0.0; count];
    let mut seen = vec![false; count];
    for (line, nums) in rows {
        let mut m = Vec::with_capacity(d);
        for &x in &nums[..d] {
            let idx = (x * n as f64).round();
            if !(0.0..=n as f64).contains(&idx) || (x - idx / n as f64).abs() > 1e-12 {
                return Err(IoError::NotOnGrid { line });
            }
            m.push(idx as usize);
        }
        let k = grid.node_index(&m);
        if seen[k] {
            return Err(IoError::NotOnGrid { line });
        }
        seen[k] = true;
        values[k] = nums[d];
    }
    Ok(GridFunction::new(grid, values)?)
}

/// Default contour levels: a near-zero level plus 0.1 steps through 1.1.
pub fn default_contour_levels() -> Vec<f64> {
    let mut levels = vec![1e-7];
    for i in 1..=11 {
        levels.push(i as f64 * 0.1);
    }
    levels
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ContourData {
    /// Samples per side of the refined lattice.
    pub samples: usize,
    pub levels: Vec<f64>,
    /// Row-major sample matrix; entry `[i][j]` is the value at
    /// `(j/(samples-1), i/(samples-1))`.
    pub values: Vec<Vec<f64>>,
}

/// Sample `u` on a 4x refined lattice and emit the matrix plus contour
/// levels as JSON for external plotting.
pub fn write_contours(
    u: &GridFunction,
    levels: &[f64],
    w: impl Write,
) -> Result<(), IoError> {
    let grid = u.grid();
    if grid.dim() != 2 {
        return Err(IoError::NotPlanar);
    }
    let samples = 4 * grid.subdivisions() + 1;
    let step = 1.0 / (samples - 1) as f64;
    let mut values = Vec::with_capacity(samples);
    for i in 0..samples {
        let mut row = Vec::with_capacity(samples);
        for j in 0..samples {
            row.push(interpolate(u, &[j as f64 * step, i as f64 * step])?);
        }
        values.push(row);
    }
    let data = ContourData {
        samples,
        levels: levels.to_vec(),
        values,
    };
    serde_json::to_writer_pretty(w, &data)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::make_noise;
    use approx::assert_abs_diff_eq;

    #[test]
    fn grid_round_trip_is_bit_identical() {
        let grid = Grid::new(2, 4).unwrap();
        let u = make_noise(grid, 1.0, 42);
        let mut buf = Vec::new();
        write_grid(&u, &mut buf).unwrap();
        let back = read_grid(buf.as_slice()).unwrap();
        assert_eq!(back.grid(), u.grid());
        assert_eq!(back.values(), u.values());
    }

    #[test]
    fn zero_function_layout() {
        let grid = Grid::new(2, 2).unwrap();
        let u = GridFunction::zeros(grid);
        let mut buf = Vec::new();
        write_grid(&u, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 10);
        assert_eq!(lines[0], "x1,x2,value");
        assert!(lines[1].starts_with("0.0,0.0,"));
        assert!(lines[4].starts_with("0.5,0.5,") || lines.iter().any(|l| l.starts_with("0.5,0.5,")));
    }

    #[test]
    fn wrong_row_count_is_rejected() {
        let grid = Grid::new(2, 2).unwrap();
        let u = GridFunction::zeros(grid);
        let mut buf = Vec::new();
        write_grid(&u, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let truncated: String = text.lines().take(9).collect::<Vec<_>>().join("\n");
        assert!(matches!(
            read_grid(truncated.as_bytes()),
            Err(IoError::NoMatchingMesh(8, 2))
        ));
    }

    #[test]
    fn malformed_input_is_rejected() {
        assert!(matches!(read_grid(&b"bogus\n"[..]), Err(IoError::BadHeader)));
        let bad = "x1,value\n0.0,1.0\nnope,2.0\n3.0,0.5\n";
        assert!(matches!(
            read_grid(bad.as_bytes()),
            Err(IoError::BadNumber { line: 3 })
        ));
        let off = "x1,value\n0.0,1.0\n0.37,2.0\n1.0,0.5\n";
        assert!(matches!(
            read_grid(off.as_bytes()),
            Err(IoError::NotOnGrid { line: 3 })
        ));
    }

    #[test]
    fn contours_of_affine_function_are_affine() {
        let grid = Grid::new(2, 8).unwrap();
        let u = GridFunction::sample(grid, |p| 0.25 + 0.5 * p[0] - 0.125 * p[1]);
        let mut buf = Vec::new();
        write_contours(&u, &default_contour_levels(), &mut buf).unwrap();
        let data: ContourData = serde_json::from_slice(&buf).unwrap();
        assert_eq!(data.samples, 33);
        assert_abs_diff_eq!(data.levels[0], 1e-7);
        assert_abs_diff_eq!(*data.levels.last().unwrap(), 1.1, epsilon = 1e-12);
        let step = 1.0 / 32.0;
        for (i, row) in data.values.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let expect = 0.25 + 0.5 * (j as f64 * step) - 0.125 * (i as f64 * step);
                assert_abs_diff_eq!(*v, expect, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn contours_reject_other_dimensions() {
        let grid = Grid::new(3, 2).unwrap();
        let u = GridFunction::zeros(grid);
        assert!(matches!(
            write_contours(&u, &[0.5], Vec::new()),
            Err(IoError::NotPlanar)
        ));
    }
}
