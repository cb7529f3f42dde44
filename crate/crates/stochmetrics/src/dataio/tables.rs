//! Plain-text tables: distance matrices, embeddings, targets, and solver
//! traces. Floats are written with 17 significant digits so that re-reading
//! reproduces every `f64` bit-for-bit.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::analysis::DistanceMatrix;
use crate::error::{Error, Result};

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Renders a distance matrix as CSV text: a header row of network ids, then
/// K rows of K entries.
pub fn render_distance_csv(d: &DistanceMatrix) -> String {
    let k = d.k();
    let mut text = d.ids.join(",");
    text.push('\n');
    for i in 0..k {
        let row: Vec<String> = (0..k).map(|j| fmt(d.get(i, j))).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    text
}

/// Distance matrix as CSV; see [`render_distance_csv`].
pub fn write_distance_csv(d: &DistanceMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render_distance_csv(d)).map_err(|e| Error::io(path, e))
}

/// Reads a distance-matrix CSV written by [`write_distance_csv`]. Metric and
/// group provenance are not stored in the file and come back `None`.
pub fn read_distance_csv(path: impl AsRef<Path>) -> Result<DistanceMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        detail: "empty file".into(),
    })?;
    let ids: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let k = ids.len();
    let mut values = DMatrix::zeros(k, k);
    let mut row = 0usize;
    for line in lines {
        if row >= k {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                detail: format!("more than {k} data rows"),
            });
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != k {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                detail: format!("row {}: expected {} fields, found {}", row + 1, k, fields.len()),
            });
        }
        for (j, f) in fields.iter().enumerate() {
            values[(row, j)] = f.trim().parse::<f64>().map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                detail: format!("row {}, column {}: {e}", row + 1, j + 1),
            })?;
        }
        row += 1;
    }
    if row != k {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            detail: format!("expected {k} data rows, found {row}"),
        });
    }
    DistanceMatrix::from_values(values, ids)
}

/// Renders embedding coordinates as CSV text with header `id,x1,…,xm`.
pub fn render_embedding_csv(ids: &[String], coords: &DMatrix<f64>) -> Result<String> {
    if ids.len() != coords.nrows() {
        return Err(Error::DimensionMismatch(ids.len(), coords.nrows()));
    }
    let m = coords.ncols();
    let mut text = String::from("id");
    for j in 1..=m {
        text.push_str(&format!(",x{j}"));
    }
    text.push('\n');
    for (i, id) in ids.iter().enumerate() {
        text.push_str(id);
        for j in 0..m {
            text.push(',');
            text.push_str(&fmt(coords[(i, j)]));
        }
        text.push('\n');
    }
    Ok(text)
}

/// Embedding coordinates as CSV; see [`render_embedding_csv`].
pub fn write_embedding_csv(
    ids: &[String],
    coords: &DMatrix<f64>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render_embedding_csv(ids, coords)?).map_err(|e| Error::io(path, e))
}

/// Targets as CSV with header `id,target`. Values are kept as strings so the
/// caller decides between class labels and regression targets.
pub fn write_targets_csv(rows: &[(String, String)], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::from("id,target\n");
    for (id, v) in rows {
        text.push_str(id);
        text.push(',');
        text.push_str(v);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads a targets CSV (`id,target` with header).
pub fn read_targets_csv(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 || line.trim().is_empty() {
            continue;
        }
        let (id, v) = line.split_once(',').ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            detail: format!("line {}: expected id,target", lineno + 1),
        })?;
        out.push((id.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Objective trace as a two-column CSV (`iteration,objective`).
pub fn write_objective_trace_csv(trace: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::from("iteration,objective\n");
    for (i, v) in trace.iter().enumerate() {
        text.push_str(&format!("{i},{}\n", fmt(*v)));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
