//! Representation bundles: binary blocks with a JSON manifest, plus the CSV
//! fallback.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymPsdMatrix;
use crate::moments::{Condition, GaussianCondition, SampleBlock, StochasticRep};

const MAGIC: &[u8; 4] = b"SSMB";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    network_id: String,
    n: usize,
    conditions: usize,
    form: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    trials: Option<Vec<usize>>,
    #[serde(default)]
    preprocessing: Vec<String>,
}

fn block_path(dir: &Path, m: usize) -> std::path::PathBuf {
    dir.join(format!("cond_{m}.bin"))
}

fn write_block(path: &Path, matrix: &DMatrix<f64>) -> Result<()> {
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue {
            context: format!("{}", path.display()),
        });
    }
    let (rows, cols) = matrix.shape();
    let mut buf = Vec::with_capacity(16 + rows * cols * 8);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(rows as u32).to_le_bytes());
    buf.extend_from_slice(&(cols as u32).to_le_bytes());
    for i in 0..rows {
        for j in 0..cols {
            buf.extend_from_slice(&matrix[(i, j)].to_le_bytes());
        }
    }
    fs::write(path, &buf).map_err(|e| Error::io(path, e))
}

fn read_block(path: &Path) -> Result<DMatrix<f64>> {
    let mut file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut header = [0u8; 16];
    file.read_exact(&mut header).map_err(|_| Error::BadMagic {
        path: path.to_path_buf(),
    })?;
    if &header[0..4] != MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
        });
    }
    let version = u32::from_le_bytes(header[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::VersionUnsupported {
            version,
            path: path.to_path_buf(),
        });
    }
    let rows = u32::from_le_bytes(header[8..12].try_into().expect("4 bytes")) as usize;
    let cols = u32::from_le_bytes(header[12..16].try_into().expect("4 bytes")) as usize;
    let expected = (rows * cols * 8) as u64;
    let mut payload = Vec::new();
    file.read_to_end(&mut payload).map_err(|e| Error::io(path, e))?;
    if payload.len() as u64 != expected {
        return Err(Error::LengthMismatch {
            path: path.to_path_buf(),
            expected: expected + 16,
            found: payload.len() as u64 + 16,
            offset: payload.len() as u64 + 16,
        });
    }
    let mut matrix = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let at = (i * cols + j) * 8;
            let v = f64::from_le_bytes(payload[at..at + 8].try_into().expect("8 bytes"));
            if !v.is_finite() {
                return Err(Error::NonFiniteValue {
                    context: format!("{} entry ({i}, {j})", path.display()),
                });
            }
            matrix[(i, j)] = v;
        }
    }
    Ok(matrix)
}

/// Writes a representation as a bundle directory (`manifest.json` plus one
/// `cond_<m>.bin` per condition). Round trips through [`read_bundle`] are
/// bit-exact.
pub fn write_bundle(rep: &StochasticRep, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let all_samples = rep
        .conditions()
        .iter()
        .all(|c| matches!(c, Condition::Samples(_)));
    let form = if all_samples { "samples" } else { "moments" };

    let mut trials = Vec::new();
    for (m, cond) in rep.conditions().iter().enumerate() {
        let block = match cond {
            Condition::Samples(s) if all_samples => {
                trials.push(s.trials());
                s.samples().clone()
            }
            other => {
                // Mixed-form reps are persisted uniformly as moments.
                let g = match other {
                    Condition::Gaussian(g) => g.clone(),
                    Condition::Samples(s) => {
                        crate::moments::empirical_moments(s, Default::default())?
                    }
                };
                let n = g.dim();
                let mut stacked = DMatrix::zeros(1 + n, n);
                stacked.row_mut(0).copy_from(&g.mean().transpose());
                stacked.rows_mut(1, n).copy_from(g.cov().matrix());
                stacked
            }
        };
        write_block(&block_path(dir, m), &block)?;
    }

    let manifest = Manifest {
        format: "ssmb-bundle".into(),
        version: FORMAT_VERSION,
        network_id: rep.id.clone(),
        n: rep.dim(),
        conditions: rep.num_conditions(),
        form: form.into(),
        trials: all_samples.then_some(trials),
        preprocessing: Vec::new(),
    };
    let manifest_path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest)?;
    let mut f = fs::File::create(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    f.write_all(json.as_bytes())
        .map_err(|e| Error::io(&manifest_path, e))?;
    Ok(())
}

/// Reads a bundle directory written by [`write_bundle`], validating the
/// manifest against every block's dimensions.
pub fn read_bundle(dir: impl AsRef<Path>) -> Result<StochasticRep> {
    let dir = dir.as_ref();
    let manifest_path = dir.join("manifest.json");
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    if manifest.format != "ssmb-bundle" {
        return Err(Error::ManifestMismatch {
            path: manifest_path,
            detail: format!("unknown format {:?}", manifest.format),
        });
    }
    if manifest.version != FORMAT_VERSION {
        return Err(Error::VersionUnsupported {
            version: manifest.version,
            path: manifest_path,
        });
    }

    let mut conditions = Vec::with_capacity(manifest.conditions);
    for m in 0..manifest.conditions {
        let path = block_path(dir, m);
        let block = read_block(&path)?;
        match manifest.form.as_str() {
            "samples" => {
                let expected_rows = manifest
                    .trials
                    .as_ref()
                    .and_then(|t| t.get(m).copied())
                    .unwrap_or(block.nrows());
                if block.nrows() != expected_rows || block.ncols() != manifest.n {
                    return Err(Error::ManifestMismatch {
                        path,
                        detail: format!(
                            "expected {}x{} samples, block is {}x{}",
                            expected_rows,
                            manifest.n,
                            block.nrows(),
                            block.ncols()
                        ),
                    });
                }
                conditions.push(Condition::Samples(SampleBlock::new(block, m)?));
            }
            "moments" => {
                if block.nrows() != manifest.n + 1 || block.ncols() != manifest.n {
                    return Err(Error::ManifestMismatch {
                        path,
                        detail: format!(
                            "expected {}x{} moment block, found {}x{}",
                            manifest.n + 1,
                            manifest.n,
                            block.nrows(),
                            block.ncols()
                        ),
                    });
                }
                let mean: DVector<f64> = block.row(0).transpose();
                let cov = SymPsdMatrix::new(block.rows(1, manifest.n).clone_owned())?;
                conditions.push(Condition::Gaussian(GaussianCondition::new(mean, cov)?));
            }
            other => {
                return Err(Error::ManifestMismatch {
                    path: manifest_path,
                    detail: format!("unknown form {other:?}"),
                })
            }
        }
    }
    StochasticRep::new(manifest.network_id, conditions)
}

/// CSV fallback writer: one `cond_<m>.csv` per condition with header
/// `x1,…,xn`, one trial per row, 17 significant digits.
pub fn write_csv_bundle(rep: &StochasticRep, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let n = rep.dim();
    let header: Vec<String> = (1..=n).map(|j| format!("x{j}")).collect();
    for (m, cond) in rep.conditions().iter().enumerate() {
        let Condition::Samples(s) = cond else {
            return Err(Error::NoSamples(m));
        };
        let path = dir.join(format!("cond_{m}.csv"));
        let mut text = header.join(",");
        text.push('\n');
        for i in 0..s.trials() {
            let row: Vec<String> = (0..n).map(|j| format!("{:.16e}", s.samples()[(i, j)])).collect();
            text.push_str(&row.join(","));
            text.push('\n');
        }
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Reads a CSV-fallback bundle (sample form only). The network id is the
/// directory name.
pub fn read_csv_bundle(dir: impl AsRef<Path>) -> Result<StochasticRep> {
    let dir = dir.as_ref();
    let id = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "bundle".into());
    let mut conditions = Vec::new();
    for m in 0.. {
        let path = dir.join(format!("cond_{m}.csv"));
        if !path.exists() {
            break;
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse {
            path: path.clone(),
            detail: "empty file".into(),
        })?;
        let n = header.split(',').count();
        let mut rows: Vec<f64> = Vec::new();
        let mut count = 0usize;
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != n {
                return Err(Error::Parse {
                    path: path.clone(),
                    detail: format!("line {}: expected {} fields, found {}", lineno + 2, n, fields.len()),
                });
            }
            for f in fields {
                rows.push(f.trim().parse::<f64>().map_err(|e| Error::Parse {
                    path: path.clone(),
                    detail: format!("line {}: {e}", lineno + 2),
                })?);
            }
            count += 1;
        }
        let block = DMatrix::from_row_slice(count, n, &rows);
        conditions.push(Condition::Samples(SampleBlock::new(block, m)?));
    }
    if conditions.is_empty() {
        return Err(Error::Parse {
            path: dir.to_path_buf(),
            detail: "no cond_<m>.csv files found".into(),
        });
    }
    StochasticRep::new(id, conditions)
}

/// Reads a bundle in either format: binary when `manifest.json` is present,
/// CSV fallback otherwise.
pub fn read_bundle_auto(dir: impl AsRef<Path>) -> Result<StochasticRep> {
    let dir = dir.as_ref();
    if dir.join("manifest.json").exists() {
        read_bundle(dir)
    } else {
        read_csv_bundle(dir)
    }
}
