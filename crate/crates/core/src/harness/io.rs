//! Binary matrix CSV files and ground-truth bundles.
//!
//! A matrix file has one line per row of comma-separated 0/1 values, no
//! header. Lines starting with `#` are comments. Files written here start
//! with a `# rows=N cols=K` comment so that matrices with no columns
//! (an empty Z) survive a round trip.
//!
//! A bundle is a directory holding `X.csv`, `Z.csv`, `Y.csv` and
//! `params.json`; only `X.csv` is required.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::synthetic::{Dataset, GroundTruth};
use crate::matrix::BinaryMatrix;
use crate::model::ModelParams;

pub fn parse_csv(text: &str, path: &Path) -> Result<BinaryMatrix> {
    let mut shape: Option<(usize, usize)> = None;
    let mut rows: Vec<Vec<u8>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if let Some(comment) = line.strip_prefix('#') {
            if rows.is_empty() && shape.is_none() {
                shape = parse_shape_comment(comment);
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for field in line.split(',') {
            match field.trim() {
                "0" => row.push(0),
                "1" => row.push(1),
                other => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: lineno + 1,
                        message: format!("expected 0 or 1, found `{other}`"),
                    })
                }
            }
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                    message: format!("{} fields, previous rows have {}", row.len(), first.len()),
                });
            }
        }
        rows.push(row);
    }
    match shape {
        Some((r, c)) if rows.is_empty() && (r == 0 || c == 0) => Ok(BinaryMatrix::zeros(r, c)),
        Some((r, c)) if (r, c) != (rows.len(), rows.first().map_or(0, Vec::len)) => Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("shape comment says {r}x{c}, data has {} rows", rows.len()),
        }),
        _ => BinaryMatrix::from_rows(&rows),
    }
}

fn parse_shape_comment(comment: &str) -> Option<(usize, usize)> {
    let mut rows = None;
    let mut cols = None;
    for token in comment.split_whitespace() {
        if let Some(v) = token.strip_prefix("rows=") {
            rows = v.parse().ok();
        } else if let Some(v) = token.strip_prefix("cols=") {
            cols = v.parse().ok();
        }
    }
    Some((rows?, cols?))
}

pub fn format_csv(m: &BinaryMatrix) -> String {
    let mut out = format!("# rows={} cols={}\n", m.rows(), m.cols());
    for r in 0..m.rows() {
        let fields: Vec<&str> = m.row(r).iter().map(|&v| if v == 1 { "1" } else { "0" }).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<BinaryMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_csv(&text, path)
}

pub fn write_csv(path: impl AsRef<Path>, m: &BinaryMatrix) -> Result<()> {
    fs::write(path, format_csv(m))?;
    Ok(())
}

fn bundle_file(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

pub fn write_bundle(dir: impl AsRef<Path>, dataset: &Dataset) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_csv(bundle_file(dir, "X.csv"), &dataset.x)?;
    if let Some(truth) = &dataset.truth {
        write_csv(bundle_file(dir, "Z.csv"), &truth.z)?;
        write_csv(bundle_file(dir, "Y.csv"), &truth.y)?;
        fs::write(
            bundle_file(dir, "params.json"),
            serde_json::to_string_pretty(&truth.params)? + "\n",
        )?;
    }
    Ok(())
}

/// Reads a bundle. Ground truth is attached when `Z.csv` exists; a missing
/// `Y.csv` or `params.json` then leaves those parts at their defaults.
pub fn read_bundle(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let x = read_csv(bundle_file(dir, "X.csv"))?;
    let z_path = bundle_file(dir, "Z.csv");
    let truth = if z_path.exists() {
        let z = read_csv(&z_path)?;
        let y_path = bundle_file(dir, "Y.csv");
        let y = if y_path.exists() {
            read_csv(&y_path)?
        } else {
            BinaryMatrix::zeros(z.cols(), x.cols())
        };
        let params_path = bundle_file(dir, "params.json");
        let params: ModelParams = if params_path.exists() {
            serde_json::from_str(&fs::read_to_string(&params_path)?)?
        } else {
            ModelParams::default()
        };
        Some(GroundTruth { z, y, params })
    } else {
        None
    };
    Dataset::new(x, truth)
}
