//! File formats: dense CSV, MatrixMarket array and coordinate, factored
//! points as CSV blocks under a JSON manifest, completion instance manifests.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{FoaError, Result};
use crate::fixed_rank::FactoredPoint;
use crate::linalg::DenseMatrix;
use crate::problems::{CompletionInstance, ObservationSet};

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.trim()
        .parse::<f64>()
        .map_err(|e| FoaError::Parse(format!("line {line}: '{}': {e}", tok.trim())))
}

/// One matrix row per line, comma separated. Values use the shortest
/// representation that round-trips exactly.
pub fn write_csv<W: Write>(a: &DenseMatrix, mut w: W) -> Result<()> {
    for i in 0..a.nrows() {
        let row: Vec<String> = a.row(i).iter().map(|v| format!("{v:e}")).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<DenseMatrix> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (n, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let vals = line
            .split(',')
            .map(|t| parse_f64(t, n + 1))
            .collect::<Result<Vec<_>>>()?;
        match cols {
            None => cols = Some(vals.len()),
            Some(c) if c != vals.len() => {
                return Err(FoaError::Parse(format!(
                    "line {}: expected {c} columns, found {}",
                    n + 1,
                    vals.len()
                )))
            }
            _ => {}
        }
        data.extend(vals);
        rows += 1;
    }
    Ok(DMatrix::from_row_slice(rows, cols.unwrap_or(0), &data))
}

pub fn write_csv_file(a: &DenseMatrix, path: &Path) -> Result<()> {
    write_csv(a, std::io::BufWriter::new(fs::File::create(path)?))
}

pub fn read_csv_file(path: &Path) -> Result<DenseMatrix> {
    read_csv(fs::File::open(path)?)
}

const MM_ARRAY: &str = "%%MatrixMarket matrix array real general";
const MM_COORD: &str = "%%MatrixMarket matrix coordinate real general";

/// Content lines of a MatrixMarket stream: header checked, comments dropped.
fn mm_lines<R: Read>(r: R, header: &str) -> Result<Vec<(usize, String)>> {
    let mut lines = BufReader::new(r).lines().enumerate();
    let first = match lines.next() {
        Some((_, l)) => l?,
        None => return Err(FoaError::Parse("empty MatrixMarket file".into())),
    };
    if !first.trim().eq_ignore_ascii_case(header) {
        return Err(FoaError::Parse(format!(
            "expected header '{header}', found '{}'",
            first.trim()
        )));
    }
    let mut out = Vec::new();
    for (n, l) in lines {
        let l = l?;
        let t = l.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        out.push((n + 1, t.to_string()));
    }
    Ok(out)
}

fn parse_usize(tok: Option<&str>, line: usize) -> Result<usize> {
    tok.ok_or_else(|| FoaError::Parse(format!("line {line}: missing integer")))?
        .parse()
        .map_err(|e| FoaError::Parse(format!("line {line}: {e}")))
}

/// MatrixMarket array format (column-major values).
pub fn write_matrix_market<W: Write>(a: &DenseMatrix, mut w: W) -> Result<()> {
    writeln!(w, "{MM_ARRAY}")?;
    writeln!(w, "{} {}", a.nrows(), a.ncols())?;
    for v in a.iter() {
        writeln!(w, "{v:e}")?;
    }
    Ok(())
}

pub fn read_matrix_market<R: Read>(r: R) -> Result<DenseMatrix> {
    let lines = mm_lines(r, MM_ARRAY)?;
    let (size_line, body) = lines
        .split_first()
        .ok_or_else(|| FoaError::Parse("missing size line".into()))?;
    let mut it = size_line.1.split_whitespace();
    let rows = parse_usize(it.next(), size_line.0)?;
    let cols = parse_usize(it.next(), size_line.0)?;
    if body.len() != rows * cols {
        return Err(FoaError::Parse(format!(
            "expected {} values, found {}",
            rows * cols,
            body.len()
        )));
    }
    let data = body.iter().map(|(n, l)| parse_f64(l, *n)).collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_column_slice(rows, cols, &data))
}

/// MatrixMarket coordinate format, 1-based indices.
pub fn write_observations<W: Write>(obs: &ObservationSet, mut w: W) -> Result<()> {
    writeln!(w, "{MM_COORD}")?;
    writeln!(w, "{} {} {}", obs.rows, obs.cols, obs.len())?;
    for (&(i, j), v) in obs.indices.iter().zip(&obs.values) {
        writeln!(w, "{} {} {v:e}", i + 1, j + 1)?;
    }
    Ok(())
}

pub fn read_observations<R: Read>(r: R) -> Result<ObservationSet> {
    let lines = mm_lines(r, MM_COORD)?;
    let (size_line, body) = lines
        .split_first()
        .ok_or_else(|| FoaError::Parse("missing size line".into()))?;
    let mut it = size_line.1.split_whitespace();
    let rows = parse_usize(it.next(), size_line.0)?;
    let cols = parse_usize(it.next(), size_line.0)?;
    let nnz = parse_usize(it.next(), size_line.0)?;
    if body.len() != nnz {
        return Err(FoaError::Parse(format!("expected {nnz} entries, found {}", body.len())));
    }
    let mut indices = Vec::with_capacity(nnz);
    let mut values = Vec::with_capacity(nnz);
    for (n, l) in body {
        let mut it = l.split_whitespace();
        let i = parse_usize(it.next(), *n)?;
        let j = parse_usize(it.next(), *n)?;
        if i == 0 || j == 0 {
            return Err(FoaError::Parse(format!("line {n}: indices are 1-based")));
        }
        let v = parse_f64(
            it.next()
                .ok_or_else(|| FoaError::Parse(format!("line {n}: missing value")))?,
            *n,
        )?;
        indices.push((i - 1, j - 1));
        values.push(v);
    }
    ObservationSet::new(rows, cols, indices, values)
}

/// Manifest of a factored point stored as three CSV blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactoredManifest {
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    pub u: String,
    pub sigma: String,
    pub v: String,
}

/// Writes `<stem>.json`, `<stem>_U.csv`, `<stem>_sigma.csv` and
/// `<stem>_V.csv` into `dir`; returns the manifest path.
pub fn write_factored(x: &FactoredPoint, dir: &Path, stem: &str) -> Result<PathBuf> {
    let manifest = FactoredManifest {
        rows: x.nrows(),
        cols: x.ncols(),
        rank: x.rank(),
        u: format!("{stem}_U.csv"),
        sigma: format!("{stem}_sigma.csv"),
        v: format!("{stem}_V.csv"),
    };
    write_csv_file(&x.u, &dir.join(&manifest.u))?;
    write_csv_file(
        &DMatrix::from_column_slice(x.rank(), 1, x.sigma.as_slice()),
        &dir.join(&manifest.sigma),
    )?;
    write_csv_file(&x.v, &dir.join(&manifest.v))?;
    let path = dir.join(format!("{stem}.json"));
    fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(path)
}

fn read_block(path: &Path, rows: usize, cols: usize) -> Result<DenseMatrix> {
    let a = read_csv_file(path)?;
    // an empty file stands for a matrix with zero columns
    if cols == 0 {
        return Ok(DMatrix::zeros(rows, 0));
    }
    if a.shape() != (rows, cols) {
        return Err(FoaError::ShapeMismatch {
            context: "factored point block",
            expected: (rows, cols),
            got: a.shape(),
        });
    }
    Ok(a)
}

pub fn read_factored(manifest_path: &Path) -> Result<FactoredPoint> {
    let m: FactoredManifest = serde_json::from_str(&fs::read_to_string(manifest_path)?)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let u = read_block(&dir.join(&m.u), m.rows, m.rank)?;
    let s = read_block(&dir.join(&m.sigma), m.rank, if m.rank == 0 { 0 } else { 1 })?;
    let v = read_block(&dir.join(&m.v), m.cols, m.rank)?;
    FactoredPoint::new(u, DVector::from_iterator(m.rank, s.iter().copied()), v)
}

/// Manifest of a matrix-completion instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceManifest {
    pub m: usize,
    pub n: usize,
    pub r: usize,
    pub os: f64,
    pub seed: u64,
    pub observations: String,
}

/// Writes `instance.json` and `omega.mtx` into `dir`.
pub fn write_instance(inst: &CompletionInstance, seed: u64, dir: &Path) -> Result<PathBuf> {
    let manifest = InstanceManifest {
        m: inst.observations.rows,
        n: inst.observations.cols,
        r: inst.rank,
        os: inst.oversampling,
        seed,
        observations: "omega.mtx".into(),
    };
    write_observations(
        &inst.observations,
        std::io::BufWriter::new(fs::File::create(dir.join(&manifest.observations))?),
    )?;
    let path = dir.join("instance.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(path)
}

pub fn read_instance(manifest_path: &Path) -> Result<(InstanceManifest, ObservationSet)> {
    let m: InstanceManifest = serde_json::from_str(&fs::read_to_string(manifest_path)?)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let obs = read_observations(fs::File::open(dir.join(&m.observations))?)?;
    if obs.shape() != (m.m, m.n) {
        return Err(FoaError::ShapeMismatch {
            context: "instance observations",
            expected: (m.m, m.n),
            got: obs.shape(),
        });
    }
    Ok((m, obs))
}
