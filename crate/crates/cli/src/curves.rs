//! Curve tables: a `grid,<t1>,...,<tJ>` header followed by one `id,v1,...,vJ`
//! row per curve.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use fpqr::basis::DiscreteCurveSet;
use nalgebra::DMatrix;

use crate::error::{CliError, CliResult};

/// Curves plus the row labels read from (or written to) the first column.
#[derive(Debug, Clone)]
pub struct CurveTable {
    pub ids: Vec<String>,
    pub curves: DiscreteCurveSet,
}

fn parse_field(path: &Path, line: usize, field: &str) -> CliResult<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("{}:{line}: '{field}' is not a number", path.display())))?;
    if !v.is_finite() {
        return Err(CliError::Usage(format!("{}:{line}: non-finite value '{field}'", path.display())));
    }
    Ok(v)
}

pub fn read_curves(path: &Path) -> CliResult<CurveTable> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(file);
    let mut records = reader.records();
    let bad = |msg: String| CliError::Usage(format!("{}: {msg}", path.display()));

    let header = match records.next() {
        Some(r) => r.map_err(|e| bad(e.to_string()))?,
        None => return Err(bad("empty file".into())),
    };
    if header.get(0).map(|s| s.trim().to_ascii_lowercase()) != Some("grid".into()) {
        return Err(bad("header must start with 'grid'".into()));
    }
    let grid = header.iter().skip(1).map(|f| parse_field(path, 1, f)).collect::<CliResult<Vec<f64>>>()?;

    let mut ids = Vec::new();
    let mut data = Vec::new();
    for (k, rec) in records.enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() == 1 && rec.get(0).is_some_and(|s| s.trim().is_empty()) {
            continue;
        }
        if rec.len() != grid.len() + 1 {
            return Err(bad(format!("line {line} has {} fields, expected {}", rec.len(), grid.len() + 1)));
        }
        ids.push(rec.get(0).unwrap_or_default().trim().to_string());
        for f in rec.iter().skip(1) {
            data.push(parse_field(path, line, f)?);
        }
    }
    if ids.is_empty() {
        return Err(bad("no curves".into()));
    }
    let values = DMatrix::from_row_slice(ids.len(), grid.len(), &data);
    let curves = DiscreteCurveSet::new(grid, values).map_err(|e| bad(e.to_string()))?;
    Ok(CurveTable { ids, curves })
}

/// Writes `values` (one row per id) under a grid header.
pub fn write_table(path: &Path, grid: &[f64], ids: &[String], values: &DMatrix<f64>) -> CliResult<()> {
    let mut out = String::new();
    out.push_str("grid");
    for g in grid {
        out.push_str(&format!(",{g}"));
    }
    out.push('\n');
    for (i, id) in ids.iter().enumerate() {
        out.push_str(id);
        for v in values.row(i).iter() {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    let mut f = File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| CliError::io(path, e))
}

pub fn write_curves(path: &Path, curves: &DiscreteCurveSet, ids: &[String]) -> CliResult<()> {
    write_table(path, curves.grid(), ids, curves.values())
}

/// Row labels `1..=n`.
pub fn default_ids(n: usize) -> Vec<String> {
    (1..=n).map(|i| i.to_string()).collect()
}
