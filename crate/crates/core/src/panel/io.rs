//! CSV ingestion and emission. All files are UTF-8 with LF line endings.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;

use super::{ExpectedReturns, PositionEntry, PositionHistory, ReturnsPanel};
use crate::error::{Error, Result};

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|source| Error::Io { path: path.to_owned(), source })?;
    Ok(csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(file))
}

fn writer(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).map_err(|source| Error::Io { path: path.to_owned(), source })?;
    Ok(BufWriter::new(file))
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_owned(), source }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv { path: path.to_owned(), source }
}

fn parse_cell(cell: &str, row: usize, column: usize) -> Result<f64> {
    let v: f64 = cell.parse().map_err(|_| Error::Parse {
        row,
        column,
        message: format!("{cell:?} is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse { row, column, message: format!("{cell:?} is not finite") });
    }
    Ok(v)
}

fn check_header(headers: &csv::StringRecord, expected: &[&str], path: &Path) -> Result<()> {
    let got: Vec<&str> = headers.iter().collect();
    if got.len() < expected.len() || got[..expected.len()] != *expected {
        return Err(Error::validation(format!(
            "{}: expected header starting with {:?}, got {:?}",
            path.display(),
            expected.join(","),
            got.join(",")
        )));
    }
    Ok(())
}

/// Reads `alpha_id,<t_1>,...,<t_{M+1}>`, one row per alpha.
pub fn load_returns_csv(path: impl AsRef<Path>) -> Result<ReturnsPanel> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(csv_err(path))?.clone();
    check_header(&headers, &["alpha_id"], path)?;
    let time_labels: Vec<String> = headers.iter().skip(1).map(str::to_owned).collect();
    let cols = time_labels.len();

    let mut ids = Vec::new();
    let mut data = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err(path))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != cols + 1 {
            return Err(Error::Parse {
                row: line,
                column: rec.len().min(cols + 1),
                message: format!("expected {} fields, found {}", cols + 1, rec.len()),
            });
        }
        ids.push(rec[0].to_owned());
        for (j, cell) in rec.iter().enumerate().skip(1) {
            data.push(parse_cell(cell, line, j + 1)?);
        }
    }
    let returns = Array2::from_shape_vec((ids.len(), cols), data).map_err(|e| Error::validation(e.to_string()))?;
    ReturnsPanel::new(ids, time_labels, returns)
}

/// Writes values with shortest round-trip formatting, so reloading is exact.
pub fn save_returns_csv(panel: &ReturnsPanel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    let io = io_err(path);
    write!(w, "alpha_id").map_err(&io)?;
    for t in panel.time_labels() {
        write!(w, ",{t}").map_err(&io)?;
    }
    writeln!(w).map_err(&io)?;
    for (i, id) in panel.alpha_ids().iter().enumerate() {
        write!(w, "{id}").map_err(&io)?;
        for v in panel.row(i) {
            write!(w, ",{v}").map_err(&io)?;
        }
        writeln!(w).map_err(&io)?;
    }
    w.flush().map_err(&io)
}

/// Reads a two-column `alpha_id,<value>` file into (id, value) pairs.
pub fn load_value_csv(path: impl AsRef<Path>, value_column: &str) -> Result<Vec<(String, f64)>> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(csv_err(path))?.clone();
    check_header(&headers, &["alpha_id", value_column], path)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err(path))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() < 2 {
            return Err(Error::Parse { row: line, column: rec.len(), message: "missing value".into() });
        }
        out.push((rec[0].to_owned(), parse_cell(&rec[1], line, 2)?));
    }
    Ok(out)
}

/// Aligns `(id, value)` pairs to `ids`. Every id must be present once.
pub fn align_to(ids: &[String], pairs: Vec<(String, f64)>, what: &str) -> Result<Vec<f64>> {
    let mut map = HashMap::with_capacity(pairs.len());
    for (id, v) in pairs {
        if map.insert(id.clone(), v).is_some() {
            return Err(Error::validation(format!("duplicate alpha_id {id:?} in {what}")));
        }
    }
    ids.iter()
        .map(|id| map.get(id).copied().ok_or_else(|| Error::validation(format!("alpha {id:?} missing from {what}"))))
        .collect()
}

/// Reads `alpha_id,expected_return` and aligns it to the panel's alpha order.
pub fn load_expected_csv(path: impl AsRef<Path>, panel: &ReturnsPanel) -> Result<ExpectedReturns> {
    let pairs = load_value_csv(path, "expected_return")?;
    ExpectedReturns::new(align_to(panel.alpha_ids(), pairs, "expected returns")?)
}

pub fn save_value_csv(path: impl AsRef<Path>, header: &str, ids: &[String], values: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    let io = io_err(path);
    writeln!(w, "alpha_id,{header}").map_err(&io)?;
    for (id, v) in ids.iter().zip(values) {
        writeln!(w, "{id},{v}").map_err(&io)?;
    }
    w.flush().map_err(&io)
}

pub fn save_expected_csv(path: impl AsRef<Path>, ids: &[String], e: &ExpectedReturns) -> Result<()> {
    save_value_csv(path, "expected_return", ids, e.values())
}

/// Writes `alpha_id,weight` with 15 significant digits.
pub fn save_weights_csv(path: impl AsRef<Path>, ids: &[String], weights: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    let io = io_err(path);
    writeln!(w, "alpha_id,weight").map_err(&io)?;
    for (id, v) in ids.iter().zip(weights) {
        writeln!(w, "{id},{v:.14e}").map_err(&io)?;
    }
    w.flush().map_err(&io)
}

/// A loaded position history plus the number of slices that were rescaled
/// to unit absolute sum.
#[derive(Debug, Clone)]
pub struct PositionLoad {
    pub history: PositionHistory,
    pub rescaled_slices: usize,
}

/// Reads long-format `alpha_id,instrument_id,time,position`. Alphas,
/// instruments and times are indexed in order of first appearance.
pub fn load_positions(path: impl AsRef<Path>) -> Result<PositionLoad> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(csv_err(path))?.clone();
    check_header(&headers, &["alpha_id", "instrument_id", "time", "position"], path)?;

    fn intern(map: &mut HashMap<String, usize>, list: &mut Vec<String>, key: &str) -> usize {
        if let Some(&k) = map.get(key) {
            return k;
        }
        map.insert(key.to_owned(), list.len());
        list.push(key.to_owned());
        list.len() - 1
    }

    let (mut alphas, mut instruments, mut times) = (Vec::new(), Vec::new(), Vec::new());
    let (mut amap, mut imap, mut tmap) = (HashMap::new(), HashMap::new(), HashMap::new());
    let mut entries = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err(path))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != 4 {
            return Err(Error::Parse { row: line, column: rec.len(), message: "expected 4 fields".into() });
        }
        let value = parse_cell(&rec[3], line, 4)?;
        entries.push(PositionEntry {
            alpha: intern(&mut amap, &mut alphas, &rec[0]),
            instrument: intern(&mut imap, &mut instruments, &rec[1]),
            time: intern(&mut tmap, &mut times, &rec[2]),
            value,
        });
    }
    let (history, rescaled_slices) = PositionHistory::normalized(alphas, instruments, times, entries)?;
    Ok(PositionLoad { history, rescaled_slices })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn reads_small_returns_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "r.csv", "alpha_id,d1,d2,d3,d4\nx,0.1,0.2,-0.3,0.05\ny,1,2,3,4\nz,-1,0,1,0.5\n");
        let panel = load_returns_csv(&p).unwrap();
        assert_eq!((panel.n_alphas(), panel.m()), (3, 3));
        assert_eq!(panel.alpha_ids(), &["x", "y", "z"]);
        assert_eq!(panel.row(0), &[0.1, 0.2, -0.3, 0.05]);
    }

    #[test]
    fn nan_cell_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "r.csv", "alpha_id,d1,d2,d3\nx,0.1,0.2,0.3\ny,1,NaN,3\n");
        match load_returns_csv(&p) {
            Err(Error::Parse { row, column, .. }) => assert_eq!((row, column), (3, 3)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn constant_row_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "r.csv", "alpha_id,d1,d2,d3\nx,0.1,0.2,0.3\ny,2,2,2\n");
        let err = load_returns_csv(&p).unwrap_err().to_string();
        assert!(err.contains("zero variance") && err.contains("\"y\""), "{err}");
    }

    #[test]
    fn duplicate_id_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "r.csv", "alpha_id,d1,d2,d3\nx,0.1,0.2,0.3\nx,2,1,2\n");
        assert!(matches!(load_returns_csv(&p), Err(Error::Validation(_))));
    }

    #[test]
    fn expected_aligned_by_id() {
        let dir = tempfile::tempdir().unwrap();
        let r = write(&dir, "r.csv", "alpha_id,d1,d2,d3\nx,0.1,0.2,0.3\ny,2,1,2\n");
        let e = write(&dir, "e.csv", "alpha_id,expected_return\ny,2.5\nx,-1\n");
        let panel = load_returns_csv(&r).unwrap();
        assert_eq!(load_expected_csv(&e, &panel).unwrap().values(), &[-1.0, 2.5]);
        let e = write(&dir, "e2.csv", "alpha_id,expected_return\ny,2.5\n");
        assert!(load_expected_csv(&e, &panel).is_err());
    }

    #[test]
    fn positions_long_format() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "p.csv",
            "alpha_id,instrument_id,time,position\na,IBM,t1,1.0\na,MSFT,t1,-1.0\na,IBM,t2,0.25\na,MSFT,t2,0.75\n",
        );
        let load = load_positions(&p).unwrap();
        assert_eq!(load.rescaled_slices, 1);
        assert_eq!(load.history.n_obs(), 2);
        assert_eq!(load.history.instrument_ids(), &["IBM", "MSFT"]);
        assert_eq!(load.history.entries()[0].value, 0.5);
    }

    #[test]
    fn weights_use_fifteen_significant_digits() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w.csv");
        save_weights_csv(&p, &["a".into()], &[1.0 / 3.0]).unwrap();
        let body = fs::read_to_string(&p).unwrap();
        assert_eq!(body, "alpha_id,weight\na,3.33333333333333e-1\n");
    }
}
