//! CSV matrix serialization.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Writes a matrix as headerless CSV, one row per line, values printed with
/// 17 significant digits (value-exact for `f64` round trips).
pub fn write_csv_matrix(matrix: &Array2<f64>, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for row in matrix.rows() {
        let mut first = true;
        for v in row.iter() {
            if !first {
                out.write_all(b",")?;
            }
            write!(out, "{v:.16e}")?;
            first = false;
        }
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a headerless CSV matrix. See [`read_csv_matrix_opts`].
pub fn read_csv_matrix(path: &Path) -> Result<Array2<f64>> {
    read_csv_matrix_opts(path, false)
}

/// Reads a CSV matrix, optionally skipping a header line. All rows must have
/// the same number of cells; parse errors carry 1-based line numbers.
pub fn read_csv_matrix_opts(path: &Path, has_header: bool) -> Result<Array2<f64>> {
    let reader = BufReader::new(File::open(path)?);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        let number = line_no + 1;
        if has_header && line_no == 0 {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for cell in line.split(',') {
            let cell = cell.trim();
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                line: number,
                message: format!("not a number: {cell:?}"),
            })?;
            row.push(value);
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Parse {
                    line: number,
                    message: format!("ragged row: expected {w} cells, found {}", row.len()),
                });
            }
            _ => {}
        }
        rows.push(row);
    }
    let width = width.ok_or_else(|| Error::Parse {
        line: 1,
        message: "empty matrix".into(),
    })?;
    let height = rows.len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((height, width), flat)
        .map_err(|e| Error::Format(format!("matrix shape: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};

    #[test]
    fn round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let m = array![
            [1.0, -2.5, 3.141592653589793],
            [1e-300, 1e300, -0.000123456789012345]
        ];
        write_csv_matrix(&m, &path).unwrap();
        let back = read_csv_matrix(&path).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn large_matrix_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("big.csv");
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        let m = Array2::from_shape_fn((100, 10_000), |_| rng.random_range(-1e6..1e6));
        write_csv_matrix(&m, &path).unwrap();
        let back = read_csv_matrix(&path).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn ragged_row_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ragged.csv");
        std::fs::write(&path, "1,2,3\n4,5\n").unwrap();
        match read_csv_matrix(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_cell_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "1,2\n3,x\n").unwrap();
        match read_csv_matrix(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn header_can_be_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        let m = read_csv_matrix_opts(&path, true).unwrap();
        assert_eq!(m, array![[1.0, 2.0]]);
        assert!(read_csv_matrix(&path).is_err());
    }

    #[test]
    fn empty_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        std::fs::write(&path, "").unwrap();
        assert!(read_csv_matrix(&path).is_err());
    }
}
