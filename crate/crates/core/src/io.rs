//! CSV input: first column is the response, remaining columns are predictors.

use std::path::Path;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Reads a dataset from CSV. `has_header` skips the first row.
///
/// Parsing is strict: every field must parse as an IEEE-754 double, rows must
/// all have the same width, and errors report the offending line number.
pub fn read_csv(path: &Path, has_header: bool) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_path(path)?;

    let mut y = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;

    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() < 2 {
            return Err(Error::CsvParse {
                line,
                msg: format!("need at least 2 columns, found {}", record.len()),
            });
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::CsvParse {
                    line,
                    msg: format!("expected {} columns, found {}", w, record.len()),
                })
            }
            _ => {}
        }
        let mut row = Vec::with_capacity(record.len() - 1);
        for (k, field) in record.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| Error::CsvParse {
                line,
                msg: format!("field {} ({field:?}) is not a number", k + 1),
            })?;
            if k == 0 {
                y.push(value);
            } else {
                row.push(value);
            }
        }
        rows.push(row);
    }

    if rows.is_empty() {
        return Err(Error::invalid("empty csv input"));
    }
    let p = rows[0].len();
    let n = rows.len();
    let mut x = Matrix::zeros(n, p);
    for j in 0..p {
        let col = x.col_mut(j);
        for (i, row) in rows.iter().enumerate() {
            col[i] = row[j];
        }
    }
    Dataset::new(y, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn reads_headerless_csv() {
        let f = write_tmp("1.5,2.0,3.0\n-0.25,4.0,5.0\n0.0,6.0,7.0\n");
        let d = read_csv(f.path(), false).unwrap();
        assert_eq!(d.n(), 3);
        assert_eq!(d.p(), 2);
        assert_eq!(d.y(), &[1.5, -0.25, 0.0]);
        assert_eq!(d.col(1), &[3.0, 5.0, 7.0]);
    }

    #[test]
    fn header_flag_skips_first_row() {
        let f = write_tmp("y,x1\n1.0,2.0\n2.0,3.0\n");
        let d = read_csv(f.path(), true).unwrap();
        assert_eq!(d.n(), 2);
    }

    #[test]
    fn malformed_row_reports_line_number() {
        let f = write_tmp("1.0,2.0\n2.0,oops\n3.0,4.0\n");
        let err = read_csv(f.path(), false).unwrap_err();
        match err {
            Error::CsvParse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn float_round_trip_is_exact() {
        let v = 0.1234567890123456789_f64;
        let f = write_tmp(&format!("{v},1.0\n2.0,3.0\n"));
        let d = read_csv(f.path(), false).unwrap();
        assert_eq!(d.y()[0], v);
    }
}
