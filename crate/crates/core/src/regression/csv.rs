use std::fs::File;
use std::io::Read;
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};

/// Reads a dataset from CSV text with an `x,y` header.
///
/// Values use `.` as the decimal separator. Errors carry the 1-based line
/// number of the offending record.
pub fn read_dataset<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = ::csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(::csv::Trim::All)
        .from_reader(reader);

    let headers = rdr.headers().map_err(csv_error)?.clone();
    let column = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!(
                "missing column `{name}` in header (expected `x,y`, found `{}`)",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        })
    };
    let xi = column("x")?;
    let yi = column("y")?;

    let mut x = Vec::new();
    let mut y = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        x.push(parse_field(record.get(xi), "x", line)?);
        y.push(parse_field(record.get(yi), "y", line)?);
    }
    Dataset::new(x, y)
}

/// Opens and reads a CSV dataset from disk.
pub fn read_dataset_path(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::Parse {
        line: 0,
        message: format!("cannot open {}: {e}", path.display()),
    })?;
    read_dataset(file)
}

fn parse_field(field: Option<&str>, name: &str, line: u64) -> Result<f64> {
    let raw = field.unwrap_or("");
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse {
            line,
            message: format!("invalid {name} value `{raw}`"),
        }),
    }
}

fn csv_error(err: ::csv::Error) -> Error {
    let line = err.position().map_or(0, |p| p.line());
    let message = match err.kind() {
        ::csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => format!("expected {expected_len} fields, found {len}"),
        _ => err.to_string(),
    };
    Error::Parse { line, message }
}
