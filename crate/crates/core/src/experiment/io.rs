use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Dense matrix as whitespace-separated rows; `#` starts a comment and
/// blank lines are skipped.
pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse { line: idx + 1, message };
        let row = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|f| !f.is_empty())
            .map(|f| {
                let v: f64 = f.parse().map_err(|_| parse_err(format!("{f:?} is not a number")))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(parse_err(format!("{f:?} is not finite")))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(format!("expected {} entries, got {}", first.len(), row.len())));
            }
        }
        rows.push(row);
    }
    let cols = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_row_iterator(rows.len(), cols, rows.into_iter().flatten()))
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    parse_matrix(&std::fs::read_to_string(path)?)
}

/// Each row of the file is one vector.
pub fn load_vectors(path: impl AsRef<Path>) -> Result<Vec<DVector<f64>>> {
    let m = load_matrix(path)?;
    Ok(m.row_iter().map(|r| r.transpose()).collect())
}

/// Round-trips exactly through [`parse_matrix`].
pub fn format_matrix(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let fields: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(out, "{}", fields.join(" "));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, -2.5, 1e-17, 0.1, 3.0, -0.0]);
        assert_eq!(parse_matrix(&format_matrix(&m)).unwrap(), m);
    }

    #[test]
    fn comments_and_commas() {
        let m = parse_matrix("# header\n1, 2\n\n3 4 # tail\n").unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
    }

    #[test]
    fn ragged_and_bad_entries() {
        assert!(matches!(parse_matrix("1 2\n3\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_matrix("1 nan\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_matrix("1 q\n"), Err(Error::Parse { line: 1, .. })));
    }
}
