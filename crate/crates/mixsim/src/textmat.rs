//! Plain-text matrix files for the `fuse` CLI verb.
//!
//! Format: first line is "rows cols", then `rows * cols` whitespace
//! separated values in row-major order (line breaks are not significant).
//! Values are written with Rust's shortest round-trip float formatting, so
//! write-then-read reproduces a matrix bit for bit.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TextMatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{label}: {what}")]
    Malformed { label: String, what: String },
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<Array2<f64>, TextMatError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| TextMatError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_matrix(&text, &path.display().to_string())
}

pub fn parse_matrix(text: &str, label: &str) -> Result<Array2<f64>, TextMatError> {
    let bad = |what: String| TextMatError::Malformed {
        label: label.to_string(),
        what,
    };
    let mut tokens = text.split_whitespace();
    let rows: usize = tokens
        .next()
        .ok_or_else(|| bad("empty file, expected \"rows cols\" header".to_string()))?
        .parse()
        .map_err(|_| bad("header row count is not an integer".to_string()))?;
    let cols: usize = tokens
        .next()
        .ok_or_else(|| bad("header missing column count".to_string()))?
        .parse()
        .map_err(|_| bad("header column count is not an integer".to_string()))?;
    if rows == 0 || cols == 0 {
        return Err(bad(format!("degenerate shape {rows}x{cols}")));
    }

    let mut values = Vec::with_capacity(rows * cols);
    for tok in tokens {
        let v: f64 = tok
            .parse()
            .map_err(|_| bad(format!("bad value {tok:?} at position {}", values.len())))?;
        values.push(v);
    }
    if values.len() != rows * cols {
        return Err(bad(format!(
            "expected {} values for shape {rows}x{cols}, found {}",
            rows * cols,
            values.len()
        )));
    }
    Array2::from_shape_vec((rows, cols), values)
        .map_err(|e| bad(format!("shape error: {e}")))
}

pub fn format_matrix(m: &Array2<f64>) -> String {
    let mut out = format!("{} {}\n", m.nrows(), m.ncols());
    for row in m.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn write_matrix(m: &Array2<f64>, path: impl AsRef<Path>) -> Result<(), TextMatError> {
    let path = path.as_ref();
    fs::write(path, format_matrix(m)).map_err(|source| TextMatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parse_simple() {
        let m = parse_matrix("2 3\n1 2 3\n4 5 6\n", "test").unwrap();
        assert_eq!(m, arr2(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]));
    }

    #[test]
    fn line_breaks_are_not_significant() {
        let a = parse_matrix("2 2 1 2 3 4", "test").unwrap();
        let b = parse_matrix("2 2\n1\n2\n3\n4\n", "test").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let m = Array2::from_shape_fn((7, 5), |_| rng.gen_range(-1e6..1e6) * 1e-3);
        let text = format_matrix(&m);
        let back = parse_matrix(&text, "roundtrip").unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.txt");
        let m = arr2(&[[0.1, -2.5], [3.25, 1e-12]]);
        write_matrix(&m, &p).unwrap();
        assert_eq!(read_matrix(&p).unwrap(), m);
    }

    #[test]
    fn malformed_inputs_are_errors() {
        assert!(parse_matrix("", "t").is_err());
        assert!(parse_matrix("2", "t").is_err());
        assert!(parse_matrix("a b\n1 2", "t").is_err());
        assert!(parse_matrix("0 3", "t").is_err());
        assert!(parse_matrix("2 2\n1 2 3", "t").is_err());
        assert!(parse_matrix("2 2\n1 2 3 4 5", "t").is_err());
        assert!(parse_matrix("1 2\n1 x", "t").is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            read_matrix("/nonexistent/m.txt"),
            Err(TextMatError::Io { .. })
        ));
    }
}
