//! Matrix file formats: a plain text form ("rows cols" header then rows of
//! decimals) and the JSON form {"rows":…, "cols":…, "entries":[…]}.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub fn parse_matrix_text(text: &str) -> Result<Matrix> {
    let mut tokens = text.split_whitespace();
    let rows: usize = tokens
        .next()
        .ok_or_else(|| Error::InvalidInput("empty matrix file".into()))?
        .parse()
        .map_err(|_| Error::InvalidInput("bad row count".into()))?;
    let cols: usize = tokens
        .next()
        .ok_or_else(|| Error::InvalidInput("missing column count".into()))?
        .parse()
        .map_err(|_| Error::InvalidInput("bad column count".into()))?;
    let mut entries = Vec::with_capacity(rows * cols);
    for tok in tokens {
        let v: f64 = tok
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad matrix entry '{}'", tok)))?;
        entries.push(v);
    }
    if entries.len() != rows * cols {
        return Err(Error::InvalidInput(format!(
            "expected {} entries, found {}",
            rows * cols,
            entries.len()
        )));
    }
    Matrix::new(rows, cols, entries)
}

pub fn format_matrix_text(m: &Matrix) -> String {
    let mut out = format!("{} {}\n", m.rows, m.cols);
    for i in 0..m.rows {
        let row: Vec<String> = (0..m.cols).map(|j| format!("{}", m.get(i, j))).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Accepts either the text form or the JSON form, sniffing on the first
/// non-whitespace byte.
pub fn parse_matrix_auto(text: &str) -> Result<Matrix> {
    if text.trim_start().starts_with('{') {
        let m: Matrix = serde_json::from_str(text)
            .map_err(|e| Error::InvalidInput(format!("bad matrix JSON: {}", e)))?;
        if m.entries.len() != m.rows * m.cols || m.entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("inconsistent matrix JSON".into()));
        }
        Ok(m)
    } else {
        parse_matrix_text(text)
    }
}

pub fn read_matrix_file(path: &std::path::Path) -> Result<Matrix> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {}", path.display(), e)))?;
    parse_matrix_auto(&text)
}
