//! Plain-text formats.
//!
//! Matrix files start with `n <int>`, followed by `n` rows of `n`
//! whitespace-separated numbers and an optional line `pi <n numbers>`.
//! Blank lines and lines starting with `#` are ignored. Values are written
//! with 17 significant digits so a round trip is lossless.
//!
//! Permutation files hold one `x y` line per non-fixed point, meaning
//! `psi(x) = y`. Omitted states are fixed.

use nalgebra::DMatrix;

use crate::chain::{self, Permutation, ProbabilityVector, StochasticMatrix};
use crate::{Error, Result};

/// A parsed matrix file.
#[derive(Debug, Clone)]
pub struct MatrixFile {
    pub matrix: StochasticMatrix,
    pub pi: Option<ProbabilityVector>,
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_floats(line: usize, fields: &[&str]) -> Result<Vec<f64>> {
    fields
        .iter()
        .map(|f| {
            f.parse::<f64>().map_err(|_| Error::Parse { line, message: format!("'{f}' is not a number") })
        })
        .collect()
}

/// Parses and validates a matrix file.
pub fn parse_matrix(text: &str) -> Result<MatrixFile> {
    let mut lines = content_lines(text);
    let (hline, header) = lines.next().ok_or(Error::Parse { line: 1, message: "empty input".into() })?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let n = match fields.as_slice() {
        ["n", k] => k
            .parse::<usize>()
            .map_err(|_| Error::Parse { line: hline, message: format!("'{k}' is not a state count") })?,
        _ => return Err(Error::Parse { line: hline, message: "expected 'n <int>'".into() }),
    };
    if n == 0 {
        return Err(Error::Parse { line: hline, message: "state count must be positive".into() });
    }
    let mut data = Vec::with_capacity(n * n);
    let mut last_line = hline;
    for r in 0..n {
        let (line, row) = lines
            .next()
            .ok_or(Error::Parse { line: last_line + 1, message: format!("expected {n} rows, found {r}") })?;
        last_line = line;
        let fields: Vec<&str> = row.split_whitespace().collect();
        if fields.len() != n {
            return Err(Error::Parse { line, message: format!("expected {n} entries, found {}", fields.len()) });
        }
        data.extend(parse_floats(line, &fields)?);
    }
    let mut pi = None;
    if let Some((line, rest)) = lines.next() {
        let fields: Vec<&str> = rest.split_whitespace().collect();
        if fields.first() != Some(&"pi") {
            return Err(Error::Parse { line, message: "expected 'pi <n numbers>' or end of input".into() });
        }
        if fields.len() != n + 1 {
            return Err(Error::Parse { line, message: format!("expected {n} stationary weights") });
        }
        pi = Some(ProbabilityVector::new(parse_floats(line, &fields[1..])?, 1e-10)?);
        if let Some((line, _)) = lines.next() {
            return Err(Error::Parse { line, message: "unexpected content after 'pi' line".into() });
        }
    }
    let matrix = chain::validate_stochastic(DMatrix::from_row_slice(n, n, &data), chain::ROW_SUM_TOL)?;
    Ok(MatrixFile { matrix, pi })
}

/// Serialises a matrix (and optionally its stationary law).
pub fn format_matrix(p: &StochasticMatrix, pi: Option<&ProbabilityVector>) -> String {
    let n = p.n();
    let mut out = format!("n {n}\n");
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| format!("{:.16e}", p.get(i, j))).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    if let Some(pi) = pi {
        let w: Vec<String> = pi.as_slice().iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str("pi ");
        out.push_str(&w.join(" "));
        out.push('\n');
    }
    out
}

/// Parses a permutation file into an image table on `0..n`.
/// Bijectivity is not checked here; wrap the result in a permutation type.
pub fn parse_permutation(text: &str, n: usize) -> Result<Vec<usize>> {
    let mut map: Vec<usize> = (0..n).collect();
    let mut seen = vec![false; n];
    for (line, l) in content_lines(text) {
        let fields: Vec<&str> = l.split_whitespace().collect();
        let [x, y] = fields.as_slice() else {
            return Err(Error::Parse { line, message: "expected 'x y'".into() });
        };
        let parse = |s: &str| {
            s.parse::<usize>().map_err(|_| Error::Parse { line, message: format!("'{s}' is not a state index") })
        };
        let (x, y) = (parse(x)?, parse(y)?);
        if x >= n || y >= n {
            return Err(Error::Parse { line, message: format!("state out of range for {n} states") });
        }
        if seen[x] {
            return Err(Error::Parse { line, message: format!("state {x} listed twice") });
        }
        seen[x] = true;
        map[x] = y;
    }
    Ok(map)
}

/// Serialises the non-fixed points of a permutation.
pub fn format_permutation<Q: Permutation + ?Sized>(q: &Q) -> String {
    let mut out = String::new();
    for x in 0..q.len() {
        let y = q.image(x);
        if x != y {
            out.push_str(&format!("{x} {y}\n"));
        }
    }
    out
}
