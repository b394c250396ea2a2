//! Matrix Market coordinate files and permutation lists.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

const HEADER_GENERAL: &str = "%%MatrixMarket matrix coordinate real general";
const HEADER_SYMMETRIC: &str = "%%MatrixMarket matrix coordinate real symmetric";

/// Serializes `m`; symmetric-flagged matrices store the lower triangle only.
/// Values use the shortest representation that parses back exactly.
pub fn to_matrix_market_string(m: &SparseMatrix) -> String {
    let sym = m.is_symmetric_flag();
    let entries: Vec<(usize, usize, f64)> = m
        .triplets()
        .filter(|&(r, c, _)| !sym || r >= c)
        .collect();
    let mut s = String::with_capacity(32 * entries.len() + 128);
    s.push_str(if sym { HEADER_SYMMETRIC } else { HEADER_GENERAL });
    s.push('\n');
    s.push_str(&format!("{} {} {}\n", m.nrows(), m.ncols(), entries.len()));
    for (r, c, v) in entries {
        s.push_str(&format!("{} {} {:e}\n", r + 1, c + 1, v));
    }
    s
}

pub fn write_matrix_market(path: &Path, m: &SparseMatrix) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(to_matrix_market_string(m).as_bytes())?;
    Ok(())
}

pub fn read_matrix_market(path: &Path) -> Result<SparseMatrix> {
    let text = fs::read_to_string(path)?;
    parse_matrix_market(&text, path)
}

pub fn parse_matrix_market(text: &str, path: &Path) -> Result<SparseMatrix> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let sym = match header.trim() {
        HEADER_GENERAL => false,
        HEADER_SYMMETRIC => true,
        other => return Err(err(1, format!("unsupported header `{other}`"))),
    };
    let mut size: Option<(usize, usize, usize)> = None;
    let mut trip = Vec::new();
    for (ln, line) in lines {
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = t.split_whitespace().collect();
        match size {
            None => {
                if fields.len() != 3 {
                    return Err(err(ln, "size line needs `rows cols entries`".into()));
                }
                let p = |s: &str| s.parse::<usize>().map_err(|e| err(ln, format!("{s}: {e}")));
                size = Some((p(fields[0])?, p(fields[1])?, p(fields[2])?));
            }
            Some((nr, nc, _)) => {
                if fields.len() != 3 {
                    return Err(err(ln, "entry line needs `row col value`".into()));
                }
                let r: usize = fields[0]
                    .parse()
                    .map_err(|e| err(ln, format!("row `{}`: {e}", fields[0])))?;
                let c: usize = fields[1]
                    .parse()
                    .map_err(|e| err(ln, format!("column `{}`: {e}", fields[1])))?;
                let v: f64 = fields[2]
                    .parse()
                    .map_err(|e| err(ln, format!("value `{}`: {e}", fields[2])))?;
                if r == 0 || c == 0 || r > nr || c > nc {
                    return Err(err(ln, format!("index ({r}, {c}) outside {nr}x{nc}")));
                }
                if sym && r < c {
                    return Err(err(ln, "symmetric file has an upper-triangle entry".into()));
                }
                trip.push((r - 1, c - 1, v));
                if sym && r != c {
                    trip.push((c - 1, r - 1, v));
                }
            }
        }
    }
    let (nr, nc, ne) = size.ok_or_else(|| err(1, "missing size line".into()))?;
    let stored = if sym {
        trip.iter().filter(|&&(r, c, _)| r >= c).count()
    } else {
        trip.len()
    };
    if stored != ne {
        return Err(err(
            text.lines().count(),
            format!("expected {ne} entries, found {stored}"),
        ));
    }
    Ok(SparseMatrix::from_triplets(nr, nc, trip).with_symmetric(sym))
}

/// Writes a permutation as whitespace-separated 0-based indices, one per line.
pub fn write_permutation(path: &Path, perm: &[usize]) -> Result<()> {
    let mut s = String::with_capacity(8 * perm.len());
    for p in perm {
        s.push_str(&p.to_string());
        s.push('\n');
    }
    fs::write(path, s)?;
    Ok(())
}

pub fn read_permutation(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        for tok in line.split_whitespace() {
            out.push(tok.parse::<usize>().map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("`{tok}`: {e}"),
            })?);
        }
    }
    let mut seen = vec![false; out.len()];
    for &p in &out {
        if p >= out.len() || std::mem::replace(&mut seen[p], true) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                message: format!("not a permutation of 0..{}", out.len()),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_exact() {
        let m = SparseMatrix::from_triplets(
            3,
            3,
            vec![(0, 0, 0.1), (1, 0, 1.0 / 3.0), (0, 1, 1.0 / 3.0), (2, 2, -7e-300)],
        )
        .with_symmetric(true);
        let s = to_matrix_market_string(&m);
        assert!(s.starts_with("%%MatrixMarket matrix coordinate real symmetric\n3 3 3\n"));
        let back = parse_matrix_market(&s, Path::new("mem")).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn general_header() {
        let m = SparseMatrix::from_triplets(2, 2, vec![(0, 1, 1.5)]);
        assert!(to_matrix_market_string(&m).starts_with("%%MatrixMarket matrix coordinate real general\n"));
    }

    #[test]
    fn malformed_line_reports_number() {
        let text = "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 x 3.0\n";
        match parse_matrix_market(text, Path::new("bad.mtx")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
