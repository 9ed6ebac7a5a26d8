//! Matrix Market coordinate format, real general matrices only.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

use super::CsrMatrix;

pub fn write_matrix_market<W: Write>(a: &CsrMatrix, mut w: W) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), a.nnz())?;
    for (r, c, v) in a.to_triplets() {
        writeln!(w, "{} {} {:e}", r + 1, c + 1, v)?;
    }
    Ok(())
}

pub fn read_matrix_market<R: BufRead>(r: R) -> Result<CsrMatrix> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty Matrix Market file".into()))??;
    let h = header.to_ascii_lowercase();
    if !h.starts_with("%%matrixmarket matrix coordinate real") {
        return Err(Error::Parse(format!("unsupported header `{header}`")));
    }
    let symmetric = h.contains("symmetric");
    let mut size: Option<(usize, usize, usize)> = None;
    let mut trips = Vec::new();
    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let f: Vec<&str> = t.split_whitespace().collect();
        let bad = || Error::Parse(format!("malformed line `{t}`"));
        match size {
            None => {
                if f.len() != 3 {
                    return Err(bad());
                }
                let p = |s: &str| s.parse::<usize>().map_err(|_| bad());
                size = Some((p(f[0])?, p(f[1])?, p(f[2])?));
            }
            Some((nr, nc, _)) => {
                if f.len() != 3 {
                    return Err(bad());
                }
                let i: usize = f[0].parse().map_err(|_| bad())?;
                let j: usize = f[1].parse().map_err(|_| bad())?;
                let v: f64 = f[2].parse().map_err(|_| bad())?;
                if i == 0 || j == 0 || i > nr || j > nc {
                    return Err(bad());
                }
                trips.push((i - 1, j - 1, v));
                if symmetric && i != j {
                    trips.push((j - 1, i - 1, v));
                }
            }
        }
    }
    let (nr, nc, nnz) = size.ok_or_else(|| Error::Parse("missing size line".into()))?;
    let stored = if symmetric { trips.iter().filter(|t| t.0 >= t.1).count() } else { trips.len() };
    if stored != nnz {
        return Err(Error::Parse(format!("expected {nnz} entries, found {stored}")));
    }
    Ok(CsrMatrix::from_triplets(nr, nc, trips))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let a = CsrMatrix::from_triplets(3, 2, vec![(0, 0, 1.5), (2, 1, -0.25), (1, 0, 1e-17)]);
        let mut buf = Vec::new();
        write_matrix_market(&a, &mut buf).unwrap();
        let b = read_matrix_market(&buf[..]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn wrong_count_is_rejected() {
        let s = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n";
        assert!(read_matrix_market(s.as_bytes()).is_err());
    }
}
