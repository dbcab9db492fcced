//! Plain-text matrix dump for debugging.
//!
//! Format, one item per line, LF endings:
//!
//! ```text
//! # dim <rows> <cols>
//! <row> <col> <real> <imag>
//! ```
//!
//! Indices are 0-based, entries are the nonzeros in row-major order, and
//! numbers are printed with 17 significant digits so a dump reads back
//! bit-for-bit.

use std::io::{self, BufRead, Write};

use super::{CsrMatrix, C64};
use crate::error::{Error, Result};

pub fn write_matrix<W: Write>(m: &CsrMatrix, mut w: W) -> io::Result<()> {
    writeln!(w, "# dim {} {}", m.nrows(), m.ncols())?;
    for (i, j, z) in m.triplets() {
        writeln!(w, "{i} {j} {:.16e} {:.16e}", z.re, z.im)?;
    }
    Ok(())
}

pub fn read_matrix<R: BufRead>(r: R) -> Result<CsrMatrix> {
    let bad = |line: usize, what: &str| Error::Config(format!("matrix dump line {line}: {what}"));
    let mut lines = r.lines().enumerate();
    let (rows, cols) = match lines.next() {
        Some((_, Ok(h))) => {
            let f: Vec<&str> = h.split_whitespace().collect();
            match f.as_slice() {
                ["#", "dim", r, c] => (
                    r.parse().map_err(|_| bad(1, "bad row count"))?,
                    c.parse().map_err(|_| bad(1, "bad column count"))?,
                ),
                _ => return Err(bad(1, "expected '# dim <rows> <cols>'")),
            }
        }
        _ => return Err(bad(1, "missing header")),
    };
    let mut t = Vec::new();
    for (n, line) in lines {
        let line = line.map_err(|e| bad(n + 1, &e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 4 {
            return Err(bad(n + 1, "expected 4 fields"));
        }
        let i: usize = f[0].parse().map_err(|_| bad(n + 1, "bad row index"))?;
        let j: usize = f[1].parse().map_err(|_| bad(n + 1, "bad column index"))?;
        let re: f64 = f[2].parse().map_err(|_| bad(n + 1, "bad real part"))?;
        let im: f64 = f[3].parse().map_err(|_| bad(n + 1, "bad imaginary part"))?;
        if i >= rows || j >= cols {
            return Err(bad(n + 1, "index out of range"));
        }
        t.push((i, j, C64::new(re, im)));
    }
    Ok(CsrMatrix::from_triplets(rows, cols, &t))
}
