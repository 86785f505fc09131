//! Plain-text coordinate format and JSON factor files.
//!
//! ```text
//! # dims 3 4 5 base=0
//! 0 1 2 0.5
//! 2 3 4 -1.25e-7
//! ```
//!
//! Values are written in the shortest decimal form that parses back to the
//! same bits.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::TuckerPoint;
use crate::scalar::Real;
use crate::tensor::{DenseTensor3, SparseTensor3};

/// Shortest round-trip decimal; scientific notation for very large or small
/// magnitudes.
pub fn fmt_real<T: Real>(v: T) -> String {
    let a = v.to_f64_lossy().abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn write_coo<T: Real, W: Write>(t: &SparseTensor3<T>, base: usize, mut w: W) -> Result<()> {
    if base > 1 {
        return Err(Error::invalid("base", "must be 0 or 1"));
    }
    let [n1, n2, n3] = t.dims();
    writeln!(w, "# dims {n1} {n2} {n3} base={base}")?;
    for ([i, j, k], v) in t.iter() {
        writeln!(w, "{} {} {} {}", i + base, j + base, k + base, fmt_real(v))?;
    }
    w.flush()?;
    Ok(())
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn parse_header(line: &str) -> Option<([usize; 3], usize)> {
    let mut it = line.strip_prefix('#')?.split_whitespace();
    if it.next()? != "dims" {
        return None;
    }
    let mut dims = [0; 3];
    for d in &mut dims {
        *d = it.next()?.parse().ok()?;
    }
    let base = match it.next() {
        None => 0,
        Some(b) => b.strip_prefix("base=")?.parse().ok().filter(|b| *b <= 1)?,
    };
    if it.next().is_some() {
        return None;
    }
    Some((dims, base))
}

/// Reads the coordinate format. Blank lines and further `#` comments are
/// skipped; line numbers in errors are 1-based.
pub fn read_coo<T: Real, R: Read>(r: R) -> Result<SparseTensor3<T>> {
    let mut lines = BufReader::new(r).lines().enumerate();
    let (dims, base) = loop {
        match lines.next() {
            None => return Err(parse_err(1, "missing `# dims n1 n2 n3 base=b` header")),
            Some((no, line)) => {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                break parse_header(line.trim())
                    .ok_or_else(|| parse_err(no + 1, format!("bad header `{line}`")))?;
            }
        }
    };
    let mut entries = Vec::new();
    for (no, line) in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 4 {
            return Err(parse_err(no + 1, format!("expected `i j k value`, got {} fields", f.len())));
        }
        let mut idx = [0usize; 3];
        for m in 0..3 {
            let raw: usize = f[m]
                .parse()
                .map_err(|_| parse_err(no + 1, format!("bad index `{}`", f[m])))?;
            idx[m] = raw
                .checked_sub(base)
                .filter(|&i| i < dims[m])
                .ok_or_else(|| parse_err(no + 1, format!("index {raw} out of range for mode {} (size {}, base {base})", m + 1, dims[m])))?;
        }
        let v: T = f[3]
            .parse()
            .map_err(|_| parse_err(no + 1, format!("bad value `{}`", f[3])))?;
        entries.push((idx, v));
    }
    SparseTensor3::new(dims, entries)
}

pub fn save_coo<T: Real>(t: &SparseTensor3<T>, path: impl AsRef<Path>) -> Result<()> {
    write_coo(t, 0, BufWriter::new(File::create(path)?))
}

pub fn load_coo<T: Real>(path: impl AsRef<Path>) -> Result<SparseTensor3<T>> {
    read_coo(File::open(path)?)
}

/// Serialized Tucker point; matrices are stored column-major.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointFile {
    pub dims: [usize; 3],
    pub ranks: [usize; 3],
    pub factors: [Vec<f64>; 3],
    pub core: Vec<f64>,
}

impl PointFile {
    pub fn from_point<T: Real>(x: &TuckerPoint<T>) -> Self {
        Self {
            dims: x.dims(),
            ranks: x.ranks(),
            factors: std::array::from_fn(|d| x.factor(d + 1).iter().map(|v| v.to_f64_lossy()).collect()),
            core: x.core().values().iter().map(|v| v.to_f64_lossy()).collect(),
        }
    }

    pub fn to_point<T: Real>(&self) -> Result<TuckerPoint<T>> {
        let mut factors = Vec::with_capacity(3);
        for d in 0..3 {
            let (n, r) = (self.dims[d], self.ranks[d]);
            if self.factors[d].len() != n * r {
                return Err(Error::mismatch(format!("factor {} has {} values, expected {}", d + 1, self.factors[d].len(), n * r)));
            }
            factors.push(DMatrix::from_iterator(n, r, self.factors[d].iter().map(|&v| T::of(v))));
        }
        let core = DenseTensor3::new(self.ranks, self.core.iter().map(|&v| T::of(v)).collect())?;
        TuckerPoint::new(factors.try_into().expect("three factors"), core)
    }
}

pub fn save_point<T: Real>(x: &TuckerPoint<T>, path: impl AsRef<Path>) -> Result<()> {
    let w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(w, &PointFile::from_point(x))?;
    Ok(())
}

pub fn load_point<T: Real>(path: impl AsRef<Path>) -> Result<TuckerPoint<T>> {
    let f: PointFile = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    f.to_point()
}
