use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Validates a 1-based mode index.
pub fn check_mode(d: usize) -> Result<usize> {
    if (1..=3).contains(&d) {
        Ok(d - 1)
    } else {
        Err(Error::InvalidMode(d))
    }
}

/// Dense `n1 × n2 × n3` array stored with `i1` fastest, then `i2`, then `i3`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor3<T> {
    dims: [usize; 3],
    values: Vec<T>,
}

/// Splits `dims` around mode `m` (0-based) into `(left, n_m, right)` so that
/// linear index = `l + left * (i_m + n_m * r)`.
#[inline]
fn split(dims: [usize; 3], m: usize) -> (usize, usize, usize) {
    let left: usize = dims[..m].iter().product();
    let right: usize = dims[m + 1..].iter().product();
    (left, dims[m], right)
}

impl<T: Real> DenseTensor3<T> {
    pub fn new(dims: [usize; 3], values: Vec<T>) -> Result<Self> {
        let len: usize = dims.iter().product();
        if dims.contains(&0) {
            return Err(Error::mismatch(format!("tensor dims must be positive, got {dims:?}")));
        }
        if values.len() != len {
            return Err(Error::mismatch(format!(
                "{} values for dims {dims:?} (expected {len})",
                values.len()
            )));
        }
        Ok(Self { dims, values })
    }

    pub fn zeros(dims: [usize; 3]) -> Self {
        Self {
            dims,
            values: vec![T::zero(); dims.iter().product()],
        }
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut values = Vec::with_capacity(dims.iter().product());
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    values.push(f(i, j, k));
                }
            }
        }
        Self { dims, values }
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn linear_index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> T {
        self.values[self.linear_index(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: T) {
        let idx = self.linear_index(i, j, k);
        self.values[idx] = v;
    }

    /// Mode-`d` unfolding (`d` in 1..=3).
    pub fn unfold(&self, d: usize) -> Result<DMatrix<T>> {
        let m = check_mode(d)?;
        let (left, nm, right) = split(self.dims, m);
        let mut out = DMatrix::zeros(nm, left * right);
        for r in 0..right {
            for i in 0..nm {
                let base = left * (i + nm * r);
                for l in 0..left {
                    out[(i, l + left * r)] = self.values[base + l];
                }
            }
        }
        Ok(out)
    }

    /// Inverse of [`unfold`](Self::unfold).
    pub fn fold(mat: &DMatrix<T>, d: usize, dims: [usize; 3]) -> Result<Self> {
        let m = check_mode(d)?;
        let (left, nm, right) = split(dims, m);
        if mat.nrows() != nm || mat.ncols() != left * right {
            return Err(Error::mismatch(format!(
                "cannot fold {}x{} matrix along mode {d} into {dims:?}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let mut out = Self::zeros(dims);
        for r in 0..right {
            for i in 0..nm {
                let base = left * (i + nm * r);
                for l in 0..left {
                    out.values[base + l] = mat[(i, l + left * r)];
                }
            }
        }
        Ok(out)
    }

    /// `T ×_d V`: replaces `n_d` with `V.nrows()`, so that
    /// `unfold(result, d) == V * unfold(T, d)`.
    pub fn mode_product(&self, v: &DMatrix<T>, d: usize) -> Result<Self> {
        let m = check_mode(d)?;
        let (left, nm, right) = split(self.dims, m);
        if v.ncols() != nm {
            return Err(Error::mismatch(format!(
                "mode-{d} product needs {nm} columns, matrix is {}x{}",
                v.nrows(),
                v.ncols()
            )));
        }
        let p = v.nrows();
        let mut dims = self.dims;
        dims[m] = p;
        let mut out = vec![T::zero(); left * p * right];
        for r in 0..right {
            for i in 0..nm {
                let src = &self.values[left * (i + nm * r)..left * (i + nm * r + 1)];
                for q in 0..p {
                    let c = v[(q, i)];
                    if c == T::zero() {
                        continue;
                    }
                    let dst = &mut out[left * (q + p * r)..left * (q + p * r + 1)];
                    for (o, &s) in dst.iter_mut().zip(src) {
                        *o += c * s;
                    }
                }
            }
        }
        Ok(Self { dims, values: out })
    }

    /// Gram matrix `T_d T_d^T` of the mode-`d` unfolding.
    pub fn mode_gram(&self, d: usize) -> Result<DMatrix<T>> {
        let u = self.unfold(d)?;
        Ok(&u * u.transpose())
    }

    pub fn dot(&self, other: &Self) -> T {
        debug_assert_eq!(self.dims, other.dims);
        self.values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
    }

    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            dims: self.dims,
            values: self.values.iter().map(|&v| v * s).collect(),
        }
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: T, other: &Self) -> Self {
        debug_assert_eq!(self.dims, other.dims);
        Self {
            dims: self.dims,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| a + s * b)
                .collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }
}
