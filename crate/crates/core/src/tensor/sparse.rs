use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Sorted, duplicate-free set of 0-based index triples within `dims`.
///
/// The index list is shared behind an `Arc`, so residuals and other tensors
/// on the same pattern do not copy it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexSet {
    dims: [usize; 3],
    indices: Arc<Vec<[usize; 3]>>,
}

impl IndexSet {
    /// Builds an index set, sorting lexicographically by `(i1, i2, i3)`.
    /// Duplicates and out-of-range triples are errors.
    pub fn new(dims: [usize; 3], mut indices: Vec<[usize; 3]>) -> Result<Self> {
        for idx in &indices {
            check_in_range(dims, idx)?;
        }
        indices.sort_unstable();
        if let Some(w) = indices.windows(2).find(|w| w[0] == w[1]) {
            let [i, j, k] = w[0];
            return Err(Error::DuplicateIndex { i, j, k });
        }
        Ok(Self {
            dims,
            indices: Arc::new(indices),
        })
    }

    pub fn empty(dims: [usize; 3]) -> Self {
        Self {
            dims,
            indices: Arc::new(Vec::new()),
        }
    }

    /// Every index of the tensor, in lexicographic order.
    pub fn full(dims: [usize; 3]) -> Self {
        let mut indices = Vec::with_capacity(dims.iter().product());
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for k in 0..dims[2] {
                    indices.push([i, j, k]);
                }
            }
        }
        Self {
            dims,
            indices: Arc::new(indices),
        }
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    pub fn indices(&self) -> &[[usize; 3]] {
        &self.indices
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// One-pass check of sortedness, uniqueness and range.
    pub fn validate(&self) -> Result<()> {
        for idx in self.indices.iter() {
            check_in_range(self.dims, idx)?;
        }
        for w in self.indices.windows(2) {
            if w[0] >= w[1] {
                let [i, j, k] = w[1];
                return Err(Error::DuplicateIndex { i, j, k });
            }
        }
        Ok(())
    }

    /// True when no triple occurs in both sets (merge walk over sorted lists).
    pub fn is_disjoint(&self, other: &IndexSet) -> bool {
        let (a, b) = (self.indices(), other.indices());
        let (mut p, mut q) = (0, 0);
        while p < a.len() && q < b.len() {
            match a[p].cmp(&b[q]) {
                std::cmp::Ordering::Less => p += 1,
                std::cmp::Ordering::Greater => q += 1,
                std::cmp::Ordering::Equal => return false,
            }
        }
        true
    }
}

fn check_in_range(dims: [usize; 3], idx: &[usize; 3]) -> Result<()> {
    if idx.iter().zip(&dims).any(|(&i, &n)| i >= n) {
        return Err(Error::IndexOutOfRange {
            i: idx[0],
            j: idx[1],
            k: idx[2],
            dims,
        });
    }
    Ok(())
}

/// COO tensor: an [`IndexSet`] plus one value per index.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseTensor3<T> {
    pattern: IndexSet,
    values: Vec<T>,
}

impl<T: Real> SparseTensor3<T> {
    pub fn new(dims: [usize; 3], mut entries: Vec<([usize; 3], T)>) -> Result<Self> {
        entries.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        let (indices, values): (Vec<_>, Vec<_>) = entries.into_iter().unzip();
        let pattern = IndexSet {
            dims,
            indices: Arc::new(indices),
        };
        pattern.validate()?;
        Ok(Self { pattern, values })
    }

    pub fn from_pattern(pattern: IndexSet, values: Vec<T>) -> Result<Self> {
        if values.len() != pattern.len() {
            return Err(Error::mismatch(format!(
                "{} values for {} indices",
                values.len(),
                pattern.len()
            )));
        }
        Ok(Self { pattern, values })
    }

    pub fn zeros(pattern: IndexSet) -> Self {
        let values = vec![T::zero(); pattern.len()];
        Self { pattern, values }
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.pattern.dims
    }

    #[inline]
    pub fn pattern(&self) -> &IndexSet {
        &self.pattern
    }

    #[inline]
    pub fn indices(&self) -> &[[usize; 3]] {
        self.pattern.indices()
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ([usize; 3], T)> + '_ {
        self.indices().iter().copied().zip(self.values.iter().copied())
    }

    /// Same pattern, new values.
    pub fn with_values(&self, values: Vec<T>) -> Result<Self> {
        Self::from_pattern(self.pattern.clone(), values)
    }

    pub fn norm_squared(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, &v| acc + v * v)
    }

    /// Scatters into a dense tensor; unobserved entries are zero.
    pub fn to_dense(&self) -> super::DenseTensor3<T> {
        let mut out = super::DenseTensor3::zeros(self.dims());
        for ([i, j, k], v) in self.iter() {
            out.set(i, j, k, v);
        }
        out
    }
}
