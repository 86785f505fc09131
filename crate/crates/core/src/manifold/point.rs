use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::smallmat::{orthonormality_error, ortho_tol};
use crate::tensor::DenseTensor3;

/// Checks `r_d ≤ n_d` and `r_d ≤ r_e r_f` for every mode.
pub fn validate_shape(dims: [usize; 3], ranks: [usize; 3]) -> Result<()> {
    for d in 0..3 {
        if dims[d] == 0 || ranks[d] == 0 {
            return Err(Error::invalid("shape", format!("dims {dims:?} and ranks {ranks:?} must be positive")));
        }
        if ranks[d] > dims[d] {
            return Err(Error::invalid(
                "ranks",
                format!("rank {} exceeds dimension {} in mode {}", ranks[d], dims[d], d + 1),
            ));
        }
        let others: usize = (0..3).filter(|&e| e != d).map(|e| ranks[e]).product();
        if ranks[d] > others {
            return Err(Error::invalid(
                "ranks",
                format!("r{} = {} exceeds the product of the other ranks ({others})", d + 1, ranks[d]),
            ));
        }
    }
    Ok(())
}

/// Element `(U1, U2, U3, G)` of the total space: three Stiefel factors and a
/// core tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct TuckerPoint<T: Real> {
    factors: [DMatrix<T>; 3],
    core: DenseTensor3<T>,
}

impl<T: Real> TuckerPoint<T> {
    /// Validates shapes, rank conditions and orthonormality of the factors.
    pub fn new(factors: [DMatrix<T>; 3], core: DenseTensor3<T>) -> Result<Self> {
        let p = Self::from_parts(factors, core)?;
        validate_shape(p.dims(), p.ranks())?;
        let dev = p.orthonormality_error();
        if dev > ortho_tol::<T>() * T::of(8.0) {
            return Err(Error::NotOrthogonal(dev.to_f64_lossy()));
        }
        Ok(p)
    }

    /// Shape-checked constructor that does not test orthonormality.
    pub fn from_parts(factors: [DMatrix<T>; 3], core: DenseTensor3<T>) -> Result<Self> {
        for (d, u) in factors.iter().enumerate() {
            if u.ncols() != core.dims()[d] {
                return Err(Error::mismatch(format!(
                    "factor {} has {} columns, core has r{} = {}",
                    d + 1,
                    u.ncols(),
                    d + 1,
                    core.dims()[d]
                )));
            }
        }
        Ok(Self { factors, core })
    }

    /// `U_d` for `d` in 1..=3.
    #[inline]
    pub fn factor(&self, d: usize) -> &DMatrix<T> {
        &self.factors[d - 1]
    }

    #[inline]
    pub fn factors(&self) -> &[DMatrix<T>; 3] {
        &self.factors
    }

    #[inline]
    pub fn core(&self) -> &DenseTensor3<T> {
        &self.core
    }

    pub fn into_parts(self) -> ([DMatrix<T>; 3], DenseTensor3<T>) {
        (self.factors, self.core)
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        std::array::from_fn(|d| self.factors[d].nrows())
    }

    #[inline]
    pub fn ranks(&self) -> [usize; 3] {
        self.core.dims()
    }

    /// Largest `‖U_d^T U_d − I‖_F`.
    pub fn orthonormality_error(&self) -> T {
        self.factors
            .iter()
            .fold(T::zero(), |m, u| m.max(orthonormality_error(u)))
    }
}

/// Tangent (or ambient) vector `(Z_U1, Z_U2, Z_U3, Z_G)`. Tangency and
/// horizontality are properties checked by the geometry, not by the type.
#[derive(Clone, Debug, PartialEq)]
pub struct TuckerTangent<T: Real> {
    pub factors: [DMatrix<T>; 3],
    pub core: DenseTensor3<T>,
}

impl<T: Real> TuckerTangent<T> {
    pub fn new(factors: [DMatrix<T>; 3], core: DenseTensor3<T>) -> Self {
        Self { factors, core }
    }

    pub fn zeros_at(x: &TuckerPoint<T>) -> Self {
        Self {
            factors: std::array::from_fn(|d| DMatrix::zeros(x.factors[d].nrows(), x.factors[d].ncols())),
            core: DenseTensor3::zeros(x.ranks()),
        }
    }

    /// Checks that block shapes agree with `x`.
    pub fn check_shape(&self, x: &TuckerPoint<T>) -> Result<()> {
        for d in 0..3 {
            if self.factors[d].shape() != x.factors[d].shape() {
                return Err(Error::mismatch(format!(
                    "tangent block {} is {:?}, factor is {:?}",
                    d + 1,
                    self.factors[d].shape(),
                    x.factors[d].shape()
                )));
            }
        }
        if self.core.dims() != x.ranks() {
            return Err(Error::mismatch(format!(
                "tangent core {:?}, point core {:?}",
                self.core.dims(),
                x.ranks()
            )));
        }
        Ok(())
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            factors: std::array::from_fn(|d| &self.factors[d] * s),
            core: self.core.scale(s),
        }
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: T, other: &Self) -> Self {
        Self {
            factors: std::array::from_fn(|d| &self.factors[d] + &other.factors[d] * s),
            core: self.core.axpy(s, &other.core),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.axpy(-T::one(), other)
    }

    /// Plain Euclidean inner product of the four blocks.
    pub fn euclid_dot(&self, other: &Self) -> T {
        (0..3).fold(self.core.dot(&other.core), |acc, d| acc + self.factors[d].dot(&other.factors[d]))
    }

    pub fn euclid_norm(&self) -> T {
        self.euclid_dot(self).sqrt()
    }

    pub fn max_abs(&self) -> T {
        let m = self.core.values().iter().fold(T::zero(), |m, v| m.max(v.abs()));
        self.factors.iter().fold(m, |m, f| m.max(f.amax()))
    }

    pub fn is_zero(&self) -> bool {
        self.max_abs() == T::zero()
    }
}

/// Element `(O1, O2, O3)` of the orthogonal symmetry group.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement<T: Real>(pub(crate) [DMatrix<T>; 3]);

impl<T: Real> GroupElement<T> {
    pub fn new(o: [DMatrix<T>; 3]) -> Result<Self> {
        for m in &o {
            if m.nrows() != m.ncols() {
                return Err(Error::NotSquare {
                    rows: m.nrows(),
                    cols: m.ncols(),
                });
            }
            let dev = orthonormality_error(m);
            if dev > ortho_tol::<T>() * T::of(8.0) {
                return Err(Error::NotOrthogonal(dev.to_f64_lossy()));
            }
        }
        Ok(Self(o))
    }

    pub fn identity(ranks: [usize; 3]) -> Self {
        Self(ranks.map(|r| DMatrix::identity(r, r)))
    }

    pub fn matrices(&self) -> &[DMatrix<T>; 3] {
        &self.0
    }
}
