//! Seeded Gaussian sampling helpers.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::StandardNormal;

use crate::scalar::Real;
use crate::tensor::DenseTensor3;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    T::of(rng.sample::<f64, _>(StandardNormal))
}

/// Column-major fill of an `n × r` standard Gaussian matrix.
pub fn gaussian_matrix<T: Real, R: Rng + ?Sized>(rng: &mut R, n: usize, r: usize) -> DMatrix<T> {
    DMatrix::from_fn(n, r, |_, _| gaussian(rng))
}

pub fn gaussian_tensor<T: Real, R: Rng + ?Sized>(rng: &mut R, dims: [usize; 3]) -> DenseTensor3<T> {
    DenseTensor3::from_fn(dims, |_, _, _| gaussian(rng))
}
