//! Synthetic completion instances: random low-rank ground truth, uniform
//! disjoint sampling of train/validation/test entries, optional
//! ill-conditioned cores and scaled Gaussian noise.

use nalgebra::DMatrix;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{rand_point, validate_shape, TuckerPoint};
use crate::problem::CompletionProblem;
use crate::random::{gaussian, gaussian_matrix, gaussian_tensor, rng};
use crate::scalar::Real;
use crate::smallmat::polar_factor;
use crate::tensor::{sparse_eval_values, DenseTensor3, IndexSet, SparseTensor3};

/// Fractions of the sampled entries going to train / validation / test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Split {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for Split {
    fn default() -> Self {
        Self {
            train: 0.5,
            validation: 0.0,
            test: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub dims: [usize; 3],
    pub ranks: [usize; 3],
    /// Oversampling ratio `|Ω| / dim_quotient`.
    pub os: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition_number: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_eps: Option<f64>,
    #[serde(default)]
    pub split: Split,
    #[serde(default)]
    pub seed: u64,
}

/// Dimension of the Tucker quotient manifold,
/// `Σ (n_d r_d − r_d²) + r1 r2 r3`.
pub fn dim_quotient(dims: [usize; 3], ranks: [usize; 3]) -> Result<usize> {
    validate_shape(dims, ranks)?;
    Ok((0..3).map(|d| dims[d] * ranks[d] - ranks[d] * ranks[d]).sum::<usize>() + ranks.iter().product::<usize>())
}

/// Sizes `(|Ω|, |V|, |Γ|)` of the three sampled sets.
pub fn set_sizes(spec: &InstanceSpec) -> Result<(usize, usize, usize)> {
    spec.validate()?;
    let train = (spec.os * dim_quotient(spec.dims, spec.ranks)? as f64).round() as usize;
    let other = |frac: f64| (train as f64 * frac / spec.split.train).round() as usize;
    let (val, test) = (other(spec.split.validation), other(spec.split.test));
    let total: u128 = spec.dims.iter().map(|&n| n as u128).product();
    if (train + val + test) as u128 > total {
        return Err(Error::invalid(
            "os",
            format!("needs {} sampled entries but the tensor has only {total}", train + val + test),
        ));
    }
    Ok((train, val, test))
}

impl InstanceSpec {
    pub fn new(dims: [usize; 3], ranks: [usize; 3], os: f64, seed: u64) -> Self {
        Self {
            dims,
            ranks,
            os,
            condition_number: None,
            noise_eps: None,
            split: Split::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_shape(self.dims, self.ranks)?;
        if !(self.os >= 1.0 && self.os.is_finite()) {
            return Err(Error::invalid("os", "must be a finite value ≥ 1"));
        }
        let s = self.split;
        if [s.train, s.validation, s.test].iter().any(|f| !(*f >= 0.0)) || !(s.train > 0.0) {
            return Err(Error::invalid("split", "fractions must be non-negative with train > 0"));
        }
        if ((s.train + s.validation + s.test) - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("split", "fractions must sum to 1"));
        }
        if let Some(c) = self.condition_number {
            if !(c >= 1.0 && c.is_finite()) {
                return Err(Error::invalid("condition_number", "must be a finite value ≥ 1"));
            }
            let r = self.ranks;
            if r[0] != r[1] || r[1] != r[2] {
                return Err(Error::invalid("condition_number", "superdiagonal cores need equal ranks"));
            }
            if r[0] == 1 && c != 1.0 {
                return Err(Error::invalid("condition_number", "rank-1 cores have condition number 1"));
            }
        }
        if let Some(e) = self.noise_eps {
            if !(e >= 0.0 && e.is_finite()) {
                return Err(Error::invalid("noise_eps", "must be finite and non-negative"));
            }
        }
        Ok(())
    }
}

/// A generated instance with its ground truth.
#[derive(Clone, Debug)]
pub struct Instance<T: Real> {
    pub problem: CompletionProblem<T>,
    pub truth: TuckerPoint<T>,
    /// `‖P_Ω(X*)‖_F²` of the noiseless training entries.
    pub clean_train_norm_sq: T,
    /// `‖perturbation‖_F` actually added to the training values.
    pub noise_norm: T,
}

impl<T: Real> Instance<T> {
    /// Test MSE expected from noise alone, `ε² ‖P_Ω(X*)‖_F² / |Γ|`.
    pub fn noise_floor(&self, eps: f64) -> Option<f64> {
        let test = self.problem.test()?;
        Some(eps * eps * self.clean_train_norm_sq.to_f64_lossy() / test.len() as f64)
    }
}

/// Superdiagonal core with values decaying geometrically from 1 to `1/c`.
pub fn conditioned_core<T: Real>(r: usize, c: f64) -> DenseTensor3<T> {
    let mut g = DenseTensor3::zeros([r, r, r]);
    for i in 0..r {
        let v = if r == 1 { 1.0 } else { c.powf(-(i as f64) / (r - 1) as f64) };
        g.set(i, i, i, T::of(v));
    }
    g
}

fn linear_to_multi(l: usize, dims: [usize; 3]) -> [usize; 3] {
    [l % dims[0], (l / dims[0]) % dims[1], l / (dims[0] * dims[1])]
}

/// Builds the instance; a pure function of the spec.
///
/// Random stream order: factors (modes 1–3), core, sampled indices, noise.
pub fn gen_instance<T: Real>(spec: &InstanceSpec) -> Result<Instance<T>> {
    let (n_train, n_val, n_test) = set_sizes(spec)?;
    let dims = spec.dims;
    let mut r = rng(spec.seed);

    let mut factors: Vec<DMatrix<T>> = Vec::with_capacity(3);
    for d in 0..3 {
        factors.push(polar_factor(&gaussian_matrix::<T, _>(&mut r, dims[d], spec.ranks[d]))?);
    }
    let core = match spec.condition_number {
        Some(c) => conditioned_core(spec.ranks[0], c),
        None => gaussian_tensor(&mut r, spec.ranks),
    };
    let factors: [DMatrix<T>; 3] = factors.try_into().expect("three factors");
    let truth = TuckerPoint::from_parts(factors, core)?;

    let total = dims[0] * dims[1] * dims[2];
    let picked = index::sample(&mut r, total, n_train + n_val + n_test).into_vec();
    let take = |range: std::ops::Range<usize>| -> Result<IndexSet> {
        IndexSet::new(dims, picked[range].iter().map(|&l| linear_to_multi(l, dims)).collect())
    };
    let omega = take(0..n_train)?;
    let val = take(n_train..n_train + n_val)?;
    let gamma = take(n_train + n_val..picked.len())?;

    let clean = sparse_eval_values(&truth, omega.indices())?;
    let clean_norm_sq = clean.iter().fold(T::zero(), |s, &v| s + v * v);
    let mut observed = clean;
    let mut noise_norm = T::zero();
    if let Some(eps) = spec.noise_eps.filter(|e| *e > 0.0) {
        let e: Vec<T> = (0..observed.len()).map(|_| gaussian(&mut r)).collect();
        let e_norm = e.iter().fold(T::zero(), |s, &v| s + v * v).sqrt();
        let scale = T::of(eps) * clean_norm_sq.sqrt() / e_norm;
        for (o, v) in observed.iter_mut().zip(&e) {
            *o += scale * *v;
        }
        noise_norm = scale * e_norm;
    }

    let train = SparseTensor3::from_pattern(omega, observed)?;
    let labelled = |set: IndexSet| -> Result<Option<SparseTensor3<T>>> {
        if set.is_empty() {
            return Ok(None);
        }
        let values = sparse_eval_values(&truth, set.indices())?;
        Ok(Some(SparseTensor3::from_pattern(set, values)?))
    };
    let problem = CompletionProblem::new(spec.ranks, train, labelled(gamma)?, labelled(val)?)?;
    Ok(Instance {
        problem,
        truth,
        clean_train_norm_sq: clean_norm_sq,
        noise_norm,
    })
}

/// Seed offset separating the starting point from the ground truth stream.
const INIT_STREAM: u64 = 0x5eed_0000_0000_0001;

/// Random starting point for a run with the given seed.
pub fn init_point<T: Real>(dims: [usize; 3], ranks: [usize; 3], seed: u64) -> Result<TuckerPoint<T>> {
    rand_point(dims, ranks, seed ^ INIT_STREAM)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quotient_dimension_examples() {
        assert_eq!(dim_quotient([100; 3], [10; 3]).unwrap(), 3700);
        assert_eq!(dim_quotient([2; 3], [1; 3]).unwrap(), 4);
        assert_eq!(dim_quotient([30; 3], [3; 3]).unwrap(), 270);
    }

    #[test]
    fn conditioned_core_ratio() {
        let g = conditioned_core::<f64>(5, 100.0);
        assert_eq!(g.get(0, 0, 0), 1.0);
        assert!((g.get(0, 0, 0) / g.get(4, 4, 4) - 100.0).abs() < 1e-12);
    }

    #[test]
    fn oversampling_too_large_names_field() {
        let spec = InstanceSpec::new([4; 3], [2; 3], 10.0, 0);
        match set_sizes(&spec) {
            Err(Error::Invalid { field, .. }) => assert_eq!(field, "os"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
