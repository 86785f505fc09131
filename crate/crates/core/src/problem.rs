//! The completion cost, its sparse residual, gradients and the closed-form
//! step-size guess.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{euclid_project_tangent, project_tangent_with, QuotientGeometry, TuckerPoint, TuckerTangent};
use crate::scalar::Real;
use crate::tensor::{
    core_form, dot, reduce_entries, sparse_eval_values, sparse_partials, FactorRows, SparseTensor3,
};

/// Which held-out or training set to evaluate on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSet {
    Train,
    Test,
    Validation,
}

impl DataSet {
    fn name(self) -> &'static str {
        match self {
            DataSet::Train => "train",
            DataSet::Test => "test",
            DataSet::Validation => "validation",
        }
    }
}

/// Fixed-rank completion instance: observed entries `Ω` with values, the
/// target multilinear rank, and optional disjoint test/validation sets.
#[derive(Clone, Debug)]
pub struct CompletionProblem<T: Real> {
    ranks: [usize; 3],
    train: SparseTensor3<T>,
    test: Option<SparseTensor3<T>>,
    validation: Option<SparseTensor3<T>>,
}

impl<T: Real> CompletionProblem<T> {
    pub fn new(
        ranks: [usize; 3],
        train: SparseTensor3<T>,
        test: Option<SparseTensor3<T>>,
        validation: Option<SparseTensor3<T>>,
    ) -> Result<Self> {
        let dims = train.dims();
        crate::manifold::validate_shape(dims, ranks)?;
        if train.is_empty() {
            return Err(Error::invalid("train", "training set is empty"));
        }
        let sets: Vec<(&str, &SparseTensor3<T>)> = [("test", &test), ("validation", &validation)]
            .into_iter()
            .filter_map(|(n, s)| s.as_ref().map(|s| (n, s)))
            .collect();
        for (name, s) in &sets {
            if s.dims() != dims {
                return Err(Error::mismatch(format!("{name} set dims {:?}, train dims {dims:?}", s.dims())));
            }
            if !s.pattern().is_disjoint(train.pattern()) {
                return Err(Error::invalid(*name, "shares indices with the training set"));
            }
        }
        if let (Some(a), Some(b)) = (&test, &validation) {
            if !a.pattern().is_disjoint(b.pattern()) {
                return Err(Error::invalid("validation", "shares indices with the test set"));
            }
        }
        Ok(Self {
            ranks,
            train,
            test,
            validation,
        })
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.train.dims()
    }

    #[inline]
    pub fn ranks(&self) -> [usize; 3] {
        self.ranks
    }

    pub fn train(&self) -> &SparseTensor3<T> {
        &self.train
    }

    pub fn test(&self) -> Option<&SparseTensor3<T>> {
        self.test.as_ref()
    }

    pub fn validation(&self) -> Option<&SparseTensor3<T>> {
        self.validation.as_ref()
    }

    pub fn set(&self, which: DataSet) -> Option<&SparseTensor3<T>> {
        match which {
            DataSet::Train => Some(&self.train),
            DataSet::Test => self.test.as_ref(),
            DataSet::Validation => self.validation.as_ref(),
        }
    }

    fn check_point(&self, x: &TuckerPoint<T>) -> Result<()> {
        if x.dims() != self.dims() || x.ranks() != self.ranks {
            return Err(Error::mismatch(format!(
                "point has dims {:?} ranks {:?}, problem has dims {:?} ranks {:?}",
                x.dims(),
                x.ranks(),
                self.dims(),
                self.ranks
            )));
        }
        Ok(())
    }

    /// `S = (2/|Ω|) (P_Ω(model) − P_Ω(X*))`.
    pub fn residual(&self, x: &TuckerPoint<T>) -> Result<SparseTensor3<T>> {
        self.check_point(x)?;
        let model = sparse_eval_values(x, self.train.indices())?;
        Ok(self.residual_from_model(&model))
    }

    fn residual_from_model(&self, model: &[T]) -> SparseTensor3<T> {
        let scale = T::of(2.0) / T::of_usize(self.train.len());
        let values = model
            .iter()
            .zip(self.train.values())
            .map(|(&m, &y)| scale * (m - y))
            .collect();
        SparseTensor3::from_pattern(self.train.pattern().clone(), values).expect("same pattern")
    }

    /// Mean squared error over `Ω`; equal to the training MSE.
    pub fn cost(&self, x: &TuckerPoint<T>) -> Result<T> {
        self.mse_on(x, DataSet::Train)
    }

    /// `(1/|set|) Σ (model − truth)²` on the requested set.
    pub fn mse_on(&self, x: &TuckerPoint<T>, which: DataSet) -> Result<T> {
        self.check_point(x)?;
        let set = self.set(which).ok_or(Error::MissingSet(which.name()))?;
        if set.is_empty() {
            return Ok(T::zero());
        }
        let model = sparse_eval_values(x, set.indices())?;
        Ok(mse(&model, set.values()))
    }

    /// Riemannian gradient under the preconditioned metric with default
    /// geometry settings.
    pub fn riemannian_grad(&self, x: &TuckerPoint<T>) -> Result<TuckerTangent<T>> {
        Ok(self.cost_and_grad(x, &QuotientGeometry::default())?.1)
    }

    /// Cost and Riemannian gradient (horizontal lift) in one sparse pass:
    /// the partial derivatives scaled by `(G_d G_d^T)^{-1}` on the factor
    /// blocks, then projected by Ψ_x.
    pub fn cost_and_grad(&self, x: &TuckerPoint<T>, geom: &QuotientGeometry) -> Result<(T, TuckerTangent<T>)> {
        self.check_point(x)?;
        let model = sparse_eval_values(x, self.train.indices())?;
        let cost = mse(&model, self.train.values());
        let s = self.residual_from_model(&model);
        let partials = sparse_partials(&s, x)?;
        let grams = geom.grams(x)?;
        let factors = std::array::from_fn(|m| &partials.factors[m] * grams.lyap(m).inverse());
        let egrad = TuckerTangent::new(factors, partials.core);
        Ok((cost, project_tangent_with(&grams, x, &egrad)))
    }

    /// Cost and gradient for the Euclidean product metric (baseline).
    pub fn cost_and_euclid_grad(&self, x: &TuckerPoint<T>) -> Result<(T, TuckerTangent<T>)> {
        self.check_point(x)?;
        let model = sparse_eval_values(x, self.train.indices())?;
        let cost = mse(&model, self.train.values());
        let s = self.residual_from_model(&model);
        let partials = sparse_partials(&s, x)?;
        let egrad = TuckerTangent::new(partials.factors, partials.core);
        Ok((cost, euclid_project_tangent(x, &egrad)?))
    }

    /// Minimizer over `s` of `‖P_Ω(a + s b) − P_Ω(X*)‖²`, with `a` the model
    /// values and `b` the sum of the four first-order terms obtained by
    /// replacing one of `U1, U2, U3, G` with its `ξ` block. Returns the raw
    /// minimizer, which may be non-positive; callers decide the fallback.
    pub fn stepsize_guess(&self, x: &TuckerPoint<T>, xi: &TuckerTangent<T>) -> Result<T> {
        self.check_point(x)?;
        xi.check_shape(x)?;
        let (ab, bb) = self.directional_products(x, xi);
        if !(bb > T::zero()) {
            return Err(Error::DegenerateDirection);
        }
        Ok(ab / bb)
    }

    /// `(⟨y − a, b⟩_Ω, ⟨b, b⟩_Ω)`.
    fn directional_products(&self, x: &TuckerPoint<T>, xi: &TuckerTangent<T>) -> (T, T) {
        let r = x.ranks();
        let (r1, r2) = (r[0], r[1]);
        let rows: [FactorRows<T>; 3] = std::array::from_fn(|m| FactorRows::new(x.factor(m + 1)));
        let drows: [FactorRows<T>; 3] = std::array::from_fn(|m| FactorRows::new(&xi.factors[m]));
        let g = x.core().values();
        let dg = xi.core.values();
        let acc = reduce_entries(&self.train, 2, |acc, [i, j, k], y| {
            let (u, v, w) = (rows[0].row(i), rows[1].row(j), rows[2].row(k));
            let (du, dv, dw) = (drows[0].row(i), drows[1].row(j), drows[2].row(k));
            let (mut a, mut t1, mut t2, mut t3) = (T::zero(), T::zero(), T::zero(), T::zero());
            for c in 0..r[2] {
                let (mut ac, mut t1c, mut t2c) = (T::zero(), T::zero(), T::zero());
                for b in 0..r2 {
                    let col = &g[r1 * (b + r2 * c)..r1 * (b + r2 * c + 1)];
                    let gu = dot(u, col);
                    ac += v[b] * gu;
                    t1c += v[b] * dot(du, col);
                    t2c += dv[b] * gu;
                }
                a += w[c] * ac;
                t1 += w[c] * t1c;
                t2 += w[c] * t2c;
                t3 += dw[c] * ac;
            }
            let t4 = core_form(dg, r, u, v, w);
            let bval = t1 + t2 + t3 + t4;
            acc[0] += (y - a) * bval;
            acc[1] += bval * bval;
        });
        (acc[0], acc[1])
    }
}

fn mse<T: Real>(model: &[T], truth: &[T]) -> T {
    let sum = model
        .iter()
        .zip(truth)
        .fold(T::zero(), |acc, (&m, &y)| acc + (m - y) * (m - y));
    sum / T::of_usize(truth.len().max(1))
}
