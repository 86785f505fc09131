//! Geometry of the Tucker quotient manifold under the preconditioned metric
//! `g_x(ξ, η) = Σ_d ⟨ξ_Ud, η_Ud G_d G_d^T⟩ + ⟨ξ_G, η_G⟩`, plus the plain
//! Euclidean product geometry used as a baseline.

mod point;

use nalgebra::DMatrix;

pub use point::{validate_shape, GroupElement, TuckerPoint, TuckerTangent};

use crate::error::{Error, Result};
use crate::random::{gaussian_matrix, gaussian_tensor, rng};
use crate::scalar::Real;
use crate::smallmat::{
    polar_factor, skew, sym, CoreGrams, SkewTriple, COUPLED_MAX_ITER, COUPLED_TOL,
};
use crate::tensor::DenseTensor3;

/// Numerical settings of the quotient geometry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuotientGeometry {
    /// Shift `G_d G_d^T` by a small multiple of the identity instead of
    /// failing on a degenerate core.
    pub ridge: bool,
    pub coupled_tol: f64,
    pub coupled_max_iter: usize,
}

impl Default for QuotientGeometry {
    fn default() -> Self {
        Self {
            ridge: false,
            coupled_tol: COUPLED_TOL,
            coupled_max_iter: COUPLED_MAX_ITER,
        }
    }
}

impl QuotientGeometry {
    pub fn grams<T: Real>(&self, x: &TuckerPoint<T>) -> Result<CoreGrams<T>> {
        CoreGrams::new(x.core(), self.ridge)
    }

    pub fn metric<T: Real>(&self, x: &TuckerPoint<T>, xi: &TuckerTangent<T>, eta: &TuckerTangent<T>) -> Result<T> {
        xi.check_shape(x)?;
        eta.check_shape(x)?;
        Ok(metric_with(&self.grams(x)?, xi, eta))
    }

    pub fn norm<T: Real>(&self, x: &TuckerPoint<T>, xi: &TuckerTangent<T>) -> Result<T> {
        Ok(self.metric(x, xi, xi)?.max(T::zero()).sqrt())
    }

    /// Ψ_x: projection of an ambient vector onto `T_x M`, orthogonal in
    /// the metric.
    pub fn project_tangent<T: Real>(&self, x: &TuckerPoint<T>, y: &TuckerTangent<T>) -> Result<TuckerTangent<T>> {
        y.check_shape(x)?;
        Ok(project_tangent_with(&self.grams(x)?, x, y))
    }

    /// Π_x: projection of a tangent vector onto the horizontal space.
    pub fn project_horizontal<T: Real>(&self, x: &TuckerPoint<T>, eta: &TuckerTangent<T>) -> Result<TuckerTangent<T>> {
        Ok(self.horizontal_split(x, eta)?.0)
    }

    /// Returns `(Π_x(η), Ω)` where `η − Π_x(η)` is the vertical vector
    /// generated by the skew triple `Ω`.
    pub fn horizontal_split<T: Real>(
        &self,
        x: &TuckerPoint<T>,
        eta: &TuckerTangent<T>,
    ) -> Result<(TuckerTangent<T>, SkewTriple<T>)> {
        eta.check_shape(x)?;
        let grams = self.grams(x)?;
        self.horizontal_split_with(&grams, x, eta)
    }

    pub(crate) fn horizontal_split_with<T: Real>(
        &self,
        grams: &CoreGrams<T>,
        x: &TuckerPoint<T>,
        eta: &TuckerTangent<T>,
    ) -> Result<(TuckerTangent<T>, SkewTriple<T>)> {
        let rhs = SkewTriple(std::array::from_fn(|m| {
            let u = x.factor(m + 1);
            let g = grams.unfolding(m);
            let eg = eta.core.unfold(m + 1).expect("valid mode");
            skew(&(u.transpose() * &eta.factors[m] * grams.gram(m))) - skew(&(eg * g.transpose()))
        }));
        let sol = grams.coupled_solve(&rhs, T::of(self.coupled_tol), self.coupled_max_iter)?;
        let omega = sol.omega;
        let factors = std::array::from_fn(|m| &eta.factors[m] - x.factor(m + 1) * &omega.0[m]);
        let core = eta.core.axpy(T::one(), &grams.core_rotation(&omega));
        Ok((TuckerTangent::new(factors, core), omega))
    }

    /// Vector transport `Π_y(Ψ_y(ξ))` with `y = R_x(η)`.
    pub fn transport<T: Real>(
        &self,
        x: &TuckerPoint<T>,
        eta: &TuckerTangent<T>,
        xi: &TuckerTangent<T>,
    ) -> Result<TuckerTangent<T>> {
        xi.check_shape(x)?;
        let y = retract(x, eta)?;
        self.transport_to(&y, xi)
    }

    /// Transport of `ξ` to an already retracted point `y`.
    pub fn transport_to<T: Real>(&self, y: &TuckerPoint<T>, xi: &TuckerTangent<T>) -> Result<TuckerTangent<T>> {
        xi.check_shape(y)?;
        let grams = self.grams(y)?;
        let tangent = project_tangent_with(&grams, y, xi);
        Ok(self.horizontal_split_with(&grams, y, &tangent)?.0)
    }

    /// Random horizontal tangent vector: a Gaussian ambient vector passed
    /// through Ψ and then Π.
    pub fn rand_tangent<T: Real>(&self, x: &TuckerPoint<T>, seed: u64) -> Result<TuckerTangent<T>> {
        let y = gaussian_ambient(x, seed);
        let t = self.project_tangent(x, &y)?;
        self.project_horizontal(x, &t)
    }
}

/// Preconditioned metric with precomputed Gram matrices.
pub fn metric_with<T: Real>(grams: &CoreGrams<T>, xi: &TuckerTangent<T>, eta: &TuckerTangent<T>) -> T {
    (0..3).fold(xi.core.dot(&eta.core), |acc, m| {
        acc + xi.factors[m].dot(&(&eta.factors[m] * grams.gram(m)))
    })
}

/// Ψ_x with precomputed Gram matrices: `Y_Ud − U_d S_d (G_d G_d^T)^{-1}`
/// where `S_d A + A S_d = A (Y_Ud^T U_d + U_d^T Y_Ud) A`.
pub fn project_tangent_with<T: Real>(
    grams: &CoreGrams<T>,
    x: &TuckerPoint<T>,
    y: &TuckerTangent<T>,
) -> TuckerTangent<T> {
    let factors = std::array::from_fn(|m| {
        let u = x.factor(m + 1);
        let yu = &y.factors[m];
        let uty = u.transpose() * yu;
        yu - u * grams.lyap(m).solve_scaled(&(&uty + uty.transpose()))
    });
    TuckerTangent::new(factors, y.core.clone())
}

pub fn metric<T: Real>(x: &TuckerPoint<T>, xi: &TuckerTangent<T>, eta: &TuckerTangent<T>) -> Result<T> {
    QuotientGeometry::default().metric(x, xi, eta)
}

pub fn project_tangent<T: Real>(x: &TuckerPoint<T>, y: &TuckerTangent<T>) -> Result<TuckerTangent<T>> {
    QuotientGeometry::default().project_tangent(x, y)
}

pub fn project_horizontal<T: Real>(x: &TuckerPoint<T>, eta: &TuckerTangent<T>) -> Result<TuckerTangent<T>> {
    QuotientGeometry::default().project_horizontal(x, eta)
}

pub fn transport<T: Real>(
    x: &TuckerPoint<T>,
    eta: &TuckerTangent<T>,
    xi: &TuckerTangent<T>,
) -> Result<TuckerTangent<T>> {
    QuotientGeometry::default().transport(x, eta, xi)
}

/// `R_x(ξ) = (uf(U1 + ξ_U1), uf(U2 + ξ_U2), uf(U3 + ξ_U3), G + ξ_G)`.
pub fn retract<T: Real>(x: &TuckerPoint<T>, xi: &TuckerTangent<T>) -> Result<TuckerPoint<T>> {
    xi.check_shape(x)?;
    let mut factors = Vec::with_capacity(3);
    for m in 0..3 {
        if xi.factors[m].iter().all(|v| *v == T::zero()) {
            factors.push(x.factor(m + 1).clone());
        } else {
            factors.push(polar_factor(&(x.factor(m + 1) + &xi.factors[m]))?);
        }
    }
    let [u1, u2, u3]: [DMatrix<T>; 3] = factors.try_into().expect("three factors");
    TuckerPoint::from_parts([u1, u2, u3], x.core().axpy(T::one(), &xi.core))
}

/// Vertical vector `(U_d Ω_d, −Σ_d G ×_d Ω_d)` generated by a skew triple.
pub fn vertical_vector<T: Real>(x: &TuckerPoint<T>, omega: &SkewTriple<T>) -> Result<TuckerTangent<T>> {
    if omega.ranks() != x.ranks() {
        return Err(Error::mismatch(format!(
            "skew triple ranks {:?}, point ranks {:?}",
            omega.ranks(),
            x.ranks()
        )));
    }
    let factors = std::array::from_fn(|m| x.factor(m + 1) * &omega.0[m]);
    let mut core = DenseTensor3::zeros(x.ranks());
    for (m, o) in omega.0.iter().enumerate() {
        core = core.axpy(-T::one(), &x.core().mode_product(o, m + 1)?);
    }
    Ok(TuckerTangent::new(factors, core))
}

/// `(U_d O_d, G ×1 O1^T ×2 O2^T ×3 O3^T)`.
pub fn group_act<T: Real>(x: &TuckerPoint<T>, o: &GroupElement<T>) -> Result<TuckerPoint<T>> {
    let tangent = TuckerTangent::new(x.factors().clone(), x.core().clone());
    let moved = group_act_tangent(&tangent, o)?;
    TuckerPoint::from_parts(moved.factors, moved.core)
}

/// `(ξ_Ud O_d, ξ_G ×1 O1^T ×2 O2^T ×3 O3^T)`.
pub fn group_act_tangent<T: Real>(xi: &TuckerTangent<T>, o: &GroupElement<T>) -> Result<TuckerTangent<T>> {
    let mut factors = Vec::with_capacity(3);
    let mut core = xi.core.clone();
    for m in 0..3 {
        let om = &o.0[m];
        if om.nrows() != xi.factors[m].ncols() {
            return Err(Error::mismatch(format!(
                "group element block {} is {}x{}, rank is {}",
                m + 1,
                om.nrows(),
                om.ncols(),
                xi.factors[m].ncols()
            )));
        }
        factors.push(&xi.factors[m] * om);
        core = core.mode_product(&om.transpose(), m + 1)?;
    }
    let factors: [DMatrix<T>; 3] = factors.try_into().expect("three factors");
    Ok(TuckerTangent::new(factors, core))
}

/// Largest `‖U_d^T ξ_Ud + ξ_Ud^T U_d‖_F / ‖ξ_Ud‖_F`.
pub fn tangent_defect<T: Real>(x: &TuckerPoint<T>, xi: &TuckerTangent<T>) -> T {
    (0..3).fold(T::zero(), |m, d| {
        let z = &xi.factors[d];
        let n = z.norm();
        if n == T::zero() {
            return m;
        }
        let utz = x.factor(d + 1).transpose() * z;
        m.max((&utz + utz.transpose()).norm() / n)
    })
}

/// Largest relative skew part of `G_d G_d^T ζ_Ud^T U_d + ζ_Gd G_d^T`.
pub fn horizontal_defect<T: Real>(x: &TuckerPoint<T>, zeta: &TuckerTangent<T>) -> Result<T> {
    let grams = CoreGrams::new(x.core(), false)?;
    let mut worst = T::zero();
    for m in 0..3 {
        let a = grams.gram(m) * zeta.factors[m].transpose() * x.factor(m + 1);
        let b = zeta.core.unfold(m + 1)? * grams.unfolding(m).transpose();
        let scale = a.norm() + b.norm();
        if scale > T::zero() {
            worst = worst.max(skew(&(a + b)).norm() / scale);
        }
    }
    Ok(worst)
}

/// Unscaled product metric.
pub fn euclid_metric<T: Real>(x: &TuckerPoint<T>, xi: &TuckerTangent<T>, eta: &TuckerTangent<T>) -> Result<T> {
    xi.check_shape(x)?;
    eta.check_shape(x)?;
    Ok(xi.euclid_dot(eta))
}

/// Euclidean product projection: `Z − U sym(U^T Z)` on each factor, core
/// unchanged.
pub fn euclid_project_tangent<T: Real>(x: &TuckerPoint<T>, y: &TuckerTangent<T>) -> Result<TuckerTangent<T>> {
    y.check_shape(x)?;
    let factors = std::array::from_fn(|m| {
        let u = x.factor(m + 1);
        &y.factors[m] - u * sym(&(u.transpose() * &y.factors[m]))
    });
    Ok(TuckerTangent::new(factors, y.core.clone()))
}

/// Random point: polar factors of Gaussian matrices and a Gaussian core.
pub fn rand_point<T: Real>(dims: [usize; 3], ranks: [usize; 3], seed: u64) -> Result<TuckerPoint<T>> {
    validate_shape(dims, ranks)?;
    let mut r = rng(seed);
    let mut factors = Vec::with_capacity(3);
    for d in 0..3 {
        factors.push(polar_factor(&gaussian_matrix::<T, _>(&mut r, dims[d], ranks[d]))?);
    }
    let core = gaussian_tensor(&mut r, ranks);
    let factors: [DMatrix<T>; 3] = factors.try_into().expect("three factors");
    TuckerPoint::from_parts(factors, core)
}

/// Gaussian vector in the ambient space at `x` (not projected).
pub fn gaussian_ambient<T: Real>(x: &TuckerPoint<T>, seed: u64) -> TuckerTangent<T> {
    let mut r = rng(seed);
    let factors = std::array::from_fn(|m| {
        let (n, k) = x.factor(m + 1).shape();
        gaussian_matrix(&mut r, n, k)
    });
    TuckerTangent::new(factors, gaussian_tensor(&mut r, x.ranks()))
}

pub fn rand_tangent<T: Real>(x: &TuckerPoint<T>, seed: u64) -> Result<TuckerTangent<T>> {
    QuotientGeometry::default().rand_tangent(x, seed)
}
