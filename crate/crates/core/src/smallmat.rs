//! Small `r × r` linear algebra: symmetric/skew parts, Lyapunov solves with
//! an SPD coefficient, the coupled Lyapunov system that defines the
//! horizontal projection, and the orthogonal polar factor.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::DenseTensor3;

/// Eigenvalue ratio below which `G_d G_d^T` is treated as singular.
pub const DEGENERATE_RATIO: f64 = 1e-12;
/// Default relative residual for the coupled Lyapunov solve.
pub const COUPLED_TOL: f64 = 1e-10;
/// Default iteration cap for the coupled Lyapunov solve.
pub const COUPLED_MAX_ITER: usize = 100;
/// Ridge scale used when regularization is enabled: `δ = 1e-10 · trace / r`.
pub const RIDGE_SCALE: f64 = 1e-10;

/// Tolerance for orthonormality checks, about 1e-12 in double precision.
pub fn ortho_tol<T: Real>() -> T {
    T::eps() * T::of(4096.0)
}

fn check_square<T: Real>(m: &DMatrix<T>) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

/// `(D - D^T) / 2`.
pub fn skew_part<T: Real>(d: &DMatrix<T>) -> Result<DMatrix<T>> {
    check_square(d)?;
    Ok(skew(d))
}

/// `(D + D^T) / 2`.
pub fn sym_part<T: Real>(d: &DMatrix<T>) -> Result<DMatrix<T>> {
    check_square(d)?;
    Ok(sym(d))
}

pub(crate) fn skew<T: Real>(d: &DMatrix<T>) -> DMatrix<T> {
    (d - d.transpose()) * T::of(0.5)
}

pub(crate) fn sym<T: Real>(d: &DMatrix<T>) -> DMatrix<T> {
    (d + d.transpose()) * T::of(0.5)
}

/// Frobenius inner product.
#[inline]
pub fn frob<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> T {
    a.dot(b)
}

/// Eigendecomposition of an SPD matrix `A`, reused for repeated solves of
/// `S A + A S = C` and for applying `A^{-1}`.
#[derive(Clone, Debug)]
pub struct SpdLyap<T: Real> {
    basis: DMatrix<T>,
    eigenvalues: DVector<T>,
}

impl<T: Real> SpdLyap<T> {
    /// Fails with [`Error::NotSpd`] when the smallest eigenvalue is below
    /// `DEGENERATE_RATIO` times the largest.
    pub fn new(a: &DMatrix<T>) -> Result<Self> {
        let r = check_square(a)?;
        let eig = SymmetricEigen::new(sym(a));
        let max = eig.eigenvalues.iter().copied().fold(T::zero(), |m, v| m.max(v));
        let min = eig.eigenvalues.iter().copied().fold(max, |m, v| m.min(v));
        if r == 0 || max <= T::zero() || min <= T::of(DEGENERATE_RATIO) * max {
            return Err(Error::NotSpd {
                min_eig: min.to_f64_lossy(),
                max_eig: max.to_f64_lossy(),
            });
        }
        Ok(Self {
            basis: eig.eigenvectors,
            eigenvalues: eig.eigenvalues,
        })
    }

    /// Like [`new`](Self::new) after adding `δ I` with
    /// `δ = RIDGE_SCALE · trace(A) / r`.
    pub fn with_ridge(a: &DMatrix<T>) -> Result<Self> {
        let r = check_square(a)?;
        let delta = T::of(RIDGE_SCALE) * a.trace() / T::of_usize(r.max(1));
        let shifted = a + DMatrix::identity(r, r) * delta;
        Self::new(&shifted)
    }

    pub fn eigenvalues(&self) -> &DVector<T> {
        &self.eigenvalues
    }

    /// Ratio of smallest to largest eigenvalue.
    pub fn eigen_ratio(&self) -> T {
        let max = self.eigenvalues.max();
        self.eigenvalues.min() / max
    }

    /// `S A^{-1}` where `S A + A S = A M A`, evaluated in the eigenbasis as
    /// `λ_i M_ij / (λ_i + λ_j)` so no eigenvalue is ever inverted.
    pub fn solve_scaled(&self, m: &DMatrix<T>) -> DMatrix<T> {
        let q = &self.basis;
        let mut w = q.transpose() * m * q;
        let r = w.nrows();
        for j in 0..r {
            for i in 0..r {
                let li = self.eigenvalues[i];
                w[(i, j)] *= li / (li + self.eigenvalues[j]);
            }
        }
        q * w * q.transpose()
    }

    /// Solves `S A + A S = C`. Symmetric (skew) `C` gives symmetric (skew) `S`.
    pub fn solve(&self, c: &DMatrix<T>) -> DMatrix<T> {
        let q = &self.basis;
        let mut m = q.transpose() * c * q;
        let r = m.nrows();
        for j in 0..r {
            for i in 0..r {
                m[(i, j)] /= self.eigenvalues[i] + self.eigenvalues[j];
            }
        }
        let s = q * m * q.transpose();
        if c == &c.transpose() {
            sym(&s)
        } else if c == &(-c.transpose()) {
            skew(&s)
        } else {
            s
        }
    }

    /// `A^{-1}`.
    pub fn inverse(&self) -> DMatrix<T> {
        let q = &self.basis;
        let inv = self.eigenvalues.map(|v| T::one() / v);
        q * DMatrix::from_diagonal(&inv) * q.transpose()
    }
}

/// Solves `S A + A S = C` for SPD `A`.
pub fn lyap_sym<T: Real>(a: &DMatrix<T>, c: &DMatrix<T>) -> Result<DMatrix<T>> {
    let r = check_square(a)?;
    if c.nrows() != r || c.ncols() != r {
        return Err(Error::mismatch(format!(
            "Lyapunov right-hand side is {}x{}, coefficient is {r}x{r}",
            c.nrows(),
            c.ncols()
        )));
    }
    Ok(SpdLyap::new(a)?.solve(c))
}

/// Orthogonal polar factor `A (A^T A)^{-1/2}` of a full-column-rank matrix,
/// via the eigendecomposition of the `r × r` Gram matrix. Falls back to a
/// QR factor (same column span, different rotation) if the result is not
/// orthonormal to working precision.
pub fn polar_factor<T: Real>(a: &DMatrix<T>) -> Result<DMatrix<T>> {
    let (n, r) = a.shape();
    if r > n {
        return Err(Error::mismatch(format!("polar factor of a wide {n}x{r} matrix")));
    }
    if r == 0 {
        return Ok(a.clone());
    }
    let gram = a.transpose() * a;
    let eig = SymmetricEigen::new(sym(&gram));
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(max > T::zero()) || min <= T::eps() * T::of_usize(n.max(r)) * max {
        return Err(Error::RankDeficient {
            min_eig: min.to_f64_lossy(),
            max_eig: max.to_f64_lossy(),
        });
    }
    let inv_sqrt = eig.eigenvalues.map(|v| T::one() / v.sqrt());
    let w = &eig.eigenvectors * DMatrix::from_diagonal(&inv_sqrt) * eig.eigenvectors.transpose();
    let p = a * w;
    let dev = orthonormality_error(&p);
    if dev > ortho_tol::<T>() * T::of_usize(r) {
        log::warn!("polar factor lost orthonormality ({dev:e}); using QR factor instead");
        return Ok(a.clone().qr().q());
    }
    Ok(p)
}

/// `‖A^T A − I‖_F`.
pub fn orthonormality_error<T: Real>(a: &DMatrix<T>) -> T {
    let r = a.ncols();
    (a.transpose() * a - DMatrix::identity(r, r)).norm()
}

macro_rules! matrix_triple {
    ($name:ident, $doc:literal) => {
        #[doc = $doc]
        #[derive(Clone, Debug, PartialEq)]
        pub struct $name<T: Real>(pub [DMatrix<T>; 3]);

        impl<T: Real> $name<T> {
            pub fn zeros(ranks: [usize; 3]) -> Self {
                Self(ranks.map(|r| DMatrix::zeros(r, r)))
            }

            pub fn dot(&self, other: &Self) -> T {
                (0..3).fold(T::zero(), |acc, d| acc + self.0[d].dot(&other.0[d]))
            }

            pub fn norm(&self) -> T {
                self.dot(self).sqrt()
            }

            /// `self + s * other`.
            pub fn axpy(&self, s: T, other: &Self) -> Self {
                Self(std::array::from_fn(|d| &self.0[d] + &other.0[d] * s))
            }

            pub fn scale(&self, s: T) -> Self {
                Self(std::array::from_fn(|d| &self.0[d] * s))
            }

            pub fn ranks(&self) -> [usize; 3] {
                std::array::from_fn(|d| self.0[d].nrows())
            }
        }
    };
}

matrix_triple!(SkewTriple, "Three skew-symmetric matrices `(Ω1, Ω2, Ω3)` of sizes `r1, r2, r3`.");
matrix_triple!(SymTriple, "Three symmetric matrices of sizes `r1, r2, r3`.");

impl<T: Real> SkewTriple<T> {
    /// Largest `‖Ω_d + Ω_d^T‖_F / ‖Ω_d‖_F` over the three blocks.
    pub fn skew_defect(&self) -> T {
        self.0.iter().fold(T::zero(), |m, o| {
            let n = o.norm();
            if n == T::zero() {
                m
            } else {
                m.max((o + o.transpose()).norm() / n)
            }
        })
    }

    fn project(&self) -> Self {
        Self(std::array::from_fn(|d| skew(&self.0[d])))
    }
}

impl<T: Real> SymTriple<T> {
    pub fn sym_defect(&self) -> T {
        self.0.iter().fold(T::zero(), |m, o| {
            let n = o.norm();
            if n == T::zero() {
                m
            } else {
                m.max((o - o.transpose()).norm() / n)
            }
        })
    }
}

/// Per-mode quantities of a core tensor: unfoldings `G_d`, Gram matrices
/// `G_d G_d^T` and their eigendecompositions.
#[derive(Clone, Debug)]
pub struct CoreGrams<T: Real> {
    core: DenseTensor3<T>,
    unfoldings: [DMatrix<T>; 3],
    grams: [DMatrix<T>; 3],
    lyap: [SpdLyap<T>; 3],
}

impl<T: Real> CoreGrams<T> {
    /// Fails with [`Error::DegenerateCore`] if some `G_d G_d^T` is singular
    /// to `DEGENERATE_RATIO`; with `ridge` a small shift is added first.
    pub fn new(core: &DenseTensor3<T>, ridge: bool) -> Result<Self> {
        let unfoldings = [core.unfold(1)?, core.unfold(2)?, core.unfold(3)?];
        let mut grams = unfoldings.clone().map(|u| &u * u.transpose());
        if ridge {
            for a in grams.iter_mut() {
                let r = a.nrows();
                let delta = T::of(RIDGE_SCALE) * a.trace() / T::of_usize(r.max(1));
                *a += DMatrix::identity(r, r) * delta;
            }
        }
        let [l1, l2, l3] = [0, 1, 2].map(|d| {
            SpdLyap::new(&grams[d]).map_err(|e| match e {
                Error::NotSpd { min_eig, max_eig } => Error::DegenerateCore {
                    mode: d + 1,
                    ratio: if max_eig > 0.0 { min_eig / max_eig } else { 0.0 },
                },
                other => other,
            })
        });
        let lyap = [l1?, l2?, l3?];
        Ok(Self {
            core: core.clone(),
            unfoldings,
            grams,
            lyap,
        })
    }

    pub fn core(&self) -> &DenseTensor3<T> {
        &self.core
    }

    /// `G_d` for 0-based mode `m`.
    pub fn unfolding(&self, m: usize) -> &DMatrix<T> {
        &self.unfoldings[m]
    }

    /// `G_d G_d^T` for 0-based mode `m`.
    pub fn gram(&self, m: usize) -> &DMatrix<T> {
        &self.grams[m]
    }

    pub fn lyap(&self, m: usize) -> &SpdLyap<T> {
        &self.lyap[m]
    }

    pub fn ranks(&self) -> [usize; 3] {
        self.core.dims()
    }

    /// `Σ_d G ×_d Ω_d`.
    pub fn core_rotation(&self, omega: &SkewTriple<T>) -> DenseTensor3<T> {
        let mut acc = DenseTensor3::zeros(self.core.dims());
        for (d, o) in omega.0.iter().enumerate() {
            let t = self.core.mode_product(o, d + 1).expect("rank-consistent triple");
            acc = acc.axpy(T::one(), &t);
        }
        acc
    }

    /// Off-diagonal block of the coupled operator: the contribution of
    /// `Ω_e` to equation `d` (0-based), `(G ×_e Ω_e)_(d) G_d^T`.
    fn coupling(&self, d: usize, e: usize, omega_e: &DMatrix<T>) -> DMatrix<T> {
        let rotated = self.core.mode_product(omega_e, e + 1).expect("rank-consistent triple");
        let unf = rotated.unfold(d + 1).expect("valid mode");
        skew(&(unf * self.unfoldings[d].transpose()))
    }

    /// Coupled Lyapunov operator on skew triples:
    /// `L(Ω)_d = A_d Ω_d + Ω_d A_d + Σ_{e≠d} (G ×_e Ω_e)_(d) G_d^T`,
    /// with `A_d = G_d G_d^T`. Self-adjoint and positive definite in the
    /// Frobenius inner product.
    pub fn coupled_apply(&self, omega: &SkewTriple<T>) -> SkewTriple<T> {
        SkewTriple(std::array::from_fn(|d| {
            let a = &self.grams[d];
            let o = &omega.0[d];
            let mut out = a * o + o * a;
            for e in (0..3).filter(|&e| e != d) {
                out += self.coupling(d, e, &omega.0[e]);
            }
            out
        }))
    }

    /// Symmetric block Gauss–Seidel sweep: forward over modes 1, 2, 3 with
    /// each decoupled Lyapunov block solved exactly, then backward.
    pub fn gauss_seidel(&self, rhs: &SkewTriple<T>) -> SkewTriple<T> {
        let ranks = self.ranks();
        let mut y: [DMatrix<T>; 3] = ranks.map(|r| DMatrix::zeros(r, r));
        for d in 0..3 {
            let mut b = rhs.0[d].clone();
            for e in 0..d {
                b -= self.coupling(d, e, &y[e]);
            }
            y[d] = self.lyap[d].solve(&b);
        }
        let mut z = y.clone();
        for d in (0..2).rev() {
            let mut b = rhs.0[d].clone();
            for e in 0..3 {
                if e < d {
                    b -= self.coupling(d, e, &y[e]);
                } else if e > d {
                    b -= self.coupling(d, e, &z[e]);
                }
            }
            z[d] = self.lyap[d].solve(&b);
        }
        SkewTriple(z)
    }

    /// Preconditioned CG on the coupled operator.
    pub fn coupled_pcg(&self, rhs: &SkewTriple<T>, tol: T, max_iter: usize) -> Result<CoupledSolution<T>> {
        let ranks = self.ranks();
        let bnorm = rhs.norm();
        let mut x = SkewTriple::zeros(ranks);
        if bnorm == T::zero() {
            return Ok(CoupledSolution {
                omega: x,
                iterations: 0,
                rel_residual: T::zero(),
            });
        }
        let mut r = rhs.clone();
        let mut z = self.gauss_seidel(&r);
        let mut p = z.clone();
        let mut rz = r.dot(&z);
        let mut restarted = false;
        for it in 1..=max_iter {
            let ap = self.coupled_apply(&p);
            let pap = p.dot(&ap);
            if !(pap > T::zero()) {
                break;
            }
            let alpha = rz / pap;
            debug_assert!(x.skew_defect() <= T::of(1e-8), "coupled CG iterate lost skewness");
            x = x.axpy(alpha, &p).project();
            r = r.axpy(-alpha, &ap);
            if r.norm() <= tol * bnorm {
                let true_res = rhs.axpy(-T::one(), &self.coupled_apply(&x));
                let rel = true_res.norm() / bnorm;
                if rel <= tol {
                    return Ok(CoupledSolution {
                        omega: x,
                        iterations: it,
                        rel_residual: rel,
                    });
                }
                if restarted {
                    r = true_res;
                } else {
                    restarted = true;
                    r = true_res;
                    z = self.gauss_seidel(&r);
                    p = z.clone();
                    rz = r.dot(&z);
                    continue;
                }
            }
            z = self.gauss_seidel(&r);
            let rz_new = r.dot(&z);
            let beta = rz_new / rz;
            rz = rz_new;
            p = z.axpy(beta, &p);
        }
        let res = rhs.axpy(-T::one(), &self.coupled_apply(&x)).norm() / bnorm;
        Err(Error::NoConvergence {
            iterations: max_iter,
            residual: res.to_f64_lossy(),
        })
    }

    /// Direct solve of the coupled system in the basis `E_ab − E_ba`
    /// (`a < b`) of each skew block.
    pub fn coupled_dense(&self, rhs: &SkewTriple<T>) -> Result<SkewTriple<T>> {
        let ranks = self.ranks();
        let basis = skew_basis(ranks);
        let m = basis.len();
        if m == 0 {
            return Ok(SkewTriple::zeros(ranks));
        }
        let images: Vec<SkewTriple<T>> = basis.iter().map(|b| self.coupled_apply(b)).collect();
        let k = DMatrix::from_fn(m, m, |i, j| basis[i].dot(&images[j]));
        let f = DVector::from_fn(m, |i, _| basis[i].dot(rhs));
        let coeffs = match k.clone().cholesky() {
            Some(ch) => ch.solve(&f),
            None => k
                .lu()
                .solve(&f)
                .ok_or(Error::NoConvergence { iterations: 0, residual: f64::INFINITY })?,
        };
        let mut out = SkewTriple::zeros(ranks);
        for (c, b) in coeffs.iter().zip(&basis) {
            out = out.axpy(*c, b);
        }
        Ok(out)
    }

    /// PCG with a direct-solve fallback when it fails to converge.
    pub fn coupled_solve(&self, rhs: &SkewTriple<T>, tol: T, max_iter: usize) -> Result<CoupledSolution<T>> {
        match self.coupled_pcg(rhs, tol, max_iter) {
            Ok(sol) => Ok(sol),
            Err(Error::NoConvergence { iterations, residual }) => {
                log::warn!(
                    "coupled Lyapunov PCG stalled after {iterations} iterations (residual {residual:e}); solving directly"
                );
                let omega = self.coupled_dense(rhs)?;
                let bnorm = rhs.norm();
                let rel = rhs.axpy(-T::one(), &self.coupled_apply(&omega)).norm() / bnorm;
                if rel <= tol.max(T::eps() * T::of(1e4)) {
                    Ok(CoupledSolution {
                        omega,
                        iterations,
                        rel_residual: rel,
                    })
                } else {
                    Err(Error::NoConvergence {
                        iterations,
                        residual: rel.to_f64_lossy(),
                    })
                }
            }
            Err(e) => Err(e),
        }
    }
}

/// Orthogonal basis `E_ab − E_ba`, `a < b`, of the skew triples.
pub fn skew_basis<T: Real>(ranks: [usize; 3]) -> Vec<SkewTriple<T>> {
    let mut out = Vec::new();
    for d in 0..3 {
        let r = ranks[d];
        for b in 0..r {
            for a in 0..b {
                let mut t = SkewTriple::zeros(ranks);
                t.0[d][(a, b)] = T::one();
                t.0[d][(b, a)] = -T::one();
                out.push(t);
            }
        }
    }
    out
}

/// Result of a coupled Lyapunov solve.
#[derive(Clone, Debug)]
pub struct CoupledSolution<T: Real> {
    pub omega: SkewTriple<T>,
    pub iterations: usize,
    pub rel_residual: T,
}

/// Solves the coupled Lyapunov equations at the core of `x` to relative
/// residual `tol`.
pub fn coupled_lyap_solve<T: Real>(
    x: &crate::manifold::TuckerPoint<T>,
    rhs: &SkewTriple<T>,
    tol: T,
    max_iter: usize,
) -> Result<SkewTriple<T>> {
    if rhs.ranks() != x.ranks() {
        return Err(Error::mismatch(format!(
            "skew triple ranks {:?} do not match point ranks {:?}",
            rhs.ranks(),
            x.ranks()
        )));
    }
    let grams = CoreGrams::new(x.core(), false)?;
    Ok(grams.coupled_solve(rhs, tol, max_iter)?.omega)
}
