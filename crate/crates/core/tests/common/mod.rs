//! Independent dense oracles shared by the integration tests. Everything
//! here goes through explicit unfoldings and Kronecker products rather than
//! the library's sparse kernels.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;
use tucker_completion::manifold::rand_point;
use tucker_completion::random::{gaussian, rng};
use tucker_completion::{DenseTensor3, SkewTriple, SparseTensor3, TuckerPoint};

pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// `(U_c ⊗ U_b)` pairing matching the mode-`d` unfolding.
pub fn kron_pair(x: &TuckerPoint<f64>, d: usize) -> DMatrix<f64> {
    let [u1, u2, u3] = x.factors();
    match d {
        1 => kron(u3, u2),
        2 => kron(u3, u1),
        _ => kron(u2, u1),
    }
}

pub fn dense_tucker(x: &TuckerPoint<f64>) -> DenseTensor3<f64> {
    let m = x.factor(1) * x.core().unfold(1).unwrap() * kron_pair(x, 1).transpose();
    DenseTensor3::fold(&m, 1, x.dims()).unwrap()
}

pub fn dense_kron_contract(s: &DenseTensor3<f64>, x: &TuckerPoint<f64>, d: usize) -> DMatrix<f64> {
    s.unfold(d).unwrap() * kron_pair(x, d) * x.core().unfold(d).unwrap().transpose()
}

pub fn dense_core_contract(s: &DenseTensor3<f64>, x: &TuckerPoint<f64>) -> DenseTensor3<f64> {
    let m = x.factor(1).transpose() * s.unfold(1).unwrap() * kron_pair(x, 1);
    DenseTensor3::fold(&m, 1, x.ranks()).unwrap()
}

/// Uniformly random distinct indices with Gaussian values.
pub fn rand_sparse(dims: [usize; 3], m: usize, seed: u64) -> SparseTensor3<f64> {
    let mut r = rng(seed);
    let total = dims.iter().product();
    let entries = index::sample(&mut r, total, m.min(total))
        .into_iter()
        .map(|l| {
            let idx = [l % dims[0], (l / dims[0]) % dims[1], l / (dims[0] * dims[1])];
            (idx, gaussian::<f64, _>(&mut r))
        })
        .collect();
    SparseTensor3::new(dims, entries).unwrap()
}

/// Random small shape with `r_d ≤ n_d`, `r_d ≤ r_e r_f` and `r_d ≤ max_r`.
pub fn rand_shape(seed: u64, max_n: usize, max_r: usize) -> ([usize; 3], [usize; 3]) {
    let mut r = rng(seed ^ 0xABCD);
    loop {
        let dims: [usize; 3] = std::array::from_fn(|_| r.random_range(2..=max_n));
        let ranks: [usize; 3] = std::array::from_fn(|d| r.random_range(1..=max_r.min(dims[d])));
        if (0..3).all(|d| ranks[d] <= ranks[(d + 1) % 3] * ranks[(d + 2) % 3]) {
            return (dims, ranks);
        }
    }
}

pub fn point(dims: [usize; 3], ranks: [usize; 3], seed: u64) -> TuckerPoint<f64> {
    rand_point(dims, ranks, seed).unwrap()
}

pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

pub fn rel_err_t(a: &DenseTensor3<f64>, b: &DenseTensor3<f64>) -> f64 {
    let diff = a.axpy(-1.0, b);
    diff.norm() / b.norm().max(f64::MIN_POSITIVE)
}

fn skew(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m - m.transpose()) * 0.5
}

/// Left-hand side of the coupled Lyapunov system written with explicit
/// Kronecker products:
/// `A_d Ω_d + Ω_d A_d − G_d (I ⊗ Ω_e) G_d^T − G_d (Ω_f ⊗ I) G_d^T`.
pub fn coupled_lhs_kron(core: &DenseTensor3<f64>, om: &SkewTriple<f64>) -> SkewTriple<f64> {
    let r = core.dims();
    let eye = |n: usize| DMatrix::<f64>::identity(n, n);
    let [o1, o2, o3] = &om.0;
    let couplings = [
        (kron(&eye(r[2]), o2), kron(o3, &eye(r[1]))),
        (kron(&eye(r[2]), o1), kron(o3, &eye(r[0]))),
        (kron(&eye(r[1]), o1), kron(o2, &eye(r[0]))),
    ];
    SkewTriple(std::array::from_fn(|m| {
        let g = core.unfold(m + 1).unwrap();
        let a = &g * g.transpose();
        let (k1, k2) = &couplings[m];
        &a * &om.0[m] + &om.0[m] * &a - &g * k1 * g.transpose() - &g * k2 * g.transpose()
    }))
}

/// Right-hand side `Skew(U_d^T η_Ud A_d) + Skew(G_d η_Gd^T)`.
pub fn coupled_rhs(x: &TuckerPoint<f64>, eta_u: &[DMatrix<f64>; 3], eta_g: &DenseTensor3<f64>) -> SkewTriple<f64> {
    SkewTriple(std::array::from_fn(|m| {
        let g = x.core().unfold(m + 1).unwrap();
        let a = &g * g.transpose();
        skew(&(x.factor(m + 1).transpose() * &eta_u[m] * a)) + skew(&(&g * eta_g.unfold(m + 1).unwrap().transpose()))
    }))
}

fn skew_coords(t: &SkewTriple<f64>) -> Vec<f64> {
    let mut out = Vec::new();
    for o in &t.0 {
        for b in 0..o.ncols() {
            for a in 0..b {
                out.push(o[(a, b)]);
            }
        }
    }
    out
}

fn from_coords(c: &[f64], ranks: [usize; 3]) -> SkewTriple<f64> {
    let mut t = SkewTriple::zeros(ranks);
    let mut it = c.iter();
    for d in 0..3 {
        for b in 0..ranks[d] {
            for a in 0..b {
                let v = *it.next().unwrap();
                t.0[d][(a, b)] = v;
                t.0[d][(b, a)] = -v;
            }
        }
    }
    t
}

/// Dense solve of the Kronecker-form system in upper-triangle coordinates.
pub fn coupled_solve_kron(core: &DenseTensor3<f64>, rhs: &SkewTriple<f64>) -> SkewTriple<f64> {
    let ranks = core.dims();
    let n: usize = ranks.iter().map(|r| r * (r - 1) / 2).sum();
    let mut m = DMatrix::zeros(n, n);
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        let col = skew_coords(&coupled_lhs_kron(core, &from_coords(&e, ranks)));
        for (i, v) in col.into_iter().enumerate() {
            m[(i, k)] = v;
        }
    }
    let b = nalgebra::DVector::from_vec(skew_coords(rhs));
    let c = m.lu().solve(&b).expect("nonsingular coupled system");
    from_coords(c.as_slice(), ranks)
}

pub fn triple_rel_err(a: &SkewTriple<f64>, b: &SkewTriple<f64>) -> f64 {
    a.axpy(-1.0, b).norm() / b.norm().max(f64::MIN_POSITIVE)
}
