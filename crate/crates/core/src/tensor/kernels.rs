use std::ops::Range;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{DenseTensor3, IndexSet, SparseTensor3};
use crate::error::{Error, Result};
use crate::manifold::TuckerPoint;
use crate::scalar::Real;

const MAX_CHUNKS: usize = 32;
const MIN_CHUNK: usize = 2048;

/// Fixed partition of `0..n` used by every reduction kernel. It depends on
/// `n` only, never on the thread count, so results are bit-identical
/// whether the chunks run serially or in parallel.
pub(crate) fn chunk_ranges(n: usize) -> Vec<Range<usize>> {
    let chunks = n.div_ceil(MIN_CHUNK).clamp(1, MAX_CHUNKS);
    let size = n.div_ceil(chunks).max(1);
    (0..chunks)
        .map(|c| (c * size).min(n)..((c + 1) * size).min(n))
        .filter(|r| !r.is_empty())
        .collect()
}

/// Row-major copy of a factor matrix so that `row(i)` is contiguous.
pub(crate) struct FactorRows<T> {
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> FactorRows<T> {
    pub(crate) fn new(m: &DMatrix<T>) -> Self {
        let t = m.transpose();
        Self {
            cols: m.ncols(),
            data: t.as_slice().to_vec(),
        }
    }

    #[inline]
    pub(crate) fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// `Σ_{a,b,c} G[a,b,c] u_a v_b w_c`, O(r1 r2 r3).
#[inline]
pub(crate) fn core_form<T: Real>(g: &[T], r: [usize; 3], u: &[T], v: &[T], w: &[T]) -> T {
    let (r1, r2) = (r[0], r[1]);
    let mut acc = T::zero();
    for (c, &wc) in w.iter().enumerate() {
        let mut inner = T::zero();
        for (b, &vb) in v.iter().enumerate() {
            let col = &g[r1 * (b + r2 * c)..r1 * (b + r2 * c + 1)];
            inner += vb * dot(u, col);
        }
        acc += wc * inner;
    }
    acc
}

fn check_dims<T: Real>(x: &TuckerPoint<T>, dims: [usize; 3]) -> Result<()> {
    if x.dims() != dims {
        return Err(Error::mismatch(format!(
            "point has dims {:?}, tensor has {dims:?}",
            x.dims()
        )));
    }
    Ok(())
}

/// `G ×1 U1 ×2 U2 ×3 U3` as a dense tensor.
pub fn tucker_to_dense<T: Real>(x: &TuckerPoint<T>) -> Result<DenseTensor3<T>> {
    x.core()
        .mode_product(x.factor(1), 1)?
        .mode_product(x.factor(2), 2)?
        .mode_product(x.factor(3), 3)
}

/// Values of the Tucker tensor at each index, without forming it densely.
pub fn sparse_eval_values<T: Real>(x: &TuckerPoint<T>, indices: &[[usize; 3]]) -> Result<Vec<T>> {
    let dims = x.dims();
    if let Some(idx) = indices.iter().find(|idx| idx.iter().zip(&dims).any(|(&i, &n)| i >= n)) {
        return Err(Error::IndexOutOfRange {
            i: idx[0],
            j: idx[1],
            k: idx[2],
            dims,
        });
    }
    let rows = [
        FactorRows::new(x.factor(1)),
        FactorRows::new(x.factor(2)),
        FactorRows::new(x.factor(3)),
    ];
    let g = x.core().values();
    let r = x.ranks();
    Ok(indices
        .par_iter()
        .with_min_len(MIN_CHUNK)
        .map(|&[i, j, k]| core_form(g, r, rows[0].row(i), rows[1].row(j), rows[2].row(k)))
        .collect())
}

/// `P_Ω(G ×1 U1 ×2 U2 ×3 U3)`.
pub fn sparse_eval_tucker<T: Real>(x: &TuckerPoint<T>, omega: &IndexSet) -> Result<SparseTensor3<T>> {
    check_dims(x, omega.dims())?;
    let values = sparse_eval_values(x, omega.indices())?;
    SparseTensor3::from_pattern(omega.clone(), values)
}

/// Runs `body` over the fixed chunk partition of the entries of `s`, each
/// chunk with a private zeroed buffer of length `len`, and sums the buffers
/// in chunk order.
pub(crate) fn reduce_entries<T, F>(s: &SparseTensor3<T>, len: usize, body: F) -> Vec<T>
where
    T: Real,
    F: Fn(&mut [T], [usize; 3], T) + Sync,
{
    let idx = s.indices();
    let vals = s.values();
    let partials: Vec<Vec<T>> = chunk_ranges(s.len())
        .into_par_iter()
        .map(|range| {
            let mut acc = vec![T::zero(); len];
            for e in range {
                body(&mut acc, idx[e], vals[e]);
            }
            acc
        })
        .collect();
    let mut out = vec![T::zero(); len];
    for p in partials {
        for (o, v) in out.iter_mut().zip(p) {
            *o += v;
        }
    }
    out
}

/// `S_d (U_c ⊗ U_b) G_d^T` for mode `d`, with `(U3 ⊗ U2)`, `(U3 ⊗ U1)`,
/// `(U2 ⊗ U1)` for modes 1, 2, 3. Each entry contributes
/// O(r1 r2 r3) work; no Kronecker product is formed.
pub fn sparse_kron_contract<T: Real>(
    s: &SparseTensor3<T>,
    x: &TuckerPoint<T>,
    d: usize,
) -> Result<DMatrix<T>> {
    let m = super::check_mode(d)?;
    check_dims(x, s.dims())?;
    let r = x.ranks();
    let (r1, r2) = (r[0], r[1]);
    let n = x.dims()[m];
    let rows = [
        FactorRows::new(x.factor(1)),
        FactorRows::new(x.factor(2)),
        FactorRows::new(x.factor(3)),
    ];
    let g = x.core().values();
    let acc = reduce_entries(s, n * r[m], |acc, [i, j, k], sv| {
        let (u, v, w) = (rows[0].row(i), rows[1].row(j), rows[2].row(k));
        match m {
            0 => {
                let out = &mut acc[i * r1..(i + 1) * r1];
                for (c, &wc) in w.iter().enumerate() {
                    for (b, &vb) in v.iter().enumerate() {
                        let coef = sv * wc * vb;
                        let col = &g[r1 * (b + r2 * c)..r1 * (b + r2 * c + 1)];
                        for (o, &gv) in out.iter_mut().zip(col) {
                            *o += coef * gv;
                        }
                    }
                }
            }
            1 => {
                let out = &mut acc[j * r2..(j + 1) * r2];
                for (c, &wc) in w.iter().enumerate() {
                    let coef = sv * wc;
                    for (b, o) in out.iter_mut().enumerate() {
                        let col = &g[r1 * (b + r2 * c)..r1 * (b + r2 * c + 1)];
                        *o += coef * dot(u, col);
                    }
                }
            }
            _ => {
                let r3 = r[2];
                let out = &mut acc[k * r3..(k + 1) * r3];
                for (c, o) in out.iter_mut().enumerate() {
                    let mut inner = T::zero();
                    for (b, &vb) in v.iter().enumerate() {
                        let col = &g[r1 * (b + r2 * c)..r1 * (b + r2 * c + 1)];
                        inner += vb * dot(u, col);
                    }
                    *o += sv * inner;
                }
            }
        }
    });
    Ok(DMatrix::from_row_slice(n, r[m], &acc))
}

/// `S ×1 U1^T ×2 U2^T ×3 U3^T`, accumulated entrywise.
pub fn sparse_core_contract<T: Real>(s: &SparseTensor3<T>, x: &TuckerPoint<T>) -> Result<DenseTensor3<T>> {
    check_dims(x, s.dims())?;
    let r = x.ranks();
    let rows = [
        FactorRows::new(x.factor(1)),
        FactorRows::new(x.factor(2)),
        FactorRows::new(x.factor(3)),
    ];
    let acc = reduce_entries(s, r.iter().product(), |acc, [i, j, k], sv| {
        add_outer(acc, sv, rows[0].row(i), rows[1].row(j), rows[2].row(k));
    });
    DenseTensor3::new(r, acc)
}

#[inline]
fn add_outer<T: Real>(acc: &mut [T], s: T, u: &[T], v: &[T], w: &[T]) {
    let (r1, r2) = (u.len(), v.len());
    for (c, &wc) in w.iter().enumerate() {
        for (b, &vb) in v.iter().enumerate() {
            let coef = s * wc * vb;
            let col = &mut acc[r1 * (b + r2 * c)..r1 * (b + r2 * c + 1)];
            for (o, &ua) in col.iter_mut().zip(u) {
                *o += coef * ua;
            }
        }
    }
}

/// All four Euclidean partial derivatives of `⟨S, G ×1 U1 ×2 U2 ×3 U3⟩`.
#[derive(Clone, Debug)]
pub struct Partials<T> {
    pub factors: [DMatrix<T>; 3],
    pub core: DenseTensor3<T>,
}

/// Fused single pass computing the three `sparse_kron_contract` products
/// and `sparse_core_contract`, sharing the per-entry contractions.
pub fn sparse_partials<T: Real>(s: &SparseTensor3<T>, x: &TuckerPoint<T>) -> Result<Partials<T>> {
    check_dims(x, s.dims())?;
    let r = x.ranks();
    let [n1, n2, n3] = x.dims();
    let (r1, r2, r3) = (r[0], r[1], r[2]);
    let rows = [
        FactorRows::new(x.factor(1)),
        FactorRows::new(x.factor(2)),
        FactorRows::new(x.factor(3)),
    ];
    let g = x.core().values();
    let off2 = n1 * r1;
    let off3 = off2 + n2 * r2;
    let offg = off3 + n3 * r3;
    let len = offg + r1 * r2 * r3;
    let acc = reduce_entries(s, len, |acc, [i, j, k], sv| {
        let (u, v, w) = (rows[0].row(i), rows[1].row(j), rows[2].row(k));
        let (a1, rest) = acc.split_at_mut(off2);
        let (a2, rest) = rest.split_at_mut(off3 - off2);
        let (a3, ag) = rest.split_at_mut(offg - off3);
        let o1 = &mut a1[i * r1..(i + 1) * r1];
        let o2 = &mut a2[j * r2..(j + 1) * r2];
        let o3 = &mut a3[k * r3..(k + 1) * r3];
        for (c, &wc) in w.iter().enumerate() {
            let mut inner3 = T::zero();
            for (b, &vb) in v.iter().enumerate() {
                let col = &g[r1 * (b + r2 * c)..r1 * (b + r2 * c + 1)];
                let du = dot(u, col);
                o2[b] += sv * wc * du;
                inner3 += vb * du;
                let coef = sv * wc * vb;
                for (o, &gv) in o1.iter_mut().zip(col) {
                    *o += coef * gv;
                }
            }
            o3[c] += sv * inner3;
        }
        add_outer(ag, sv, u, v, w);
    });
    Ok(Partials {
        factors: [
            DMatrix::from_row_slice(n1, r1, &acc[..off2]),
            DMatrix::from_row_slice(n2, r2, &acc[off2..off3]),
            DMatrix::from_row_slice(n3, r3, &acc[off3..offg]),
        ],
        core: DenseTensor3::new(r, acc[offg..].to_vec())?,
    })
}
