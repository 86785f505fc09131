//! Dense and sparse 3-order tensors, unfoldings, mode products and the
//! sparse contraction kernels whose cost is linear in the number of
//! observed entries.
//!
//! Unfolding convention (0-based): mode-1 maps `(i1, i2, i3)` to row `i1`,
//! column `i2 + i3 * n2`; mode-2 to row `i2`, column `i1 + i3 * n1`;
//! mode-3 to row `i3`, column `i1 + i2 * n1`. With this ordering a Tucker
//! tensor satisfies `X_1 = U1 G_1 (U3 ⊗ U2)^T`.

mod dense;
mod kernels;
mod sparse;

pub use dense::{check_mode, DenseTensor3};
pub use kernels::{
    sparse_core_contract, sparse_eval_tucker, sparse_eval_values, sparse_kron_contract,
    sparse_partials, tucker_to_dense, Partials,
};
pub(crate) use kernels::{core_form, dot, reduce_entries, FactorRows};
pub use sparse::{IndexSet, SparseTensor3};
