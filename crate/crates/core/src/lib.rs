//! Fixed-rank completion of 3-order tensors in Tucker format by Riemannian
//! nonlinear conjugate gradient on the quotient of the total space
//! `St(r1,n1) × St(r2,n2) × St(r3,n3) × R^{r1×r2×r3}` by the orthogonal
//! group, under a metric built from the block-diagonal part of the cost
//! Hessian.
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below name the double-precision instantiations used by the
//! benchmark harness and the command-line tool.

pub mod bench;
pub mod error;
pub mod manifold;
pub mod problem;
pub mod random;
pub mod scalar;
pub mod smallmat;
pub mod solver;
pub mod tensor;

pub use error::{Error, Result};
pub use manifold::{GroupElement, QuotientGeometry, TuckerPoint, TuckerTangent};
pub use problem::{CompletionProblem, DataSet};
pub use scalar::Real;
pub use smallmat::{SkewTriple, SymTriple};
pub use solver::{solve, GeometryKind, Method, RunStatus, RunTrace, SolverConfig};
pub use tensor::{DenseTensor3, IndexSet, SparseTensor3};

pub type DenseTensor3f64 = DenseTensor3<f64>;
pub type SparseTensor3f64 = SparseTensor3<f64>;
pub type TuckerPoint64 = TuckerPoint<f64>;
pub type TuckerTangent64 = TuckerTangent<f64>;
pub type CompletionProblem64 = CompletionProblem<f64>;

pub type DenseTensor3f32 = DenseTensor3<f32>;
pub type SparseTensor3f32 = SparseTensor3<f32>;
pub type TuckerPoint32 = TuckerPoint<f32>;
pub type CompletionProblem32 = CompletionProblem<f32>;
