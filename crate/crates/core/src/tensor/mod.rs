//! Dense linear algebra, block-tridiagonal Gaussian solves, PCA and
//! nearest-neighbor lookup.

mod block;
mod knn;
mod matrix;
mod pca;

pub use block::{block_tridiag_marginal_covs, block_tridiag_solve, BlockTridiagonal};
pub use knn::{nearest_index, nearest_neighbor, KeyBank};
pub use matrix::{dense_solve, matmul, Cholesky, Lu, Matrix, Vector};
pub(crate) use matrix::sq_dist;
pub use pca::{jacobi_eigen, pca_fit, Pca};
