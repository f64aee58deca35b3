//! Dense and sparse kernels, the Adam optimizer and numerical oracles.

mod adam;
mod dense;
mod oracle;
mod sparse;

pub use adam::AdamState;
pub use dense::{dot, norm, sq_dist, DenseMatrix};
pub use oracle::{cosine, finite_diff_grad, Cosine, DEGENERATE_NORM};
pub use sparse::SparseMatrix;
