//! Dense linear algebra kernels and generic convex solvers.

mod decomp;
mod lp;
mod matrix;
mod prox;

pub use decomp::{
    generalized_eig_psd, kernel_basis, range_basis, rank_tolerance, smallest_nonzero_singular_value, solve,
    spectral_norm, svd, symmetric_eig, Cholesky, SvdResult, SymmetricEigen,
};
pub use lp::{min_l1_equality, residual, solve_lp, LpProblem, LpSolution, LpStatus};
pub use matrix::{
    add, compensated_sum, dot, l1_tail, norm1, norm2, norm_inf, norm_p, scale, sub, top_k_indices, top_k_norm2,
    DenseMatrix, Vector,
};
pub use prox::{project_affine, project_l2_ball, prox_l1};
pub(crate) use prox::{project_ball_in_place, soft};
