//! Eigensolvers, functional calculus and weighted operator norms.

pub mod ascent;
pub mod dense;
pub mod funcalc;
pub mod norms;
pub mod sparse;
pub mod tridiag;

pub use ascent::{
    ascend, multistart, AscentConfig, AscentOutcome, Block, Combine, MultiStartOutcome,
    RatioProblem, Side,
};
pub use dense::{eig_sym_dense, sym_eigenvalues, sym_max_eigenvalue};
pub use funcalc::{
    assemble_real, matrix_function, matrix_function_real, spectral_values, CMatrix, EigenSystem,
    KernelPolicy,
};
pub use norms::{
    opnorm, opnorm_complex, opnorm_p_to_q, weighted_norm, NormBounds, NormMethod, OpNormConfig,
};
pub use sparse::SparseMatrix;
pub use tridiag::{eig_sym_tridiag, eigvals_sym_tridiag, EigenPairs, SymTridiag};
