//! ℓ0-penalized maximum likelihood estimation of sparse Gaussian DAG models.
//!
//! The crate scores DAGs `(B, Ω)` against a covariance by the penalized
//! minus log-likelihood `l_n(Θ(B, Ω)) + λ² s_B`, searches for the minimizer
//! exactly (dynamic programming over node subsets) or greedily, and provides
//! the ordering-indexed population representations, condition checks and a
//! seeded simulation harness used to study the estimator.

// `!(x > 0.0)` style guards are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conditions;
pub mod error;
pub mod experiments;
pub mod io;
pub mod linalg;
pub mod model;
pub mod representation;
pub mod scoring;
pub mod search;
pub mod simulate;

pub use error::{Error, Result};
pub use model::{
    covariance_of, neg_log_likelihood, penalized_score, precision_of, topological_order,
    CovarianceKind, CovarianceMatrix, DagModel, Dataset, Ordering, PrecisionMatrix,
};
pub use representation::{
    edge_profile, equivalent, gram_schmidt_representation, minimal_edge_imap, EdgeProfile,
    OrderingSearch,
};
pub use scoring::{LocalScoreTable, ScoreMode};
pub use search::{fit_exact, fit_greedy, refit_parameters, FitResult, GreedyOptions, Method};
