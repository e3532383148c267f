//! Minimization of the penalized score over DAGs with bounded in-degree.

mod exact;
mod greedy;

pub use exact::fit_exact;
pub use greedy::{fit_greedy, GreedyOptions};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{topological_order, CovarianceMatrix, DagModel, Ordering};
use crate::scoring::{regression_coefficients, residual_variance, ScoreMode, VARIANCE_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Greedy,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Method::Exact),
            "greedy" => Ok(Method::Greedy),
            _ => Err(Error::InvalidInput(format!("unknown search method {s:?}"))),
        }
    }
}

/// An estimated DAG together with its score decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: DagModel,
    pub score: f64,
    pub s_hat: usize,
    pub pi_hat: Ordering,
    pub method: Method,
    pub mode: ScoreMode,
    pub lambda2: f64,
    pub parent_sets: Vec<Vec<usize>>,
    pub node_scores: Vec<f64>,
}

fn structure_matrix(structure: &[Vec<usize>]) -> Result<DMatrix<f64>> {
    let p = structure.len();
    let mut b = DMatrix::zeros(p, p);
    for (j, parents) in structure.iter().enumerate() {
        for &k in parents {
            if k >= p || k == j {
                return Err(Error::InvalidInput(format!(
                    "invalid parent {} of node {}",
                    k + 1,
                    j + 1
                )));
            }
            b[(k, j)] = 1.0;
        }
    }
    Ok(b)
}

/// The lexicographically smallest ordering compatible with a structure.
pub fn structure_ordering(structure: &[Vec<usize>]) -> Result<Ordering> {
    topological_order(&structure_matrix(structure)?)
}

/// Least-squares weights on a fixed structure.
///
/// `Ω̂_j` is the residual variance in profile mode (floored like the profile
/// score) and one in equal-variance mode.
pub fn refit_parameters(
    structure: &[Vec<usize>],
    sigma_hat: &CovarianceMatrix,
    mode: ScoreMode,
) -> Result<DagModel> {
    let p = sigma_hat.p();
    if structure.len() != p {
        return Err(Error::Dimension(format!(
            "structure has {} nodes, covariance has {p}",
            structure.len()
        )));
    }
    topological_order(&structure_matrix(structure)?)?;
    let floor = VARIANCE_FLOOR * sigma_hat.max_variance();
    let mut b = DMatrix::zeros(p, p);
    let mut omega = DVector::zeros(p);
    for (j, parents) in structure.iter().enumerate() {
        let coef = regression_coefficients(j, parents, sigma_hat)?;
        for (&k, &c) in parents.iter().zip(coef.iter()) {
            b[(k, j)] = c;
        }
        omega[j] = match mode {
            ScoreMode::Profile => residual_variance(j, parents, sigma_hat)?.max(floor),
            ScoreMode::EqualVariance => 1.0,
        };
    }
    DagModel::new(b, omega)
}

pub(crate) fn assemble(
    structure: Vec<Vec<usize>>,
    node_scores: Vec<f64>,
    sigma_hat: &CovarianceMatrix,
    mode: ScoreMode,
    lambda2: f64,
    method: Method,
) -> Result<FitResult> {
    let model = refit_parameters(&structure, sigma_hat, mode)?;
    let pi_hat = structure_ordering(&structure)?;
    Ok(FitResult {
        score: node_scores.iter().sum(),
        s_hat: structure.iter().map(Vec::len).sum(),
        pi_hat,
        method,
        mode,
        lambda2,
        parent_sets: structure,
        node_scores,
        model,
    })
}
