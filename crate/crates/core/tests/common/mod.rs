//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sparsedag::simulate::{random_sparse_dag, sample_covariance, sample_sem, SimConfig};
use sparsedag::{CovarianceMatrix, ScoreMode};

/// All parent-set structures on `p` nodes that are acyclic.
pub fn all_dags(p: usize) -> Vec<Vec<Vec<usize>>> {
    let pairs: Vec<(usize, usize)> = (0..p)
        .flat_map(|k| (0..p).filter(move |&j| j != k).map(move |j| (k, j)))
        .collect();
    let mut out = Vec::new();
    for mask in 0u64..(1 << pairs.len()) {
        let mut parents = vec![Vec::new(); p];
        for (bit, &(k, j)) in pairs.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                parents[j].push(k);
            }
        }
        if is_acyclic(&parents) {
            out.push(parents);
        }
    }
    out
}

pub fn is_acyclic(parents: &[Vec<usize>]) -> bool {
    let p = parents.len();
    let mut indeg: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut done = vec![false; p];
    for _ in 0..p {
        let Some(v) = (0..p).find(|&v| !done[v] && indeg[v] == 0) else {
            return false;
        };
        done[v] = true;
        for (j, ps) in parents.iter().enumerate() {
            if ps.contains(&v) {
                indeg[j] -= 1;
            }
        }
    }
    true
}

/// Least-squares weights by an LU solve of the normal equations.
pub fn ols_weights(sigma: &DMatrix<f64>, parents: &[Vec<usize>]) -> DMatrix<f64> {
    let p = sigma.nrows();
    let mut b = DMatrix::zeros(p, p);
    for (j, ps) in parents.iter().enumerate() {
        if ps.is_empty() {
            continue;
        }
        let a = DMatrix::from_fn(ps.len(), ps.len(), |r, c| sigma[(ps[r], ps[c])]);
        let rhs = DVector::from_fn(ps.len(), |r, _| sigma[(ps[r], j)]);
        let coef = a.lu().solve(&rhs).expect("solvable");
        for (r, &k) in ps.iter().enumerate() {
            b[(k, j)] = coef[r];
        }
    }
    b
}

/// Penalized score of the least-squares fit on a structure, from the matrix formulas directly.
pub fn brute_force_score(
    sigma: &DMatrix<f64>,
    parents: &[Vec<usize>],
    lambda2: f64,
    mode: ScoreMode,
) -> f64 {
    let p = sigma.nrows();
    let b = ols_weights(sigma, parents);
    let a = DMatrix::<f64>::identity(p, p) - &b;
    let edges: usize = parents.iter().map(Vec::len).sum();
    match mode {
        ScoreMode::EqualVariance => (&a * a.transpose() * sigma).trace() + lambda2 * edges as f64,
        ScoreMode::Profile => {
            // diagonal of Aᵀ Σ A holds the residual variances
            let omega = (a.transpose() * sigma * &a).diagonal();
            let theta = &a * DMatrix::from_diagonal(&omega.map(|w| 1.0 / w)) * a.transpose();
            let log_det = theta.clone().lu().determinant().ln();
            (&theta * sigma).trace() - log_det + lambda2 * edges as f64
        }
    }
}

/// An empirical covariance from a random sparse DAG.
pub fn random_sigma_hat(p: usize, seed: u64, n: usize) -> CovarianceMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s0 = rng.random_range(0..=p * (p - 1) / 2);
    let truth = random_sparse_dag(&SimConfig::new(p, s0, seed)).unwrap();
    sample_covariance(&sample_sem(&truth, n, seed ^ 0xabc).unwrap(), false).unwrap()
}

/// A random positive-definite matrix `A Aᵀ / p + 0.2 I`.
pub fn random_pd(p: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() / p as f64 + DMatrix::identity(p, p) * 0.2
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v.abs()).fold(0.0, f64::max)
}
