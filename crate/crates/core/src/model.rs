//! Gaussian DAG / linear SEM data model and the likelihood it is scored by.
//!
//! Orientation convention used throughout the crate: entry `(k, j)` of the
//! weight matrix `B` is the coefficient of parent `X_k` in the structural
//! equation of child `X_j`, so column `j` of `B` holds the regression of
//! `X_j` on its parents. An [`Ordering`] `π = (π_1, …, π_p)` lists nodes so
//! that parents always come later: `π_p` is eliminated first by
//! Gram-Schmidt and `π_1` is projected on everything else. `B` is strictly
//! lower triangular after permuting rows and columns by `π`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// A permutation of the node set, stored 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Ordering(Vec<usize>);

impl Ordering {
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let p = perm.len();
        let mut seen = vec![false; p];
        for &v in &perm {
            if v >= p || seen[v] {
                return Err(Error::InvalidInput(format!(
                    "{perm:?} is not a permutation of 0..{p}"
                )));
            }
            seen[v] = true;
        }
        Ok(Ordering(perm))
    }

    pub fn identity(p: usize) -> Self {
        Ordering((0..p).collect())
    }

    /// Parses a comma-separated list of 1-based node labels, e.g. `"3,1,2"`.
    pub fn parse_one_based(s: &str) -> Result<Self> {
        let perm = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .ok()
                    .filter(|&v| v >= 1)
                    .map(|v| v - 1)
                    .ok_or_else(|| Error::InvalidInput(format!("bad node label {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ordering::new(perm)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.0.iter().map(|v| v + 1).collect()
    }

    /// `pos[v]` is the index of node `v` in the ordering.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.0.len()];
        for (i, &v) in self.0.iter().enumerate() {
            pos[v] = i;
        }
        pos
    }

    /// Whether every edge `k → j` of `b` has `k` later than `j` in the ordering.
    pub fn is_compatible(&self, b: &DMatrix<f64>) -> bool {
        let pos = self.positions();
        let p = self.len();
        (0..p).all(|k| (0..p).all(|j| b[(k, j)] == 0.0 || pos[k] > pos[j]))
    }
}

impl TryFrom<Vec<usize>> for Ordering {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Ordering::new(v)
    }
}

impl From<Ordering> for Vec<usize> {
    fn from(o: Ordering) -> Self {
        o.0
    }
}

impl fmt::Display for Ordering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<String> = self.0.iter().map(|v| (v + 1).to_string()).collect();
        write!(f, "{}", labels.join(","))
    }
}

/// Edge weights `B` (zero diagonal, acyclic) and noise variances `Ω > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DagModel {
    b: DMatrix<f64>,
    omega: DVector<f64>,
}

impl DagModel {
    pub fn new(b: DMatrix<f64>, omega: DVector<f64>) -> Result<Self> {
        let p = b.nrows();
        if !b.is_square() || omega.len() != p {
            return Err(Error::Dimension(format!(
                "B is {}x{} but Omega has {} entries",
                b.nrows(),
                b.ncols(),
                omega.len()
            )));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("B has non-finite entries".into()));
        }
        for j in 0..p {
            if b[(j, j)] != 0.0 {
                return Err(Error::InvalidInput(format!(
                    "diagonal entry ({0},{0}) of B is non-zero",
                    j + 1
                )));
            }
            if !(omega[j] > 0.0) || !omega[j].is_finite() {
                return Err(Error::NonPositiveVariance {
                    node: j + 1,
                    value: omega[j],
                });
            }
        }
        topological_order(&b)?;
        Ok(DagModel { b, omega })
    }

    /// The graph with no edges and the given noise variances.
    pub fn empty(omega: DVector<f64>) -> Result<Self> {
        let p = omega.len();
        DagModel::new(DMatrix::zeros(p, p), omega)
    }

    pub fn p(&self) -> usize {
        self.b.nrows()
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn omega(&self) -> &DVector<f64> {
        &self.omega
    }

    /// `s_B`, the number of non-zero edge weights.
    pub fn edge_count(&self) -> usize {
        self.b.iter().filter(|v| **v != 0.0).count()
    }

    pub fn parents(&self, j: usize) -> Vec<usize> {
        (0..self.p()).filter(|&k| self.b[(k, j)] != 0.0).collect()
    }

    pub fn parent_sets(&self) -> Vec<Vec<usize>> {
        (0..self.p()).map(|j| self.parents(j)).collect()
    }

    pub fn support(&self) -> Vec<(usize, usize)> {
        let p = self.p();
        let mut out = Vec::new();
        for k in 0..p {
            for j in 0..p {
                if self.b[(k, j)] != 0.0 {
                    out.push((k, j));
                }
            }
        }
        out
    }

    /// Relabels nodes: node `v` of `self` becomes node `perm[v]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<DagModel> {
        let p = self.p();
        let mut b = DMatrix::zeros(p, p);
        let mut omega = DVector::zeros(p);
        for k in 0..p {
            omega[perm[k]] = self.omega[k];
            for j in 0..p {
                b[(perm[k], perm[j])] = self.b[(k, j)];
            }
        }
        DagModel::new(b, omega)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CovarianceKind {
    Population,
    Empirical { n: usize },
}

/// Symmetric positive semi-definite `Σ₀` or `Σₙ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    matrix: DMatrix<f64>,
    kind: CovarianceKind,
}

impl CovarianceMatrix {
    fn checked(matrix: &DMatrix<f64>, kind: CovarianceKind) -> Result<Self> {
        let matrix = linalg::symmetrize(matrix)?;
        if let Some(j) = (0..matrix.nrows()).find(|&j| matrix[(j, j)] < 0.0) {
            return Err(Error::InvalidInput(format!(
                "diagonal entry {} is negative",
                j + 1
            )));
        }
        Ok(CovarianceMatrix { matrix, kind })
    }

    pub fn population(matrix: &DMatrix<f64>) -> Result<Self> {
        Self::checked(matrix, CovarianceKind::Population)
    }

    pub fn empirical(matrix: &DMatrix<f64>, n: usize) -> Result<Self> {
        Self::checked(matrix, CovarianceKind::Empirical { n })
    }

    pub fn p(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn kind(&self) -> CovarianceKind {
        self.kind
    }

    pub fn sample_size(&self) -> Option<usize> {
        match self.kind {
            CovarianceKind::Empirical { n } => Some(n),
            CovarianceKind::Population => None,
        }
    }

    pub fn is_population(&self) -> bool {
        self.kind == CovarianceKind::Population
    }

    /// `σ₀²` as the largest diagonal entry.
    pub fn max_variance(&self) -> f64 {
        self.matrix.diagonal().iter().copied().fold(0.0, f64::max)
    }

    /// `Λ_min²`, the smallest eigenvalue.
    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_eigenvalue(&self.matrix)
    }

    pub fn relabel(&self, perm: &[usize]) -> CovarianceMatrix {
        let p = self.p();
        let mut m = DMatrix::zeros(p, p);
        for i in 0..p {
            for j in 0..p {
                m[(perm[i], perm[j])] = self.matrix[(i, j)];
            }
        }
        CovarianceMatrix {
            matrix: m,
            kind: self.kind,
        }
    }

    /// Restriction to the listed nodes, in the given order.
    pub fn restrict(&self, nodes: &[usize]) -> CovarianceMatrix {
        CovarianceMatrix {
            matrix: linalg::submatrix(&self.matrix, nodes, nodes),
            kind: self.kind,
        }
    }
}

/// Symmetric positive-definite `Θ = Σ⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionMatrix(DMatrix<f64>);

impl PrecisionMatrix {
    pub fn new(matrix: &DMatrix<f64>) -> Result<Self> {
        let m = linalg::symmetrize(matrix)?;
        if m.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite("precision matrix".into()));
        }
        Ok(PrecisionMatrix(m))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn p(&self) -> usize {
        self.0.nrows()
    }
}

/// An `n × p` matrix of observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    seed: Option<u64>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, seed: Option<u64>) -> Result<Self> {
        if x.nrows() < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 observations, got {}",
                x.nrows()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("dataset has non-finite entries".into()));
        }
        Ok(Dataset { x, seed })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }
}

/// `Θ = (I − B) Ω⁻¹ (I − B)ᵀ`.
pub fn precision_of(model: &DagModel) -> PrecisionMatrix {
    let p = model.p();
    let a = DMatrix::<f64>::identity(p, p) - model.b();
    let inv_omega = DMatrix::from_diagonal(&model.omega().map(|w| 1.0 / w));
    let theta = &a * inv_omega * a.transpose();
    PrecisionMatrix((&theta + theta.transpose()) * 0.5)
}

/// `(I − B)⁻¹` for an acyclic `B`, computed by substitution along a topological order.
fn unit_inverse(model: &DagModel) -> DMatrix<f64> {
    let p = model.p();
    let b = model.b();
    let order = topological_order(b).expect("DagModel is acyclic");
    // X = E (I - B)^{-1}; column j of the inverse expresses X_j in the noise terms.
    let mut inv = DMatrix::<f64>::identity(p, p);
    for &j in order.as_slice().iter().rev() {
        for k in 0..p {
            let w = b[(k, j)];
            if w != 0.0 {
                for r in 0..p {
                    inv[(r, j)] += w * inv[(r, k)];
                }
            }
        }
    }
    inv
}

/// `Σ = [(I − B)⁻¹]ᵀ Ω (I − B)⁻¹`.
pub fn covariance_of(model: &DagModel) -> CovarianceMatrix {
    let inv = unit_inverse(model);
    let sigma = inv.transpose() * DMatrix::from_diagonal(model.omega()) * &inv;
    CovarianceMatrix {
        matrix: (&sigma + sigma.transpose()) * 0.5,
        kind: CovarianceKind::Population,
    }
}

/// Minus log-likelihood `l_n(Θ) = trace(Θ Σₙ) − log det Θ` (constants dropped).
pub fn neg_log_likelihood(theta: &PrecisionMatrix, sigma_hat: &CovarianceMatrix) -> Result<f64> {
    if theta.p() != sigma_hat.p() {
        return Err(Error::Dimension(format!(
            "precision is {0}x{0}, covariance is {1}x{1}",
            theta.p(),
            sigma_hat.p()
        )));
    }
    let trace = theta.matrix().component_mul(sigma_hat.matrix()).sum();
    Ok(trace - linalg::log_det_spd(theta.matrix())?)
}

/// `l_n(Θ(B, Ω)) + λ² s_B`.
pub fn penalized_score(
    model: &DagModel,
    sigma_hat: &CovarianceMatrix,
    lambda2: f64,
) -> Result<f64> {
    if !(lambda2 >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "lambda2 = {lambda2} must be >= 0"
        )));
    }
    let theta = precision_of(model);
    Ok(neg_log_likelihood(&theta, sigma_hat)? + lambda2 * model.edge_count() as f64)
}

/// An ordering under which `b` is strictly lower triangular.
///
/// Positions are filled from `π_1` upward, each time with the smallest-index
/// node that has no remaining children. The result is the lexicographically
/// smallest compatible ordering.
pub fn topological_order(b: &DMatrix<f64>) -> Result<Ordering> {
    if !b.is_square() {
        return Err(Error::Dimension(format!(
            "B is {}x{}",
            b.nrows(),
            b.ncols()
        )));
    }
    let p = b.nrows();
    let mut children = vec![0usize; p];
    for k in 0..p {
        for j in 0..p {
            if k != j && b[(k, j)] != 0.0 {
                children[k] += 1;
            }
        }
    }
    let mut placed = vec![false; p];
    let mut perm = Vec::with_capacity(p);
    for _ in 0..p {
        let Some(s) = (0..p).find(|&v| !placed[v] && children[v] == 0) else {
            return Err(Error::Cycle(find_cycle(b, &placed)));
        };
        placed[s] = true;
        perm.push(s);
        for k in 0..p {
            if k != s && b[(k, s)] != 0.0 {
                children[k] -= 1;
            }
        }
    }
    Ok(Ordering(perm))
}

/// Every unplaced node has an unplaced child, so walking children must revisit a node.
fn find_cycle(b: &DMatrix<f64>, placed: &[bool]) -> Vec<usize> {
    let p = b.nrows();
    let start = (0..p).find(|&v| !placed[v]).unwrap_or(0);
    let mut path = vec![start];
    let mut on_path = vec![usize::MAX; p];
    on_path[start] = 0;
    let mut cur = start;
    loop {
        let next = (0..p)
            .find(|&j| j != cur && !placed[j] && b[(cur, j)] != 0.0)
            .expect("unplaced node without unplaced child");
        if on_path[next] != usize::MAX {
            return path[on_path[next]..].iter().map(|v| v + 1).collect();
        }
        on_path[next] = path.len();
        path.push(next);
        cur = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::ar1_model;

    fn ar1_sigma(p: usize, beta: f64) -> DMatrix<f64> {
        DMatrix::from_fn(p, p, |i, j| beta.powi((i as i32 - j as i32).abs()))
    }

    #[test]
    fn identity_precision() {
        let m = DagModel::empty(DVector::from_element(3, 1.0)).unwrap();
        assert_eq!(precision_of(&m).matrix(), &DMatrix::identity(3, 3));
    }

    #[test]
    fn diagonal_covariance() {
        let m = DagModel::empty(DVector::from_vec(vec![2.0, 3.0])).unwrap();
        let s = covariance_of(&m);
        assert_eq!(
            s.matrix(),
            &DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]))
        );
    }

    #[test]
    fn ar1_precision_inverts_toeplitz() {
        let m = ar1_model(3, 0.5).unwrap();
        let theta = precision_of(&m);
        let prod = theta.matrix() * ar1_sigma(3, 0.5);
        assert!(linalg::max_abs_diff(&prod, &DMatrix::identity(3, 3)) < 1e-12);
    }

    #[test]
    fn ar1_covariance_toeplitz() {
        let m = ar1_model(4, 0.5).unwrap();
        let s = covariance_of(&m);
        assert!(linalg::max_abs_diff(s.matrix(), &ar1_sigma(4, 0.5)) < 1e-12);
    }

    #[test]
    fn likelihood_trivial_values() {
        let eye = DMatrix::<f64>::identity(3, 3);
        let theta = PrecisionMatrix::new(&eye).unwrap();
        let sigma = CovarianceMatrix::empirical(&eye, 10).unwrap();
        assert!((neg_log_likelihood(&theta, &sigma).unwrap() - 3.0).abs() < 1e-15);

        let m = ar1_model(3, 0.5).unwrap();
        let l = neg_log_likelihood(&precision_of(&m), &covariance_of(&m)).unwrap();
        assert!((l - (3.0 + (0.75f64 * 0.75).ln())).abs() < 1e-12);
    }

    #[test]
    fn non_pd_precision_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            PrecisionMatrix::new(&m),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn penalized_zero_lambda_is_likelihood() {
        let m = ar1_model(3, 0.5).unwrap();
        let s = covariance_of(&m);
        let a = penalized_score(&m, &s, 0.0).unwrap();
        let b = neg_log_likelihood(&precision_of(&m), &s).unwrap();
        assert_eq!(a, b);
        let c = penalized_score(&m, &s, 0.25).unwrap();
        assert!((c - a - 0.5).abs() < 1e-12);
    }

    #[test]
    fn topological_order_examples() {
        assert_eq!(
            topological_order(&DMatrix::zeros(4, 4)).unwrap(),
            Ordering::identity(4)
        );
        let chain = ar1_model(3, 0.5).unwrap();
        let order = topological_order(chain.b()).unwrap();
        assert_eq!(order, Ordering::identity(3));
        assert!(order.is_compatible(chain.b()));

        let mut cyc = DMatrix::zeros(3, 3);
        cyc[(0, 1)] = 1.0;
        cyc[(1, 0)] = 0.3;
        match topological_order(&cyc) {
            Err(Error::Cycle(c)) => {
                let mut c = c;
                c.sort();
                assert_eq!(c, vec![1, 2]);
            }
            other => panic!("expected cycle, got {other:?}"),
        }
    }

    #[test]
    fn model_validation() {
        let mut b = DMatrix::zeros(2, 2);
        b[(0, 0)] = 1.0;
        assert!(DagModel::new(b, DVector::from_element(2, 1.0)).is_err());
        let b = DMatrix::zeros(2, 2);
        assert!(matches!(
            DagModel::new(b, DVector::from_vec(vec![1.0, 0.0])),
            Err(Error::NonPositiveVariance { node: 2, .. })
        ));
    }

    #[test]
    fn ordering_parsing() {
        let o = Ordering::parse_one_based("3,1,2").unwrap();
        assert_eq!(o.as_slice(), &[2, 0, 1]);
        assert_eq!(o.to_string(), "3,1,2");
        assert!(Ordering::parse_one_based("1,1,2").is_err());
        assert!(Ordering::parse_one_based("0,1").is_err());
    }
}
