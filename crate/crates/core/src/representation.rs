//! Ordering-indexed representations `(B̃(π), Ω̃(π))` of a covariance matrix.
//!
//! For a fixed ordering every variable is projected on all variables that
//! come later in `π`; the projection coefficients form `B̃(π)` and the
//! residual variances form `Ω̃(π)`. Every such DAG has the same precision
//! matrix `Σ⁻¹`, only the number of non-zero coefficients differs.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{precision_of, CovarianceMatrix, DagModel, Ordering};

/// Default coefficient threshold on population matrices.
pub const POPULATION_ZERO_TOL: f64 = 1e-9;

/// Largest `p` for which [`minimal_edge_imap`] will enumerate all orderings.
pub const EXHAUSTIVE_IMAP_MAX_P: usize = 9;

/// Upper limit on the default number of sampled orderings.
pub const MAX_SAMPLED_ORDERINGS: usize = 20_000;

/// Zero tolerance appropriate for a covariance: thresholding is only
/// meaningful for population matrices.
pub fn default_zero_tol(sigma: &CovarianceMatrix) -> f64 {
    if sigma.is_population() {
        POPULATION_ZERO_TOL
    } else {
        0.0
    }
}

/// `(B̃(π), Ω̃(π))` via an LDLᵀ factorization of `Σ` with rows and columns
/// taken in the order `π_p, π_{p-1}, …, π_1`.
pub fn gram_schmidt_representation(
    sigma: &CovarianceMatrix,
    pi: &Ordering,
    zero_tol: f64,
) -> Result<DagModel> {
    let p = sigma.p();
    if pi.len() != p {
        return Err(Error::Dimension(format!(
            "ordering has {} nodes, covariance has {p}",
            pi.len()
        )));
    }
    let elim: Vec<usize> = pi.as_slice().iter().rev().copied().collect();
    let permuted = linalg::submatrix(sigma.matrix(), &elim, &elim);
    let (l, d) = linalg::ldlt(&permuted)?;
    let l_inv = linalg::unit_lower_inverse(&l);

    let mut b = DMatrix::<f64>::zeros(p, p);
    let mut omega = DVector::<f64>::zeros(p);
    for i in 0..p {
        let child = elim[i];
        omega[child] = d[i];
        for k in 0..i {
            let beta = -l_inv[(i, k)];
            if beta.abs() > zero_tol {
                b[(elim[k], child)] = beta;
            }
        }
    }
    DagModel::new(b, omega)
}

/// Incoming-edge counts `s̃_j(π)` and supports `S̃_j(π)` of a representation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EdgeProfile {
    pub per_node: Vec<usize>,
    pub total: usize,
    pub supports: Vec<Vec<usize>>,
}

impl EdgeProfile {
    pub fn of_model(model: &DagModel) -> Self {
        let supports = model.parent_sets();
        let per_node: Vec<usize> = supports.iter().map(Vec::len).collect();
        EdgeProfile {
            total: per_node.iter().sum(),
            per_node,
            supports,
        }
    }

    pub fn max_in_degree(&self) -> usize {
        self.per_node.iter().copied().max().unwrap_or(0)
    }
}

pub fn edge_profile(sigma: &CovarianceMatrix, pi: &Ordering, zero_tol: f64) -> Result<EdgeProfile> {
    Ok(EdgeProfile::of_model(&gram_schmidt_representation(
        sigma, pi, zero_tol,
    )?))
}

/// How a quantity that ranges over all orderings is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum OrderingSearch {
    Exhaustive,
    /// `count` uniform orderings drawn from `seed`, plus the identity.
    Sampled {
        count: usize,
        seed: u64,
    },
}

impl OrderingSearch {
    /// The default sample size `10·p!`, capped at [`MAX_SAMPLED_ORDERINGS`].
    pub fn default_sampled(p: usize, seed: u64) -> Self {
        let mut fact: usize = 1;
        for k in 2..=p {
            fact = fact.saturating_mul(k);
            if fact >= MAX_SAMPLED_ORDERINGS {
                break;
            }
        }
        OrderingSearch::Sampled {
            count: fact.saturating_mul(10).min(MAX_SAMPLED_ORDERINGS),
            seed,
        }
    }

    pub fn is_exhaustive(&self) -> bool {
        matches!(self, OrderingSearch::Exhaustive)
    }

    /// The orderings to visit. Exhaustive mode lists all `p!` in lexicographic order.
    pub fn orderings(&self, p: usize) -> Vec<Ordering> {
        match *self {
            OrderingSearch::Exhaustive => (0..p)
                .permutations(p)
                .map(|v| Ordering::new(v).expect("permutation"))
                .collect(),
            OrderingSearch::Sampled { count, seed } => {
                let mut rng = ChaCha20Rng::seed_from_u64(seed);
                let mut out = Vec::with_capacity(count + 1);
                out.push(Ordering::identity(p));
                let mut perm: Vec<usize> = (0..p).collect();
                for _ in 0..count {
                    perm.shuffle(&mut rng);
                    out.push(Ordering::new(perm.clone()).expect("permutation"));
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct MinimalImap {
    pub model: DagModel,
    pub ordering: Ordering,
    pub edges: usize,
    /// False in sampled mode, where `edges` is only an upper bound.
    pub exhaustive: bool,
}

/// The ordering whose representation has the fewest edges.
///
/// Ties go to the lexicographically smallest ordering.
pub fn minimal_edge_imap(
    sigma: &CovarianceMatrix,
    zero_tol: f64,
    search: OrderingSearch,
) -> Result<MinimalImap> {
    let p = sigma.p();
    if search.is_exhaustive() && p > EXHAUSTIVE_IMAP_MAX_P {
        return Err(Error::TooLarge(format!(
            "exhaustive search over {p}! orderings is limited to p <= {EXHAUSTIVE_IMAP_MAX_P}; use sampled mode"
        )));
    }
    let orderings = search.orderings(p);
    let best = orderings
        .par_iter()
        .map(|pi| edge_profile(sigma, pi, zero_tol).map(|e| (e.total, pi)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .min()
        .expect("at least one ordering");
    let model = gram_schmidt_representation(sigma, best.1, zero_tol)?;
    Ok(MinimalImap {
        edges: best.0,
        ordering: best.1.clone(),
        model,
        exhaustive: search.is_exhaustive(),
    })
}

/// Same precision matrix (to `tol`) and the same number of edges.
pub fn equivalent(m1: &DagModel, m2: &DagModel, tol: f64) -> Result<bool> {
    if m1.p() != m2.p() {
        return Err(Error::Dimension(format!("{} vs {} nodes", m1.p(), m2.p())));
    }
    let diff = linalg::max_abs_diff(precision_of(m1).matrix(), precision_of(m2).matrix());
    Ok(diff <= tol && m1.edge_count() == m2.edge_count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::covariance_of;
    use crate::simulate::ar1_model;

    fn ar1_sigma(p: usize) -> CovarianceMatrix {
        covariance_of(&ar1_model(p, 0.5).unwrap())
    }

    #[test]
    fn diagonal_sigma_has_no_edges() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let s = CovarianceMatrix::population(&d).unwrap();
        for pi in OrderingSearch::Exhaustive.orderings(3) {
            let m = gram_schmidt_representation(&s, &pi, 1e-9).unwrap();
            assert_eq!(m.edge_count(), 0);
            assert_eq!(m.omega().as_slice(), &[1.0, 2.0, 3.0]);
        }
    }

    #[test]
    fn ar1_identity_recovers_chain() {
        let truth = ar1_model(3, 0.5).unwrap();
        let m = gram_schmidt_representation(&ar1_sigma(3), &Ordering::identity(3), 1e-9).unwrap();
        assert!(linalg::max_abs_diff(m.b(), truth.b()) < 1e-12);
        for (a, b) in m.omega().iter().zip([0.75, 0.75, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn ar1_reversed_has_two_edges() {
        let s = ar1_sigma(3);
        let rev = Ordering::new(vec![2, 1, 0]).unwrap();
        let m = gram_schmidt_representation(&s, &rev, 1e-9).unwrap();
        assert_eq!(m.edge_count(), 2);
        // X_3 regressed on {X_1, X_2}: X_1 drops out.
        assert_eq!(m.b()[(0, 2)], 0.0);
        assert!((m.b()[(1, 2)] - 0.5).abs() < 1e-12);
        let id = gram_schmidt_representation(&s, &Ordering::identity(3), 1e-9).unwrap();
        assert!(equivalent(&m, &id, 1e-9).unwrap());
    }

    #[test]
    fn ar1_chain_profile() {
        let e = edge_profile(&ar1_sigma(4), &Ordering::identity(4), 1e-9).unwrap();
        assert_eq!(e.total, 3);
        assert_eq!(e.per_node, vec![1, 1, 1, 0]);
    }

    #[test]
    fn ar1_minimal_imap() {
        let r = minimal_edge_imap(&ar1_sigma(4), 1e-9, OrderingSearch::Exhaustive).unwrap();
        assert_eq!(r.edges, 3);
        assert_eq!(r.ordering, Ordering::identity(4));
        let eye = CovarianceMatrix::population(&DMatrix::identity(4, 4)).unwrap();
        let r = minimal_edge_imap(&eye, 1e-9, OrderingSearch::Exhaustive).unwrap();
        assert_eq!((r.edges, r.ordering), (0, Ordering::identity(4)));
    }

    #[test]
    fn exhaustive_imap_rejects_large_p() {
        let eye = CovarianceMatrix::population(&DMatrix::identity(10, 10)).unwrap();
        assert!(matches!(
            minimal_edge_imap(&eye, 1e-9, OrderingSearch::Exhaustive),
            Err(Error::TooLarge(_))
        ));
        let r =
            minimal_edge_imap(&eye, 1e-9, OrderingSearch::Sampled { count: 50, seed: 1 }).unwrap();
        assert!(!r.exhaustive);
        assert_eq!(r.edges, 0);
    }

    #[test]
    fn sampled_default_count() {
        assert_eq!(
            OrderingSearch::default_sampled(3, 0),
            OrderingSearch::Sampled { count: 60, seed: 0 }
        );
        assert_eq!(
            OrderingSearch::default_sampled(12, 0),
            OrderingSearch::Sampled {
                count: MAX_SAMPLED_ORDERINGS,
                seed: 0
            }
        );
    }

    #[test]
    fn singular_sigma_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let s = CovarianceMatrix::population(&m).unwrap();
        assert!(matches!(
            gram_schmidt_representation(&s, &Ordering::identity(2), 0.0),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn chain_not_equivalent_to_empty() {
        let chain = ar1_model(3, 0.5).unwrap();
        let empty = DagModel::empty(DVector::from_element(3, 1.0)).unwrap();
        assert!(equivalent(&chain, &chain, 0.0).unwrap());
        assert!(!equivalent(&chain, &empty, 1e-9).unwrap());
    }
}
