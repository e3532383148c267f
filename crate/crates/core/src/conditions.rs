//! Checks of the identifiability and sparsity conditions on a covariance,
//! the closed-form constants of the finite-sample bound, and the split of
//! a covariance into independent blocks.
//!
//! Conditions that quantify over every ordering are evaluated exhaustively
//! for `p ≤ 8`; above that a fixed-seed sample of orderings is used and a
//! pass only means that no counterexample was found. Reports computed from
//! an empirical covariance are advisory.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{covariance_of, CovarianceMatrix, DagModel, Ordering};
use crate::representation::{default_zero_tol, gram_schmidt_representation, OrderingSearch};

/// Largest `p` for which condition checks enumerate all orderings.
pub const EXHAUSTIVE_CHECK_MAX_P: usize = 8;
/// Orderings sampled above the exhaustive cutoff.
pub const SAMPLED_CHECK_COUNT: usize = 20_000;
pub const SAMPLED_CHECK_SEED: u64 = 0x5eed_da90;
/// Tolerance for `Λ_min² > 0`.
pub const EIGEN_TOL: f64 = 1e-12;
/// `Ω̃(π)` counts as the identity when every entry is within this of one.
pub const IDENTITY_OMEGA_TOL: f64 = 1e-9;

/// Exhaustive for small `p`, otherwise the fixed-seed sample.
pub fn check_search(p: usize) -> OrderingSearch {
    if p <= EXHAUSTIVE_CHECK_MAX_P {
        OrderingSearch::Exhaustive
    } else {
        OrderingSearch::Sampled {
            count: SAMPLED_CHECK_COUNT,
            seed: SAMPLED_CHECK_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub condition: String,
    pub satisfied: bool,
    pub measured: f64,
    pub threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub enumeration: Option<OrderingSearch>,
    /// Ordering attaining `measured`, 1-based.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_ordering: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct ConditionReport {
    /// False when the input was an empirical covariance.
    pub certifying: bool,
    pub checks: Vec<ConditionCheck>,
    pub constants: BTreeMap<String, f64>,
}

impl ConditionReport {
    fn new(sigma: &CovarianceMatrix) -> Self {
        ConditionReport {
            certifying: sigma.is_population(),
            ..Default::default()
        }
    }

    pub fn all_satisfied(&self) -> bool {
        self.checks.iter().all(|c| c.satisfied)
    }

    pub fn check(&self, condition: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.condition == condition)
    }

    pub fn merge(mut self, other: ConditionReport) -> Self {
        self.certifying &= other.certifying;
        self.checks.extend(other.checks);
        self.constants.extend(other.constants);
        self
    }
}

/// Bounded variances (`max_j σ_j² ≤ σ₀²`) and a non-singular covariance.
pub fn check_basic(sigma: &CovarianceMatrix, sigma0_sq: f64) -> ConditionReport {
    let mut report = ConditionReport::new(sigma);
    let max_var = sigma.max_variance();
    let lambda_min_sq = sigma.min_eigenvalue();
    report.constants.insert("sigma0_sq".into(), sigma0_sq);
    report
        .constants
        .insert("lambda_min_sq".into(), lambda_min_sq);
    report.checks.push(ConditionCheck {
        condition: "1".into(),
        satisfied: max_var <= sigma0_sq,
        measured: max_var,
        threshold: sigma0_sq,
        enumeration: None,
        worst_ordering: None,
        note: Some("largest variance vs sigma0^2".into()),
    });
    report.checks.push(ConditionCheck {
        condition: "2".into(),
        satisfied: lambda_min_sq > EIGEN_TOL,
        measured: lambda_min_sq,
        threshold: EIGEN_TOL,
        enumeration: None,
        worst_ordering: None,
        note: Some("smallest eigenvalue must be non-zero".into()),
    });
    report
}

/// [`check_basic`] on `covariance_of(model)`, plus the equivalence
/// `Λ_min² > 0 ⇔ min_j ω_j² > 0` and the identity `det Σ = ∏ ω_j²`.
pub fn check_basic_model(model: &DagModel, sigma0_sq: f64) -> ConditionReport {
    let sigma = covariance_of(model);
    let mut report = check_basic(&sigma, sigma0_sq);
    let min_omega = model.omega().iter().copied().fold(f64::INFINITY, f64::min);
    let lambda_pos = report.checks[1].satisfied;
    let log_det = crate::linalg::log_det_spd(sigma.matrix()).unwrap_or(f64::NEG_INFINITY);
    let log_prod: f64 = model.omega().iter().map(|w| w.ln()).sum();
    report.constants.insert("log_det_sigma".into(), log_det);
    report.constants.insert("sum_log_omega".into(), log_prod);
    report.checks.push(ConditionCheck {
        condition: "omega-pos".into(),
        satisfied: lambda_pos == (min_omega > 0.0),
        measured: min_omega,
        threshold: 0.0,
        enumeration: None,
        worst_ordering: None,
        note: Some("positive smallest eigenvalue iff all noise variances positive".into()),
    });
    report
}

/// Evaluates `f` on every ordering of `search` and keeps the smallest value
/// (earliest ordering on ties).
fn min_over_orderings<F>(p: usize, search: OrderingSearch, f: F) -> Result<Option<(f64, Ordering)>>
where
    F: Fn(&Ordering) -> Result<Option<f64>> + Sync,
{
    let orderings = search.orderings(p);
    let values = orderings.par_iter().map(&f).collect::<Result<Vec<_>>>()?;
    let mut best: Option<(f64, usize)> = None;
    for (i, v) in values.into_iter().enumerate() {
        if let Some(v) = v {
            if best.is_none_or(|b| v < b.0) {
                best = Some((v, i));
            }
        }
    }
    Ok(best.map(|(v, i)| (v, orderings[i].clone())))
}

fn log_p(p: usize) -> f64 {
    (p.max(2) as f64).ln()
}

/// In-degree of every representation: `max_{π,j} s̃_j(π) ≤ α̃ n / log p`.
pub fn check_degree(
    sigma: &CovarianceMatrix,
    n: usize,
    alpha_tilde: f64,
    search: OrderingSearch,
) -> Result<ConditionReport> {
    let p = sigma.p();
    let tol = default_zero_tol(sigma);
    let worst = min_over_orderings(p, search, |pi| {
        let m = gram_schmidt_representation(sigma, pi, tol)?;
        let max_deg = (0..p).map(|j| m.parents(j).len()).max().unwrap_or(0);
        Ok(Some(-(max_deg as f64)))
    })?;
    let (neg, pi) = worst.expect("at least one ordering");
    let measured = -neg;
    let threshold = alpha_tilde * n as f64 / log_p(p);
    let mut report = ConditionReport::new(sigma);
    report.constants.insert("alpha_tilde".into(), alpha_tilde);
    report.checks.push(ConditionCheck {
        condition: "4".into(),
        satisfied: measured <= threshold,
        measured,
        threshold,
        enumeration: Some(search),
        worst_ordering: Some(pi.to_one_based()),
        note: Some("largest in-degree over orderings".into()),
    });
    Ok(report)
}

/// `√(log p / n) (√(p/s₀) ∨ 1) / η₀`.
pub fn beta_min_threshold(p: usize, n: usize, s0: usize, eta0: f64) -> f64 {
    let ratio = (p as f64 / s0 as f64).sqrt().max(1.0);
    (log_p(p) / n as f64).sqrt() * ratio / eta0
}

/// Every representation has at least a `1 − η₁` fraction of edges above the
/// beta-min threshold. Reports the smallest fraction over orderings.
pub fn check_beta_min(
    sigma: &CovarianceMatrix,
    n: usize,
    s0: usize,
    eta0: f64,
    eta1: f64,
    search: OrderingSearch,
) -> Result<ConditionReport> {
    if s0 == 0 {
        return Err(Error::InvalidInput("s0 must be >= 1".into()));
    }
    if !(eta0 > 0.0) || !(0.0..1.0).contains(&eta1) {
        return Err(Error::InvalidInput(
            "need eta0 > 0 and 0 <= eta1 < 1".into(),
        ));
    }
    let p = sigma.p();
    let tol = default_zero_tol(sigma);
    let tau = beta_min_threshold(p, n, s0, eta0);
    let worst = min_over_orderings(p, search, |pi| {
        let m = gram_schmidt_representation(sigma, pi, tol)?;
        let edges = m.edge_count();
        if edges == 0 {
            return Ok(Some(1.0));
        }
        let strong = m.b().iter().filter(|w| w.abs() > tau).count();
        Ok(Some(strong as f64 / edges as f64))
    })?;
    let (fraction, pi) = worst.expect("at least one ordering");
    let mut report = ConditionReport::new(sigma);
    report.constants.insert("eta0".into(), eta0);
    report.constants.insert("eta1".into(), eta1);
    report.constants.insert("beta_min_threshold".into(), tau);
    report.checks.push(ConditionCheck {
        condition: "5".into(),
        satisfied: fraction >= 1.0 - eta1,
        measured: fraction,
        threshold: 1.0 - eta1,
        enumeration: Some(search),
        worst_ordering: Some(pi.to_one_based()),
        note: Some(format!(
            "smallest fraction of edges with |beta| > {tau:.6e}"
        )),
    });
    Ok(report)
}

/// Unit-variance identifiability: every `Ω̃(π) ≠ I` has
/// `(1/p) Σ_j (ω̃_j²(π) − 1)² > 1/η_ω`; and the dimension bound `p ≤ α* n / log n`.
pub fn check_omega_min(
    sigma: &CovarianceMatrix,
    eta_omega: f64,
    n: usize,
    alpha_star: f64,
    search: OrderingSearch,
) -> Result<ConditionReport> {
    if !(eta_omega > 0.0) {
        return Err(Error::InvalidInput("eta_omega must be positive".into()));
    }
    let p = sigma.p();
    let worst = min_over_orderings(p, search, |pi| {
        let m = gram_schmidt_representation(sigma, pi, 0.0)?;
        let omega = m.omega();
        if omega.iter().all(|w| (w - 1.0).abs() <= IDENTITY_OMEGA_TOL) {
            return Ok(None);
        }
        Ok(Some(
            omega.iter().map(|w| (w - 1.0).powi(2)).sum::<f64>() / p as f64,
        ))
    })?;
    let threshold = 1.0 / eta_omega;
    let mut report = ConditionReport::new(sigma);
    report.constants.insert("eta_omega".into(), eta_omega);
    report.constants.insert("alpha_star".into(), alpha_star);
    report.checks.push(match worst {
        Some((dev, pi)) => ConditionCheck {
            condition: "6".into(),
            satisfied: dev > threshold,
            measured: dev,
            threshold,
            enumeration: Some(search),
            worst_ordering: Some(pi.to_one_based()),
            note: Some("smallest mean squared deviation of non-identity variances".into()),
        },
        None => ConditionCheck {
            condition: "6".into(),
            satisfied: true,
            measured: f64::INFINITY,
            threshold,
            enumeration: Some(search),
            worst_ordering: None,
            note: Some("every visited representation has unit variances".into()),
        },
    });
    report.checks.push(check_dimension(p, n, alpha_star));
    Ok(report)
}

/// `p ≤ α* n / log n`.
pub fn check_dimension(p: usize, n: usize, alpha_star: f64) -> ConditionCheck {
    let threshold = alpha_star * n as f64 / (n.max(2) as f64).ln();
    ConditionCheck {
        condition: "7".into(),
        satisfied: p as f64 <= threshold,
        measured: p as f64,
        threshold,
        enumeration: None,
        worst_ordering: None,
        note: Some("p vs alpha* n / log n".into()),
    }
}

/// `α̃ = σ₀² η₀² / (Λ_min² (1 − η₁))`.
pub fn cond_edges_alpha(sigma0_sq: f64, lambda_min_sq: f64, eta0: f64, eta1: f64) -> Result<f64> {
    if !(eta1 < 1.0) {
        return Err(Error::InvalidInput(format!("eta1 = {eta1} must be < 1")));
    }
    if !(sigma0_sq > 0.0 && lambda_min_sq > 0.0 && eta0 > 0.0) {
        return Err(Error::InvalidInput(
            "sigma0^2, lambda_min^2 and eta0 must be positive".into(),
        ));
    }
    Ok(sigma0_sq * eta0 * eta0 / (lambda_min_sq * (1.0 - eta1)))
}

/// Closed-form constants of the explicit finite-sample bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoremConstants {
    pub sigma0: f64,
    pub lambda_min: f64,
    pub p: usize,
    pub s0: usize,
    pub n: usize,
    pub c1: f64,
    pub c2: f64,
    pub c: f64,
    pub k0: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub delta_b: f64,
    pub delta_w: f64,
    pub delta_s: f64,
    pub delta_eta: f64,
    pub lambda_sq: f64,
    pub lambda0_sq: f64,
    pub lambda1_sq: f64,
    pub lambda2_sq: f64,
    pub lambda3_sq: f64,
    pub lambda_tilde_sq: f64,
    pub eta0_sq: f64,
    pub eta1: f64,
    pub eta2_sq: f64,
    pub alpha: f64,
    pub alpha_tilde: f64,
    pub t: f64,
    pub alpha0: f64,
}

pub const C1: f64 = 96.0;
pub const C2: f64 = 3840.0;

/// `α₀ = (4/p) ∧ 0.05`.
pub fn confidence_alpha0(p: usize) -> f64 {
    (4.0 / p as f64).min(0.05)
}

/// Evaluates every constant from `(σ₀, Λ_min, p, s₀, n)`; `t` defaults to `log p`.
pub fn theorem_constants(
    sigma0: f64,
    lambda_min: f64,
    p: usize,
    s0: usize,
    n: usize,
    t: Option<f64>,
) -> Result<TheoremConstants> {
    if !(sigma0 > 0.0 && lambda_min > 0.0) || p == 0 || s0 == 0 || n == 0 {
        return Err(Error::InvalidInput(
            "sigma0, lambda_min, p, s0 and n must all be positive".into(),
        ));
    }
    let s2 = sigma0 * sigma0;
    let s4 = s2 * s2;
    let l2 = lambda_min * lambda_min;
    let l4 = l2 * l2;
    let l6 = l4 * l2;
    let ratio = p as f64 / s0 as f64;
    let rate = (p as f64).ln() / n as f64;

    // Shared bracket: (p/s0 + 1) c2 σ0⁴/Λ⁴ + c1 σ0²/Λ².
    let bracket = (ratio + 1.0) * C2 * s4 / l4 + C1 * s2 / l2;
    let c = 4.0 * bracket + 2.0 * (C1 * s2 / l2 + C2 * s4 / l4);
    let total = c + bracket;
    let eta0_sq = 1.0 / (2.0 * total);

    Ok(TheoremConstants {
        sigma0,
        lambda_min,
        p,
        s0,
        n,
        c1: C1,
        c2: C2,
        c,
        k0: 2.0 / lambda_min,
        delta1: l2 / 8.0,
        delta2: l4 / (64.0 * s4),
        delta3: lambda_min / 2.0,
        delta_b: l4 / 32.0,
        delta_w: l6 / (256.0 * s4),
        delta_s: 1.0 - C1 * s2 / (c * l2) - C2 * s4 / (c * l4),
        delta_eta: 0.5,
        lambda_sq: c * rate,
        lambda0_sq: bracket * rate,
        lambda1_sq: 12.0 * s2 * rate,
        lambda2_sq: 60.0 * rate,
        lambda3_sq: 9.0 * s2 * rate,
        lambda_tilde_sq: total * 32.0 / l4 * rate,
        eta0_sq,
        eta1: 0.0,
        eta2_sq: eta0_sq * total * 32.0 / l4,
        alpha: l2 / (288.0 * s2),
        alpha_tilde: l2 / (288.0 * s2),
        t: t.unwrap_or_else(|| (p as f64).ln()),
        alpha0: confidence_alpha0(p),
    })
}

/// `√(log p / n) / η_c`, the correlation cut used to split into components.
pub fn component_threshold(p: usize, n: usize, eta_c: f64) -> f64 {
    (log_p(p) / n as f64).sqrt() / eta_c
}

fn find(parent: &mut [usize], mut v: usize) -> usize {
    while parent[v] != v {
        parent[v] = parent[parent[v]];
        v = parent[v];
    }
    v
}

/// Connected components of `{j ~ k : |corr(j, k)| > threshold}`.
///
/// Blocks are sorted internally and by their smallest node.
pub fn connected_components(
    sigma_hat: &CovarianceMatrix,
    threshold: f64,
) -> Result<Vec<Vec<usize>>> {
    if !(threshold >= 0.0) {
        return Err(Error::InvalidInput("threshold must be >= 0".into()));
    }
    let s = sigma_hat.matrix();
    let p = sigma_hat.p();
    if let Some(j) = (0..p).find(|&j| !(s[(j, j)] > 0.0)) {
        return Err(Error::InvalidInput(format!(
            "variance of node {} is zero; correlation undefined",
            j + 1
        )));
    }
    let mut parent: Vec<usize> = (0..p).collect();
    for j in 0..p {
        for k in (j + 1)..p {
            let corr = s[(j, k)] / (s[(j, j)] * s[(k, k)]).sqrt();
            if corr.abs() > threshold {
                let (a, b) = (find(&mut parent, j), find(&mut parent, k));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut blocks: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for v in 0..p {
        let r = find(&mut parent, v);
        blocks.entry(r).or_default().push(v);
    }
    Ok(blocks.into_values().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::ar1_model;
    use nalgebra::DMatrix;

    fn pop(m: DMatrix<f64>) -> CovarianceMatrix {
        CovarianceMatrix::population(&m).unwrap()
    }

    #[test]
    fn basic_identity() {
        let r = check_basic(&pop(DMatrix::identity(3, 3)), 1.0);
        assert!(r.all_satisfied());
        assert!((r.constants["lambda_min_sq"] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn basic_ar1_and_rank_deficient() {
        let s = covariance_of(&ar1_model(5, 0.5).unwrap());
        assert!(check_basic(&s, 1.0 + 1e-12).check("1").unwrap().satisfied);
        let dup = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let r = check_basic(&pop(dup), 1.0);
        assert!(!r.check("2").unwrap().satisfied);
    }

    #[test]
    fn basic_model_determinant_identity() {
        let m = ar1_model(4, 0.5).unwrap();
        let r = check_basic_model(&m, 1.0 + 1e-12);
        assert!(r.all_satisfied());
        assert!((r.constants["log_det_sigma"] - r.constants["sum_log_omega"]).abs() < 1e-10);
    }

    #[test]
    fn degree_of_diagonal_is_zero() {
        let r = check_degree(
            &pop(DMatrix::identity(4, 4)),
            100,
            0.01,
            OrderingSearch::Exhaustive,
        )
        .unwrap();
        let c = r.check("4").unwrap();
        assert_eq!(c.measured, 0.0);
        assert!(c.satisfied);
    }

    #[test]
    fn dimension_condition() {
        let c = check_dimension(10, 100, 0.3);
        assert!(!c.satisfied);
        assert!((c.threshold - 30.0 / 100f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn beta_min_trivial_cases() {
        let s = covariance_of(&ar1_model(4, 0.5).unwrap());
        let r = check_beta_min(
            &s,
            1_000_000_000_000,
            3,
            1.0,
            0.0,
            OrderingSearch::Exhaustive,
        )
        .unwrap();
        assert!(r.all_satisfied());
        assert!(check_beta_min(&s, 100, 0, 1.0, 0.0, OrderingSearch::Exhaustive).is_err());
    }

    #[test]
    fn cond_edges_examples() {
        assert_eq!(cond_edges_alpha(1.0, 1.0, 1.0, 0.0).unwrap(), 1.0);
        assert!((cond_edges_alpha(2.0, 0.5, 0.5, 0.5).unwrap() - 2.0).abs() < 1e-15);
        assert!(cond_edges_alpha(1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn constants_examples() {
        let k = theorem_constants(1.0, 1.0, 10, 10, 1000, None).unwrap();
        assert_eq!((k.c1, k.c2), (96.0, 3840.0));
        assert_eq!(k.c, 38976.0);
        assert_eq!(confidence_alpha0(100), 0.04);
        assert_eq!(confidence_alpha0(10), 0.05);
        assert!(theorem_constants(0.0, 1.0, 10, 10, 1000, None).is_err());
    }

    #[test]
    fn components() {
        let mut m = DMatrix::<f64>::identity(4, 4);
        m[(0, 1)] = 0.5;
        m[(1, 0)] = 0.5;
        m[(2, 3)] = -0.4;
        m[(3, 2)] = -0.4;
        assert_eq!(
            connected_components(&pop(m), 0.1).unwrap(),
            vec![vec![0, 1], vec![2, 3]]
        );
        let eye = pop(DMatrix::identity(3, 3));
        assert_eq!(
            connected_components(&eye, 0.0).unwrap(),
            vec![vec![0], vec![1], vec![2]]
        );
        let ar = covariance_of(&ar1_model(6, 0.5).unwrap());
        assert_eq!(
            connected_components(&ar, 0.1).unwrap(),
            vec![(0..6).collect::<Vec<_>>()]
        );
        let mut z = DMatrix::<f64>::identity(2, 2);
        z[(1, 1)] = 0.0;
        assert!(connected_components(&pop(z), 0.1).is_err());
    }
}
