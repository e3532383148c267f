//! Decomposable local scores and the best-parent-set table consumed by the
//! exact search.
//!
//! Profiling `ω_j²` out of the minus log-likelihood gives the per-node score
//! `1 + log RSSₙ(j|S) + λ²|S|`; with all noise variances fixed to one the
//! score is `RSSₙ(j|S) + λ²|S|`. Either way the total score of a DAG is the
//! sum of its nodes' local scores.

use std::cmp::Ordering as CmpOrdering;
use std::io::Write;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::CovarianceMatrix;

/// Largest `p` for which a full table (`p · 2^{p-1}` entries) is built.
pub const MAX_TABLE_P: usize = 25;

/// Relative floor on profiled residual variances.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Negative residual variances above `-NEGATIVE_RSS_SLACK` are rounding noise.
pub const NEGATIVE_RSS_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScoreMode {
    /// Unknown noise variances, profiled out.
    #[serde(rename = "profile")]
    Profile,
    /// All noise variances equal to one.
    #[serde(rename = "equalvar")]
    EqualVariance,
}

impl std::str::FromStr for ScoreMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "profile" => Ok(ScoreMode::Profile),
            "equalvar" | "equal_variance" => Ok(ScoreMode::EqualVariance),
            _ => Err(Error::InvalidInput(format!("unknown score mode {s:?}"))),
        }
    }
}

/// `λ² = log n / n`, the BIC-equivalent penalty.
pub fn bic_lambda2(n: usize) -> f64 {
    let n = n as f64;
    n.ln() / n
}

/// `min(⌊α n / log max(p, 2)⌋, n − 2, p − 1)`.
pub fn default_max_parents(n: usize, p: usize, alpha: f64) -> usize {
    let log_p = (p.max(2) as f64).ln();
    let by_alpha = (alpha * n as f64 / log_p).floor().max(0.0) as usize;
    by_alpha.min(n.saturating_sub(2)).min(p.saturating_sub(1))
}

/// `RSSₙ(j|S) = Σ_jj − Σ_jS Σ_SS⁻¹ Σ_Sj`, clipped at zero.
pub fn residual_variance(j: usize, parents: &[usize], sigma_hat: &CovarianceMatrix) -> Result<f64> {
    let p = sigma_hat.p();
    if j >= p || parents.iter().any(|&k| k >= p) {
        return Err(Error::Dimension(format!(
            "node index out of range for p = {p}"
        )));
    }
    if parents.contains(&j) {
        return Err(Error::InvalidInput(format!(
            "node {} is in its own parent set",
            j + 1
        )));
    }
    let s = sigma_hat.matrix();
    let sjj = s[(j, j)];
    if parents.is_empty() {
        return Ok(sjj);
    }
    let a = linalg::submatrix(s, parents, parents);
    let rhs = DVector::from_iterator(parents.len(), parents.iter().map(|&k| s[(k, j)]));
    let coef = linalg::solve_spd(&a, &rhs)?;
    let rss = sjj - rhs.dot(&coef);
    if rss < -NEGATIVE_RSS_SLACK * sjj.max(1.0) {
        return Err(Error::Numerical(format!(
            "residual variance of node {} is {rss:e}",
            j + 1
        )));
    }
    Ok(rss.max(0.0))
}

/// Least-squares coefficients of `X_j` on `X_S` from the covariance.
pub fn regression_coefficients(
    j: usize,
    parents: &[usize],
    sigma_hat: &CovarianceMatrix,
) -> Result<DVector<f64>> {
    let s = sigma_hat.matrix();
    if parents.is_empty() {
        return Ok(DVector::zeros(0));
    }
    let a = linalg::submatrix(s, parents, parents);
    let rhs = DVector::from_iterator(parents.len(), parents.iter().map(|&k| s[(k, j)]));
    linalg::solve_spd(&a, &rhs)
}

fn variance_floor(sigma_hat: &CovarianceMatrix) -> f64 {
    VARIANCE_FLOOR * sigma_hat.max_variance()
}

/// `1 + log RSSₙ(j|S) + λ²|S|`.
pub fn local_score_profile(
    j: usize,
    parents: &[usize],
    sigma_hat: &CovarianceMatrix,
    lambda2: f64,
) -> Result<f64> {
    let rss = residual_variance(j, parents, sigma_hat)?;
    let floor = variance_floor(sigma_hat);
    let rss = if rss < floor {
        log::warn!(
            "residual variance {rss:e} of node {} on {} parents is below the floor; the node overfits",
            j + 1,
            parents.len()
        );
        floor
    } else {
        rss
    };
    Ok(1.0 + rss.ln() + lambda2 * parents.len() as f64)
}

/// `RSSₙ(j|S) + λ²|S|`.
pub fn local_score_equal_variance(
    j: usize,
    parents: &[usize],
    sigma_hat: &CovarianceMatrix,
    lambda2: f64,
) -> Result<f64> {
    Ok(residual_variance(j, parents, sigma_hat)? + lambda2 * parents.len() as f64)
}

pub fn local_score(
    mode: ScoreMode,
    j: usize,
    parents: &[usize],
    sigma_hat: &CovarianceMatrix,
    lambda2: f64,
) -> Result<f64> {
    match mode {
        ScoreMode::Profile => local_score_profile(j, parents, sigma_hat, lambda2),
        ScoreMode::EqualVariance => local_score_equal_variance(j, parents, sigma_hat, lambda2),
    }
}

pub fn mask_to_nodes(mask: u64) -> Vec<usize> {
    (0..64).filter(|b| mask >> b & 1 == 1).collect()
}

pub fn nodes_to_mask(nodes: &[usize]) -> u64 {
    nodes.iter().fold(0u64, |m, &k| m | 1 << k)
}

/// Drops bit `j` from a mask over `V`, giving an index into a node's table.
#[inline]
fn compress(mask: u64, j: usize) -> usize {
    let low = mask & ((1u64 << j) - 1);
    let high = (mask >> (j + 1)) << j;
    (low | high) as usize
}

#[inline]
fn expand(index: usize, j: usize) -> u64 {
    let index = index as u64;
    let low = index & ((1u64 << j) - 1);
    let high = (index >> j) << (j + 1);
    low | high
}

/// Smaller set first, then the lexicographically smaller sorted node list.
fn set_preference(a: u64, b: u64) -> CmpOrdering {
    a.count_ones().cmp(&b.count_ones()).then_with(|| {
        let diff = a ^ b;
        if diff == 0 {
            CmpOrdering::Equal
        } else if a & (diff & diff.wrapping_neg()) != 0 {
            CmpOrdering::Less
        } else {
            CmpOrdering::Greater
        }
    })
}

fn better(score_a: f64, set_a: u64, score_b: f64, set_b: u64) -> bool {
    match score_a.partial_cmp(&score_b) {
        Some(CmpOrdering::Less) => true,
        Some(CmpOrdering::Greater) => false,
        _ => set_preference(set_a, set_b) == CmpOrdering::Less,
    }
}

#[derive(Debug, Clone)]
struct NodeTable {
    best: Vec<f64>,
    argmin: Vec<u64>,
}

/// For every node `j` and candidate set `C ⊆ V∖{j}`: the best local score
/// over `S ⊆ C` with `|S| ≤ m`, and the minimizing `S`.
#[derive(Debug, Clone)]
pub struct LocalScoreTable {
    mode: ScoreMode,
    lambda2: f64,
    max_parents: usize,
    n: Option<usize>,
    p: usize,
    nodes: Vec<NodeTable>,
    sigma_hat: CovarianceMatrix,
}

impl LocalScoreTable {
    pub fn build(
        sigma_hat: &CovarianceMatrix,
        lambda2: f64,
        mode: ScoreMode,
        max_parents: usize,
    ) -> Result<Self> {
        let p = sigma_hat.p();
        if p > MAX_TABLE_P {
            return Err(Error::TooLarge(format!(
                "exact search tables are limited to p <= {MAX_TABLE_P} (got {p}); use greedy search"
            )));
        }
        if !(lambda2 >= 0.0) || !lambda2.is_finite() {
            return Err(Error::InvalidInput(format!(
                "lambda2 = {lambda2} must be finite and >= 0"
            )));
        }
        let m = max_parents.min(p.saturating_sub(1));
        let nodes = (0..p)
            .into_par_iter()
            .map(|j| Self::build_node(j, p, m, sigma_hat, lambda2, mode))
            .collect::<Result<Vec<_>>>()?;
        Ok(LocalScoreTable {
            mode,
            lambda2,
            max_parents: m,
            n: sigma_hat.sample_size(),
            p,
            nodes,
            sigma_hat: sigma_hat.clone(),
        })
    }

    fn build_node(
        j: usize,
        p: usize,
        m: usize,
        sigma_hat: &CovarianceMatrix,
        lambda2: f64,
        mode: ScoreMode,
    ) -> Result<NodeTable> {
        let size = 1usize << (p - 1);
        let mut best = vec![f64::INFINITY; size];
        let mut argmin = vec![0u64; size];
        // Indices increase with set inclusion, so every C∖{c} is done before C.
        for c in 0..size {
            let full = expand(c, j);
            if (c.count_ones() as usize) <= m {
                best[c] = local_score(mode, j, &mask_to_nodes(full), sigma_hat, lambda2)?;
                argmin[c] = full;
            }
            let mut rest = c;
            while rest != 0 {
                let bit = rest & rest.wrapping_neg();
                rest ^= bit;
                let sub = c ^ bit;
                if better(best[sub], argmin[sub], best[c], argmin[c]) {
                    best[c] = best[sub];
                    argmin[c] = argmin[sub];
                }
            }
        }
        Ok(NodeTable { best, argmin })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn mode(&self) -> ScoreMode {
        self.mode
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    pub fn max_parents(&self) -> usize {
        self.max_parents
    }

    pub fn sample_size(&self) -> Option<usize> {
        self.n
    }

    /// The covariance the table was scored against.
    pub fn sigma_hat(&self) -> &CovarianceMatrix {
        &self.sigma_hat
    }

    /// Best score and parent mask for node `j` with candidates `candidates` (a mask over V).
    pub fn best(&self, j: usize, candidates: u64) -> (f64, u64) {
        debug_assert_eq!(candidates >> j & 1, 0);
        let idx = compress(candidates, j);
        (self.nodes[j].best[idx], self.nodes[j].argmin[idx])
    }

    /// One JSON object per line: `{"j", "C", "score", "S"}` with 1-based
    /// node labels; bit `k` of `C` stands for node `k + 1`.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        #[derive(Serialize)]
        struct Row {
            j: usize,
            #[serde(rename = "C")]
            c: u64,
            score: f64,
            #[serde(rename = "S")]
            s: Vec<usize>,
        }
        for (j, node) in self.nodes.iter().enumerate() {
            for (idx, (&score, &arg)) in node.best.iter().zip(&node.argmin).enumerate() {
                let row = Row {
                    j: j + 1,
                    c: expand(idx, j),
                    score,
                    s: mask_to_nodes(arg).into_iter().map(|k| k + 1).collect(),
                };
                serde_json::to_writer(&mut w, &row)?;
                w.write_all(b"\n")?;
            }
        }
        Ok(())
    }
}
