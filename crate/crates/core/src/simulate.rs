//! Ground-truth models and seeded Gaussian SEM data.
//!
//! All randomness comes from ChaCha20 (`rand_chacha`) seeded with
//! `seed_from_u64`; independent replications use separate ChaCha streams of
//! the same key. Standard normals use the Box-Muller transform on 53-bit
//! uniforms, so a seed reproduces the same data on every platform.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{topological_order, CovarianceMatrix, DagModel, Dataset};

/// Identifier recorded next to every simulated output.
pub const RNG_ALGORITHM: &str = "chacha20-stream/box-muller-53bit";

/// The generator for replication `index` of a run seeded with `master`.
pub fn replication_rng(master: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// Box-Muller pair of independent standard normals.
fn normal_pair<R: RngCore>(rng: &mut R) -> (f64, f64) {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    let u1 = ((rng.next_u64() >> 11) + 1) as f64 * SCALE;
    let u2 = (rng.next_u64() >> 11) as f64 * SCALE;
    let r = (-2.0 * u1.ln()).sqrt();
    (r * (TAU * u2).cos(), r * (TAU * u2).sin())
}

/// Fills `out` with standard normals.
pub fn fill_standard_normal<R: RngCore>(rng: &mut R, out: &mut [f64]) {
    let mut chunks = out.chunks_exact_mut(2);
    for pair in &mut chunks {
        let (a, b) = normal_pair(rng);
        pair[0] = a;
        pair[1] = b;
    }
    if let [last] = chunks.into_remainder() {
        *last = normal_pair(rng).0;
    }
}

/// The chain `X_p → X_{p-1} → … → X_1` with weight `β⁰` and unit marginal variances.
pub fn ar1_model(p: usize, beta0: f64) -> Result<DagModel> {
    if p < 2 {
        return Err(Error::InvalidInput(format!(
            "AR(1) model needs p >= 2, got {p}"
        )));
    }
    if !(beta0.abs() < 1.0) {
        return Err(Error::InvalidInput(format!(
            "|beta0| = {} must be < 1",
            beta0.abs()
        )));
    }
    let mut b = DMatrix::zeros(p, p);
    let mut omega = DVector::from_element(p, 1.0 - beta0 * beta0);
    for j in 0..p - 1 {
        if beta0 != 0.0 {
            b[(j + 1, j)] = beta0;
        }
    }
    omega[p - 1] = 1.0;
    DagModel::new(b, omega)
}

/// How noise variances are drawn for generated models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum OmegaSpec {
    Fixed { value: f64 },
    Uniform { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub p: usize,
    pub s0: usize,
    pub coef_lo: f64,
    pub coef_hi: f64,
    pub omega: OmegaSpec,
    pub max_parents: Option<usize>,
    pub seed: u64,
}

impl SimConfig {
    /// Weights `±[0.5, 1]`, unit noise variances, no in-degree cap.
    pub fn new(p: usize, s0: usize, seed: u64) -> Self {
        SimConfig {
            p,
            s0,
            coef_lo: 0.5,
            coef_hi: 1.0,
            omega: OmegaSpec::Fixed { value: 1.0 },
            max_parents: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.coef_lo > 0.0 && self.coef_lo <= self.coef_hi && self.coef_hi.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "coefficient range [{}, {}] needs 0 < lo <= hi",
                self.coef_lo, self.coef_hi
            )));
        }
        let max_edges = self.p * self.p.saturating_sub(1) / 2;
        if self.s0 > max_edges {
            return Err(Error::InvalidInput(format!(
                "s0 = {} exceeds p(p-1)/2 = {max_edges}",
                self.s0
            )));
        }
        match self.omega {
            OmegaSpec::Fixed { value } if !(value > 0.0) => Err(Error::InvalidInput(
                "fixed noise variance must be positive".into(),
            )),
            OmegaSpec::Uniform { lo, hi } if !(lo > 0.0 && lo <= hi) => Err(Error::InvalidInput(
                "noise variance range needs 0 < lo <= hi".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Largest edge count reachable with in-degree at most `cap` on `p` nodes.
fn max_edges_under_cap(p: usize, cap: usize) -> usize {
    (0..p).map(|k| k.min(cap)).sum()
}

/// A random DAG with exactly `s0` edges, drawn from `config.seed`.
///
/// A uniform ordering is drawn first, then candidate parent-child pairs
/// consistent with it are visited in random order and accepted while the
/// child has spare in-degree.
pub fn random_sparse_dag(config: &SimConfig) -> Result<DagModel> {
    config.validate()?;
    let p = config.p;
    let cap = config.max_parents.unwrap_or(p.saturating_sub(1));
    if config.s0 > max_edges_under_cap(p, cap) {
        return Err(Error::InvalidInput(format!(
            "s0 = {} edges is infeasible with at most {cap} parents per node",
            config.s0
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(&mut rng);

    // Parents come later in the ordering.
    let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(p * p.saturating_sub(1) / 2);
    for (a, &child) in order.iter().enumerate() {
        for &parent in &order[a + 1..] {
            pairs.push((parent, child));
        }
    }
    pairs.shuffle(&mut rng);

    let mut indegree = vec![0usize; p];
    let mut edges = Vec::with_capacity(config.s0);
    for (k, j) in pairs {
        if edges.len() == config.s0 {
            break;
        }
        if indegree[j] < cap {
            indegree[j] += 1;
            edges.push((k, j));
        }
    }
    edges.sort_unstable();

    let mut b = DMatrix::zeros(p, p);
    for &(k, j) in &edges {
        let mag = rng.random_range(config.coef_lo..=config.coef_hi);
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        b[(k, j)] = sign * mag;
    }
    let omega = DVector::from_iterator(
        p,
        (0..p).map(|_| match config.omega {
            OmegaSpec::Fixed { value } => value,
            OmegaSpec::Uniform { lo, hi } => rng.random_range(lo..=hi),
        }),
    );
    DagModel::new(b, omega)
}

/// `n` i.i.d. rows of `X = X B + E` drawn from `rng`.
pub fn sample_sem_with<R: RngCore>(
    model: &DagModel,
    n: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let p = model.p();
    let mut x = DMatrix::<f64>::zeros(n, p);
    for j in 0..p {
        let sd = model.omega()[j].sqrt();
        let mut col = x.column_mut(j);
        fill_standard_normal(rng, col.as_mut_slice());
        col *= sd;
    }
    let order = topological_order(model.b())?;
    for &j in order.as_slice().iter().rev() {
        for k in model.parents(j) {
            let w = model.b()[(k, j)];
            for i in 0..n {
                x[(i, j)] += w * x[(i, k)];
            }
        }
    }
    Ok(x)
}

pub fn sample_sem(model: &DagModel, n: usize, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    Dataset::new(sample_sem_with(model, n, &mut rng)?, Some(seed))
}

/// `Σₙ = XᵀX / n`; with `center` the column means are removed first (still dividing by `n`).
pub fn sample_covariance(data: &Dataset, center: bool) -> Result<CovarianceMatrix> {
    let n = data.n();
    let x = if center {
        let mut x = data.x().clone();
        for mut col in x.column_iter_mut() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
        }
        x
    } else {
        data.x().clone()
    };
    let s = x.transpose() * &x / n as f64;
    CovarianceMatrix::empirical(&s, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use crate::model::covariance_of;

    #[test]
    fn ar1_examples() {
        let m = ar1_model(3, 0.5).unwrap();
        assert_eq!(m.omega().as_slice(), &[0.75, 0.75, 1.0]);
        assert_eq!(m.edge_count(), 2);
        let z = ar1_model(4, 0.0).unwrap();
        assert_eq!(z.edge_count(), 0);
        assert_eq!(z.omega().as_slice(), &[1.0; 4]);
        let s = covariance_of(&ar1_model(5, 0.5).unwrap());
        assert!((s.matrix()[(0, 4)] - 0.0625).abs() < 1e-14);
        assert!(ar1_model(3, 1.0).is_err());
        assert!(ar1_model(3, -1.5).is_err());
    }

    #[test]
    fn random_dag_edge_counts() {
        assert_eq!(
            random_sparse_dag(&SimConfig::new(5, 0, 1))
                .unwrap()
                .edge_count(),
            0
        );
        let a = random_sparse_dag(&SimConfig::new(6, 7, 42)).unwrap();
        let b = random_sparse_dag(&SimConfig::new(6, 7, 42)).unwrap();
        assert_eq!(a, b);
        for seed in 0..1000 {
            let m = random_sparse_dag(&SimConfig::new(8, 8, seed)).unwrap();
            assert_eq!(m.edge_count(), 8);
            for &w in m.b().iter().filter(|w| **w != 0.0) {
                assert!((0.5..=1.0).contains(&w.abs()));
            }
        }
    }

    #[test]
    fn random_dag_respects_cap() {
        let mut cfg = SimConfig::new(6, 9, 3);
        cfg.max_parents = Some(2);
        let m = random_sparse_dag(&cfg).unwrap();
        assert!(m.parent_sets().iter().all(|s| s.len() <= 2));
        cfg.s0 = 10;
        assert!(random_sparse_dag(&cfg).is_err());
        assert!(random_sparse_dag(&SimConfig::new(4, 7, 0)).is_err());
    }

    #[test]
    fn sampled_data_is_reproducible() {
        let m = ar1_model(4, 0.5).unwrap();
        let a = sample_sem(&m, 50, 9).unwrap();
        let b = sample_sem(&m, 50, 9).unwrap();
        assert_eq!(a.x().as_slice(), b.x().as_slice());
        let c = sample_sem(&m, 50, 10).unwrap();
        assert_ne!(a.x().as_slice(), c.x().as_slice());
    }

    #[test]
    fn ar1_sample_covariance_converges() {
        let m = ar1_model(5, 0.5).unwrap();
        let data = sample_sem(&m, 20_000, 2024).unwrap();
        let s = sample_covariance(&data, false).unwrap();
        assert!(max_abs_diff(s.matrix(), covariance_of(&m).matrix()) <= 0.05);
    }

    #[test]
    fn independent_columns_decorrelate() {
        let m = DagModel::empty(DVector::from_element(2, 1.0)).unwrap();
        let data = sample_sem(&m, 100_000, 5).unwrap();
        let s = sample_covariance(&data, false).unwrap();
        assert!(s.matrix()[(0, 1)].abs() < 0.02);
    }

    #[test]
    fn single_row_gives_rank_one() {
        let x = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 0.0, 0.0, 0.0]);
        let data = Dataset::new(x, None).unwrap();
        let s = sample_covariance(&data, false).unwrap();
        let r = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert!(max_abs_diff(s.matrix(), &(&r * r.transpose() / 2.0)) < 1e-15);
    }

    #[test]
    fn centering_changes_by_outer_product_of_means() {
        let m = ar1_model(3, 0.5).unwrap();
        let data = sample_sem(&m, 400, 11).unwrap();
        let raw = sample_covariance(&data, false).unwrap();
        let cen = sample_covariance(&data, true).unwrap();
        let means = DVector::from_iterator(3, data.x().column_iter().map(|c| c.mean()));
        let expected = raw.matrix() - &means * means.transpose();
        assert!(max_abs_diff(cen.matrix(), &expected) < 1e-12);
    }

    #[test]
    fn streams_differ() {
        let mut a = replication_rng(7, 0);
        let mut b = replication_rng(7, 1);
        assert_ne!(a.next_u64(), b.next_u64());
    }
}
