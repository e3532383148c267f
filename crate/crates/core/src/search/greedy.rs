use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use super::{assemble, FitResult, Method};
use crate::error::{Error, Result};
use crate::model::CovarianceMatrix;
use crate::scoring::{local_score, ScoreMode};

/// Moves must improve the score by more than this to be taken.
const MIN_IMPROVEMENT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreedyOptions {
    pub lambda2: f64,
    pub mode: ScoreMode,
    pub max_parents: usize,
    /// Restart 0 starts from the empty graph; each later restart starts from
    /// a forward-selected graph consistent with a random ordering.
    pub restarts: usize,
    pub seed: u64,
}

struct Scorer<'a> {
    sigma: &'a CovarianceMatrix,
    mode: ScoreMode,
    lambda2: f64,
    cache: HashMap<(usize, Vec<usize>), f64>,
}

impl Scorer<'_> {
    fn score(&mut self, j: usize, parents: &[usize]) -> Result<f64> {
        let key = (j, parents.to_vec());
        if let Some(&v) = self.cache.get(&key) {
            return Ok(v);
        }
        let v = local_score(self.mode, j, parents, self.sigma, self.lambda2)?;
        self.cache.insert(key, v);
        Ok(v)
    }
}

fn with(parents: &[usize], k: usize) -> Vec<usize> {
    let mut v = parents.to_vec();
    let at = v.binary_search(&k).unwrap_err();
    v.insert(at, k);
    v
}

fn without(parents: &[usize], k: usize) -> Vec<usize> {
    parents.iter().copied().filter(|&x| x != k).collect()
}

/// Whether `to` is reachable from `from`, optionally ignoring one edge.
fn reaches(children: &[Vec<bool>], from: usize, to: usize, skip: Option<(usize, usize)>) -> bool {
    let p = children.len();
    let mut seen = vec![false; p];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(u) = stack.pop() {
        if u == to {
            return true;
        }
        for v in 0..p {
            if children[u][v] && !seen[v] && skip != Some((u, v)) {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    false
}

#[derive(Clone, Copy)]
enum Move {
    Add(usize, usize),
    Delete(usize, usize),
    Reverse(usize, usize),
}

struct Graph {
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<bool>>,
    local: Vec<f64>,
}

impl Graph {
    fn new(parents: Vec<Vec<usize>>, scorer: &mut Scorer) -> Result<Self> {
        let p = parents.len();
        let mut children = vec![vec![false; p]; p];
        let mut local = Vec::with_capacity(p);
        for (j, ps) in parents.iter().enumerate() {
            for &k in ps {
                children[k][j] = true;
            }
            local.push(scorer.score(j, ps)?);
        }
        Ok(Graph {
            parents,
            children,
            local,
        })
    }

    fn set_parents(&mut self, j: usize, ps: Vec<usize>, score: f64) {
        for &k in &self.parents[j] {
            self.children[k][j] = false;
        }
        for &k in &ps {
            self.children[k][j] = true;
        }
        self.parents[j] = ps;
        self.local[j] = score;
    }

    fn apply(&mut self, mv: Move, scorer: &mut Scorer) -> Result<()> {
        match mv {
            Move::Add(k, j) => {
                let ps = with(&self.parents[j], k);
                let s = scorer.score(j, &ps)?;
                self.set_parents(j, ps, s);
            }
            Move::Delete(k, j) => {
                let ps = without(&self.parents[j], k);
                let s = scorer.score(j, &ps)?;
                self.set_parents(j, ps, s);
            }
            Move::Reverse(k, j) => {
                let pj = without(&self.parents[j], k);
                let sj = scorer.score(j, &pj)?;
                self.set_parents(j, pj, sj);
                let pk = with(&self.parents[k], j);
                let sk = scorer.score(k, &pk)?;
                self.set_parents(k, pk, sk);
            }
        }
        Ok(())
    }

    /// The steepest improving single-edge move, scanning pairs `(k, j)` in order.
    fn best_move(&self, m: usize, scorer: &mut Scorer) -> Result<Option<Move>> {
        let p = self.parents.len();
        let mut best: Option<(f64, Move)> = None;
        let threshold = |best: &Option<(f64, Move)>| best.map_or(-MIN_IMPROVEMENT, |b| b.0);
        for k in 0..p {
            for j in 0..p {
                if k == j {
                    continue;
                }
                if self.children[k][j] {
                    let dj = scorer.score(j, &without(&self.parents[j], k))? - self.local[j];
                    if dj < threshold(&best) {
                        best = Some((dj, Move::Delete(k, j)));
                    }
                    if self.parents[k].len() < m {
                        let dk = scorer.score(k, &with(&self.parents[k], j))? - self.local[k];
                        if dj + dk < threshold(&best)
                            && !reaches(&self.children, k, j, Some((k, j)))
                        {
                            best = Some((dj + dk, Move::Reverse(k, j)));
                        }
                    }
                } else if !self.children[j][k] && self.parents[j].len() < m {
                    let d = scorer.score(j, &with(&self.parents[j], k))? - self.local[j];
                    if d < threshold(&best) && !reaches(&self.children, j, k, None) {
                        best = Some((d, Move::Add(k, j)));
                    }
                }
            }
        }
        Ok(best.map(|b| b.1))
    }
}

fn forward_select(order: &[usize], m: usize, scorer: &mut Scorer) -> Result<Vec<Vec<usize>>> {
    let p = order.len();
    let mut structure = vec![Vec::new(); p];
    for (pos, &j) in order.iter().enumerate() {
        let mut current = scorer.score(j, &[])?;
        let mut parents: Vec<usize> = Vec::new();
        while parents.len() < m {
            let mut pick: Option<(f64, usize)> = None;
            for &k in &order[pos + 1..] {
                if parents.contains(&k) {
                    continue;
                }
                let s = scorer.score(j, &with(&parents, k))?;
                if s < current - MIN_IMPROVEMENT && pick.is_none_or(|b| s < b.0) {
                    pick = Some((s, k));
                }
            }
            match pick {
                Some((s, k)) => {
                    parents = with(&parents, k);
                    current = s;
                }
                None => break,
            }
        }
        structure[j] = parents;
    }
    Ok(structure)
}

fn climb(
    sigma: &CovarianceMatrix,
    opts: &GreedyOptions,
    m: usize,
    restart: usize,
) -> Result<(f64, Vec<Vec<usize>>, Vec<f64>)> {
    let p = sigma.p();
    let mut scorer = Scorer {
        sigma,
        mode: opts.mode,
        lambda2: opts.lambda2,
        cache: HashMap::new(),
    };
    let start = if restart == 0 {
        vec![Vec::new(); p]
    } else {
        let mut rng = ChaCha20Rng::seed_from_u64(opts.seed);
        rng.set_stream(restart as u64);
        let mut order: Vec<usize> = (0..p).collect();
        order.shuffle(&mut rng);
        forward_select(&order, m, &mut scorer)?
    };
    let mut graph = Graph::new(start, &mut scorer)?;
    while let Some(mv) = graph.best_move(m, &mut scorer)? {
        graph.apply(mv, &mut scorer)?;
    }
    Ok((graph.local.iter().sum(), graph.parents, graph.local))
}

/// Steepest-descent hill climbing over single-edge additions, deletions and
/// reversals that keep the graph acyclic and within the in-degree cap.
pub fn fit_greedy(sigma_hat: &CovarianceMatrix, opts: &GreedyOptions) -> Result<FitResult> {
    let p = sigma_hat.p();
    if p < 2 {
        return Err(Error::InvalidInput(
            "greedy search needs at least 2 nodes".into(),
        ));
    }
    if !(opts.lambda2 >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "lambda2 = {} must be >= 0",
            opts.lambda2
        )));
    }
    let m = opts.max_parents.min(p - 1);
    let runs = (0..opts.restarts.max(1))
        .into_par_iter()
        .map(|r| climb(sigma_hat, opts, m, r))
        .collect::<Result<Vec<_>>>()?;
    let (_, structure, node_scores) = runs
        .into_iter()
        .reduce(|best, cur| if cur.0 < best.0 { cur } else { best })
        .expect("at least one restart");
    assemble(
        structure,
        node_scores,
        sigma_hat,
        opts.mode,
        opts.lambda2,
        Method::Greedy,
    )
}
