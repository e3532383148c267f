//! Completed partially directed graphs of Markov equivalence classes.

use crate::error::{Error, Result};
use crate::model::DagModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mark {
    None,
    /// Oriented from the smaller to the larger node index.
    Forward,
    /// Oriented from the larger to the smaller node index.
    Backward,
    Undirected,
}

/// Skeleton plus compelled orientations of a DAG's equivalence class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cpdag {
    p: usize,
    directed: Vec<Vec<bool>>,
    undirected: Vec<Vec<bool>>,
}

impl Cpdag {
    pub fn from_model(model: &DagModel) -> Self {
        let parents = model.parent_sets();
        Self::from_parent_sets(&parents)
    }

    pub fn from_parent_sets(parents: &[Vec<usize>]) -> Self {
        let p = parents.len();
        let mut adj = vec![vec![false; p]; p];
        for (j, ps) in parents.iter().enumerate() {
            for &k in ps {
                adj[k][j] = true;
                adj[j][k] = true;
            }
        }
        let mut g = Cpdag {
            p,
            directed: vec![vec![false; p]; p],
            undirected: adj.clone(),
        };
        // v-structures a → b ← c with a, c non-adjacent
        for (b, ps) in parents.iter().enumerate() {
            for (i, &a) in ps.iter().enumerate() {
                for &c in &ps[i + 1..] {
                    if !adj[a][c] {
                        g.orient(a, b);
                        g.orient(c, b);
                    }
                }
            }
        }
        g.meek_closure(&adj);
        g
    }

    fn orient(&mut self, from: usize, to: usize) {
        self.undirected[from][to] = false;
        self.undirected[to][from] = false;
        self.directed[from][to] = true;
    }

    fn meek_closure(&mut self, adj: &[Vec<bool>]) {
        let p = self.p;
        loop {
            let mut changed = false;
            for a in 0..p {
                for b in 0..p {
                    if !self.undirected[a][b] {
                        continue;
                    }
                    // R1: c → a - b, c and b non-adjacent
                    let r1 = (0..p).any(|c| self.directed[c][a] && !adj[c][b] && c != b);
                    // R2: a → c → b
                    let r2 = (0..p).any(|c| self.directed[a][c] && self.directed[c][b]);
                    // R3: a - c → b, a - d → b, c and d non-adjacent
                    let r3 = (0..p).any(|c| {
                        self.undirected[a][c]
                            && self.directed[c][b]
                            && (c + 1..p)
                                .any(|d| self.undirected[a][d] && self.directed[d][b] && !adj[c][d])
                    });
                    if r1 || r2 || r3 {
                        self.orient(a, b);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// State of the pair `(i, j)`, `i < j`.
    pub fn mark(&self, i: usize, j: usize) -> Mark {
        if self.undirected[i][j] {
            Mark::Undirected
        } else if self.directed[i][j] {
            Mark::Forward
        } else if self.directed[j][i] {
            Mark::Backward
        } else {
            Mark::None
        }
    }

    pub fn undirected_count(&self) -> usize {
        let mut c = 0;
        for i in 0..self.p {
            for j in (i + 1)..self.p {
                c += usize::from(self.undirected[i][j]);
            }
        }
        c
    }
}

/// Node pairs whose CPDAG marks differ (absent, either direction, undirected).
pub fn shd(a: &Cpdag, b: &Cpdag) -> Result<usize> {
    if a.p != b.p {
        return Err(Error::Dimension(format!("{} vs {} nodes", a.p, b.p)));
    }
    let mut d = 0;
    for i in 0..a.p {
        for j in (i + 1)..a.p {
            d += usize::from(a.mark(i, j) != b.mark(i, j));
        }
    }
    Ok(d)
}

/// Structural Hamming distance between the CPDAGs of two models.
pub fn cpdag_shd(m1: &DagModel, m2: &DagModel) -> Result<usize> {
    shd(&Cpdag::from_model(m1), &Cpdag::from_model(m2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn dag(p: usize, edges: &[(usize, usize)]) -> DagModel {
        let mut b = DMatrix::zeros(p, p);
        for &(k, j) in edges {
            b[(k, j)] = 0.7;
        }
        DagModel::new(b, DVector::from_element(p, 1.0)).unwrap()
    }

    #[test]
    fn chains_are_equivalent() {
        let down = dag(3, &[(1, 0), (2, 1)]);
        let up = dag(3, &[(0, 1), (1, 2)]);
        assert_eq!(cpdag_shd(&down, &up).unwrap(), 0);
        assert_eq!(Cpdag::from_model(&down).undirected_count(), 2);
    }

    #[test]
    fn collider_differs_from_chain() {
        let collider = dag(3, &[(0, 1), (2, 1)]);
        let chain = dag(3, &[(0, 1), (1, 2)]);
        assert!(cpdag_shd(&collider, &chain).unwrap() >= 1);
        let c = Cpdag::from_model(&collider);
        assert_eq!(c.mark(0, 1), Mark::Forward);
        assert_eq!(c.mark(1, 2), Mark::Backward);
    }

    #[test]
    fn meek_r1_propagates() {
        // 0 → 2 ← 1 and 2 → 3: the collider compels 2 → 3.
        let g = dag(4, &[(0, 2), (1, 2), (2, 3)]);
        let c = Cpdag::from_model(&g);
        assert_eq!(c.mark(2, 3), Mark::Forward);
        assert_eq!(c.undirected_count(), 0);
    }

    #[test]
    fn meek_r2_orients() {
        // 0 → 1 ← 3, 1 → 2, 0 → 2: R1 gives 1 → 2 (3 ⟂ 2), R2 gives 0 → 2.
        let g = dag(4, &[(0, 1), (3, 1), (1, 2), (0, 2)]);
        let c = Cpdag::from_model(&g);
        assert_eq!(c.mark(0, 2), Mark::Forward);
        assert_eq!(c.undirected_count(), 0);
    }

    #[test]
    fn identical_models_zero() {
        let g = dag(4, &[(0, 1), (1, 2), (0, 3)]);
        assert_eq!(cpdag_shd(&g, &g).unwrap(), 0);
        let e = dag(4, &[]);
        assert_eq!(cpdag_shd(&g, &e).unwrap(), 3);
    }
}
