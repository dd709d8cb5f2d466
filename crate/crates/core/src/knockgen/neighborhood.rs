//! Sparse dependence graph used to restrict sequential knockoff regressions.

use crate::design::DesignMatrix;
use crate::error::{Error, Result};
use crate::penreg::{fit_cv, FitSpec};
use crate::rng::derive_seed;

/// Symmetric adjacency lists, one sorted list per feature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    neighbors: Vec<Vec<usize>>,
}

impl Adjacency {
    pub fn empty(p: usize) -> Self {
        Self {
            neighbors: vec![Vec::new(); p],
        }
    }

    /// Builds from an edge list; rejects self-loops and out-of-range indices.
    pub fn from_edges(p: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = Self::empty(p);
        for &(a, b) in edges {
            if a >= p || b >= p || a == b {
                return Err(Error::InvalidInput(format!("invalid edge ({a}, {b})")));
            }
            adj.neighbors[a].push(b);
            adj.neighbors[b].push(a);
        }
        for list in &mut adj.neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Ok(adj)
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn neighbors(&self, j: usize) -> &[usize] {
        &self.neighbors[j]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.neighbors[a].binary_search(&b).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.len()).all(|a| self.neighbors[a].iter().all(|&b| self.has_edge(b, a)))
    }
}

/// Lasso neighborhood selection: column `j` is regressed on all other
/// columns with `spec` (cross-validated), and `(j, k)` becomes an edge when
/// each regression selects the other column.
pub fn estimate_neighborhoods(x: &DesignMatrix, spec: &FitSpec, seed: u64) -> Result<Adjacency> {
    let p = x.cols();
    if p < 2 {
        return Err(Error::InvalidInput(
            "neighborhoods need at least 2 features".into(),
        ));
    }
    let mut selects = vec![vec![false; p]; p];
    for (j, row) in selects.iter_mut().enumerate() {
        let others: Vec<usize> = (0..p).filter(|&k| k != j).collect();
        let fit = fit_cv(
            &x.select_columns(&others),
            x.column(j),
            spec,
            derive_seed(seed, "neighborhood", j as u64),
        )?;
        for (pos, &k) in others.iter().enumerate() {
            row[k] = fit.coefficients[pos] != 0.0;
        }
    }
    let edges: Vec<(usize, usize)> = (0..p)
        .flat_map(|a| (a + 1..p).map(move |b| (a, b)))
        .filter(|&(a, b)| selects[a][b] && selects[b][a])
        .collect();
    Adjacency::from_edges(p, &edges)
}
