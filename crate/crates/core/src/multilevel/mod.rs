//! Two-level decomposition of clustered data.
//!
//! Each level-1 predictor `X` is split into its cluster mean `X̄` and the
//! within-cluster deviation `X̃ = X − X̄`. The deviations carry the level-1
//! selection problem on all rows; the cluster means, together with the
//! cluster-constant predictors `Z`, carry the level-2 problem on one row per
//! cluster, weighted by cluster size.

mod select;

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::DesignMatrix;
use crate::error::{Error, Result};

pub use select::{
    overall_design, select_multilevel, select_multilevel_many, select_overall, select_overall_many,
    CombinedEntry, Level, LevelBudgets, MultilevelSelection, SelectOptions, Selector,
};

pub const WITHIN_SUFFIX: &str = "_within";
pub const MEAN_SUFFIX: &str = "_mean";

pub const ORTHOGONALITY_TOL: f64 = 1e-10;
pub const EQUIVALENCE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteredDataset {
    y: Vec<f64>,
    x_level1: DesignMatrix,
    z_level2: DesignMatrix,
    cluster_id: Vec<u64>,
}

impl ClusteredDataset {
    /// `x_level1` holds the time-varying predictors and `z_level2` the
    /// cluster-constant ones, both stored per row. Either may have zero
    /// columns, not both.
    pub fn new(
        y: Vec<f64>,
        x_level1: DesignMatrix,
        z_level2: DesignMatrix,
        cluster_id: Vec<u64>,
    ) -> Result<Self> {
        let n = y.len();
        if x_level1.rows() != n || z_level2.rows() != n || cluster_id.len() != n {
            return Err(Error::Dimension(format!(
                "rows disagree: y {}, level-1 {}, level-2 {}, cluster ids {}",
                n,
                x_level1.rows(),
                z_level2.rows(),
                cluster_id.len()
            )));
        }
        if x_level1.cols() + z_level2.cols() == 0 {
            return Err(Error::InvalidInput("no predictors".into()));
        }
        if let Some(row) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "response".into(),
                row,
                col: 0,
            });
        }
        let mut first: HashMap<u64, usize> = HashMap::new();
        for (i, &c) in cluster_id.iter().enumerate() {
            let r = *first.entry(c).or_insert(i);
            for h in 0..z_level2.cols() {
                if z_level2.get(i, h) != z_level2.get(r, h) {
                    return Err(Error::NotClusterConstant {
                        column: z_level2.names()[h].clone(),
                        cluster: c.to_string(),
                    });
                }
            }
        }
        Ok(Self {
            y,
            x_level1,
            z_level2,
            cluster_id,
        })
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x_level1(&self) -> &DesignMatrix {
        &self.x_level1
    }

    pub fn z_level2(&self) -> &DesignMatrix {
        &self.z_level2
    }

    pub fn cluster_id(&self) -> &[u64] {
        &self.cluster_id
    }

    pub fn rows(&self) -> usize {
        self.y.len()
    }

    /// Cluster labels in order of first appearance.
    pub fn clusters(&self) -> Vec<u64> {
        let mut seen = HashMap::new();
        let mut out = Vec::new();
        for &c in &self.cluster_id {
            if seen.insert(c, ()).is_none() {
                out.push(c);
            }
        }
        out
    }

    /// Same data with rows reordered.
    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        Ok(Self {
            y: idx.iter().map(|&i| self.y[i]).collect(),
            x_level1: self.x_level1.select_rows(idx)?,
            z_level2: self.z_level2.select_rows(idx)?,
            cluster_id: idx.iter().map(|&i| self.cluster_id[i]).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Level1Problem {
    /// Within-cluster deviations, one row per observation.
    pub x: DesignMatrix,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Level2Problem {
    /// Cluster means of the level-1 predictors followed by the `Z` columns.
    pub design: DesignMatrix,
    pub y: Vec<f64>,
    /// Cluster sizes.
    pub weights: Vec<f64>,
    pub clusters: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSplit {
    pub level1: Level1Problem,
    pub level2: Level2Problem,
    /// Position in `level2.clusters` of every row's cluster.
    pub row_cluster: Vec<usize>,
}

impl LevelSplit {
    pub fn k(&self) -> usize {
        self.level1.x.cols()
    }

    pub fn h(&self) -> usize {
        self.level2.design.cols() - self.k()
    }

    /// Level-2 columns repeated for every row of their cluster.
    pub fn expanded_level2(&self) -> DMatrix<f64> {
        let d = self.level2.design.values();
        DMatrix::from_fn(self.row_cluster.len(), d.ncols(), |i, j| {
            d[(self.row_cluster[i], j)]
        })
    }
}

/// Splits the data into the level-1 and level-2 selection problems.
/// Clusters appear in the level-2 problem in order of first appearance.
pub fn decompose(data: &ClusteredDataset) -> Result<LevelSplit> {
    let n = data.rows();
    let clusters = data.clusters();
    let index: HashMap<u64, usize> = clusters.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let row_cluster: Vec<usize> = data.cluster_id.iter().map(|c| index[c]).collect();
    let j_count = clusters.len();

    let mut sizes = vec![0.0; j_count];
    for &g in &row_cluster {
        sizes[g] += 1.0;
    }
    let cluster_mean = |v: &[f64]| -> Vec<f64> {
        let mut m = vec![0.0; j_count];
        for (i, &g) in row_cluster.iter().enumerate() {
            m[g] += v[i];
        }
        m.iter().zip(&sizes).map(|(s, c)| s / c).collect()
    };

    let k = data.x_level1.cols();
    let h = data.z_level2.cols();
    let mut within = DMatrix::zeros(n, k);
    let mut level2 = DMatrix::zeros(j_count, k + h);
    for c in 0..k {
        let col = data.x_level1.column(c);
        let means = cluster_mean(col);
        for i in 0..n {
            within[(i, c)] = col[i] - means[row_cluster[i]];
        }
        level2.column_mut(c).copy_from_slice(&means);
    }
    for c in 0..h {
        let col = data.z_level2.column(c);
        for (i, &g) in row_cluster.iter().enumerate() {
            level2[(g, k + c)] = col[i];
        }
    }

    let x_names = data.x_level1.names();
    let within_names = x_names
        .iter()
        .map(|s| format!("{s}{WITHIN_SUFFIX}"))
        .collect();
    let level2_names = x_names
        .iter()
        .map(|s| format!("{s}{MEAN_SUFFIX}"))
        .chain(data.z_level2.names().iter().cloned())
        .collect();

    Ok(LevelSplit {
        level1: Level1Problem {
            x: DesignMatrix::new(within, within_names)?,
            y: data.y.clone(),
        },
        level2: Level2Problem {
            design: DesignMatrix::new(level2, level2_names)?,
            y: cluster_mean(&data.y),
            weights: sizes,
            clusters,
        },
        row_cluster,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalityReport {
    pub max_abs_cov: f64,
    pub passed: bool,
}

/// Largest sample covariance, over all rows, between a centred level-1
/// column and any cluster-constant column (cluster means and `Z`).
pub fn check_orthogonality(split: &LevelSplit) -> OrthogonalityReport {
    let n = split.row_cluster.len();
    let wide = split.expanded_level2();
    let mut max_abs_cov: f64 = 0.0;
    if n >= 2 {
        for a in 0..split.k() {
            let xa = split.level1.x.column(a);
            let ma = xa.iter().sum::<f64>() / n as f64;
            for b in 0..wide.ncols() {
                let zb = wide.column(b);
                let mb = zb.sum() / n as f64;
                let cov = xa
                    .iter()
                    .zip(zb.iter())
                    .map(|(x, z)| (x - ma) * (z - mb))
                    .sum::<f64>()
                    / (n - 1) as f64;
                max_abs_cov = max_abs_cov.max(cov.abs());
            }
        }
    }
    OrthogonalityReport {
        max_abs_cov,
        passed: max_abs_cov <= ORTHOGONALITY_TOL,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    /// Intercept first, then the level-2 columns in design order.
    pub weighted: Vec<f64>,
    pub full: Vec<f64>,
    pub max_abs_diff: f64,
    pub passed: bool,
}

fn least_squares(a: DMatrix<f64>, b: DVector<f64>, what: &str) -> Result<Vec<f64>> {
    let (rows, cols) = a.shape();
    if rows < cols {
        return Err(Error::RankDeficient(format!(
            "{what}: {rows} rows for {cols} coefficients"
        )));
    }
    let qr = a.qr();
    let r = qr.r();
    let scale = r.diagonal().amax();
    if let Some(c) = (0..cols).find(|&c| r[(c, c)].abs() <= 1e-10 * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::RankDeficient(format!(
            "{what}: column {c} is collinear"
        )));
    }
    let rhs = qr.q().tr_mul(&b);
    let beta = r
        .solve_upper_triangular(&rhs)
        .ok_or_else(|| Error::RankDeficient(format!("{what}: singular triangular factor")))?;
    Ok(beta.iter().copied().collect())
}

/// Weighted least squares of the cluster means of `y` on the level-2 design
/// (weights = cluster sizes) against ordinary least squares of `y` on the
/// same columns repeated per row. Both fits include an intercept.
pub fn verify_weighted_equivalence(
    data: &ClusteredDataset,
    split: &LevelSplit,
) -> Result<EquivalenceReport> {
    let d = split.level2.design.values();
    let (j_count, p) = d.shape();
    if data.rows() != split.row_cluster.len() {
        return Err(Error::Dimension(
            "split does not belong to this dataset".into(),
        ));
    }
    let sw: Vec<f64> = split.level2.weights.iter().map(|w| w.sqrt()).collect();
    let a = DMatrix::from_fn(j_count, p + 1, |i, c| {
        sw[i] * if c == 0 { 1.0 } else { d[(i, c - 1)] }
    });
    let b = DVector::from_fn(j_count, |i, _| sw[i] * split.level2.y[i]);
    let weighted = least_squares(a, b, "level-2 design")?;

    let wide = split.expanded_level2();
    let n = wide.nrows();
    let a = DMatrix::from_fn(n, p + 1, |i, c| if c == 0 { 1.0 } else { wide[(i, c - 1)] });
    let full = least_squares(
        a,
        DVector::from_column_slice(data.y()),
        "expanded level-2 design",
    )?;

    let max_abs_diff = weighted
        .iter()
        .zip(&full)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(EquivalenceReport {
        weighted,
        full,
        max_abs_diff,
        passed: max_abs_diff <= EQUIVALENCE_TOL,
    })
}
