//! Monte Carlo design for clustered data with repeated measures: correlated
//! cluster-level predictors, level-1 predictors built from their cluster
//! means plus a time trend and correlated noise, and a random-intercept
//! response.

mod study;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::design::DesignMatrix;
use crate::error::{Error, Result};
use crate::multilevel::ClusteredDataset;
use crate::rng::rng_from_seed;

pub use study::{
    run_study, ElasticNetVariant, Mode, Outcome, ReplicationRecord, ReportRow, SimReport, StudyPlan,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Number of clusters.
    pub j: usize,
    pub n_per_cluster: usize,
    /// Time-varying (level-1) predictors.
    pub k: usize,
    /// Time-constant (level-2) predictors.
    pub h: usize,
    /// Linear time slope of the level-1 predictors.
    pub gamma: f64,
    pub sigma_u2: f64,
    pub sigma_e2: f64,
    /// Non-zero coefficients keyed `beta_w_<k>` (within), `beta_b_<k>`
    /// (between) and `delta_<h>` (cluster-level), 1-based.
    pub coefficients: BTreeMap<String, f64>,
    /// 1-based indices of the `Z` columns turned into indicators of `Z > 0`.
    pub dichotomize_idx: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        let coefficients = [
            ("beta_w_1", 1.0),
            ("beta_w_7", 1.0),
            ("beta_w_2", 0.5),
            ("beta_w_8", 0.5),
            ("beta_b_1", 1.0),
            ("beta_b_13", 1.0),
            ("delta_13", 1.0),
            ("beta_b_7", 0.5),
            ("beta_b_19", 0.5),
            ("delta_19", 0.5),
            ("delta_1", 1.0),
            ("delta_7", 0.5),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        Self {
            j: 300,
            n_per_cluster: 5,
            k: 20,
            h: 20,
            gamma: 0.5,
            sigma_u2: 4.0,
            sigma_e2: 1.0,
            coefficients,
            dichotomize_idx: vec![1, 2, 6, 7, 11, 12, 16, 17],
            reps: 100,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Coef {
    Within(usize),
    Between(usize),
    Delta(usize),
}

impl SimConfig {
    fn parse_coefficient(&self, name: &str) -> Result<Coef> {
        let bad = || Error::InvalidInput(format!("unknown coefficient `{name}`"));
        let (kind, idx) = if let Some(i) = name.strip_prefix("beta_w_") {
            (Coef::Within(0), i)
        } else if let Some(i) = name.strip_prefix("beta_b_") {
            (Coef::Between(0), i)
        } else if let Some(i) = name.strip_prefix("delta_") {
            (Coef::Delta(0), i)
        } else {
            return Err(bad());
        };
        let idx: usize = idx.parse().map_err(|_| bad())?;
        let limit = if matches!(kind, Coef::Delta(_)) {
            self.h
        } else {
            self.k
        };
        if idx == 0 || idx > limit {
            return Err(bad());
        }
        Ok(match kind {
            Coef::Within(_) => Coef::Within(idx - 1),
            Coef::Between(_) => Coef::Between(idx - 1),
            Coef::Delta(_) => Coef::Delta(idx - 1),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.j < 2 || self.n_per_cluster < 1 {
            return Err(Error::InvalidInput(
                "need at least 2 clusters of size >= 1".into(),
            ));
        }
        if self.k + self.h == 0 {
            return Err(Error::InvalidInput("no predictors".into()));
        }
        if !(self.sigma_u2 > 0.0 && self.sigma_e2 > 0.0) {
            return Err(Error::InvalidInput("variances must be positive".into()));
        }
        if !self.gamma.is_finite() {
            return Err(Error::InvalidInput("gamma must be finite".into()));
        }
        if self.reps == 0 {
            return Err(Error::InvalidInput("reps must be at least 1".into()));
        }
        for (name, v) in &self.coefficients {
            self.parse_coefficient(name)?;
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "coefficient `{name}` is not finite"
                )));
            }
        }
        if let Some(bad) = self.dichotomize_idx.iter().find(|&&i| i == 0 || i > self.h) {
            return Err(Error::InvalidInput(format!(
                "dichotomize index {bad} outside 1..={}",
                self.h
            )));
        }
        Ok(())
    }

    /// Coefficient vectors `(β_W, β_B, δ)`.
    fn coefficient_vectors(&self) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let (mut w, mut b, mut d) = (vec![0.0; self.k], vec![0.0; self.k], vec![0.0; self.h]);
        for (name, &v) in &self.coefficients {
            match self.parse_coefficient(name)? {
                Coef::Within(i) => w[i] = v,
                Coef::Between(i) => b[i] = v,
                Coef::Delta(i) => d[i] = v,
            }
        }
        Ok((w, b, d))
    }

    pub fn truth(&self) -> Result<TruthSet> {
        let (w, b, d) = self.coefficient_vectors()?;
        let nz = |v: &[f64], offset: usize| -> Vec<usize> {
            v.iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(i, _)| i + offset)
                .collect()
        };
        let mut level2 = nz(&b, 0);
        level2.extend(nz(&d, self.k));
        Ok(TruthSet {
            nonnull_level1: nz(&w, 0),
            nonnull_level2: level2,
            k: self.k,
            h: self.h,
        })
    }
}

/// Non-null features, 0-based: level-1 indices into the within columns,
/// level-2 indices into `[cluster means ∥ Z]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthSet {
    pub nonnull_level1: Vec<usize>,
    pub nonnull_level2: Vec<usize>,
    pub k: usize,
    pub h: usize,
}

impl TruthSet {
    /// Indices into `[X̃ ∥ X̄ ∥ Z]`, the layout shared by the overall design
    /// and the combined level-1/level-2 listing.
    pub fn overall(&self) -> Vec<usize> {
        self.nonnull_level1
            .iter()
            .copied()
            .chain(self.nonnull_level2.iter().map(|j| j + self.k))
            .collect()
    }
}

fn check_pd(m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let min = m.clone().symmetric_eigenvalues().min();
    if min <= 0.0 {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: min,
        });
    }
    Ok(m)
}

/// Correlation of the cluster-level vector `(X̄₁..X̄_K, Z₁..Z_H)`.
///
/// Four blocks, each holding `K/4` cluster means and `H/4` `Z` columns with
/// the same indices. Within a block every pair has correlation 0.60 (0.30 in
/// the fourth block). Between blocks 1, 2 and 4 a variable has 0.30 with
/// its counterpart (same type, same position in the block, e.g. `X̄₁` and
/// `X̄₆`) and 0.15 with everything else; every pair involving block 3 across
/// blocks has 0.15. Giving all same-type pairs 0.30 is not positive definite.
pub fn build_level2_correlation(k: usize, h: usize) -> Result<DMatrix<f64>> {
    if k != h || k == 0 || !k.is_multiple_of(4) {
        return Err(Error::InvalidInput(format!(
            "level-2 correlation needs K = H, a positive multiple of 4 (got K={k}, H={h})"
        )));
    }
    let b = k / 4;
    let block = |i: usize| (i % k) / b;
    let slot = |i: usize| (i / k, (i % k) % b);
    let m = DMatrix::from_fn(2 * k, 2 * k, |r, c| {
        if r == c {
            1.0
        } else if block(r) == block(c) {
            if block(r) == 3 {
                0.30
            } else {
                0.60
            }
        } else if block(r) == 2 || block(c) == 2 || slot(r) != slot(c) {
            0.15
        } else {
            0.30
        }
    });
    check_pd(m)
}

/// Correlation of the level-1 noise. Features split into groups at
/// `round(0.3K)` and `round(0.8K)` (1–6, 7–16, 17–20 for K = 20): 0.60
/// within the first and last group and between them, 0.30 within the middle
/// group, 0.15 elsewhere.
pub fn build_level1_correlation(k: usize) -> Result<DMatrix<f64>> {
    if k == 0 {
        return Err(Error::InvalidInput(
            "level-1 correlation needs K >= 1".into(),
        ));
    }
    let a = (0.3 * k as f64).round() as usize;
    let b = (0.8 * k as f64).round() as usize;
    let group = |i: usize| {
        if i < a {
            0
        } else if i < b {
            1
        } else {
            2
        }
    };
    let m = DMatrix::from_fn(k, k, |r, c| match (group(r), group(c)) {
        _ if r == c => 1.0,
        (1, 1) => 0.30,
        (1, _) | (_, 1) => 0.15,
        _ => 0.60,
    });
    check_pd(m)
}

fn cholesky(m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::Factorization("Cholesky of a correlation matrix failed".into()))
}

/// One simulated dataset. Level-1 predictors are named `X1..XK`, level-2
/// predictors `Z1..ZH`, clusters are labelled `1..J`. The response uses
/// the empirical cluster means of the generated `X` for both the within
/// and the between terms.
pub fn generate_dataset(cfg: &SimConfig, rep_seed: u64) -> Result<(ClusteredDataset, TruthSet)> {
    cfg.validate()?;
    let (k, h, jn, nj) = (cfg.k, cfg.h, cfg.j, cfg.n_per_cluster);
    let (beta_w, beta_b, delta) = cfg.coefficient_vectors()?;
    let l2 = cholesky(build_level2_correlation(k, h)?)?;
    let l1 = cholesky(build_level1_correlation(k)?)?;

    let mut rng = rng_from_seed(rep_seed);
    let mut normal = |d: usize| DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let n = jn * nj;
    let mut x = DMatrix::zeros(n, k);
    let mut z = DMatrix::zeros(n, h);
    let mut ids = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(jn);
    let centre = (nj as f64 - 1.0) / 2.0;
    for j in 0..jn {
        let w = &l2 * normal(k + h);
        let mut zj: Vec<f64> = w.rows(k, h).iter().copied().collect();
        for &d in &cfg.dichotomize_idx {
            zj[d - 1] = if zj[d - 1] > 0.0 { 1.0 } else { 0.0 };
        }
        for i in 0..nj {
            let row = j * nj + i;
            let time = i as f64 - centre;
            let v = &l1 * normal(k);
            for c in 0..k {
                x[(row, c)] = w[c] + cfg.gamma * time + v[c];
            }
            for c in 0..h {
                z[(row, c)] = zj[c];
            }
            ids.push(j as u64 + 1);
        }
        u.push(cfg.sigma_u2.sqrt() * normal(1)[0]);
    }
    let e = normal(n);

    let mut y = vec![0.0; n];
    for (j, uj) in u.iter().enumerate().take(jn) {
        let rows = j * nj..(j + 1) * nj;
        let means: Vec<f64> = (0..k)
            .map(|c| rows.clone().map(|r| x[(r, c)]).sum::<f64>() / nj as f64)
            .collect();
        for r in rows {
            let mut v = uj + cfg.sigma_e2.sqrt() * e[r];
            for c in 0..k {
                v += beta_w[c] * (x[(r, c)] - means[c]) + beta_b[c] * means[c];
            }
            for c in 0..h {
                v += delta[c] * z[(r, c)];
            }
            y[r] = v;
        }
    }

    let xn = (1..=k).map(|i| format!("X{i}")).collect();
    let zn = (1..=h).map(|i| format!("Z{i}")).collect();
    let data = ClusteredDataset::new(y, DesignMatrix::new(x, xn)?, DesignMatrix::new(z, zn)?, ids)?;
    Ok((data, cfg.truth()?))
}

/// Error counts of one selection against the truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub selected: usize,
    pub fp: usize,
    pub tp: usize,
    /// `fp / max(1, selected)`.
    pub fdp: f64,
    /// `tp / |truth|`, 1 when the truth is empty.
    pub tpr: f64,
}

pub fn score(selected: &[usize], truth: &[usize]) -> Score {
    let tp = selected.iter().filter(|j| truth.contains(j)).count();
    let fp = selected.len() - tp;
    Score {
        selected: selected.len(),
        fp,
        tp,
        fdp: fp as f64 / selected.len().max(1) as f64,
        tpr: if truth.is_empty() {
            1.0
        } else {
            tp as f64 / truth.len() as f64
        },
    }
}
