//! From knockoffs to a selected set: coefficient-difference statistics,
//! FDR and PFER thresholds, and aggregation over repeated knockoff draws.

mod derandomized;
mod threshold;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knockgen::KnockoffSet;
use crate::penreg::{fit_cv, FitSpec};
use crate::rng::rng_from_seed;

pub use derandomized::{derandomized_select, derandomized_select_many, DerandomizedConfig};
pub use threshold::{threshold_fdr, threshold_pfer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    /// `|β̂ⱼ| − |β̂*ⱼ|` from a cross-validated fit on `[X, X*]`.
    CoefDiff,
    /// Absolute penalized coefficients (no knockoffs).
    Coefficient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WStatistics {
    pub w: Vec<f64>,
    pub lambda_used: f64,
    pub statistic_kind: StatisticKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BudgetKind {
    Fdr,
    Pfer,
}

/// Error budget: target FDR level or expected number of false selections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub kind: BudgetKind,
    pub value: f64,
}

impl Budget {
    pub fn fdr(q: f64) -> Self {
        Self {
            kind: BudgetKind::Fdr,
            value: q,
        }
    }

    pub fn pfer(v: usize) -> Self {
        Self {
            kind: BudgetKind::Pfer,
            value: v as f64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            BudgetKind::Fdr if !(self.value > 0.0 && self.value < 1.0) => Err(Error::InvalidInput(
                format!("FDR level {} not in (0, 1)", self.value),
            )),
            BudgetKind::Pfer if !(self.value >= 1.0 && self.value.fract() == 0.0) => {
                Err(Error::InvalidInput(format!(
                    "PFER budget {} must be an integer >= 1",
                    self.value
                )))
            }
            _ => Ok(()),
        }
    }

    /// Applies the matching single-run threshold rule.
    pub fn threshold(&self, w: &WStatistics) -> SelectionResult {
        match self.kind {
            BudgetKind::Fdr => threshold_fdr(w, self.value),
            BudgetKind::Pfer => threshold_pfer(w, self.value as usize),
        }
    }
}

impl std::fmt::Display for Budget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.kind {
            BudgetKind::Fdr => write!(f, "fdr={}", self.value),
            BudgetKind::Pfer => write!(f, "pfer={}", self.value),
        }
    }
}

/// Selected features plus the statistics behind the decision.
///
/// For a single run `threshold` is the cut-off on `w`; after aggregation
/// over several runs it is the cut-off on `frequencies` and
/// `run_thresholds` holds the per-run cut-offs on the statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub selected: Vec<usize>,
    pub w: WStatistics,
    pub threshold: f64,
    pub runs: usize,
    pub frequencies: Vec<f64>,
    pub run_thresholds: Vec<f64>,
}

impl SelectionResult {
    pub(crate) fn single(w: WStatistics, threshold: f64, selected: Vec<usize>) -> Self {
        let mut frequencies = vec![0.0; w.w.len()];
        for &j in &selected {
            frequencies[j] = 1.0;
        }
        Self {
            selected,
            w,
            threshold,
            runs: 1,
            frequencies,
            run_thresholds: vec![threshold],
        }
    }

    /// An empty result over `p` features (used when a level has no predictors).
    pub fn empty(p: usize, kind: StatisticKind) -> Self {
        Self::single(
            WStatistics {
                w: vec![0.0; p],
                lambda_used: 0.0,
                statistic_kind: kind,
            },
            f64::INFINITY,
            Vec::new(),
        )
    }

    pub fn is_selected(&self, j: usize) -> bool {
        self.selected.binary_search(&j).is_ok()
    }
}

/// Coefficient-difference statistics from a cross-validated penalized fit of
/// `y` on `[X, X*]`. The augmented columns are fitted in a seeded random
/// order so that exact ties between an original and its knockoff are not
/// always resolved in favour of the same side.
pub fn compute_w(
    ks: &KnockoffSet,
    y: &[f64],
    weights: Option<&[f64]>,
    spec: &FitSpec,
    seed: u64,
) -> Result<WStatistics> {
    let p = ks.original.cols();
    if ks.knockoff.cols() != p || ks.knockoff.rows() != ks.original.rows() {
        return Err(Error::Dimension(
            "knockoff shape differs from original".into(),
        ));
    }
    if y.len() != ks.original.rows() {
        return Err(Error::Dimension(format!(
            "response has {} rows, design has {}",
            y.len(),
            ks.original.rows()
        )));
    }
    let augmented = ks.augmented();
    let mut order: Vec<usize> = (0..2 * p).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let shuffled = augmented.select_columns(&order);
    let spec = FitSpec {
        weights: weights
            .map(<[f64]>::to_vec)
            .or_else(|| spec.weights.clone()),
        ..spec.clone()
    };
    let fit = fit_cv(&shuffled, y, &spec, seed)?;
    let mut beta = vec![0.0; 2 * p];
    for (pos, &col) in order.iter().enumerate() {
        beta[col] = fit.coefficients[pos];
    }
    Ok(WStatistics {
        w: (0..p).map(|j| beta[j].abs() - beta[p + j].abs()).collect(),
        lambda_used: fit.lambda_selected,
        statistic_kind: StatisticKind::CoefDiff,
    })
}
