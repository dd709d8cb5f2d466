use serde::{Deserialize, Serialize};

use super::{decompose, ClusteredDataset, LevelSplit};
use crate::design::DesignMatrix;
use crate::error::Result;
use crate::filter::{
    derandomized_select_many, Budget, DerandomizedConfig, SelectionResult, StatisticKind,
    WStatistics,
};
use crate::knockgen::KnockoffMethod;
use crate::penreg::{fit_cv, FitSpec};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selector {
    /// Non-zero coefficients of a cross-validated elastic net.
    Lasso,
    /// Gaussian knockoffs aggregated over repeated draws.
    Derandomized,
    /// Sequential knockoffs aggregated over repeated draws.
    Sequential,
}

impl std::fmt::Display for Selector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Selector::Lasso => "lasso",
            Selector::Derandomized => "derandomized",
            Selector::Sequential => "sequential",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelBudgets {
    pub level1: Budget,
    pub level2: Budget,
}

impl LevelBudgets {
    pub fn same(budget: Budget) -> Self {
        Self {
            level1: budget,
            level2: budget,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SelectOptions {
    /// Elastic net used by the lasso selector and for knockoff statistics.
    pub penreg: FitSpec,
    /// Regressions inside the sequential knockoff generator.
    pub generator: FitSpec,
    pub runs: usize,
    pub eta: f64,
    pub neighborhoods: bool,
    pub parallel: bool,
}

impl Default for SelectOptions {
    fn default() -> Self {
        Self {
            penreg: FitSpec::default(),
            generator: FitSpec::default(),
            runs: 31,
            eta: 0.5,
            neighborhoods: true,
            parallel: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Level1,
    Level2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedEntry {
    pub name: String,
    pub level: Level,
    pub selected: bool,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultilevelSelection {
    pub level1_result: SelectionResult,
    pub level2_result: SelectionResult,
    pub level1_names: Vec<String>,
    pub level2_names: Vec<String>,
    /// Every level-1 feature followed by every level-2 feature.
    pub combined: Vec<CombinedEntry>,
}

impl MultilevelSelection {
    pub fn selected_names(&self) -> Vec<&str> {
        self.combined
            .iter()
            .filter(|e| e.selected)
            .map(|e| e.name.as_str())
            .collect()
    }
}

fn run_selector(
    x: &DesignMatrix,
    y: &[f64],
    weights: Option<&[f64]>,
    selector: Selector,
    budgets: &[Budget],
    options: &SelectOptions,
    seed: u64,
) -> Result<Vec<SelectionResult>> {
    for b in budgets {
        b.validate()?;
    }
    if x.cols() == 0 {
        let kind = match selector {
            Selector::Lasso => StatisticKind::Coefficient,
            _ => StatisticKind::CoefDiff,
        };
        return Ok(budgets
            .iter()
            .map(|_| SelectionResult::empty(0, kind))
            .collect());
    }
    let method = match selector {
        Selector::Lasso => {
            let spec = options
                .penreg
                .clone()
                .with_weights(weights.map(<[f64]>::to_vec));
            let fit = fit_cv(x, y, &spec, seed)?;
            let w = WStatistics {
                w: fit.coefficients.iter().map(|b| b.abs()).collect(),
                lambda_used: fit.lambda_selected,
                statistic_kind: StatisticKind::Coefficient,
            };
            let result = SelectionResult::single(w, f64::MIN_POSITIVE, fit.nonzero());
            return Ok(vec![result; budgets.len()]);
        }
        Selector::Derandomized => KnockoffMethod::Gaussian,
        Selector::Sequential => KnockoffMethod::Sequential,
    };
    let config = DerandomizedConfig {
        runs: options.runs,
        eta: options.eta,
        method,
        stat_spec: options.penreg.clone(),
        generator_spec: options.generator.clone(),
        feature_kinds: None,
        neighborhoods: options.neighborhoods,
        parallel: options.parallel,
    };
    derandomized_select_many(x, y, weights, budgets, &config, seed)
}

// Rows sorted by their values so that results do not depend on the input
// row order or on the cluster labels.
fn canonical(data: &ClusteredDataset) -> Result<ClusteredDataset> {
    let x = data.x_level1();
    let z = data.z_level2();
    let key = |i: usize| {
        std::iter::once(data.y()[i])
            .chain((0..x.cols()).map(move |c| x.get(i, c)))
            .chain((0..z.cols()).map(move |c| z.get(i, c)))
    };
    let mut order: Vec<usize> = (0..data.rows()).collect();
    order.sort_by(|&a, &b| {
        key(a)
            .zip(key(b))
            .map(|(u, v)| u.total_cmp(&v))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    data.select_rows(&order)
}

fn both<A: Send, B: Send>(
    parallel: bool,
    a: impl FnOnce() -> A + Send,
    b: impl FnOnce() -> B + Send,
) -> (A, B) {
    if parallel {
        rayon::join(a, b)
    } else {
        (a(), b())
    }
}

/// Separate selection on the level-1 problem (within-cluster deviations,
/// all rows, unit weights) and the level-2 problem (cluster means and
/// cluster-level predictors, one row per cluster, weighted by cluster size),
/// each under its own budget. Knockoffs for level 2 are generated from the
/// unweighted cluster-level rows; weights enter only the fitted statistics.
/// The lasso selector ignores the budgets.
pub fn select_multilevel(
    data: &ClusteredDataset,
    selector: Selector,
    budgets: &LevelBudgets,
    options: &SelectOptions,
    seed: u64,
) -> Result<MultilevelSelection> {
    let mut out =
        select_multilevel_many(data, selector, std::slice::from_ref(budgets), options, seed)?;
    Ok(out.pop().expect("one budget pair"))
}

/// [`select_multilevel`] for several budget pairs sharing the same knockoff
/// draws; each result equals a separate call with the same seed.
pub fn select_multilevel_many(
    data: &ClusteredDataset,
    selector: Selector,
    budgets: &[LevelBudgets],
    options: &SelectOptions,
    seed: u64,
) -> Result<Vec<MultilevelSelection>> {
    let split = decompose(&canonical(data)?)?;
    let l1: Vec<Budget> = budgets.iter().map(|b| b.level1).collect();
    let l2: Vec<Budget> = budgets.iter().map(|b| b.level2).collect();
    let (level1, level2) = both(
        options.parallel,
        || {
            run_selector(
                &split.level1.x,
                &split.level1.y,
                None,
                selector,
                &l1,
                options,
                derive_seed(seed, "level1", 0),
            )
        },
        || {
            run_selector(
                &split.level2.design,
                &split.level2.y,
                Some(&split.level2.weights),
                selector,
                &l2,
                options,
                derive_seed(seed, "level2", 0),
            )
        },
    );
    let (level1, level2) = (level1?, level2?);

    let level1_names = split.level1.x.names().to_vec();
    let level2_names = split.level2.design.names().to_vec();
    let entries = |names: &[String], r: &SelectionResult, level: Level| -> Vec<CombinedEntry> {
        names
            .iter()
            .enumerate()
            .map(|(j, name)| CombinedEntry {
                name: name.clone(),
                level,
                selected: r.is_selected(j),
                frequency: r.frequencies[j],
            })
            .collect()
    };
    Ok(level1
        .into_iter()
        .zip(level2)
        .map(|(a, b)| {
            let mut combined = entries(&level1_names, &a, Level::Level1);
            combined.extend(entries(&level2_names, &b, Level::Level2));
            MultilevelSelection {
                level1_result: a,
                level2_result: b,
                level1_names: level1_names.clone(),
                level2_names: level2_names.clone(),
                combined,
            }
        })
        .collect())
}

/// `[X̃ ∥ X̄ ∥ Z]` over all rows, the cluster-level columns repeated per row.
pub fn overall_design(split: &LevelSplit) -> Result<DesignMatrix> {
    let wide = DesignMatrix::new(
        split.expanded_level2(),
        split.level2.design.names().to_vec(),
    )?;
    split.level1.x.hcat(&wide)
}

/// Baseline that ignores the two-level structure: one selection over the
/// within, cluster-mean and cluster-level columns together, all rows, unit
/// weights. Column order follows [`overall_design`].
pub fn select_overall(
    data: &ClusteredDataset,
    selector: Selector,
    budget: &Budget,
    options: &SelectOptions,
    seed: u64,
) -> Result<SelectionResult> {
    let mut out = select_overall_many(data, selector, std::slice::from_ref(budget), options, seed)?;
    Ok(out.pop().expect("one budget"))
}

pub fn select_overall_many(
    data: &ClusteredDataset,
    selector: Selector,
    budgets: &[Budget],
    options: &SelectOptions,
    seed: u64,
) -> Result<Vec<SelectionResult>> {
    let split = decompose(&canonical(data)?)?;
    let x = overall_design(&split)?;
    run_selector(
        &x,
        &split.level1.y,
        None,
        selector,
        budgets,
        options,
        derive_seed(seed, "overall", 0),
    )
}
