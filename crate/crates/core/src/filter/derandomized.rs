//! Aggregation of knockoff selections over independent knockoff draws.

use rayon::prelude::*;

use super::{compute_w, Budget, SelectionResult, StatisticKind, WStatistics};
use crate::design::DesignMatrix;
use crate::error::{Error, Result};
use crate::knockgen::{
    detect_kinds, estimate_gaussian_model, estimate_neighborhoods, sample_gaussian_knockoffs,
    sample_sequential_knockoffs, FeatureKind, GaussianKnockoffModel, KnockoffMethod, KnockoffSet,
    SequentialKnockoffSpec,
};
use crate::penreg::FitSpec;
use crate::rng::derive_seed;

#[derive(Debug, Clone)]
pub struct DerandomizedConfig {
    pub runs: usize,
    /// Minimum selection frequency across runs.
    pub eta: f64,
    pub method: KnockoffMethod,
    /// Penalized fit on `[X, X*]` that produces the statistics.
    pub stat_spec: FitSpec,
    /// Regressions inside the sequential generator and neighborhood search.
    pub generator_spec: FitSpec,
    /// Detected from the data when absent.
    pub feature_kinds: Option<Vec<FeatureKind>>,
    /// Restrict sequential regressions to estimated neighborhoods.
    pub neighborhoods: bool,
    /// Spread the runs over the rayon pool. Results do not depend on it.
    pub parallel: bool,
}

impl Default for DerandomizedConfig {
    fn default() -> Self {
        Self {
            runs: 31,
            eta: 0.5,
            method: KnockoffMethod::Sequential,
            stat_spec: FitSpec::default(),
            generator_spec: FitSpec::default(),
            feature_kinds: None,
            neighborhoods: true,
            parallel: false,
        }
    }
}

impl DerandomizedConfig {
    pub fn single(method: KnockoffMethod) -> Self {
        Self {
            runs: 1,
            method,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::InvalidInput("runs must be at least 1".into()));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "eta {} not in (0, 1]",
                self.eta
            )));
        }
        self.stat_spec.validate()?;
        self.generator_spec.validate()
    }
}

enum Generator {
    Gaussian(GaussianKnockoffModel),
    Sequential(SequentialKnockoffSpec),
}

impl Generator {
    fn build(x: &DesignMatrix, config: &DerandomizedConfig, seed: u64) -> Result<Self> {
        Ok(match config.method {
            KnockoffMethod::Gaussian => Generator::Gaussian(estimate_gaussian_model(x)?),
            KnockoffMethod::Sequential => {
                let neighborhood = if config.neighborhoods {
                    Some(estimate_neighborhoods(
                        x,
                        &config.generator_spec,
                        derive_seed(seed, "neighborhood", 0),
                    )?)
                } else {
                    None
                };
                Generator::Sequential(SequentialKnockoffSpec {
                    feature_kinds: config
                        .feature_kinds
                        .clone()
                        .unwrap_or_else(|| detect_kinds(x)),
                    neighborhood,
                    order_seed: 0,
                    penreg_spec: config.generator_spec.clone(),
                })
            }
        })
    }

    fn sample(&self, x: &DesignMatrix, seed: u64) -> Result<KnockoffSet> {
        match self {
            Generator::Gaussian(model) => sample_gaussian_knockoffs(x, model, seed),
            Generator::Sequential(spec) => sample_sequential_knockoffs(x, spec, seed),
        }
    }
}

/// Knockoff selection repeated over `config.runs` independent knockoff draws.
///
/// Each run applies the single-run threshold for `budget`; a feature is kept
/// when its selection frequency reaches `config.eta`. With one run the result
/// is exactly the single-run selection. The knockoff model (Gaussian moments
/// or sequential neighborhoods) is estimated once and shared by all runs.
pub fn derandomized_select(
    x: &DesignMatrix,
    y: &[f64],
    weights: Option<&[f64]>,
    budget: &Budget,
    config: &DerandomizedConfig,
    seed: u64,
) -> Result<SelectionResult> {
    let mut out =
        derandomized_select_many(x, y, weights, std::slice::from_ref(budget), config, seed)?;
    Ok(out.pop().expect("one budget"))
}

/// [`derandomized_select`] for several budgets at once. The knockoff draws
/// and statistics are shared, so each result equals the one obtained by a
/// separate call with the same seed.
pub fn derandomized_select_many(
    x: &DesignMatrix,
    y: &[f64],
    weights: Option<&[f64]>,
    budgets: &[Budget],
    config: &DerandomizedConfig,
    seed: u64,
) -> Result<Vec<SelectionResult>> {
    config.validate()?;
    for b in budgets {
        b.validate()?;
    }
    let p = x.cols();
    if p == 0 {
        return Ok(budgets
            .iter()
            .map(|_| SelectionResult::empty(0, StatisticKind::CoefDiff))
            .collect());
    }
    let generator = Generator::build(x, config, seed)?;

    let one_run = |m: usize| -> Result<Vec<SelectionResult>> {
        let run_seed = derive_seed(seed, "run", m as u64);
        let ks = generator.sample(x, derive_seed(run_seed, "knockoff", 0))?;
        let w = compute_w(
            &ks,
            y,
            weights,
            &config.stat_spec,
            derive_seed(run_seed, "stat", 0),
        )?;
        Ok(budgets.iter().map(|b| b.threshold(&w)).collect())
    };
    let runs: Vec<Vec<SelectionResult>> = if config.parallel {
        (0..config.runs)
            .into_par_iter()
            .map(one_run)
            .collect::<Result<_>>()?
    } else {
        (0..config.runs).map(one_run).collect::<Result<_>>()?
    };
    Ok((0..budgets.len())
        .map(|b| aggregate(runs.iter().map(|r| &r[b]).collect(), config.eta, p))
        .collect())
}

fn aggregate(results: Vec<&SelectionResult>, eta: f64, p: usize) -> SelectionResult {
    if results.len() == 1 {
        return results[0].clone();
    }
    let runs = results.len();
    let mut frequencies = vec![0.0; p];
    let mut mean_w = vec![0.0; p];
    let mut lambda = 0.0;
    for r in &results {
        for &j in &r.selected {
            frequencies[j] += 1.0;
        }
        for (acc, v) in mean_w.iter_mut().zip(&r.w.w) {
            *acc += v / runs as f64;
        }
        lambda += r.w.lambda_used / runs as f64;
    }
    for f in &mut frequencies {
        *f /= runs as f64;
    }
    let selected = (0..p).filter(|&j| frequencies[j] >= eta).collect();
    SelectionResult {
        selected,
        w: WStatistics {
            w: mean_w,
            lambda_used: lambda,
            statistic_kind: StatisticKind::CoefDiff,
        },
        threshold: eta,
        runs,
        frequencies,
        run_thresholds: results.iter().map(|r| r.threshold).collect(),
    }
}
