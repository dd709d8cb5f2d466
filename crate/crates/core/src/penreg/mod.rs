//! Penalized regression: weighted elastic net for Gaussian and binomial
//! responses, fitted along a geometric λ path with warm starts, plus K-fold
//! cross-validation with the `min` and one-standard-error selection rules.
//!
//! The Gaussian objective is
//!
//! ```text
//! 1/(2 Σw) Σᵢ wᵢ (yᵢ - β₀ - xᵢᵀβ)² + λ [α‖β‖₁ + (1-α)/2 ‖β‖₂²]
//! ```
//!
//! with the penalty applied to standardized coefficients when
//! `standardize` is on. Coefficients are always reported on the original
//! predictor scale. The binomial family replaces the squared loss with the
//! weighted negative log-likelihood.

mod binomial;
mod gaussian;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::design::DesignMatrix;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

pub(crate) const MAX_SWEEPS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gaussian,
    Binomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaRule {
    Min,
    OneSe,
}

/// How rows are assigned to cross-validation folds.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum FoldScheme {
    /// Balanced random assignment of individual rows.
    #[default]
    Rows,
    /// Whole clusters go to the same fold; one label per row.
    Clusters(Vec<u64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitSpec {
    /// Elastic-net mixing: 1 is the lasso, 0 is ridge.
    pub alpha: f64,
    pub family: Family,
    /// Observation weights; `None` means all ones.
    pub weights: Option<Vec<f64>>,
    pub n_lambda: usize,
    pub lambda_min_ratio: f64,
    pub standardize: bool,
    pub cv_folds: usize,
    pub lambda_rule: LambdaRule,
    /// Explicit λ sequence overriding the automatic path.
    pub lambdas: Option<Vec<f64>>,
    pub folds: FoldScheme,
    /// Coordinate descent stops when no coefficient moves the weighted
    /// residual sum of squares by more than `tolerance` times the null
    /// deviance in a full sweep.
    pub tolerance: f64,
}

impl Default for FitSpec {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            family: Family::Gaussian,
            weights: None,
            n_lambda: 100,
            lambda_min_ratio: 1e-3,
            standardize: true,
            cv_folds: 10,
            lambda_rule: LambdaRule::OneSe,
            lambdas: None,
            folds: FoldScheme::Rows,
            tolerance: 1e-7,
        }
    }
}

impl FitSpec {
    pub fn lasso() -> Self {
        Self::default()
    }

    pub fn with_family(mut self, family: Family) -> Self {
        self.family = family;
        self
    }

    pub fn with_weights(mut self, weights: Option<Vec<f64>>) -> Self {
        self.weights = weights;
        self
    }

    pub fn with_rule(mut self, rule: LambdaRule) -> Self {
        self.lambda_rule = rule;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidInput(format!(
                "alpha {} not in [0, 1]",
                self.alpha
            )));
        }
        if self.n_lambda < 2 {
            return Err(Error::InvalidInput("n_lambda must be at least 2".into()));
        }
        if !(self.lambda_min_ratio > 0.0 && self.lambda_min_ratio < 1.0) {
            return Err(Error::InvalidInput(format!(
                "lambda_min_ratio {} not in (0, 1)",
                self.lambda_min_ratio
            )));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "tolerance {} must be positive",
                self.tolerance
            )));
        }
        if self.cv_folds < 2 {
            return Err(Error::InvalidInput("cv_folds must be at least 2".into()));
        }
        if let Some(l) = &self.lambdas {
            if l.is_empty() || l.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidInput(
                    "explicit lambdas must be finite and >= 0".into(),
                ));
            }
        }
        Ok(())
    }
}

/// A fitted model at the selected λ, together with the whole path.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub family: Family,
    pub alpha: f64,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub lambda_selected: f64,
    pub lambda_index: usize,
    pub lambda_path: Vec<f64>,
    /// Empty for [`fit_path`].
    pub cv_mean_error: Vec<f64>,
    pub cv_se: Vec<f64>,
    pub path_intercepts: Vec<f64>,
    pub path_coefficients: Vec<Vec<f64>>,
    /// Columns with zero variance; their coefficients are pinned at 0.
    pub zero_variance: Vec<usize>,
}

impl FitResult {
    pub fn nonzero(&self) -> Vec<usize> {
        (0..self.coefficients.len())
            .filter(|&j| self.coefficients[j] != 0.0)
            .collect()
    }

    /// Linear predictor `β₀ + xᵀβ` for every row.
    pub fn linear_predictor(&self, x: &DesignMatrix) -> Vec<f64> {
        linear_predictor(x, self.intercept, &self.coefficients)
    }

    /// Fitted mean: the linear predictor for Gaussian fits, the success
    /// probability for binomial fits.
    pub fn predict(&self, x: &DesignMatrix) -> Vec<f64> {
        let eta = self.linear_predictor(x);
        match self.family {
            Family::Gaussian => eta,
            Family::Binomial => eta.into_iter().map(binomial::sigmoid).collect(),
        }
    }

    /// Moves the reported solution to path index `k`.
    pub fn select_index(&mut self, k: usize) {
        self.lambda_index = k;
        self.lambda_selected = self.lambda_path[k];
        self.intercept = self.path_intercepts[k];
        self.coefficients = self.path_coefficients[k].clone();
    }
}

fn linear_predictor(x: &DesignMatrix, intercept: f64, coef: &[f64]) -> Vec<f64> {
    let mut eta = vec![intercept; x.rows()];
    for (j, &b) in coef.iter().enumerate() {
        if b != 0.0 {
            for (e, xv) in eta.iter_mut().zip(x.column(j)) {
                *e += b * xv;
            }
        }
    }
    eta
}

// Four accumulators so the compiler can vectorize the reduction.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    acc[0] + acc[1] + acc[2] + acc[3] + tail
}

/// `y += a x`
pub(crate) fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Solutions along a λ sequence, original scale.
pub(crate) struct PathFit {
    lambdas: Vec<f64>,
    intercepts: Vec<f64>,
    coefs: Vec<Vec<f64>>,
}

impl PathFit {
    fn with_capacity(n: usize) -> Self {
        Self {
            lambdas: Vec::with_capacity(n),
            intercepts: Vec::with_capacity(n),
            coefs: Vec::with_capacity(n),
        }
    }

    fn truncate(&mut self, len: usize) {
        self.lambdas.truncate(len);
        self.intercepts.truncate(len);
        self.coefs.truncate(len);
    }

    fn push(&mut self, lambda: f64, intercept: f64, coef: Vec<f64>) {
        self.lambdas.push(lambda);
        self.intercepts.push(intercept);
        self.coefs.push(coef);
    }
}

/// Input checks plus normalized weights and per-column zero-variance
/// tolerances.
struct Prepared {
    /// Weights normalized to sum to one.
    v: Vec<f64>,
    zero_var_tol: Vec<f64>,
}

fn prepare(x: &DesignMatrix, y: &[f64], spec: &FitSpec) -> Result<Prepared> {
    spec.validate()?;
    let n = x.rows();
    if y.len() != n {
        return Err(Error::Dimension(format!(
            "response has {} rows, design has {n}",
            y.len()
        )));
    }
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "penalized fit needs at least 2 rows, got {n}"
        )));
    }
    if let Some(row) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "response".into(),
            row,
            col: 0,
        });
    }
    if spec.family == Family::Binomial {
        if let Some(row) = y.iter().position(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidInput(format!(
                "binomial response must be 0/1, got {} at row {row}",
                y[row]
            )));
        }
    }
    let w = match &spec.weights {
        Some(w) => {
            if w.len() != n {
                return Err(Error::Dimension(format!(
                    "{} weights for {n} rows",
                    w.len()
                )));
            }
            if let Some(row) = w.iter().position(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidInput(format!(
                    "invalid weight {} at row {row}",
                    w[row]
                )));
            }
            w.clone()
        }
        None => vec![1.0; n],
    };
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidInput("weights sum to zero".into()));
    }
    let zero_var_tol = (0..x.cols())
        .map(|j| {
            let m = x.column(j).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            (1e-10 * m).powi(2)
        })
        .collect();
    Ok(Prepared {
        v: w.iter().map(|wi| wi / total).collect(),
        zero_var_tol,
    })
}

fn lambda_sequence(lambda_max: f64, spec: &FitSpec) -> Vec<f64> {
    if let Some(l) = &spec.lambdas {
        let mut l = l.clone();
        l.sort_by(|a, b| b.total_cmp(a));
        return l;
    }
    let top = if lambda_max > 0.0 { lambda_max } else { 1e-12 };
    let n = spec.n_lambda;
    (0..n)
        .map(|k| top * spec.lambda_min_ratio.powf(k as f64 / (n - 1) as f64))
        .collect()
}

/// Family-specific path solver over a subset of rows.
enum Engine<'a> {
    Gaussian {
        x_offset: Vec<f64>,
        y_offset: f64,
        fold_moments: Vec<gaussian::Moments>,
        total: gaussian::Moments,
    },
    Binomial {
        x: &'a DesignMatrix,
        y: &'a [f64],
    },
}

impl<'a> Engine<'a> {
    fn new(
        x: &'a DesignMatrix,
        y: &'a [f64],
        spec: &FitSpec,
        prep: &Prepared,
        folds: &[Vec<usize>],
    ) -> Self {
        match spec.family {
            Family::Gaussian => {
                let n = x.rows();
                let p = x.cols();
                let x_offset: Vec<f64> = (0..p)
                    .map(|j| x.column(j).iter().zip(&prep.v).map(|(a, w)| a * w).sum())
                    .collect();
                let y_offset: f64 = y.iter().zip(&prep.v).map(|(a, w)| a * w).sum();
                let mut xc = x.values().clone();
                for (j, m) in x_offset.iter().enumerate() {
                    xc.column_mut(j).add_scalar_mut(-m);
                }
                let yc: Vec<f64> = y.iter().map(|v| v - y_offset).collect();
                let fold_moments: Vec<_> = folds
                    .iter()
                    .map(|rows| gaussian::Moments::from_rows(&xc, &yc, &prep.v, rows))
                    .collect();
                let mut total = gaussian::Moments::zero(p);
                for m in &fold_moments {
                    total.add(m);
                }
                debug_assert!(folds.iter().map(Vec::len).sum::<usize>() == n);
                Engine::Gaussian {
                    x_offset,
                    y_offset,
                    fold_moments,
                    total,
                }
            }
            Family::Binomial => Engine::Binomial { x, y },
        }
    }

    /// Solves on all rows except those of `held_out` (or all rows).
    /// Returns the path and the zero-variance columns of that training set.
    fn solve(
        &self,
        spec: &FitSpec,
        prep: &Prepared,
        folds: &[Vec<usize>],
        held_out: Option<usize>,
        lambdas: Option<&[f64]>,
    ) -> Result<(PathFit, Vec<usize>)> {
        match self {
            Engine::Gaussian {
                x_offset,
                y_offset,
                fold_moments,
                total,
            } => {
                let m = match held_out {
                    Some(f) => total.minus(&fold_moments[f]),
                    None => total.clone(),
                };
                if m.weight() <= 0.0 {
                    return Err(Error::EmptyFold {
                        fold: held_out.unwrap_or(0),
                    });
                }
                let problem = gaussian::Problem::from_moments(
                    &m,
                    x_offset,
                    *y_offset,
                    spec.standardize,
                    &prep.zero_var_tol,
                );
                let owned;
                let lambdas = match lambdas {
                    Some(l) => l,
                    None => {
                        owned = lambda_sequence(problem.lambda_max(spec.alpha), spec);
                        &owned
                    }
                };
                Ok((
                    problem.solve_path(lambdas, spec.alpha, spec.tolerance),
                    problem.inactive(),
                ))
            }
            Engine::Binomial { x, y } => {
                let rows: Vec<usize> = match held_out {
                    Some(f) => folds
                        .iter()
                        .enumerate()
                        .filter(|(g, _)| *g != f)
                        .flat_map(|(_, r)| r.iter().copied())
                        .collect(),
                    None => (0..x.rows()).collect(),
                };
                let wsum: f64 = rows.iter().map(|&i| prep.v[i]).sum();
                if wsum <= 0.0 {
                    return Err(Error::EmptyFold {
                        fold: held_out.unwrap_or(0),
                    });
                }
                let problem = binomial::Problem::from_rows(
                    x,
                    y,
                    &prep.v,
                    &rows,
                    spec.standardize,
                    &prep.zero_var_tol,
                );
                let owned;
                let lambdas = match lambdas {
                    Some(l) => l,
                    None => {
                        owned = lambda_sequence(problem.lambda_max(spec.alpha), spec);
                        &owned
                    }
                };
                Ok((
                    problem.solve_path(lambdas, spec.alpha, spec.tolerance)?,
                    problem.inactive(),
                ))
            }
        }
    }
}

fn into_result(path: PathFit, zero_variance: Vec<usize>, spec: &FitSpec) -> FitResult {
    if !zero_variance.is_empty() {
        log::warn!("zero-variance columns {zero_variance:?} fixed at 0");
    }
    let k = path.lambdas.len() - 1;
    FitResult {
        family: spec.family,
        alpha: spec.alpha,
        intercept: path.intercepts[k],
        coefficients: path.coefs[k].clone(),
        lambda_selected: path.lambdas[k],
        lambda_index: k,
        lambda_path: path.lambdas,
        cv_mean_error: Vec::new(),
        cv_se: Vec::new(),
        path_intercepts: path.intercepts,
        path_coefficients: path.coefs,
        zero_variance,
    }
}

/// Fits the whole λ path on all rows. The reported solution is the last
/// (smallest) λ; use [`FitResult::select_index`] to move along the path.
pub fn fit_path(x: &DesignMatrix, y: &[f64], spec: &FitSpec) -> Result<FitResult> {
    let prep = prepare(x, y, spec)?;
    let folds = vec![(0..x.rows()).collect::<Vec<_>>()];
    let engine = Engine::new(x, y, spec, &prep, &folds);
    let (path, zv) = engine.solve(spec, &prep, &folds, None, None)?;
    Ok(into_result(path, zv, spec))
}

/// Balanced random fold labels, one per row.
pub fn assign_folds(n: usize, k: usize, scheme: &FoldScheme, seed: u64) -> Result<Vec<usize>> {
    let mut rng = rng_from_seed(seed);
    match scheme {
        FoldScheme::Rows => {
            if n < k {
                return Err(Error::InvalidInput(format!(
                    "{n} rows cannot fill {k} folds"
                )));
            }
            let mut labels: Vec<usize> = (0..n).map(|i| i % k).collect();
            labels.shuffle(&mut rng);
            Ok(labels)
        }
        FoldScheme::Clusters(ids) => {
            if ids.len() != n {
                return Err(Error::Dimension(format!(
                    "{} cluster labels for {n} rows",
                    ids.len()
                )));
            }
            let mut distinct: Vec<u64> = Vec::new();
            let mut index = std::collections::HashMap::new();
            for &c in ids {
                index.entry(c).or_insert_with(|| {
                    distinct.push(c);
                    distinct.len() - 1
                });
            }
            if distinct.len() < k {
                return Err(Error::InvalidInput(format!(
                    "{} clusters cannot fill {k} folds",
                    distinct.len()
                )));
            }
            let mut cluster_fold: Vec<usize> = (0..distinct.len()).map(|i| i % k).collect();
            cluster_fold.shuffle(&mut rng);
            Ok(ids.iter().map(|c| cluster_fold[index[c]]).collect())
        }
    }
}

fn loss(family: Family, y: f64, eta: f64) -> f64 {
    match family {
        Family::Gaussian => (y - eta).powi(2),
        Family::Binomial => {
            let p = binomial::clamp_prob(binomial::sigmoid(eta));
            -2.0 * (y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        }
    }
}

/// Cross-validated fit: the λ path is computed on all rows, each fold is
/// refitted on the remaining rows along the same path, and λ is chosen by
/// `spec.lambda_rule` from the weighted mean fold error (squared error or
/// binomial deviance). The reported coefficients come from the all-rows
/// path at the chosen λ. Paths that stop early (binomial) restrict the
/// search to the λ values every fit reached.
pub fn fit_cv(x: &DesignMatrix, y: &[f64], spec: &FitSpec, seed: u64) -> Result<FitResult> {
    let prep = prepare(x, y, spec)?;
    let n = x.rows();
    let k = spec.cv_folds;
    let labels = assign_folds(n, k, &spec.folds, seed)?;
    let mut folds = vec![Vec::new(); k];
    for (i, &f) in labels.iter().enumerate() {
        folds[f].push(i);
    }
    let fold_weight: Vec<f64> = folds
        .iter()
        .map(|rows| rows.iter().map(|&i| prep.v[i]).sum())
        .collect();
    if let Some(f) = fold_weight.iter().position(|&w| w <= 0.0) {
        return Err(Error::EmptyFold { fold: f });
    }

    let engine = Engine::new(x, y, spec, &prep, &folds);
    let (full, zv) = engine.solve(spec, &prep, &folds, None, None)?;
    let lambdas = full.lambdas.clone();
    let mut nl = lambdas.len();

    let mut fold_err = vec![vec![0.0; nl]; k];
    for f in 0..k {
        let (path, _) = engine.solve(spec, &prep, &folds, Some(f), Some(&lambdas))?;
        nl = nl.min(path.lambdas.len());
        for (l, coef) in path.coefs.iter().enumerate().take(nl) {
            let nz: Vec<usize> = (0..coef.len()).filter(|&j| coef[j] != 0.0).collect();
            let mut acc = 0.0;
            for &i in &folds[f] {
                let eta =
                    path.intercepts[l] + nz.iter().map(|&j| coef[j] * x.get(i, j)).sum::<f64>();
                acc += prep.v[i] * loss(spec.family, y[i], eta);
            }
            fold_err[f][l] = acc / fold_weight[f];
        }
    }

    let wtot: f64 = fold_weight.iter().sum();
    let mut cvm = vec![0.0; nl];
    let mut cvsd = vec![0.0; nl];
    for l in 0..nl {
        let m: f64 = (0..k).map(|f| fold_weight[f] * fold_err[f][l]).sum::<f64>() / wtot;
        let var: f64 = (0..k)
            .map(|f| fold_weight[f] * (fold_err[f][l] - m).powi(2))
            .sum::<f64>()
            / wtot;
        cvm[l] = m;
        cvsd[l] = (var / (k - 1) as f64).sqrt();
    }
    let chosen = select_lambda(&cvm, &cvsd, spec.lambda_rule);

    let mut full = full;
    full.truncate(nl);
    let mut result = into_result(full, zv, spec);
    result.cv_mean_error = cvm;
    result.cv_se = cvsd;
    result.select_index(chosen);
    Ok(result)
}

/// Index into a decreasing λ path chosen by `rule`.
pub fn select_lambda(cvm: &[f64], cvsd: &[f64], rule: LambdaRule) -> usize {
    let best = (0..cvm.len()).fold(0, |b, l| if cvm[l] < cvm[b] { l } else { b });
    match rule {
        LambdaRule::Min => best,
        LambdaRule::OneSe => {
            let bound = cvm[best] + cvsd[best];
            (0..=best).find(|&l| cvm[l] <= bound).unwrap_or(best)
        }
    }
}

/// `sqrt(RSS / (n - df))` with `df` = non-zero coefficients + 1, the
/// denominator floored at 1.
pub fn residual_sd(x: &DesignMatrix, y: &[f64], fit: &FitResult) -> f64 {
    let eta = fit.linear_predictor(x);
    let rss: f64 = y.iter().zip(&eta).map(|(a, b)| (a - b).powi(2)).sum();
    let n = y.len();
    let df = (fit.nonzero().len() + 1).min(n - 1);
    (rss / (n - df) as f64).sqrt()
}

/// Largest violation of the elastic-net optimality conditions at the
/// reported solution, computed directly from the data. Gradients are taken
/// with respect to standardized coefficients when `spec.standardize` is on,
/// matching the scale on which the penalty acts. The intercept condition
/// (weighted residuals sum to zero) is included.
pub fn kkt_violation(x: &DesignMatrix, y: &[f64], spec: &FitSpec, fit: &FitResult) -> Result<f64> {
    let prep = prepare(x, y, spec)?;
    let eta = fit.linear_predictor(x);
    let resid: Vec<f64> = match fit.family {
        Family::Gaussian => y.iter().zip(&eta).map(|(a, e)| a - e).collect(),
        Family::Binomial => y
            .iter()
            .zip(&eta)
            .map(|(a, e)| a - binomial::sigmoid(*e))
            .collect(),
    };
    let lambda = fit.lambda_selected;
    let mut worst = resid
        .iter()
        .zip(&prep.v)
        .map(|(r, w)| r * w)
        .sum::<f64>()
        .abs();
    for j in 0..x.cols() {
        if fit.zero_variance.contains(&j) {
            continue;
        }
        let col = x.column(j);
        let mu: f64 = col.iter().zip(&prep.v).map(|(a, w)| a * w).sum();
        let scale = if spec.standardize {
            col.iter()
                .zip(&prep.v)
                .map(|(a, w)| w * (a - mu).powi(2))
                .sum::<f64>()
                .sqrt()
        } else {
            1.0
        };
        let g: f64 = col
            .iter()
            .zip(&resid)
            .zip(&prep.v)
            .map(|((a, r), w)| w * (a - mu) / scale * r)
            .sum();
        let b = fit.coefficients[j] * scale;
        let v = if b == 0.0 {
            (g.abs() - lambda * fit.alpha).max(0.0)
        } else {
            (g - lambda * fit.alpha * b.signum() - lambda * (1.0 - fit.alpha) * b).abs()
        };
        worst = worst.max(v);
    }
    Ok(worst)
}
