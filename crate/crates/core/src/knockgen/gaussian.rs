//! Second-order Gaussian model-X knockoffs with the equicorrelated
//! construction of the diagonal `s`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{KnockoffMethod, KnockoffSet};
use crate::design::DesignMatrix;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Shrinkage ladder toward the diagonal, tried in order until the sample
/// covariance becomes positive definite.
const SHRINKAGE_LADDER: [f64; 6] = [0.0, 1e-4, 1e-3, 1e-2, 1e-1, 1.0];
const PD_RELATIVE_TOL: f64 = 1e-10;
const PSD_RELATIVE_TOL: f64 = 1e-9;
const SCALE_SEARCH_STEPS: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianKnockoffModel {
    pub mu: Vec<f64>,
    pub sigma: DMatrix<f64>,
    pub s: Vec<f64>,
    /// Diagonal shrinkage that was applied to the sample covariance.
    pub shrinkage: f64,
}

fn min_max_eigen(m: &DMatrix<f64>) -> (f64, f64) {
    let eig = SymmetricEigen::new(m.clone());
    let min = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let max = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    let (min, max) = min_max_eigen(m);
    max > 0.0 && min > PD_RELATIVE_TOL * max
}

impl GaussianKnockoffModel {
    /// Builds the model for a known mean and covariance; `sigma` must be
    /// symmetric positive definite.
    pub fn from_covariance(mu: Vec<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        let p = mu.len();
        if sigma.nrows() != p || sigma.ncols() != p {
            return Err(Error::Dimension(format!(
                "covariance is {}x{}, mean has {p} entries",
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        if !is_positive_definite(&sigma) {
            return Err(Error::NotPositiveDefinite {
                min_eigenvalue: min_max_eigen(&sigma).0,
            });
        }
        let sd: Vec<f64> = (0..p).map(|j| sigma[(j, j)].sqrt()).collect();
        let corr = DMatrix::from_fn(p, p, |i, j| sigma[(i, j)] / (sd[i] * sd[j]));
        let (lambda_min, _) = min_max_eigen(&corr);
        let base: Vec<f64> = (0..p)
            .map(|j| (2.0 * lambda_min).min(1.0) * sigma[(j, j)])
            .collect();

        let sigma_inv = sigma
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite {
                min_eigenvalue: lambda_min,
            })?
            .inverse();
        let feasible = |gamma: f64| {
            let s: Vec<f64> = base.iter().map(|b| gamma * b).collect();
            let v = conditional_covariance(&sigma_inv, &s);
            let (min, _) = min_max_eigen(&v);
            let scale = s.iter().copied().fold(0.0, f64::max);
            min >= -PSD_RELATIVE_TOL * scale.max(f64::MIN_POSITIVE)
        };
        let gamma = if feasible(1.0) {
            1.0
        } else {
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..SCALE_SEARCH_STEPS {
                let mid = 0.5 * (lo + hi);
                if feasible(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        Ok(Self {
            mu,
            sigma,
            s: base.iter().map(|b| gamma * b).collect(),
            shrinkage: 0.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// `2·diag(s) − diag(s)·Σ⁻¹·diag(s)`.
    pub fn conditional_covariance(&self) -> Result<DMatrix<f64>> {
        let inv = self
            .sigma
            .clone()
            .cholesky()
            .ok_or(Error::Factorization(
                "covariance is not positive definite".into(),
            ))?
            .inverse();
        Ok(conditional_covariance(&inv, &self.s))
    }
}

fn conditional_covariance(sigma_inv: &DMatrix<f64>, s: &[f64]) -> DMatrix<f64> {
    let p = s.len();
    DMatrix::from_fn(p, p, |i, j| {
        let diag = if i == j { 2.0 * s[i] } else { 0.0 };
        diag - s[i] * sigma_inv[(i, j)] * s[j]
    })
}

/// Column means, sample covariance (n − 1), minimal diagonal shrinkage to
/// positive definiteness, then the equicorrelated `s`.
pub fn estimate_gaussian_model(x: &DesignMatrix) -> Result<GaussianKnockoffModel> {
    let n = x.rows();
    let p = x.cols();
    if n < 3 {
        return Err(Error::InvalidInput(format!(
            "need at least 3 rows, got {n}"
        )));
    }
    if n <= p {
        log::warn!("estimating a {p}-dimensional covariance from only {n} rows");
    }
    let mu: Vec<f64> = (0..p)
        .map(|j| x.column(j).iter().sum::<f64>() / n as f64)
        .collect();
    let mut centred = x.values().clone();
    for (j, m) in mu.iter().enumerate() {
        centred.column_mut(j).add_scalar_mut(-m);
    }
    let cov = centred.tr_mul(&centred) / (n - 1) as f64;
    for &delta in &SHRINKAGE_LADDER {
        let shrunk = DMatrix::from_fn(p, p, |i, j| {
            if i == j {
                cov[(i, j)]
            } else {
                (1.0 - delta) * cov[(i, j)]
            }
        });
        if is_positive_definite(&shrunk) {
            let mut model = GaussianKnockoffModel::from_covariance(mu, shrunk)?;
            model.shrinkage = delta;
            return Ok(model);
        }
    }
    Err(Error::CovarianceUnrepairable)
}

/// Draws one knockoff row per observation from the Gaussian conditional
/// `N(x − (x − μ)Σ⁻¹D, 2D − DΣ⁻¹D)`, `D = diag(s)`.
pub fn sample_gaussian_knockoffs(
    x: &DesignMatrix,
    model: &GaussianKnockoffModel,
    seed: u64,
) -> Result<KnockoffSet> {
    let n = x.rows();
    let p = x.cols();
    if model.dim() != p {
        return Err(Error::Dimension(format!(
            "model has {} features, design has {p}",
            model.dim()
        )));
    }
    let inv = model
        .sigma
        .clone()
        .cholesky()
        .ok_or(Error::Factorization(
            "covariance is not positive definite".into(),
        ))?
        .inverse();
    // shift = Σ⁻¹ D, so that x* = x − (x − μ) · shift + noise
    let shift = DMatrix::from_fn(p, p, |i, j| inv[(i, j)] * model.s[j]);
    let v = conditional_covariance(&inv, &model.s);
    let eig = SymmetricEigen::new(v);
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let low = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if low < -1e-8 * top.max(1.0) {
        return Err(Error::Factorization(format!(
            "conditional covariance has eigenvalue {low:.3e}"
        )));
    }
    // root = Q Λ^{1/2}, so root · rootᵀ = V
    let mut root = eig.eigenvectors.clone();
    for (k, lam) in eig.eigenvalues.iter().enumerate() {
        root.column_mut(k).scale_mut(lam.max(0.0).sqrt());
    }

    let mut centred = x.values().clone();
    for j in 0..p {
        centred.column_mut(j).add_scalar_mut(-model.mu[j]);
    }
    let mut ko = x.values() - centred * shift;

    let mut rng = rng_from_seed(seed);
    let z = DMatrix::from_fn(p, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let noise = (root * z).transpose();
    ko += noise;

    let knockoff = DesignMatrix::new(ko, super::knockoff_names(x))?;
    Ok(KnockoffSet {
        original: x.clone(),
        knockoff,
        method: KnockoffMethod::Gaussian,
        seed,
    })
}
