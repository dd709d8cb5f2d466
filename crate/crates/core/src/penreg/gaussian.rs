//! Gaussian elastic net by coordinate descent with covariance updates.
//!
//! Everything the solver needs is a function of weighted first and second
//! moments of `[x, y]`, so the moments of each cross-validation fold are
//! accumulated once and training-set moments are obtained by subtraction.

use nalgebra::{DMatrix, DVector};

use super::{soft_threshold, PathFit, MAX_SWEEPS};

/// Weighted raw moments of globally centred data over a set of rows.
#[derive(Debug, Clone)]
pub(crate) struct Moments {
    w: f64,
    sx: DVector<f64>,
    sy: f64,
    sxx: DMatrix<f64>,
    sxy: DVector<f64>,
    syy: f64,
}

impl Moments {
    pub(crate) fn from_rows(xc: &DMatrix<f64>, yc: &[f64], v: &[f64], rows: &[usize]) -> Self {
        let p = xc.ncols();
        let mut a = DMatrix::zeros(rows.len(), p);
        let mut b = DVector::zeros(rows.len());
        let mut w = 0.0;
        let mut sy = 0.0;
        let mut syy = 0.0;
        for (r, &i) in rows.iter().enumerate() {
            let sw = v[i].sqrt();
            for j in 0..p {
                a[(r, j)] = sw * xc[(i, j)];
            }
            b[r] = sw * yc[i];
            w += v[i];
            sy += v[i] * yc[i];
            syy += v[i] * yc[i] * yc[i];
        }
        let sqrt_v = DVector::from_iterator(rows.len(), rows.iter().map(|&i| v[i].sqrt()));
        Moments {
            w,
            sx: a.tr_mul(&sqrt_v),
            sy,
            sxx: a.tr_mul(&a),
            sxy: a.tr_mul(&b),
            syy,
        }
    }

    pub(crate) fn zero(p: usize) -> Self {
        Moments {
            w: 0.0,
            sx: DVector::zeros(p),
            sy: 0.0,
            sxx: DMatrix::zeros(p, p),
            sxy: DVector::zeros(p),
            syy: 0.0,
        }
    }

    pub(crate) fn weight(&self) -> f64 {
        self.w
    }

    pub(crate) fn add(&mut self, other: &Moments) {
        self.w += other.w;
        self.sx += &other.sx;
        self.sy += other.sy;
        self.sxx += &other.sxx;
        self.sxy += &other.sxy;
        self.syy += other.syy;
    }

    pub(crate) fn minus(&self, other: &Moments) -> Moments {
        Moments {
            w: self.w - other.w,
            sx: &self.sx - &other.sx,
            sy: self.sy - other.sy,
            sxx: &self.sxx - &other.sxx,
            sxy: &self.sxy - &other.sxy,
            syy: self.syy - other.syy,
        }
    }
}

/// A standardized quadratic elastic-net problem restricted to the columns
/// with non-zero variance.
pub(crate) struct Problem {
    p: usize,
    active: Vec<usize>,
    gram: DMatrix<f64>,
    xy: Vec<f64>,
    x_mean: Vec<f64>,
    x_scale: Vec<f64>,
    y_mean: f64,
    y_sd: f64,
}

impl Problem {
    pub(crate) fn from_moments(
        m: &Moments,
        x_offset: &[f64],
        y_offset: f64,
        standardize: bool,
        zero_var_tol: &[f64],
    ) -> Problem {
        let p = x_offset.len();
        let w = m.w;
        let mu: Vec<f64> = (0..p).map(|j| m.sx[j] / w).collect();
        let ybar = m.sy / w;
        let var: Vec<f64> = (0..p).map(|j| m.sxx[(j, j)] / w - mu[j] * mu[j]).collect();
        let active: Vec<usize> = (0..p).filter(|&j| var[j] > zero_var_tol[j]).collect();
        let x_scale: Vec<f64> = (0..p)
            .map(|j| {
                if standardize && var[j] > 0.0 {
                    var[j].sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        let q = active.len();
        let mut gram = DMatrix::zeros(q, q);
        let mut xy = vec![0.0; q];
        for (a, &j) in active.iter().enumerate() {
            for (b, &k) in active.iter().enumerate().skip(a) {
                let c = (m.sxx[(j, k)] / w - mu[j] * mu[k]) / (x_scale[j] * x_scale[k]);
                gram[(a, b)] = c;
                gram[(b, a)] = c;
            }
            xy[a] = (m.sxy[j] / w - mu[j] * ybar) / x_scale[j];
        }
        let var_y = (m.syy / w - ybar * ybar).max(0.0);
        Problem {
            p,
            active,
            gram,
            xy,
            x_mean: (0..p).map(|j| x_offset[j] + mu[j]).collect(),
            x_scale,
            y_mean: y_offset + ybar,
            y_sd: var_y.sqrt(),
        }
    }

    pub(crate) fn inactive(&self) -> Vec<usize> {
        (0..self.p).filter(|j| !self.active.contains(j)).collect()
    }

    pub(crate) fn lambda_max(&self, alpha: f64) -> f64 {
        let g = self.xy.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        g / alpha.max(0.05)
    }

    pub(crate) fn solve_path(&self, lambdas: &[f64], alpha: f64, tolerance: f64) -> PathFit {
        let q = self.active.len();
        let mut beta = vec![0.0; q];
        let mut grad = self.xy.clone();
        let tol = tolerance
            * if self.y_sd > 0.0 {
                self.y_sd * self.y_sd
            } else {
                1.0
            };
        let mut fit = PathFit::with_capacity(lambdas.len());
        for &lambda in lambdas {
            coordinate_descent(&self.gram, lambda, alpha, &mut beta, &mut grad, tol);
            let mut coef = vec![0.0; self.p];
            let mut intercept = self.y_mean;
            for (a, &j) in self.active.iter().enumerate() {
                coef[j] = beta[a] / self.x_scale[j];
                intercept -= self.x_mean[j] * coef[j];
            }
            fit.push(lambda, intercept, coef);
        }
        fit
    }
}

/// Cyclic coordinate descent on `(1/2) bᵀGb - cᵀb + λ[α|b|₁ + (1-α)/2 |b|²]`.
///
/// `grad` holds `c - G b` on entry and is kept consistent with `beta`.
/// Converges when no coordinate update in a sweep changes the objective's
/// quadratic part by more than `tol`, i.e. `G_jj Δ_j² < tol`.
pub(crate) fn coordinate_descent(
    gram: &DMatrix<f64>,
    lambda: f64,
    alpha: f64,
    beta: &mut [f64],
    grad: &mut [f64],
    tol: f64,
) -> usize {
    let q = beta.len();
    let l1 = lambda * alpha;
    let l2 = lambda * (1.0 - alpha);
    let mut sweeps = 0;

    let update = |j: usize, beta: &mut [f64], grad: &mut [f64]| -> f64 {
        let gjj = gram[(j, j)];
        let old = beta[j];
        let new = soft_threshold(grad[j] + gjj * old, l1) / (gjj + l2);
        let delta = new - old;
        if delta != 0.0 {
            beta[j] = new;
            for (g, c) in grad.iter_mut().zip(gram.column(j).iter()) {
                *g -= delta * c;
            }
        }
        gjj * delta * delta
    };

    loop {
        let mut max_change = 0.0_f64;
        for j in 0..q {
            max_change = max_change.max(update(j, beta, grad));
        }
        sweeps += 1;
        if max_change < tol || sweeps >= MAX_SWEEPS {
            break;
        }
        // iterate on the current active set until it settles
        let active: Vec<usize> = (0..q).filter(|&j| beta[j] != 0.0).collect();
        loop {
            let mut change = 0.0_f64;
            for &j in &active {
                change = change.max(update(j, beta, grad));
            }
            sweeps += 1;
            if change < tol || sweeps >= MAX_SWEEPS {
                break;
            }
        }
    }
    if sweeps >= MAX_SWEEPS {
        log::warn!("coordinate descent hit the sweep cap at lambda {lambda:.3e}");
    }
    sweeps
}
