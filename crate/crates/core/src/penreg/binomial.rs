//! Logistic elastic net: IRLS outer loop around naive coordinate descent.
//! Paths can end before the last requested λ when the fit saturates.

use super::{axpy, dot, soft_threshold, PathFit, MAX_SWEEPS};
use crate::design::DesignMatrix;
use crate::error::{Error, Result};

/// Clamp for predicted probabilities in cross-validation deviance.
pub(crate) const PROB_CLAMP: f64 = 1e-5;
// Much tighter clamp inside the fit, only there to keep the IRLS weights
// away from zero.
const FIT_PROB_MIN: f64 = 1e-9;
const MAX_IRLS: usize = 25;
// The path stops once a λ step raises the fraction of deviance explained
// by less than FDEV of its value, or once that fraction exceeds
// MAX_DEV_RATIO.
const FDEV: f64 = 1e-5;
const MAX_DEV_RATIO: f64 = 0.999;

pub(crate) fn sigmoid(eta: f64) -> f64 {
    1.0 / (1.0 + (-eta).exp())
}

pub(crate) fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

fn fitted(eta: f64) -> f64 {
    sigmoid(eta).clamp(FIT_PROB_MIN, 1.0 - FIT_PROB_MIN)
}

fn logit(p: f64) -> f64 {
    let p = clamp_prob(p);
    (p / (1.0 - p)).ln()
}

pub(crate) struct Problem {
    p: usize,
    active: Vec<usize>,
    /// Standardized active columns, column-major.
    xs: Vec<f64>,
    y: Vec<f64>,
    v: Vec<f64>,
    x_mean: Vec<f64>,
    x_scale: Vec<f64>,
}

impl Problem {
    pub(crate) fn from_rows(
        x: &DesignMatrix,
        y: &[f64],
        v: &[f64],
        rows: &[usize],
        standardize: bool,
        zero_var_tol: &[f64],
    ) -> Problem {
        let p = x.cols();
        let wsum: f64 = rows.iter().map(|&i| v[i]).sum();
        let vt: Vec<f64> = rows.iter().map(|&i| v[i] / wsum).collect();
        let mut x_mean = vec![0.0; p];
        let mut x_scale = vec![1.0; p];
        let mut active = Vec::with_capacity(p);
        for j in 0..p {
            let col = x.column(j);
            let mu: f64 = rows.iter().zip(&vt).map(|(&i, w)| w * col[i]).sum();
            let var: f64 = rows
                .iter()
                .zip(&vt)
                .map(|(&i, w)| w * (col[i] - mu).powi(2))
                .sum();
            x_mean[j] = mu;
            if var > zero_var_tol[j] {
                active.push(j);
                if standardize {
                    x_scale[j] = var.sqrt();
                }
            }
        }
        let xs = active
            .iter()
            .flat_map(|&j| {
                let col = x.column(j);
                let (m, sd) = (x_mean[j], x_scale[j]);
                rows.iter().map(move |&i| (col[i] - m) / sd)
            })
            .collect();
        Problem {
            p,
            active,
            xs,
            y: rows.iter().map(|&i| y[i]).collect(),
            v: vt,
            x_mean,
            x_scale,
        }
    }

    pub(crate) fn inactive(&self) -> Vec<usize> {
        (0..self.p).filter(|j| !self.active.contains(j)).collect()
    }

    fn col(&self, a: usize) -> &[f64] {
        let n = self.y.len();
        &self.xs[a * n..(a + 1) * n]
    }

    fn deviance(&self, eta: &[f64]) -> f64 {
        self.y
            .iter()
            .zip(eta)
            .zip(&self.v)
            .map(|((&y, &e), w)| {
                let p = fitted(e);
                -2.0 * w * (y * p.ln() + (1.0 - y) * (1.0 - p).ln())
            })
            .sum()
    }

    /// Log-likelihood gradient with respect to the linear predictor.
    fn score(&self, eta: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.v[i] * (self.y[i] - fitted(eta[i]));
        }
    }

    fn mean_y(&self) -> f64 {
        self.y.iter().zip(&self.v).map(|(y, w)| y * w).sum()
    }

    pub(crate) fn lambda_max(&self, alpha: f64) -> f64 {
        let pbar = self.mean_y();
        let g = (0..self.active.len()).fold(0.0_f64, |m, a| {
            let gj: f64 = self
                .col(a)
                .iter()
                .zip(&self.y)
                .zip(&self.v)
                .map(|((x, y), w)| w * x * (y - pbar))
                .sum();
            m.max(gj.abs())
        });
        g / alpha.max(0.05)
    }

    pub(crate) fn solve_path(
        &self,
        lambdas: &[f64],
        alpha: f64,
        tolerance: f64,
    ) -> Result<PathFit> {
        let n = self.y.len();
        let q = self.active.len();
        let mut b0 = logit(self.mean_y());
        let mut beta = vec![0.0; q];
        let mut eta = vec![b0; n];
        let mut wt = vec![0.0; n];
        // weighted working residual wt ∘ (z - eta)
        let mut wr = vec![0.0; n];
        let mut wx = vec![0.0; n * q];
        let mut xwx = vec![0.0; q];
        let mut fit = PathFit::with_capacity(lambdas.len());
        let null_dev = self.deviance(&eta);
        let mut prev_rsq = 0.0;

        // Sequential strong rule: coordinates outside `strong` are left at
        // zero and only checked against the optimality conditions once the
        // fit on `strong` has converged.
        let mut strong = vec![false; q];
        let mut score = vec![0.0; n];
        let mut grad = vec![0.0; q];
        self.score(&eta, &mut score);
        for (a, g) in grad.iter_mut().enumerate() {
            *g = dot(self.col(a), &score);
        }
        let mut prev_lambda = lambdas.first().copied().unwrap_or(0.0);

        for (k, &lambda) in lambdas.iter().enumerate() {
            let l1 = lambda * alpha;
            let l2 = lambda * (1.0 - alpha);
            let cut = alpha * (2.0 * lambda - prev_lambda);
            for a in 0..q {
                if beta[a] != 0.0 || grad[a].abs() >= cut {
                    strong[a] = true;
                }
            }
            loop {
                let set: Vec<usize> = (0..q).filter(|&a| strong[a]).collect();
                for _ in 0..MAX_IRLS {
                    let mut wsum = 0.0;
                    for i in 0..n {
                        let pr = fitted(eta[i]);
                        wt[i] = self.v[i] * pr * (1.0 - pr);
                        wr[i] = self.v[i] * (self.y[i] - pr);
                        wsum += wt[i];
                    }
                    for &a in &set {
                        let col = self.col(a);
                        let out = &mut wx[a * n..(a + 1) * n];
                        for ((o, x), w) in out.iter_mut().zip(col).zip(&wt) {
                            *o = w * x;
                        }
                        xwx[a] = dot(out, col);
                    }
                    let b0_old = b0;
                    let beta_old = beta.clone();

                    let tol = tolerance * wsum;
                    let update = |a: usize, beta: &mut [f64], wr: &mut [f64]| -> f64 {
                        if xwx[a] <= 0.0 {
                            return 0.0;
                        }
                        let g = dot(self.col(a), wr);
                        let old = beta[a];
                        let new = soft_threshold(g + xwx[a] * old, l1) / (xwx[a] + l2);
                        let delta = new - old;
                        if delta != 0.0 {
                            beta[a] = new;
                            axpy(-delta, &wx[a * n..(a + 1) * n], wr);
                        }
                        xwx[a] * delta * delta
                    };
                    let center = |wr: &mut [f64], b0: &mut f64| {
                        let d = wr.iter().sum::<f64>() / wsum;
                        *b0 += d;
                        axpy(-d, &wt, wr);
                        wsum * d * d
                    };

                    let mut sweeps = 0;
                    loop {
                        let mut change = center(&mut wr, &mut b0);
                        for &a in &set {
                            change = change.max(update(a, &mut beta, &mut wr));
                        }
                        sweeps += 1;
                        if change < tol || sweeps >= MAX_SWEEPS {
                            break;
                        }
                        let act: Vec<usize> =
                            set.iter().copied().filter(|&a| beta[a] != 0.0).collect();
                        loop {
                            let mut change = center(&mut wr, &mut b0);
                            for &a in &act {
                                change = change.max(update(a, &mut beta, &mut wr));
                            }
                            sweeps += 1;
                            if change < tol || sweeps >= MAX_SWEEPS {
                                break;
                            }
                        }
                    }

                    eta.fill(b0);
                    for (a, &b) in beta.iter().enumerate() {
                        if b != 0.0 {
                            axpy(b, self.col(a), &mut eta);
                        }
                    }
                    if !b0.is_finite() || eta.iter().any(|e| !e.is_finite()) {
                        return Err(Error::IrlsDiverged { lambda_index: k });
                    }
                    let step = set
                        .iter()
                        .map(|&a| xwx[a] * (beta[a] - beta_old[a]).powi(2))
                        .fold(wsum * (b0 - b0_old) * (b0 - b0_old), f64::max);
                    if step < tol {
                        break;
                    }
                }

                self.score(&eta, &mut score);
                let mut violated = false;
                for a in 0..q {
                    grad[a] = dot(self.col(a), &score);
                    if !strong[a] && grad[a].abs() > l1 {
                        strong[a] = true;
                        violated = true;
                    }
                }
                if !violated {
                    break;
                }
            }
            prev_lambda = lambda;

            let mut coef = vec![0.0; self.p];
            let mut intercept = b0;
            for (a, &j) in self.active.iter().enumerate() {
                coef[j] = beta[a] / self.x_scale[j];
                intercept -= self.x_mean[j] * coef[j];
            }
            fit.push(lambda, intercept, coef);

            let rsq = 1.0 - self.deviance(&eta) / null_dev;
            if k > 0 && (rsq - prev_rsq < FDEV * rsq || rsq > MAX_DEV_RATIO) {
                break;
            }
            prev_rsq = rsq;
        }
        Ok(fit)
    }
}
