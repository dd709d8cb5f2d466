//! Sequential knockoffs for mixed continuous and binary features.
//!
//! Features are visited in a random order. Each one is regressed (penalized,
//! cross-validated) on its neighbours among the original columns and on the
//! knockoffs of its neighbours generated so far; its knockoff is then drawn
//! from the fitted conditional: Gaussian with the residual standard deviation
//! for continuous features, Bernoulli with the fitted probability for binary
//! ones.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{knockoff_names, Adjacency, FeatureKind, KnockoffMethod, KnockoffSet};
use crate::design::DesignMatrix;
use crate::error::{Error, Result};
use crate::penreg::{fit_cv, residual_sd, Family, FitSpec};
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone)]
pub struct SequentialKnockoffSpec {
    pub feature_kinds: Vec<FeatureKind>,
    /// `None` regresses every feature on all the others.
    pub neighborhood: Option<Adjacency>,
    pub order_seed: u64,
    pub penreg_spec: FitSpec,
}

impl SequentialKnockoffSpec {
    /// Kinds detected from the data, no neighborhood restriction.
    pub fn for_design(x: &DesignMatrix, penreg_spec: FitSpec) -> Self {
        Self {
            feature_kinds: super::detect_kinds(x),
            neighborhood: None,
            order_seed: 0,
            penreg_spec,
        }
    }

    fn validate(&self, x: &DesignMatrix) -> Result<()> {
        if self.feature_kinds.len() != x.cols() {
            return Err(Error::Dimension(format!(
                "{} feature kinds for {} columns",
                self.feature_kinds.len(),
                x.cols()
            )));
        }
        if let Some(adj) = &self.neighborhood {
            if adj.len() != x.cols() {
                return Err(Error::Dimension(format!(
                    "neighborhood covers {} features, design has {}",
                    adj.len(),
                    x.cols()
                )));
            }
            if !adj.is_symmetric() {
                return Err(Error::InvalidInput("neighborhood is not symmetric".into()));
            }
        }
        for (j, kind) in self.feature_kinds.iter().enumerate() {
            if *kind == FeatureKind::Binary {
                if let Some(row) = x.column(j).iter().position(|&v| v != 0.0 && v != 1.0) {
                    return Err(Error::NotBinary {
                        column: x.names()[j].clone(),
                        row,
                        value: x.get(row, j),
                    });
                }
            }
        }
        Ok(())
    }
}

pub fn sample_sequential_knockoffs(
    x: &DesignMatrix,
    spec: &SequentialKnockoffSpec,
    seed: u64,
) -> Result<KnockoffSet> {
    spec.validate(x)?;
    let n = x.rows();
    let p = x.cols();
    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(&mut rng_from_seed(derive_seed(
        seed,
        "order",
        spec.order_seed,
    )));

    let mut ko = DMatrix::<f64>::zeros(n, p);
    let mut generated = vec![false; p];
    for (step, &k) in order.iter().enumerate() {
        let target = x.column(k);
        let mut rng = rng_from_seed(derive_seed(seed, "draw", k as u64));
        let mut out = vec![0.0; n];
        if target.iter().all(|&v| v == target[0]) {
            out.copy_from_slice(target);
        } else {
            let neighbors: Vec<usize> = match &spec.neighborhood {
                Some(adj) => adj.neighbors(k).to_vec(),
                None => (0..p).filter(|&j| j != k).collect(),
            };
            let ko_cols: Vec<usize> = neighbors
                .iter()
                .copied()
                .filter(|&j| generated[j])
                .collect();
            let kind = spec.feature_kinds[k];
            let family = match kind {
                FeatureKind::Continuous => Family::Gaussian,
                FeatureKind::Binary => Family::Binomial,
            };
            let mean: Vec<f64>;
            let sd: f64;
            if neighbors.is_empty() {
                let m = target.iter().sum::<f64>() / n as f64;
                mean = vec![m; n];
                sd = (target.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
            } else {
                let mut cols = DMatrix::zeros(n, neighbors.len() + ko_cols.len());
                let mut names = Vec::with_capacity(cols.ncols());
                for (c, &j) in neighbors.iter().enumerate() {
                    cols.column_mut(c).copy_from_slice(x.column(j));
                    names.push(format!("x{j}"));
                }
                for (c, &j) in ko_cols.iter().enumerate() {
                    cols.column_mut(neighbors.len() + c)
                        .copy_from(&ko.column(j));
                    names.push(format!("k{j}"));
                }
                let predictors = DesignMatrix::new(cols, names)?;
                let fit_spec = FitSpec {
                    family,
                    ..spec.penreg_spec.clone()
                };
                let fit = fit_cv(
                    &predictors,
                    target,
                    &fit_spec,
                    derive_seed(seed, "cv", step as u64),
                )?;
                mean = fit.predict(&predictors);
                sd = match kind {
                    FeatureKind::Continuous => residual_sd(&predictors, target, &fit),
                    FeatureKind::Binary => 0.0,
                };
            }
            match kind {
                FeatureKind::Continuous => {
                    for (o, m) in out.iter_mut().zip(&mean) {
                        *o = m + sd * rng.sample::<f64, _>(StandardNormal);
                    }
                }
                FeatureKind::Binary => {
                    for (o, m) in out.iter_mut().zip(&mean) {
                        *o = if rng.gen::<f64>() < *m { 1.0 } else { 0.0 };
                    }
                }
            }
        }
        ko.column_mut(k).copy_from_slice(&out);
        generated[k] = true;
    }

    Ok(KnockoffSet {
        original: x.clone(),
        knockoff: DesignMatrix::new(ko, knockoff_names(x))?,
        method: KnockoffMethod::Sequential,
        seed,
    })
}
