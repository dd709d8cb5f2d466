//! Knockoff generation: second-order Gaussian model-X knockoffs and
//! sequential knockoffs for mixed continuous/binary features.

mod gaussian;
mod neighborhood;
mod sequential;

use serde::{Deserialize, Serialize};

use crate::design::DesignMatrix;

pub use gaussian::{estimate_gaussian_model, sample_gaussian_knockoffs, GaussianKnockoffModel};
pub use neighborhood::{estimate_neighborhoods, Adjacency};
pub use sequential::{sample_sequential_knockoffs, SequentialKnockoffSpec};

pub const KNOCKOFF_SUFFIX: &str = "_knockoff";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KnockoffMethod {
    Gaussian,
    Sequential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Continuous,
    Binary,
}

/// A design matrix and its knockoff copy, column for column.
#[derive(Debug, Clone, PartialEq)]
pub struct KnockoffSet {
    pub original: DesignMatrix,
    pub knockoff: DesignMatrix,
    pub method: KnockoffMethod,
    pub seed: u64,
}

impl KnockoffSet {
    /// `[X, X*]`.
    pub fn augmented(&self) -> DesignMatrix {
        self.original
            .hcat(&self.knockoff)
            .expect("knockoff shares the original's row count")
    }
}

pub(crate) fn knockoff_names(x: &DesignMatrix) -> Vec<String> {
    x.names()
        .iter()
        .map(|n| format!("{n}{KNOCKOFF_SUFFIX}"))
        .collect()
}

/// Binary when every value is exactly 0 or 1 and both values occur.
pub fn detect_kinds(x: &DesignMatrix) -> Vec<FeatureKind> {
    (0..x.cols())
        .map(|j| {
            let col = x.column(j);
            let both = col.contains(&0.0) && col.contains(&1.0);
            if both && x.is_binary_column(j) {
                FeatureKind::Binary
            } else {
                FeatureKind::Continuous
            }
        })
        .collect()
}
