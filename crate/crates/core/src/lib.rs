//! Knockoff-based variable selection for two-level clustered data.
//!
//! Level-1 predictors are split into cluster means and within-cluster
//! deviations; selection then runs separately on the centred level-1
//! design and on the cluster-level design (cluster means plus cluster-level
//! predictors, weighted by cluster size). The crate also contains the
//! penalized regression engine, knockoff generators, thresholding rules and
//! a Monte Carlo harness used to study the error rates of the approach.

pub mod design;
pub mod error;
pub mod filter;
pub mod knockgen;
pub mod multilevel;
pub mod penreg;
pub mod rng;
pub mod sim;

pub use design::DesignMatrix;
pub use error::{Error, Result};
