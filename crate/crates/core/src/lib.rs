//! Frequentist confidence regions with maximal average power.
//!
//! For each null value `eta` the decision set keeps the outcomes with the
//! largest posterior density `f_eta(x) / P_mix(x)` until the coverage under
//! `f_eta` reaches `1 - level`, which by the Neyman-Pearson lemma maximizes
//! the power against the prior mixture and hence the prior-averaged power.
//! The binomial / beta case is evaluated exactly; [`mc`] builds the same rows
//! for generic models by sampling.

pub mod baseline;
pub mod decision;
pub mod error;
pub mod grid;
pub mod mc;
pub mod power;
pub mod procedure;
pub mod registry;
pub mod report;
pub mod special;
pub mod util;
pub mod weighting;

pub use decision::{
    build_decision_matrix, build_decision_row, ConfidenceRegion, DecisionMatrix, DecisionRow,
    TestConfig,
};
pub use error::{Error, Result};
pub use grid::ParameterGrid;
pub use special::{BetaPrior, BinomialModel};
