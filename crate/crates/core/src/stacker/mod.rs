//! Second-level model: histogram gradient-boosted trees over base-learner
//! probabilities plus the TF-IDF and QIEF features, trained out-of-fold on
//! the stack split.

mod binning;
mod gbdt;
mod matrix;
mod split;
mod stacked;
mod tree;

pub use binning::BinMapper;
pub use gbdt::{fit_gbdt, fit_label, BoostOutcome, GbdtConfig, GbdtFit, GbdtModel, LabelBooster};
pub use matrix::{read_stack_matrix, write_stack_matrix, StackMatrix};
pub use split::{make_folds, split_base_stack, BaseStackSplit, SplitProtocol, MIN_SPLIT_SIZE};
pub use stacked::{
    fit_stacked, CvScores, OofPrediction, StackedFit, StackedModel, MODEL_SCHEMA_VERSION,
};
pub use tree::{Node, RegressionTree};

use crate::base_learner::Triple;
use crate::features::QIEF_NAMES;
use crate::metrics::MetricError;

#[derive(Debug, thiserror::Error)]
pub enum StackError {
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("too few {what}: got {got}, need at least {min}")]
    TooFew {
        what: &'static str,
        got: usize,
        min: usize,
    },
    #[error("invalid stacker configuration: {0}")]
    Config(String),
    #[error("label {label} has a single class ({positives} positives, {negatives} negatives)")]
    SingleClass {
        label: &'static str,
        positives: usize,
        negatives: usize,
    },
    #[error("non-finite feature at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("feature shape mismatch: expected {expected} columns, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("model schema version {found} is not supported (expected {expected})")]
    Schema { found: u32, expected: u32 },
    #[error("model file: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Columns after the per-model probability block.
pub const TEXT_FEATURE_NAMES: [&str; 5] = [
    "avg_tfidf",
    QIEF_NAMES[0],
    QIEF_NAMES[1],
    QIEF_NAMES[2],
    QIEF_NAMES[3],
];

/// Feature column names for `n_models` base models, in matrix order.
pub fn feature_names(n_models: usize) -> Vec<String> {
    let mut names = Vec::with_capacity(3 * n_models + TEXT_FEATURE_NAMES.len());
    for m in 1..=n_models {
        for l in ["pP", "pI", "pO"] {
            names.push(format!("m{m}_{l}"));
        }
    }
    names.extend(TEXT_FEATURE_NAMES.iter().map(|s| s.to_string()));
    names
}

/// One row of the stack matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct StackInstance {
    pub id: String,
    pub x: Vec<f64>,
    pub t: Triple,
}

impl StackInstance {
    /// Assemble `x` from base-model triples (in model order) and the five
    /// text features.
    pub fn assemble(id: impl Into<String>, base: &[Triple], text: [f64; 5], t: Triple) -> Self {
        let mut x: Vec<f64> = base.iter().flat_map(|p| p.iter().copied()).collect();
        x.extend_from_slice(&text);
        StackInstance {
            id: id.into(),
            x,
            t,
        }
    }
}
