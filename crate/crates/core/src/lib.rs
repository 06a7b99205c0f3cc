//! Toolkit for building a low-ambiguity Population / Intervention / Outcome
//! corpus from PubMed structured abstracts, and for training a stacked
//! multi-label classifier over it.
//!
//! The crate is organised as a file-driven pipeline:
//!
//! * [`ingest`]: E-utilities request planning, paced fetching and the
//!   `PubmedArticleSet` XML parser.
//! * [`labeling`]: heading normalisation and the heading → label map.
//! * [`cleaning`]: unicode cleanup, language and length filters, dedup.
//! * [`features`]: average TF-IDF and quantitative-information counts.
//! * [`base_learner`]: the logistic multi-label head and the probability
//!   interchange format.
//! * [`stacker`]: histogram gradient-boosted trees trained out-of-fold.
//! * [`metrics`]: ROC AUC, F1 and confusion matrices.
//! * [`cli`]: the subcommand driver used by the `piostack` binary.

pub mod base_learner;
pub mod cleaning;
pub mod cli;
pub mod features;
pub mod ingest;
pub mod io;
pub mod labeling;
pub mod manifest;
pub mod metrics;
pub mod stacker;
pub mod synth;

mod error;

pub use error::{Error, Result};

/// The three output labels, in column order.
pub const LABEL_NAMES: [&str; 3] = ["P", "I", "O"];
