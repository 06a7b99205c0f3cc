//! Stacker input features: per-instance average TF-IDF and counts of
//! quantitative information elements.

use serde::{Deserialize, Serialize};

mod qief;
mod tfidf;

pub use qief::{qief_features, QiefDetectors, QiefFeatures, DEFAULT_QIEF_PATTERNS, QIEF_NAMES};
pub use tfidf::{avg_tfidf, fit_tfidf, TfIdfStats};

use crate::labeling::LabeledSequence;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum FeatureError {
    #[error("cannot fit TF-IDF on an empty corpus")]
    EmptyCorpus,
    #[error("QIEF pattern file line {line}: {message}")]
    Pattern { line: usize, message: String },
}

/// Lowercase and split on non-alphanumerics; keep tokens of two or more
/// characters, and single digits.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| {
            let mut chars = t.chars();
            match (chars.next(), chars.next()) {
                (None, _) => false,
                (Some(c), None) => c.is_ascii_digit(),
                _ => true,
            }
        })
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub avg_tfidf: f64,
    pub qief: QiefFeatures,
}

impl FeatureVector {
    /// `[avg_tfidf, pct, pop, dose, num]`.
    pub fn to_array(&self) -> [f64; 5] {
        let q = self.qief.as_array();
        [
            self.avg_tfidf,
            f64::from(q[0]),
            f64::from(q[1]),
            f64::from(q[2]),
            f64::from(q[3]),
        ]
    }
}

pub fn featurize(text: &str, stats: &TfIdfStats, detectors: &QiefDetectors) -> FeatureVector {
    FeatureVector {
        avg_tfidf: avg_tfidf(&tokenize(text), stats),
        qief: detectors.count(text),
    }
}

/// One vector per record, same order. `stats` must come from the base
/// split only.
pub fn featurize_dataset(
    records: &[LabeledSequence],
    stats: &TfIdfStats,
    detectors: &QiefDetectors,
) -> Vec<FeatureVector> {
    records
        .iter()
        .map(|r| featurize(&r.text, stats, detectors))
        .collect()
}

/// Fit document frequencies on the given records.
pub fn fit_on_records<'a>(
    records: impl IntoIterator<Item = &'a LabeledSequence>,
) -> Result<TfIdfStats, FeatureError> {
    let corpus: Vec<Vec<String>> = records.into_iter().map(|r| tokenize(&r.text)).collect();
    fit_tfidf(&corpus)
}

/// FNV-1a, used for a platform-independent token hash.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Hashed unigram counts, L2-normalised; a fixed text representation for
/// the base learner when no external vectors are given.
pub fn hashed_bow(text: &str, dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    for tok in tokenize(text) {
        v[(fnv1a(tok.as_bytes()) % dim as u64) as usize] += 1.0;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}
