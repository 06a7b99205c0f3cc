use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::FeatureError;

/// Document frequencies fitted on one corpus split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfIdfStats {
    pub doc_count: u64,
    /// Sorted for stable serialization.
    pub doc_frequency: BTreeMap<String, u64>,
}

impl TfIdfStats {
    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.doc_frequency.keys().map(String::as_str)
    }

    pub fn df(&self, token: &str) -> u64 {
        self.doc_frequency.get(token).copied().unwrap_or(0)
    }

    /// Smoothed idf: `ln((1 + N) / (1 + df)) + 1`; unseen tokens use df = 0.
    pub fn idf(&self, token: &str) -> f64 {
        ((1.0 + self.doc_count as f64) / (1.0 + self.df(token) as f64)).ln() + 1.0
    }

    /// Combine partial fits over disjoint document sets.
    pub fn merge(mut self, other: &TfIdfStats) -> TfIdfStats {
        self.doc_count += other.doc_count;
        for (t, df) in &other.doc_frequency {
            *self.doc_frequency.entry(t.clone()).or_default() += df;
        }
        self
    }
}

pub fn fit_tfidf<S: AsRef<str>>(corpus: &[Vec<S>]) -> Result<TfIdfStats, FeatureError> {
    if corpus.is_empty() {
        return Err(FeatureError::EmptyCorpus);
    }
    let mut df: BTreeMap<String, u64> = BTreeMap::new();
    for doc in corpus {
        let distinct: HashSet<&str> = doc.iter().map(AsRef::as_ref).collect();
        for t in distinct {
            *df.entry(t.to_string()).or_default() += 1;
        }
    }
    Ok(TfIdfStats {
        doc_count: corpus.len() as u64,
        doc_frequency: df,
    })
}

/// Mean of `tf · idf` over the distinct tokens of one instance, where
/// `tf = count / len(tokens)`. Empty input scores 0.
pub fn avg_tfidf<S: AsRef<str>>(tokens: &[S], stats: &TfIdfStats) -> f64 {
    if tokens.is_empty() {
        return 0.0;
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in tokens {
        *counts.entry(t.as_ref()).or_default() += 1;
    }
    // Sorted so the floating-point sum order is fixed.
    let mut distinct: Vec<(&str, usize)> = counts.into_iter().collect();
    distinct.sort_unstable();
    let len = tokens.len() as f64;
    let total: f64 = distinct
        .iter()
        .map(|&(t, c)| c as f64 / len * stats.idf(t))
        .sum();
    total / distinct.len() as f64
}
