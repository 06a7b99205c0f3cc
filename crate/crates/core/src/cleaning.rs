//! Dataset cleaning: unicode normalization, missing-text removal, English
//! detection, word-count bounds and exact-text deduplication.

use std::collections::HashSet;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::labeling::LabeledSequence;

/// The hundred most frequent English lemmas.
pub const ENGLISH_STOPWORDS: [&str; 100] = [
    "the", "be", "to", "of", "and", "a", "in", "that", "have", "i", "it", "for", "not", "on",
    "with", "he", "as", "you", "do", "at", "this", "but", "his", "by", "from", "they", "we", "say",
    "her", "she", "or", "an", "will", "my", "one", "all", "would", "there", "their", "what", "so",
    "up", "out", "if", "about", "who", "get", "which", "go", "me", "when", "make", "can", "like",
    "time", "no", "just", "him", "know", "take", "people", "into", "year", "your", "good", "some",
    "could", "them", "see", "other", "than", "then", "now", "look", "only", "come", "its", "over",
    "think", "also", "back", "after", "use", "two", "how", "our", "work", "first", "well", "way",
    "even", "new", "want", "because", "any", "these", "give", "day", "most", "us",
];

fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| ENGLISH_STOPWORDS.iter().copied().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanConfig {
    pub min_words: usize,
    pub max_words: usize,
    pub english_stopword_ratio_threshold: f64,
}

impl Default for CleanConfig {
    fn default() -> Self {
        CleanConfig {
            min_words: 5,
            max_words: 200,
            english_stopword_ratio_threshold: 0.12,
        }
    }
}

impl CleanConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.min_words == 0 || self.min_words > self.max_words {
            return Err(format!(
                "need 0 < min_words <= max_words, got {}..{}",
                self.min_words, self.max_words
            ));
        }
        if !(0.0..=1.0).contains(&self.english_stopword_ratio_threshold) {
            return Err("english_stopword_ratio_threshold must be in [0, 1]".into());
        }
        Ok(())
    }
}

/// Strip control characters (newline and tab survive until whitespace
/// collapsing), apply NFKC, collapse whitespace runs and trim.
pub fn normalize_text(text: &str) -> String {
    // Controls go first: removing them after NFKC could expose new
    // composable pairs and break idempotence.
    let stripped: String = text
        .chars()
        .filter(|&c| !c.is_control() || c == '\n' || c == '\t')
        .collect();
    let composed: String = stripped.nfkc().collect();
    composed.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

pub fn passes_length(text: &str, config: &CleanConfig) -> bool {
    (config.min_words..=config.max_words).contains(&word_count(text))
}

/// Share of whitespace tokens that are English stopwords (edge punctuation
/// ignored when matching).
pub fn stopword_ratio(text: &str) -> f64 {
    let lowered = text.to_lowercase();
    let tokens: Vec<&str> = lowered.split_whitespace().collect();
    if tokens.is_empty() {
        return 0.0;
    }
    let set = stopwords();
    let hits = tokens
        .iter()
        .filter(|t| set.contains(t.trim_matches(|c: char| !c.is_alphanumeric())))
        .count();
    hits as f64 / tokens.len() as f64
}

pub fn is_english(text: &str, config: &CleanConfig) -> bool {
    !text.trim().is_empty() && stopword_ratio(text) >= config.english_stopword_ratio_threshold
}

#[derive(Debug, Default, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropReport {
    pub input: usize,
    pub kept: usize,
    pub missing: usize,
    pub language: usize,
    pub length: usize,
    pub duplicate: usize,
}

impl DropReport {
    pub fn dropped(&self) -> usize {
        self.missing + self.language + self.length + self.duplicate
    }
}

/// normalize → drop empty → English → length → dedup (first occurrence
/// wins, arrival order kept).
pub fn clean_dataset(
    records: &[LabeledSequence],
    config: &CleanConfig,
) -> (Vec<LabeledSequence>, DropReport) {
    let mut report = DropReport {
        input: records.len(),
        ..DropReport::default()
    };
    let mut seen = HashSet::new();
    let mut kept = Vec::new();
    for r in records {
        let text = normalize_text(&r.text);
        if text.is_empty() {
            report.missing += 1;
            continue;
        }
        if !is_english(&text, config) {
            report.language += 1;
            continue;
        }
        if !passes_length(&text, config) {
            report.length += 1;
            continue;
        }
        if !seen.insert(text.clone()) {
            report.duplicate += 1;
            continue;
        }
        kept.push(LabeledSequence { text, ..r.clone() });
    }
    report.kept = kept.len();
    (kept, report)
}
