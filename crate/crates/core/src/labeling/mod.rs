//! Section-heading normalization and the heading → label mapping.
//!
//! Lookup is by exact normalized heading. A heading such as "population
//! and methods" is never labeled P just because it contains "population".

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::ingest::RawAbstract;

mod lemma;

pub use lemma::lemmatize;

pub const DEFAULT_HEADING_MAP: &str = include_str!("default_heading_map.tsv");

/// P / I / O membership, stored as a 3-bit mask (P = bit 0).
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
pub struct LabelSet {
    pub p: bool,
    pub i: bool,
    pub o: bool,
}

impl LabelSet {
    pub const NEGATIVE: LabelSet = LabelSet {
        p: false,
        i: false,
        o: false,
    };

    pub fn from_mask(mask: u8) -> Self {
        LabelSet {
            p: mask & 1 != 0,
            i: mask & 2 != 0,
            o: mask & 4 != 0,
        }
    }

    pub fn mask(self) -> u8 {
        u8::from(self.p) | u8::from(self.i) << 1 | u8::from(self.o) << 2
    }

    pub fn is_empty(self) -> bool {
        self.mask() == 0
    }

    /// Targets in P, I, O column order.
    pub fn as_targets(self) -> [f64; 3] {
        [self.p, self.i, self.o].map(|b| if b { 1.0 } else { 0.0 })
    }

    pub fn from_targets(t: [f64; 3]) -> Self {
        LabelSet {
            p: t[0] >= 0.5,
            i: t[1] >= 0.5,
            o: t[2] >= 0.5,
        }
    }
}

impl fmt::Display for LabelSet {
    /// "P", "I O", … or "NEGATIVE".
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("NEGATIVE");
        }
        let parts: Vec<&str> = [(self.p, "P"), (self.i, "I"), (self.o, "O")]
            .into_iter()
            .filter_map(|(on, name)| on.then_some(name))
            .collect();
        f.write_str(&parts.join(" "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    /// Never holds an empty set; see [`Decision::positive`].
    Positive(LabelSet),
    Negative,
    Discard,
}

impl Decision {
    pub fn positive(labels: LabelSet) -> Option<Decision> {
        (!labels.is_empty()).then_some(Decision::Positive(labels))
    }

    pub fn code(self) -> String {
        match self {
            Decision::Positive(l) => l.to_string().replace(' ', ""),
            Decision::Negative => "NEG".into(),
            Decision::Discard => "DISCARD".into(),
        }
    }
}

impl FromStr for Decision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mask = match s {
            "NEG" => return Ok(Decision::Negative),
            "DISCARD" => return Ok(Decision::Discard),
            "P" => 1,
            "I" => 2,
            "O" => 4,
            "PI" => 3,
            "PO" => 5,
            "IO" => 6,
            "PIO" => 7,
            other => return Err(format!("unknown decision {other:?}")),
        };
        Ok(Decision::Positive(LabelSet::from_mask(mask)))
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum HeadingMapError {
    #[error("heading map line {line}: {message}")]
    Line { line: usize, message: String },
}

/// Normalized heading → decision. Misses fall back to [`Decision::Discard`].
#[derive(Debug, Clone)]
pub struct HeadingMap {
    entries: BTreeMap<String, Decision>,
}

impl HeadingMap {
    pub fn parse(text: &str) -> Result<Self, HeadingMapError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (heading, decision) = raw.split_once('\t').ok_or(HeadingMapError::Line {
                line,
                message: "expected `heading<TAB>decision`".into(),
            })?;
            let decision: Decision = decision
                .trim()
                .parse()
                .map_err(|message| HeadingMapError::Line { line, message })?;
            let key = normalize_heading(heading);
            if key.is_empty() {
                return Err(HeadingMapError::Line {
                    line,
                    message: "heading normalizes to the empty string".into(),
                });
            }
            if let Some(previous) = entries.insert(key.clone(), decision) {
                warn!(line, heading = %key, previous = %previous.code(), "duplicate heading, last entry wins");
            }
        }
        Ok(HeadingMap { entries })
    }

    pub fn load(path: &Path) -> crate::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| crate::Error::io(path, e))?;
        Ok(Self::parse(&text)?)
    }

    pub fn get(&self, normalized: &str) -> Decision {
        self.entries
            .get(normalized)
            .copied()
            .unwrap_or(Decision::Discard)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Render in the config format, sorted by heading.
    pub fn to_config(&self) -> String {
        self.entries
            .iter()
            .map(|(k, d)| format!("{k}\t{}\n", d.code()))
            .collect()
    }
}

impl Default for HeadingMap {
    fn default() -> Self {
        HeadingMap::parse(DEFAULT_HEADING_MAP).expect("embedded heading map is valid")
    }
}

/// Lowercase, replace everything but letters with spaces, collapse
/// whitespace and lemmatize each token.
pub fn normalize_heading(raw: &str) -> String {
    let lowered = raw.to_lowercase();
    let letters: String = lowered
        .chars()
        .map(|c| if c.is_alphabetic() { c } else { ' ' })
        .collect();
    letters
        .split_whitespace()
        .map(lemmatize)
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn map_heading(normalized: &str, map: &HeadingMap) -> Decision {
    map.get(normalized)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSequence {
    /// `<pmid>-<section index>`; unique across a corpus.
    pub id: String,
    pub pmid: u64,
    pub heading: String,
    pub text: String,
    pub labels: LabelSet,
    pub is_negative: bool,
}

impl LabeledSequence {
    pub fn new(id: String, pmid: u64, heading: String, text: String, labels: LabelSet) -> Self {
        LabeledSequence {
            id,
            pmid,
            heading,
            text,
            is_negative: labels.is_empty(),
            labels,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipReason {
    Unstructured,
}

/// One record per Positive or Negative section; full section text kept.
pub fn label_abstract(
    abstract_: &RawAbstract,
    map: &HeadingMap,
) -> Result<Vec<LabeledSequence>, SkipReason> {
    if !abstract_.is_structured {
        return Err(SkipReason::Unstructured);
    }
    let mut out = Vec::new();
    for (idx, section) in abstract_.sections.iter().enumerate() {
        let labels = match map_heading(&normalize_heading(&section.heading), map) {
            Decision::Positive(l) => l,
            Decision::Negative => LabelSet::NEGATIVE,
            Decision::Discard => continue,
        };
        out.push(LabeledSequence::new(
            format!("{}-{idx}", abstract_.pmid),
            abstract_.pmid,
            section.heading.clone(),
            section.body.clone(),
            labels,
        ));
    }
    Ok(out)
}

/// Counts for all eight masks, indexed by [`LabelSet::mask`].
pub fn category_histogram(dataset: &[LabeledSequence]) -> [usize; 8] {
    let mut counts = [0; 8];
    for r in dataset {
        counts[usize::from(r.labels.mask())] += 1;
    }
    counts
}

/// Heading → (count, first `per_heading` bodies) for manual review of the
/// map. Keys are normalized headings.
pub fn heading_samples(
    abstracts: &[RawAbstract],
    per_heading: usize,
) -> BTreeMap<String, (usize, Vec<String>)> {
    let mut out: BTreeMap<String, (usize, Vec<String>)> = BTreeMap::new();
    for a in abstracts.iter().filter(|a| a.is_structured) {
        for s in &a.sections {
            let entry = out.entry(normalize_heading(&s.heading)).or_default();
            entry.0 += 1;
            if entry.1.len() < per_heading {
                entry.1.push(s.body.clone());
            }
        }
    }
    out
}

/// Counts of labeling outcomes over a corpus.
#[derive(Debug, Default, Clone, PartialEq, Eq, Serialize)]
pub struct LabelReport {
    pub abstracts: usize,
    pub unstructured: usize,
    pub sections: usize,
    pub discarded: usize,
    pub labeled: usize,
    pub histogram: BTreeMap<String, usize>,
}

pub fn label_corpus(
    abstracts: &[RawAbstract],
    map: &HeadingMap,
) -> (Vec<LabeledSequence>, LabelReport) {
    let mut report = LabelReport {
        abstracts: abstracts.len(),
        ..LabelReport::default()
    };
    let mut out = Vec::new();
    for a in abstracts {
        match label_abstract(a, map) {
            Ok(records) => {
                report.sections += a.sections.len();
                report.discarded += a.sections.len() - records.len();
                out.extend(records);
            }
            Err(SkipReason::Unstructured) => report.unstructured += 1,
        }
    }
    report.labeled = out.len();
    report.histogram = histogram_by_name(&category_histogram(&out));
    (out, report)
}

pub fn histogram_by_name(counts: &[usize; 8]) -> BTreeMap<String, usize> {
    let mut names: HashMap<String, usize> = HashMap::new();
    for (mask, &n) in counts.iter().enumerate() {
        names.insert(LabelSet::from_mask(mask as u8).to_string(), n);
    }
    names.into_iter().collect()
}
