use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::FeatureError;

pub const DEFAULT_QIEF_PATTERNS: &str = include_str!("qief_patterns.tsv");

/// Detector names in column order.
pub const QIEF_NAMES: [&str; 4] = ["pct", "pop", "dose", "num"];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QiefFeatures {
    pub percentage_count: u32,
    pub population_count: u32,
    pub dose_count: u32,
    pub numeric_count: u32,
}

impl QiefFeatures {
    pub fn as_array(&self) -> [u32; 4] {
        [
            self.percentage_count,
            self.population_count,
            self.dose_count,
            self.numeric_count,
        ]
    }
}

/// The four compiled detectors. A span may count for several detectors.
#[derive(Debug, Clone)]
pub struct QiefDetectors {
    sources: [String; 4],
    regexes: [Regex; 4],
}

impl QiefDetectors {
    pub fn parse(text: &str) -> Result<Self, FeatureError> {
        let mut found: [Option<String>; 4] = Default::default();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, pattern) = line.split_once('\t').ok_or_else(|| FeatureError::Pattern {
                line: idx + 1,
                message: "expected `name<TAB>regex`".into(),
            })?;
            let slot = QIEF_NAMES
                .iter()
                .position(|n| *n == name.trim())
                .ok_or_else(|| FeatureError::Pattern {
                    line: idx + 1,
                    message: format!("unknown detector {name:?}; expected one of {QIEF_NAMES:?}"),
                })?;
            found[slot] = Some(pattern.to_string());
        }
        let mut sources: Vec<String> = Vec::with_capacity(4);
        let mut regexes = Vec::with_capacity(4);
        for (slot, source) in found.into_iter().enumerate() {
            let source = source.ok_or_else(|| FeatureError::Pattern {
                line: 0,
                message: format!("missing detector {}", QIEF_NAMES[slot]),
            })?;
            let re = Regex::new(&source).map_err(|e| FeatureError::Pattern {
                line: 0,
                message: format!("{}: {e}", QIEF_NAMES[slot]),
            })?;
            sources.push(source);
            regexes.push(re);
        }
        Ok(QiefDetectors {
            sources: sources.try_into().expect("four sources"),
            regexes: regexes.try_into().expect("four regexes"),
        })
    }

    pub fn load(path: &Path) -> crate::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| crate::Error::io(path, e))?;
        Ok(Self::parse(&text)?)
    }

    /// Pattern file text for these detectors.
    pub fn to_config(&self) -> String {
        QIEF_NAMES
            .iter()
            .zip(&self.sources)
            .map(|(n, s)| format!("{n}\t{s}\n"))
            .collect()
    }

    pub fn count(&self, text: &str) -> QiefFeatures {
        let c = |i: usize| self.regexes[i].find_iter(text).count() as u32;
        QiefFeatures {
            percentage_count: c(0),
            population_count: c(1),
            dose_count: c(2),
            numeric_count: c(3),
        }
    }
}

impl Default for QiefDetectors {
    fn default() -> Self {
        QiefDetectors::parse(DEFAULT_QIEF_PATTERNS).expect("embedded QIEF patterns are valid")
    }
}

/// Counts with the default detectors.
pub fn qief_features(text: &str) -> QiefFeatures {
    use std::sync::OnceLock;
    static DEFAULT: OnceLock<QiefDetectors> = OnceLock::new();
    DEFAULT.get_or_init(QiefDetectors::default).count(text)
}
