//! Seeded synthetic corpora for tests and demonstrations.
//!
//! Label signal is planted in two places: quantity phrases in the text
//! (population sizes for P, doses for I, percentages for O), which the QIEF
//! features pick up, and a noisy per-label vector handed to the base
//! learner. Neither alone separates the labels well.

use std::fmt::Write as _;

use quick_xml::escape::escape;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ingest::{RawAbstract, RawSection};
use crate::labeling::{LabelSet, LabeledSequence};

const FIRST_PMID: u64 = 30_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    /// Chance a record carries the quantity phrase of each of its labels.
    pub cue_rate: f64,
    /// Chance a record carries the phrase of a label it does not have.
    pub false_cue_rate: f64,
    /// Standard deviation of the noise on the planted vector.
    pub planted_noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 20190411,
            cue_rate: 0.85,
            false_cue_rate: 0.08,
            planted_noise: 0.9,
        }
    }
}

/// Category masks (bit 0 = P, bit 1 = I, bit 2 = O) with sampling weights.
const CATEGORY_WEIGHTS: [(u8, f64); 7] = [
    (0b001, 0.28),
    (0b010, 0.21),
    (0b100, 0.12),
    (0b011, 0.04),
    (0b101, 0.02),
    (0b110, 0.03),
    (0b000, 0.30),
];

const FILLER: [&str; 14] = [
    "the study was conducted at several hospitals in the region",
    "this trial was designed to compare the two approaches in routine care",
    "it is not known whether the effect persists over a longer period",
    "we describe the methods that were used for the analysis of the data",
    "all of the procedures were approved by the local ethics committee",
    "there is a need for more evidence on this question in practice",
    "the results of the trial will be reported in a separate paper",
    "data were collected by trained staff who were blind to the allocation",
    "the main aim of this work was to inform clinical decisions",
    "previous studies have reported mixed findings on this topic",
    "follow up visits were scheduled at regular intervals after entry",
    "the analysis was performed according to the intention to treat principle",
    "this is one of the first randomized trials in this setting",
    "these findings should be confirmed in a larger study",
];

const POPULATION_NOUNS: [&str; 7] = [
    "patients",
    "subjects",
    "participants",
    "adults",
    "children",
    "women",
    "men",
];
const DOSE_UNITS: [&str; 6] = ["mg", "mg/kg", "mg/day", "ml", "iu", "units"];

fn population_phrase(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(12..900);
    let noun = POPULATION_NOUNS.choose(rng).expect("non-empty");
    format!("a total of {n} {noun} with the condition were enrolled in the trial")
}

fn dose_phrase(rng: &mut ChaCha8Rng) -> String {
    let d = rng.gen_range(1..500);
    let unit = DOSE_UNITS.choose(rng).expect("non-empty");
    format!("the treatment group received {d} {unit} of the study drug twice a day")
}

fn percentage_phrase(rng: &mut ChaCha8Rng) -> String {
    let whole = rng.gen_range(1..99);
    let frac = rng.gen_range(0..10);
    format!("the rate of response was {whole}.{frac}% in the group at the end of the trial")
}

fn sample_mask(rng: &mut ChaCha8Rng) -> u8 {
    let total: f64 = CATEGORY_WEIGHTS.iter().map(|c| c.1).sum();
    let mut u = rng.gen::<f64>() * total;
    for &(mask, w) in &CATEGORY_WEIGHTS {
        if u < w {
            return mask;
        }
        u -= w;
    }
    CATEGORY_WEIGHTS[CATEGORY_WEIGHTS.len() - 1].0
}

/// Section text for a label set; always English and 5 to 200 words.
pub fn section_text(labels: LabelSet, cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> String {
    let mut sentences: Vec<String> = (0..rng.gen_range(2..5))
        .map(|_| FILLER.choose(rng).expect("non-empty").to_string())
        .collect();
    let has = [labels.p, labels.i, labels.o];
    let phrase: [fn(&mut ChaCha8Rng) -> String; 3] =
        [population_phrase, dose_phrase, percentage_phrase];
    for k in 0..3 {
        let rate = if has[k] {
            cfg.cue_rate
        } else {
            cfg.false_cue_rate
        };
        if rng.gen::<f64>() < rate {
            sentences.push(phrase[k](rng));
        }
    }
    sentences.shuffle(rng);
    let mut text = sentences.join(". ");
    text.push('.');
    let mut chars = text.chars();
    let first = chars
        .next()
        .map(|c| c.to_ascii_uppercase())
        .unwrap_or_default();
    std::iter::once(first).chain(chars).collect()
}

/// A labeled record and the planted vector given to the base learner.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthRecord {
    pub sequence: LabeledSequence,
    pub planted: Vec<f64>,
}

/// `n` labeled sequences with unique texts.
pub fn generate_sequences(n: usize, cfg: &SynthConfig) -> Vec<SynthRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.planted_noise).expect("valid noise scale");
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(n);
    let mut pmid = FIRST_PMID;
    while out.len() < n {
        let labels = LabelSet::from_mask(sample_mask(&mut rng));
        let text = section_text(labels, cfg, &mut rng);
        if !seen.insert(text.clone()) {
            continue;
        }
        let planted = labels
            .as_targets()
            .iter()
            .map(|t| t + noise.sample(&mut rng))
            .collect();
        out.push(SynthRecord {
            sequence: LabeledSequence::new(
                format!("{pmid}-0"),
                pmid,
                "SYNTHETIC".into(),
                text,
                labels,
            ),
            planted,
        });
        pmid += 1;
    }
    out
}

fn heading_for(mask: Option<u8>, rng: &mut ChaCha8Rng) -> (&'static str, &'static str) {
    // (printed heading, NlmCategory)
    let pool: &[(&str, &str)] = match mask {
        Some(0b001) => &[
            ("PATIENTS", "METHODS"),
            ("POPULATION", "METHODS"),
            ("SUBJECTS", "METHODS"),
            ("Participants", "METHODS"),
            ("STUDY POPULATION", "METHODS"),
        ],
        Some(0b010) => &[
            ("INTERVENTIONS", "METHODS"),
            ("INTERVENTION", "METHODS"),
            ("Treatment", "METHODS"),
            ("THERAPY", "METHODS"),
        ],
        Some(0b100) => &[
            ("MAIN OUTCOME MEASURES", "METHODS"),
            ("OUTCOMES", "METHODS"),
            ("PRIMARY ENDPOINT", "METHODS"),
            ("Outcome Measures", "METHODS"),
        ],
        Some(0b011) => &[
            ("POPULATION AND INTERVENTION", "METHODS"),
            ("PATIENTS AND INTERVENTIONS", "METHODS"),
        ],
        Some(0b101) => &[("PATIENTS AND OUTCOMES", "METHODS")],
        Some(0b110) => &[("INTERVENTIONS AND OUTCOMES", "METHODS")],
        Some(_) => &[
            ("OBJECTIVE", "OBJECTIVE"),
            ("BACKGROUND", "BACKGROUND"),
            ("AIMS", "OBJECTIVE"),
            ("CONCLUSIONS", "CONCLUSIONS"),
            ("PURPOSE", "OBJECTIVE"),
        ],
        None => &[
            ("METHODS", "METHODS"),
            ("RESULTS", "RESULTS"),
            ("PATIENTS AND METHODS", "METHODS"),
            ("DESIGN", "METHODS"),
            ("SETTING", "METHODS"),
        ],
    };
    *pool.choose(rng).expect("non-empty pool")
}

/// Structured abstracts (plus a few unstructured ones) whose headings hit
/// the default heading map.
pub fn generate_abstracts(n: usize, cfg: &SynthConfig) -> Vec<RawAbstract> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xab57_7ac7);
    let mut out = Vec::with_capacity(n);
    for a in 0..n {
        let pmid = FIRST_PMID + a as u64;
        if rng.gen::<f64>() < 0.05 {
            let body = section_text(LabelSet::NEGATIVE, cfg, &mut rng);
            out.push(RawAbstract {
                pmid,
                is_structured: false,
                sections: vec![RawSection {
                    heading: String::new(),
                    nlm_category: None,
                    body,
                }],
            });
            continue;
        }
        let mut plan: Vec<Option<u8>> = vec![Some(0)];
        for _ in 0..rng.gen_range(1..4) {
            let m = sample_mask(&mut rng);
            plan.push(Some(if m == 0 { 0b001 } else { m }));
        }
        plan.push(None);
        if rng.gen::<f64>() < 0.7 {
            plan.push(Some(0));
        }
        let sections = plan
            .into_iter()
            .map(|mask| {
                let (heading, category) = heading_for(mask, &mut rng);
                let labels = LabelSet::from_mask(mask.unwrap_or(0));
                RawSection {
                    heading: heading.to_string(),
                    nlm_category: Some(category.to_string()),
                    body: section_text(labels, cfg, &mut rng),
                }
            })
            .collect();
        out.push(RawAbstract {
            pmid,
            is_structured: true,
            sections,
        });
    }
    out
}

/// Serialize as a `PubmedArticleSet`. Every `skip_every`-th article is
/// written without an abstract (0 disables).
pub fn to_pubmed_xml(abstracts: &[RawAbstract], skip_every: usize) -> String {
    let mut xml = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<PubmedArticleSet>\n");
    for (i, a) in abstracts.iter().enumerate() {
        let _ = write!(
            xml,
            "<PubmedArticle>\n  <MedlineCitation Status=\"MEDLINE\" Owner=\"NLM\">\n    <PMID Version=\"1\">{}</PMID>\n    <Article PubModel=\"Print\">\n      <ArticleTitle>Synthetic trial {} &amp; its outcomes</ArticleTitle>\n",
            a.pmid, a.pmid
        );
        if skip_every == 0 || (i + 1) % skip_every != 0 {
            xml.push_str("      <Abstract>\n");
            for s in &a.sections {
                let mut attrs = String::new();
                if !s.heading.is_empty() {
                    let _ = write!(attrs, " Label=\"{}\"", escape(s.heading.as_str()));
                }
                if let Some(c) = &s.nlm_category {
                    let _ = write!(attrs, " NlmCategory=\"{}\"", escape(c.as_str()));
                }
                let _ = writeln!(
                    xml,
                    "        <AbstractText{attrs}>{}</AbstractText>",
                    escape(s.body.as_str())
                );
            }
            xml.push_str("      </Abstract>\n");
        }
        xml.push_str("    </Article>\n  </MedlineCitation>\n</PubmedArticle>\n");
    }
    xml.push_str("</PubmedArticleSet>\n");
    xml
}
