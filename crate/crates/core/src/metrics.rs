//! ROC AUC (Mann-Whitney with midranks), thresholded F1 and confusion
//! matrices for the three labels.

use serde::{Deserialize, Serialize};

use crate::base_learner::Triple;
use crate::LABEL_NAMES;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricError {
    #[error("ROC AUC undefined for label {label}: {positives} positives, {negatives} negatives")]
    SingleClass {
        label: &'static str,
        positives: usize,
        negatives: usize,
    },
    #[error("length mismatch: {scores} scores, {labels} labels")]
    Length { scores: usize, labels: usize },
    #[error("non-finite score at index {0}")]
    NonFinite(usize),
}

/// Rank-sum AUC: `(concordant + ½·tied) / (pos · neg)` in `O(n log n)`.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64, MetricError> {
    roc_auc_named(scores, labels, "?")
}

fn roc_auc_named(scores: &[f64], labels: &[bool], label: &'static str) -> Result<f64, MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::Length {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(MetricError::NonFinite(i));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(MetricError::SingleClass {
            label,
            positives,
            negatives,
        });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Sum of 1-based midranks of the positives.
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let midrank = (start + 1 + end) as f64 / 2.0;
        let pos_in_group = order[start..end].iter().filter(|&&i| labels[i]).count();
        rank_sum += midrank * pos_in_group as f64;
        start = end;
    }
    let p = positives as f64;
    let n = negatives as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

fn column(rows: &[Triple], k: usize) -> Vec<f64> {
    rows.iter().map(|r| r[k]).collect()
}

fn truth(rows: &[Triple], k: usize) -> Vec<bool> {
    rows.iter().map(|r| r[k] >= 0.5).collect()
}

/// Per-label AUCs for P, I, O.
pub fn per_label_auc(probs: &[Triple], targets: &[Triple]) -> Result<Triple, MetricError> {
    let mut out = [0.0; 3];
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = roc_auc_named(&column(probs, k), &truth(targets, k), LABEL_NAMES[k])?;
    }
    Ok(out)
}

pub fn macro_roc_auc(probs: &[Triple], targets: &[Triple]) -> Result<f64, MetricError> {
    Ok(mean3(per_label_auc(probs, targets)?))
}

pub fn mean3(v: Triple) -> f64 {
    (v[0] + v[1] + v[2]) / 3.0
}

/// `[[tn, fp], [fn, tp]]` counts for one label.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// `2PR / (P + R)`, 0 when undefined.
    pub fn f1(&self) -> f64 {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn confusion(probs: &[Triple], targets: &[Triple], threshold: f64) -> [Confusion; 3] {
    let mut out = [Confusion::default(); 3];
    for (p, t) in probs.iter().zip(targets) {
        for k in 0..3 {
            let c = &mut out[k];
            match (p[k] >= threshold, t[k] >= 0.5) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Scores {
    pub per_label: Triple,
    pub micro: f64,
}

pub fn f1_at_threshold(probs: &[Triple], targets: &[Triple], threshold: f64) -> F1Scores {
    let cm = confusion(probs, targets, threshold);
    let pooled = cm.iter().fold(Confusion::default(), |acc, c| Confusion {
        tp: acc.tp + c.tp,
        fp: acc.fp + c.fp,
        fn_: acc.fn_ + c.fn_,
        tn: acc.tn + c.tn,
    });
    F1Scores {
        per_label: [cm[0].f1(), cm[1].f1(), cm[2].f1()],
        micro: pooled.f1(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelReport {
    pub label: String,
    pub auc: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: Confusion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub instances: usize,
    pub threshold: f64,
    pub labels: Vec<LabelReport>,
    pub macro_auc: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
}

impl EvalReport {
    pub const SUMMARY_HEADER: &'static str =
        "model,instances,macro_auc,auc_P,auc_I,auc_O,micro_f1,macro_f1,f1_P,f1_I,f1_O";

    /// One delimited row matching [`Self::SUMMARY_HEADER`].
    pub fn summary_row(&self) -> String {
        let mut fields = vec![
            self.model.clone(),
            self.instances.to_string(),
            format!("{:.6}", self.macro_auc),
        ];
        fields.extend(self.labels.iter().map(|l| format!("{:.6}", l.auc)));
        fields.push(format!("{:.6}", self.micro_f1));
        fields.push(format!("{:.6}", self.macro_f1));
        fields.extend(self.labels.iter().map(|l| format!("{:.6}", l.f1)));
        fields.join(",")
    }
}

impl std::fmt::Display for EvalReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "model {} on {} instances (threshold {})",
            self.model, self.instances, self.threshold
        )?;
        writeln!(
            f,
            "label      auc  precision   recall       f1     tp     fp     fn     tn"
        )?;
        for l in &self.labels {
            let c = l.confusion;
            writeln!(
                f,
                "{:<5} {:>8.4} {:>10.4} {:>8.4} {:>8.4} {:>6} {:>6} {:>6} {:>6}",
                l.label, l.auc, l.precision, l.recall, l.f1, c.tp, c.fp, c.fn_, c.tn
            )?;
        }
        write!(
            f,
            "macro ROC_AUC {:.4}  micro F1 {:.4}  macro F1 {:.4}",
            self.macro_auc, self.micro_f1, self.macro_f1
        )
    }
}

pub fn evaluate(
    model: &str,
    probs: &[Triple],
    targets: &[Triple],
    threshold: f64,
) -> Result<EvalReport, MetricError> {
    if probs.len() != targets.len() {
        return Err(MetricError::Length {
            scores: probs.len(),
            labels: targets.len(),
        });
    }
    let auc = per_label_auc(probs, targets)?;
    let cm = confusion(probs, targets, threshold);
    let f1 = f1_at_threshold(probs, targets, threshold);
    let labels = (0..3)
        .map(|k| LabelReport {
            label: LABEL_NAMES[k].to_string(),
            auc: auc[k],
            precision: cm[k].precision(),
            recall: cm[k].recall(),
            f1: cm[k].f1(),
            confusion: cm[k],
        })
        .collect();
    Ok(EvalReport {
        model: model.to_string(),
        instances: probs.len(),
        threshold,
        labels,
        macro_auc: mean3(auc),
        micro_f1: f1.micro,
        macro_f1: mean3(f1.per_label),
    })
}
