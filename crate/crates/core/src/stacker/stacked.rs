use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::gbdt::{fit_gbdt, GbdtConfig, GbdtModel};
use super::split::{make_folds, BaseStackSplit};
use super::{StackError, StackInstance};
use crate::base_learner::{Triple, N_LABELS};
use crate::metrics::{macro_roc_auc, MetricError};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// Fold-averaged stacker plus everything needed to re-predict it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackedModel {
    pub schema_version: u32,
    pub feature_names: Vec<String>,
    pub base_models: Vec<String>,
    pub split: BaseStackSplit,
    pub folds: Vec<Vec<String>>,
    pub config: GbdtConfig,
    pub fold_models: Vec<GbdtModel>,
}

impl StackedModel {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Mean of the fold models' per-label probabilities.
    pub fn predict(&self, x: &[f64]) -> Result<Triple, StackError> {
        if x.len() != self.n_features() {
            return Err(StackError::Shape {
                expected: self.n_features(),
                got: x.len(),
            });
        }
        let mut sum = [0.0; N_LABELS];
        for m in &self.fold_models {
            let p = m.predict(x)?;
            for k in 0..N_LABELS {
                sum[k] += p[k];
            }
        }
        let n = self.fold_models.len() as f64;
        Ok(sum.map(|s| s / n))
    }

    pub fn predict_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<Triple>, StackError> {
        rows.iter().map(|x| self.predict(x)).collect()
    }

    pub fn to_json(&self) -> Result<String, StackError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parse a model, checking the schema version before the body.
    pub fn from_json(text: &str) -> Result<Self, StackError> {
        #[derive(Deserialize)]
        struct Version {
            schema_version: u32,
        }
        let v: Version = serde_json::from_str(text)?;
        if v.schema_version != MODEL_SCHEMA_VERSION {
            return Err(StackError::Schema {
                found: v.schema_version,
                expected: MODEL_SCHEMA_VERSION,
            });
        }
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> crate::Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| crate::Error::io(path, e))
    }

    pub fn load(path: &Path) -> crate::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| crate::Error::io(path, e))?;
        Ok(Self::from_json(&text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OofPrediction {
    pub id: String,
    pub fold: usize,
    pub p: Triple,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvScores {
    /// Macro ROC AUC on each held-out fold; `None` when a label has a
    /// single class inside that fold.
    pub fold_macro_auc: Vec<Option<f64>>,
    /// Mean over the folds where the score is defined.
    pub mean_fold_macro_auc: f64,
    /// Macro ROC AUC of the pooled out-of-fold predictions.
    pub oof_macro_auc: f64,
}

#[derive(Debug, Clone)]
pub struct StackedFit {
    pub model: StackedModel,
    /// In the order of the input instances.
    pub oof: Vec<OofPrediction>,
    pub cv: CvScores,
    /// Per fold, per label training-loss trajectory.
    pub loss_trajectories: Vec<Vec<Vec<f64>>>,
}

fn check_protocol(instances: &[StackInstance], split: &BaseStackSplit) -> Result<(), StackError> {
    split.validate()?;
    let base: HashSet<&str> = split.base_ids.iter().map(String::as_str).collect();
    let stack: HashSet<&str> = split.stack_ids.iter().map(String::as_str).collect();
    let mut seen = HashSet::new();
    for inst in instances {
        if base.contains(inst.id.as_str()) {
            return Err(StackError::Protocol(format!(
                "leakage: stack instance {:?} belongs to the base-learner split",
                inst.id
            )));
        }
        if !stack.contains(inst.id.as_str()) {
            return Err(StackError::Protocol(format!(
                "instance {:?} is not in the stack split",
                inst.id
            )));
        }
        if !seen.insert(inst.id.as_str()) {
            return Err(StackError::Protocol(format!(
                "instance {:?} appears twice",
                inst.id
            )));
        }
    }
    if let Some(missing) = split
        .stack_ids
        .iter()
        .find(|id| !seen.contains(id.as_str()))
    {
        return Err(StackError::Protocol(format!(
            "stack id {missing:?} has no instance ({} of {} covered)",
            seen.len(),
            split.stack_ids.len()
        )));
    }
    Ok(())
}

/// Out-of-fold training of the stacker on the stack split.
pub fn fit_stacked(
    instances: &[StackInstance],
    split: &BaseStackSplit,
    feature_names: Vec<String>,
    base_models: Vec<String>,
    config: &GbdtConfig,
) -> Result<StackedFit, StackError> {
    config.validate()?;
    check_protocol(instances, split)?;
    let n_features = feature_names.len();
    for inst in instances {
        if inst.x.len() != n_features {
            return Err(StackError::Shape {
                expected: n_features,
                got: inst.x.len(),
            });
        }
    }
    let k = split.protocol.stack_folds;
    let folds = make_folds(&split.stack_ids, k, split.protocol.seed)?;
    let fold_of: HashMap<&str, usize> = folds
        .iter()
        .enumerate()
        .flat_map(|(f, ids)| ids.iter().map(move |id| (id.as_str(), f)))
        .collect();
    let inst_fold: Vec<usize> = instances.iter().map(|i| fold_of[i.id.as_str()]).collect();

    // Fold fits are independent; results are collected in fold order.
    let fits = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..k)
            .map(|f| {
                let inst_fold = &inst_fold;
                scope.spawn(move || {
                    let (x, t): (Vec<Vec<f64>>, Vec<Triple>) = instances
                        .iter()
                        .zip(inst_fold)
                        .filter(|(_, &g)| g != f)
                        .map(|(i, _)| (i.x.clone(), i.t))
                        .unzip();
                    fit_gbdt(&x, &t, config)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("fold fit panicked"))
            .collect::<Vec<_>>()
    });
    let mut fold_models = Vec::with_capacity(k);
    let mut loss_trajectories = Vec::with_capacity(k);
    for fit in fits {
        let fit = fit?;
        fold_models.push(fit.model);
        loss_trajectories.push(fit.loss_trajectories);
    }

    let mut oof = Vec::with_capacity(instances.len());
    for (inst, &f) in instances.iter().zip(&inst_fold) {
        oof.push(OofPrediction {
            id: inst.id.clone(),
            fold: f,
            p: fold_models[f].predict(&inst.x)?,
        });
    }

    let mut fold_macro_auc = Vec::with_capacity(k);
    for f in 0..k {
        let (p, t): (Vec<Triple>, Vec<Triple>) = oof
            .iter()
            .zip(instances)
            .filter(|(o, _)| o.fold == f)
            .map(|(o, i)| (o.p, i.t))
            .unzip();
        match macro_roc_auc(&p, &t) {
            Ok(a) => fold_macro_auc.push(Some(a)),
            Err(MetricError::SingleClass { label, .. }) => {
                tracing::warn!(
                    fold = f,
                    label,
                    "fold ROC AUC undefined: single-class label"
                );
                fold_macro_auc.push(None);
            }
            Err(e) => return Err(e.into()),
        }
    }
    let defined: Vec<f64> = fold_macro_auc.iter().flatten().copied().collect();
    let mean_fold_macro_auc = if defined.is_empty() {
        f64::NAN
    } else {
        defined.iter().sum::<f64>() / defined.len() as f64
    };
    let all_p: Vec<Triple> = oof.iter().map(|o| o.p).collect();
    let all_t: Vec<Triple> = instances.iter().map(|i| i.t).collect();
    let oof_macro_auc = macro_roc_auc(&all_p, &all_t)?;

    Ok(StackedFit {
        model: StackedModel {
            schema_version: MODEL_SCHEMA_VERSION,
            feature_names,
            base_models,
            split: split.clone(),
            folds,
            config: *config,
            fold_models,
        },
        oof,
        cv: CvScores {
            fold_macro_auc,
            mean_fold_macro_auc,
            oof_macro_auc,
        },
        loss_trajectories,
    })
}
