use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, BinnedMatrix, GrowParams, RegressionTree};
use super::StackError;
use crate::base_learner::{sigmoid_scalar, Triple, N_LABELS};
use crate::LABEL_NAMES;

/// Halvings tried before a tree that raises the training loss is dropped.
const MAX_STEP_HALVINGS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtConfig {
    pub num_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub max_bins: usize,
    pub lambda: f64,
    pub min_gain: f64,
    pub max_leaves: usize,
    pub min_child_hessian: f64,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        GbdtConfig {
            num_rounds: 100,
            learning_rate: 0.1,
            max_depth: 4,
            max_bins: 255,
            lambda: 1.0,
            min_gain: 1e-7,
            max_leaves: 15,
            min_child_hessian: 1e-3,
        }
    }
}

impl GbdtConfig {
    pub fn validate(&self) -> Result<(), StackError> {
        let bad = |m: &str| Err(StackError::Config(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.max_depth == 0 {
            return bad("max_depth must be at least 1");
        }
        if !(2..=usize::from(u16::MAX)).contains(&self.max_bins) {
            return bad("max_bins must be in [2, 65535]");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be non-negative");
        }
        if self.min_gain.is_nan() || self.min_gain < 0.0 {
            return bad("min_gain must be non-negative");
        }
        if self.max_leaves < 2 {
            return bad("max_leaves must be at least 2");
        }
        if self.min_child_hessian.is_nan() || self.min_child_hessian < 0.0 {
            return bad("min_child_hessian must be non-negative");
        }
        Ok(())
    }

    fn grow_params(&self) -> GrowParams {
        GrowParams {
            max_depth: self.max_depth,
            max_leaves: self.max_leaves,
            lambda: self.lambda,
            min_gain: self.min_gain,
            min_child_hessian: self.min_child_hessian,
        }
    }
}

/// Boosted trees for one label. Leaf values are stored unshrunk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelBooster {
    pub base_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<RegressionTree>,
}

impl LabelBooster {
    pub fn raw_score(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        self.base_score + self.learning_rate * sum
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid_scalar(self.raw_score(x))
    }
}

#[derive(Debug, Clone)]
pub struct BoostOutcome {
    pub booster: LabelBooster,
    /// Mean training logloss before the first tree and after every round.
    pub loss_trajectory: Vec<f64>,
}

fn logloss(raw: f64, t: f64) -> f64 {
    raw.max(0.0) - raw * t + (-raw.abs()).exp().ln_1p()
}

fn mean_logloss(raw: &[f64], t: &[f64]) -> f64 {
    raw.iter().zip(t).map(|(&r, &t)| logloss(r, t)).sum::<f64>() / raw.len() as f64
}

pub(crate) fn check_matrix(x: &[Vec<f64>], n_features: usize) -> Result<(), StackError> {
    for (row, v) in x.iter().enumerate() {
        if v.len() != n_features {
            return Err(StackError::Shape {
                expected: n_features,
                got: v.len(),
            });
        }
        if let Some(col) = v.iter().position(|f| !f.is_finite()) {
            return Err(StackError::NonFinite { row, col });
        }
    }
    Ok(())
}

fn fit_binned(
    data: &BinnedMatrix,
    targets: &[bool],
    label: &'static str,
    config: &GbdtConfig,
) -> Result<BoostOutcome, StackError> {
    let n = targets.len();
    let pos = targets.iter().filter(|&&t| t).count();
    if pos == 0 || pos == n {
        return Err(StackError::SingleClass {
            label,
            positives: pos,
            negatives: n - pos,
        });
    }
    let t: Vec<f64> = targets.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let base_score = (pos as f64 / (n - pos) as f64).ln();
    let mut raw = vec![base_score; n];
    let mut loss = mean_logloss(&raw, &t);
    let mut trajectory = vec![loss];
    let mut trees = Vec::new();
    let params = config.grow_params();
    let lr = config.learning_rate;

    for _ in 0..config.num_rounds {
        let (grad, hess): (Vec<f64>, Vec<f64>) = raw
            .iter()
            .zip(&t)
            .map(|(&r, &t)| {
                let y = sigmoid_scalar(r);
                (y - t, y * (1.0 - y))
            })
            .unzip();
        let Some(mut tree) = grow_tree(data, (0..n).collect(), &grad, &hess, &params) else {
            break;
        };
        let leaf_of = assign_rows(&tree, data, n);
        let mut accepted = None;
        for _ in 0..=MAX_STEP_HALVINGS {
            let candidate: Vec<f64> = raw
                .iter()
                .zip(&leaf_of)
                .map(|(&r, &leaf)| r + lr * tree.leaf(leaf))
                .collect();
            let new_loss = mean_logloss(&candidate, &t);
            if new_loss <= loss {
                accepted = Some((candidate, new_loss));
                break;
            }
            // Newton step overshot on this round; shrink the leaves.
            tree.scale_leaves(0.5);
        }
        let Some((candidate, new_loss)) = accepted else {
            break;
        };
        raw = candidate;
        loss = new_loss;
        trajectory.push(loss);
        trees.push(tree);
    }

    Ok(BoostOutcome {
        booster: LabelBooster {
            base_score,
            learning_rate: lr,
            trees,
        },
        loss_trajectory: trajectory,
    })
}

/// Leaf node index reached by each training row, using the bin codes so
/// training and the stored thresholds agree exactly.
fn assign_rows(tree: &RegressionTree, data: &BinnedMatrix, n: usize) -> Vec<usize> {
    (0..n)
        .map(|r| {
            tree.leaf_index_by(|f, threshold| {
                let mapper = &data.mappers[f];
                let bin = usize::from(data.columns[f][r]);
                // bin b covers (bounds[b-1], bounds[b]]
                bin < mapper.bounds.len() && mapper.bounds[bin] <= threshold
            })
        })
        .collect()
}

/// Fit one label's booster on `x` (rows of equal length).
pub fn fit_label(
    x: &[Vec<f64>],
    targets: &[bool],
    config: &GbdtConfig,
) -> Result<BoostOutcome, StackError> {
    config.validate()?;
    if x.is_empty() {
        return Err(StackError::TooFew {
            what: "training rows",
            got: 0,
            min: 2,
        });
    }
    if x.len() != targets.len() {
        return Err(StackError::Shape {
            expected: x.len(),
            got: targets.len(),
        });
    }
    let n_features = x[0].len();
    check_matrix(x, n_features)?;
    let data = BinnedMatrix::new(x, n_features, config.max_bins);
    fit_binned(&data, targets, "?", config)
}

/// Per-label boosters sharing one feature layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub n_features: usize,
    pub config: GbdtConfig,
    pub labels: Vec<LabelBooster>,
}

impl GbdtModel {
    pub fn predict(&self, x: &[f64]) -> Result<Triple, StackError> {
        if x.len() != self.n_features {
            return Err(StackError::Shape {
                expected: self.n_features,
                got: x.len(),
            });
        }
        let mut p = [0.0; N_LABELS];
        for (k, booster) in self.labels.iter().enumerate() {
            p[k] = booster.predict_proba(x);
        }
        Ok(p)
    }
}

#[derive(Debug, Clone)]
pub struct GbdtFit {
    pub model: GbdtModel,
    pub loss_trajectories: Vec<Vec<f64>>,
}

/// Fit the three per-label boosters; features are binned once.
pub fn fit_gbdt(
    x: &[Vec<f64>],
    targets: &[Triple],
    config: &GbdtConfig,
) -> Result<GbdtFit, StackError> {
    config.validate()?;
    if x.is_empty() {
        return Err(StackError::TooFew {
            what: "training rows",
            got: 0,
            min: 2,
        });
    }
    if x.len() != targets.len() {
        return Err(StackError::Shape {
            expected: x.len(),
            got: targets.len(),
        });
    }
    let n_features = x[0].len();
    check_matrix(x, n_features)?;
    let data = BinnedMatrix::new(x, n_features, config.max_bins);
    let mut labels = Vec::with_capacity(N_LABELS);
    let mut loss_trajectories = Vec::with_capacity(N_LABELS);
    for (k, name) in LABEL_NAMES.iter().enumerate() {
        let t: Vec<bool> = targets.iter().map(|t| t[k] >= 0.5).collect();
        let out = fit_binned(&data, &t, name, config)?;
        labels.push(out.booster);
        loss_trajectories.push(out.loss_trajectory);
    }
    Ok(GbdtFit {
        model: GbdtModel {
            n_features,
            config: *config,
            labels,
        },
        loss_trajectories,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable() -> (Vec<Vec<f64>>, Vec<bool>) {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 19.0]).collect();
        let t = x.iter().map(|r| r[0] > 0.5).collect();
        (x, t)
    }

    #[test]
    fn separable_fixture_classified_within_ten_rounds() {
        let (x, t) = separable();
        let cfg = GbdtConfig {
            num_rounds: 10,
            ..GbdtConfig::default()
        };
        let out = fit_label(&x, &t, &cfg).unwrap();
        for (row, &truth) in x.iter().zip(&t) {
            assert_eq!(out.booster.predict_proba(row) >= 0.5, truth);
        }
    }

    #[test]
    fn constant_features_predict_prior() {
        let x = vec![vec![1.0, 2.0]; 10];
        let t: Vec<bool> = (0..10).map(|i| i < 3).collect();
        let out = fit_label(&x, &t, &GbdtConfig::default()).unwrap();
        assert!(out.booster.trees.is_empty());
        assert!((out.booster.predict_proba(&[5.0, 5.0]) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn single_class_and_nan_rejected() {
        let x = vec![vec![0.0]; 4];
        assert!(matches!(
            fit_label(&x, &[true; 4], &GbdtConfig::default()),
            Err(StackError::SingleClass { .. })
        ));
        let x = vec![vec![0.0], vec![f64::NAN]];
        assert!(matches!(
            fit_label(&x, &[true, false], &GbdtConfig::default()),
            Err(StackError::NonFinite { row: 1, col: 0 })
        ));
    }

    #[test]
    fn loss_never_increases() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let x: Vec<Vec<f64>> = (0..300)
            .map(|_| vec![rng.gen(), rng.gen(), rng.gen()])
            .collect();
        let t: Vec<bool> = x
            .iter()
            .map(|r| r[0] + 0.3 * rng.gen::<f64>() > 0.6)
            .collect();
        let out = fit_label(&x, &t, &GbdtConfig::default()).unwrap();
        assert!(out.loss_trajectory.windows(2).all(|w| w[1] <= w[0]));
    }
}
