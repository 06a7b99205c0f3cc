//! Multi-label logistic head trained with binary cross-entropy on logits.
//!
//! For an input `h` of length `input_dim` the head produces logits
//! `s_i = Σ_j h_j · w_ji + b_i` for the three labels, probabilities
//! `y_i = σ(s_i)`, and the loss
//! `E = -Σ_i [t_i ln y_i + (1 - t_i) ln(1 - y_i)]`. With the bias disabled
//! the head reduces to a bias-free weighted sum.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

mod interchange;

pub use interchange::{
    format_g17, read_probability_file, read_probability_rows, write_probability_file,
    BaseProbabilities, InterchangeError, PROBABILITY_HEADER,
};

/// Number of output labels (P, I, O).
pub const N_LABELS: usize = 3;

pub type Triple = [f64; N_LABELS];

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LearnerError {
    #[error("shape mismatch: expected input of length {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("training loss became non-finite in epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("empty training set")]
    EmptyDataset,
    #[error("invalid training config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHead {
    pub input_dim: usize,
    /// Row-major `input_dim × 3`: `weights[j * 3 + i]` is `w_ji`.
    pub weights: Vec<f64>,
    pub bias: Triple,
    pub use_bias: bool,
}

impl LinearHead {
    pub fn zeros(input_dim: usize, use_bias: bool) -> Self {
        LinearHead {
            input_dim,
            weights: vec![0.0; input_dim * N_LABELS],
            bias: [0.0; N_LABELS],
            use_bias,
        }
    }

    pub fn w(&self, j: usize, i: usize) -> f64 {
        self.weights[j * N_LABELS + i]
    }

    fn check(&self, h: &[f64]) -> Result<(), LearnerError> {
        if h.len() != self.input_dim {
            return Err(LearnerError::Shape {
                expected: self.input_dim,
                got: h.len(),
            });
        }
        Ok(())
    }
}

pub fn forward_logits(h: &[f64], head: &LinearHead) -> Result<Triple, LearnerError> {
    head.check(h)?;
    let mut s = if head.use_bias {
        head.bias
    } else {
        [0.0; N_LABELS]
    };
    for (j, &hj) in h.iter().enumerate() {
        let row = &head.weights[j * N_LABELS..(j + 1) * N_LABELS];
        for (si, wji) in s.iter_mut().zip(row) {
            *si += hj * wji;
        }
    }
    Ok(s)
}

/// Logistic function, split by sign so `exp` never overflows.
pub fn sigmoid_scalar(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid(s: Triple) -> Triple {
    s.map(sigmoid_scalar)
}

/// Fused form `Σ_i max(s_i, 0) − s_i·t_i + ln(1 + e^{−|s_i|})`.
pub fn bce_with_logits(s: &Triple, t: &Triple) -> f64 {
    s.iter()
        .zip(t)
        .map(|(&si, &ti)| si.max(0.0) - si * ti + (-si.abs()).exp().ln_1p())
        .sum()
}

/// `(dW, dbias)` with `dW_ji = (y_i − t_i) · h_j` and `dbias_i = y_i − t_i`.
/// `dW` uses the same row-major layout as [`LinearHead::weights`].
pub fn gradient(s: &Triple, t: &Triple, h: &[f64]) -> (Vec<f64>, Triple) {
    let y = sigmoid(*s);
    let mut dbias = [0.0; N_LABELS];
    for i in 0..N_LABELS {
        dbias[i] = y[i] - t[i];
    }
    let mut dw = Vec::with_capacity(h.len() * N_LABELS);
    for &hj in h {
        dw.extend(dbias.iter().map(|d| d * hj));
    }
    (dw, dbias)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub l2: f64,
    pub use_bias: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            epochs: 50,
            batch_size: 64,
            seed: 0,
            l2: 1e-4,
            use_bias: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LearnerError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(LearnerError::Config(
                "learning_rate must be positive".into(),
            ));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(LearnerError::Config(
                "epochs and batch_size must be positive".into(),
            ));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(LearnerError::Config("l2 must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub h: Vec<f64>,
    pub t: Triple,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub head: LinearHead,
    /// Mean per-example loss before training, then after each epoch.
    pub loss_trajectory: Vec<f64>,
}

pub fn mean_loss(head: &LinearHead, data: &[Example]) -> Result<f64, LearnerError> {
    let mut total = 0.0;
    for ex in data {
        total += bce_with_logits(&forward_logits(&ex.h, head)?, &ex.t);
    }
    Ok(total / data.len() as f64)
}

/// Mini-batch gradient descent from a zero head. Batch order is a
/// seed-determined shuffle per epoch.
pub fn train(data: &[Example], config: &TrainConfig) -> Result<TrainOutcome, LearnerError> {
    config.validate()?;
    let first = data.first().ok_or(LearnerError::EmptyDataset)?;
    let dim = first.h.len();
    if let Some(bad) = data.iter().find(|e| e.h.len() != dim) {
        return Err(LearnerError::Shape {
            expected: dim,
            got: bad.h.len(),
        });
    }

    let mut head = LinearHead::zeros(dim, config.use_bias);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut trajectory = vec![mean_loss(&head, data)?];

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let mut gw = vec![0.0; dim * N_LABELS];
            let mut gb = [0.0; N_LABELS];
            for &idx in batch {
                let ex = &data[idx];
                let s = forward_logits(&ex.h, &head)?;
                let (dw, db) = gradient(&s, &ex.t, &ex.h);
                for (acc, d) in gw.iter_mut().zip(&dw) {
                    *acc += d;
                }
                for (acc, d) in gb.iter_mut().zip(&db) {
                    *acc += d;
                }
            }
            let scale = config.learning_rate / batch.len() as f64;
            for (w, g) in head.weights.iter_mut().zip(&gw) {
                *w -= scale * g + config.learning_rate * config.l2 * *w;
            }
            if head.use_bias {
                for (b, g) in head.bias.iter_mut().zip(&gb) {
                    *b -= scale * g;
                }
            }
        }
        let loss = mean_loss(&head, data)?;
        if !loss.is_finite() || head.weights.iter().any(|w| !w.is_finite()) {
            return Err(LearnerError::Divergence { epoch });
        }
        trajectory.push(loss);
    }
    Ok(TrainOutcome {
        head,
        loss_trajectory: trajectory,
    })
}

pub fn predict(head: &LinearHead, h: &[f64]) -> Result<Triple, LearnerError> {
    Ok(sigmoid(forward_logits(h, head)?))
}

pub fn predict_batch(head: &LinearHead, batch: &[Vec<f64>]) -> Result<Vec<Triple>, LearnerError> {
    batch.iter().map(|h| predict(head, h)).collect()
}
