//! One-hidden-layer MLP regressor mapping a feature vector to a score.
//!
//! Forward pass: `ŷ = w2 · relu(W1 · x̂ + b1) + b2`, where `x̂` is the input
//! standardized with training-set statistics. Trained on mean squared error
//! with Adam, inverted dropout on the hidden activation and a seeded
//! ChaCha generator driving initialization, shuffling and dropout masks.

mod gradcheck;
mod snapshot;

pub use gradcheck::{grad_check, GradCheckProbe, GradCheckReport};
pub use snapshot::{load_snapshot, save_snapshot, SNAPSHOT_FORMAT};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::spearman;
use crate::reptensor::FeatureVector;

/// Smallest per-dimension std used when standardizing.
pub const STD_FLOOR: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no training examples")]
    Empty,
    #[error("need at least 2 examples, got {0}")]
    TooFew(usize),
    #[error("{features} feature vectors but {labels} labels")]
    LabelCount { features: usize, labels: usize },
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("loss became NaN or infinite in epoch {epoch}")]
    NanLoss { epoch: usize },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluatorConfig {
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub dropout: f64,
    pub epochs: usize,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

impl Default for EvaluatorConfig {
    fn default() -> Self {
        EvaluatorConfig {
            hidden_dim: 1024,
            learning_rate: 1e-3,
            batch_size: 32,
            dropout: 0.2,
            epochs: 20,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl EvaluatorConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: &str| Err(EvalError::Config(m.to_string()));
        if self.hidden_dim == 0 {
            return bad("hidden_dim must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("adam betas must be in [0, 1)");
        }
        if !(self.adam_eps > 0.0) {
            return bad("adam_eps must be positive");
        }
        Ok(())
    }
}

/// Per-dimension standardization statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// Population mean and std per dimension, std floored at [`STD_FLOOR`].
pub fn fit_standardizer(features: &[FeatureVector]) -> Result<Standardizer, EvalError> {
    let first = features.first().ok_or(EvalError::Empty)?;
    let dim = first.dim();
    for f in features {
        if f.dim() != dim {
            return Err(EvalError::DimMismatch {
                expected: dim,
                got: f.dim(),
            });
        }
    }
    let n = features.len() as f64;
    let mut mean = vec![0.0; dim];
    for f in features {
        for (m, v) in mean.iter_mut().zip(f.values()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for f in features {
        for ((s, v), m) in var.iter_mut().zip(f.values()).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var.into_iter().map(|s| (s / n).sqrt().max(STD_FLOOR)).collect();
    Ok(Standardizer { mean, std })
}

/// Flat parameter vector: `W1` (hidden × input, row-major), `b1`, `w2`, `b2`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Params {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub data: Vec<f64>,
}

impl Params {
    pub fn len_for(input_dim: usize, hidden_dim: usize) -> usize {
        hidden_dim * input_dim + 2 * hidden_dim + 1
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Params {
            input_dim,
            hidden_dim,
            data: vec![0.0; Self::len_for(input_dim, hidden_dim)],
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot(input_dim: usize, hidden_dim: usize, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(input_dim, hidden_dim);
        let lim1 = (6.0 / (input_dim + hidden_dim) as f64).sqrt();
        let lim2 = (6.0 / (hidden_dim + 1) as f64).sqrt();
        let (w1, rest) = p.data.split_at_mut(hidden_dim * input_dim);
        for w in w1 {
            *w = rng.random_range(-lim1..lim1);
        }
        for w in &mut rest[hidden_dim..2 * hidden_dim] {
            *w = rng.random_range(-lim2..lim2);
        }
        p
    }

    fn w1_len(&self) -> usize {
        self.hidden_dim * self.input_dim
    }

    pub fn w1(&self) -> &[f64] {
        &self.data[..self.w1_len()]
    }

    pub fn b1(&self) -> &[f64] {
        let o = self.w1_len();
        &self.data[o..o + self.hidden_dim]
    }

    pub fn w2(&self) -> &[f64] {
        let o = self.w1_len() + self.hidden_dim;
        &self.data[o..o + self.hidden_dim]
    }

    pub fn b2(&self) -> f64 {
        self.data[self.data.len() - 1]
    }

    pub fn b2_mut(&mut self) -> &mut f64 {
        let last = self.data.len() - 1;
        &mut self.data[last]
    }

    /// Hidden pre-activations for one standardized input.
    fn preactivations(&self, x: &[f64], out: &mut [f64]) {
        let w1 = self.w1();
        for (j, (o, b)) in out.iter_mut().zip(self.b1()).enumerate() {
            let row = &w1[j * self.input_dim..(j + 1) * self.input_dim];
            *o = b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }

    /// Inference forward pass (no dropout).
    pub fn forward(&self, x: &[f64], scratch: &mut Vec<f64>) -> f64 {
        scratch.resize(self.hidden_dim, 0.0);
        self.preactivations(x, scratch);
        self.b2()
            + scratch
                .iter()
                .zip(self.w2())
                .map(|(a, w)| a.max(0.0) * w)
                .sum::<f64>()
    }
}

/// Mean squared error of a batch and its gradient with respect to every
/// parameter. With `dropout > 0` a fresh inverted-dropout mask is drawn per
/// example from `rng`.
pub(crate) fn loss_and_grad(
    params: &Params,
    xs: &[&[f64]],
    ys: &[f64],
    dropout: f64,
    rng: &mut impl Rng,
    grad: &mut [f64],
) -> f64 {
    debug_assert_eq!(grad.len(), params.data.len());
    grad.iter_mut().for_each(|g| *g = 0.0);
    let (hidden, input) = (params.hidden_dim, params.input_dim);
    let w1_len = hidden * input;
    let keep_scale = 1.0 / (1.0 - dropout);
    let batch = xs.len() as f64;
    let mut pre = vec![0.0; hidden];
    let mut act = vec![0.0; hidden];
    let mut loss = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        params.preactivations(x, &mut pre);
        for (a, &p) in act.iter_mut().zip(&pre) {
            *a = p.max(0.0);
            if dropout > 0.0 {
                *a = if rng.random::<f64>() < dropout {
                    0.0
                } else {
                    *a * keep_scale
                };
            }
        }
        let out = params.b2() + act.iter().zip(params.w2()).map(|(a, w)| a * w).sum::<f64>();
        let err = out - y;
        loss += err * err;
        let d_out = 2.0 * err / batch;

        let (g_w1, g_rest) = grad.split_at_mut(w1_len);
        let (g_b1, g_rest) = g_rest.split_at_mut(hidden);
        let (g_w2, g_b2) = g_rest.split_at_mut(hidden);
        g_b2[0] += d_out;
        for j in 0..hidden {
            if act[j] == 0.0 {
                continue;
            }
            g_w2[j] += d_out * act[j];
            // act = relu(pre) * scale, so d act / d pre = scale on kept, active units
            let scale = if dropout > 0.0 { keep_scale } else { 1.0 };
            let d_pre = d_out * params.w2()[j] * scale;
            g_b1[j] += d_pre;
            let row = &mut g_w1[j * input..(j + 1) * input];
            for (g, v) in row.iter_mut().zip(x.iter()) {
                *g += d_pre * v;
            }
        }
    }
    loss / batch
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    fn new(len: usize, config: &EvaluatorConfig) -> Self {
        Adam {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
            lr: config.learning_rate,
            beta1: config.adam_beta1,
            beta2: config.adam_beta2,
            eps: config.adam_eps,
        }
    }

    fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_mse: f64,
    /// `None` when predictions or labels are constant.
    pub train_spearman: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Training-set MSE of the initialized network, before any update.
    pub initial_mse: f64,
    pub epochs: Vec<EpochMetrics>,
    /// 1-based epoch whose parameters were kept.
    pub selected_epoch: usize,
}

impl TrainHistory {
    pub fn selected(&self) -> &EpochMetrics {
        &self.epochs[self.selected_epoch - 1]
    }
}

/// Highest train Spearman (earliest on ties); lowest MSE when Spearman is
/// undefined in every epoch.
fn select_epoch(epochs: &[EpochMetrics]) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for e in epochs {
        if let Some(rho) = e.train_spearman {
            if best.is_none_or(|(_, b)| rho > b) {
                best = Some((e.epoch, rho));
            }
        }
    }
    if let Some((epoch, _)) = best {
        return epoch;
    }
    let mut best = &epochs[0];
    for e in epochs {
        if e.train_mse < best.train_mse {
            best = e;
        }
    }
    best.epoch
}

/// Trained scoring function.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluator {
    pub(crate) params: Params,
    pub(crate) standardizer: Standardizer,
    pub config: EvaluatorConfig,
    pub selected_epoch: usize,
}

impl Evaluator {
    pub fn input_dim(&self) -> usize {
        self.params.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.params.hidden_dim
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    pub fn parameters(&self) -> &[f64] {
        &self.params.data
    }

    /// A network whose output is the constant `bias` for every input.
    pub fn constant(input_dim: usize, hidden_dim: usize, bias: f64) -> Self {
        let mut params = Params::zeros(input_dim, hidden_dim);
        *params.b2_mut() = bias;
        Evaluator {
            params,
            standardizer: Standardizer {
                mean: vec![0.0; input_dim],
                std: vec![1.0; input_dim],
            },
            config: EvaluatorConfig {
                hidden_dim,
                ..EvaluatorConfig::default()
            },
            selected_epoch: 1,
        }
    }

    /// Raw score for one feature vector; dropout is never applied.
    pub fn predict(&self, feature: &[f64]) -> Result<f64, EvalError> {
        if feature.len() != self.input_dim() {
            return Err(EvalError::DimMismatch {
                expected: self.input_dim(),
                got: feature.len(),
            });
        }
        let x = self.standardizer.apply(feature);
        let mut scratch = Vec::with_capacity(self.hidden_dim());
        Ok(self.params.forward(&x, &mut scratch))
    }

    pub fn predict_many(&self, features: &[FeatureVector]) -> Result<Vec<f64>, EvalError> {
        features.iter().map(|f| self.predict(f.values())).collect()
    }
}

/// Clamp a raw score to the review scale `[1, 10]`.
pub fn clamp_score(score: f64) -> f64 {
    score.clamp(1.0, 10.0)
}

fn eval_mse_and_rank(params: &Params, xs: &[Vec<f64>], ys: &[f64]) -> (f64, Option<f64>) {
    let mut scratch = Vec::with_capacity(params.hidden_dim);
    let preds: Vec<f64> = xs.iter().map(|x| params.forward(x, &mut scratch)).collect();
    let mse = preds
        .iter()
        .zip(ys)
        .map(|(p, y)| (p - y) * (p - y))
        .sum::<f64>()
        / ys.len() as f64;
    let rho = spearman(&preds, ys).ok().map(|r| r.rho);
    (mse, rho)
}

pub fn train(
    features: &[FeatureVector],
    labels: &[f64],
    config: &EvaluatorConfig,
) -> Result<(Evaluator, TrainHistory), EvalError> {
    config.validate()?;
    if features.is_empty() {
        return Err(EvalError::Empty);
    }
    if features.len() != labels.len() {
        return Err(EvalError::LabelCount {
            features: features.len(),
            labels: labels.len(),
        });
    }
    if features.len() < 2 {
        return Err(EvalError::TooFew(features.len()));
    }
    if labels.iter().any(|y| !y.is_finite()) {
        return Err(EvalError::NonFinite("labels"));
    }
    if features.iter().any(|f| !f.is_finite()) {
        return Err(EvalError::NonFinite("features"));
    }
    let standardizer = fit_standardizer(features)?;
    let input_dim = standardizer.dim();
    let xs: Vec<Vec<f64>> = features.iter().map(|f| standardizer.apply(f.values())).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = Params::glorot(input_dim, config.hidden_dim, &mut rng);
    *params.b2_mut() = crate::stats::mean(labels);
    let mut adam = Adam::new(params.data.len(), config);
    let mut grad = vec![0.0; params.data.len()];
    let mut order: Vec<usize> = (0..xs.len()).collect();

    let (initial_mse, _) = eval_mse_and_rank(&params, &xs, labels);
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut snapshots = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let bx: Vec<&[f64]> = batch.iter().map(|&i| xs[i].as_slice()).collect();
            let by: Vec<f64> = batch.iter().map(|&i| labels[i]).collect();
            let loss = loss_and_grad(&params, &bx, &by, config.dropout, &mut rng, &mut grad);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(EvalError::NanLoss { epoch });
            }
            adam.update(&mut params.data, &grad);
        }
        let (train_mse, train_spearman) = eval_mse_and_rank(&params, &xs, labels);
        if !train_mse.is_finite() {
            return Err(EvalError::NanLoss { epoch });
        }
        epochs.push(EpochMetrics {
            epoch,
            train_mse,
            train_spearman,
        });
        snapshots.push(params.data.clone());
    }

    let selected_epoch = select_epoch(&epochs);
    params.data = std::mem::take(&mut snapshots[selected_epoch - 1]);
    let evaluator = Evaluator {
        params,
        standardizer,
        config: config.clone(),
        selected_epoch,
    };
    let history = TrainHistory {
        initial_mse,
        epochs,
        selected_epoch,
    };
    Ok((evaluator, history))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(v: &[f64]) -> FeatureVector {
        FeatureVector(v.to_vec())
    }

    fn small_config(seed: u64) -> EvaluatorConfig {
        EvaluatorConfig {
            hidden_dim: 32,
            epochs: 10,
            batch_size: 4,
            seed,
            ..EvaluatorConfig::default()
        }
    }

    fn toy_data(n: usize) -> (Vec<FeatureVector>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let xs: Vec<FeatureVector> = (0..n)
            .map(|_| FeatureVector((0..5).map(|_| rng.random_range(-2.0..2.0)).collect()))
            .collect();
        let ys = xs.iter().map(|x| 5.0 + x.0[0] - 0.5 * x.0[3]).collect();
        (xs, ys)
    }

    #[test]
    fn defaults_match_protocol() {
        let c = EvaluatorConfig::default();
        assert_eq!(c.hidden_dim, 1024);
        assert_eq!(c.batch_size, 32);
        assert_eq!(c.epochs, 20);
        assert_eq!(c.learning_rate, 0.001);
        assert_eq!(c.dropout, 0.2);
        assert_eq!((c.adam_beta1, c.adam_beta2, c.adam_eps), (0.9, 0.999, 1e-8));
    }

    #[test]
    fn standardizer_floor() {
        let s = fit_standardizer(&[fv(&[0.0, 2.0]), fv(&[2.0, 2.0])]).unwrap();
        assert_eq!(s.mean, vec![1.0, 2.0]);
        assert_eq!(s.std, vec![1.0, STD_FLOOR]);
        let s = fit_standardizer(&[fv(&[3.0, -1.0, 0.5])]).unwrap();
        assert_eq!(s.std, vec![STD_FLOOR; 3]);
    }

    #[test]
    fn standardizer_dim_mismatch() {
        let err = fit_standardizer(&[fv(&[0.0; 4]), fv(&[0.0; 8])]).unwrap_err();
        assert!(matches!(err, EvalError::DimMismatch { expected: 4, got: 8 }));
        assert!(matches!(fit_standardizer(&[]), Err(EvalError::Empty)));
    }

    #[test]
    fn training_is_deterministic() {
        let (xs, ys) = toy_data(40);
        let (a, ha) = train(&xs, &ys, &small_config(3)).unwrap();
        let (b, hb) = train(&xs, &ys, &small_config(3)).unwrap();
        assert_eq!(ha, hb);
        let bits = |e: &Evaluator| e.parameters().iter().map(|p| p.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        let (c, _) = train(&xs, &ys, &small_config(4)).unwrap();
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn history_shape_and_selection() {
        let (xs, ys) = toy_data(40);
        let (ev, h) = train(&xs, &ys, &small_config(1)).unwrap();
        assert_eq!(h.epochs.len(), 10);
        assert!((1..=10).contains(&h.selected_epoch));
        assert_eq!(ev.selected_epoch, h.selected_epoch);
        let best = h
            .epochs
            .iter()
            .filter_map(|e| e.train_spearman)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(h.selected().train_spearman, Some(best));
        // the kept snapshot reproduces the recorded training MSE
        let preds = ev.predict_many(&xs).unwrap();
        let mse: f64 = preds.iter().zip(&ys).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / 40.0;
        assert!((mse - h.selected().train_mse).abs() < 1e-9);
    }

    #[test]
    fn constant_labels_fall_back_to_mse() {
        let (xs, _) = toy_data(12);
        let ys = vec![4.0; 12];
        let config = EvaluatorConfig {
            hidden_dim: 16,
            epochs: 600,
            learning_rate: 0.01,
            dropout: 0.0,
            batch_size: 4,
            ..EvaluatorConfig::default()
        };
        let (_, h) = train(&xs, &ys, &config).unwrap();
        assert!(h.epochs.iter().all(|e| e.train_spearman.is_none()));
        let min = h.epochs.iter().map(|e| e.train_mse).fold(f64::INFINITY, f64::min);
        assert_eq!(h.selected().train_mse, min);
        assert!(min < h.initial_mse);
        assert!(min < 1e-3, "mse {min}");
    }

    #[test]
    fn epoch_selection_ties_go_to_earliest() {
        let e = |epoch, mse, rho| EpochMetrics {
            epoch,
            train_mse: mse,
            train_spearman: rho,
        };
        assert_eq!(select_epoch(&[e(1, 3.0, Some(0.5)), e(2, 1.0, Some(0.7)), e(3, 0.5, Some(0.7))]), 2);
        assert_eq!(select_epoch(&[e(1, 3.0, None), e(2, 1.0, None), e(3, 1.0, None)]), 2);
        assert_eq!(select_epoch(&[e(1, 3.0, None), e(2, 1.0, Some(-0.2))]), 2);
    }

    #[test]
    fn input_errors() {
        let (xs, ys) = toy_data(4);
        let c = small_config(0);
        assert!(matches!(train(&[], &[], &c), Err(EvalError::Empty)));
        assert!(matches!(train(&xs[..1], &ys[..1], &c), Err(EvalError::TooFew(1))));
        assert!(matches!(train(&xs, &ys[..3], &c), Err(EvalError::LabelCount { .. })));
        let mut bad = ys.clone();
        bad[0] = f64::NAN;
        assert!(matches!(train(&xs, &bad, &c), Err(EvalError::NonFinite("labels"))));
        let bad_cfg = EvaluatorConfig { dropout: 1.0, ..c };
        assert!(matches!(train(&xs, &ys, &bad_cfg), Err(EvalError::Config(_))));
    }

    #[test]
    fn divergence_reports_the_epoch() {
        let (xs, _) = toy_data(8);
        // Mean-label output bias leaves residuals of ±1e300.
        let ys: Vec<f64> = (0..8).map(|i| if i % 2 == 0 { 1e300 } else { -1e300 }).collect();
        let config = EvaluatorConfig {
            hidden_dim: 4,
            epochs: 3,
            ..EvaluatorConfig::default()
        };
        assert!(matches!(train(&xs, &ys, &config), Err(EvalError::NanLoss { epoch: 1 })));
    }

    #[test]
    fn constant_network() {
        let ev = Evaluator::constant(3, 8, 5.41);
        assert_eq!(ev.predict(&[1.0, -7.0, 100.0]).unwrap(), 5.41);
        assert_eq!(ev.predict(&[0.0; 3]).unwrap(), 5.41);
        assert!(matches!(ev.predict(&[0.0; 2]), Err(EvalError::DimMismatch { .. })));
    }

    #[test]
    fn prediction_is_pure() {
        let (xs, ys) = toy_data(20);
        let (ev, _) = train(&xs, &ys, &small_config(0)).unwrap();
        let a = ev.predict(xs[3].values()).unwrap();
        let b = ev.predict(xs[3].values()).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn clamp() {
        assert_eq!(clamp_score(11.0), 10.0);
        assert_eq!(clamp_score(-2.0), 1.0);
        assert_eq!(clamp_score(6.5), 6.5);
    }
}
