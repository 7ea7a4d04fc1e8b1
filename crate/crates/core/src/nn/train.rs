use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::kernel::{self, Cache};
use super::{FeatureBundle, ModelArch, ModelParams};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Weight positives by `n_neg / n_pos`.
    pub class_weighting: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 10, batch_size: 256, learning_rate: 1e-3, class_weighting: true }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate {} must be positive", self.learning_rate)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub n_samples: usize,
    pub n_positive: usize,
    pub positive_weight: f64,
    /// Mean weighted loss of each epoch, measured during the pass.
    pub loss_history: Vec<f64>,
}

impl TrainingSummary {
    pub fn final_loss(&self) -> f64 {
        self.loss_history.last().copied().unwrap_or(f64::NAN)
    }
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    fn new(n: usize, lr: f64) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0, lr }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t);
        let c2 = 1.0 - BETA2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * g;
            self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * g * g;
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + ADAM_EPS);
        }
    }
}

/// Weighted binary cross-entropy of one sample, computed from the logit.
pub fn sample_loss(params: &ModelParams, bundle: &FeatureBundle, label: bool) -> f64 {
    bce(kernel::forward(params, bundle, None), label)
}

fn bce(logit: f64, label: bool) -> f64 {
    kernel::softplus(logit) - if label { logit } else { 0.0 }
}

/// Trains a freshly initialised model on `(bundle, label)` pairs with
/// mini-batch Adam. Deterministic given `seed`.
pub fn train(arch: &ModelArch, data: &[(FeatureBundle, bool)], cfg: &TrainConfig, seed: u64) -> Result<(ModelParams, TrainingSummary)> {
    let params = ModelParams::init(arch.clone(), seed::derive_seed(seed, "init"));
    train_from(params, data, cfg, seed)
}

/// Continues training from `params`.
pub fn train_from(
    mut params: ModelParams,
    data: &[(FeatureBundle, bool)],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(ModelParams, TrainingSummary)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for (b, _) in data {
        params.arch().validate(b)?;
    }
    let n_pos = data.iter().filter(|(_, y)| *y).count();
    let n_neg = data.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass(n_pos > 0));
    }
    let pos_w = if cfg.class_weighting { n_neg as f64 / n_pos as f64 } else { 1.0 };

    let mut rng = seed::rng(seed::derive_seed(seed, "shuffle"));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut adam = Adam::new(params.len(), cfg.learning_rate);
    let mut grad = vec![0.0; params.len()];
    let mut cache = Cache::default();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut epoch_loss, mut epoch_weight) = (0.0, 0.0);
        for (bi, batch) in order.chunks(cfg.batch_size).enumerate() {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut batch_loss = 0.0;
            let mut batch_weight = 0.0;
            for &i in batch {
                let (bundle, label) = &data[i];
                let w = if *label { pos_w } else { 1.0 };
                let logit = kernel::forward(&params, bundle, Some(&mut cache));
                batch_loss += w * bce(logit, *label);
                batch_weight += w;
                let y = if *label { 1.0 } else { 0.0 };
                kernel::backward(&params, bundle, &cache, w * (kernel::sigmoid(logit) - y), &mut grad);
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: bi, loss: batch_loss });
            }
            let scale = 1.0 / batch_weight;
            grad.iter_mut().for_each(|g| *g *= scale);
            adam.step(&mut params.data, &grad);
            epoch_loss += batch_loss;
            epoch_weight += batch_weight;
        }
        let mean = epoch_loss / epoch_weight;
        log::debug!("epoch {epoch}: loss {mean:.5}");
        history.push(mean);
    }
    let summary = TrainingSummary {
        seed,
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        learning_rate: cfg.learning_rate,
        n_samples: data.len(),
        n_positive: n_pos,
        positive_weight: pos_w,
        loss_history: history,
    };
    Ok((params, summary))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Parameter with the largest error.
    pub worst: String,
    pub checked: usize,
}

/// Denominator floor for relative errors, so parameters whose true gradient
/// is (near) zero compare on absolute error instead.
pub const GRAD_CHECK_FLOOR: f64 = 1e-6;

/// Compares the analytic gradient of the unweighted loss with central finite
/// differences of step `epsilon` over every parameter.
pub fn grad_check(params: &ModelParams, sample: &(FeatureBundle, bool), epsilon: f64) -> f64 {
    grad_check_with(params, sample, epsilon, |_| {}).max_relative_error
}

/// As [`grad_check`], letting `tamper` alter the analytic gradient first.
pub fn grad_check_with(
    params: &ModelParams,
    sample: &(FeatureBundle, bool),
    epsilon: f64,
    tamper: impl FnOnce(&mut [f64]),
) -> GradCheckReport {
    let (bundle, label) = sample;
    let mut cache = Cache::default();
    let logit = kernel::forward(params, bundle, Some(&mut cache));
    let mut analytic = vec![0.0; params.len()];
    let y = if *label { 1.0 } else { 0.0 };
    kernel::backward(params, bundle, &cache, kernel::sigmoid(logit) - y, &mut analytic);
    tamper(&mut analytic);

    let mut probe = params.clone();
    let mut worst = (0.0, 0);
    for (i, &a) in analytic.iter().enumerate() {
        let orig = probe.data[i];
        probe.data[i] = orig + epsilon;
        let up = sample_loss(&probe, bundle, *label);
        probe.data[i] = orig - epsilon;
        let down = sample_loss(&probe, bundle, *label);
        probe.data[i] = orig;
        let numeric = (up - down) / (2.0 * epsilon);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
        if rel > worst.0 {
            worst = (rel, i);
        }
    }
    GradCheckReport { max_relative_error: worst.0, worst: params.offset_name(worst.1).to_string(), checked: params.len() }
}
