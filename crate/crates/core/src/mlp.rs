//! Multilayer perceptron with a Gaussian emission head.
//!
//! The network maps a flattened observation/action window to the mean and
//! standard deviation of a normal distribution over the next observation.
//! Hidden layers use the rectifier; the spread head goes through a softplus
//! plus a floor `sigma_min`, so the predicted standard deviation is always
//! strictly positive. Training minimizes the Gaussian negative log-likelihood
//! with hand-derived backpropagation and an Adam update; the mask is redrawn
//! per sample every epoch so one model serves both the full-window and the
//! masked-window prediction.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{apply_mask, MaskSpec, WindowSample};
use crate::error::{Error, Result};
use crate::io::atomic_write;
use crate::scalar::{real, Real};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
pub const DEFAULT_SIGMA_MIN: f64 = 1e-4;

/// Mean and standard deviation of a predicted normal distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPrediction<R: Real> {
    mean: R,
    std: R,
}

impl<R: Real> GaussianPrediction<R> {
    pub fn new(mean: R, std: R) -> Result<Self> {
        if !(std > R::zero()) || !std.is_finite() || !mean.is_finite() {
            return Err(Error::invalid_argument(format!(
                "prediction must have finite mean and positive std, got mean={mean}, std={std}"
            )));
        }
        Ok(Self { mean, std })
    }

    pub fn mean(&self) -> R {
        self.mean
    }

    pub fn std(&self) -> R {
        self.std
    }
}

fn softplus<R: Real>(x: R) -> R {
    // max(x, 0) + ln(1 + e^{-|x|}) avoids overflow on both tails.
    x.max(R::zero()) + x.abs().neg().exp().ln_1p()
}

fn sigmoid<R: Real>(x: R) -> R {
    R::one() / (R::one() + x.neg().exp())
}

/// Fully connected network with parameters stored flat, per layer: weights
/// row-major `(out x in)`, then biases. The final layer has exactly two
/// units: the mean and the pre-softplus spread.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel<R: Real> {
    layer_dims: Vec<usize>,
    params: Vec<R>,
    sigma_min: R,
}

impl<R: Real> MlpModel<R> {
    /// Build a model with weights drawn from a uniform fan-in distribution
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` and zero biases.
    pub fn new(layer_dims: Vec<usize>, sigma_min: R, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::init(layer_dims, sigma_min, &mut rng)
    }

    /// Like [`MlpModel::new`] but drawing from a caller-owned RNG stream.
    pub fn init(layer_dims: Vec<usize>, sigma_min: R, rng: &mut impl Rng) -> Result<Self> {
        let mut model = Self::zeroed(layer_dims, sigma_min)?;
        for l in 0..model.layer_count() {
            let (in_d, out_d) = model.layer_shape(l);
            let bound = 1.0 / (in_d as f64).sqrt();
            let (w_off, _) = model.layer_offsets(l);
            for p in &mut model.params[w_off..w_off + in_d * out_d] {
                *p = real::<R>(rng.random_range(-bound..bound));
            }
        }
        Ok(model)
    }

    /// All-zero parameters. Useful as the degenerate constant-spread model:
    /// every input maps to mean 0 and std `softplus(0) + sigma_min`.
    pub fn zeroed(layer_dims: Vec<usize>, sigma_min: R) -> Result<Self> {
        if layer_dims.len() < 2 {
            return Err(Error::invalid_argument(
                "model needs at least an input and an output layer",
            ));
        }
        if *layer_dims.last().unwrap() != 2 {
            return Err(Error::invalid_argument(format!(
                "output layer must have exactly 2 units (mean, pre-spread), got {}",
                layer_dims.last().unwrap()
            )));
        }
        if layer_dims.iter().any(|&d| d == 0) {
            return Err(Error::invalid_argument("layer dims must all be positive"));
        }
        if !(sigma_min > R::zero()) {
            return Err(Error::invalid_argument("sigma_min must be positive"));
        }
        let n_params: usize = (0..layer_dims.len() - 1)
            .map(|l| layer_dims[l] * layer_dims[l + 1] + layer_dims[l + 1])
            .sum();
        Ok(Self {
            params: vec![R::zero(); n_params],
            layer_dims,
            sigma_min,
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_size(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn sigma_min(&self) -> R {
        self.sigma_min
    }

    /// Number of weight layers.
    fn layer_count(&self) -> usize {
        self.layer_dims.len() - 1
    }

    fn layer_shape(&self, l: usize) -> (usize, usize) {
        (self.layer_dims[l], self.layer_dims[l + 1])
    }

    /// `(weight_offset, bias_offset)` of layer `l` into the flat parameter
    /// vector.
    fn layer_offsets(&self, l: usize) -> (usize, usize) {
        let mut off = 0;
        for k in 0..l {
            let (in_d, out_d) = self.layer_shape(k);
            off += in_d * out_d + out_d;
        }
        let (in_d, out_d) = self.layer_shape(l);
        (off, off + in_d * out_d)
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[R] {
        &self.params
    }

    pub fn param(&self, i: usize) -> R {
        self.params[i]
    }

    pub fn set_param(&mut self, i: usize, v: R) {
        self.params[i] = v;
    }

    fn check_input(&self, input: &[R]) -> Result<()> {
        if input.len() != self.input_size() {
            return Err(Error::invalid_argument(format!(
                "input length {} does not match model input size {}",
                input.len(),
                self.input_size()
            )));
        }
        Ok(())
    }

    /// Run the network, storing every layer's activation. The last entry is
    /// the raw two-unit output (pre-emission).
    fn forward_trace(&self, input: &[R]) -> Vec<Vec<R>> {
        let mut activations = Vec::with_capacity(self.layer_dims.len());
        activations.push(input.to_vec());
        for l in 0..self.layer_count() {
            let (in_d, out_d) = self.layer_shape(l);
            let (w_off, b_off) = self.layer_offsets(l);
            let prev = &activations[l];
            let mut z = Vec::with_capacity(out_d);
            for i in 0..out_d {
                let row = &self.params[w_off + i * in_d..w_off + (i + 1) * in_d];
                let mut acc = self.params[b_off + i];
                for (w, x) in row.iter().zip(prev.iter()) {
                    acc += *w * *x;
                }
                if l < self.layer_count() - 1 {
                    acc = acc.max(R::zero()); // rectifier on hidden layers
                }
                z.push(acc);
            }
            activations.push(z);
        }
        activations
    }

    /// Deterministic forward pass to a Gaussian prediction.
    pub fn forward(&self, input: &[R]) -> Result<GaussianPrediction<R>> {
        self.check_input(input)?;
        let trace = self.forward_trace(input);
        let out = trace.last().unwrap();
        Ok(GaussianPrediction {
            mean: out[0],
            std: softplus(out[1]) + self.sigma_min,
        })
    }

    /// Analytic gradient of the NLL at `(input, target)` with respect to
    /// every parameter, flat and aligned with the parameter vector.
    pub fn backward(&self, input: &[R], target: R) -> Result<Vec<R>> {
        self.check_input(input)?;
        let trace = self.forward_trace(input);
        let out = trace.last().unwrap();
        let (z_mean, z_raw) = (out[0], out[1]);
        let std = softplus(z_raw) + self.sigma_min;

        // d NLL / d mean and d NLL / d std for NLL = ln sigma + (t-mu)^2/(2 sigma^2) + c
        let err = z_mean - target;
        let d_mean = err / (std * std);
        let d_std = R::one() / std - err * err / (std * std * std);
        let delta_out = vec![d_mean, d_std * sigmoid(z_raw)];

        let mut grads = vec![R::zero(); self.params.len()];
        let mut delta = delta_out;
        for l in (0..self.layer_count()).rev() {
            let (in_d, out_d) = self.layer_shape(l);
            let (w_off, b_off) = self.layer_offsets(l);
            let prev = &trace[l];
            for i in 0..out_d {
                let d = delta[i];
                grads[b_off + i] = d;
                let g_row = &mut grads[w_off + i * in_d..w_off + (i + 1) * in_d];
                for (g, x) in g_row.iter_mut().zip(prev.iter()) {
                    *g = d * *x;
                }
            }
            if l > 0 {
                // Propagate through the previous rectifier: zero where the
                // activation was clipped.
                let mut next_delta = vec![R::zero(); in_d];
                for (j, nd) in next_delta.iter_mut().enumerate() {
                    if prev[j] > R::zero() {
                        let mut acc = R::zero();
                        for (i, d) in delta.iter().enumerate() {
                            acc += *d * self.params[w_off + i * in_d + j];
                        }
                        *nd = acc;
                    }
                }
                delta = next_delta;
            }
        }
        Ok(grads)
    }

    /// Mean gradient and mean loss over a batch.
    pub fn batch_gradient(&self, inputs: &[&[R]], targets: &[R]) -> Result<(Vec<R>, R)> {
        if inputs.is_empty() || inputs.len() != targets.len() {
            return Err(Error::invalid_argument(
                "batch inputs and targets must be non-empty and equal length",
            ));
        }
        let mut grads = vec![R::zero(); self.params.len()];
        let mut loss = R::zero();
        for (input, &target) in inputs.iter().zip(targets.iter()) {
            let g = self.backward(input, target)?;
            for (acc, gi) in grads.iter_mut().zip(g.iter()) {
                *acc += *gi;
            }
            loss += nll_loss(&self.forward(input)?, target)?;
        }
        let n = real::<R>(inputs.len() as f64);
        for g in &mut grads {
            *g /= n;
        }
        Ok((grads, loss / n))
    }
}

/// Negative log-likelihood of `target` under the prediction, in nats:
/// `0.5 ln(2 pi) + ln sigma + (target - mu)^2 / (2 sigma^2)`.
pub fn nll_loss<R: Real>(pred: &GaussianPrediction<R>, target: R) -> Result<R> {
    if !(pred.std > R::zero()) {
        return Err(Error::invalid_state(format!(
            "non-positive predicted std {}",
            pred.std
        )));
    }
    let half = real::<R>(0.5);
    let two_pi = real::<R>(2.0 * std::f64::consts::PI);
    let err = target - pred.mean;
    Ok(half * two_pi.ln() + pred.std.ln() + err * err / (real::<R>(2.0) * pred.std * pred.std))
}

/// Training hyperparameters. The paper-side model shape (hidden sizes 32 and
/// 16, two-unit Gaussian head) is the default; everything else is a declared
/// choice, not a given.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Probability that a training sample is presented masked, redrawn every
    /// epoch.
    pub mask_probability: f64,
    pub rng_seed: u64,
    /// Epochs without validation improvement before stopping early.
    /// 0 disables early stopping.
    pub patience: usize,
    /// Fraction of samples (taken from the end, in time order) held out for
    /// validation.
    pub validation_fraction: f64,
    pub hidden_dims: Vec<usize>,
    pub sigma_min: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 64,
            learning_rate: 1e-3,
            mask_probability: 0.5,
            rng_seed: 0,
            patience: 20,
            validation_fraction: 0.1,
            hidden_dims: vec![32, 16],
            sigma_min: DEFAULT_SIGMA_MIN,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid_argument("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid_argument("batch_size must be at least 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid_argument("learning_rate must be positive"));
        }
        if !(0.0..=1.0).contains(&self.mask_probability) {
            return Err(Error::invalid_argument(format!(
                "mask_probability must be in [0,1], got {}",
                self.mask_probability
            )));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::invalid_argument(
                "validation_fraction must be in [0,1)",
            ));
        }
        if !(self.sigma_min > 0.0) {
            return Err(Error::invalid_argument("sigma_min must be positive"));
        }
        Ok(())
    }
}

/// A trained model plus its loss history.
#[derive(Debug, Clone)]
pub struct TrainOutcome<R: Real> {
    pub model: MlpModel<R>,
    /// Mean training NLL per epoch, as optimized (masked/unmasked mixture).
    pub train_nll: Vec<f64>,
    /// Deterministic validation NLL per epoch: mean over held-out samples of
    /// the average of the masked and unmasked NLL.
    pub val_nll: Vec<f64>,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

struct Adam<R: Real> {
    m: Vec<R>,
    v: Vec<R>,
    step: usize,
    lr: R,
}

impl<R: Real> Adam<R> {
    fn new(n: usize, lr: R) -> Self {
        Self {
            m: vec![R::zero(); n],
            v: vec![R::zero(); n],
            step: 0,
            lr,
        }
    }

    fn update(&mut self, model: &mut MlpModel<R>, grads: &[R]) {
        self.step += 1;
        let b1 = real::<R>(ADAM_BETA1);
        let b2 = real::<R>(ADAM_BETA2);
        let eps = real::<R>(ADAM_EPS);
        let corr1 = R::one() - real::<R>(ADAM_BETA1.powi(self.step as i32));
        let corr2 = R::one() - real::<R>(ADAM_BETA2.powi(self.step as i32));
        for i in 0..grads.len() {
            let g = grads[i];
            self.m[i] = b1 * self.m[i] + (R::one() - b1) * g;
            self.v[i] = b2 * self.v[i] + (R::one() - b2) * g * g;
            let m_hat = self.m[i] / corr1;
            let v_hat = self.v[i] / corr2;
            let p = model.param(i) - self.lr * m_hat / (v_hat.sqrt() + eps);
            model.set_param(i, p);
        }
    }
}

/// Train one model on a mixture of masked and unmasked inputs.
///
/// Per epoch, each training sample is presented masked with probability
/// `mask_probability` (redrawn every epoch). The final 10% of samples in time
/// order are held out; the returned model carries the parameters of the best
/// validation epoch. Deterministic given `rng_seed`.
pub fn train<R: Real>(
    samples: &[WindowSample<R>],
    mask: &MaskSpec<R>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<R>> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::invalid_argument("cannot train on zero samples"));
    }
    let w = samples[0].window_len();
    let (d_o, d_a) = (samples[0].obs_dim(), samples[0].act_dim());
    for s in samples {
        if s.window_len() != w || s.obs_dim() != d_o || s.act_dim() != d_a {
            return Err(Error::invalid_argument(
                "samples have inconsistent window shapes",
            ));
        }
    }

    // Masking is fixed per sample, so both variants can be materialized once.
    let full_inputs: Vec<Vec<R>> = samples.iter().map(|s| s.flat_input()).collect();
    let masked_inputs: Vec<Vec<R>> = samples
        .iter()
        .map(|s| apply_mask(s, mask).map(|m| m.flat_input()))
        .collect::<Result<_>>()?;
    let targets: Vec<R> = samples.iter().map(|s| s.target).collect();

    let n = samples.len();
    let n_val = if n >= 2 {
        ((n as f64 * cfg.validation_fraction).round() as usize).clamp(usize::from(cfg.validation_fraction > 0.0), n - 1)
    } else {
        0
    };
    let n_train = n - n_val;
    let val_range = n_train..n;

    let input_size = w * (d_o + d_a);
    let mut dims = Vec::with_capacity(cfg.hidden_dims.len() + 2);
    dims.push(input_size);
    dims.extend_from_slice(&cfg.hidden_dims);
    dims.push(2);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut model = MlpModel::init(dims, real::<R>(cfg.sigma_min), &mut rng)?;
    let mut adam = Adam::new(model.param_count(), real::<R>(cfg.learning_rate));

    let eval_val = |model: &MlpModel<R>| -> Result<f64> {
        if val_range.is_empty() {
            // Degenerate split: fall back to the training samples.
            return eval_mixture_nll(model, &full_inputs, &masked_inputs, &targets, 0..n);
        }
        eval_mixture_nll(model, &full_inputs, &masked_inputs, &targets, val_range.clone())
    };

    let mut best_params: Vec<R> = model.params().to_vec();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut stale = 0usize;
    let mut train_hist = Vec::with_capacity(cfg.epochs);
    let mut val_hist = Vec::with_capacity(cfg.epochs);
    let mut epochs_run = 0usize;

    let mut order: Vec<usize> = (0..n_train).collect();
    for epoch in 0..cfg.epochs {
        epochs_run = epoch + 1;
        let masked_flags: Vec<bool> = (0..n_train)
            .map(|_| rng.random_bool(cfg.mask_probability))
            .collect();
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        let mut loss_count = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let inputs: Vec<&[R]> = chunk
                .iter()
                .map(|&i| {
                    if masked_flags[i] {
                        masked_inputs[i].as_slice()
                    } else {
                        full_inputs[i].as_slice()
                    }
                })
                .collect();
            let batch_targets: Vec<R> = chunk.iter().map(|&i| targets[i]).collect();
            let (grads, loss) = model.batch_gradient(&inputs, &batch_targets)?;
            let loss_f = loss.to_f64().unwrap_or(f64::NAN);
            if !loss_f.is_finite() {
                return Err(Error::TrainingDiverged {
                    epoch,
                    detail: format!("non-finite batch loss {loss_f}"),
                });
            }
            loss_sum += loss_f * chunk.len() as f64;
            loss_count += chunk.len();
            adam.update(&mut model, &grads);
        }
        train_hist.push(loss_sum / loss_count as f64);

        let val = eval_val(&model)?;
        if !val.is_finite() {
            return Err(Error::TrainingDiverged {
                epoch,
                detail: format!("non-finite validation loss {val}"),
            });
        }
        val_hist.push(val);
        if val < best_val {
            best_val = val;
            best_epoch = epoch;
            best_params.copy_from_slice(model.params());
            stale = 0;
        } else {
            stale += 1;
            if cfg.patience > 0 && stale >= cfg.patience {
                break;
            }
        }
    }

    for (i, p) in best_params.iter().enumerate() {
        model.set_param(i, *p);
    }
    Ok(TrainOutcome {
        model,
        train_nll: train_hist,
        val_nll: val_hist,
        best_epoch,
        epochs_run,
    })
}

fn eval_mixture_nll<R: Real>(
    model: &MlpModel<R>,
    full: &[Vec<R>],
    masked: &[Vec<R>],
    targets: &[R],
    range: std::ops::Range<usize>,
) -> Result<f64> {
    let mut sum = 0.0;
    let count = range.len();
    for i in range {
        let a = nll_loss(&model.forward(&full[i])?, targets[i])?;
        let b = nll_loss(&model.forward(&masked[i])?, targets[i])?;
        sum += 0.5 * (a.to_f64().unwrap_or(f64::NAN) + b.to_f64().unwrap_or(f64::NAN));
    }
    Ok(sum / count as f64)
}

/// On-disk model format: layer dims, flat parameters, spread floor and the
/// windowing/normalization metadata needed to rebuild inputs at analysis
/// time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub layer_dims: Vec<usize>,
    pub params: Vec<f64>,
    pub sigma_min: f64,
    pub meta: CheckpointMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub sample_rate_hz: f64,
    pub window_len: usize,
    pub mask_start_offset: usize,
    pub mask_end_offset: usize,
    pub horizon: usize,
    pub mask_value: f64,
    pub obs_dim: usize,
    pub act_dim: usize,
}

pub const CHECKPOINT_VERSION: u32 = 1;

impl<R: Real> MlpModel<R> {
    pub fn to_checkpoint(&self, meta: CheckpointMeta) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            layer_dims: self.layer_dims.clone(),
            params: self
                .params
                .iter()
                .map(|p| p.to_f64().expect("params are finite"))
                .collect(),
            sigma_min: self.sigma_min.to_f64().expect("sigma_min is finite"),
            meta,
        }
    }

    pub fn from_checkpoint(cp: &Checkpoint) -> Result<Self> {
        if cp.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                cp.version
            )));
        }
        let expected_input = cp.meta.window_len * (cp.meta.obs_dim + cp.meta.act_dim);
        if cp.layer_dims.first() != Some(&expected_input) {
            return Err(Error::Checkpoint(format!(
                "checkpoint input size {:?} does not match metadata window {} x ({} + {}) = {expected_input}",
                cp.layer_dims.first(),
                cp.meta.window_len,
                cp.meta.obs_dim,
                cp.meta.act_dim
            )));
        }
        let mut model = Self::zeroed(cp.layer_dims.clone(), real::<R>(cp.sigma_min))
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        if cp.params.len() != model.param_count() {
            return Err(Error::Checkpoint(format!(
                "checkpoint has {} parameters, layer dims require {}",
                cp.params.len(),
                model.param_count()
            )));
        }
        for (i, p) in cp.params.iter().enumerate() {
            model.set_param(i, real::<R>(*p));
        }
        Ok(model)
    }
}

pub fn save_checkpoint(path: &Path, cp: &Checkpoint) -> Result<()> {
    let json =
        serde_json::to_string_pretty(cp).map_err(|e| Error::Checkpoint(e.to_string()))?;
    atomic_write(path, json.as_bytes())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| {
        Error::Checkpoint(format!("cannot parse {}: {e}", path.display()))
    })
}
