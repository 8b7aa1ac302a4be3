//! Transfer entropy from paired masked/unmasked Gaussian predictions.
//!
//! With a Gaussian predictive distribution the differential entropy has the
//! closed form `0.5 * (1 + ln 2*pi) + ln sigma` (one-dimensional target), so
//! the per-step transfer entropy reduces to `ln(sigma_masked / sigma_full)`:
//! the uncertainty removed by knowing the masked span of past actions. A
//! positive value means those actions are informative about the next
//! observation; negative estimates are kept as-is (they diagnose model
//! misfit) and only peak detection applies the positivity rule.
//!
//! The series is smoothed with a zero-phase second-order Butterworth low-pass
//! (forward-backward pass, reflect padding, steady-state initial conditions)
//! so peak locations do not shift, then strictly positive local maxima are
//! extracted with distance and prominence pruning. Each peak is attributed
//! to the masked span of action frames of its anchor window.

use crate::data::{apply_mask, MaskSpec, WindowConfig, WindowSample};
use crate::error::{Error, Result};
use crate::mlp::{GaussianPrediction, MlpModel};
use crate::scalar::{real, Real};

/// Per-anchor transfer entropy values, in nats.
#[derive(Debug, Clone, PartialEq)]
pub struct TeSeries<R: Real> {
    values: Vec<R>,
    anchors: Vec<usize>,
}

impl<R: Real> TeSeries<R> {
    pub fn new(values: Vec<R>, anchors: Vec<usize>) -> Result<Self> {
        if values.len() != anchors.len() {
            return Err(Error::invalid_argument(format!(
                "series has {} values but {} anchors",
                values.len(),
                anchors.len()
            )));
        }
        Ok(Self { values, anchors })
    }

    pub fn values(&self) -> &[R] {
        &self.values
    }

    pub fn anchors(&self) -> &[usize] {
        &self.anchors
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same anchors, new values (e.g. after smoothing).
    pub fn with_values(&self, values: Vec<R>) -> Result<Self> {
        Self::new(values, self.anchors.clone())
    }
}

/// A strictly positive local maximum of the smoothed series, carrying the
/// masked-span action frames it attributes influence to.
#[derive(Debug, Clone, PartialEq)]
pub struct TePeak<R: Real> {
    pub anchor_t: usize,
    pub te_value: R,
    /// Trajectory frame of the first attributed action.
    pub window_start_t: usize,
    /// Trajectory frame of the last attributed action (inclusive).
    pub window_end_t: usize,
    /// Attributed action frames, masked-span length x action channels.
    pub action_window: Vec<Vec<R>>,
}

/// Differential entropy of a one-dimensional Gaussian prediction, in nats.
/// May be negative for small standard deviations.
pub fn differential_entropy<R: Real>(pred: &GaussianPrediction<R>) -> R {
    let half = real::<R>(0.5);
    let two_pi = real::<R>(2.0 * std::f64::consts::PI);
    half * (R::one() + two_pi.ln()) + pred.std().ln()
}

/// Transfer entropy at one step: the entropy of the masked prediction minus
/// the entropy of the full prediction, which reduces to
/// `ln(sigma_masked / sigma_full)`. Positive iff the masked actions reduce
/// predictive uncertainty.
pub fn transfer_entropy_at<R: Real>(
    full: &GaussianPrediction<R>,
    masked: &GaussianPrediction<R>,
) -> R {
    masked.std().ln() - full.std().ln()
}

/// Run the model on the unmasked and masked variant of one sample.
pub fn predict_pair<R: Real>(
    model: &MlpModel<R>,
    sample: &WindowSample<R>,
    mask: &MaskSpec<R>,
) -> Result<(GaussianPrediction<R>, GaussianPrediction<R>)> {
    let full = model.forward(&sample.flat_input())?;
    let masked_sample = apply_mask(sample, mask)?;
    let masked = model.forward(&masked_sample.flat_input())?;
    Ok((full, masked))
}

/// Transfer entropy at every anchor: one masked and one unmasked forward
/// pass per sample through the same model, in anchor order.
pub fn compute_te_series<R: Real>(
    model: &MlpModel<R>,
    samples: &[WindowSample<R>],
    mask: &MaskSpec<R>,
) -> Result<TeSeries<R>> {
    let mut values = Vec::with_capacity(samples.len());
    let mut anchors = Vec::with_capacity(samples.len());
    for sample in samples {
        let (full, masked) = predict_pair(model, sample, mask)?;
        values.push(transfer_entropy_at(&full, &masked));
        anchors.push(sample.anchor_t);
    }
    TeSeries::new(values, anchors)
}

/// Second-order Butterworth low-pass coefficients via the bilinear transform,
/// normalized to unit DC gain. Returns `(b, a)` with `a[0] == 1` implied.
fn butterworth2(cutoff_hz: f64, sample_rate_hz: f64) -> ([f64; 3], [f64; 2]) {
    let c = 1.0 / (std::f64::consts::PI * cutoff_hz / sample_rate_hz).tan();
    let sqrt2 = std::f64::consts::SQRT_2;
    let a0 = 1.0 + sqrt2 * c + c * c;
    let b = [1.0 / a0, 2.0 / a0, 1.0 / a0];
    let a = [2.0 * (1.0 - c * c) / a0, (1.0 - sqrt2 * c + c * c) / a0];
    (b, a)
}

/// One direct-form-II-transposed pass. `zi` is the initial state, already
/// scaled by the caller.
fn biquad_pass<R: Real>(x: &[R], b: &[R; 3], a: &[R; 2], zi: (R, R)) -> Vec<R> {
    let (mut z1, mut z2) = zi;
    let mut y = Vec::with_capacity(x.len());
    for &xi in x {
        let yi = b[0] * xi + z1;
        z1 = b[1] * xi - a[0] * yi + z2;
        z2 = b[2] * xi - a[1] * yi;
        y.push(yi);
    }
    y
}

/// Zero-phase low-pass: forward and backward second-order Butterworth with
/// odd reflect padding and steady-state initial conditions, so a constant
/// stays constant and peak locations do not move.
pub fn lowpass_filter<R: Real>(
    series: &[R],
    cutoff_hz: f64,
    sample_rate_hz: f64,
) -> Result<Vec<R>> {
    if !(sample_rate_hz > 0.0) {
        return Err(Error::invalid_argument("sample_rate_hz must be positive"));
    }
    if !(cutoff_hz > 0.0) || cutoff_hz >= sample_rate_hz / 2.0 {
        return Err(Error::invalid_argument(format!(
            "cutoff_hz must lie in (0, sample_rate/2) = (0, {}), got {cutoff_hz}",
            sample_rate_hz / 2.0
        )));
    }
    let n = series.len();
    if n <= 1 {
        return Ok(series.to_vec());
    }
    let (bf, af) = butterworth2(cutoff_hz, sample_rate_hz);
    let b = [real::<R>(bf[0]), real::<R>(bf[1]), real::<R>(bf[2])];
    let a = [real::<R>(af[0]), real::<R>(af[1])];
    // Steady-state unit-step filter state; scaled by the first sample of
    // each pass so that transients from the edges do not leak inward.
    let zi1 = R::one() - b[0];
    let zi2 = b[2] - a[1];

    let pad = (3 * 3).min(n - 1);
    let two = real::<R>(2.0);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    for i in (1..=pad).rev() {
        ext.push(two * series[0] - series[i]);
    }
    ext.extend_from_slice(series);
    for i in 1..=pad {
        ext.push(two * series[n - 1] - series[n - 1 - i]);
    }

    let first = ext[0];
    let forward = biquad_pass(&ext, &b, &a, (zi1 * first, zi2 * first));
    let mut rev: Vec<R> = forward.into_iter().rev().collect();
    let first = rev[0];
    rev = biquad_pass(&rev, &b, &a, (zi1 * first, zi2 * first));
    rev.reverse();
    Ok(rev[pad..pad + n].to_vec())
}

/// Indices of strictly positive local maxima, pruned so that any two kept
/// peaks are at least `min_distance` apart (the larger wins) and each has
/// prominence at least `min_prominence`.
pub fn find_positive_peaks<R: Real>(
    values: &[R],
    min_distance: usize,
    min_prominence: R,
) -> Result<Vec<usize>> {
    if min_distance == 0 {
        return Err(Error::invalid_argument("min_distance must be at least 1"));
    }
    let n = values.len();
    let mut candidates: Vec<usize> = Vec::new();
    for i in 1..n.saturating_sub(1) {
        if values[i] > R::zero() && values[i] > values[i - 1] && values[i] > values[i + 1] {
            candidates.push(i);
        }
    }

    // Distance pruning, largest value first.
    let mut by_height = candidates.clone();
    by_height.sort_by(|&i, &j| {
        values[j]
            .partial_cmp(&values[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let mut kept: Vec<usize> = Vec::new();
    for i in by_height {
        if kept
            .iter()
            .all(|&j| i.abs_diff(j) >= min_distance)
        {
            kept.push(i);
        }
    }
    kept.sort_unstable();

    // Prominence relative to the full series: height above the higher of the
    // two valley floors that separate the peak from higher ground (or the
    // series edge).
    let kept = kept
        .into_iter()
        .filter(|&i| prominence(values, i) >= min_prominence)
        .collect();
    Ok(kept)
}

fn prominence<R: Real>(values: &[R], peak: usize) -> R {
    let h = values[peak];
    let mut left_min = h;
    for j in (0..peak).rev() {
        if values[j] > h {
            break;
        }
        left_min = left_min.min(values[j]);
    }
    let mut right_min = h;
    for &v in &values[peak + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

/// Detect peaks on the smoothed series and attribute each to the masked span
/// of action frames of its anchor window. `samples` must be the windows the
/// series was computed from, in the same order.
pub fn find_te_peaks<R: Real>(
    smoothed: &TeSeries<R>,
    samples: &[WindowSample<R>],
    cfg: &WindowConfig,
    min_distance: usize,
    min_prominence: R,
) -> Result<Vec<TePeak<R>>> {
    cfg.validate()?;
    if smoothed.len() != samples.len() {
        return Err(Error::invalid_argument(format!(
            "series has {} values but {} samples were provided",
            smoothed.len(),
            samples.len()
        )));
    }
    for (i, s) in samples.iter().enumerate() {
        if s.anchor_t != smoothed.anchors()[i] {
            return Err(Error::invalid_argument(format!(
                "sample {i} anchors at {} but series expects {}",
                s.anchor_t,
                smoothed.anchors()[i]
            )));
        }
    }
    let offsets = cfg.masked_offsets();
    let indices = find_positive_peaks(smoothed.values(), min_distance, min_prominence)?;
    Ok(indices
        .into_iter()
        .map(|i| {
            let sample = &samples[i];
            let anchor_t = sample.anchor_t;
            let action_window: Vec<Vec<R>> = offsets
                .iter()
                .map(|&o| sample.act_window[o].clone())
                .collect();
            TePeak {
                anchor_t,
                te_value: smoothed.values()[i],
                window_start_t: anchor_t - cfg.mask_start_offset,
                window_end_t: anchor_t - cfg.mask_end_offset,
                action_window,
            }
        })
        .collect())
}
