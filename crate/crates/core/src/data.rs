//! Trajectories, windowed samples, normalization and masking.
//!
//! A [`Trajectory`] holds synchronized per-frame observation and action
//! channels, already normalized to `[0, 1]`. [`extract_windows`] slices it
//! into supervised samples (a fixed window of past observations and actions
//! plus the next observation as target), and [`apply_mask`] blanks a span of
//! past action frames so the same model can predict with and without that
//! span.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::scalar::{real, Real};

/// Synchronized observation/action time series at a fixed sample rate.
///
/// Guarantees after construction: both channel groups have the same frame
/// count, every frame has a consistent channel width, and every value lies in
/// `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<R: Real> {
    sample_rate_hz: f64,
    observations: Vec<Vec<R>>,
    actions: Vec<Vec<R>>,
}

impl<R: Real> Trajectory<R> {
    pub fn new(
        sample_rate_hz: f64,
        observations: Vec<Vec<R>>,
        actions: Vec<Vec<R>>,
    ) -> Result<Self> {
        if !(sample_rate_hz > 0.0) {
            return Err(Error::invalid_argument(format!(
                "sample_rate_hz must be positive, got {sample_rate_hz}"
            )));
        }
        if observations.is_empty() {
            return Err(Error::invalid_argument("trajectory has no frames"));
        }
        if observations.len() != actions.len() {
            return Err(Error::invalid_argument(format!(
                "observation/action length mismatch: {} vs {}",
                observations.len(),
                actions.len()
            )));
        }
        let d_o = observations[0].len();
        let d_a = actions[0].len();
        if d_o == 0 || d_a == 0 {
            return Err(Error::invalid_argument(
                "observation and action frames must have at least one channel",
            ));
        }
        let unit = real::<R>(0.0)..=real::<R>(1.0);
        for (t, frame) in observations.iter().enumerate() {
            if frame.len() != d_o {
                return Err(Error::invalid_argument(format!(
                    "ragged observation frame at t={t}: {} channels, expected {d_o}",
                    frame.len()
                )));
            }
            if frame.iter().any(|v| !unit.contains(v)) {
                return Err(Error::invalid_argument(format!(
                    "observation value out of [0,1] at t={t}"
                )));
            }
        }
        for (t, frame) in actions.iter().enumerate() {
            if frame.len() != d_a {
                return Err(Error::invalid_argument(format!(
                    "ragged action frame at t={t}: {} channels, expected {d_a}",
                    frame.len()
                )));
            }
            if frame.iter().any(|v| !unit.contains(v)) {
                return Err(Error::invalid_argument(format!(
                    "action value out of [0,1] at t={t}"
                )));
            }
        }
        Ok(Self {
            sample_rate_hz,
            observations,
            actions,
        })
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    /// Number of frames T.
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn obs_dim(&self) -> usize {
        self.observations[0].len()
    }

    pub fn act_dim(&self) -> usize {
        self.actions[0].len()
    }

    pub fn observations(&self) -> &[Vec<R>] {
        &self.observations
    }

    pub fn actions(&self) -> &[Vec<R>] {
        &self.actions
    }
}

/// Window geometry: how many past frames feed the predictor and which span of
/// past actions the mask blanks.
///
/// Offsets are counted backwards from the window's anchor frame `t`:
/// `mask_start_offset = 19` and `mask_end_offset = 5` blank actions
/// `t-19..=t-5`, leaving the most recent actions `t-4..=t` visible to both
/// the full and the masked prediction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowConfig {
    pub window_len: usize,
    pub mask_start_offset: usize,
    pub mask_end_offset: usize,
    /// Frames ahead of the anchor used as prediction target.
    pub horizon: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            window_len: 20,
            mask_start_offset: 19,
            mask_end_offset: 5,
            horizon: 1,
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_len < self.mask_start_offset + 1 {
            return Err(Error::invalid_argument(format!(
                "window_len {} must be at least mask_start_offset + 1 = {}",
                self.window_len,
                self.mask_start_offset + 1
            )));
        }
        if self.mask_start_offset < self.mask_end_offset {
            return Err(Error::invalid_argument(format!(
                "mask_start_offset {} must be >= mask_end_offset {}",
                self.mask_start_offset, self.mask_end_offset
            )));
        }
        if self.horizon == 0 {
            return Err(Error::invalid_argument("horizon must be at least 1"));
        }
        Ok(())
    }

    /// Number of frames in the masked span.
    pub fn masked_span_len(&self) -> usize {
        self.mask_start_offset - self.mask_end_offset + 1
    }

    /// Window-local offsets of the masked span, in increasing (time) order.
    ///
    /// Offset 0 is the oldest frame of the window (`t - window_len + 1`),
    /// offset `window_len - 1` is the anchor frame `t`.
    pub fn masked_offsets(&self) -> Vec<usize> {
        let first = self.window_len - 1 - self.mask_start_offset;
        let last = self.window_len - 1 - self.mask_end_offset;
        (first..=last).collect()
    }
}

/// One supervised example: a window of observations and actions anchored at
/// frame `anchor_t`, with the next observation (channel 0) as target.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSample<R: Real> {
    pub obs_window: Vec<Vec<R>>,
    pub act_window: Vec<Vec<R>>,
    pub target: R,
    pub anchor_t: usize,
}

impl<R: Real> WindowSample<R> {
    pub fn window_len(&self) -> usize {
        self.obs_window.len()
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_window[0].len()
    }

    pub fn act_dim(&self) -> usize {
        self.act_window[0].len()
    }

    /// Flattened model input: observation frames row-major, then action
    /// frames row-major. Length is `window_len * (obs_dim + act_dim)`.
    pub fn flat_input(&self) -> Vec<R> {
        let mut out =
            Vec::with_capacity(self.window_len() * (self.obs_dim() + self.act_dim()));
        for frame in &self.obs_window {
            out.extend_from_slice(frame);
        }
        for frame in &self.act_window {
            out.extend_from_slice(frame);
        }
        out
    }
}

/// Which window-local action frames to blank, and with what value.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSpec<R: Real> {
    masked_frames: BTreeSet<usize>,
    mask_value: R,
}

impl<R: Real> MaskSpec<R> {
    pub fn new(masked_frames: impl IntoIterator<Item = usize>, mask_value: R) -> Self {
        Self {
            masked_frames: masked_frames.into_iter().collect(),
            mask_value,
        }
    }

    /// The default mask for a window configuration: blank the configured span
    /// of past actions, keep the most recent frames visible.
    pub fn from_window(cfg: &WindowConfig, mask_value: R) -> Self {
        Self::new(cfg.masked_offsets(), mask_value)
    }

    pub fn masked_frames(&self) -> impl Iterator<Item = usize> + '_ {
        self.masked_frames.iter().copied()
    }

    pub fn mask_value(&self) -> R {
        self.mask_value
    }

    pub fn is_empty(&self) -> bool {
        self.masked_frames.is_empty()
    }
}

/// Map raw velocities into `[0, 1]` so that 0.5 encodes zero velocity and
/// `±v_max` map to 1 and 0. Inputs beyond `±v_max` are clamped.
pub fn normalize_actions<R: Real>(raw_velocities: &[R], v_max: R) -> Result<Vec<R>> {
    if !(v_max > R::zero()) {
        return Err(Error::invalid_argument(format!(
            "v_max must be positive, got {v_max}"
        )));
    }
    let half = real::<R>(0.5);
    Ok(raw_velocities
        .iter()
        .map(|&v| {
            let clamped = v.max(-v_max).min(v_max);
            (half + half * clamped / v_max).max(R::zero()).min(R::one())
        })
        .collect())
}

/// Min-max normalize a sequence over its own range. A constant sequence maps
/// to all 0.5.
pub fn normalize_depth<R: Real>(raw_depths: &[R]) -> Result<Vec<R>> {
    if raw_depths.is_empty() {
        return Err(Error::invalid_argument(
            "cannot normalize an empty depth sequence",
        ));
    }
    let mut min = raw_depths[0];
    let mut max = raw_depths[0];
    for &d in raw_depths {
        min = min.min(d);
        max = max.max(d);
    }
    if min == max {
        return Ok(vec![real::<R>(0.5); raw_depths.len()]);
    }
    let span = max - min;
    Ok(raw_depths
        .iter()
        .map(|&d| ((d - min) / span).max(R::zero()).min(R::one()))
        .collect())
}

/// Reduce a raw depth array to one representative value: the center of the
/// most populated histogram bin over `[min, max]`. Ties break toward the
/// nearer (smaller) depth.
pub fn depth_from_histogram<R: Real>(depth_values: &[R], n_bins: usize) -> Result<R> {
    if depth_values.is_empty() {
        return Err(Error::invalid_argument(
            "cannot build a histogram from an empty array",
        ));
    }
    if n_bins == 0 {
        return Err(Error::invalid_argument("n_bins must be at least 1"));
    }
    let mut min = depth_values[0];
    let mut max = depth_values[0];
    for &d in depth_values {
        min = min.min(d);
        max = max.max(d);
    }
    if min == max {
        return Ok(min);
    }
    let span = max - min;
    let n = real::<R>(n_bins as f64);
    let mut counts = vec![0usize; n_bins];
    for &d in depth_values {
        let mut idx = ((d - min) / span * n).to_usize().unwrap_or(0);
        if idx >= n_bins {
            idx = n_bins - 1; // d == max lands in the last bin
        }
        counts[idx] += 1;
    }
    // Strict > keeps the first (nearest-depth) bin on ties.
    let mut best = 0usize;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    let width = span / n;
    Ok(min + (real::<R>(best as f64) + real::<R>(0.5)) * width)
}

/// Slice a trajectory into supervised window samples, one per anchor frame.
///
/// Anchors run from `window_len - 1` to `T - 1 - horizon`; with the default
/// horizon of 1 that yields exactly `T - window_len` samples. The target is
/// observation channel 0 at `anchor + horizon`.
pub fn extract_windows<R: Real>(
    traj: &Trajectory<R>,
    cfg: &WindowConfig,
) -> Result<Vec<WindowSample<R>>> {
    cfg.validate()?;
    let t_total = traj.len();
    let w = cfg.window_len;
    if t_total < w + cfg.horizon {
        return Err(Error::insufficient_data(format!(
            "need at least {} frames for window_len {} and horizon {}, got {t_total}",
            w + cfg.horizon,
            w,
            cfg.horizon
        )));
    }
    let mut samples = Vec::with_capacity(t_total - w - cfg.horizon + 1);
    for anchor in (w - 1)..=(t_total - 1 - cfg.horizon) {
        let start = anchor + 1 - w;
        samples.push(WindowSample {
            obs_window: traj.observations[start..=anchor].to_vec(),
            act_window: traj.actions[start..=anchor].to_vec(),
            target: traj.observations[anchor + cfg.horizon][0],
            anchor_t: anchor,
        });
    }
    Ok(samples)
}

/// Return a copy of `sample` with the masked action frames replaced by the
/// mask value in every action channel. Observations are untouched.
pub fn apply_mask<R: Real>(sample: &WindowSample<R>, mask: &MaskSpec<R>) -> Result<WindowSample<R>> {
    let w = sample.window_len();
    let mut out = sample.clone();
    for offset in mask.masked_frames() {
        if offset >= w {
            return Err(Error::invalid_argument(format!(
                "mask offset {offset} out of range for window of {w} frames"
            )));
        }
        for v in &mut out.act_window[offset] {
            *v = mask.mask_value();
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn constant_trajectory(t: usize, d_o: usize, d_a: usize) -> Trajectory<f64> {
        Trajectory::new(
            10.0,
            vec![vec![0.5; d_o]; t],
            vec![vec![0.5; d_a]; t],
        )
        .unwrap()
    }

    #[test]
    fn normalize_actions_maps_zero_to_half() {
        let out = normalize_actions(&[0.0f64], 1.0).unwrap();
        assert_eq!(out, vec![0.5]);
    }

    #[test]
    fn normalize_actions_saturates_forward() {
        let out = normalize_actions(&[1.0f64], 1.0).unwrap();
        assert_eq!(out, vec![1.0]);
    }

    #[test]
    fn normalize_actions_linear_map() {
        let out = normalize_actions(&[-0.5f64], 1.0).unwrap();
        assert_abs_diff_eq!(out[0], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn normalize_actions_clamps_out_of_range() {
        let out = normalize_actions(&[3.0f64, -3.0], 1.0).unwrap();
        assert_eq!(out, vec![1.0, 0.0]);
    }

    #[test]
    fn normalize_actions_rejects_bad_vmax() {
        assert!(matches!(
            normalize_actions(&[0.0f64], 0.0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(normalize_actions(&[0.0f64], -1.0).is_err());
    }

    #[test]
    fn normalize_depth_min_max() {
        let out = normalize_depth(&[2.0f64, 4.0, 6.0]).unwrap();
        assert_eq!(out, vec![0.0, 0.5, 1.0]);
        let out = normalize_depth(&[0.0f64, 10.0, 5.0, 10.0]).unwrap();
        assert_eq!(out, vec![0.0, 1.0, 0.5, 1.0]);
    }

    #[test]
    fn normalize_depth_constant_falls_back_to_half() {
        let out = normalize_depth(&[3.0f64, 3.0, 3.0]).unwrap();
        assert_eq!(out, vec![0.5, 0.5, 0.5]);
    }

    #[test]
    fn normalize_depth_rejects_empty() {
        assert!(matches!(
            normalize_depth::<f64>(&[]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn histogram_degenerate_single_mode() {
        let values = vec![0.4f64; 50];
        let d = depth_from_histogram(&values, 10).unwrap();
        assert_eq!(d, 0.4);
    }

    #[test]
    fn histogram_finds_dominant_mode() {
        // 900 samples spread near 0.3, 100 near 0.9; the mode bin must sit
        // near 0.3. Cross-check against an independent counting pass.
        let mut values = Vec::new();
        for i in 0..900 {
            values.push(0.28 + 0.04 * (i as f64 / 900.0));
        }
        for i in 0..100 {
            values.push(0.88 + 0.04 * (i as f64 / 100.0));
        }
        let n_bins = 20;
        let d = depth_from_histogram(&values, n_bins).unwrap();

        let (min, max) = (0.28, values.iter().cloned().fold(f64::MIN, f64::max));
        let width = (max - min) / n_bins as f64;
        let mut counts = vec![0usize; n_bins];
        for &v in &values {
            let idx = (((v - min) / width) as usize).min(n_bins - 1);
            counts[idx] += 1;
        }
        let best = (0..n_bins).max_by_key(|&i| counts[i]).unwrap();
        let expected = min + (best as f64 + 0.5) * width;
        assert_abs_diff_eq!(d, expected, epsilon = 1e-12);
        assert!((d - 0.3).abs() < 0.05, "mode should be near 0.3, got {d}");
    }

    #[test]
    fn histogram_tie_breaks_toward_nearer_depth() {
        let mut values = vec![0.2f64; 50];
        values.extend(vec![0.8f64; 50]);
        let d = depth_from_histogram(&values, 10).unwrap();
        assert!(d < 0.5, "tie must resolve to the nearer mode, got {d}");
        // Bin 0 covers [0.2, 0.26); its center is 0.23.
        assert_abs_diff_eq!(d, 0.23, epsilon = 1e-12);
    }

    #[test]
    fn histogram_rejects_bad_input() {
        assert!(depth_from_histogram::<f64>(&[], 10).is_err());
        assert!(depth_from_histogram(&[0.1f64], 0).is_err());
    }

    #[test]
    fn extract_windows_boundary_arithmetic() {
        let mut obs = vec![vec![0.5]; 21];
        obs[20][0] = 0.75;
        let traj = Trajectory::new(10.0, obs, vec![vec![0.5; 2]; 21]).unwrap();
        let cfg = WindowConfig::default();
        let samples = extract_windows(&traj, &cfg).unwrap();
        assert_eq!(samples.len(), 1);
        assert_eq!(samples[0].anchor_t, 19);
        assert_eq!(samples[0].target, 0.75);
    }

    #[test]
    fn extract_windows_count() {
        let traj = constant_trajectory(30, 1, 2);
        let samples = extract_windows(&traj, &WindowConfig::default()).unwrap();
        assert_eq!(samples.len(), 10);
    }

    #[test]
    fn extract_windows_needs_target_frame() {
        let traj = constant_trajectory(20, 1, 2);
        assert!(matches!(
            extract_windows(&traj, &WindowConfig::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn empty_mask_is_identity() {
        let traj = constant_trajectory(25, 1, 2);
        let sample = &extract_windows(&traj, &WindowConfig::default()).unwrap()[0];
        let masked = apply_mask(sample, &MaskSpec::new([], 0.0)).unwrap();
        assert_eq!(&masked, sample);
    }

    #[test]
    fn default_mask_blanks_early_frames_only() {
        let cfg = WindowConfig::default();
        assert_eq!(cfg.masked_offsets(), (0..=14).collect::<Vec<_>>());
        assert_eq!(cfg.masked_span_len(), 15);

        let traj = Trajectory::new(
            10.0,
            vec![vec![0.5]; 25],
            vec![vec![0.7, 0.7]; 25],
        )
        .unwrap();
        let sample = &extract_windows(&traj, &cfg).unwrap()[0];
        let mask = MaskSpec::from_window(&cfg, 0.0);
        let masked = apply_mask(sample, &mask).unwrap();
        for offset in 0..15 {
            assert_eq!(masked.act_window[offset], vec![0.0, 0.0]);
        }
        for offset in 15..20 {
            assert_eq!(masked.act_window[offset], vec![0.7, 0.7]);
        }
        assert_eq!(masked.obs_window, sample.obs_window);
    }

    #[test]
    fn mask_offset_out_of_range_errors() {
        let traj = constant_trajectory(25, 1, 2);
        let sample = &extract_windows(&traj, &WindowConfig::default()).unwrap()[0];
        assert!(apply_mask(sample, &MaskSpec::new([20], 0.0)).is_err());
    }

    #[test]
    fn trajectory_rejects_mismatch_and_out_of_range() {
        assert!(Trajectory::new(10.0, vec![vec![0.5]; 3], vec![vec![0.5]; 2]).is_err());
        assert!(Trajectory::new(10.0, vec![vec![1.5]], vec![vec![0.5]]).is_err());
        assert!(Trajectory::new(0.0, vec![vec![0.5]], vec![vec![0.5]]).is_err());
        assert!(Trajectory::<f64>::new(10.0, vec![], vec![]).is_err());
    }

    #[test]
    fn window_config_validation() {
        let bad = WindowConfig {
            window_len: 10,
            mask_start_offset: 19,
            mask_end_offset: 5,
            horizon: 1,
        };
        assert!(bad.validate().is_err());
        let bad = WindowConfig {
            mask_start_offset: 3,
            mask_end_offset: 5,
            ..WindowConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn works_for_f32() {
        let out = normalize_actions(&[0.0f32, 0.5], 1.0).unwrap();
        assert_eq!(out, vec![0.5f32, 0.75]);
    }
}
