//! Synthetic human-robot proximity interactions with planted causal lags.
//!
//! The generator plants trapezoidal velocity bursts (forward, backward, and
//! optional in-place turns) into an otherwise still scene. Robot linear
//! velocity integrates directly into the measured relative depth; on top of
//! that, a lagged first-order human response is added: after a forward burst
//! *ends*, the human retreats, and as soon as a backward burst *starts* (plus
//! the same lag) the human closes the distance again. Turn bursts move the
//! angular channel only and leave depth untouched, which is exactly the null
//! case the detection pipeline should not fire on.
//!
//! The reaction lag must fall inside the masked action span (0.5 s to 2.0 s
//! at the default window geometry), otherwise the planted influence would be
//! invisible to the masked/unmasked prediction pair by construction.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{normalize_actions, normalize_depth, Trajectory};
use crate::error::{Error, Result};
use crate::scalar::{real, Real};
use crate::te::TePeak;

/// First-order time constant of the human response, seconds.
const RESPONSE_TAU_S: f64 = 0.25;
/// The response is considered active for this many time constants.
const RESPONSE_WINDOW_TAUS: f64 = 5.0;
/// Quiet lead-in before the first burst, seconds.
const WARMUP_S: f64 = 3.0;
/// Initial raw human-robot distance, arbitrary units.
const INITIAL_DEPTH: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventType {
    Forward,
    Backward,
    TurnLeft,
    TurnRight,
}

impl EventType {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventType::Forward => "forward",
            EventType::Backward => "backward",
            EventType::TurnLeft => "turn_left",
            EventType::TurnRight => "turn_right",
        }
    }

    /// Whether this action type moves the robot along the depth axis.
    pub fn moves_along_depth(&self) -> bool {
        matches!(self, EventType::Forward | EventType::Backward)
    }

    pub fn is_turn(&self) -> bool {
        !self.moves_along_depth()
    }
}

impl FromStr for EventType {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s.trim() {
            "forward" => Ok(EventType::Forward),
            "backward" => Ok(EventType::Backward),
            "turn_left" => Ok(EventType::TurnLeft),
            "turn_right" => Ok(EventType::TurnRight),
            _ => Err(()),
        }
    }
}

/// One planted action burst, in frame indices (inclusive range).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimEvent {
    pub id: usize,
    pub event_type: EventType,
    pub start_frame: usize,
    pub end_frame: usize,
    /// Whether this event drives a human depth response.
    pub responsive: bool,
}

/// Planted events plus a per-frame flag marking where a human response is
/// actively driving the depth signal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    pub events: Vec<SimEvent>,
    pub causal_frames: Vec<bool>,
}

/// Trapezoidal velocity burst profile.
#[derive(Debug, Clone, PartialEq)]
pub struct BurstShape {
    pub rise_s: f64,
    pub hold_min_s: f64,
    pub hold_max_s: f64,
    pub fall_s: f64,
    /// Plateau velocity magnitude; also the normalization v_max.
    pub peak_velocity: f64,
}

impl Default for BurstShape {
    fn default() -> Self {
        // With the default window (20 frames) and reaction lag (0.8 s), a
        // burst longer than ~1.1 s no longer fits inside the window by the
        // time the human responds, leaving its displacement unresolvable for
        // the unmasked prediction. Hold times stay short by default.
        Self {
            rise_s: 0.3,
            hold_min_s: 0.3,
            hold_max_s: 0.5,
            fall_s: 0.3,
            peak_velocity: 0.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    /// Expected bursts per minute.
    pub event_rate_per_min: f64,
    pub burst: BurstShape,
    /// Delay between the triggering moment of a burst and the onset of the
    /// human response. Must fall inside the masked span: (0.5, 2.0) s.
    pub human_reaction_lag_s: f64,
    /// Response magnitude as a fraction of the burst's integrated
    /// displacement; 1.0 restores the previous distance.
    pub human_gain: f64,
    pub noise_std: f64,
    /// Also plant turn bursts (angular channel, zero depth effect).
    pub rotation_bursts: bool,
    pub rng_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            duration_s: 900.0,
            sample_rate_hz: 10.0,
            event_rate_per_min: 4.0,
            burst: BurstShape::default(),
            human_reaction_lag_s: 0.8,
            human_gain: 1.0,
            noise_std: 0.01,
            rotation_bursts: true,
            rng_seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0) {
            return Err(Error::invalid_argument(format!(
                "duration_s must be positive, got {}",
                self.duration_s
            )));
        }
        if !(self.sample_rate_hz > 0.0) {
            return Err(Error::invalid_argument("sample_rate_hz must be positive"));
        }
        if self.event_rate_per_min < 0.0 {
            return Err(Error::invalid_argument("event_rate_per_min must be >= 0"));
        }
        if !(self.human_reaction_lag_s > 0.5 && self.human_reaction_lag_s < 2.0) {
            return Err(Error::invalid_argument(format!(
                "human_reaction_lag_s must lie in (0.5, 2.0) so the lag falls inside the masked span, got {}",
                self.human_reaction_lag_s
            )));
        }
        if self.human_gain < 0.0 {
            return Err(Error::invalid_argument("human_gain must be >= 0"));
        }
        if self.noise_std < 0.0 {
            return Err(Error::invalid_argument("noise_std must be >= 0"));
        }
        let b = &self.burst;
        if !(b.rise_s > 0.0 && b.fall_s > 0.0 && b.hold_min_s > 0.0) {
            return Err(Error::invalid_argument("burst durations must be positive"));
        }
        if b.hold_max_s < b.hold_min_s {
            return Err(Error::invalid_argument(
                "burst hold_max_s must be >= hold_min_s",
            ));
        }
        if !(b.peak_velocity > 0.0) {
            return Err(Error::invalid_argument("peak_velocity must be positive"));
        }
        Ok(())
    }
}

struct PlannedEvent {
    event_type: EventType,
    start_s: f64,
    hold_s: f64,
}

impl PlannedEvent {
    fn burst_len_s(&self, shape: &BurstShape) -> f64 {
        shape.rise_s + self.hold_s + shape.fall_s
    }

    /// Trapezoid value at absolute time `t`, magnitude 1.
    fn profile(&self, t: f64, shape: &BurstShape) -> f64 {
        let dt = t - self.start_s;
        let len = self.burst_len_s(shape);
        if dt < 0.0 || dt > len {
            0.0
        } else if dt < shape.rise_s {
            dt / shape.rise_s
        } else if dt <= shape.rise_s + self.hold_s {
            1.0
        } else {
            (len - dt) / shape.fall_s
        }
    }
}

pub(crate) struct RawSim {
    pub depth: Vec<f64>,
    pub lin_vel: Vec<f64>,
    pub ang_vel: Vec<f64>,
    pub truth: GroundTruth,
}

/// Append one shuffled block of event types. Blocks keep forward/backward
/// counts equal (plus turns when enabled) so the integrated depth does not
/// drift away over a long run.
fn extend_types(types: &mut Vec<EventType>, rotation: bool, rng: &mut ChaCha8Rng) {
    let block: &[EventType] = if rotation {
        &[
            EventType::Forward,
            EventType::Backward,
            EventType::TurnLeft,
            EventType::TurnRight,
        ]
    } else {
        &[EventType::Forward, EventType::Backward]
    };
    let mut b = block.to_vec();
    for i in (1..b.len()).rev() {
        let j = rng.random_range(0..=i);
        b.swap(i, j);
    }
    types.extend(b);
}

pub(crate) fn simulate_raw(cfg: &SimConfig) -> Result<RawSim> {
    cfg.validate()?;
    let dt = 1.0 / cfg.sample_rate_hz;
    let frames = (cfg.duration_s * cfg.sample_rate_hz).round() as usize;
    if frames == 0 {
        return Err(Error::invalid_argument(
            "duration_s too short for one frame at this sample rate",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);

    // Schedule non-overlapping bursts, each with room for the lagged
    // response to play out before the next one starts.
    let resp_window = RESPONSE_TAU_S * RESPONSE_WINDOW_TAUS;
    let mut types: Vec<EventType> = Vec::new();
    let mut events: Vec<PlannedEvent> = Vec::new();
    let mut cursor = WARMUP_S;
    if cfg.event_rate_per_min > 0.0 {
        let base_gap = 60.0 / cfg.event_rate_per_min;
        loop {
            while types.len() <= events.len() {
                extend_types(&mut types, cfg.rotation_bursts, &mut rng);
            }
            let hold_s = if cfg.burst.hold_max_s > cfg.burst.hold_min_s {
                rng.random_range(cfg.burst.hold_min_s..cfg.burst.hold_max_s)
            } else {
                cfg.burst.hold_min_s
            };
            let event = PlannedEvent {
                event_type: types[events.len()],
                start_s: cursor,
                hold_s,
            };
            let len = event.burst_len_s(&cfg.burst);
            if cursor + len + cfg.human_reaction_lag_s + resp_window + 0.5 > cfg.duration_s {
                break;
            }
            let gap = base_gap * rng.random_range(0.8..1.2);
            cursor = (cursor + gap).max(cursor + len + cfg.human_reaction_lag_s + resp_window + 0.5);
            events.push(event);
        }
    }

    // Velocity channels.
    let mut lin_vel = vec![0.0f64; frames];
    let mut ang_vel = vec![0.0f64; frames];
    for e in &events {
        let sign = match e.event_type {
            EventType::Forward | EventType::TurnLeft => 1.0,
            EventType::Backward | EventType::TurnRight => -1.0,
        };
        let len = e.burst_len_s(&cfg.burst);
        let first = (e.start_s * cfg.sample_rate_hz).floor() as usize;
        let last = (((e.start_s + len) * cfg.sample_rate_hz).ceil() as usize).min(frames - 1);
        for i in first..=last {
            let v = sign * cfg.burst.peak_velocity * e.profile(i as f64 * dt, &cfg.burst);
            if e.event_type.moves_along_depth() {
                lin_vel[i] += v;
            } else {
                ang_vel[i] += v;
            }
        }
    }

    // Depth: integral of robot motion plus lagged human responses plus
    // measurement noise. Forward velocity shrinks the distance.
    let mut kinematic = vec![0.0f64; frames];
    let mut acc = 0.0;
    for i in 0..frames {
        acc += lin_vel[i] * dt;
        kinematic[i] = acc;
    }

    let mut causal_frames = vec![false; frames];
    let mut response = vec![0.0f64; frames];
    for e in &events {
        if !e.event_type.moves_along_depth() || cfg.human_gain == 0.0 {
            continue;
        }
        let len = e.burst_len_s(&cfg.burst);
        // Integrated displacement magnitude of the burst.
        let displacement = cfg.burst.peak_velocity * (e.hold_s + 0.5 * (cfg.burst.rise_s + cfg.burst.fall_s));
        let amp = cfg.human_gain * displacement;
        // The human reacts after a forward burst has ended, but as soon as a
        // backward burst begins (both with the same lag).
        let (trigger_s, sign) = match e.event_type {
            EventType::Forward => (e.start_s + len + cfg.human_reaction_lag_s, 1.0),
            EventType::Backward => (e.start_s + cfg.human_reaction_lag_s, -1.0),
            _ => unreachable!(),
        };
        let first = (trigger_s * cfg.sample_rate_hz).ceil() as usize;
        for i in first..frames {
            let elapsed = i as f64 * dt - trigger_s;
            response[i] += sign * amp * (1.0 - (-elapsed / RESPONSE_TAU_S).exp());
            if elapsed <= resp_window {
                causal_frames[i] = true;
            }
        }
    }

    let noise = Normal::new(0.0, cfg.noise_std.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::invalid_argument(e.to_string()))?;
    let mut depth = vec![0.0f64; frames];
    for i in 0..frames {
        let eps = if cfg.noise_std > 0.0 {
            noise.sample(&mut rng)
        } else {
            0.0
        };
        depth[i] = INITIAL_DEPTH - kinematic[i] + response[i] + eps;
    }

    let frame_of = |s: f64| ((s * cfg.sample_rate_hz).round() as usize).min(frames - 1);
    let truth_events = events
        .iter()
        .enumerate()
        .map(|(id, e)| SimEvent {
            id,
            event_type: e.event_type,
            start_frame: frame_of(e.start_s),
            end_frame: frame_of(e.start_s + e.burst_len_s(&cfg.burst)),
            responsive: e.event_type.moves_along_depth() && cfg.human_gain > 0.0,
        })
        .collect();

    Ok(RawSim {
        depth,
        lin_vel,
        ang_vel,
        truth: GroundTruth {
            events: truth_events,
            causal_frames,
        },
    })
}

/// Generate one synthetic interaction: a normalized trajectory (depth
/// observation; linear and angular velocity actions) plus the planted ground
/// truth. Deterministic given the seed.
pub fn simulate_interaction<R: Real>(cfg: &SimConfig) -> Result<(Trajectory<R>, GroundTruth)> {
    let raw = simulate_raw(cfg)?;
    let depth_n = normalize_depth(&raw.depth)?;
    let lin_n = normalize_actions(&raw.lin_vel, cfg.burst.peak_velocity)?;
    let ang_n = normalize_actions(&raw.ang_vel, cfg.burst.peak_velocity)?;
    let observations = depth_n.into_iter().map(|d| vec![real::<R>(d)]).collect();
    let actions = lin_n
        .into_iter()
        .zip(ang_n)
        .map(|(l, a)| vec![real::<R>(l), real::<R>(a)])
        .collect();
    let traj = Trajectory::new(cfg.sample_rate_hz, observations, actions)?;
    Ok((traj, raw.truth))
}

/// Peak attribution span in trajectory frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeakSpan {
    pub anchor_t: usize,
    pub window_start_t: usize,
    pub window_end_t: usize,
}

impl<R: Real> From<&TePeak<R>> for PeakSpan {
    fn from(p: &TePeak<R>) -> Self {
        PeakSpan {
            anchor_t: p.anchor_t,
            window_start_t: p.window_start_t,
            window_end_t: p.window_end_t,
        }
    }
}

/// Detection quality against the planted ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionMetrics {
    pub recall: f64,
    pub precision: f64,
    pub matched_events: usize,
    pub responsive_events: usize,
    pub matched_peaks: usize,
    pub total_peaks: usize,
    /// Fraction of peaks whose window overlaps a turn-only event.
    pub turn_overlap_fraction: f64,
}

fn spans_overlap(a_start: usize, a_end: usize, b_start: usize, b_end: usize) -> bool {
    a_start <= b_end && b_start <= a_end
}

/// Match peaks against planted events.
///
/// A peak matches an event when its attributed action window overlaps the
/// event's frames extended by `tolerance_frames` on both sides; each event
/// absorbs at most one peak. Recall is over events with a depth response;
/// precision is matched peaks over all peaks. Conventions for empty sides:
/// zero peaks give precision 1.0, zero responsive events give recall 1.0
/// (both vacuous).
pub fn evaluate_detection(
    peaks: &[PeakSpan],
    truth: &GroundTruth,
    tolerance_frames: usize,
) -> DetectionMetrics {
    let responsive: Vec<&SimEvent> = truth.events.iter().filter(|e| e.responsive).collect();
    let mut event_matched = vec![false; responsive.len()];
    let mut matched_peaks = 0usize;
    let mut turn_overlaps = 0usize;

    for peak in peaks {
        let hit = responsive.iter().enumerate().find(|(i, e)| {
            !event_matched[*i]
                && spans_overlap(
                    peak.window_start_t,
                    peak.window_end_t,
                    e.start_frame.saturating_sub(tolerance_frames),
                    e.end_frame + tolerance_frames,
                )
        });
        if let Some((i, _)) = hit {
            event_matched[i] = true;
            matched_peaks += 1;
        }
        if truth.events.iter().any(|e| {
            e.event_type.is_turn()
                && spans_overlap(
                    peak.window_start_t,
                    peak.window_end_t,
                    e.start_frame,
                    e.end_frame,
                )
        }) {
            turn_overlaps += 1;
        }
    }

    let matched_events = event_matched.iter().filter(|&&m| m).count();
    let recall = if responsive.is_empty() {
        1.0
    } else {
        matched_events as f64 / responsive.len() as f64
    };
    let precision = if peaks.is_empty() {
        1.0
    } else {
        matched_peaks as f64 / peaks.len() as f64
    };
    let turn_overlap_fraction = if peaks.is_empty() {
        0.0
    } else {
        turn_overlaps as f64 / peaks.len() as f64
    };
    DetectionMetrics {
        recall,
        precision,
        matched_events,
        responsive_events: responsive.len(),
        matched_peaks,
        total_peaks: peaks.len(),
        turn_overlap_fraction,
    }
}

/// Convenience wrapper over [`evaluate_detection`] for in-memory peaks.
pub fn evaluate_te_peaks<R: Real>(
    peaks: &[TePeak<R>],
    truth: &GroundTruth,
    tolerance_frames: usize,
) -> DetectionMetrics {
    let spans: Vec<PeakSpan> = peaks.iter().map(PeakSpan::from).collect();
    evaluate_detection(&spans, truth, tolerance_frames)
}
