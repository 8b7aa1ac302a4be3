//! Scratch diagnostics for end-to-end detection (ignored by default).

use te_influence::data::{extract_windows, MaskSpec, WindowConfig};
use te_influence::mlp::{train, TrainConfig};
use te_influence::sim::{evaluate_te_peaks, simulate_interaction, EventType, SimConfig};
use te_influence::te::{compute_te_series, find_te_peaks, lowpass_filter, predict_pair};

#[test]
#[ignore]
fn probe_detection_quality() {
    for (human_gain, noise_std) in [(1.5, 0.05), (2.0, 0.08)] {
        for seed in [1u64, 2, 3] {
            let sim_cfg = SimConfig {
                duration_s: 900.0,
                rng_seed: seed,
                human_gain,
                noise_std,
                ..SimConfig::default()
            };
            let (traj, truth) = simulate_interaction::<f64>(&sim_cfg).unwrap();
            let window = WindowConfig::default();
            let samples = extract_windows(&traj, &window).unwrap();
            let mask = MaskSpec::from_window(&window, 0.0);
            let train_cfg = TrainConfig {
                epochs: 200,
                rng_seed: seed,
                patience: 0,
                ..TrainConfig::default()
            };
            let out = train(&samples, &mask, &train_cfg).unwrap();
            let series = compute_te_series(&out.model, &samples, &mask).unwrap();
            let smoothed = series
                .with_values(lowpass_filter(series.values(), 0.5, traj.sample_rate_hz()).unwrap())
                .unwrap();
            let peaks = find_te_peaks(&smoothed, &samples, &window, 10, 0.05).unwrap();
            let m = evaluate_te_peaks(&peaks, &truth, 10);
            eprintln!(
                "gain={human_gain} noise={noise_std} seed={seed}: events={} peaks={} recall={:.3} precision={:.3} turn_frac={:.3}",
                truth.events.len(),
                m.total_peaks,
                m.recall,
                m.precision,
                m.turn_overlap_fraction
            );

            // Zone statistics: quiet vs depth-event span vs turn span.
            let mut zones: [(f64, f64, f64, usize); 3] = [(0.0, 0.0, 0.0, 0); 3];
            for (i, &anchor) in smoothed.anchors().iter().enumerate() {
                let w_start = anchor - window.mask_start_offset;
                let w_end = anchor - window.mask_end_offset;
                let overlap = |s: usize, e: usize| w_start <= e && s <= w_end;
                let zone = if truth.events.iter().any(|e| {
                    e.event_type.moves_along_depth() && overlap(e.start_frame, e.end_frame + 28)
                }) {
                    1
                } else if truth
                    .events
                    .iter()
                    .any(|e| e.event_type.is_turn() && overlap(e.start_frame, e.end_frame))
                {
                    2
                } else {
                    0
                };
                let (full, masked) = predict_pair(&out.model, &samples[i], &mask).unwrap();
                zones[zone].0 += smoothed.values()[i];
                zones[zone].1 += masked.std();
                zones[zone].2 += full.std();
                zones[zone].3 += 1;
            }
            for (name, z) in ["quiet", "depth-event", "turn"].iter().zip(&zones) {
                let n = z.3 as f64;
                eprintln!(
                    "  zone {name:12} n={:5} mean_te={:.4} mean_sigma_masked={:.5} mean_sigma_full={:.5}",
                    z.3,
                    z.0 / n,
                    z.1 / n,
                    z.2 / n
                );
            }

            // Where do the peaks land?
            let mut on_depth = 0;
            let mut on_turn = 0;
            let mut elsewhere = 0;
            for p in &peaks {
                let overlap = |s: usize, e: usize| p.window_start_t <= e && s <= p.window_end_t;
                if truth.events.iter().any(|e| {
                    e.event_type.moves_along_depth() && overlap(e.start_frame, e.end_frame + 28)
                }) {
                    on_depth += 1;
                } else if truth
                    .events
                    .iter()
                    .any(|e| e.event_type.is_turn() && overlap(e.start_frame, e.end_frame))
                {
                    on_turn += 1;
                } else {
                    elsewhere += 1;
                }
            }
            eprintln!("  peaks: on_depth_event={on_depth} on_turn={on_turn} elsewhere={elsewhere}");
            let _ = EventType::Forward;
        }
    }
}
