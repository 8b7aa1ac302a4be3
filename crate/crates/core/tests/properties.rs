//! Property tests for the spec-level invariants.

use proptest::prelude::*;
use te_influence::cluster::{dtw_distance, kmeans_dtw};
use te_influence::data::{
    apply_mask, depth_from_histogram, extract_windows, normalize_actions, MaskSpec, Trajectory,
    WindowConfig,
};
use te_influence::io::{load_trajectory, save_trajectory, TrajectorySchema};
use te_influence::mlp::GaussianPrediction;
use te_influence::sim::{simulate_interaction, SimConfig};
use te_influence::te::{
    differential_entropy, find_positive_peaks, lowpass_filter, transfer_entropy_at,
};

fn unit_vec(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..=1.0, len)
}

fn trajectory(min_len: usize, max_len: usize) -> impl Strategy<Value = Trajectory<f64>> {
    (min_len..max_len)
        .prop_flat_map(|t| {
            (
                prop::collection::vec(0.0f64..=1.0, t),
                prop::collection::vec(0.0f64..=1.0, t),
                prop::collection::vec(0.0f64..=1.0, t),
            )
        })
        .prop_map(|(depth, lin, ang)| {
            let obs = depth.into_iter().map(|d| vec![d]).collect();
            let act = lin
                .into_iter()
                .zip(ang)
                .map(|(l, a)| vec![l, a])
                .collect();
            Trajectory::new(10.0, obs, act).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn normalize_actions_is_affine_and_order_preserving(
        mut vals in prop::collection::vec(-2.0f64..2.0, 2..40),
        v_max in 0.1f64..5.0,
    ) {
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let out = normalize_actions(&vals, v_max).unwrap();
        for pair in out.windows(2) {
            prop_assert!(pair[0] <= pair[1]);
        }
        // Zero always maps to exactly 0.5.
        let zero = normalize_actions(&[0.0], v_max).unwrap();
        prop_assert_eq!(zero[0], 0.5);
        // Affine inside the clamp region.
        let inside: Vec<f64> = vals.iter().cloned().filter(|v| v.abs() <= v_max).collect();
        let mapped = normalize_actions(&inside, v_max).unwrap();
        for (v, m) in inside.iter().zip(&mapped) {
            prop_assert!((m - (0.5 + 0.5 * v / v_max)).abs() < 1e-12);
        }
    }

    #[test]
    fn window_extraction_counts_and_overlap(traj in trajectory(21, 60)) {
        let cfg = WindowConfig::default();
        let samples = extract_windows(&traj, &cfg).unwrap();
        prop_assert_eq!(samples.len(), traj.len() - cfg.window_len);
        for pair in samples.windows(2) {
            // Consecutive samples share all but one frame.
            prop_assert_eq!(pair[0].anchor_t + 1, pair[1].anchor_t);
            prop_assert_eq!(
                &pair[0].obs_window[1..],
                &pair[1].obs_window[..cfg.window_len - 1]
            );
        }
    }

    #[test]
    fn masking_is_idempotent(
        traj in trajectory(21, 40),
        offsets in prop::collection::btree_set(0usize..20, 0..20),
        mask_value in 0.0f64..=1.0,
    ) {
        let cfg = WindowConfig::default();
        let sample = extract_windows(&traj, &cfg).unwrap().remove(0);
        let mask = MaskSpec::new(offsets, mask_value);
        let once = apply_mask(&sample, &mask).unwrap();
        let twice = apply_mask(&once, &mask).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn histogram_mode_stays_in_range(
        vals in prop::collection::vec(0.0f64..10.0, 1..200),
        n_bins in 1usize..40,
    ) {
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let d = depth_from_histogram(&vals, n_bins).unwrap();
        prop_assert!(d >= min && d <= max);
    }

    #[test]
    fn te_is_entropy_difference(
        sigma_full in 1e-3f64..1e3,
        sigma_masked in 1e-3f64..1e3,
    ) {
        let full = GaussianPrediction::new(0.1, sigma_full).unwrap();
        let masked = GaussianPrediction::new(0.4, sigma_masked).unwrap();
        let te = transfer_entropy_at(&full, &masked);
        let via_entropy = differential_entropy(&masked) - differential_entropy(&full);
        prop_assert!((te - via_entropy).abs() < 1e-12);
        prop_assert_eq!(transfer_entropy_at(&full, &full), 0.0);
    }

    #[test]
    fn lowpass_is_linear(
        x in unit_vec(4..80),
        scale_a in -2.0f64..2.0,
        scale_b in -2.0f64..2.0,
    ) {
        let y: Vec<f64> = x.iter().rev().cloned().collect();
        let combined: Vec<f64> = x
            .iter()
            .zip(&y)
            .map(|(xv, yv)| scale_a * xv + scale_b * yv)
            .collect();
        let fx = lowpass_filter(&x, 0.5, 10.0).unwrap();
        let fy = lowpass_filter(&y, 0.5, 10.0).unwrap();
        let fc = lowpass_filter(&combined, 0.5, 10.0).unwrap();
        for i in 0..x.len() {
            prop_assert!((fc[i] - (scale_a * fx[i] + scale_b * fy[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn peak_locations_are_shift_invariant(
        values in prop::collection::vec(0.01f64..1.0, 3..60),
        shift in 0.0f64..5.0,
    ) {
        let shifted: Vec<f64> = values.iter().map(|v| v + shift).collect();
        let a = find_positive_peaks(&values, 2, 0.0).unwrap();
        let b = find_positive_peaks(&shifted, 2, 0.0).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn dtw_basic_metric_properties(
        a in unit_vec(1..12),
        b in unit_vec(1..12),
    ) {
        let dab = dtw_distance(&a, &b).unwrap();
        let dba = dtw_distance(&b, &a).unwrap();
        prop_assert!(dab >= 0.0);
        prop_assert!((dab - dba).abs() < 1e-12);
        prop_assert_eq!(dtw_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn trajectory_csv_round_trips(traj in trajectory(2, 30)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let schema = TrajectorySchema::default();
        save_trajectory(&path, &traj, &schema).unwrap();
        let loaded: Trajectory<f64> = load_trajectory(&path, &schema).unwrap();
        prop_assert_eq!(loaded.len(), traj.len());
        for t in 0..traj.len() {
            for (a, b) in traj.observations()[t].iter().zip(&loaded.observations()[t]) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            for (a, b) in traj.actions()[t].iter().zip(&loaded.actions()[t]) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn simulated_trajectories_satisfy_data_invariants(
        seed in 0u64..1000,
        duration in 20.0f64..90.0,
    ) {
        let cfg = SimConfig {
            duration_s: duration,
            rng_seed: seed,
            ..SimConfig::default()
        };
        // Trajectory::new validates lengths, channel widths and [0,1] range;
        // simulation must always satisfy them.
        let (traj, truth) = simulate_interaction::<f64>(&cfg).unwrap();
        prop_assert_eq!(traj.len(), (duration * 10.0).round() as usize);
        for pair in truth.events.windows(2) {
            prop_assert!(pair[0].end_frame < pair[1].start_frame);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn kmeans_inertia_never_rises(
        seqs in prop::collection::vec(unit_vec(6..7), 6..14),
        seed in 0u64..50,
    ) {
        let k = 2;
        let result = kmeans_dtw(&seqs, k, 1, seed).unwrap();
        for pair in result.inertia_trace.windows(2) {
            prop_assert!(pair[1] <= pair[0] + 1e-12);
        }
    }
}
