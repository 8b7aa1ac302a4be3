//! Measured frequency response of the zero-phase low-pass.

use te_influence::te::lowpass_filter;

/// Amplitude of a pure sinusoid over an integer number of periods.
fn amplitude(samples: &[f64]) -> f64 {
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let power = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / samples.len() as f64;
    (2.0 * power).sqrt()
}

#[test]
fn cutoff_sinusoid_attenuates_to_half_amplitude() {
    // At the cutoff a Butterworth pass leaves 1/sqrt(2); the forward plus
    // backward pass squares that to 0.5.
    let (fs, fc) = (10.0, 0.5);
    let n = 600;
    let x: Vec<f64> = (0..n)
        .map(|i| (2.0 * std::f64::consts::PI * fc * i as f64 / fs).sin())
        .collect();
    let y = lowpass_filter(&x, fc, fs).unwrap();
    assert_eq!(y.len(), n);
    // 400 samples = 20 whole periods, away from both edges.
    let ratio = amplitude(&y[100..500]) / amplitude(&x[100..500]);
    assert!(
        (ratio - 0.5).abs() < 0.05 * 0.5,
        "amplitude ratio {ratio} should be 0.5 within 5%"
    );
}

#[test]
fn passband_sinusoid_is_preserved() {
    let (fs, fc) = (10.0, 0.5);
    let f = 0.05; // deep in the passband
    let n = 1200;
    let x: Vec<f64> = (0..n)
        .map(|i| (2.0 * std::f64::consts::PI * f * i as f64 / fs).sin())
        .collect();
    let y = lowpass_filter(&x, fc, fs).unwrap();
    let ratio = amplitude(&y[200..1000]) / amplitude(&x[200..1000]);
    assert!(ratio > 0.99, "passband ratio {ratio}");
}

#[test]
fn stopband_sinusoid_is_suppressed() {
    let (fs, fc) = (10.0, 0.5);
    let f = 2.5; // 5x the cutoff
    let n = 600;
    let x: Vec<f64> = (0..n)
        .map(|i| (2.0 * std::f64::consts::PI * f * i as f64 / fs).sin())
        .collect();
    let y = lowpass_filter(&x, fc, fs).unwrap();
    let ratio = amplitude(&y[100..500]) / amplitude(&x[100..500]);
    assert!(ratio < 0.01, "stopband ratio {ratio}");
}
