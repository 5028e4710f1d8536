//! Excitation and forcing signals.

use std::f64::consts::PI;

/// Schroeder-phased multisine: Σ_k (A/√K)·cos(2πk t/P − πk(k−1)/K).
pub fn schroeder_sweep(t: f64, amplitude: f64, n_harmonics: usize, period: f64) -> f64 {
    multisine(t, amplitude, n_harmonics, period, |k| -PI * (k * (k - 1)) as f64 / n_harmonics as f64)
}

/// Equal-amplitude multisine with caller-chosen phases θ_k.
pub fn multisine(t: f64, amplitude: f64, n_harmonics: usize, period: f64, phase: impl Fn(usize) -> f64) -> f64 {
    let a = amplitude / (n_harmonics as f64).sqrt();
    // reduce t into one period first so large t keeps full precision
    let tau = t.rem_euclid(period) / period;
    (1..=n_harmonics).map(|k| a * (2.0 * PI * (k as f64 * tau).fract() + phase(k)).cos()).sum()
}

/// Peak-to-RMS ratio of samples.
pub fn crest_factor(samples: &[f64]) -> f64 {
    let peak = samples.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let rms = (samples.iter().map(|v| v * v).sum::<f64>() / samples.len() as f64).sqrt();
    peak / rms
}

/// Validation forcing (5 sin 30t)³.
pub fn lorenz_validation_input(t: f64) -> f64 {
    (5.0 * (30.0 * t).sin()).powi(3)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_harmonic_is_cosine() {
        for t in [0.0, 0.3, 1.7, 9.2] {
            let u = schroeder_sweep(t, 2.5, 1, 4.0);
            assert!((u - 2.5 * (2.0 * PI * t / 4.0).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn periodic() {
        for t in [0.0, 0.123, 3.3, 7.77] {
            let a = schroeder_sweep(t, 25.0, 31, 10.0);
            let b = schroeder_sweep(t + 10.0, 25.0, 31, 10.0);
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn lower_crest_factor_than_zero_phase() {
        let ts: Vec<f64> = (0..20000).map(|k| k as f64 * 10.0 / 20000.0).collect();
        let s: Vec<f64> = ts.iter().map(|t| schroeder_sweep(*t, 25.0, 31, 10.0)).collect();
        let z: Vec<f64> = ts.iter().map(|t| multisine(*t, 25.0, 31, 10.0, |_| 0.0)).collect();
        assert!(crest_factor(&s) < crest_factor(&z));
        assert!(crest_factor(&s) < 2.0);
    }
}
