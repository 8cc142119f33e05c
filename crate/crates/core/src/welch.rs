//! Welch averaged periodogram (Hann window, 50% overlap).

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

/// Shortest segment accepted.
pub const MIN_SEGMENT_LEN: usize = 16;

/// Two-sided spectral density estimate of a real, uniformly sampled series.
#[derive(Debug, Clone, PartialEq)]
pub struct Welch {
    /// Angular bin frequencies `2πk/(L·dt)`, `k = 1 .. L/2 − 1`.
    pub freqs: Vec<f64>,
    /// Density normalized so that white noise of variance `1/dt` reads 1.
    pub psd: Vec<f64>,
    pub segment_len: usize,
    pub n_segments: usize,
    /// Fractional standard error of every returned bin.
    pub rel_std_err: f64,
}

pub fn hann(len: usize) -> Vec<f64> {
    (0..len).map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos()).collect()
}

/// Largest power-of-two segment that yields at least `min_segments`
/// half-overlapping segments from `n` samples.
pub fn segment_len_for(n: usize, min_segments: usize) -> Option<usize> {
    if min_segments == 0 {
        return None;
    }
    let mut len = MIN_SEGMENT_LEN;
    if (min_segments + 1) * (len / 2) > n {
        return None;
    }
    while (min_segments + 1) * len <= n {
        len *= 2;
    }
    Some(len)
}

/// Welch estimate with segment length `len` (a power of two). DC and
/// Nyquist bins are dropped; every remaining bin has the same statistics.
pub fn welch(series: &[f64], dt: f64, len: usize) -> Welch {
    assert!(len.is_power_of_two() && len >= MIN_SEGMENT_LEN && series.len() >= len);
    let window = hann(len);
    let power: f64 = window.iter().map(|w| w * w).sum();
    let hop = len / 2;
    let n_segments = (series.len() - len) / hop + 1;

    let fft = FftPlanner::<f64>::new().plan_fft_forward(len);
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    let mut acc = vec![0.0; len / 2 - 1];
    for s in 0..n_segments {
        let seg = &series[s * hop..s * hop + len];
        for ((b, x), w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex64::new(x * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, z) in acc.iter_mut().zip(&buf[1..len / 2]) {
            *a += z.norm_sqr();
        }
    }
    let norm = dt / (power * n_segments as f64);
    let psd = acc.into_iter().map(|a| a * norm).collect();
    let freqs = (1..len / 2).map(|k| 2.0 * PI * k as f64 / (len as f64 * dt)).collect();
    Welch { freqs, psd, segment_len: len, n_segments, rel_std_err: relative_std_err(&window, n_segments) }
}

/// `√[(1 + 2ρ²(1 − 1/K)) / K]`, with ρ the normalized overlap of
/// neighbouring windows (1/6 for Hann at 50%).
pub fn relative_std_err(window: &[f64], n_segments: usize) -> f64 {
    let hop = window.len() / 2;
    let power: f64 = window.iter().map(|w| w * w).sum();
    let overlap: f64 = window[..window.len() - hop].iter().zip(&window[hop..]).map(|(a, b)| a * b).sum();
    let rho = (overlap / power).powi(2);
    let k = n_segments as f64;
    let correction = if n_segments > 1 { 2.0 * rho * (1.0 - 1.0 / k) } else { 0.0 };
    ((1.0 + correction) / k).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn hann_overlap_correlation() {
        let w = hann(1024);
        let e1 = relative_std_err(&w, 1000);
        // Neighbouring periodic Hann windows at 50% overlap correlate by 1/6.
        let expected = ((1.0 + 2.0 / 36.0 * (1.0 - 1e-3)) / 1000.0f64).sqrt();
        assert!((e1 - expected).abs() / expected < 1e-3);
    }

    #[test]
    fn white_noise_reads_unit_density() {
        let dt: f64 = 1e-3;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x: Vec<f64> = (0..200_000)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z / dt.sqrt()
            })
            .collect();
        let w = welch(&x, dt, 256);
        let mean = w.psd.iter().sum::<f64>() / w.psd.len() as f64;
        assert!((mean - 1.0).abs() < 0.01);
        let worst = w.psd.iter().map(|p| (p - 1.0).abs() / w.rel_std_err).fold(0.0, f64::max);
        assert!(worst < 5.0);
    }

    #[test]
    fn sinusoid_lands_in_its_bin() {
        let dt = 1.0;
        let len = 64;
        let k0 = 5;
        let x: Vec<f64> = (0..4096).map(|n| (2.0 * PI * k0 as f64 * n as f64 / len as f64).cos()).collect();
        let w = welch(&x, dt, len);
        let peak = w.psd.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(peak + 1, k0);
    }

    #[test]
    fn segment_length_choice() {
        assert_eq!(segment_len_for(1000, 8), Some(128));
        assert_eq!(segment_len_for(100, 64), None);
        let len = segment_len_for(1 << 20, 64).unwrap();
        assert!(len.is_power_of_two());
        assert!((1usize << 20) >= 65 * len / 2);
        assert!((1usize << 20) < 65 * len);
    }
}
