//! Shared helpers for unit tests. The DFT routines here are deliberately
//! direct (no shared code with the library's spectral paths) so they can act
//! as independent oracles.

use crate::audio_io::AudioClip;

/// Mono sine at `freq` Hz.
pub fn sine_clip(freq: f64, rate: u32, duration_s: f64, amplitude: f64) -> AudioClip {
    let n = (duration_s * rate as f64).round() as usize;
    let samples: Vec<f64> = (0..n)
        .map(|i| amplitude * (2.0 * std::f64::consts::PI * freq * i as f64 / rate as f64).sin())
        .collect();
    AudioClip::mono(samples, rate).unwrap()
}

/// Peak frequency by direct DFT scan over [f_lo, f_hi] with a Hann window;
/// O(N * steps), used as the frequency oracle.
pub fn dense_dft_peak(samples: &[f64], rate: u32, f_lo: f64, f_hi: f64) -> f64 {
    let n = samples.len();
    let window: Vec<f64> = (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect();
    let steps = 2400;
    let mut best = (f_lo, f64::MIN);
    for s in 0..=steps {
        let f = f_lo + (f_hi - f_lo) * s as f64 / steps as f64;
        let w = 2.0 * std::f64::consts::PI * f / rate as f64;
        let (mut re, mut im) = (0.0f64, 0.0f64);
        for i in 0..n {
            let v = samples[i] * window[i];
            re += v * (w * i as f64).cos();
            im -= v * (w * i as f64).sin();
        }
        let mag = re * re + im * im;
        if mag > best.1 {
            best = (f, mag);
        }
    }
    best.0
}

/// Rectangular-window power spectrum via a direct complex FFT (radix-agnostic
/// Bluestein fallback is not needed; rustfft handles arbitrary sizes).
pub fn power_spectrum(samples: &[f64]) -> Vec<f64> {
    use rustfft::num_complex::Complex;
    let n = samples.len();
    let mut buf: Vec<Complex<f64>> = samples.iter().map(|&v| Complex::new(v, 0.0)).collect();
    rustfft::FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf[..n / 2 + 1].iter().map(|c| c.norm_sqr()).collect()
}
