//! Band-limited resampling with a polyphase windowed-sinc kernel: Hann
//! window, 16 zero crossings per side, cutoff at 0.95 * min(Nyquist_in,
//! Nyquist_out). Phase rows are linearly interpolated, which keeps the
//! interpolation error well below the filter's own stopband leakage.

use super::{AudioClip, AudioError};

const ZERO_CROSSINGS: f64 = 16.0;
const PHASE_COUNT: usize = 512;

/// Resamples a mono clip to `target_rate_hz`. Output length is
/// round(input_length * target / source); equal rates return the input
/// unchanged.
pub fn resample(clip: &AudioClip, target_rate_hz: u32) -> Result<AudioClip, AudioError> {
    if !clip.is_mono() {
        return Err(AudioError::NotMono);
    }
    if target_rate_hz < 8000 {
        return Err(AudioError::InvalidSampleRate(target_rate_hz));
    }
    if target_rate_hz == clip.sample_rate_hz {
        return Ok(clip.clone());
    }
    let step = clip.sample_rate_hz as f64 / target_rate_hz as f64;
    let out_len = (clip.samples.len() as f64 / step).round() as usize;
    let samples = resample_by_step(&clip.samples, step, out_len);
    AudioClip::mono(samples, target_rate_hz)
}

/// Core interpolator: output sample n is taken at input position n * step.
/// Shared with the pitch-shift path, which relabels the rate afterwards and
/// so may use steps whose implied rate would be rejected by [`resample`].
pub(crate) fn resample_by_step(input: &[f64], step: f64, out_len: usize) -> Vec<f64> {
    let kernel = SincKernel::new(step);
    let mut out = Vec::with_capacity(out_len);
    for n in 0..out_len {
        let pos = n as f64 * step;
        out.push(kernel.interpolate(input, pos));
    }
    out
}

struct SincKernel {
    /// rows[q][t] = h(q/PHASE_COUNT + taps_half - 1 - t), each row
    /// normalized to unit sum so DC gain is exactly 1 for every phase.
    rows: Vec<Vec<f64>>,
    taps_half: usize,
}

impl SincKernel {
    fn new(step: f64) -> Self {
        // passband edge in cycles per input sample
        let cutoff = 0.475 * (1.0 / step).min(1.0);
        let half_width = ZERO_CROSSINGS / (2.0 * cutoff);
        let taps_half = half_width.ceil() as usize;
        let taps = 2 * taps_half;

        let mut rows = Vec::with_capacity(PHASE_COUNT + 1);
        for q in 0..=PHASE_COUNT {
            let frac = q as f64 / PHASE_COUNT as f64;
            let mut row: Vec<f64> = (0..taps)
                .map(|t| windowed_sinc(frac + taps_half as f64 - 1.0 - t as f64, cutoff, half_width))
                .collect();
            let sum: f64 = row.iter().sum();
            if sum.abs() > 1e-12 {
                for v in &mut row {
                    *v /= sum;
                }
            }
            rows.push(row);
        }
        Self { rows, taps_half }
    }

    fn interpolate(&self, input: &[f64], pos: f64) -> f64 {
        let i0 = pos.floor();
        let frac = pos - i0;
        let phase = frac * PHASE_COUNT as f64;
        let q = (phase.floor() as usize).min(PHASE_COUNT - 1);
        let alpha = phase - q as f64;
        let row0 = &self.rows[q];
        let row1 = &self.rows[q + 1];

        let base = i0 as isize - self.taps_half as isize + 1;
        let taps = row0.len();
        let n = input.len() as isize;

        let mut acc = 0.0;
        if base >= 0 && base + taps as isize <= n {
            // interior fast path: contiguous slice, no bounds branches
            let seg = &input[base as usize..base as usize + taps];
            for t in 0..taps {
                let w = row0[t] + alpha * (row1[t] - row0[t]);
                acc += w * seg[t];
            }
        } else {
            for t in 0..taps {
                let j = base + t as isize;
                if j >= 0 && j < n {
                    let w = row0[t] + alpha * (row1[t] - row0[t]);
                    acc += w * input[j as usize];
                }
            }
        }
        acc
    }
}

fn windowed_sinc(x: f64, cutoff: f64, half_width: f64) -> f64 {
    if x.abs() >= half_width {
        return 0.0;
    }
    let hann = 0.5 * (1.0 + (std::f64::consts::PI * x / half_width).cos());
    2.0 * cutoff * sinc(2.0 * cutoff * x) * hann
}

fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-12 {
        1.0
    } else {
        let pu = std::f64::consts::PI * u;
        pu.sin() / pu
    }
}
