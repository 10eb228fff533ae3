//! The privacy mechanism: pitch shifting and pitch-preserving tempo change,
//! plus spec inversion for reversibility attacks. Tempo change is WSOLA
//! (waveform-similarity overlap-add); pitch shift is a resample-and-relabel
//! rate change followed by a compensating time stretch, both folded into one
//! WSOLA pass.

use thiserror::Error;

use crate::audio_io::{resample_by_step, AudioClip, AudioError};

#[derive(Debug, Error)]
pub enum DspError {
    #[error("pitch {0} semitones outside [-24, 24]")]
    PitchOutOfRange(f64),
    #[error("tempo {0}% outside [25, 400]")]
    TempoOutOfRange(f64),
    #[error("speed ratio {0} outside [0.25, 4]")]
    SpeedOutOfRange(f64),
    #[error("rate ratio {0} outside [0.25, 4]")]
    RatioOutOfRange(f64),
    #[error("clip of {samples} samples is shorter than one {needed}-sample analysis frame")]
    ClipTooShort { samples: usize, needed: usize },
    #[error("invalid wsola config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Audio(#[from] AudioError),
}

/// A (pitch, tempo) pair: the privacy knob. `(0, 100)` is the identity.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TransformSpec {
    pub pitch_semitones: f64,
    pub tempo_percent: f64,
}

impl TransformSpec {
    pub fn new(pitch_semitones: f64, tempo_percent: f64) -> Result<Self, DspError> {
        if !pitch_semitones.is_finite() || pitch_semitones.abs() > 24.0 {
            return Err(DspError::PitchOutOfRange(pitch_semitones));
        }
        if !tempo_percent.is_finite() || !(25.0..=400.0).contains(&tempo_percent) {
            return Err(DspError::TempoOutOfRange(tempo_percent));
        }
        Ok(Self { pitch_semitones, tempo_percent })
    }

    pub fn identity() -> Self {
        Self { pitch_semitones: 0.0, tempo_percent: 100.0 }
    }

    pub fn is_identity(&self) -> bool {
        self.pitch_semitones == 0.0 && self.tempo_percent == 100.0
    }
}

/// WSOLA framing parameters. Defaults are standard speech settings: 30 ms
/// frames, half-frame synthesis hop, +-7.5 ms alignment search.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WsolaConfig {
    pub frame_ms: f64,
    pub synthesis_hop_fraction: f64,
    pub search_ms: f64,
}

impl Default for WsolaConfig {
    fn default() -> Self {
        Self { frame_ms: 30.0, synthesis_hop_fraction: 0.5, search_ms: 7.5 }
    }
}

impl WsolaConfig {
    fn validate(&self) -> Result<(), DspError> {
        if !(self.frame_ms > 0.0) {
            return Err(DspError::BadConfig(format!("frame_ms {} must be positive", self.frame_ms)));
        }
        if !(self.synthesis_hop_fraction > 0.0 && self.synthesis_hop_fraction <= 0.5) {
            return Err(DspError::BadConfig(format!(
                "synthesis_hop_fraction {} outside (0, 0.5]",
                self.synthesis_hop_fraction
            )));
        }
        if !(self.search_ms >= 0.0 && self.search_ms < self.frame_ms) {
            return Err(DspError::BadConfig(format!(
                "search_ms {} must lie in [0, frame_ms)",
                self.search_ms
            )));
        }
        Ok(())
    }
}

/// Equal-temperament mapping: s semitones -> frequency ratio 2^(s/12).
pub fn semitone_to_ratio(semitones: f64) -> f64 {
    (semitones / 12.0).exp2()
}

/// Tempo percent -> speed ratio (100 -> 1.0).
pub fn tempo_to_speed(tempo_percent: f64) -> Result<f64, DspError> {
    if !(tempo_percent > 0.0) {
        return Err(DspError::TempoOutOfRange(tempo_percent));
    }
    Ok(tempo_percent / 100.0)
}

/// Returns the spec that undoes `spec`: negated pitch, reciprocal tempo.
pub fn invert_spec(spec: &TransformSpec) -> TransformSpec {
    TransformSpec {
        pitch_semitones: -spec.pitch_semitones,
        tempo_percent: 10000.0 / spec.tempo_percent,
    }
}

/// WSOLA time-scale modification. Output duration is input / speed (to the
/// nearest sample); pitch is preserved. `speed == 1.0` returns the input
/// bit-exact.
pub fn time_stretch(clip: &AudioClip, speed: f64, cfg: &WsolaConfig) -> Result<AudioClip, DspError> {
    if !clip.is_mono() {
        return Err(AudioError::NotMono.into());
    }
    cfg.validate()?;
    if !(0.25..=4.0).contains(&speed) {
        return Err(DspError::SpeedOutOfRange(speed));
    }
    if speed == 1.0 {
        return Ok(clip.clone());
    }

    let rate = clip.sample_rate_hz as f64;
    let frame_len = ((cfg.frame_ms / 1000.0 * rate).round() as usize).max(2);
    let n_in = clip.samples.len();
    if n_in < frame_len {
        return Err(DspError::ClipTooShort { samples: n_in, needed: frame_len });
    }
    let syn_hop = ((frame_len as f64 * cfg.synthesis_hop_fraction).round() as usize).max(1);
    let ana_hop = syn_hop as f64 * speed;
    let search = (cfg.search_ms / 1000.0 * rate).round() as isize;
    let overlap = frame_len - syn_hop;

    let n_out = (n_in as f64 / speed).round() as usize;
    let window = periodic_hann(frame_len);
    let x = &clip.samples;
    let fetch = |i: isize| -> f64 {
        if i >= 0 && (i as usize) < n_in {
            x[i as usize]
        } else {
            0.0
        }
    };

    let mut out = vec![0.0f64; n_out + frame_len];
    let mut weight = vec![0.0f64; n_out + frame_len];
    let mut prev_start: isize = 0;
    let mut k = 0usize;
    loop {
        let out_pos = k * syn_hop;
        if k > 0 && out_pos >= n_out {
            break;
        }
        let nominal = (k as f64 * ana_hop).round() as isize;
        let start = if k == 0 || overlap == 0 {
            nominal
        } else {
            // align against the natural continuation of the previous frame,
            // scanning offsets outward from zero so ties resolve toward zero
            let target = prev_start + syn_hop as isize;
            let mut best_start = nominal;
            let mut best_score = f64::MIN;
            for delta in outward_offsets(search) {
                let cand = nominal + delta;
                let score = normalized_xcorr(&fetch, cand, target, overlap);
                if score > best_score {
                    best_score = score;
                    best_start = cand;
                }
            }
            best_start
        };
        for n in 0..frame_len {
            out[out_pos + n] += window[n] * fetch(start + n as isize);
            weight[out_pos + n] += window[n];
        }
        prev_start = start;
        k += 1;
    }

    out.truncate(n_out);
    for (v, &w) in out.iter_mut().zip(weight.iter()) {
        if w > 1e-3 {
            *v /= w;
        }
    }
    Ok(AudioClip::mono(out, clip.sample_rate_hz)?)
}

fn outward_offsets(search: isize) -> impl Iterator<Item = isize> {
    (0..=search).flat_map(|d| if d == 0 { vec![0] } else { vec![d, -d] })
}

fn normalized_xcorr(fetch: &impl Fn(isize) -> f64, a: isize, b: isize, len: usize) -> f64 {
    let mut dot = 0.0;
    let mut ea = 0.0;
    let mut eb = 0.0;
    for i in 0..len as isize {
        let va = fetch(a + i);
        let vb = fetch(b + i);
        dot += va * vb;
        ea += va * va;
        eb += vb * vb;
    }
    dot / (ea * eb).sqrt().max(1e-12)
}

fn periodic_hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / len as f64).cos())
        .collect()
}

/// Multiplies pitch by `ratio` and divides duration by `ratio` (resample to
/// rate/ratio, relabel at the original nominal rate).
pub fn rate_change(clip: &AudioClip, ratio: f64) -> Result<AudioClip, DspError> {
    if !clip.is_mono() {
        return Err(AudioError::NotMono.into());
    }
    if !(0.25..=4.0).contains(&ratio) {
        return Err(DspError::RatioOutOfRange(ratio));
    }
    if ratio == 1.0 {
        return Ok(clip.clone());
    }
    let out_len = (clip.samples.len() as f64 / ratio).round() as usize;
    let samples = resample_by_step(&clip.samples, ratio, out_len);
    Ok(AudioClip::mono(samples, clip.sample_rate_hz)?)
}

/// Full transform: pitch shift by `spec.pitch_semitones`, then one WSOLA pass
/// stretching by speed/pitch so the final duration is input * 100 / tempo.
/// The identity spec returns the input bit-exact.
pub fn apply_transform(clip: &AudioClip, spec: &TransformSpec, cfg: &WsolaConfig) -> Result<AudioClip, DspError> {
    if spec.is_identity() {
        return Ok(clip.clone());
    }
    let pitch_ratio = semitone_to_ratio(spec.pitch_semitones);
    let speed = tempo_to_speed(spec.tempo_percent)?;
    let shifted = rate_change(clip, pitch_ratio)?;
    time_stretch(&shifted, speed / pitch_ratio, cfg)
}

/// Frequency of the strongest bin of a Hann-windowed transform of the middle
/// 8192 samples (or the whole clip when shorter), zero-padded x4.
pub fn dominant_frequency(clip: &AudioClip) -> Result<f64, DspError> {
    use rustfft::num_complex::Complex;

    if !clip.is_mono() {
        return Err(AudioError::NotMono.into());
    }
    let n = clip.samples.len();
    if n < 2048 {
        return Err(DspError::ClipTooShort { samples: n, needed: 2048 });
    }
    let win_len = n.min(8192);
    let start = (n - win_len) / 2;
    let window = periodic_hann(win_len);
    let fft_len = 4 * win_len;

    let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); fft_len];
    for i in 0..win_len {
        buf[i] = Complex::new(clip.samples[start + i] * window[i], 0.0);
    }
    rustfft::FftPlanner::new().plan_fft_forward(fft_len).process(&mut buf);

    let mut best_bin = 0usize;
    let mut best_mag = f64::MIN;
    for (k, c) in buf.iter().take(fft_len / 2 + 1).enumerate() {
        let mag = c.norm_sqr();
        if mag > best_mag {
            best_mag = mag;
            best_bin = k;
        }
    }
    Ok(best_bin as f64 * clip.sample_rate_hz as f64 / fft_len as f64)
}
