//! MFCC front-end for the CNN attacker: resample to a fixed rate, Hann STFT,
//! triangular mel filterbank (HTK mel scale), log, orthonormal DCT-II, then
//! per-coefficient standardization and padding/truncation to a fixed frame
//! count so every clip yields the same feature shape.

use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::audio_io::{resample, AudioClip, AudioError};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("invalid mfcc config: {0}")]
    BadConfig(String),
    #[error("clip too short: {got_s:.3} s, need at least {need_s:.3} s")]
    ClipTooShort { got_s: f64, need_s: f64 },
    #[error("mel filter {0} has no spectral support; reduce n_mels or raise frame_len")]
    EmptyFilter(usize),
    #[error("feature matrix contains a non-finite value at ({0}, {1})")]
    NonFinite(usize, usize),
    #[error(transparent)]
    Audio(#[from] AudioError),
}

/// MFCC extraction parameters. The defaults (40 coefficients x 256 frames at
/// 22.05 kHz) are recorded in the model file via [`MfccConfig::fingerprint`]
/// so weights and features stay paired.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MfccConfig {
    pub target_rate_hz: u32,
    pub frame_len: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub n_mfcc: usize,
    pub fmin_hz: f64,
    pub fmax_hz: f64,
    pub fixed_frames: usize,
    pub log_floor: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            target_rate_hz: 22050,
            frame_len: 2048,
            hop: 512,
            n_mels: 40,
            n_mfcc: 40,
            fmin_hz: 20.0,
            fmax_hz: 11025.0,
            fixed_frames: 256,
            log_floor: 1e-10,
        }
    }
}

impl MfccConfig {
    pub fn validate(&self) -> Result<(), FeatureError> {
        if self.n_mfcc == 0 || self.n_mfcc > self.n_mels {
            return Err(FeatureError::BadConfig(format!(
                "n_mfcc {} must lie in [1, n_mels={}]",
                self.n_mfcc, self.n_mels
            )));
        }
        if !(self.fmin_hz >= 0.0 && self.fmin_hz < self.fmax_hz && self.fmax_hz <= self.target_rate_hz as f64 / 2.0) {
            return Err(FeatureError::BadConfig(format!(
                "need 0 <= fmin ({}) < fmax ({}) <= rate/2",
                self.fmin_hz, self.fmax_hz
            )));
        }
        if self.hop == 0 || self.hop > self.frame_len {
            return Err(FeatureError::BadConfig(format!(
                "hop {} must lie in [1, frame_len={}]",
                self.hop, self.frame_len
            )));
        }
        if self.fixed_frames == 0 || self.frame_len == 0 {
            return Err(FeatureError::BadConfig("frame_len and fixed_frames must be positive".into()));
        }
        if !(self.log_floor > 0.0) {
            return Err(FeatureError::BadConfig("log_floor must be positive".into()));
        }
        Ok(())
    }

    /// Hex digest identifying this configuration; stored in model files.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Fixed-shape feature matrix (`n_mfcc` rows x `fixed_frames` columns),
/// row-major, all entries finite.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, FeatureError> {
        assert_eq!(data.len(), rows * cols, "shape/data mismatch");
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite(i / cols, i % cols));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn frobenius_distance(&self, other: &FeatureMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Power spectrogram: `n_bins` rows (frequency) x `n_frames` columns (time),
/// row-major.
#[derive(Debug, Clone)]
pub struct PowerSpectrogram {
    pub n_bins: usize,
    pub n_frames: usize,
    data: Vec<f64>,
}

impl PowerSpectrogram {
    pub fn bin(&self, k: usize) -> &[f64] {
        &self.data[k * self.n_frames..(k + 1) * self.n_frames]
    }
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel filterbank with unit-peak filters, centers uniform on the
/// mel scale between fmin and fmax. Shape: n_mels x (frame_len/2 + 1).
pub fn mel_filterbank(cfg: &MfccConfig) -> Result<Vec<Vec<f64>>, FeatureError> {
    cfg.validate()?;
    let n_bins = cfg.frame_len / 2 + 1;
    let mel_lo = hz_to_mel(cfg.fmin_hz);
    let mel_hi = hz_to_mel(cfg.fmax_hz);
    let edges: Vec<f64> = (0..cfg.n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (cfg.n_mels + 1) as f64))
        .collect();

    let bin_hz = cfg.target_rate_hz as f64 / cfg.frame_len as f64;
    let mut bank = Vec::with_capacity(cfg.n_mels);
    for m in 0..cfg.n_mels {
        let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        let mut row = vec![0.0f64; n_bins];
        let mut nonzero = false;
        for (k, w) in row.iter_mut().enumerate() {
            let f = k as f64 * bin_hz;
            let v = if f <= lo || f >= hi {
                0.0
            } else if f <= center {
                (f - lo) / (center - lo)
            } else {
                (hi - f) / (hi - center)
            };
            if v > 0.0 {
                nonzero = true;
            }
            *w = v;
        }
        if !nonzero {
            return Err(FeatureError::EmptyFilter(m));
        }
        bank.push(row);
    }
    Ok(bank)
}

/// Hann-windowed power STFT. The clip must already be mono at the config's
/// target rate. n_frames = 1 + floor((len - frame_len) / hop).
pub fn stft_power(clip: &AudioClip, cfg: &MfccConfig) -> Result<PowerSpectrogram, FeatureError> {
    cfg.validate()?;
    if !clip.is_mono() {
        return Err(FeatureError::Audio(AudioError::NotMono));
    }
    if clip.sample_rate_hz != cfg.target_rate_hz {
        return Err(FeatureError::BadConfig(format!(
            "clip rate {} != target rate {}; resample first",
            clip.sample_rate_hz, cfg.target_rate_hz
        )));
    }
    let n = clip.samples.len();
    if n < cfg.frame_len {
        return Err(FeatureError::ClipTooShort {
            got_s: clip.duration_s(),
            need_s: cfg.frame_len as f64 / cfg.target_rate_hz as f64,
        });
    }
    let n_frames = 1 + (n - cfg.frame_len) / cfg.hop;
    let n_bins = cfg.frame_len / 2 + 1;
    let window: Vec<f64> = (0..cfg.frame_len)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / cfg.frame_len as f64).cos())
        .collect();

    let fft = rustfft::FftPlanner::new().plan_fft_forward(cfg.frame_len);
    let mut data = vec![0.0f64; n_bins * n_frames];
    let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); cfg.frame_len];
    for t in 0..n_frames {
        let start = t * cfg.hop;
        for i in 0..cfg.frame_len {
            buf[i] = Complex::new(clip.samples[start + i] * window[i], 0.0);
        }
        fft.process(&mut buf);
        for k in 0..n_bins {
            data[k * n_frames + t] = buf[k].norm_sqr();
        }
    }
    Ok(PowerSpectrogram { n_bins, n_frames, data })
}

/// Pre-normalization cepstra: n_mfcc rows, one column per STFT frame.
/// Resamples to the target rate internally.
pub fn mfcc_raw(clip: &AudioClip, cfg: &MfccConfig) -> Result<Vec<Vec<f64>>, FeatureError> {
    cfg.validate()?;
    if !clip.is_mono() {
        return Err(FeatureError::Audio(AudioError::NotMono));
    }
    if clip.duration_s() < 0.2 {
        return Err(FeatureError::ClipTooShort { got_s: clip.duration_s(), need_s: 0.2 });
    }
    let resampled = resample(clip, cfg.target_rate_hz)?;
    let power = stft_power(&resampled, cfg)?;
    let bank = mel_filterbank(cfg)?;
    let t_len = power.n_frames;

    // log mel energies
    let mut log_mel = vec![vec![0.0f64; t_len]; cfg.n_mels];
    for (m, filter) in bank.iter().enumerate() {
        let row = &mut log_mel[m];
        for (k, &w) in filter.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let bin = power.bin(k);
            for t in 0..t_len {
                row[t] += w * bin[t];
            }
        }
        for v in row.iter_mut() {
            *v = v.max(cfg.log_floor).ln();
        }
    }

    // orthonormal DCT-II along the mel axis, keep the first n_mfcc rows
    let m_len = cfg.n_mels as f64;
    let mut out = vec![vec![0.0f64; t_len]; cfg.n_mfcc];
    for i in 0..cfg.n_mfcc {
        let scale = if i == 0 { (1.0 / m_len).sqrt() } else { (2.0 / m_len).sqrt() };
        let row = &mut out[i];
        for m in 0..cfg.n_mels {
            let c = scale * (std::f64::consts::PI * (2.0 * m as f64 + 1.0) * i as f64 / (2.0 * m_len)).cos();
            let src = &log_mel[m];
            for t in 0..t_len {
                row[t] += c * src[t];
            }
        }
    }
    Ok(out)
}

/// Per-coefficient standardization over time (population std), then zero
/// right-padding or center truncation to `fixed_frames`. Rows with std below
/// 1e-8 are degenerate and collapse to exact zeros.
pub fn normalize_and_fix_length(raw: &[Vec<f64>], cfg: &MfccConfig) -> Result<FeatureMatrix, FeatureError> {
    let rows = raw.len();
    let t_len = raw.first().map(|r| r.len()).unwrap_or(0);
    if t_len == 0 {
        return Err(FeatureError::BadConfig("raw matrix has no frames".into()));
    }
    let cols = cfg.fixed_frames;
    let mut data = vec![0.0f64; rows * cols];
    for (r, src) in raw.iter().enumerate() {
        let mean = src.iter().sum::<f64>() / t_len as f64;
        let var = src.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / t_len as f64;
        let std = var.sqrt();
        if std < 1e-8 {
            continue; // constant row: zeros, the columns are already 0.0
        }

        let dst = &mut data[r * cols..(r + 1) * cols];
        if t_len >= cols {
            let start = (t_len - cols) / 2;
            for (i, d) in dst.iter_mut().enumerate() {
                *d = (src[start + i] - mean) / std;
            }
        } else {
            for i in 0..t_len {
                dst[i] = (src[i] - mean) / std;
            }
            // remaining columns stay zero
        }
    }
    FeatureMatrix::new(rows, cols, data)
}

/// Full pipeline: resample -> STFT power -> mel -> log -> DCT-II ->
/// standardize and fix length.
pub fn mfcc(clip: &AudioClip, cfg: &MfccConfig) -> Result<FeatureMatrix, FeatureError> {
    let raw = mfcc_raw(clip, cfg)?;
    normalize_and_fix_length(&raw, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_util::sine_clip;

    fn small_cfg() -> MfccConfig {
        MfccConfig { frame_len: 512, hop: 256, n_mels: 20, n_mfcc: 13, fixed_frames: 32, ..Default::default() }
    }

    #[test]
    fn filterbank_rows_have_support_and_centers_increase() {
        let cfg = MfccConfig::default();
        let bank = mel_filterbank(&cfg).unwrap();
        assert_eq!(bank.len(), cfg.n_mels);
        assert_eq!(bank[0].len(), cfg.frame_len / 2 + 1);

        let mut prev_center = -1.0f64;
        for row in &bank {
            assert!(row.iter().any(|&v| v > 0.0));
            let center = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(k, _)| k as f64)
                .unwrap();
            assert!(center >= prev_center, "peak bins must not decrease");
            prev_center = center;
        }

        // strictly increasing center frequencies come from the mel grid itself
        let lo = hz_to_mel(cfg.fmin_hz);
        let hi = hz_to_mel(cfg.fmax_hz);
        let centers: Vec<f64> = (1..=cfg.n_mels)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (cfg.n_mels + 1) as f64))
            .collect();
        assert!(centers.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn filterbank_summed_response_bounded() {
        let cfg = MfccConfig::default();
        let bank = mel_filterbank(&cfg).unwrap();
        let bin_hz = cfg.target_rate_hz as f64 / cfg.frame_len as f64;
        let n_bins = cfg.frame_len / 2 + 1;
        // brute-force sum across filters at every bin strictly inside (fmin, fmax)
        for k in 0..n_bins {
            let f = k as f64 * bin_hz;
            if f <= cfg.fmin_hz || f >= cfg.fmax_hz {
                continue;
            }
            let sum: f64 = bank.iter().map(|row| row[k]).sum();
            assert!(sum > 0.0 && sum <= 2.0, "bin {k} ({f:.1} Hz) sum {sum}");
        }
    }

    #[test]
    fn filterbank_rejects_excessive_resolution() {
        let cfg = MfccConfig { n_mels: 300, n_mfcc: 10, frame_len: 256, hop: 128, ..Default::default() };
        assert!(matches!(mel_filterbank(&cfg), Err(FeatureError::EmptyFilter(_))));
    }

    #[test]
    fn stft_silence_is_zero() {
        let cfg = small_cfg();
        let clip = AudioClip::mono(vec![0.0; 4096], cfg.target_rate_hz).unwrap();
        let p = stft_power(&clip, &cfg).unwrap();
        assert!(p.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stft_exact_bin_matches_closed_form() {
        let cfg = MfccConfig::default();
        // amplitude-1 sine exactly on bin 64, arbitrary non-zero phase per frame
        let k0 = 64usize;
        let freq = k0 as f64 * cfg.target_rate_hz as f64 / cfg.frame_len as f64;
        let clip = sine_clip(freq, cfg.target_rate_hz, 0.5, 1.0);
        let p = stft_power(&clip, &cfg).unwrap();
        // periodic Hann coherent gain is exactly 0.5
        let expected = (0.5 * cfg.frame_len as f64 / 2.0).powi(2);
        for t in 0..p.n_frames {
            let got = p.bin(k0)[t];
            assert!((got - expected).abs() / expected < 1e-6, "frame {t}: {got} vs {expected}");
            // concentrated: bins away from k0 +- 1 carry nothing
            assert!(p.bin(k0 - 3)[t] < expected * 1e-12);
            assert!(p.bin(k0 + 3)[t] < expected * 1e-12);
        }

        // summed power per frame: peak + two Hann sidelobe bins at a quarter
        // of the peak each, so 1.5x the peak value in total
        for t in 0..p.n_frames {
            let total: f64 = (0..p.n_bins).map(|k| p.bin(k)[t]).sum();
            let closed_form = 1.5 * expected;
            assert!(
                (total - closed_form).abs() / closed_form < 1e-6,
                "frame {t}: summed power {total} vs {closed_form}"
            );
        }
    }

    #[test]
    fn stft_frame_count_boundary() {
        let cfg = small_cfg();
        let clip = AudioClip::mono(vec![0.1; cfg.frame_len], cfg.target_rate_hz).unwrap();
        let p = stft_power(&clip, &cfg).unwrap();
        assert_eq!(p.n_frames, 1);

        let shorter = AudioClip::mono(vec![0.1; cfg.frame_len - 1], cfg.target_rate_hz).unwrap();
        assert!(matches!(stft_power(&shorter, &cfg), Err(FeatureError::ClipTooShort { .. })));
    }

    #[test]
    fn mfcc_is_deterministic() {
        let cfg = small_cfg();
        let clip = sine_clip(440.0, 22050, 0.4, 0.8);
        let a = mfcc(&clip, &cfg).unwrap();
        let b = mfcc(&clip, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn silence_standardizes_to_zero() {
        let cfg = small_cfg();
        let clip = AudioClip::mono(vec![0.0; 22050], 22050).unwrap();
        let m = mfcc(&clip, &cfg).unwrap();
        assert!(m.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sine_c0_exceeds_silence_c0() {
        // raw (pre-normalization) coefficient-0 averages, cross-checked with
        // a direct quadratic-time pipeline evaluation
        let cfg = small_cfg();
        let tone = sine_clip(440.0, 22050, 0.4, 0.8);
        let silence = AudioClip::mono(vec![0.0; (0.4 * 22050.0) as usize], 22050).unwrap();

        let raw_tone = mfcc_raw(&tone, &cfg).unwrap();
        let raw_sil = mfcc_raw(&silence, &cfg).unwrap();
        let avg = |rows: &Vec<Vec<f64>>| rows[0].iter().sum::<f64>() / rows[0].len() as f64;
        assert!(avg(&raw_tone) > avg(&raw_sil));

        let naive = naive_mfcc_c0_average(&tone.samples, &cfg);
        let fast = avg(&raw_tone);
        assert!((naive - fast).abs() / naive.abs() < 1e-6, "naive {naive} vs {fast}");
    }

    /// Independent direct evaluation of coefficient 0: O(N^2) DFT per frame,
    /// scalar mel/log/DCT. Input must already be at the target rate.
    fn naive_mfcc_c0_average(samples: &[f64], cfg: &MfccConfig) -> f64 {
        let n_frames = 1 + (samples.len() - cfg.frame_len) / cfg.hop;
        let n_bins = cfg.frame_len / 2 + 1;
        let bank = mel_filterbank(cfg).unwrap();
        let mut c0_sum = 0.0;
        for t in 0..n_frames {
            let frame = &samples[t * cfg.hop..t * cfg.hop + cfg.frame_len];
            let mut power = vec![0.0f64; n_bins];
            for (k, p) in power.iter_mut().enumerate() {
                let (mut re, mut im) = (0.0, 0.0);
                for (i, &s) in frame.iter().enumerate() {
                    let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / cfg.frame_len as f64).cos();
                    let ang = 2.0 * std::f64::consts::PI * k as f64 * i as f64 / cfg.frame_len as f64;
                    re += s * w * ang.cos();
                    im -= s * w * ang.sin();
                }
                *p = re * re + im * im;
            }
            let mut c0 = 0.0;
            for filter in bank.iter() {
                let mel: f64 = filter.iter().zip(&power).map(|(w, p)| w * p).sum();
                c0 += (1.0 / cfg.n_mels as f64).sqrt() * mel.max(cfg.log_floor).ln();
            }
            c0_sum += c0;
        }
        c0_sum / n_frames as f64
    }

    #[test]
    fn normalize_fixed_point() {
        let cfg = MfccConfig { fixed_frames: 8, ..small_cfg() };
        // zero-mean unit-(population-)std rows of exactly fixed_frames columns
        let row: Vec<f64> = vec![1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
        let raw = vec![row.clone(), row.clone()];
        let m = normalize_and_fix_length(&raw, &cfg).unwrap();
        assert_eq!(m.row(0), &row[..]);
        assert_eq!(m.row(1), &row[..]);
    }

    #[test]
    fn normalize_constant_row_zeroes() {
        let cfg = MfccConfig { fixed_frames: 4, ..small_cfg() };
        let raw = vec![vec![3.25; 4]];
        let m = normalize_and_fix_length(&raw, &cfg).unwrap();
        assert_eq!(m.row(0), &[0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn normalize_center_truncation() {
        let cfg = MfccConfig { fixed_frames: 4, ..small_cfg() };
        let src: Vec<f64> = (0..8).map(|i| i as f64).collect(); // T = 2 * fixed
        let raw = vec![src.clone()];
        let m = normalize_and_fix_length(&raw, &cfg).unwrap();
        // index arithmetic: start = (8 - 4) / 2 = 2; standardized middle window
        let mean = 3.5;
        let std = (src.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 8.0).sqrt();
        let expect: Vec<f64> = (2..6).map(|i| (i as f64 - mean) / std).collect();
        for (a, b) in m.row(0).iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn normalize_pads_after_standardizing() {
        let cfg = MfccConfig { fixed_frames: 6, ..small_cfg() };
        let raw = vec![vec![1.0, 2.0, 3.0]];
        let m = normalize_and_fix_length(&raw, &cfg).unwrap();
        let row = m.row(0);
        assert_eq!(&row[3..], &[0.0, 0.0, 0.0]);
        // unpadded prefix is standardized: mean 0, population std 1
        let mean: f64 = row[..3].iter().sum::<f64>() / 3.0;
        let std = (row[..3].iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 3.0).sqrt();
        assert!(mean.abs() < 1e-12 && (std - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shape_invariance_across_durations() {
        let cfg = small_cfg();
        for dur in [0.2, 1.7, 6.0] {
            let clip = sine_clip(300.0, 22050, dur, 0.5);
            let m = mfcc(&clip, &cfg).unwrap();
            assert_eq!((m.rows(), m.cols()), (cfg.n_mfcc, cfg.fixed_frames));
        }
        let too_short = sine_clip(300.0, 22050, 0.15, 0.5);
        assert!(matches!(mfcc(&too_short, &cfg), Err(FeatureError::ClipTooShort { .. })));
    }

    #[test]
    fn row_statistics_on_unpadded_prefix() {
        let cfg = MfccConfig::default();
        let clip = sine_clip(440.0, 48000, 2.0, 0.7); // exercises the resample path
        let raw = mfcc_raw(&clip, &cfg).unwrap();
        let t_len = raw[0].len().min(cfg.fixed_frames);
        let m = mfcc(&clip, &cfg).unwrap();
        for r in 0..m.rows() {
            let prefix = &m.row(r)[..t_len];
            let mean: f64 = prefix.iter().sum::<f64>() / t_len as f64;
            let std = (prefix.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / t_len as f64).sqrt();
            if std > 1e-6 {
                assert!(mean.abs() <= 1e-6, "row {r} mean {mean}");
                assert!((0.999..=1.001).contains(&std), "row {r} std {std}");
            }
        }
    }

    #[test]
    fn features_move_under_transform() {
        use crate::dsp_transform::{apply_transform, TransformSpec, WsolaConfig};
        let cfg = small_cfg();
        let clip = sine_clip(440.0, 22050, 0.5, 0.8);
        let spec = TransformSpec::new(8.0, 100.0).unwrap();
        let moved = apply_transform(&clip, &spec, &WsolaConfig::default()).unwrap();
        let a = mfcc(&clip, &cfg).unwrap();
        let b = mfcc(&moved, &cfg).unwrap();
        assert!(a.frobenius_distance(&b) > 0.0);
    }

    #[test]
    fn fingerprint_tracks_config() {
        let a = MfccConfig::default().fingerprint();
        let b = MfccConfig::default().fingerprint();
        assert_eq!(a, b);
        let c = MfccConfig { n_mfcc: 13, ..Default::default() }.fingerprint();
        assert_ne!(a, c);
    }
}
